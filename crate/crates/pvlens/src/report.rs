//! Metrics computed offline from a decision export.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::BufRead;

use pvlens_core::metrics::{
    adjudicator_agreement, classify_user_added, fn_report, overall_agreement, score, AdjudicatorAgreement,
    ConfusionCounts, Counts, FnSummary, FnVerdict, ReviewerVerdicts, Scores, Verdict,
};
use pvlens_core::review::{paired_from_export, ExportRecord};
use pvlens_core::text::lookup_key;
use pvlens_core::{SectionCategory, SemanticTypeFilter, StopwordList, TermStore};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn read_export<R: BufRead>(input: R) -> Result<Vec<ExportRecord>, ReportError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| ReportError::Json { line: i + 1, source })?);
    }
    Ok(out)
}

/// Each reviewer's verdicts with the term's final verdict, from rows that
/// carry two decisions.
pub fn reviewer_verdicts_from_export(records: &[ExportRecord]) -> Vec<ReviewerVerdicts> {
    let mut by: BTreeMap<&str, Vec<(Verdict, Option<Verdict>)>> = BTreeMap::new();
    for r in records {
        if let ExportRecord::Term {
            decisions,
            final_verdict,
            ..
        } = r
        {
            if decisions.len() != 2 {
                continue;
            }
            for d in decisions {
                by.entry(&d.reviewer_id).or_default().push((d.verdict, *final_verdict));
            }
        }
    }
    by.into_iter()
        .map(|(r, verdicts)| ReviewerVerdicts {
            reviewer: r.into(),
            verdicts,
        })
        .collect()
}

/// Dictionary needed to classify proposed terms.
pub struct Classifier<'a> {
    pub store: &'a TermStore,
    pub stopwords: &'a StopwordList,
    pub filter: &'a SemanticTypeFilter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub terms: usize,
    pub user_terms: usize,
    pub counts: ConfusionCounts,
    pub scores: BTreeMap<String, Scores>,
    pub overall_agreement: Option<f64>,
    pub adjudicator_agreement: Option<AdjudicatorAgreement>,
    /// Present only when a terminology was supplied.
    pub user_term_summary: Option<FnSummary>,
}

/// TP/FP come from final verdicts. FN needs the classifier: accepted user
/// terms classified as true misses, once per `(set_id, category, PT)`.
pub fn metrics_from_export(records: &[ExportRecord], classifier: Option<&Classifier<'_>>) -> MetricsReport {
    let mut counts = ConfusionCounts::default();
    let mut extracted: BTreeMap<(&str, SectionCategory), BTreeSet<String>> = BTreeMap::new();
    let mut terms = 0;
    for r in records {
        if let ExportRecord::Term {
            set_id,
            category,
            pt_code,
            final_verdict,
            ..
        } = r
        {
            terms += 1;
            extracted.entry((set_id, *category)).or_default().insert(pt_code.clone());
            match final_verdict {
                Some(Verdict::Include) => counts.add(*category, Counts::new(1, 0, 0)),
                Some(Verdict::Exclude) => counts.add(*category, Counts::new(0, 1, 0)),
                None => {}
            }
        }
    }

    let mut user_terms = 0;
    let mut classified = Vec::new();
    let mut missed = BTreeSet::new();
    for r in records {
        if let ExportRecord::UserTerm {
            set_id,
            category,
            text,
            adjudicator_verdict,
            ..
        } = r
        {
            user_terms += 1;
            let Some(c) = classifier else { continue };
            let empty = BTreeSet::new();
            let ex = extracted.get(&(set_id.as_str(), *category)).unwrap_or(&empty);
            let fc = classify_user_added(text, c.store, c.stopwords, c.filter, ex);
            if *adjudicator_verdict == Some(Verdict::Include) && fc.verdict == FnVerdict::TrueFalseNegative {
                let key = fc.pt_code.clone().unwrap_or_else(|| lookup_key(text));
                if missed.insert((set_id.clone(), *category, key)) {
                    counts.add(*category, Counts::new(0, 0, 1));
                }
            }
            classified.push((*category, fc.verdict));
        }
    }

    let mut scores = BTreeMap::new();
    for c in SectionCategory::ALL {
        if let Ok(s) = score(counts.category(c)) {
            scores.insert(c.as_str().to_string(), s);
        }
    }
    if let Ok(s) = score(counts.overall()) {
        scores.insert("overall".into(), s);
    }
    MetricsReport {
        terms,
        user_terms,
        overall_agreement: overall_agreement(&paired_from_export(records)).ok(),
        adjudicator_agreement: adjudicator_agreement(&reviewer_verdicts_from_export(records)).ok(),
        user_term_summary: classifier.map(|_| fn_report(classified.iter().map(|(c, v)| (*c, v)))),
        counts,
        scores,
    }
}

fn pct(x: f64) -> String {
    format!("{:.1}%", 100.0 * x)
}

/// Plain-text table of the report.
pub fn render_table(r: &MetricsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<16} {:>6} {:>6} {:>6} {:>9} {:>7} {:>7}", "category", "TP", "FP", "FN", "precision", "recall", "F1");
    let mut row = |name: &str, c: Counts| {
        let s = r.scores.get(name);
        let f = |g: fn(&Scores) -> f64| s.map(|s| pct(g(s))).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "{:<16} {:>6} {:>6} {:>6} {:>9} {:>7} {:>7}",
            name,
            c.tp,
            c.fp,
            c.fn_,
            f(|s| s.precision),
            f(|s| s.recall),
            f(|s| s.f1)
        );
    };
    for c in SectionCategory::ALL {
        row(c.as_str(), r.counts.category(c));
    }
    row("overall", r.counts.overall());
    if let Some(a) = r.overall_agreement {
        let _ = writeln!(out, "overall agreement: {}", pct(a));
    }
    if let Some(a) = &r.adjudicator_agreement {
        let _ = writeln!(out, "adjudicator agreement (median over reviewers): {}", pct(a.median));
    }
    if let Some(s) = &r.user_term_summary {
        let _ = writeln!(out, "user-added terms: {} ({} true misses, {})", s.total, s.count(FnVerdict::TrueFalseNegative), pct(s.true_fn_fraction));
    }
    out
}
