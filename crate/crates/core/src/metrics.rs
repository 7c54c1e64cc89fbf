//! Validation statistics: confusion counts and precision/recall/F1, reviewer
//! agreement, adjudicator agreement and the user-added term classifier used
//! for false-negative analysis.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::terms::{SemanticTypeFilter, StopwordList, TermStore};
use crate::SectionCategory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Include,
    Exclude,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("precision or recall denominator is zero (tp={tp}, fp={fp}, fn={fn_})")]
    DegenerateCounts { tp: u64, fp: u64, fn_: u64 },
    #[error("term {term} has {count} reviewer verdicts, expected 2")]
    UnpairedTerm { term: String, count: usize },
    #[error("no terms to compare")]
    NoTerms,
    #[error("missing adjudicated verdict{}", .0.as_ref().map(|r| alloc::format!(" for reviewer {r}")).unwrap_or_default())]
    MissingAdjudication(Option<String>),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Counts {
    pub const fn new(tp: u64, fp: u64, fn_: u64) -> Self {
        Counts { tp, fp, fn_ }
    }
}

impl core::ops::AddAssign for Counts {
    fn add_assign(&mut self, rhs: Self) {
        self.tp += rhs.tp;
        self.fp += rhs.fp;
        self.fn_ += rhs.fn_;
    }
}

/// Per-category confusion counts; the overall row is always derived.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub by_category: BTreeMap<SectionCategory, Counts>,
}

impl ConfusionCounts {
    pub fn add(&mut self, category: SectionCategory, counts: Counts) {
        *self.by_category.entry(category).or_default() += counts;
    }

    pub fn merge(&mut self, other: &ConfusionCounts) {
        for (&c, &n) in &other.by_category {
            self.add(c, n);
        }
    }

    pub fn category(&self, category: SectionCategory) -> Counts {
        self.by_category.get(&category).copied().unwrap_or_default()
    }

    pub fn overall(&self) -> Counts {
        let mut total = Counts::default();
        for &c in self.by_category.values() {
            total += c;
        }
        total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and their harmonic mean.
pub fn score(counts: Counts) -> Result<Scores, MetricsError> {
    let Counts { tp, fp, fn_ } = counts;
    if tp + fp == 0 || tp + fn_ == 0 {
        return Err(MetricsError::DegenerateCounts { tp, fp, fn_ });
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(Scores { precision, recall, f1 })
}

/// Verdicts collected for one term from its reviewers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairedVerdicts {
    pub term: String,
    pub verdicts: Vec<Verdict>,
}

/// Fraction of terms on which both reviewers gave the same verdict.
pub fn overall_agreement(terms: &[PairedVerdicts]) -> Result<f64, MetricsError> {
    if terms.is_empty() {
        return Err(MetricsError::NoTerms);
    }
    let mut concordant = 0usize;
    for t in terms {
        match t.verdicts.as_slice() {
            [a, b] => concordant += usize::from(a == b),
            other => {
                return Err(MetricsError::UnpairedTerm {
                    term: t.term.clone(),
                    count: other.len(),
                })
            }
        }
    }
    Ok(concordant as f64 / terms.len() as f64)
}

/// One reviewer's verdicts paired with the final adjudicated verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewerVerdicts {
    pub reviewer: String,
    pub verdicts: Vec<(Verdict, Option<Verdict>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjudicatorAgreement {
    /// Sorted by reviewer id.
    pub per_reviewer: Vec<(String, f64)>,
    pub median: f64,
}

/// Per-reviewer agreement with the final verdicts and the median across
/// reviewers. Reviewers without verdicts are left out.
pub fn adjudicator_agreement(reviewers: &[ReviewerVerdicts]) -> Result<AdjudicatorAgreement, MetricsError> {
    let mut per_reviewer = Vec::new();
    for r in reviewers {
        if r.verdicts.is_empty() {
            continue;
        }
        let mut agree = 0usize;
        for &(mine, fin) in &r.verdicts {
            let fin = fin.ok_or_else(|| MetricsError::MissingAdjudication(Some(r.reviewer.clone())))?;
            agree += usize::from(mine == fin);
        }
        per_reviewer.push((r.reviewer.clone(), agree as f64 / r.verdicts.len() as f64));
    }
    if per_reviewer.is_empty() {
        return Err(MetricsError::MissingAdjudication(None));
    }
    per_reviewer.sort_by(|a, b| a.0.cmp(&b.0));
    let mut values: Vec<f64> = per_reviewer.iter().map(|(_, p)| *p).collect();
    let median = median(&mut values);
    Ok(AdjudicatorAgreement { per_reviewer, median })
}

/// Median of a non-empty slice; even lengths average the middle pair.
pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Outcome of checking a reviewer-proposed term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FnVerdict {
    TrueFalseNegative,
    AlreadySynonymMapped,
    InvalidSemanticType,
    StopwordExcluded,
    Unmappable,
}

impl FnVerdict {
    pub const ALL: [FnVerdict; 5] = [
        FnVerdict::TrueFalseNegative,
        FnVerdict::AlreadySynonymMapped,
        FnVerdict::InvalidSemanticType,
        FnVerdict::StopwordExcluded,
        FnVerdict::Unmappable,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FnClassification {
    pub verdict: FnVerdict,
    /// PT the text mapped to, when it mapped at all.
    pub pt_code: Option<String>,
}

/// Classifies a user-added term. Checks run in this order: the text must
/// map to a MedDRA concept through synonym lookup; its PT must not already
/// be among `extracted`; some candidate must carry an allowed semantic type;
/// the text must not be a stopword.
pub fn classify_user_added(
    text: &str,
    store: &TermStore,
    stopwords: &StopwordList,
    filter: &SemanticTypeFilter,
    extracted: &BTreeSet<String>,
) -> FnClassification {
    let candidates = store.lookup_meddra(text);
    let pts: Vec<&str> = candidates
        .iter()
        .filter_map(|c| store.normalize_to_pt(&c.code).ok())
        .collect();
    let Some(&first_pt) = pts.first() else {
        return FnClassification {
            verdict: FnVerdict::Unmappable,
            pt_code: None,
        };
    };
    let verdict_with = |verdict: FnVerdict, pt: &str| FnClassification {
        verdict,
        pt_code: Some(pt.into()),
    };
    if let Some(pt) = pts.iter().find(|pt| extracted.contains(**pt)) {
        return verdict_with(FnVerdict::AlreadySynonymMapped, pt);
    }
    let valid: Vec<&str> = candidates
        .iter()
        .zip(&pts)
        .filter(|(c, _)| filter.allows_any(store.effective_semantic_types(&c.code)))
        .map(|(_, pt)| *pt)
        .collect();
    let Some(&valid_pt) = valid.first() else {
        return verdict_with(FnVerdict::InvalidSemanticType, first_pt);
    };
    if stopwords.contains(text) {
        return verdict_with(FnVerdict::StopwordExcluded, valid_pt);
    }
    verdict_with(FnVerdict::TrueFalseNegative, valid_pt)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FnSummary {
    pub total: usize,
    pub by_verdict: BTreeMap<FnVerdict, usize>,
    pub by_category: BTreeMap<SectionCategory, BTreeMap<FnVerdict, usize>>,
    /// Share of user-added terms that are true false negatives; 0 when empty.
    pub true_fn_fraction: f64,
}

impl FnSummary {
    pub fn count(&self, verdict: FnVerdict) -> usize {
        self.by_verdict.get(&verdict).copied().unwrap_or(0)
    }

    pub fn count_in(&self, category: SectionCategory, verdict: FnVerdict) -> usize {
        self.by_category
            .get(&category)
            .and_then(|m| m.get(&verdict))
            .copied()
            .unwrap_or(0)
    }
}

pub fn fn_report<'a, I>(classified: I) -> FnSummary
where
    I: IntoIterator<Item = (SectionCategory, &'a FnVerdict)>,
{
    let mut summary = FnSummary::default();
    for v in FnVerdict::ALL {
        summary.by_verdict.insert(v, 0);
    }
    for (category, &verdict) in classified {
        summary.total += 1;
        *summary.by_verdict.entry(verdict).or_default() += 1;
        *summary
            .by_category
            .entry(category)
            .or_default()
            .entry(verdict)
            .or_default() += 1;
    }
    if summary.total > 0 {
        summary.true_fn_fraction = summary.count(FnVerdict::TrueFalseNegative) as f64 / summary.total as f64;
    }
    summary
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terms::{ConceptRow, TermLevel, TermStoreBuilder, Terminology};
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn perfect_score() {
        let s = score(Counts::new(5, 0, 0)).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn degenerate_counts() {
        assert!(matches!(score(Counts::new(0, 0, 3)), Err(MetricsError::DegenerateCounts { .. })));
        assert!(matches!(score(Counts::new(0, 3, 0)), Err(MetricsError::DegenerateCounts { .. })));
        assert_eq!(score(Counts::new(0, 1, 1)).unwrap().f1, 0.0);
    }

    #[test]
    fn overall_is_sum_of_categories() {
        let mut c = ConfusionCounts::default();
        c.add(SectionCategory::AdverseEvent, Counts::new(1, 2, 3));
        c.add(SectionCategory::Indication, Counts::new(10, 20, 30));
        c.add(SectionCategory::AdverseEvent, Counts::new(1, 0, 0));
        assert_eq!(c.overall(), Counts::new(12, 22, 33));
    }

    fn paired(n: usize, concordant: usize) -> Vec<PairedVerdicts> {
        (0..n)
            .map(|i| PairedVerdicts {
                term: alloc::format!("t{i}"),
                verdicts: if i < concordant {
                    vec![Verdict::Include, Verdict::Include]
                } else {
                    vec![Verdict::Include, Verdict::Exclude]
                },
            })
            .collect()
    }

    #[test]
    fn agreement_proportions() {
        assert_eq!(overall_agreement(&paired(10, 7)).unwrap(), 0.70);
        assert_eq!(overall_agreement(&paired(10, 10)).unwrap(), 1.0);
        let mut bad = paired(2, 2);
        bad[1].verdicts.pop();
        assert_eq!(
            overall_agreement(&bad),
            Err(MetricsError::UnpairedTerm { term: "t1".into(), count: 1 })
        );
    }

    #[test]
    fn adjudicator_single_reviewer() {
        let mut verdicts = vec![(Verdict::Include, Some(Verdict::Include)); 9];
        verdicts.push((Verdict::Include, Some(Verdict::Exclude)));
        let a = adjudicator_agreement(&[ReviewerVerdicts { reviewer: "r1".into(), verdicts }]).unwrap();
        assert_eq!(a.median, 0.9);
        assert_eq!(adjudicator_agreement(&[]), Err(MetricsError::MissingAdjudication(None)));
    }

    #[test]
    fn adjudicator_missing_final() {
        let r = ReviewerVerdicts {
            reviewer: "r1".into(),
            verdicts: vec![(Verdict::Include, None)],
        };
        assert_eq!(
            adjudicator_agreement(&[r]),
            Err(MetricsError::MissingAdjudication(Some("r1".into())))
        );
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&mut [0.95, 0.88, 0.913]), 0.913);
        assert_eq!(median(&mut [1.0, 0.0, 0.5, 0.25]), 0.375);
    }

    fn fixture_store() -> TermStore {
        let mut b = TermStoreBuilder::new();
        let mut add = |code: &str, name: &str, parent: Option<&str>, st: Option<&str>| {
            b.add_concept(ConceptRow {
                code: code.into(),
                terminology: Terminology::MedDRA,
                level: if parent.is_some() { TermLevel::Llt } else { TermLevel::Pt },
                preferred_name: name.into(),
                pt_parent: parent.map(Into::into),
            })
            .unwrap();
            if let Some(st) = st {
                b.add_semantic_type(code, st).unwrap();
            }
        };
        add("P1", "headache", None, Some("T184"));
        add("L1", "cephalalgia", Some("P1"), None);
        add("P2", "urine output", None, Some("T081"));
        add("P3", "adverse reaction", None, Some("T033"));
        add("P4", "nausea", None, Some("T184"));
        b.build().unwrap()
    }

    #[test]
    fn classifier_cases() {
        let store = fixture_store();
        let stop = StopwordList::new(["adverse reaction"]);
        let filter = SemanticTypeFilter::default();
        let extracted: BTreeSet<String> = ["P1".into()].into_iter().collect();
        let v = |t: &str| classify_user_added(t, &store, &stop, &filter, &extracted).verdict;
        assert_eq!(v("cephalalgia"), FnVerdict::AlreadySynonymMapped);
        assert_eq!(v("urine output"), FnVerdict::InvalidSemanticType);
        assert_eq!(v("adverse reaction"), FnVerdict::StopwordExcluded);
        assert_eq!(v("Nausea"), FnVerdict::TrueFalseNegative);
        assert_eq!(v("dizziness"), FnVerdict::Unmappable);
        assert_eq!(
            classify_user_added("nausea", &store, &stop, &filter, &extracted).pt_code.as_deref(),
            Some("P4")
        );
    }

    #[test]
    fn empty_fn_report() {
        let s = fn_report(core::iter::empty());
        assert_eq!(s.total, 0);
        assert_eq!(s.true_fn_fraction, 0.0);
        assert!(FnVerdict::ALL.iter().all(|v| s.count(*v) == 0));
    }

    proptest! {
        #[test]
        fn f1_is_harmonic_mean(tp in 1u64..100_000, fp in 0u64..100_000, fn_ in 0u64..100_000) {
            let s = score(Counts::new(tp, fp, fn_)).unwrap();
            prop_assert!((0.0..=1.0).contains(&s.precision));
            prop_assert!((0.0..=1.0).contains(&s.recall));
            prop_assert!((s.f1 * (s.precision + s.recall) - 2.0 * s.precision * s.recall).abs() <= 1e-12);
        }

        #[test]
        fn agreement_symmetric_and_permutation_invariant(
            pairs in proptest::collection::vec((any::<bool>(), any::<bool>()), 1..60),
            rot in 0usize..60,
        ) {
            let v = |b: bool| if b { Verdict::Include } else { Verdict::Exclude };
            let terms: Vec<PairedVerdicts> = pairs.iter().enumerate()
                .map(|(i, &(a, b))| PairedVerdicts { term: alloc::format!("{i}"), verdicts: vec![v(a), v(b)] })
                .collect();
            let swapped: Vec<PairedVerdicts> = terms.iter()
                .map(|t| PairedVerdicts { term: t.term.clone(), verdicts: vec![t.verdicts[1], t.verdicts[0]] })
                .collect();
            let mut rotated = terms.clone();
            let k = rot % rotated.len();
            rotated.rotate_left(k);
            let base = overall_agreement(&terms).unwrap();
            prop_assert_eq!(base, overall_agreement(&swapped).unwrap());
            prop_assert_eq!(base, overall_agreement(&rotated).unwrap());
        }

        #[test]
        fn fn_report_counts_sum_to_input(idx in proptest::collection::vec((0usize..3, 0usize..5), 0..200)) {
            let items: Vec<(SectionCategory, FnVerdict)> = idx.iter()
                .map(|&(c, v)| (SectionCategory::ALL[c], FnVerdict::ALL[v]))
                .collect();
            let s = fn_report(items.iter().map(|(c, v)| (*c, v)));
            prop_assert_eq!(s.total, items.len());
            prop_assert_eq!(s.by_verdict.values().sum::<usize>(), items.len());
            let per_cat: usize = s.by_category.values().flat_map(|m| m.values()).sum();
            prop_assert_eq!(per_cat, items.len());
        }
    }
}
