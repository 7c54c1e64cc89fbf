//! Brute-force extraction oracle and random dictionary/text generator,
//! shared by the matcher property tests and the acceptance suite.
//!
//! The oracle does not use the automaton or the crate's text helpers: it
//! slides every synonym over every char boundary, checks token boundaries
//! itself and applies the selection rules by pairwise comparison.

#![allow(dead_code)]

use std::collections::BTreeSet;

use proptest::prelude::*;
use pvlens_core::terms::{ConceptRow, TermStoreBuilder};
use pvlens_core::{
    SectionCategory, SemanticTypeFilter, Span, StopwordList, TermLevel, TermMatch, TermStore, Terminology,
};

fn lower(c: char) -> char {
    let mut it = c.to_lowercase();
    match (it.next(), it.next()) {
        (Some(l), None) => l,
        _ => c,
    }
}

fn is_word(c: char) -> bool {
    c == '-' || c.is_alphanumeric()
}

/// Occurrence of `pat` (already lowercased) at byte `start` of `text`,
/// returning the end offset.
fn occurs_at(text: &str, start: usize, pat: &[char]) -> Option<usize> {
    let mut chars = text[start..].char_indices();
    for &p in pat {
        let (_, c) = chars.next()?;
        if lower(c) != p {
            return None;
        }
    }
    Some(chars.next().map_or(text.len(), |(i, _)| start + i))
}

fn boundary_ok(text: &str, start: usize, end: usize) -> bool {
    let first = text[start..end].chars().next().unwrap();
    let last = text[start..end].chars().last().unwrap();
    let left = text[..start].chars().last().is_none_or(|b| !(is_word(b) && is_word(first)));
    let right = text[end..].chars().next().is_none_or(|a| !(is_word(a) && is_word(last)));
    left && right
}

fn own_types(store: &TermStore, code: &str) -> BTreeSet<String> {
    let c = store.concept(code).unwrap();
    if !c.semantic_types.is_empty() {
        return c.semantic_types.clone();
    }
    c.pt_parent
        .as_deref()
        .map(|p| store.concept(p).unwrap().semantic_types.clone())
        .unwrap_or_default()
}

pub fn oracle_extract(
    text: &str,
    category: SectionCategory,
    store: &TermStore,
    stopwords: &[String],
    allowed: &[&str],
) -> Vec<TermMatch> {
    // Every (span, concept) occurrence.
    let mut cands: Vec<(usize, usize, String)> = Vec::new();
    for c in store.meddra_concepts() {
        for syn in &c.synonyms {
            let pat: Vec<char> = syn.split_whitespace().collect::<Vec<_>>().join(" ").chars().map(lower).collect();
            for (start, _) in text.char_indices() {
                if let Some(end) = occurs_at(text, start, &pat) {
                    if boundary_ok(text, start, end) {
                        cands.push((start, end, c.code.clone()));
                    }
                }
            }
        }
    }
    cands.sort();
    cands.dedup();
    let spans: BTreeSet<(usize, usize)> = cands.iter().map(|&(s, e, _)| (s, e)).collect();
    // Longest per start.
    let longest: BTreeSet<(usize, usize)> = spans
        .iter()
        .copied()
        .filter(|&(s, e)| !spans.iter().any(|&(s2, e2)| s2 == s && e2 > e))
        .collect();
    // Not strictly inside another survivor.
    let outer: BTreeSet<(usize, usize)> = longest
        .iter()
        .copied()
        .filter(|&(s, e)| !longest.iter().any(|&(s2, e2)| (s2, e2) != (s, e) && s2 <= s && e <= e2))
        .collect();
    let stop: BTreeSet<String> = stopwords
        .iter()
        .map(|w| w.split_whitespace().collect::<Vec<_>>().join(" ").chars().map(lower).collect())
        .collect();
    let mut out = Vec::new();
    for (s, e, code) in cands {
        if !outer.contains(&(s, e)) {
            continue;
        }
        let surface = &text[s..e];
        let key: String = surface.split_whitespace().collect::<Vec<_>>().join(" ").chars().map(lower).collect();
        if stop.contains(&key) {
            continue;
        }
        if !own_types(store, &code).iter().any(|t| allowed.contains(&t.as_str())) {
            continue;
        }
        let c = store.concept(&code).unwrap();
        let pt = c.pt_parent.clone().unwrap_or_else(|| code.clone());
        out.push(TermMatch {
            concept_code: code,
            pt_code: pt,
            surface: surface.to_string(),
            span: Span { start: s, end: e },
            category,
        });
    }
    out.sort();
    out
}

pub const VOCAB: &[&str] = &["ab", "abc", "cd", "ef", "gh", "x-ray", "ödem", "İx", "na"];
const FILLER: &[&str] = &["zz", "q", "7", "the"];
const SEPS: &[&str] = &[" ", " ", " ", ", ", "-", ". ", "  ", "\n", "é", "/"];
pub const ALLOWED: &[&str] = &["T047", "T184"];
const TYPES: &[Option<&str>] = &[Some("T047"), Some("T184"), Some("T081"), None];

#[derive(Debug, Clone)]
pub struct Case {
    pub store: TermStore,
    pub stopwords: Vec<String>,
    pub text: String,
}

impl Case {
    pub fn stopword_list(&self) -> StopwordList {
        StopwordList::new(&self.stopwords)
    }

    pub fn filter() -> SemanticTypeFilter {
        SemanticTypeFilter::new(ALLOWED.iter().copied()).unwrap()
    }
}

fn phrase() -> impl Strategy<Value = String> {
    (
        prop::collection::vec(prop::sample::select(VOCAB), 1..=3),
        prop::sample::select(&[" ", "-"][..]),
    )
        .prop_map(|(w, sep)| w.join(sep))
}

fn cased(word: &str, mode: u8) -> String {
    match mode {
        0 => word.to_string(),
        1 => word.to_uppercase(),
        _ => {
            let mut cs = word.chars();
            cs.next().map(|c| c.to_uppercase().chain(cs).collect()).unwrap_or_default()
        }
    }
}

fn text() -> impl Strategy<Value = String> {
    prop::collection::vec(
        (
            prop_oneof![3 => prop::sample::select(VOCAB), 1 => prop::sample::select(FILLER)],
            0u8..3,
            prop::sample::select(SEPS),
        ),
        0..90,
    )
    .prop_map(|toks| {
        let mut t = String::new();
        for (w, mode, sep) in toks {
            let piece = format!("{}{}", cased(w, mode), sep);
            if t.len() + piece.len() > 500 {
                break;
            }
            t.push_str(&piece);
        }
        t
    })
}

/// Random dictionary of at most 50 synonyms, stopwords and a text of at
/// most 500 bytes.
pub fn case() -> impl Strategy<Value = Case> {
    let pts = prop::collection::vec((phrase(), prop::sample::select(TYPES)), 1..8);
    let llts = prop::collection::vec((phrase(), any::<prop::sample::Index>(), prop::sample::select(TYPES)), 0..8);
    let extra = prop::collection::vec((any::<prop::sample::Index>(), phrase()), 0..30);
    let stop = prop::collection::vec(phrase(), 0..3);
    (pts, llts, extra, stop, text()).prop_map(|(pts, llts, extra, stop, text)| {
        let mut b = TermStoreBuilder::new();
        let mut codes = Vec::new();
        for (i, (name, ty)) in pts.iter().enumerate() {
            let code = format!("P{i}");
            b.add_concept(ConceptRow {
                code: code.clone(),
                terminology: Terminology::MedDRA,
                level: TermLevel::Pt,
                preferred_name: name.clone(),
                pt_parent: None,
            })
            .unwrap();
            if let Some(t) = ty {
                b.add_semantic_type(&code, t).unwrap();
            }
            codes.push(code);
        }
        let pt_count = codes.len();
        for (i, (name, parent, ty)) in llts.iter().enumerate() {
            let code = format!("L{i}");
            b.add_concept(ConceptRow {
                code: code.clone(),
                terminology: Terminology::MedDRA,
                level: TermLevel::Llt,
                preferred_name: name.clone(),
                pt_parent: Some(codes[parent.index(pt_count)].clone()),
            })
            .unwrap();
            if let Some(t) = ty {
                b.add_semantic_type(&code, t).unwrap();
            }
            codes.push(code);
        }
        // Preferred names count towards the 50-synonym budget.
        for (idx, syn) in extra.iter().take(50usize.saturating_sub(codes.len())) {
            b.add_synonym(&codes[idx.index(codes.len())], syn).unwrap();
        }
        Case {
            store: b.build().unwrap(),
            stopwords: stop,
            text,
        }
    })
}

pub mod merge {
    use std::collections::BTreeMap;

    use proptest::prelude::*;
    use pvlens_core::{Date, LabeledEvent, Provenance, SectionCategory, Span};

    pub fn date(days: u32) -> Date {
        Date::from_ymd_opt(2020, 1, 1).unwrap() + chrono::Days::new(days as u64)
    }

    /// A run: distinct keys over 4 substances x 3 categories x 6 PTs, each
    /// with 1-3 provenance entries and an optional safety-change date.
    pub fn run() -> impl Strategy<Value = Vec<LabeledEvent>> {
        prop::collection::btree_map(
            (0u8..4, 0usize..3, 0u8..6),
            (prop::collection::btree_set((0u8..5, 1u32..3, 0usize..50), 1..4), prop::option::of(0u32..400)),
            0..40,
        )
        .prop_map(|m: BTreeMap<_, _>| {
            m.into_iter()
                .map(|((s, c, p), (prov, srlc))| LabeledEvent {
                    substance_id: format!("S{s}"),
                    substance_name: format!("substance {s}"),
                    pt_code: format!("100{p}"),
                    category: SectionCategory::ALL[c],
                    first_seen_date: date(0),
                    last_seen_date: date(0),
                    srlc_date: srlc.map(date),
                    provenance: prov
                        .into_iter()
                        .map(|(g, v, at)| Provenance {
                            set_id: format!("G{g}"),
                            doc_version: v,
                            span: Span { start: at, end: at + 4 },
                        })
                        .collect(),
                })
                .collect()
        })
    }
}
