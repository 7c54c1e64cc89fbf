//! Dictionary-based term extraction.
//!
//! Every MedDRA synonym in the store is compiled into one Aho-Corasick
//! automaton over case-folded characters. A scan reports every occurrence
//! whose span does not split a token; selection then applies, in order:
//!
//! 1. longest match at each start offset,
//! 2. removal of matches strictly contained in another match,
//! 3. removal of matches whose surface is a stopword,
//! 4. removal of concepts with no allowed semantic type.
//!
//! Matches that overlap without containment are both kept. Identical spans
//! produced by a synonym shared between concepts yield one match per concept.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::label::LabelSection;
use crate::terms::{SemanticTypeFilter, StopwordList, TermStore};
use crate::text::{fold_char, is_token_aligned, lookup_key};
use crate::SectionCategory;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MatchError {
    #[error("dictionary has no MedDRA synonyms")]
    EmptyDictionary,
    #[error("automaton was built from a different terminology store")]
    StoreMismatch,
}

/// Half-open byte range into section text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

/// An unfiltered synonym occurrence.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RawMatch {
    pub span: Span,
    /// Folded synonym text.
    pub synonym: String,
}

/// One extracted mention.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TermMatch {
    pub concept_code: String,
    pub pt_code: String,
    pub surface: String,
    pub span: Span,
    pub category: SectionCategory,
}

/// Distinct preferred term within one section, with every supporting mention.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedTerm {
    pub pt_code: String,
    pub category: SectionCategory,
    pub mentions: Vec<TermMatch>,
}

const NONE: u32 = u32::MAX;
const ROOT: u32 = 0;

#[derive(Debug, Clone)]
struct State {
    /// Sorted by char.
    trans: Vec<(char, u32)>,
    fail: u32,
    /// Pattern ending exactly at this state.
    output: u32,
    /// Nearest state on the failure chain with an output.
    dict_link: u32,
}

impl State {
    fn new() -> Self {
        State {
            trans: Vec::new(),
            fail: ROOT,
            output: NONE,
            dict_link: NONE,
        }
    }

    #[inline]
    fn goto(&self, c: char) -> Option<u32> {
        if self.trans.len() <= 8 {
            self.trans.iter().find(|(k, _)| *k == c).map(|&(_, s)| s)
        } else {
            self.trans
                .binary_search_by_key(&c, |&(k, _)| k)
                .ok()
                .map(|i| self.trans[i].1)
        }
    }
}

#[derive(Debug, Clone)]
struct Pattern {
    folded: String,
    char_len: usize,
    /// MedDRA concept codes that carry this synonym, sorted.
    concepts: Vec<String>,
}

/// Compiled multi-pattern matcher over every MedDRA synonym of a store.
#[derive(Debug, Clone)]
pub struct MatchAutomaton {
    states: Vec<State>,
    /// Dense root transitions for ASCII input.
    root_ascii: [u32; 128],
    patterns: Vec<Pattern>,
    store_fingerprint: u64,
}

impl MatchAutomaton {
    pub fn build(store: &TermStore) -> Result<Self, MatchError> {
        let mut by_pattern: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for concept in store.meddra_concepts() {
            for syn in &concept.synonyms {
                let key = lookup_key(syn);
                if key.is_empty() {
                    continue;
                }
                let codes = by_pattern.entry(key).or_default();
                if !codes.contains(&concept.code) {
                    codes.push(concept.code.clone());
                }
            }
        }
        if by_pattern.is_empty() {
            return Err(MatchError::EmptyDictionary);
        }

        let mut states = vec![State::new()];
        let mut patterns = Vec::with_capacity(by_pattern.len());
        for (folded, mut concepts) in by_pattern {
            concepts.sort();
            let mut cur = ROOT as usize;
            for c in folded.chars() {
                cur = match states[cur].goto(c) {
                    Some(next) => next as usize,
                    None => {
                        let next = states.len() as u32;
                        states.push(State::new());
                        let trans = &mut states[cur].trans;
                        let pos = trans.partition_point(|&(k, _)| k < c);
                        trans.insert(pos, (c, next));
                        next as usize
                    }
                };
            }
            states[cur].output = patterns.len() as u32;
            patterns.push(Pattern {
                char_len: folded.chars().count(),
                folded,
                concepts,
            });
        }

        // Breadth-first failure links.
        let mut queue: VecDeque<u32> = VecDeque::new();
        for &(_, child) in &states[ROOT as usize].trans {
            queue.push_back(child);
        }
        while let Some(s) = queue.pop_front() {
            let trans = states[s as usize].trans.clone();
            for (c, child) in trans {
                let mut f = states[s as usize].fail;
                let target = loop {
                    if let Some(t) = states[f as usize].goto(c) {
                        break t;
                    }
                    if f == ROOT {
                        break ROOT;
                    }
                    f = states[f as usize].fail;
                };
                let fail = if target == child { ROOT } else { target };
                let dict_link = if states[fail as usize].output != NONE {
                    fail
                } else {
                    states[fail as usize].dict_link
                };
                let st = &mut states[child as usize];
                st.fail = fail;
                st.dict_link = dict_link;
                queue.push_back(child);
            }
        }

        let mut root_ascii = [ROOT; 128];
        for &(c, s) in &states[ROOT as usize].trans {
            if c.is_ascii() {
                root_ascii[c as usize] = s;
            }
        }

        Ok(MatchAutomaton {
            states,
            root_ascii,
            patterns,
            store_fingerprint: store.fingerprint(),
        })
    }

    pub fn pattern_count(&self) -> usize {
        self.patterns.len()
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn store_fingerprint(&self) -> u64 {
        self.store_fingerprint
    }

    #[inline]
    fn step(&self, mut state: u32, c: char) -> u32 {
        loop {
            if state == ROOT {
                if c.is_ascii() {
                    return self.root_ascii[c as usize];
                }
                return self.states[ROOT as usize].goto(c).unwrap_or(ROOT);
            }
            let st = &self.states[state as usize];
            if let Some(next) = st.goto(c) {
                return next;
            }
            state = st.fail;
        }
    }

    /// Calls `f(pattern_index, span)` for every token-aligned occurrence.
    fn scan<F: FnMut(usize, Span)>(&self, text: &str, mut f: F) {
        let mut char_starts: Vec<usize> = Vec::with_capacity(text.len());
        let mut state = ROOT;
        for (idx, (byte, c)) in text.char_indices().enumerate() {
            char_starts.push(byte);
            state = self.step(state, fold_char(c));
            let end = byte + c.len_utf8();
            let st = &self.states[state as usize];
            let mut hit = if st.output != NONE { state } else { st.dict_link };
            while hit != NONE {
                let h = &self.states[hit as usize];
                let p = h.output as usize;
                let start = char_starts[idx + 1 - self.patterns[p].char_len];
                if is_token_aligned(text, start, end) {
                    f(p, Span { start, end });
                }
                hit = h.dict_link;
            }
        }
    }

    /// Every token-aligned synonym occurrence, unfiltered, sorted.
    pub fn find_all(&self, text: &str) -> Vec<RawMatch> {
        let mut out = Vec::new();
        self.scan(text, |p, span| {
            out.push(RawMatch {
                span,
                synonym: self.patterns[p].folded.clone(),
            })
        });
        out.sort();
        out
    }
}

/// Brute-force scan: every synonym tried at every character offset. Used as
/// the reference the automaton is checked against.
pub fn match_all_naive(text: &str, store: &TermStore) -> Vec<RawMatch> {
    let mut synonyms: Vec<String> = store
        .meddra_concepts()
        .flat_map(|c| c.synonyms.iter().map(|s| lookup_key(s)))
        .filter(|s| !s.is_empty())
        .collect();
    synonyms.sort();
    synonyms.dedup();

    let folded: Vec<(usize, char)> = text.char_indices().map(|(i, c)| (i, fold_char(c))).collect();
    let mut out = Vec::new();
    for syn in &synonyms {
        let pat: Vec<char> = syn.chars().collect();
        for i in 0..folded.len() {
            if i + pat.len() > folded.len() {
                break;
            }
            if folded[i..i + pat.len()].iter().map(|&(_, c)| c).eq(pat.iter().copied()) {
                let start = folded[i].0;
                let end = folded.get(i + pat.len()).map_or(text.len(), |&(b, _)| b);
                if is_token_aligned(text, start, end) {
                    out.push(RawMatch {
                        span: Span { start, end },
                        synonym: syn.clone(),
                    });
                }
            }
        }
    }
    out.sort();
    out
}

/// Extracts mentions from one section.
pub fn extract_terms(
    section: &LabelSection,
    automaton: &MatchAutomaton,
    store: &TermStore,
    stopwords: &StopwordList,
    filter: &SemanticTypeFilter,
) -> Result<Vec<TermMatch>, MatchError> {
    extract_from_text(&section.text, section.category, automaton, store, stopwords, filter)
}

/// Same as [`extract_terms`] over bare text.
pub fn extract_from_text(
    text: &str,
    category: SectionCategory,
    automaton: &MatchAutomaton,
    store: &TermStore,
    stopwords: &StopwordList,
    filter: &SemanticTypeFilter,
) -> Result<Vec<TermMatch>, MatchError> {
    if automaton.store_fingerprint != store.fingerprint() {
        return Err(MatchError::StoreMismatch);
    }

    // (pattern, span) hits ordered by start, longest first.
    let mut hits: Vec<(Span, usize)> = Vec::new();
    automaton.scan(text, |p, span| hits.push((span, p)));
    hits.sort_by(|a, b| a.0.start.cmp(&b.0.start).then(b.0.end.cmp(&a.0.end)));

    let mut out = Vec::new();
    let mut reach = 0usize;
    let mut last_start = None;
    for (span, p) in hits {
        // Longest at this start was seen first; anything after it at the same
        // start is shorter.
        if last_start == Some(span.start) {
            continue;
        }
        last_start = Some(span.start);
        // An earlier start reaching at least this far strictly contains it.
        if span.end <= reach {
            continue;
        }
        reach = span.end;

        let surface = &text[span.start..span.end];
        if stopwords.contains(surface) {
            continue;
        }
        for code in &automaton.patterns[p].concepts {
            if !filter.allows_any(store.effective_semantic_types(code)) {
                continue;
            }
            let pt = store
                .normalize_to_pt(code)
                .map_err(|_| MatchError::StoreMismatch)?;
            out.push(TermMatch {
                concept_code: code.clone(),
                pt_code: pt.into(),
                surface: surface.into(),
                span,
                category,
            });
        }
    }
    Ok(out)
}

/// Collapses mentions to distinct `(pt_code, category)` pairs, keeping all
/// mentions. Output is sorted by category then PT code.
pub fn group_terms(matches: &[TermMatch]) -> Vec<ExtractedTerm> {
    let mut grouped: BTreeMap<(SectionCategory, &str), Vec<TermMatch>> = BTreeMap::new();
    for m in matches {
        grouped
            .entry((m.category, m.pt_code.as_str()))
            .or_default()
            .push(m.clone());
    }
    grouped
        .into_iter()
        .map(|((category, pt), mentions)| ExtractedTerm {
            pt_code: pt.into(),
            category,
            mentions,
        })
        .collect()
}
