//! Terminology store: MedDRA-style PT/LLT hierarchy with synonyms and
//! semantic types, RxNorm and SNOMED code lists, label-to-substance rows and
//! the NDC crosswalk.
//!
//! A [`TermStore`] is assembled through [`TermStoreBuilder`] from flat rows
//! and is immutable afterwards. The file reader that feeds the builder is in
//! the `pvlens` crate.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ndc::{normalize_ndc, MalformedNdc};
use crate::text::{collapse_whitespace, lookup_key};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Terminology {
    MedDRA,
    RxNorm,
    #[serde(rename = "SNOMED")]
    Snomed,
}

impl Terminology {
    pub fn as_str(self) -> &'static str {
        match self {
            Terminology::MedDRA => "MedDRA",
            Terminology::RxNorm => "RxNorm",
            Terminology::Snomed => "SNOMED",
        }
    }
}

impl fmt::Display for Terminology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Terminology {
    type Err = TermError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "MedDRA" | "MDR" => Ok(Terminology::MedDRA),
            "RxNorm" | "RXNORM" => Ok(Terminology::RxNorm),
            "SNOMED" | "SNOMEDCT_US" => Ok(Terminology::Snomed),
            other => Err(TermError::UnknownTerminology(other.into())),
        }
    }
}

/// MedDRA hierarchy level. Non-MedDRA concepts carry `Na`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TermLevel {
    #[serde(rename = "PT")]
    Pt,
    #[serde(rename = "LLT")]
    Llt,
    #[serde(rename = "NA")]
    Na,
}

impl FromStr for TermLevel {
    type Err = TermError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "PT" => Ok(TermLevel::Pt),
            "LLT" => Ok(TermLevel::Llt),
            "NA" | "" => Ok(TermLevel::Na),
            other => Err(TermError::UnknownLevel(other.into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TermError {
    #[error("unknown terminology {0:?}")]
    UnknownTerminology(String),
    #[error("unknown term level {0:?}")]
    UnknownLevel(String),
    #[error("concept {code}: level {level:?} is not valid for {terminology}")]
    InconsistentLevel {
        code: String,
        terminology: Terminology,
        level: TermLevel,
    },
    #[error("concept {0} defined more than once")]
    DuplicateConcept(String),
    #[error("LLT {code} references missing PT {parent:?}")]
    DanglingLlt { code: String, parent: Option<String> },
    #[error("LLT {code} parent {parent} is not a PT")]
    ParentNotPt { code: String, parent: String },
    #[error("row references unknown concept {0}")]
    UnknownConcept(String),
    #[error("unknown code {0}")]
    UnknownCode(String),
    #[error("empty value for {0}")]
    EmptyField(&'static str),
    #[error("semantic type filter must allow at least one type")]
    EmptyFilter,
    #[error(transparent)]
    MalformedNdc(#[from] MalformedNdc),
}

/// A concept as it appears in `concepts.psv`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptRow {
    pub code: String,
    pub terminology: Terminology,
    pub level: TermLevel,
    pub preferred_name: String,
    pub pt_parent: Option<String>,
}

/// One terminology entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concept {
    pub code: String,
    pub terminology: Terminology,
    pub level: TermLevel,
    pub preferred_name: String,
    /// Always contains `preferred_name`.
    pub synonyms: BTreeSet<String>,
    pub semantic_types: BTreeSet<String>,
    pub pt_parent: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabelSubstance {
    pub substance_id: String,
    pub substance_name: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NdcMapping {
    pub rxnorm_code: Option<String>,
    pub snomed_code: Option<String>,
}

/// Row counts reported after a load.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreCounts {
    pub preferred_terms: usize,
    pub lower_level_terms: usize,
    pub rxnorm: usize,
    pub snomed: usize,
    pub synonyms: usize,
    pub semantic_type_rows: usize,
    pub label_substance_rows: usize,
    pub ndc_rows: usize,
}

#[derive(Debug, Default)]
pub struct TermStoreBuilder {
    concepts: BTreeMap<String, Concept>,
    synonyms: Vec<(String, String)>,
    semtypes: Vec<(String, String)>,
    label_substances: BTreeMap<String, BTreeSet<LabelSubstance>>,
    ndc_map: BTreeMap<String, NdcMapping>,
    counts: StoreCounts,
}

impl TermStoreBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_concept(&mut self, row: ConceptRow) -> Result<(), TermError> {
        let code = row.code.trim().to_string();
        if code.is_empty() {
            return Err(TermError::EmptyField("code"));
        }
        let name = collapse_whitespace(&row.preferred_name);
        if name.is_empty() {
            return Err(TermError::EmptyField("preferred_name"));
        }
        let level_ok = match row.terminology {
            Terminology::MedDRA => matches!(row.level, TermLevel::Pt | TermLevel::Llt),
            _ => row.level == TermLevel::Na,
        };
        if !level_ok {
            return Err(TermError::InconsistentLevel {
                code,
                terminology: row.terminology,
                level: row.level,
            });
        }
        if self.concepts.contains_key(&code) {
            return Err(TermError::DuplicateConcept(code));
        }
        let pt_parent = match row.level {
            TermLevel::Llt => row
                .pt_parent
                .map(|p| p.trim().to_string())
                .filter(|p| !p.is_empty()),
            _ => None,
        };
        let mut synonyms = BTreeSet::new();
        synonyms.insert(name.clone());
        self.concepts.insert(
            code.clone(),
            Concept {
                code,
                terminology: row.terminology,
                level: row.level,
                preferred_name: name,
                synonyms,
                semantic_types: BTreeSet::new(),
                pt_parent,
            },
        );
        Ok(())
    }

    /// Synonym rows may precede or follow their concept; codes are checked
    /// in [`build`](Self::build).
    pub fn add_synonym(&mut self, code: &str, synonym: &str) -> Result<(), TermError> {
        let syn = collapse_whitespace(synonym);
        if syn.is_empty() {
            return Err(TermError::EmptyField("synonym"));
        }
        self.synonyms.push((code.trim().into(), syn));
        Ok(())
    }

    pub fn add_semantic_type(&mut self, code: &str, semantic_type: &str) -> Result<(), TermError> {
        let st = semantic_type.trim();
        if st.is_empty() {
            return Err(TermError::EmptyField("semantic_type"));
        }
        self.semtypes.push((code.trim().into(), st.into()));
        Ok(())
    }

    pub fn add_label_substance(
        &mut self,
        set_id: &str,
        substance_id: &str,
        substance_name: &str,
    ) -> Result<(), TermError> {
        let set_id = set_id.trim();
        let substance_id = substance_id.trim();
        if set_id.is_empty() {
            return Err(TermError::EmptyField("set_id"));
        }
        if substance_id.is_empty() {
            return Err(TermError::EmptyField("substance_id"));
        }
        self.counts.label_substance_rows += 1;
        self.label_substances
            .entry(set_id.into())
            .or_default()
            .insert(LabelSubstance {
                substance_id: substance_id.into(),
                substance_name: collapse_whitespace(substance_name),
            });
        Ok(())
    }

    pub fn add_ndc(
        &mut self,
        ndc: &str,
        rxnorm_code: Option<&str>,
        snomed_code: Option<&str>,
    ) -> Result<(), TermError> {
        let ndc = normalize_ndc(ndc)?;
        let clean = |c: Option<&str>| c.map(str::trim).filter(|c| !c.is_empty()).map(String::from);
        self.counts.ndc_rows += 1;
        self.ndc_map.insert(
            ndc,
            NdcMapping {
                rxnorm_code: clean(rxnorm_code),
                snomed_code: clean(snomed_code),
            },
        );
        Ok(())
    }

    pub fn build(mut self) -> Result<TermStore, TermError> {
        for (code, syn) in core::mem::take(&mut self.synonyms) {
            let concept = self
                .concepts
                .get_mut(&code)
                .ok_or_else(|| TermError::UnknownConcept(code.clone()))?;
            concept.synonyms.insert(syn);
        }
        for (code, st) in core::mem::take(&mut self.semtypes) {
            self.counts.semantic_type_rows += 1;
            let concept = self
                .concepts
                .get_mut(&code)
                .ok_or_else(|| TermError::UnknownConcept(code.clone()))?;
            concept.semantic_types.insert(st);
        }

        for concept in self.concepts.values() {
            if concept.level != TermLevel::Llt {
                continue;
            }
            let parent = concept.pt_parent.as_ref().and_then(|p| self.concepts.get(p));
            match parent {
                None => {
                    return Err(TermError::DanglingLlt {
                        code: concept.code.clone(),
                        parent: concept.pt_parent.clone(),
                    })
                }
                Some(p) if p.level != TermLevel::Pt => {
                    return Err(TermError::ParentNotPt {
                        code: concept.code.clone(),
                        parent: p.code.clone(),
                    })
                }
                Some(_) => {}
            }
        }

        let mut counts = self.counts;
        let mut synonym_index: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for concept in self.concepts.values() {
            match (concept.terminology, concept.level) {
                (Terminology::MedDRA, TermLevel::Pt) => counts.preferred_terms += 1,
                (Terminology::MedDRA, _) => counts.lower_level_terms += 1,
                (Terminology::RxNorm, _) => counts.rxnorm += 1,
                (Terminology::Snomed, _) => counts.snomed += 1,
            }
            counts.synonyms += concept.synonyms.len();
            for syn in &concept.synonyms {
                let codes = synonym_index.entry(lookup_key(syn)).or_default();
                if !codes.contains(&concept.code) {
                    codes.push(concept.code.clone());
                }
            }
        }
        for codes in synonym_index.values_mut() {
            codes.sort();
        }

        let mut substance_labels: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (set_id, subs) in &self.label_substances {
            for s in subs {
                substance_labels
                    .entry(s.substance_id.clone())
                    .or_default()
                    .insert(set_id.clone());
            }
        }

        let fingerprint = fingerprint(&self.concepts);
        Ok(TermStore {
            concepts: self.concepts,
            synonym_index,
            label_substances: self.label_substances,
            substance_labels,
            ndc_map: self.ndc_map,
            counts,
            fingerprint,
        })
    }
}

/// FNV-1a over the matcher-relevant content of the store, used to detect an
/// automaton being paired with a different store.
fn fingerprint(concepts: &BTreeMap<String, Concept>) -> u64 {
    struct Fnv(u64);
    impl Fnv {
        fn write(&mut self, s: &str) {
            for b in s.bytes().chain(core::iter::once(0xff)) {
                self.0 ^= u64::from(b);
                self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
            }
        }
    }
    let mut h = Fnv(0xcbf2_9ce4_8422_2325);
    for c in concepts.values() {
        h.write(&c.code);
        h.write(c.terminology.as_str());
        h.write(match c.level {
            TermLevel::Pt => "PT",
            TermLevel::Llt => "LLT",
            TermLevel::Na => "NA",
        });
        h.write(c.pt_parent.as_deref().unwrap_or(""));
        for s in &c.synonyms {
            h.write(s);
        }
        for s in &c.semantic_types {
            h.write(s);
        }
    }
    h.0
}

/// Immutable lookup tables over loaded terminology.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermStore {
    concepts: BTreeMap<String, Concept>,
    /// Folded synonym -> concept codes (sorted). Collisions are kept.
    synonym_index: BTreeMap<String, Vec<String>>,
    label_substances: BTreeMap<String, BTreeSet<LabelSubstance>>,
    substance_labels: BTreeMap<String, BTreeSet<String>>,
    ndc_map: BTreeMap<String, NdcMapping>,
    counts: StoreCounts,
    fingerprint: u64,
}

static EMPTY_TYPES: BTreeSet<String> = BTreeSet::new();

impl TermStore {
    pub fn counts(&self) -> StoreCounts {
        self.counts
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn concept(&self, code: &str) -> Option<&Concept> {
        self.concepts.get(code)
    }

    pub fn concepts(&self) -> impl Iterator<Item = &Concept> {
        self.concepts.values()
    }

    pub fn meddra_concepts(&self) -> impl Iterator<Item = &Concept> {
        self.concepts
            .values()
            .filter(|c| c.terminology == Terminology::MedDRA)
    }

    /// Case-insensitive synonym lookup across all terminologies.
    pub fn lookup(&self, synonym: &str) -> &[String] {
        self.synonym_index
            .get(&lookup_key(synonym))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Like [`lookup`](Self::lookup) but restricted to MedDRA codes.
    pub fn lookup_meddra(&self, synonym: &str) -> Vec<&Concept> {
        self.lookup(synonym)
            .iter()
            .filter_map(|c| self.concepts.get(c))
            .filter(|c| c.terminology == Terminology::MedDRA)
            .collect()
    }

    /// Maps a MedDRA code to its preferred term: PTs map to themselves, LLTs
    /// to their parent.
    pub fn normalize_to_pt<'a>(&'a self, code: &'a str) -> Result<&'a str, TermError> {
        let concept = self
            .concepts
            .get(code)
            .filter(|c| c.terminology == Terminology::MedDRA)
            .ok_or_else(|| TermError::UnknownCode(code.into()))?;
        match concept.level {
            TermLevel::Llt => Ok(concept.pt_parent.as_deref().unwrap_or(&concept.code)),
            _ => Ok(&concept.code),
        }
    }

    /// Semantic types used for filtering: the concept's own, or its PT's
    /// when an LLT carries none.
    pub fn effective_semantic_types(&self, code: &str) -> &BTreeSet<String> {
        let Some(concept) = self.concepts.get(code) else {
            return &EMPTY_TYPES;
        };
        if concept.semantic_types.is_empty() {
            if let Some(parent) = concept.pt_parent.as_ref().and_then(|p| self.concepts.get(p)) {
                return &parent.semantic_types;
            }
        }
        &concept.semantic_types
    }

    pub fn substances_for_label(&self, set_id: &str) -> Option<&BTreeSet<LabelSubstance>> {
        self.label_substances.get(set_id)
    }

    pub fn labels_for_substance(&self, substance_id: &str) -> Option<&BTreeSet<String>> {
        self.substance_labels.get(substance_id)
    }

    pub fn ndc(&self, normalized_ndc: &str) -> Option<&NdcMapping> {
        self.ndc_map.get(normalized_ndc)
    }
}

/// Generic phrases removed from match output. Entries are folded and
/// whitespace-collapsed; multiword phrases are kept whole.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopwordList {
    entries: BTreeSet<String>,
}

impl StopwordList {
    pub fn new<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let entries = entries
            .into_iter()
            .map(|e| lookup_key(e.as_ref()))
            .filter(|e| !e.is_empty())
            .collect();
        Self { entries }
    }

    pub fn contains(&self, surface: &str) -> bool {
        !self.entries.is_empty() && self.entries.contains(&lookup_key(surface))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(String::as_str)
    }
}

/// UMLS semantic types for clinical findings, diseases, signs and symptoms.
/// Quantitative concepts (T081) are deliberately absent.
pub const DEFAULT_SEMANTIC_TYPES: &[&str] = &[
    "T019", // Congenital Abnormality
    "T020", // Acquired Abnormality
    "T033", // Finding
    "T034", // Laboratory or Test Result
    "T037", // Injury or Poisoning
    "T046", // Pathologic Function
    "T047", // Disease or Syndrome
    "T048", // Mental or Behavioral Dysfunction
    "T049", // Cell or Molecular Dysfunction
    "T184", // Sign or Symptom
    "T190", // Anatomical Abnormality
    "T191", // Neoplastic Process
];

/// Allow-list of semantic types a matched concept must carry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticTypeFilter {
    allowed: BTreeSet<String>,
}

impl SemanticTypeFilter {
    pub fn new<I, S>(allowed: I) -> Result<Self, TermError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let allowed: BTreeSet<String> = allowed
            .into_iter()
            .map(|s| s.as_ref().trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        if allowed.is_empty() {
            return Err(TermError::EmptyFilter);
        }
        Ok(Self { allowed })
    }

    pub fn allows_any(&self, types: &BTreeSet<String>) -> bool {
        types.iter().any(|t| self.allowed.contains(t))
    }

    pub fn allowed(&self) -> impl Iterator<Item = &str> {
        self.allowed.iter().map(String::as_str)
    }
}

impl Default for SemanticTypeFilter {
    fn default() -> Self {
        Self::new(DEFAULT_SEMANTIC_TYPES.iter().copied()).expect("default list is non-empty")
    }
}
