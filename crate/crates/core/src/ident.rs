//! Label and package identifier crosswalks: set id to substance via the
//! label-substance table, NDC to RxNorm/SNOMED codes.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::ndc::{normalize_ndc, MalformedNdc};
use crate::terms::{NdcMapping, TermStore};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IdentError {
    #[error("label {0} has no substance mapping")]
    UnmappedLabel(String),
    #[error(transparent)]
    MalformedNdc(#[from] MalformedNdc),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubstanceRecord {
    pub substance_id: String,
    pub substance_name: String,
    pub rxnorm_code: Option<String>,
    pub snomed_code: Option<String>,
    /// Every label known for this substance.
    pub set_ids: BTreeSet<String>,
    pub ndc_codes: BTreeSet<String>,
}

impl SubstanceRecord {
    /// Records the label's NDCs and takes the cross-codes from the first
    /// NDC (in sorted order) that maps to each terminology.
    pub fn attach_ndcs<'a, I>(&mut self, ndcs: I, store: &TermStore)
    where
        I: IntoIterator<Item = &'a String>,
    {
        self.ndc_codes.extend(ndcs.into_iter().cloned());
        for ndc in &self.ndc_codes {
            if let Some(m) = store.ndc(ndc) {
                if self.rxnorm_code.is_none() {
                    self.rxnorm_code.clone_from(&m.rxnorm_code);
                }
                if self.snomed_code.is_none() {
                    self.snomed_code.clone_from(&m.snomed_code);
                }
            }
        }
    }
}

/// Resolves a label to its substances. Combination products yield one
/// record per substance, in substance-id order.
pub fn resolve_substances(set_id: &str, store: &TermStore) -> Result<Vec<SubstanceRecord>, IdentError> {
    let subs = store
        .substances_for_label(set_id)
        .filter(|s| !s.is_empty())
        .ok_or_else(|| IdentError::UnmappedLabel(set_id.into()))?;
    Ok(subs
        .iter()
        .map(|s| SubstanceRecord {
            substance_id: s.substance_id.clone(),
            substance_name: s.substance_name.clone(),
            rxnorm_code: None,
            snomed_code: None,
            set_ids: store
                .labels_for_substance(&s.substance_id)
                .cloned()
                .unwrap_or_default(),
            ndc_codes: BTreeSet::new(),
        })
        .collect())
}

/// Looks up an NDC. Absent codes give an empty mapping, not an error.
pub fn resolve_ndc(ndc: &str, store: &TermStore) -> Result<NdcMapping, IdentError> {
    let ndc = normalize_ndc(ndc)?;
    Ok(store.ndc(&ndc).cloned().unwrap_or_default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terms::TermStoreBuilder;

    fn store() -> TermStore {
        let mut b = TermStoreBuilder::new();
        b.add_label_substance("G1", "S1", "aspirin").unwrap();
        b.add_label_substance("G2", "S1", "aspirin").unwrap();
        b.add_label_substance("G3", "S2", "codeine").unwrap();
        b.add_label_substance("G3", "S3", "acetaminophen").unwrap();
        b.add_ndc("00001000101", Some("R1"), Some("N1")).unwrap();
        b.add_ndc("00001000102", None, Some("N2")).unwrap();
        b.build().unwrap()
    }

    #[test]
    fn resolves_and_aggregates_labels() {
        let s = store();
        let recs = resolve_substances("G1", &s).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].substance_id, "S1");
        let expected: BTreeSet<String> = ["G1".into(), "G2".into()].into_iter().collect();
        assert_eq!(recs[0].set_ids, expected);
    }

    #[test]
    fn combination_product_yields_each_substance() {
        let ids: Vec<_> = resolve_substances("G3", &store())
            .unwrap()
            .into_iter()
            .map(|r| r.substance_id)
            .collect();
        assert_eq!(ids, ["S2", "S3"]);
    }

    #[test]
    fn unmapped_label() {
        assert_eq!(
            resolve_substances("nope", &store()),
            Err(IdentError::UnmappedLabel("nope".into()))
        );
    }

    #[test]
    fn ndc_lookup() {
        let s = store();
        let m = resolve_ndc("00001000101", &s).unwrap();
        assert_eq!((m.rxnorm_code.as_deref(), m.snomed_code.as_deref()), (Some("R1"), Some("N1")));
        assert_eq!(resolve_ndc("99999-9999-99", &s).unwrap(), NdcMapping::default());
        assert!(matches!(resolve_ndc("12-34", &s), Err(IdentError::MalformedNdc(_))));
    }

    #[test]
    fn attach_prefers_first_mapped_ndc() {
        let s = store();
        let mut r = resolve_substances("G1", &s).unwrap().remove(0);
        let ndcs: Vec<String> = ["00001000102".into(), "00001000101".into()].into();
        r.attach_ndcs(&ndcs, &s);
        assert_eq!(r.rxnorm_code.as_deref(), Some("R1"));
        assert_eq!(r.snomed_code.as_deref(), Some("N1"));
    }
}
