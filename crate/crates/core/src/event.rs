//! Labeled events and the merge rules of the cross-run repository.
//!
//! Persistence is handled by the `pvlens` crate, which loads an
//! [`EventTable`], merges a run into it and writes the changed rows back
//! inside one transaction.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::matcher::Span;
use crate::{Date, SectionCategory};

/// Unique key of a repository row. Field order gives the export order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EventKey {
    pub substance_id: String,
    pub category: SectionCategory,
    pub pt_code: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub set_id: String,
    pub doc_version: u32,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledEvent {
    pub substance_id: String,
    pub substance_name: String,
    pub pt_code: String,
    pub category: SectionCategory,
    pub first_seen_date: Date,
    pub last_seen_date: Date,
    pub srlc_date: Option<Date>,
    /// Sorted and deduplicated.
    pub provenance: Vec<Provenance>,
}

impl LabeledEvent {
    pub fn key(&self) -> EventKey {
        EventKey {
            substance_id: self.substance_id.clone(),
            category: self.category,
            pt_code: self.pt_code.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MergeError {
    #[error("run contains key {0:?} more than once")]
    DuplicateRunKey(EventKey),
    #[error("run event {0:?} has no provenance")]
    MissingProvenance(EventKey),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeReport {
    pub inserted: usize,
    pub updated: usize,
    pub not_reconfirmed: usize,
    /// Keys present before the run but absent from it. They are kept.
    pub not_reconfirmed_keys: Vec<EventKey>,
}

/// Result of [`EventTable::merge_run`]: the report plus the keys whose rows
/// must be written back.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeOutcome {
    pub report: MergeReport,
    pub changed: Vec<EventKey>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventTable {
    events: BTreeMap<EventKey, LabeledEvent>,
}

impl EventTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a stored row as is, replacing any row with the same key.
    pub fn insert_row(&mut self, event: LabeledEvent) {
        self.events.insert(event.key(), event);
    }

    pub fn get(&self, key: &EventKey) -> Option<&LabeledEvent> {
        self.events.get(key)
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Events in export order.
    pub fn iter(&self) -> impl Iterator<Item = &LabeledEvent> {
        self.events.values()
    }

    /// Merges one run.
    ///
    /// New keys are inserted with both seen-dates set to `run_date`. Existing
    /// keys widen their seen-date range to include `run_date`, take the
    /// union of provenance and keep the earliest safety-change date. Keys
    /// missing from the run are left untouched and reported.
    pub fn merge_run(&mut self, run: Vec<LabeledEvent>, run_date: Date) -> Result<MergeOutcome, MergeError> {
        let mut seen = BTreeSet::new();
        for e in &run {
            let key = e.key();
            if e.provenance.is_empty() {
                return Err(MergeError::MissingProvenance(key));
            }
            if !seen.insert(key.clone()) {
                return Err(MergeError::DuplicateRunKey(key));
            }
        }

        let mut report = MergeReport::default();
        let mut changed = Vec::with_capacity(run.len());
        for mut incoming in run {
            let key = incoming.key();
            match self.events.get_mut(&key) {
                Some(existing) => {
                    existing.first_seen_date = existing.first_seen_date.min(run_date);
                    existing.last_seen_date = existing.last_seen_date.max(run_date);
                    existing.substance_name = incoming.substance_name;
                    existing.srlc_date = match (existing.srlc_date, incoming.srlc_date) {
                        (Some(a), Some(b)) => Some(a.min(b)),
                        (a, b) => a.or(b),
                    };
                    existing.provenance.append(&mut incoming.provenance);
                    existing.provenance.sort();
                    existing.provenance.dedup();
                    report.updated += 1;
                }
                None => {
                    incoming.first_seen_date = run_date;
                    incoming.last_seen_date = run_date;
                    incoming.provenance.sort();
                    incoming.provenance.dedup();
                    self.events.insert(key.clone(), incoming);
                    report.inserted += 1;
                }
            }
            changed.push(key);
        }
        report.not_reconfirmed_keys = self
            .events
            .keys()
            .filter(|k| !seen.contains(*k))
            .cloned()
            .collect();
        report.not_reconfirmed = report.not_reconfirmed_keys.len();
        Ok(MergeOutcome { report, changed })
    }
}
