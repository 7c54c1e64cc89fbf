//! Safety-related labeling change records and their application to events.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::event::LabeledEvent;
use crate::{Date, SectionCategory};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SrlcRecord {
    pub set_id: String,
    pub category: SectionCategory,
    /// `None` applies the change to every PT of the section.
    #[serde(default)]
    pub pt_code: Option<String>,
    pub change_date: Date,
    #[serde(default)]
    pub description: String,
}

/// Sets each event's `srlc_date` to the earliest change date among records
/// matching one of its provenance labels on `(set_id, category)` and, when
/// the record names a PT, on `pt_code`. Events without a match are returned
/// unchanged.
pub fn apply_srlc(mut events: Vec<LabeledEvent>, records: &[SrlcRecord]) -> Vec<LabeledEvent> {
    let mut index: BTreeMap<(&str, SectionCategory), Vec<&SrlcRecord>> = BTreeMap::new();
    for r in records {
        index.entry((r.set_id.as_str(), r.category)).or_default().push(r);
    }
    for event in &mut events {
        let earliest = event
            .provenance
            .iter()
            .filter_map(|p| index.get(&(p.set_id.as_str(), event.category)))
            .flatten()
            .filter(|r| r.pt_code.as_deref().is_none_or(|pt| pt == event.pt_code))
            .map(|r| r.change_date)
            .min();
        if let Some(date) = earliest {
            event.srlc_date = Some(date);
        }
    }
    events
}
