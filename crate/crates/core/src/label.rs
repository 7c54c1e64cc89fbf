//! Parsed label values. Parsing itself lives with the XML reader in the
//! `pvlens` crate; these types are shared with the matcher and pipeline.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Date, SectionCategory};

/// One extracted section of interest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSection {
    pub category: SectionCategory,
    /// Section-type code as it appeared in the XML.
    pub source_code: String,
    /// Plain text, markup stripped and whitespace collapsed.
    pub text: String,
}

/// One parsed structured product label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplDocument {
    pub set_id: String,
    pub doc_version: u32,
    pub effective_date: Date,
    /// Normalized 11-digit NDC codes.
    pub ndc_codes: BTreeSet<String>,
    pub sections: Vec<LabelSection>,
}

impl SplDocument {
    pub fn section(&self, category: SectionCategory) -> Option<&LabelSection> {
        self.sections.iter().find(|s| s.category == category)
    }
}
