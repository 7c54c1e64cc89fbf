//! Allocation-only core of the pvlens pipeline.
//!
//! Everything in this crate is a pure function over in-memory values: the
//! terminology store and its lookups, the dictionary matcher, identifier
//! crosswalks, safety-change stamping, repository merge semantics, the
//! validation metrics and the two-reviewer review workflow. File formats,
//! persistence, the HTTP service and the CLI live in the `pvlens` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod category;
pub mod event;
pub mod ident;
pub mod label;
pub mod matcher;
pub mod metrics;
pub mod ndc;
pub mod review;
pub mod srlc;
pub mod terms;
pub mod text;

pub use category::SectionCategory;
pub use event::{EventKey, EventTable, LabeledEvent, MergeReport, Provenance};
pub use label::{LabelSection, SplDocument};
pub use matcher::{ExtractedTerm, MatchAutomaton, RawMatch, Span, TermMatch};
pub use terms::{Concept, SemanticTypeFilter, StopwordList, TermLevel, TermStore, Terminology};

/// Calendar date used across label, repository and safety-change records.
pub type Date = chrono::NaiveDate;
