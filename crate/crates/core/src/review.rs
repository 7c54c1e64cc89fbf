//! Two-reviewer review and adjudication workflow.
//!
//! Each label registered in a [`Study`] is assigned to two distinct
//! reviewers drawn at random from the pool. Reviewers submit an
//! include/exclude verdict for every extracted term and may propose terms
//! the extraction missed. Once both reviews are in, every term with
//! differing verdicts becomes an [`AdjudicationItem`]. A label closes when
//! all of its items and proposed terms carry an adjudicator verdict.
//!
//! Confusion counts for a closed label: final `Include` is a true positive,
//! final `Exclude` a false positive, and an accepted proposed term that the
//! false-negative classifier marks as a true miss is a false negative.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::label::LabelSection;
use crate::matcher::Span;
use crate::metrics::{ConfusionCounts, Counts, FnVerdict, PairedVerdicts, ReviewerVerdicts, Verdict};
use crate::text::lookup_key;
use crate::SectionCategory;

pub type TermId = u32;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReviewError {
    #[error("reviewer pool has {0} members, need at least 2")]
    PoolTooSmall(usize),
    #[error("unknown label {0}")]
    UnknownLabel(String),
    #[error("label {0} already registered")]
    DuplicateLabel(String),
    #[error("reviewer {reviewer} is not assigned to label {set_id}")]
    NotAssigned { reviewer: String, set_id: String },
    #[error("review of {set_id} by {reviewer} was already submitted")]
    AlreadySubmitted { reviewer: String, set_id: String },
    #[error("missing verdicts for terms {0:?}")]
    IncompleteDecisions(Vec<TermId>),
    #[error("label has no term {0}")]
    UnknownTerm(TermId),
    #[error("more than one verdict for term {0}")]
    DuplicateDecision(TermId),
    #[error("unknown adjudication item {0}")]
    UnknownItem(String),
    #[error("item {0} was already adjudicated")]
    AlreadyAdjudicated(String),
    #[error("user-added term text is empty")]
    EmptyUserTerm,
    #[error("label {0} is closed")]
    LabelClosed(String),
    #[error("label {0} is not closed")]
    NotClosed(String),
}

/// Draws two distinct reviewers uniformly without replacement.
pub fn assign_reviewers(pool: &[String], seed: u64) -> Result<(String, String), ReviewError> {
    if pool.len() < 2 {
        return Err(ReviewError::PoolTooSmall(pool.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = rand::seq::index::sample(&mut rng, pool.len(), 2);
    Ok((pool[picked.index(0)].clone(), pool[picked.index(1)].clone()))
}

/// A distinct extracted PT shown to reviewers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewTerm {
    pub id: TermId,
    pub category: SectionCategory,
    pub pt_code: String,
    pub pt_name: String,
    pub surfaces: Vec<String>,
    /// Byte spans into the section text of `category`.
    pub spans: Vec<Span>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewLabel {
    pub set_id: String,
    pub sections: Vec<LabelSection>,
    pub terms: Vec<ReviewTerm>,
}

impl ReviewLabel {
    pub fn extracted_pts(&self, category: SectionCategory) -> BTreeSet<String> {
        self.terms
            .iter()
            .filter(|t| t.category == category)
            .map(|t| t.pt_code.clone())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssignmentStatus {
    Pending,
    Submitted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewAssignment {
    pub set_id: String,
    pub reviewer_id: String,
    pub status: AssignmentStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewDecision {
    pub set_id: String,
    pub reviewer_id: String,
    pub term_id: TermId,
    pub verdict: Verdict,
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserAddedTerm {
    pub id: u32,
    pub set_id: String,
    pub category: SectionCategory,
    pub text: String,
    /// Identical proposals from both reviewers are consolidated.
    pub proposed_by: BTreeSet<String>,
    pub adjudicator_verdict: Option<Verdict>,
    pub adjudicator_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewerVerdict {
    pub reviewer_id: String,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjudicationItem {
    pub id: u32,
    pub set_id: String,
    pub term_id: TermId,
    pub reviewer_verdicts: [ReviewerVerdict; 2],
    pub final_verdict: Option<Verdict>,
    pub adjudicator_id: Option<String>,
}

/// Queue identifiers: `d-<n>` for discrepancies, `u-<n>` for user terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QueueRef {
    Discrepancy(u32),
    UserTerm(u32),
}

impl core::fmt::Display for QueueRef {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            QueueRef::Discrepancy(n) => write!(f, "d-{n}"),
            QueueRef::UserTerm(n) => write!(f, "u-{n}"),
        }
    }
}

impl core::str::FromStr for QueueRef {
    type Err = ReviewError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ReviewError::UnknownItem(s.into());
        let (kind, n) = s.split_once('-').ok_or_else(bad)?;
        let n: u32 = n.parse().map_err(|_| bad())?;
        match kind {
            "d" => Ok(QueueRef::Discrepancy(n)),
            "u" => Ok(QueueRef::UserTerm(n)),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelStatus {
    InReview,
    AwaitingAdjudication,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receipt {
    pub set_id: String,
    pub reviewer_id: String,
    pub decisions: usize,
    pub user_terms: usize,
    pub adjudication_items_created: usize,
    pub label_status: LabelStatus,
}

#[derive(Debug, Clone)]
struct LabelState {
    label: ReviewLabel,
    assignments: [ReviewAssignment; 2],
    /// Keyed by (assignment slot, term).
    decisions: BTreeMap<(usize, TermId), ReviewDecision>,
}

impl LabelState {
    fn slot(&self, reviewer: &str) -> Option<usize> {
        self.assignments.iter().position(|a| a.reviewer_id == reviewer)
    }

    fn both_submitted(&self) -> bool {
        self.assignments.iter().all(|a| a.status == AssignmentStatus::Submitted)
    }
}

/// One row of the decision export: a term with every verdict it received,
/// or a user-added term.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExportRecord {
    Term {
        set_id: String,
        term_id: TermId,
        category: SectionCategory,
        pt_code: String,
        decisions: Vec<ExportedDecision>,
        adjudication: Option<ExportedAdjudication>,
        final_verdict: Option<Verdict>,
    },
    UserTerm {
        set_id: String,
        id: u32,
        category: SectionCategory,
        text: String,
        proposed_by: BTreeSet<String>,
        adjudicator_verdict: Option<Verdict>,
        adjudicator_id: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportedDecision {
    pub reviewer_id: String,
    pub verdict: Verdict,
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportedAdjudication {
    pub item: String,
    pub final_verdict: Option<Verdict>,
    pub adjudicator_id: Option<String>,
}

/// Review study state. All transitions are synchronous; callers serialize
/// access (the HTTP service holds it behind a mutex).
#[derive(Debug, Clone)]
pub struct Study {
    pool: Vec<String>,
    seed: u64,
    labels: BTreeMap<String, LabelState>,
    items: Vec<AdjudicationItem>,
    user_terms: Vec<UserAddedTerm>,
}

impl Study {
    pub fn new(pool: Vec<String>, seed: u64) -> Result<Self, ReviewError> {
        if pool.len() < 2 {
            return Err(ReviewError::PoolTooSmall(pool.len()));
        }
        Ok(Study {
            pool,
            seed,
            labels: BTreeMap::new(),
            items: Vec::new(),
            user_terms: Vec::new(),
        })
    }

    pub fn pool(&self) -> &[String] {
        &self.pool
    }

    /// Registers a label and assigns its two reviewers. The draw for the
    /// n-th registered label uses `seed + n`.
    pub fn add_label(&mut self, label: ReviewLabel) -> Result<(String, String), ReviewError> {
        if self.labels.contains_key(&label.set_id) {
            return Err(ReviewError::DuplicateLabel(label.set_id));
        }
        let seed = self.seed.wrapping_add(self.labels.len() as u64);
        let pair = assign_reviewers(&self.pool, seed)?;
        self.add_label_with(label, pair.clone())?;
        Ok(pair)
    }

    /// Registers a label with an explicit reviewer pair.
    pub fn add_label_with(&mut self, label: ReviewLabel, pair: (String, String)) -> Result<(), ReviewError> {
        if self.labels.contains_key(&label.set_id) {
            return Err(ReviewError::DuplicateLabel(label.set_id));
        }
        if pair.0 == pair.1 {
            return Err(ReviewError::PoolTooSmall(1));
        }
        let mk = |reviewer_id: String| ReviewAssignment {
            set_id: label.set_id.clone(),
            reviewer_id,
            status: AssignmentStatus::Pending,
        };
        let state = LabelState {
            assignments: [mk(pair.0), mk(pair.1)],
            label,
            decisions: BTreeMap::new(),
        };
        self.labels.insert(state.label.set_id.clone(), state);
        Ok(())
    }

    pub fn label(&self, set_id: &str) -> Option<&ReviewLabel> {
        self.labels.get(set_id).map(|s| &s.label)
    }

    pub fn label_ids(&self) -> impl Iterator<Item = &str> {
        self.labels.keys().map(String::as_str)
    }

    pub fn assignments(&self, set_id: &str) -> Option<&[ReviewAssignment; 2]> {
        self.labels.get(set_id).map(|s| &s.assignments)
    }

    /// First label (by set id) with a pending assignment for `reviewer`.
    pub fn next_for(&self, reviewer: &str) -> Option<&ReviewLabel> {
        self.labels
            .values()
            .find(|s| {
                s.assignments
                    .iter()
                    .any(|a| a.reviewer_id == reviewer && a.status == AssignmentStatus::Pending)
            })
            .map(|s| &s.label)
    }

    fn state(&self, set_id: &str) -> Result<&LabelState, ReviewError> {
        self.labels
            .get(set_id)
            .ok_or_else(|| ReviewError::UnknownLabel(set_id.into()))
    }

    pub fn submit_review(
        &mut self,
        set_id: &str,
        reviewer: &str,
        decisions: &[(TermId, Verdict)],
        user_terms: &[(SectionCategory, String)],
        timestamp: u64,
    ) -> Result<Receipt, ReviewError> {
        let state = self.state(set_id)?;
        let slot = state.slot(reviewer).ok_or_else(|| ReviewError::NotAssigned {
            reviewer: reviewer.into(),
            set_id: set_id.into(),
        })?;
        if state.assignments[slot].status == AssignmentStatus::Submitted {
            return Err(ReviewError::AlreadySubmitted {
                reviewer: reviewer.into(),
                set_id: set_id.into(),
            });
        }
        let known: BTreeSet<TermId> = state.label.terms.iter().map(|t| t.id).collect();
        let mut given = BTreeSet::new();
        for &(term, _) in decisions {
            if !known.contains(&term) {
                return Err(ReviewError::UnknownTerm(term));
            }
            if !given.insert(term) {
                return Err(ReviewError::DuplicateDecision(term));
            }
        }
        let missing: Vec<TermId> = known.difference(&given).copied().collect();
        if !missing.is_empty() {
            return Err(ReviewError::IncompleteDecisions(missing));
        }
        if user_terms.iter().any(|(_, t)| t.trim().is_empty()) {
            return Err(ReviewError::EmptyUserTerm);
        }

        let state = self.labels.get_mut(set_id).expect("checked above");
        for &(term_id, verdict) in decisions {
            state.decisions.insert(
                (slot, term_id),
                ReviewDecision {
                    set_id: set_id.into(),
                    reviewer_id: reviewer.into(),
                    term_id,
                    verdict,
                    timestamp,
                },
            );
        }
        state.assignments[slot].status = AssignmentStatus::Submitted;

        let mut created = 0;
        if state.both_submitted() {
            let discrepancies: Vec<(TermId, [ReviewerVerdict; 2])> = state
                .label
                .terms
                .iter()
                .filter_map(|t| {
                    let a = &state.decisions[&(0, t.id)];
                    let b = &state.decisions[&(1, t.id)];
                    (a.verdict != b.verdict).then(|| {
                        (
                            t.id,
                            [
                                ReviewerVerdict { reviewer_id: a.reviewer_id.clone(), verdict: a.verdict },
                                ReviewerVerdict { reviewer_id: b.reviewer_id.clone(), verdict: b.verdict },
                            ],
                        )
                    })
                })
                .collect();
            for (term_id, reviewer_verdicts) in discrepancies {
                self.items.push(AdjudicationItem {
                    id: self.items.len() as u32,
                    set_id: set_id.into(),
                    term_id,
                    reviewer_verdicts,
                    final_verdict: None,
                    adjudicator_id: None,
                });
                created += 1;
            }
        }
        for (category, text) in user_terms {
            self.push_user_term(set_id, *category, text, reviewer);
        }
        Ok(Receipt {
            set_id: set_id.into(),
            reviewer_id: reviewer.into(),
            decisions: decisions.len(),
            user_terms: user_terms.len(),
            adjudication_items_created: created,
            label_status: self.label_status(set_id)?,
        })
    }

    /// Adds proposed terms outside of a review submission.
    pub fn add_user_terms(
        &mut self,
        set_id: &str,
        reviewer: &str,
        terms: &[(SectionCategory, String)],
    ) -> Result<Vec<u32>, ReviewError> {
        let state = self.state(set_id)?;
        if state.slot(reviewer).is_none() {
            return Err(ReviewError::NotAssigned {
                reviewer: reviewer.into(),
                set_id: set_id.into(),
            });
        }
        if self.label_status(set_id)? == LabelStatus::Closed {
            return Err(ReviewError::LabelClosed(set_id.into()));
        }
        if terms.iter().any(|(_, t)| t.trim().is_empty()) {
            return Err(ReviewError::EmptyUserTerm);
        }
        Ok(terms
            .iter()
            .map(|(c, t)| self.push_user_term(set_id, *c, t, reviewer))
            .collect())
    }

    fn push_user_term(&mut self, set_id: &str, category: SectionCategory, text: &str, reviewer: &str) -> u32 {
        let key = lookup_key(text);
        if let Some(existing) = self
            .user_terms
            .iter_mut()
            .find(|u| u.set_id == set_id && u.category == category && lookup_key(&u.text) == key)
        {
            existing.proposed_by.insert(reviewer.into());
            return existing.id;
        }
        let id = self.user_terms.len() as u32;
        self.user_terms.push(UserAddedTerm {
            id,
            set_id: set_id.into(),
            category,
            text: crate::text::collapse_whitespace(text),
            proposed_by: core::iter::once(String::from(reviewer)).collect(),
            adjudicator_verdict: None,
            adjudicator_id: None,
        });
        id
    }

    pub fn adjudicate(&mut self, item: u32, verdict: Verdict, adjudicator: &str) -> Result<(), ReviewError> {
        let name = || alloc::format!("{}", QueueRef::Discrepancy(item));
        let it = self
            .items
            .get_mut(item as usize)
            .ok_or_else(|| ReviewError::UnknownItem(name()))?;
        if it.final_verdict.is_some() {
            return Err(ReviewError::AlreadyAdjudicated(name()));
        }
        it.final_verdict = Some(verdict);
        it.adjudicator_id = Some(adjudicator.into());
        Ok(())
    }

    pub fn adjudicate_user_term(&mut self, id: u32, verdict: Verdict, adjudicator: &str) -> Result<(), ReviewError> {
        let name = || alloc::format!("{}", QueueRef::UserTerm(id));
        let t = self
            .user_terms
            .get_mut(id as usize)
            .ok_or_else(|| ReviewError::UnknownItem(name()))?;
        if t.adjudicator_verdict.is_some() {
            return Err(ReviewError::AlreadyAdjudicated(name()));
        }
        t.adjudicator_verdict = Some(verdict);
        t.adjudicator_id = Some(adjudicator.into());
        Ok(())
    }

    pub fn resolve(&mut self, item: QueueRef, verdict: Verdict, adjudicator: &str) -> Result<(), ReviewError> {
        match item {
            QueueRef::Discrepancy(n) => self.adjudicate(n, verdict, adjudicator),
            QueueRef::UserTerm(n) => self.adjudicate_user_term(n, verdict, adjudicator),
        }
    }

    pub fn open_items(&self) -> impl Iterator<Item = &AdjudicationItem> {
        self.items.iter().filter(|i| i.final_verdict.is_none())
    }

    pub fn items(&self) -> &[AdjudicationItem] {
        &self.items
    }

    /// Proposed terms awaiting adjudication on labels whose reviews are both in.
    pub fn open_user_terms(&self) -> impl Iterator<Item = &UserAddedTerm> {
        self.user_terms.iter().filter(|u| {
            u.adjudicator_verdict.is_none() && self.labels.get(&u.set_id).is_some_and(LabelState::both_submitted)
        })
    }

    pub fn user_terms(&self) -> &[UserAddedTerm] {
        &self.user_terms
    }

    pub fn label_status(&self, set_id: &str) -> Result<LabelStatus, ReviewError> {
        let state = self.state(set_id)?;
        if !state.both_submitted() {
            return Ok(LabelStatus::InReview);
        }
        let open_items = self
            .items
            .iter()
            .any(|i| i.set_id == set_id && i.final_verdict.is_none());
        let open_terms = self
            .user_terms
            .iter()
            .any(|u| u.set_id == set_id && u.adjudicator_verdict.is_none());
        Ok(if open_items || open_terms {
            LabelStatus::AwaitingAdjudication
        } else {
            LabelStatus::Closed
        })
    }

    /// Final verdict for a term: the agreed verdict, or the adjudicated one.
    pub fn final_verdict(&self, set_id: &str, term: TermId) -> Option<Verdict> {
        let state = self.labels.get(set_id)?;
        let a = state.decisions.get(&(0, term))?;
        let b = state.decisions.get(&(1, term))?;
        if a.verdict == b.verdict {
            return Some(a.verdict);
        }
        self.items
            .iter()
            .find(|i| i.set_id == set_id && i.term_id == term)
            .and_then(|i| i.final_verdict)
    }

    /// Confusion counts of a closed label. `classify` receives each accepted
    /// user term with the label's extracted PTs for its category and returns
    /// the false-negative verdict and mapped PT.
    pub fn label_counts<F>(&self, set_id: &str, mut classify: F) -> Result<ConfusionCounts, ReviewError>
    where
        F: FnMut(&UserAddedTerm, &BTreeSet<String>) -> (FnVerdict, Option<String>),
    {
        if self.label_status(set_id)? != LabelStatus::Closed {
            return Err(ReviewError::NotClosed(set_id.into()));
        }
        let state = self.state(set_id)?;
        let mut counts = ConfusionCounts::default();
        for c in SectionCategory::ALL {
            counts.add(c, Counts::default());
        }
        for t in &state.label.terms {
            let verdict = self.final_verdict(set_id, t.id).expect("closed label has all verdicts");
            let n = match verdict {
                Verdict::Include => Counts::new(1, 0, 0),
                Verdict::Exclude => Counts::new(0, 1, 0),
            };
            counts.add(t.category, n);
        }
        let mut missed: BTreeSet<(SectionCategory, String)> = BTreeSet::new();
        for u in self
            .user_terms
            .iter()
            .filter(|u| u.set_id == set_id && u.adjudicator_verdict == Some(Verdict::Include))
        {
            let extracted = state.label.extracted_pts(u.category);
            let (verdict, pt) = classify(u, &extracted);
            if verdict == FnVerdict::TrueFalseNegative {
                let key = pt.unwrap_or_else(|| lookup_key(&u.text));
                if missed.insert((u.category, key)) {
                    counts.add(u.category, Counts::new(0, 0, 1));
                }
            }
        }
        Ok(counts)
    }

    /// Sum of [`label_counts`](Self::label_counts) over closed labels.
    pub fn study_counts<F>(&self, mut classify: F) -> ConfusionCounts
    where
        F: FnMut(&UserAddedTerm, &BTreeSet<String>) -> (FnVerdict, Option<String>),
    {
        let mut total = ConfusionCounts::default();
        for set_id in self.labels.keys() {
            if let Ok(c) = self.label_counts(set_id, &mut classify) {
                total.merge(&c);
            }
        }
        total
    }

    /// Terms whose two reviews are both in.
    pub fn paired_verdicts(&self) -> Vec<PairedVerdicts> {
        let mut out = Vec::new();
        for (set_id, state) in &self.labels {
            if !state.both_submitted() {
                continue;
            }
            for t in &state.label.terms {
                out.push(PairedVerdicts {
                    term: alloc::format!("{set_id}#{}", t.id),
                    verdicts: (0..2).map(|slot| state.decisions[&(slot, t.id)].verdict).collect(),
                });
            }
        }
        out
    }

    /// Each reviewer's verdicts paired with the final verdict, over labels
    /// whose reviews are both in.
    pub fn reviewer_verdicts(&self) -> Vec<ReviewerVerdicts> {
        let mut by_reviewer: BTreeMap<&str, Vec<(Verdict, Option<Verdict>)>> = BTreeMap::new();
        for (set_id, state) in &self.labels {
            if !state.both_submitted() {
                continue;
            }
            for d in state.decisions.values() {
                by_reviewer
                    .entry(&d.reviewer_id)
                    .or_default()
                    .push((d.verdict, self.final_verdict(set_id, d.term_id)));
            }
        }
        by_reviewer
            .into_iter()
            .map(|(r, verdicts)| ReviewerVerdicts {
                reviewer: r.into(),
                verdicts,
            })
            .collect()
    }

    /// Deterministic export: per label (by set id), one row per term that
    /// received at least one verdict, then its user-added terms.
    pub fn export_records(&self) -> Vec<ExportRecord> {
        let mut out = Vec::new();
        for (set_id, state) in &self.labels {
            for t in &state.label.terms {
                let decisions: Vec<ExportedDecision> = (0..2)
                    .filter_map(|slot| state.decisions.get(&(slot, t.id)))
                    .map(|d| ExportedDecision {
                        reviewer_id: d.reviewer_id.clone(),
                        verdict: d.verdict,
                        timestamp: d.timestamp,
                    })
                    .collect();
                if decisions.is_empty() {
                    continue;
                }
                let adjudication = self
                    .items
                    .iter()
                    .find(|i| i.set_id == *set_id && i.term_id == t.id)
                    .map(|i| ExportedAdjudication {
                        item: alloc::format!("{}", QueueRef::Discrepancy(i.id)),
                        final_verdict: i.final_verdict,
                        adjudicator_id: i.adjudicator_id.clone(),
                    });
                out.push(ExportRecord::Term {
                    set_id: set_id.clone(),
                    term_id: t.id,
                    category: t.category,
                    pt_code: t.pt_code.clone(),
                    decisions,
                    adjudication,
                    final_verdict: self.final_verdict(set_id, t.id),
                });
            }
            for u in self.user_terms.iter().filter(|u| u.set_id == *set_id) {
                out.push(ExportRecord::UserTerm {
                    set_id: set_id.clone(),
                    id: u.id,
                    category: u.category,
                    text: u.text.clone(),
                    proposed_by: u.proposed_by.clone(),
                    adjudicator_verdict: u.adjudicator_verdict,
                    adjudicator_id: u.adjudicator_id.clone(),
                });
            }
        }
        out
    }
}

/// Rebuilds reviewer pairs from exported rows; only rows with two
/// decisions are paired.
pub fn paired_from_export(records: &[ExportRecord]) -> Vec<PairedVerdicts> {
    records
        .iter()
        .filter_map(|r| match r {
            ExportRecord::Term {
                set_id,
                term_id,
                decisions,
                ..
            } if decisions.len() == 2 => Some(PairedVerdicts {
                term: alloc::format!("{set_id}#{term_id}"),
                verdicts: decisions.iter().map(|d| d.verdict).collect(),
            }),
            _ => None,
        })
        .collect()
}
