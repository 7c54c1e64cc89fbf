//! HTTP+JSON review service over a [`Study`].
//!
//! Authentication is a static bearer-token table; each token belongs to a
//! reviewer or to an adjudicator. Study state sits behind one mutex, so
//! every state transition is a check-and-set: of two concurrent
//! submissions for the same assignment exactly one succeeds and the other
//! gets `409 AlreadySubmitted`. Request bodies and responses are documented
//! in `docs/review-api.md`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path as FsPath;
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use pvlens_core::matcher::{extract_terms, group_terms};
use pvlens_core::metrics::{
    adjudicator_agreement, classify_user_added, fn_report, overall_agreement, score, AdjudicatorAgreement,
    ConfusionCounts, FnClassification, FnSummary, FnVerdict, Scores, Verdict,
};
use pvlens_core::review::{
    LabelStatus, QueueRef, Receipt, ReviewAssignment, ReviewError, ReviewLabel, ReviewTerm, Study, TermId,
    UserAddedTerm,
};
use pvlens_core::{SectionCategory, SemanticTypeFilter, Span, StopwordList, TermStore};
use serde::{Deserialize, Serialize};

use crate::pipeline::{Resources, SkipReason};
use crate::spl::parse_spl;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Reviewer,
    Adjudicator,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Principal {
    pub id: String,
    pub role: Role,
}

/// Token file layout: `{"reviewers": {id: token}, "adjudicators": {id: token}}`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenFile {
    #[serde(default)]
    pub reviewers: BTreeMap<String, String>,
    #[serde(default)]
    pub adjudicators: BTreeMap<String, String>,
}

#[derive(Debug, thiserror::Error)]
pub enum TokenError {
    #[error("cannot read token file: {0}")]
    Io(#[from] std::io::Error),
    #[error("token file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("token for {0} is reused")]
    DuplicateToken(String),
    #[error("token file lists no adjudicator")]
    NoAdjudicator,
}

#[derive(Debug, Clone, Default)]
pub struct TokenTable {
    by_token: BTreeMap<String, Principal>,
}

impl TokenTable {
    pub fn from_file(file: &TokenFile) -> Result<Self, TokenError> {
        if file.adjudicators.is_empty() {
            return Err(TokenError::NoAdjudicator);
        }
        let mut t = TokenTable::default();
        let all = file
            .reviewers
            .iter()
            .map(|e| (e, Role::Reviewer))
            .chain(file.adjudicators.iter().map(|e| (e, Role::Adjudicator)));
        for ((id, token), role) in all {
            let p = Principal { id: id.clone(), role };
            if t.by_token.insert(token.clone(), p).is_some() {
                return Err(TokenError::DuplicateToken(id.clone()));
            }
        }
        Ok(t)
    }

    pub fn load(path: &FsPath) -> Result<(Self, TokenFile), TokenError> {
        let file: TokenFile = serde_json::from_slice(&std::fs::read(path)?)?;
        Ok((Self::from_file(&file)?, file))
    }

    pub fn get(&self, token: &str) -> Option<&Principal> {
        self.by_token.get(token)
    }
}

/// Parses and extracts one label for review. Terms are the distinct
/// `(category, PT)` pairs, numbered from 0 in category then PT order.
pub fn review_label(xml: &[u8], res: &Resources) -> Result<ReviewLabel, SkipReason> {
    let doc = parse_spl(xml, &res.section_map)?;
    let mut matches = Vec::new();
    for s in &doc.sections {
        matches.extend(
            extract_terms(s, &res.automaton, &res.store, &res.stopwords, &res.filter)
                .expect("automaton built from the shared store"),
        );
    }
    let terms = group_terms(&matches)
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            let mut surfaces: Vec<String> = t.mentions.iter().map(|m| m.surface.clone()).collect();
            surfaces.sort();
            surfaces.dedup();
            let mut spans: Vec<Span> = t.mentions.iter().map(|m| m.span).collect();
            spans.sort();
            spans.dedup();
            ReviewTerm {
                id: i as TermId,
                category: t.category,
                pt_name: res
                    .store
                    .concept(&t.pt_code)
                    .map(|c| c.preferred_name.clone())
                    .unwrap_or_default(),
                pt_code: t.pt_code,
                surfaces,
                spans,
            }
        })
        .collect();
    Ok(ReviewLabel {
        set_id: doc.set_id,
        sections: doc.sections,
        terms,
    })
}

type Clock = Box<dyn Fn() -> u64 + Send + Sync>;

pub struct ServiceState {
    study: Mutex<Study>,
    tokens: TokenTable,
    store: TermStore,
    stopwords: StopwordList,
    filter: SemanticTypeFilter,
    clock: Clock,
}

impl ServiceState {
    pub fn new(
        study: Study,
        tokens: TokenTable,
        store: TermStore,
        stopwords: StopwordList,
        filter: SemanticTypeFilter,
    ) -> Self {
        ServiceState {
            study: Mutex::new(study),
            tokens,
            store,
            stopwords,
            filter,
            clock: Box::new(|| {
                SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0)
            }),
        }
    }

    /// Replaces the decision timestamp source (seconds).
    pub fn with_clock(mut self, clock: impl Fn() -> u64 + Send + Sync + 'static) -> Self {
        self.clock = Box::new(clock);
        self
    }

    /// Runs `f` with the study locked.
    pub fn with_study<T>(&self, f: impl FnOnce(&mut Study) -> T) -> T {
        let mut guard = self.study.lock().unwrap_or_else(|p| p.into_inner());
        f(&mut guard)
    }

    pub fn classify(&self, text: &str, extracted: &BTreeSet<String>) -> FnClassification {
        classify_user_added(text, &self.store, &self.stopwords, &self.filter, extracted)
    }

    fn classifier(&self) -> impl FnMut(&UserAddedTerm, &BTreeSet<String>) -> (FnVerdict, Option<String>) + '_ {
        move |u, extracted| {
            let c = self.classify(&u.text, extracted);
            (c.verdict, c.pt_code)
        }
    }
}

pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/labels/next", get(next_label))
        .route("/labels/{id}", get(get_label))
        .route("/labels/{id}/review", post(submit_review))
        .route("/labels/{id}/user-terms", post(add_user_terms))
        .route("/adjudication/queue", get(queue))
        .route("/adjudication/{item}", post(adjudicate))
        .route("/metrics", get(metrics))
        .route("/export/decisions", get(export_decisions))
        .with_state(state)
}

pub async fn serve(listener: tokio::net::TcpListener, state: Arc<ServiceState>) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub missing_term_ids: Vec<TermId>,
}

#[derive(Debug)]
pub enum ApiError {
    Unauthorized,
    Forbidden(String),
    BadRequest(String),
    Review(ReviewError),
}

impl From<ReviewError> for ApiError {
    fn from(e: ReviewError) -> Self {
        ApiError::Review(e)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::BadRequest(e.body_text())
    }
}

fn review_error_kind(e: &ReviewError) -> (StatusCode, &'static str) {
    use ReviewError::*;
    match e {
        UnknownLabel(_) => (StatusCode::NOT_FOUND, "UnknownLabel"),
        UnknownItem(_) => (StatusCode::NOT_FOUND, "UnknownItem"),
        NotAssigned { .. } => (StatusCode::FORBIDDEN, "NotAssigned"),
        AlreadySubmitted { .. } => (StatusCode::CONFLICT, "AlreadySubmitted"),
        AlreadyAdjudicated(_) => (StatusCode::CONFLICT, "AlreadyAdjudicated"),
        LabelClosed(_) => (StatusCode::CONFLICT, "LabelClosed"),
        DuplicateLabel(_) => (StatusCode::CONFLICT, "DuplicateLabel"),
        NotClosed(_) => (StatusCode::CONFLICT, "NotClosed"),
        IncompleteDecisions(_) => (StatusCode::UNPROCESSABLE_ENTITY, "IncompleteDecisions"),
        UnknownTerm(_) => (StatusCode::UNPROCESSABLE_ENTITY, "UnknownTerm"),
        DuplicateDecision(_) => (StatusCode::UNPROCESSABLE_ENTITY, "DuplicateDecision"),
        EmptyUserTerm => (StatusCode::UNPROCESSABLE_ENTITY, "EmptyUserTerm"),
        PoolTooSmall(_) => (StatusCode::INTERNAL_SERVER_ERROR, "PoolTooSmall"),
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::Unauthorized => (
                StatusCode::UNAUTHORIZED,
                ErrorBody {
                    error: "Unauthorized".into(),
                    message: "missing or unknown bearer token".into(),
                    missing_term_ids: vec![],
                },
            ),
            ApiError::Forbidden(message) => (
                StatusCode::FORBIDDEN,
                ErrorBody {
                    error: "Forbidden".into(),
                    message,
                    missing_term_ids: vec![],
                },
            ),
            ApiError::BadRequest(message) => (
                StatusCode::BAD_REQUEST,
                ErrorBody {
                    error: "BadRequest".into(),
                    message,
                    missing_term_ids: vec![],
                },
            ),
            ApiError::Review(e) => {
                let (status, kind) = review_error_kind(&e);
                let missing = match &e {
                    ReviewError::IncompleteDecisions(ids) => ids.clone(),
                    _ => vec![],
                };
                (
                    status,
                    ErrorBody {
                        error: kind.into(),
                        message: e.to_string(),
                        missing_term_ids: missing,
                    },
                )
            }
        };
        (status, Json(body)).into_response()
    }
}

fn principal<'a>(state: &'a ServiceState, headers: &HeaderMap) -> Result<&'a Principal, ApiError> {
    let token = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .ok_or(ApiError::Unauthorized)?;
    state.tokens.get(token.trim()).ok_or(ApiError::Unauthorized)
}

fn require(p: &Principal, role: Role) -> Result<(), ApiError> {
    if p.role == role {
        Ok(())
    } else {
        Err(ApiError::Forbidden(format!("{} role required", serde_json::to_value(role).unwrap())))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NextLabel {
    pub set_id: String,
}

async fn next_label(State(state): State<Arc<ServiceState>>, headers: HeaderMap) -> Result<Response, ApiError> {
    let p = principal(&state, &headers)?;
    require(p, Role::Reviewer)?;
    let next = state.with_study(|s| s.next_for(&p.id).map(|l| l.set_id.clone()));
    Ok(match next {
        Some(set_id) => Json(NextLabel { set_id }).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    })
}

/// A span in UTF-8 bytes and in UTF-16 code units of the section text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanView {
    pub start: usize,
    pub end: usize,
    pub utf16_start: usize,
    pub utf16_end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermView {
    pub id: TermId,
    pub category: SectionCategory,
    pub pt_code: String,
    pub pt_name: String,
    pub surfaces: Vec<String>,
    pub spans: Vec<SpanView>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionView {
    pub category: SectionCategory,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelView {
    pub set_id: String,
    pub status: LabelStatus,
    pub assignments: Vec<ReviewAssignment>,
    pub sections: Vec<SectionView>,
    pub terms: Vec<TermView>,
}

/// UTF-16 offset of byte offset `byte` in `text`.
pub fn utf16_offset(text: &str, byte: usize) -> usize {
    text[..byte].encode_utf16().count()
}

fn label_view(study: &Study, set_id: &str) -> Result<LabelView, ReviewError> {
    let label = study
        .label(set_id)
        .ok_or_else(|| ReviewError::UnknownLabel(set_id.into()))?;
    let text_of = |c: SectionCategory| {
        label
            .sections
            .iter()
            .find(|s| s.category == c)
            .map(|s| s.text.as_str())
            .unwrap_or("")
    };
    let terms = label
        .terms
        .iter()
        .map(|t| {
            let text = text_of(t.category);
            TermView {
                id: t.id,
                category: t.category,
                pt_code: t.pt_code.clone(),
                pt_name: t.pt_name.clone(),
                surfaces: t.surfaces.clone(),
                spans: t
                    .spans
                    .iter()
                    .map(|s| SpanView {
                        start: s.start,
                        end: s.end,
                        utf16_start: utf16_offset(text, s.start),
                        utf16_end: utf16_offset(text, s.end),
                    })
                    .collect(),
            }
        })
        .collect();
    Ok(LabelView {
        set_id: set_id.into(),
        status: study.label_status(set_id)?,
        assignments: study.assignments(set_id).map(|a| a.to_vec()).unwrap_or_default(),
        sections: label
            .sections
            .iter()
            .map(|s| SectionView {
                category: s.category,
                text: s.text.clone(),
            })
            .collect(),
        terms,
    })
}

async fn get_label(
    State(state): State<Arc<ServiceState>>,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> Result<Json<LabelView>, ApiError> {
    let p = principal(&state, &headers)?;
    state.with_study(|s| {
        if p.role == Role::Reviewer {
            let assigned = s
                .assignments(&id)
                .ok_or_else(|| ReviewError::UnknownLabel(id.clone()))?
                .iter()
                .any(|a| a.reviewer_id == p.id);
            if !assigned {
                return Err(ReviewError::NotAssigned {
                    reviewer: p.id.clone(),
                    set_id: id.clone(),
                }
                .into());
            }
        }
        Ok(Json(label_view(s, &id)?))
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionIn {
    pub term_id: TermId,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserTermIn {
    pub category: SectionCategory,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewIn {
    pub decisions: Vec<DecisionIn>,
    #[serde(default)]
    pub user_terms: Vec<UserTermIn>,
}

async fn submit_review(
    State(state): State<Arc<ServiceState>>,
    headers: HeaderMap,
    Path(id): Path<String>,
    body: Result<Json<ReviewIn>, JsonRejection>,
) -> Result<Json<Receipt>, ApiError> {
    let p = principal(&state, &headers)?;
    require(p, Role::Reviewer)?;
    let Json(body) = body?;
    let decisions: Vec<(TermId, Verdict)> = body.decisions.iter().map(|d| (d.term_id, d.verdict)).collect();
    let user_terms: Vec<(SectionCategory, String)> =
        body.user_terms.into_iter().map(|u| (u.category, u.text)).collect();
    let now = (state.clock)();
    let receipt = state.with_study(|s| s.submit_review(&id, &p.id, &decisions, &user_terms, now))?;
    Ok(Json(receipt))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserTermsIn {
    pub user_terms: Vec<UserTermIn>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserTermsOut {
    /// Queue refs (`u-<n>`) of the stored terms; identical proposals share one.
    pub refs: Vec<String>,
}

async fn add_user_terms(
    State(state): State<Arc<ServiceState>>,
    headers: HeaderMap,
    Path(id): Path<String>,
    body: Result<Json<UserTermsIn>, JsonRejection>,
) -> Result<Json<UserTermsOut>, ApiError> {
    let p = principal(&state, &headers)?;
    require(p, Role::Reviewer)?;
    let Json(body) = body?;
    let terms: Vec<(SectionCategory, String)> = body.user_terms.into_iter().map(|u| (u.category, u.text)).collect();
    let ids = state.with_study(|s| s.add_user_terms(&id, &p.id, &terms))?;
    Ok(Json(UserTermsOut {
        refs: ids.into_iter().map(|n| QueueRef::UserTerm(n).to_string()).collect(),
    }))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewerVerdictView {
    pub reviewer_id: String,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscrepancyView {
    #[serde(rename = "ref")]
    pub item_ref: String,
    pub set_id: String,
    pub term_id: TermId,
    pub category: SectionCategory,
    pub pt_code: String,
    pub pt_name: String,
    pub reviewer_verdicts: Vec<ReviewerVerdictView>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserTermView {
    #[serde(rename = "ref")]
    pub item_ref: String,
    pub set_id: String,
    pub category: SectionCategory,
    pub text: String,
    pub proposed_by: BTreeSet<String>,
    /// What the false-negative classifier would make of the term.
    pub classification: FnClassification,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueView {
    pub discrepancies: Vec<DiscrepancyView>,
    pub user_terms: Vec<UserTermView>,
}

async fn queue(State(state): State<Arc<ServiceState>>, headers: HeaderMap) -> Result<Json<QueueView>, ApiError> {
    let p = principal(&state, &headers)?;
    require(p, Role::Adjudicator)?;
    let view = state.with_study(|s| {
        let discrepancies = s
            .open_items()
            .map(|i| {
                let term = s
                    .label(&i.set_id)
                    .and_then(|l| l.terms.iter().find(|t| t.id == i.term_id))
                    .expect("item refers to a registered term");
                DiscrepancyView {
                    item_ref: QueueRef::Discrepancy(i.id).to_string(),
                    set_id: i.set_id.clone(),
                    term_id: i.term_id,
                    category: term.category,
                    pt_code: term.pt_code.clone(),
                    pt_name: term.pt_name.clone(),
                    reviewer_verdicts: i
                        .reviewer_verdicts
                        .iter()
                        .map(|v| ReviewerVerdictView {
                            reviewer_id: v.reviewer_id.clone(),
                            verdict: v.verdict,
                        })
                        .collect(),
                }
            })
            .collect();
        let user_terms = s
            .open_user_terms()
            .map(|u| {
                let extracted = s.label(&u.set_id).map(|l| l.extracted_pts(u.category)).unwrap_or_default();
                UserTermView {
                    item_ref: QueueRef::UserTerm(u.id).to_string(),
                    set_id: u.set_id.clone(),
                    category: u.category,
                    text: u.text.clone(),
                    proposed_by: u.proposed_by.clone(),
                    classification: state.classify(&u.text, &extracted),
                }
            })
            .collect();
        QueueView {
            discrepancies,
            user_terms,
        }
    });
    Ok(Json(view))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjudicateIn {
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjudicateOut {
    pub item: String,
    pub set_id: String,
    pub label_status: LabelStatus,
}

async fn adjudicate(
    State(state): State<Arc<ServiceState>>,
    headers: HeaderMap,
    Path(item): Path<String>,
    body: Result<Json<AdjudicateIn>, JsonRejection>,
) -> Result<Json<AdjudicateOut>, ApiError> {
    let p = principal(&state, &headers)?;
    require(p, Role::Adjudicator)?;
    let Json(body) = body?;
    let r: QueueRef = item.parse()?;
    let out = state.with_study(|s| -> Result<_, ReviewError> {
        s.resolve(r, body.verdict, &p.id)?;
        let set_id = match r {
            QueueRef::Discrepancy(n) => s.items()[n as usize].set_id.clone(),
            QueueRef::UserTerm(n) => s.user_terms()[n as usize].set_id.clone(),
        };
        Ok(AdjudicateOut {
            item: r.to_string(),
            label_status: s.label_status(&set_id)?,
            set_id,
        })
    })?;
    Ok(Json(out))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsView {
    pub labels: usize,
    pub closed_labels: usize,
    pub counts: ConfusionCounts,
    /// Keyed by category name and `overall`; absent when a denominator is zero.
    pub scores: BTreeMap<String, Scores>,
    pub overall_agreement: Option<f64>,
    pub adjudicator_agreement: Option<AdjudicatorAgreement>,
    /// Classifier outcome over every proposed term, accepted or not.
    pub user_terms: FnSummary,
}

pub fn metrics_view(state: &ServiceState) -> MetricsView {
    state.with_study(|s| {
        let ids: Vec<String> = s.label_ids().map(String::from).collect();
        let closed_labels = ids
            .iter()
            .filter(|id| s.label_status(id) == Ok(LabelStatus::Closed))
            .count();
        let counts = s.study_counts(state.classifier());
        let mut scores = BTreeMap::new();
        for c in SectionCategory::ALL {
            if let Ok(sc) = score(counts.category(c)) {
                scores.insert(c.as_str().to_string(), sc);
            }
        }
        if let Ok(sc) = score(counts.overall()) {
            scores.insert("overall".into(), sc);
        }
        let classified: Vec<(SectionCategory, FnVerdict)> = s
            .user_terms()
            .iter()
            .map(|u| {
                let extracted = s.label(&u.set_id).map(|l| l.extracted_pts(u.category)).unwrap_or_default();
                (u.category, state.classify(&u.text, &extracted).verdict)
            })
            .collect();
        MetricsView {
            labels: ids.len(),
            closed_labels,
            counts,
            scores,
            overall_agreement: overall_agreement(&s.paired_verdicts()).ok(),
            adjudicator_agreement: adjudicator_agreement(&s.reviewer_verdicts()).ok(),
            user_terms: fn_report(classified.iter().map(|(c, v)| (*c, v))),
        }
    })
}

async fn metrics(State(state): State<Arc<ServiceState>>, headers: HeaderMap) -> Result<Json<MetricsView>, ApiError> {
    principal(&state, &headers)?;
    Ok(Json(metrics_view(&state)))
}

/// The decision export as JSON lines, one record per line.
pub fn export_jsonl(study: &Study) -> String {
    let mut out = String::new();
    for r in study.export_records() {
        out.push_str(&serde_json::to_string(&r).expect("records serialize"));
        out.push('\n');
    }
    out
}

async fn export_decisions(State(state): State<Arc<ServiceState>>, headers: HeaderMap) -> Result<Response, ApiError> {
    principal(&state, &headers)?;
    let body = state.with_study(|s| export_jsonl(s));
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}
