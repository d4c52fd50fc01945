use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Duration, DurationRound, Utc};
use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

use super::event::{sha256_hex, verify_audit, Action, Event, VerificationReport, SYSTEM_ACTOR};
use super::log::LogBackend;
use super::state::{
    to_payload, ApplyError, BoardState, Principal, PrincipalAddedPayload, PrincipalRevokedPayload,
    ReleasePayload, ReviewPayload, Role,
};
use crate::model::{
    validate_review, BoardMeta, Dimension, LifecycleState, PaperError, PaperInput, PaperRef, RecordId,
    Review, ReviewRecord, ValidationReport,
};

pub trait Clock: Send {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Deterministic clock: each reading advances by a fixed step.
#[derive(Debug, Clone)]
pub struct SteppingClock {
    next: Arc<Mutex<DateTime<Utc>>>,
    step: Duration,
}

impl SteppingClock {
    pub fn new(start: DateTime<Utc>, step: Duration) -> Self {
        Self {
            next: Arc::new(Mutex::new(start)),
            step,
        }
    }
}

impl Clock for SteppingClock {
    fn now(&self) -> DateTime<Utc> {
        let mut next = self.next.lock().expect("clock lock");
        let now = *next;
        *next = now + self.step;
        now
    }
}

/// Outcome of asking whether a paper URL currently resolves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProbeStatus {
    Status(u16),
    Failed(String),
}

/// Capability to check a paper's presence at its URL.
pub trait PaperProbe: Send + Sync {
    fn probe(&self, url: &str) -> ProbeStatus;
}

/// True iff the prober reports a 2xx status. Transport failures are false.
pub fn probe_url(url: &str, prober: &dyn PaperProbe) -> bool {
    matches!(prober.probe(url), ProbeStatus::Status(code) if (200..300).contains(&code))
}

/// Scripted prober: listed URLs answer with their status, everything else
/// fails like a timeout.
#[derive(Debug, Clone, Default)]
pub struct FakeProbe {
    answers: BTreeMap<String, ProbeStatus>,
    default: Option<u16>,
}

impl FakeProbe {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every URL answers 200.
    pub fn always_ok() -> Self {
        Self {
            answers: BTreeMap::new(),
            default: Some(200),
        }
    }

    pub fn with(mut self, url: &str, status: ProbeStatus) -> Self {
        self.answers.insert(url.to_string(), status);
        self
    }
}

impl PaperProbe for FakeProbe {
    fn probe(&self, url: &str) -> ProbeStatus {
        match (self.answers.get(url), self.default) {
            (Some(status), _) => status.clone(),
            (None, Some(code)) => ProbeStatus::Status(code),
            (None, None) => ProbeStatus::Failed("timed out".into()),
        }
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("authentication failed")]
    AuthFailed,
    #[error("invalid review: {0}")]
    InvalidReview(ValidationReport),
    #[error("invalid paper: {0}")]
    InvalidPaper(#[from] PaperError),
    #[error("paper not reachable at {0}")]
    UnreachablePaper(String),
    #[error("record {id} is {state}, nothing to release")]
    NotReady { id: RecordId, state: LifecycleState },
    #[error("unknown record {0}")]
    UnknownRecord(String),
    #[error("principal {0} already exists")]
    DuplicateId(String),
    #[error("token is already assigned to another principal")]
    TokenInUse,
    #[error("unknown principal {0}")]
    UnknownPrincipal(String),
    #[error("principal {0} is already revoked")]
    AlreadyRevoked(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("event log write failed: {0}")]
    Storage(#[from] std::io::Error),
    #[error("corrupt event log: {0}")]
    CorruptLog(String),
}

/// Reconstructs state from a verified log.
pub fn replay(board: BoardMeta, events: &[Event]) -> Result<BoardState, StoreError> {
    let report = verify_audit(events);
    if let VerificationReport::Broken { .. } = report {
        return Err(StoreError::CorruptLog(report.to_string()));
    }
    let mut state = BoardState::new(board);
    for event in events {
        state
            .apply(event)
            .map_err(|e: ApplyError| StoreError::CorruptLog(e.to_string()))?;
    }
    Ok(state)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SubmissionOutcome {
    pub record_id: RecordId,
    pub new_state: LifecycleState,
    pub replaced: bool,
    pub url_verified: bool,
}

/// A review as entered by a reviewer, before validation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReviewSubmission {
    pub paper: PaperInput,
    pub grades: BTreeMap<Dimension, i64>,
    pub comment: String,
}

/// The single writer: owns board state, the event history and the log.
///
/// Every successful mutation appends exactly one event, durably, before the
/// in-memory state changes. Failed operations append nothing.
pub struct Store {
    state: BoardState,
    events: Vec<Event>,
    log: Box<dyn LogBackend>,
    clock: Box<dyn Clock>,
}

impl fmt::Debug for Store {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Store")
            .field("last_seq", &self.state.last_seq())
            .field("records", &self.state.records().len())
            .finish_non_exhaustive()
    }
}

impl Store {
    /// Replays `existing` (already read from `log`) and continues appending.
    pub fn open(
        board: BoardMeta,
        existing: Vec<Event>,
        log: Box<dyn LogBackend>,
        clock: Box<dyn Clock>,
    ) -> Result<Self, StoreError> {
        let state = replay(board, &existing)?;
        Ok(Self {
            state,
            events: existing,
            log,
            clock,
        })
    }

    pub fn in_memory(board: BoardMeta, clock: Box<dyn Clock>) -> Self {
        Self::open(board, Vec::new(), Box::new(super::log::MemoryLog::new()), clock)
            .expect("empty log replays")
    }

    pub fn state(&self) -> &BoardState {
        &self.state
    }

    pub fn board(&self) -> &BoardMeta {
        self.state.board()
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub(crate) fn next_seq(&self) -> u64 {
        self.state.last_seq() + 1
    }

    /// Seals, persists and applies one event.
    pub(crate) fn commit(
        &mut self,
        actor: &str,
        action: Action,
        payload: Map<String, Value>,
    ) -> Result<&Event, StoreError> {
        let now = self.clock.now();
        let timestamp = now.duration_trunc(Duration::microseconds(1)).unwrap_or(now);
        let event = Event::seal(
            self.next_seq(),
            timestamp,
            actor,
            action,
            payload,
            self.state.last_hash(),
        );
        let mut next = self.state.clone();
        next.apply(&event)
            .map_err(|e| StoreError::CorruptLog(format!("refusing to append: {e}")))?;
        self.log.append(&event)?;
        self.state = next;
        self.events.push(event);
        Ok(self.events.last().expect("just pushed"))
    }

    /// Finds the active principal holding `bearer_token`.
    pub fn authenticate(&self, bearer_token: &str) -> Result<Principal, StoreError> {
        let hash = hash_token(bearer_token);
        self.state
            .principals()
            .values()
            .find(|p| p.active && p.token_hash == hash)
            .cloned()
            .ok_or(StoreError::AuthFailed)
    }

    /// Re-checks a previously authenticated principal against current state.
    fn current(&self, principal: &Principal) -> Result<Principal, StoreError> {
        match self.state.principals().get(&principal.principal_id) {
            Some(p) if p.active && p.token_hash == principal.token_hash => Ok(p.clone()),
            _ => Err(StoreError::AuthFailed),
        }
    }

    pub fn submit_review(
        &mut self,
        principal: &Principal,
        submission: &ReviewSubmission,
        prober: &dyn PaperProbe,
    ) -> Result<SubmissionOutcome, StoreError> {
        let principal = self.current(principal)?;
        let paper = PaperRef::from_input(&submission.paper)?;
        let review = Review {
            reviewer_id: principal.principal_id.clone(),
            record_id: paper.record_id.clone(),
            grades: submission.grades.clone(),
            comment: submission.comment.clone(),
            submitted_at: Utc::now(),
        };
        let report = validate_review(&review, self.board());
        if !report.is_valid() {
            return Err(StoreError::InvalidReview(report));
        }
        let url_verified = probe_url(&paper.canonical_url, prober);
        if !url_verified && !self.board().allow_unverified_urls {
            return Err(StoreError::UnreachablePaper(paper.canonical_url));
        }
        let replaced = self
            .state
            .record(&paper.record_id)
            .is_some_and(|r| r.pending_reviews.iter().any(|rv| rv.reviewer_id == principal.principal_id));
        // The stored paper input is the canonical form so replay rebuilds
        // the identical record.
        let stored_paper = match self.state.record(&paper.record_id) {
            Some(existing) => paper_input_of(&existing.paper),
            None => paper_input_of(&paper),
        };
        let payload = ReviewPayload {
            record_id: paper.record_id.clone(),
            reviewer: principal.principal_id.clone(),
            paper: stored_paper,
            grades: review.grades,
            comment: review.comment,
            url_verified,
        };
        let action = if replaced {
            Action::ReviewReplaced
        } else {
            Action::ReviewSubmitted
        };
        self.commit(&principal.principal_id, action, to_payload(&payload))?;
        let record = self.state.record(&paper.record_id).expect("record exists after submit");
        Ok(SubmissionOutcome {
            record_id: paper.record_id,
            new_state: record.state(self.board().min_reviews),
            replaced,
            url_verified,
        })
    }

    /// Publishes the collated pending reviews as the record's new snapshot.
    pub fn release(&mut self, principal: &Principal, record_id: &str) -> Result<ReviewRecord, StoreError> {
        let principal = self.current(principal)?;
        if !principal.role.can_release() {
            return Err(StoreError::AuthFailed);
        }
        let id = RecordId::parse(record_id).ok_or_else(|| StoreError::UnknownRecord(record_id.to_string()))?;
        let record = self
            .state
            .record(&id)
            .ok_or_else(|| StoreError::UnknownRecord(record_id.to_string()))?;
        let state = record.state(self.board().min_reviews);
        if !matches!(state, LifecycleState::Ready | LifecycleState::Stale) {
            return Err(StoreError::NotReady { id, state });
        }
        self.commit(
            &principal.principal_id,
            Action::RecordReleased,
            to_payload(&ReleasePayload { record_id: id.clone() }),
        )?;
        Ok(self.state.record(&id).expect("released record exists").clone())
    }

    /// `admin = None` acts as the local operator ("system").
    pub fn add_principal(
        &mut self,
        admin: Option<&Principal>,
        principal_id: &str,
        role: Role,
        token: &str,
    ) -> Result<Principal, StoreError> {
        let actor = self.admin_actor(admin)?;
        if !is_principal_id(principal_id) {
            return Err(StoreError::InvalidInput(format!("invalid principal id {principal_id:?}")));
        }
        if token.len() < 16 {
            return Err(StoreError::InvalidInput("token must be at least 16 characters".into()));
        }
        if self.state.principals().contains_key(principal_id) {
            return Err(StoreError::DuplicateId(principal_id.to_string()));
        }
        let token_hash = hash_token(token);
        if self.state.principals().values().any(|p| p.token_hash == token_hash) {
            return Err(StoreError::TokenInUse);
        }
        self.commit(
            &actor,
            Action::PrincipalAdded,
            to_payload(&PrincipalAddedPayload {
                principal_id: principal_id.to_string(),
                role,
                token_hash,
            }),
        )?;
        Ok(self.state.principals()[principal_id].clone())
    }

    pub fn revoke_principal(&mut self, admin: Option<&Principal>, principal_id: &str) -> Result<Principal, StoreError> {
        let actor = self.admin_actor(admin)?;
        match self.state.principals().get(principal_id) {
            None => return Err(StoreError::UnknownPrincipal(principal_id.to_string())),
            Some(p) if !p.active => return Err(StoreError::AlreadyRevoked(principal_id.to_string())),
            Some(_) => {}
        }
        self.commit(
            &actor,
            Action::PrincipalRevoked,
            to_payload(&PrincipalRevokedPayload {
                principal_id: principal_id.to_string(),
            }),
        )?;
        Ok(self.state.principals()[principal_id].clone())
    }

    fn admin_actor(&self, admin: Option<&Principal>) -> Result<String, StoreError> {
        match admin {
            None => Ok(SYSTEM_ACTOR.to_string()),
            Some(p) => {
                let p = self.current(p)?;
                if p.role == Role::Admin {
                    Ok(p.principal_id)
                } else {
                    Err(StoreError::AuthFailed)
                }
            }
        }
    }
}

fn is_principal_id(s: &str) -> bool {
    !s.is_empty()
        && s.len() <= 64
        && s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.' | '@'))
        && s != SYSTEM_ACTOR
}

pub fn hash_token(token: &str) -> String {
    sha256_hex(token.as_bytes())
}

fn paper_input_of(paper: &PaperRef) -> PaperInput {
    PaperInput {
        url: paper.canonical_url.clone(),
        title: paper.title.clone(),
        authors: paper.authors.clone(),
        institutions: paper.institutions.clone(),
        abstract_text: paper.abstract_text.clone(),
        keywords: paper.keywords.clone(),
        publication_date: paper.publication_date,
    }
}
