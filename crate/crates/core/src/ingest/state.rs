//! Board state and the deterministic event application shared by live
//! operations and replay.

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use super::event::{Action, Event, GENESIS_HASH};
use crate::alerts::Subscription;
use crate::model::{collate, BoardMeta, Dimension, PaperInput, PaperRef, PublicRecord, RecordId, Review, ReviewRecord};
use crate::query::parse_query;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Role {
    Reviewer,
    Editor,
    Admin,
}

impl Role {
    pub fn can_release(self) -> bool {
        matches!(self, Role::Editor | Role::Admin)
    }
}

impl std::str::FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "reviewer" => Ok(Role::Reviewer),
            "editor" => Ok(Role::Editor),
            "admin" => Ok(Role::Admin),
            other => Err(format!("unknown role {other:?} (expected reviewer, editor or admin)")),
        }
    }
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Role::Reviewer => "REVIEWER",
            Role::Editor => "EDITOR",
            Role::Admin => "ADMIN",
        })
    }
}

/// An accredited actor. Only the SHA-256 of the bearer secret is kept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Principal {
    pub principal_id: String,
    pub role: Role,
    pub token_hash: String,
    pub active: bool,
}

// Event payloads. Field names are the on-disk keys.

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub(crate) struct ReviewPayload {
    pub record_id: RecordId,
    pub reviewer: String,
    pub paper: PaperInput,
    pub grades: BTreeMap<Dimension, i64>,
    pub comment: String,
    pub url_verified: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub(crate) struct ReleasePayload {
    pub record_id: RecordId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub(crate) struct PrincipalAddedPayload {
    pub principal_id: String,
    pub role: Role,
    pub token_hash: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub(crate) struct PrincipalRevokedPayload {
    pub principal_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub(crate) struct SubscriptionAddedPayload {
    pub subscription_id: String,
    pub contact: String,
    pub query: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub(crate) struct SubscriptionRemovedPayload {
    pub subscription_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub(crate) struct SweepPayload {
    /// Release seq every advanced subscription now covers.
    pub watermark: u64,
    pub advanced: Vec<String>,
    pub failed: Vec<String>,
    pub notifications: u64,
    pub matched_records: u64,
}

pub(crate) fn to_payload<T: Serialize>(payload: &T) -> Map<String, Value> {
    match serde_json::to_value(payload).expect("payloads serialize") {
        Value::Object(map) => map,
        _ => unreachable!("payloads are structs"),
    }
}

fn from_payload<T: DeserializeOwned>(event: &Event) -> Result<T, ApplyError> {
    serde_json::from_value(Value::Object(event.payload.clone()))
        .map_err(|e| ApplyError::at(event, format!("bad payload: {e}")))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("event {seq}: {reason}")]
pub struct ApplyError {
    pub seq: u64,
    pub reason: String,
}

impl ApplyError {
    fn at(event: &Event, reason: impl Into<String>) -> Self {
        Self {
            seq: event.seq,
            reason: reason.into(),
        }
    }
}

/// Everything reconstructed from the event log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoardState {
    pub(crate) board: BoardMeta,
    pub(crate) principals: BTreeMap<String, Principal>,
    pub(crate) records: BTreeMap<RecordId, ReviewRecord>,
    pub(crate) subscriptions: BTreeMap<String, Subscription>,
    pub(crate) last_seq: u64,
    pub(crate) last_hash: String,
    pub(crate) max_release_seq: u64,
}

impl BoardState {
    pub fn new(board: BoardMeta) -> Self {
        Self {
            board,
            principals: BTreeMap::new(),
            records: BTreeMap::new(),
            subscriptions: BTreeMap::new(),
            last_seq: 0,
            last_hash: GENESIS_HASH.to_string(),
            max_release_seq: 0,
        }
    }

    pub fn board(&self) -> &BoardMeta {
        &self.board
    }

    pub fn principals(&self) -> &BTreeMap<String, Principal> {
        &self.principals
    }

    pub fn records(&self) -> &BTreeMap<RecordId, ReviewRecord> {
        &self.records
    }

    pub fn record(&self, id: &RecordId) -> Option<&ReviewRecord> {
        self.records.get(id)
    }

    pub fn subscriptions(&self) -> &BTreeMap<String, Subscription> {
        &self.subscriptions
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    pub fn last_hash(&self) -> &str {
        &self.last_hash
    }

    /// Highest `last_release_seq` over all records; 0 before any release.
    pub fn max_release_seq(&self) -> u64 {
        self.max_release_seq
    }

    /// Released snapshots only, ordered by record id.
    pub fn public_records(&self) -> impl Iterator<Item = &PublicRecord> {
        self.records.values().filter_map(ReviewRecord::public)
    }

    pub fn apply(&mut self, event: &Event) -> Result<(), ApplyError> {
        if event.seq != self.last_seq + 1 {
            return Err(ApplyError::at(event, format!("expected seq {}", self.last_seq + 1)));
        }
        if event.prev_hash != self.last_hash {
            return Err(ApplyError::at(event, "prev_hash does not continue the chain"));
        }
        match event.action {
            Action::ReviewSubmitted | Action::ReviewReplaced => {
                let p: ReviewPayload = from_payload(event)?;
                let paper = PaperRef::from_input(&p.paper).map_err(|e| ApplyError::at(event, e.to_string()))?;
                if paper.record_id != p.record_id {
                    return Err(ApplyError::at(event, "record_id does not match paper url"));
                }
                let record = self
                    .records
                    .entry(p.record_id.clone())
                    .or_insert_with(|| ReviewRecord::new(paper));
                let replaces = record.pending_reviews.iter().any(|r| r.reviewer_id == p.reviewer);
                if replaces != (event.action == Action::ReviewReplaced) {
                    return Err(ApplyError::at(event, "replacement flag disagrees with state"));
                }
                record.put_review(Review {
                    reviewer_id: p.reviewer,
                    record_id: p.record_id,
                    grades: p.grades,
                    comment: p.comment,
                    submitted_at: event.timestamp,
                });
            }
            Action::RecordReleased => {
                let p: ReleasePayload = from_payload(event)?;
                let dims = self.board.dimensions.clone();
                let record = self
                    .records
                    .get_mut(&p.record_id)
                    .ok_or_else(|| ApplyError::at(event, "release of unknown record"))?;
                let aggregates =
                    collate(&record.pending_reviews, &dims).map_err(|e| ApplyError::at(event, e.to_string()))?;
                record.released = Some(PublicRecord {
                    paper: record.paper.clone(),
                    aggregates,
                    last_release_seq: event.seq,
                    released_at: event.timestamp,
                });
                record.changed_since_release = false;
                self.max_release_seq = event.seq;
            }
            Action::PrincipalAdded => {
                let p: PrincipalAddedPayload = from_payload(event)?;
                if self.principals.contains_key(&p.principal_id) {
                    return Err(ApplyError::at(event, "duplicate principal"));
                }
                self.principals.insert(
                    p.principal_id.clone(),
                    Principal {
                        principal_id: p.principal_id,
                        role: p.role,
                        token_hash: p.token_hash,
                        active: true,
                    },
                );
            }
            Action::PrincipalRevoked => {
                let p: PrincipalRevokedPayload = from_payload(event)?;
                let principal = self
                    .principals
                    .get_mut(&p.principal_id)
                    .ok_or_else(|| ApplyError::at(event, "revocation of unknown principal"))?;
                principal.active = false;
            }
            Action::SubscriptionAdded => {
                let p: SubscriptionAddedPayload = from_payload(event)?;
                let ast = parse_query(&p.query).map_err(|e| ApplyError::at(event, e.to_string()))?;
                if self.subscriptions.contains_key(&p.subscription_id) {
                    return Err(ApplyError::at(event, "duplicate subscription"));
                }
                self.subscriptions.insert(
                    p.subscription_id.clone(),
                    Subscription {
                        subscription_id: p.subscription_id,
                        contact: p.contact,
                        query_text: p.query,
                        ast,
                        watermark: self.max_release_seq,
                    },
                );
            }
            Action::SubscriptionRemoved => {
                let p: SubscriptionRemovedPayload = from_payload(event)?;
                self.subscriptions
                    .remove(&p.subscription_id)
                    .ok_or_else(|| ApplyError::at(event, "removal of unknown subscription"))?;
            }
            Action::SweepRun => {
                let p: SweepPayload = from_payload(event)?;
                for id in &p.advanced {
                    if let Some(sub) = self.subscriptions.get_mut(id) {
                        sub.watermark = sub.watermark.max(p.watermark);
                    }
                }
            }
        }
        self.last_seq = event.seq;
        self.last_hash = event.hash.clone();
        Ok(())
    }
}
