//! Hash-chained audit events and their canonical line serialization.
//!
//! Each event is stored as one line of compact JSON with object keys sorted
//! bytewise at every level. The `hash` field is the SHA-256 (lowercase hex)
//! of the same object serialized without `hash`. The first event links to
//! [`GENESIS_HASH`]; every later event carries its predecessor's hash in
//! `prev_hash`.

use std::borrow::Borrow;
use std::fmt;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

pub const GENESIS_HASH: &str = "0000000000000000000000000000000000000000000000000000000000000000";

pub const SYSTEM_ACTOR: &str = "system";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Action {
    ReviewSubmitted,
    ReviewReplaced,
    RecordReleased,
    PrincipalAdded,
    PrincipalRevoked,
    SubscriptionAdded,
    SubscriptionRemoved,
    SweepRun,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match serde_json::to_value(self) {
            Ok(Value::String(s)) => f.write_str(&s),
            _ => write!(f, "{self:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    #[serde(with = "timestamp")]
    pub timestamp: DateTime<Utc>,
    pub actor: String,
    pub action: Action,
    pub payload: Map<String, Value>,
    pub prev_hash: String,
    pub hash: String,
}

mod timestamp {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format_timestamp(t))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&s)
            .map(|t| t.with_timezone(&Utc))
            .map_err(serde::de::Error::custom)
    }
}

/// RFC 3339, UTC, microsecond precision.
pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Micros, true)
}

/// Compact JSON with sorted object keys.
pub fn canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_canonical(value, &mut out);
    out
}

fn write_canonical(value: &Value, out: &mut String) {
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(key.clone()).to_string());
                out.push(':');
                write_canonical(&map[key], out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        scalar => out.push_str(&scalar.to_string()),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Event {
    /// Builds an event and seals it with its hash.
    pub fn seal(
        seq: u64,
        timestamp: DateTime<Utc>,
        actor: impl Into<String>,
        action: Action,
        payload: Map<String, Value>,
        prev_hash: impl Into<String>,
    ) -> Self {
        let mut event = Event {
            seq,
            timestamp,
            actor: actor.into(),
            action,
            payload,
            prev_hash: prev_hash.into(),
            hash: String::new(),
        };
        event.hash = event.compute_hash();
        event
    }

    fn unsealed_value(&self) -> Value {
        let mut value = serde_json::to_value(self).expect("events serialize");
        if let Value::Object(map) = &mut value {
            map.remove("hash");
        }
        value
    }

    /// The exact bytes that are hashed.
    pub fn hash_input(&self) -> String {
        canonical_json(&self.unsealed_value())
    }

    pub fn compute_hash(&self) -> String {
        sha256_hex(self.hash_input().as_bytes())
    }

    /// One log line, without the trailing newline.
    pub fn to_line(&self) -> String {
        canonical_json(&serde_json::to_value(self).expect("events serialize"))
    }

    pub fn from_line(line: &str) -> Result<Self, String> {
        let event: Event = serde_json::from_str(line).map_err(|e| e.to_string())?;
        if event.to_line() != line {
            return Err("line is not in canonical form".into());
        }
        Ok(event)
    }
}

/// The last event of a log, recorded separately so that truncation of the
/// tail can be detected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainHead {
    pub seq: u64,
    pub hash: String,
}

impl ChainHead {
    pub fn of(event: &Event) -> Self {
        Self {
            seq: event.seq,
            hash: event.hash.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VerificationReport {
    Intact { events: usize },
    Broken { seq: u64, reason: String },
}

impl VerificationReport {
    pub fn is_intact(&self) -> bool {
        matches!(self, VerificationReport::Intact { .. })
    }

    pub fn broken_seq(&self) -> Option<u64> {
        match self {
            VerificationReport::Broken { seq, .. } => Some(*seq),
            VerificationReport::Intact { .. } => None,
        }
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VerificationReport::Intact { events } => write!(f, "intact ({events} events)"),
            VerificationReport::Broken { seq, reason } => write!(f, "broken at seq {seq}: {reason}"),
        }
    }
}

/// Recomputes every hash and chain link.
///
/// A self-consistent event that links to the wrong predecessor (an earlier
/// event was deleted) is reported under its own sequence number; an event
/// whose content no longer matches its hash is reported at its position.
pub fn verify_audit(events: &[Event]) -> VerificationReport {
    verify_chain(events.iter().map(Ok::<_, String>), None)
}

/// As [`verify_audit`], additionally requiring the log to end at `head`.
pub fn verify_audit_with_head(events: &[Event], head: Option<&ChainHead>) -> VerificationReport {
    verify_chain(events.iter().map(Ok::<_, String>), head)
}

/// Verifies raw log bytes: one canonical event per newline-terminated line.
pub fn verify_log_bytes(bytes: &[u8], head: Option<&ChainHead>) -> VerificationReport {
    match split_lines(bytes) {
        Ok(lines) => {
            let parsed = lines.into_iter().map(|line| match std::str::from_utf8(line) {
                Ok(s) => Event::from_line(s),
                Err(e) => Err(format!("invalid UTF-8: {e}")),
            });
            verify_chain(parsed, head)
        }
        Err(seq) => VerificationReport::Broken {
            seq,
            reason: "final line is not newline-terminated".into(),
        },
    }
}

/// Splits newline-terminated lines; an unterminated tail yields the
/// position it would occupy.
pub(crate) fn split_lines(bytes: &[u8]) -> Result<Vec<&[u8]>, u64> {
    if bytes.is_empty() {
        return Ok(Vec::new());
    }
    let mut lines: Vec<&[u8]> = bytes.split(|b| *b == b'\n').collect();
    let tail = lines.pop().unwrap_or_default();
    if !tail.is_empty() {
        return Err(lines.len() as u64 + 1);
    }
    Ok(lines)
}

fn verify_chain<B, E>(events: impl Iterator<Item = Result<B, E>>, head: Option<&ChainHead>) -> VerificationReport
where
    B: Borrow<Event>,
    E: fmt::Display,
{
    let mut prev_hash = GENESIS_HASH.to_string();
    let mut count = 0usize;
    for (i, event) in events.enumerate() {
        let position = i as u64 + 1;
        let owned = match event {
            Ok(e) => e,
            Err(reason) => {
                return VerificationReport::Broken {
                    seq: position,
                    reason: format!("unreadable event: {reason}"),
                }
            }
        };
        let event: &Event = owned.borrow();
        if event.compute_hash() != event.hash {
            return VerificationReport::Broken {
                seq: position,
                reason: "hash does not match content".into(),
            };
        }
        if event.prev_hash != prev_hash {
            return VerificationReport::Broken {
                seq: event.seq,
                reason: "prev_hash does not match preceding event".into(),
            };
        }
        if event.seq != position {
            return VerificationReport::Broken {
                seq: event.seq.max(position),
                reason: format!("expected seq {position}"),
            };
        }
        prev_hash = event.hash.clone();
        count += 1;
    }
    if let Some(head) = head {
        let last = count as u64;
        if last != head.seq || prev_hash != head.hash {
            return VerificationReport::Broken {
                seq: (last + 1).min(head.seq.max(1)),
                reason: format!("log ends at seq {last} but head records seq {}", head.seq),
            };
        }
    }
    VerificationReport::Intact { events: count }
}
