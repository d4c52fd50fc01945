//! Review intake: authentication of accredited principals, paper URL
//! checks, merging reviews into records, editor release, and the
//! hash-chained event log that doubles as audit trail and persistence.

mod event;
mod log;
mod state;
mod store;

pub use event::{
    canonical_json, format_timestamp, sha256_hex, verify_audit, verify_audit_with_head, verify_log_bytes, Action,
    ChainHead, Event, VerificationReport, GENESIS_HASH, SYSTEM_ACTOR,
};
pub use log::{read_head, verify_log_dir, FileLog, FileLogError, LogBackend, MemoryLog, HEAD_FILE, LOG_FILE};
pub use state::{ApplyError, BoardState, Principal, Role};
pub use store::{
    hash_token, probe_url, replay, Clock, FakeProbe, PaperProbe, ProbeStatus, ReviewSubmission, SteppingClock,
    Store, StoreError, SubmissionOutcome, SystemClock,
};

/// Payload builders for events committed by other modules.
pub(crate) mod state_payloads {
    use serde_json::{Map, Value};

    use super::state::{to_payload, SubscriptionAddedPayload, SubscriptionRemovedPayload, SweepPayload};

    pub fn subscription_added(subscription_id: &str, contact: &str, query: &str) -> Map<String, Value> {
        to_payload(&SubscriptionAddedPayload {
            subscription_id: subscription_id.to_string(),
            contact: contact.to_string(),
            query: query.to_string(),
        })
    }

    pub fn subscription_removed(subscription_id: &str) -> Map<String, Value> {
        to_payload(&SubscriptionRemovedPayload {
            subscription_id: subscription_id.to_string(),
        })
    }

    pub fn sweep_run(
        watermark: u64,
        advanced: Vec<String>,
        failed: Vec<String>,
        notifications: u64,
        matched_records: u64,
    ) -> Map<String, Value> {
        to_payload(&SweepPayload {
            watermark,
            advanced,
            failed,
            notifications,
            matched_records,
        })
    }
}
