//! Saved-search alerts.
//!
//! A subscription stores a query and a watermark: the highest release
//! sequence number it has already been checked against. A sweep looks at
//! every record released (or re-released) after each watermark, notifies the
//! subscriber of the matches, and advances the watermark to the current
//! maximum release sequence. Delivery failures leave the watermark in place
//! so the same releases are retried by the next sweep.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

use crate::ingest::{sha256_hex, Action, Store, StoreError, SYSTEM_ACTOR};
use crate::model::{flatten_text, PublicRecord};
use crate::query::{evaluate, parse_query, ParseError, Query};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subscription {
    pub subscription_id: String,
    pub contact: String,
    pub query_text: String,
    pub ast: Query,
    pub watermark: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Notification {
    pub subscription_id: String,
    pub contact: String,
    pub query_text: String,
    pub lines: Vec<String>,
    pub sweep_seq: u64,
}

impl Notification {
    /// Header line, then one line per matched record.
    pub fn body(&self) -> String {
        let mut out = format!("New reviewed papers matching: {}\n", self.query_text);
        for line in &self.lines {
            out.push_str(line);
            out.push('\n');
        }
        out
    }
}

/// `<paper-title> \u{2014} <paper-url> \u{2014} released <date>`
pub fn notification_line(record: &PublicRecord) -> String {
    format!(
        "{} \u{2014} {} \u{2014} released {}",
        record.paper.title,
        record.paper.canonical_url,
        record.released_at.format("%Y-%m-%d")
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("notification delivery failed: {0}")]
pub struct SinkFailure(pub String);

pub trait NotificationSink: Send {
    fn deliver(&mut self, notification: &Notification) -> Result<(), SinkFailure>;
}

/// Keeps delivered notifications in memory.
#[derive(Debug, Default, Clone)]
pub struct MemorySink {
    pub delivered: Vec<Notification>,
    /// Contacts whose deliveries fail.
    pub failing_contacts: Vec<String>,
}

impl MemorySink {
    pub fn new() -> Self {
        Self::default()
    }
}

impl NotificationSink for MemorySink {
    fn deliver(&mut self, notification: &Notification) -> Result<(), SinkFailure> {
        if self.failing_contacts.contains(&notification.contact) {
            return Err(SinkFailure(format!("mailbox {} unavailable", notification.contact)));
        }
        self.delivered.push(notification.clone());
        Ok(())
    }
}

/// Appends each notification to a file as a plain-text message.
#[derive(Debug, Clone)]
pub struct FileSink {
    path: PathBuf,
}

impl FileSink {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }
}

impl NotificationSink for FileSink {
    fn deliver(&mut self, n: &Notification) -> Result<(), SinkFailure> {
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| SinkFailure(format!("{}: {e}", self.path.display())))?;
        write!(
            file,
            "To: {}\nSubject: New reviewed papers\nX-Subscription: {}\nX-Sweep: {}\n\n{}\n",
            n.contact,
            n.subscription_id,
            n.sweep_seq,
            n.body()
        )
        .map_err(|e| SinkFailure(format!("{}: {e}", self.path.display())))
    }
}

/// Drops every notification.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullSink;

impl NotificationSink for NullSink {
    fn deliver(&mut self, _: &Notification) -> Result<(), SinkFailure> {
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum AlertError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("unknown subscription {0}")]
    UnknownSubscription(String),
    #[error("contact address must not be empty")]
    EmptyContact,
    #[error(transparent)]
    Store(#[from] StoreError),
}

pub fn subscribe(store: &mut Store, contact: &str, query_text: &str) -> Result<Subscription, AlertError> {
    let contact = flatten_text(contact);
    if contact.is_empty() {
        return Err(AlertError::EmptyContact);
    }
    parse_query(query_text)?;
    let seq = store.next_seq();
    let digest = sha256_hex(
        format!("{}\n{seq}\n{contact}\n{query_text}", store.state().last_hash()).as_bytes(),
    );
    let subscription_id = format!("sub-{}", &digest[..16]);
    let payload = crate::ingest::state_payloads::subscription_added(&subscription_id, &contact, query_text);
    store.commit(SYSTEM_ACTOR, Action::SubscriptionAdded, payload)?;
    Ok(store.state().subscriptions()[&subscription_id].clone())
}

pub fn unsubscribe(store: &mut Store, subscription_id: &str) -> Result<(), AlertError> {
    if !store.state().subscriptions().contains_key(subscription_id) {
        return Err(AlertError::UnknownSubscription(subscription_id.to_string()));
    }
    let payload = crate::ingest::state_payloads::subscription_removed(subscription_id);
    store.commit(SYSTEM_ACTOR, Action::SubscriptionRemoved, payload)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SweepReport {
    pub sweep_seq: u64,
    pub watermark: u64,
    pub subscriptions: usize,
    pub notifications: Vec<Notification>,
    pub failed: Vec<String>,
}

/// Released records after `watermark`, ordered by release then record id.
pub fn released_after(store: &Store, watermark: u64) -> Vec<&PublicRecord> {
    let mut records: Vec<&PublicRecord> = store
        .state()
        .public_records()
        .filter(|r| r.last_release_seq > watermark)
        .collect();
    records.sort_by(|a, b| {
        a.last_release_seq
            .cmp(&b.last_release_seq)
            .then_with(|| a.record_id().cmp(b.record_id()))
    });
    records
}

/// Runs one alert sweep. `actor` is recorded on the SWEEP_RUN event.
pub fn sweep(store: &mut Store, sink: &mut dyn NotificationSink, actor: &str) -> Result<SweepReport, AlertError> {
    let sweep_seq = store.next_seq();
    let watermark = store.state().max_release_seq();
    let mut notifications = Vec::new();
    let mut advanced = Vec::new();
    let mut failed = Vec::new();
    let mut matched_records = 0u64;
    for sub in store.state().subscriptions().values() {
        let matches: Vec<&PublicRecord> = released_after(store, sub.watermark)
            .into_iter()
            .filter(|r| evaluate(&sub.ast, r))
            .collect();
        if matches.is_empty() {
            advanced.push(sub.subscription_id.clone());
            continue;
        }
        let notification = Notification {
            subscription_id: sub.subscription_id.clone(),
            contact: sub.contact.clone(),
            query_text: sub.query_text.clone(),
            lines: matches.iter().map(|r| notification_line(r)).collect(),
            sweep_seq,
        };
        match sink.deliver(&notification) {
            Ok(()) => {
                matched_records += matches.len() as u64;
                advanced.push(sub.subscription_id.clone());
                notifications.push(notification);
            }
            Err(_) => failed.push(sub.subscription_id.clone()),
        }
    }
    let subscriptions = store.state().subscriptions().len();
    let payload = crate::ingest::state_payloads::sweep_run(
        watermark,
        advanced,
        failed.clone(),
        notifications.len() as u64,
        matched_records,
    );
    store.commit(actor, Action::SweepRun, payload)?;
    Ok(SweepReport {
        sweep_seq,
        watermark,
        subscriptions,
        notifications,
        failed,
    })
}
