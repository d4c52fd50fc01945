//! HTTP API and public page set for a review board.
//!
//! Mutations go through a single writer (the [`Store`] behind a mutex, run on
//! the blocking pool). Reads are served from an immutable [`Snapshot`] of
//! released records that the writer swaps after each release, so readers never
//! wait on the writer.

mod api;
mod error;
mod pages;
mod probe;

use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard, PoisonError, RwLock};

use axum::routing::{delete, get, post};
use axum::Router;
use serde::{Deserialize, Serialize};

use reviewboard_core::alerts::NotificationSink;
use reviewboard_core::ingest::{PaperProbe, Store};
use reviewboard_core::model::{BoardMeta, PublicRecord};
use reviewboard_core::query::SearchIndex;

pub use error::ApiError;
pub use probe::HttpProbe;

pub const DEFAULT_LIMIT: usize = 50;
pub const MAX_LIMIT: usize = 500;

/// A name shown on the board page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RosterEntry {
    pub name: String,
    #[serde(default)]
    pub institution: String,
}

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    /// Static help pages; a built-in page is served when unset.
    pub help_dir: Option<PathBuf>,
    pub roster: Vec<RosterEntry>,
}

/// Released records as seen by readers.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub board: BoardMeta,
    pub index: SearchIndex,
}

impl Snapshot {
    pub fn of(store: &Store) -> Self {
        let mut index = SearchIndex::new();
        for record in store.state().public_records() {
            index.insert(record.clone());
        }
        Self {
            board: store.board().clone(),
            index,
        }
    }

    /// Most recent release first, then record id.
    pub fn ranked(&self) -> Vec<&PublicRecord> {
        let mut records: Vec<&PublicRecord> = self.index.records().collect();
        records.sort_by(|a, b| {
            b.last_release_seq
                .cmp(&a.last_release_seq)
                .then_with(|| a.record_id().cmp(b.record_id()))
        });
        records
    }
}

pub(crate) struct Writer {
    pub store: Store,
    pub probe: Arc<dyn PaperProbe>,
    pub sink: Box<dyn NotificationSink>,
}

pub struct AppState {
    writer: Mutex<Writer>,
    snapshot: RwLock<Arc<Snapshot>>,
    config: ServiceConfig,
}

impl AppState {
    pub fn new(
        store: Store,
        probe: Arc<dyn PaperProbe>,
        sink: Box<dyn NotificationSink>,
        config: ServiceConfig,
    ) -> Arc<Self> {
        let snapshot = Arc::new(Snapshot::of(&store));
        Arc::new(Self {
            writer: Mutex::new(Writer { store, probe, sink }),
            snapshot: RwLock::new(snapshot),
            config,
        })
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().unwrap_or_else(PoisonError::into_inner).clone()
    }

    fn publish(&self, record: PublicRecord) {
        let mut next = (*self.snapshot()).clone();
        next.index.insert(record);
        *self.snapshot.write().unwrap_or_else(PoisonError::into_inner) = Arc::new(next);
    }

    fn writer(&self) -> MutexGuard<'_, Writer> {
        self.writer.lock().unwrap_or_else(PoisonError::into_inner)
    }

    /// Runs `f` with the store locked, for callers outside the HTTP layer.
    pub fn with_store<T>(&self, f: impl FnOnce(&mut Store) -> T) -> T {
        f(&mut self.writer().store)
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/", get(api::title))
        .route("/board", get(api::board))
        .route("/criteria", get(api::criteria))
        .route("/help", get(api::help))
        .route("/help/{name}", get(api::help_file))
        .route("/records", get(api::records))
        .route("/records/{id}", get(api::record))
        .route("/records/{id}/release", post(api::release))
        .route("/export.redif", get(api::export))
        .route("/search", get(api::search))
        .route("/reviews", post(api::submit_review))
        .route("/subscriptions", post(api::subscribe))
        .route("/subscriptions/{id}", delete(api::unsubscribe))
        .route("/audit", get(api::audit))
        .route("/sweep", post(api::sweep))
        .with_state(state)
}

/// Serves until the listener fails or `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Arc<AppState>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}
