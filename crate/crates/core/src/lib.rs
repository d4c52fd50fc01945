pub mod alerts;
pub mod ingest;
pub mod model;
pub mod query;
pub mod record_format;

#[cfg(feature = "testkit")]
pub mod testkit;
