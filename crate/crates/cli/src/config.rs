//! Board configuration file (TOML).
//!
//! ```toml
//! title = "Review Board of Social Simulation"
//! url = "http://board.example/"
//! maintainer_email = "editor@board.example"
//! classification_codes = ["JEL:C63"]
//! min_reviews = 2
//! data_dir = "data"
//! port = 8080
//!
//! [sink]
//! type = "file"
//! path = "data/outbox.txt"
//!
//! [[roster]]
//! name = "Bruce Edmonds"
//! institution = "Centre for Policy Modelling"
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::fs::{self, File, TryLockError};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use reviewboard_core::alerts::{FileSink, NotificationSink, NullSink};
use reviewboard_core::model::BoardMeta;
use reviewboard_service::RosterEntry;

pub const LOCK_FILE: &str = "reviewboard.lock";

fn default_port() -> u16 {
    8080
}

fn default_bind() -> String {
    "127.0.0.1".into()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SinkConfig {
    /// Appends notifications to a local file.
    File { path: PathBuf },
    Null,
}

impl Default for SinkConfig {
    fn default() -> Self {
        SinkConfig::File {
            path: PathBuf::from("outbox.txt"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoardConfig {
    #[serde(flatten)]
    pub board: BoardMeta,
    pub data_dir: PathBuf,
    #[serde(default = "default_port")]
    pub port: u16,
    #[serde(default = "default_bind")]
    pub bind: String,
    #[serde(default)]
    pub help_dir: Option<PathBuf>,
    #[serde(default)]
    pub sink: SinkConfig,
    #[serde(default)]
    pub roster: Vec<RosterEntry>,
}

impl BoardConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut config: BoardConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        config
            .board
            .validate()
            .with_context(|| format!("invalid board in {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.data_dir = base.join(&config.data_dir);
        config.help_dir = config.help_dir.map(|d| base.join(d));
        if let SinkConfig::File { path } = &mut config.sink {
            *path = base.join(&*path);
        }
        Ok(config)
    }

    pub fn sink(&self) -> Box<dyn NotificationSink> {
        match &self.sink {
            SinkConfig::File { path } => Box::new(FileSink::new(path)),
            SinkConfig::Null => Box::new(NullSink),
        }
    }
}

fn toml_str(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

/// Text of a fresh config file for `init`.
pub fn initial_config(title: &str, url: &str, email: &str, data_dir: &str, port: u16) -> String {
    format!(
        "title = {title}\nurl = {url}\nmaintainer_email = {email}\nclassification_codes = []\n\
         board_keywords = []\n\
         dimensions = [\"presentation\", \"relevance\", \"soundness\", \"originality\", \"importance-questions\", \"importance-results\"]\n\
         min_reviews = 2\nallow_unverified_urls = false\n\n\
         data_dir = {data}\nport = {port}\n\n\
         # help_dir = \"help\"\n\n\
         [sink]\ntype = \"file\"\npath = {outbox}\n\n\
         # [[roster]]\n# name = \"\"\n# institution = \"\"\n",
        title = toml_str(title),
        url = toml_str(url),
        email = toml_str(email),
        data = toml_str(data_dir),
        outbox = toml_str(&format!("{data_dir}/outbox.txt")),
    )
}

/// Exclusive hold on a data directory, released on drop.
#[derive(Debug)]
pub struct DataLock {
    _file: File,
}

impl DataLock {
    pub fn acquire(data_dir: &Path) -> Result<Self> {
        fs::create_dir_all(data_dir).with_context(|| format!("creating {}", data_dir.display()))?;
        let path = data_dir.join(LOCK_FILE);
        let file = File::options()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&path)
            .with_context(|| format!("opening {}", path.display()))?;
        match file.try_lock() {
            Ok(()) => Ok(Self { _file: file }),
            Err(TryLockError::WouldBlock) => {
                bail!("{} is in use by another reviewboard process", data_dir.display())
            }
            Err(TryLockError::Error(e)) => Err(e).with_context(|| format!("locking {}", path.display())),
        }
    }
}
