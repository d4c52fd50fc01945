//! Event log storage backends.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use super::event::{split_lines, verify_log_bytes, ChainHead, Event, VerificationReport};

pub trait LogBackend: Send {
    /// Durably appends one event. Must not return before the line is stored.
    fn append(&mut self, event: &Event) -> io::Result<()>;
}

/// Keeps lines in memory; used by tests and throwaway boards.
#[derive(Debug, Default, Clone)]
pub struct MemoryLog {
    lines: Vec<String>,
    fail_appends: bool,
}

impl MemoryLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    /// Makes every later append fail, to exercise storage errors.
    pub fn fail_appends(&mut self, fail: bool) {
        self.fail_appends = fail;
    }
}

impl LogBackend for MemoryLog {
    fn append(&mut self, event: &Event) -> io::Result<()> {
        if self.fail_appends {
            return Err(io::Error::other("append disabled"));
        }
        self.lines.push(event.to_line());
        Ok(())
    }
}

pub const LOG_FILE: &str = "events.log";
pub const HEAD_FILE: &str = "events.head";

/// `events.log` holds one canonical event per line; `events.head` holds the
/// last event's seq and hash so a truncated tail is detectable.
#[derive(Debug)]
pub struct FileLog {
    dir: PathBuf,
    file: File,
}

#[derive(Debug, thiserror::Error)]
pub enum FileLogError {
    #[error("event log I/O: {0}")]
    Io(#[from] io::Error),
    #[error("event log is corrupt: {0}")]
    Corrupt(VerificationReport),
    #[error("event log head file is unreadable: {0}")]
    BadHead(String),
}

impl FileLog {
    /// Opens (creating if needed) the log in `dir` and returns it with the
    /// verified events it already holds. A torn final line left by a crash
    /// mid-append is discarded.
    pub fn open(dir: &Path) -> Result<(Self, Vec<Event>), FileLogError> {
        fs::create_dir_all(dir)?;
        let path = dir.join(LOG_FILE);
        let mut bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(e.into()),
        };
        if split_lines(&bytes).is_err() {
            let keep = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
            bytes.truncate(keep);
            OpenOptions::new().write(true).open(&path)?.set_len(keep as u64)?;
        }
        let head = read_head(dir)?;
        // The head may lag the log by the events appended just before a crash.
        let report = verify_log_bytes(&bytes, None);
        if !report.is_intact() {
            return Err(FileLogError::Corrupt(report));
        }
        let events: Vec<Event> = split_lines(&bytes)
            .expect("tail trimmed above")
            .into_iter()
            .map(|l| Event::from_line(std::str::from_utf8(l).expect("verified")).expect("verified"))
            .collect();
        if let Some(head) = &head {
            let covered = events
                .get(head.seq.saturating_sub(1) as usize)
                .is_some_and(|e| e.seq == head.seq && e.hash == head.hash);
            if head.seq > 0 && !covered {
                return Err(FileLogError::Corrupt(VerificationReport::Broken {
                    seq: (events.len() as u64 + 1).min(head.seq),
                    reason: format!("log does not contain head event seq {}", head.seq),
                }));
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        let log = Self {
            dir: dir.to_path_buf(),
            file,
        };
        if let Some(last) = events.last() {
            write_head(&log.dir, &ChainHead::of(last))?;
        }
        Ok((log, events))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

impl LogBackend for FileLog {
    fn append(&mut self, event: &Event) -> io::Result<()> {
        let mut line = event.to_line();
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.sync_data()?;
        write_head(&self.dir, &ChainHead::of(event))
    }
}

pub fn read_head(dir: &Path) -> Result<Option<ChainHead>, FileLogError> {
    match fs::read_to_string(dir.join(HEAD_FILE)) {
        Ok(text) => {
            let mut parts = text.split_whitespace();
            let seq = parts.next().and_then(|s| s.parse().ok());
            let hash = parts.next();
            match (seq, hash) {
                (Some(seq), Some(hash)) => Ok(Some(ChainHead {
                    seq,
                    hash: hash.to_string(),
                })),
                _ => Err(FileLogError::BadHead(text)),
            }
        }
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn write_head(dir: &Path, head: &ChainHead) -> io::Result<()> {
    let tmp = dir.join(format!("{HEAD_FILE}.tmp"));
    {
        let mut f = File::create(&tmp)?;
        writeln!(f, "{} {}", head.seq, head.hash)?;
        f.sync_data()?;
    }
    fs::rename(tmp, dir.join(HEAD_FILE))
}

/// Verifies `events.log` in `dir` against its head file.
pub fn verify_log_dir(dir: &Path) -> Result<VerificationReport, FileLogError> {
    let bytes = match fs::read(dir.join(LOG_FILE)) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    let head = read_head(dir)?;
    Ok(verify_log_bytes(&bytes, head.as_ref()))
}
