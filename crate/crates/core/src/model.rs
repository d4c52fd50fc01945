//! Domain types shared across the board, and the collation arithmetic that
//! turns individual reviews into public aggregates.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::record_format::{normalize_paper_url, MalformedUrl};

pub const MIN_GRADE: i64 = 1;
pub const MAX_GRADE: i64 = 5;

/// One graded criterion. Names are lowercase hyphenated tokens.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Dimension(String);

impl Dimension {
    pub const DEFAULT_SET: [&'static str; 6] = [
        "presentation",
        "relevance",
        "soundness",
        "originality",
        "importance-questions",
        "importance-results",
    ];

    pub fn new(name: impl Into<String>) -> Result<Self, InvalidDimension> {
        let name = name.into();
        if is_token(&name) {
            Ok(Self(name))
        } else {
            Err(InvalidDimension(name))
        }
    }

    pub fn default_set() -> Vec<Dimension> {
        Self::DEFAULT_SET
            .iter()
            .map(|n| Dimension(n.to_string()))
            .collect()
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("invalid dimension name {0:?}")]
pub struct InvalidDimension(pub String);

/// `[a-z0-9]+(-[a-z0-9]+)*`
pub(crate) fn is_token(s: &str) -> bool {
    !s.is_empty()
        && s.split('-').all(|part| {
            !part.is_empty()
                && part
                    .bytes()
                    .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit())
        })
}

/// First 16 hex digits of the SHA-256 of a canonical paper URL.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RecordId(String);

impl RecordId {
    pub fn for_canonical_url(canonical_url: &str) -> Self {
        let digest = Sha256::digest(canonical_url.as_bytes());
        Self(hex::encode(&digest[..8]))
    }

    pub fn parse(s: &str) -> Option<Self> {
        (s.len() == 16 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')))
            .then(|| Self(s.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RecordId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Identity and bibliographic metadata of an externally hosted paper.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperRef {
    pub canonical_url: String,
    pub record_id: RecordId,
    pub title: String,
    /// "Family, Given" strings, in byline order.
    pub authors: Vec<String>,
    pub institutions: Vec<String>,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub keywords: Vec<String>,
    pub publication_date: Option<NaiveDate>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum PaperError {
    #[error(transparent)]
    MalformedUrl(#[from] MalformedUrl),
    #[error("paper title must not be empty")]
    EmptyTitle,
    #[error("paper must have at least one author")]
    NoAuthors,
}

/// Unvalidated bibliographic input, as entered by a reviewer.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperInput {
    pub url: String,
    pub title: String,
    pub authors: Vec<String>,
    #[serde(default)]
    pub institutions: Vec<String>,
    #[serde(default, rename = "abstract")]
    pub abstract_text: String,
    #[serde(default)]
    pub keywords: Vec<String>,
    #[serde(default)]
    pub publication_date: Option<NaiveDate>,
}

impl PaperRef {
    pub fn from_input(input: &PaperInput) -> Result<Self, PaperError> {
        let canonical_url = normalize_paper_url(&input.url)?;
        let title = flatten_text(&input.title);
        if title.is_empty() {
            return Err(PaperError::EmptyTitle);
        }
        let authors = clean_list(&input.authors);
        if authors.is_empty() {
            return Err(PaperError::NoAuthors);
        }
        let mut keywords = Vec::new();
        for kw in clean_list(&input.keywords) {
            let kw = kw.to_lowercase();
            if !keywords.contains(&kw) {
                keywords.push(kw);
            }
        }
        Ok(Self {
            record_id: RecordId::for_canonical_url(&canonical_url),
            canonical_url,
            title,
            authors,
            institutions: clean_list(&input.institutions),
            abstract_text: flatten_text(&input.abstract_text),
            keywords,
            publication_date: input.publication_date,
        })
    }
}

/// Replaces line breaks (CRLF counts as one) and other control characters
/// with single spaces, then trims. Every public text value passes through
/// here so the record formats can carry it verbatim.
pub fn flatten_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars().peekable();
    while let Some(c) = chars.next() {
        if c == '\r' && chars.peek() == Some(&'\n') {
            chars.next();
        }
        out.push(if c.is_control() { ' ' } else { c });
    }
    out.trim().to_string()
}

fn clean_list(values: &[String]) -> Vec<String> {
    values
        .iter()
        .map(|v| flatten_text(v))
        .filter(|v| !v.is_empty())
        .collect()
}

/// One reviewer's grades for one paper.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Review {
    pub reviewer_id: String,
    pub record_id: RecordId,
    pub grades: BTreeMap<Dimension, i64>,
    pub comment: String,
    pub submitted_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    MissingDimension(Dimension),
    UnknownDimension(Dimension),
    GradeOutOfRange { dimension: Dimension, grade: i64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingDimension(d) => write!(f, "missing dimension {d}"),
            Violation::UnknownDimension(d) => write!(f, "unknown dimension {d}"),
            Violation::GradeOutOfRange { dimension, grade } => write!(
                f,
                "grade out of range [{MIN_GRADE},{MAX_GRADE}]: {dimension} = {grade}"
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

pub fn validate_review(review: &Review, board: &BoardMeta) -> ValidationReport {
    let mut violations = Vec::new();
    for dim in &board.dimensions {
        match review.grades.get(dim) {
            None => violations.push(Violation::MissingDimension(dim.clone())),
            Some(&g) if !(MIN_GRADE..=MAX_GRADE).contains(&g) => {
                violations.push(Violation::GradeOutOfRange {
                    dimension: dim.clone(),
                    grade: g,
                })
            }
            Some(_) => {}
        }
    }
    for dim in review.grades.keys() {
        if !board.dimensions.contains(dim) {
            violations.push(Violation::UnknownDimension(dim.clone()));
        }
    }
    ValidationReport { violations }
}

/// A mean grade rendered to one decimal place, held as tenths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Average {
    tenths: u32,
}

impl Average {
    pub fn from_tenths(tenths: u32) -> Self {
        Self { tenths }
    }

    pub fn tenths(self) -> u32 {
        self.tenths
    }

    /// Mean of `sum / count` rounded half away from zero to one decimal.
    /// Grades are positive, so away-from-zero is the same as upward here.
    fn from_ratio(sum: u64, count: u64) -> Self {
        let tenths = (20 * sum + count) / (2 * count);
        Self {
            tenths: tenths as u32,
        }
    }
}

impl fmt::Display for Average {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.tenths / 10, self.tenths % 10)
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("not a one-decimal average: {0:?}")]
pub struct InvalidAverage(pub String);

impl FromStr for Average {
    type Err = InvalidAverage;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || InvalidAverage(s.to_string());
        let (whole, frac) = s.split_once('.').ok_or_else(err)?;
        let digits = |p: &str| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit());
        if !digits(whole) || frac.len() != 1 || !digits(frac) || (whole.len() > 1 && whole.starts_with('0')) {
            return Err(err());
        }
        let whole: u32 = whole.parse().map_err(|_| err())?;
        let frac: u32 = frac.parse().map_err(|_| err())?;
        whole
            .checked_mul(10)
            .and_then(|w| w.checked_add(frac))
            .map(Self::from_tenths)
            .ok_or_else(err)
    }
}

impl Serialize for Average {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Average {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Collated, publishable judgements for one paper.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Aggregates {
    pub reviewer_count: u64,
    pub averages: BTreeMap<Dimension, Average>,
    pub review_date: NaiveDate,
    pub comments: Vec<String>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum CollateError {
    #[error("cannot collate an empty set of reviews")]
    EmptyInput,
}

/// Collates reviews that have already been validated and deduplicated per
/// reviewer. Comments keep the order of `reviews`; empty ones are dropped.
pub fn collate(reviews: &[Review], dimensions: &[Dimension]) -> Result<Aggregates, CollateError> {
    let review_date = reviews
        .iter()
        .map(|r| r.submitted_at.date_naive())
        .max()
        .ok_or(CollateError::EmptyInput)?;
    let count = reviews.len() as u64;
    let averages = dimensions
        .iter()
        .map(|dim| {
            let sum: u64 = reviews
                .iter()
                .map(|r| r.grades.get(dim).copied().unwrap_or(0).max(0) as u64)
                .sum();
            (dim.clone(), Average::from_ratio(sum, count))
        })
        .collect();
    let comments = reviews
        .iter()
        .map(|r| flatten_text(&r.comment))
        .filter(|c| !c.is_empty())
        .collect();
    Ok(Aggregates {
        reviewer_count: count,
        averages,
        review_date,
        comments,
    })
}

/// Static description of the board itself.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoardMeta {
    pub title: String,
    pub url: String,
    #[serde(default)]
    pub classification_codes: Vec<String>,
    #[serde(default)]
    pub board_keywords: Vec<String>,
    pub maintainer_email: String,
    #[serde(default = "Dimension::default_set")]
    pub dimensions: Vec<Dimension>,
    #[serde(default = "default_min_reviews")]
    pub min_reviews: u32,
    #[serde(default)]
    pub allow_unverified_urls: bool,
}

fn default_min_reviews() -> u32 {
    2
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum BoardMetaError {
    #[error("board title must not be empty")]
    EmptyTitle,
    #[error("board url: {0}")]
    Url(#[from] MalformedUrl),
    #[error("min_reviews must be at least 1")]
    MinReviews,
    #[error("at least one dimension must be configured")]
    NoDimensions,
    #[error("duplicate dimension {0}")]
    DuplicateDimension(Dimension),
}

impl BoardMeta {
    pub fn new(title: impl Into<String>, url: impl Into<String>, maintainer_email: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            url: url.into(),
            classification_codes: Vec::new(),
            board_keywords: Vec::new(),
            maintainer_email: maintainer_email.into(),
            dimensions: Dimension::default_set(),
            min_reviews: default_min_reviews(),
            allow_unverified_urls: false,
        }
    }

    pub fn validate(&self) -> Result<(), BoardMetaError> {
        if flatten_text(&self.title).is_empty() {
            return Err(BoardMetaError::EmptyTitle);
        }
        normalize_paper_url(&self.url)?;
        if self.min_reviews < 1 {
            return Err(BoardMetaError::MinReviews);
        }
        if self.dimensions.is_empty() {
            return Err(BoardMetaError::NoDimensions);
        }
        let mut seen = BTreeSet::new();
        for d in &self.dimensions {
            if !seen.insert(d) {
                return Err(BoardMetaError::DuplicateDimension(d.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LifecycleState {
    Pending,
    Ready,
    Released,
    Stale,
}

impl fmt::Display for LifecycleState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LifecycleState::Pending => "PENDING",
            LifecycleState::Ready => "READY",
            LifecycleState::Released => "RELEASED",
            LifecycleState::Stale => "STALE",
        })
    }
}

/// The publicly visible state of a record as of its last editor release.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicRecord {
    pub paper: PaperRef,
    pub aggregates: Aggregates,
    pub last_release_seq: u64,
    pub released_at: DateTime<Utc>,
}

impl PublicRecord {
    pub fn record_id(&self) -> &RecordId {
        &self.paper.record_id
    }
}

/// Internal record: pending reviews plus the last released snapshot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReviewRecord {
    pub paper: PaperRef,
    /// Submission order; at most one per reviewer.
    pub pending_reviews: Vec<Review>,
    pub released: Option<PublicRecord>,
    /// Set when reviews changed after the last release.
    pub changed_since_release: bool,
}

impl ReviewRecord {
    pub fn new(paper: PaperRef) -> Self {
        Self {
            paper,
            pending_reviews: Vec::new(),
            released: None,
            changed_since_release: false,
        }
    }

    pub fn record_id(&self) -> &RecordId {
        &self.paper.record_id
    }

    pub fn reviewer_count(&self) -> usize {
        self.pending_reviews.len()
    }

    pub fn last_release_seq(&self) -> u64 {
        self.released.as_ref().map_or(0, |r| r.last_release_seq)
    }

    pub fn state(&self, min_reviews: u32) -> LifecycleState {
        match (&self.released, self.changed_since_release) {
            (Some(_), true) => LifecycleState::Stale,
            (Some(_), false) => LifecycleState::Released,
            (None, _) if self.reviewer_count() >= min_reviews as usize => LifecycleState::Ready,
            (None, _) => LifecycleState::Pending,
        }
    }

    /// Inserts or replaces the reviewer's review. Returns true on replacement.
    pub fn put_review(&mut self, review: Review) -> bool {
        let replaced = match self
            .pending_reviews
            .iter()
            .position(|r| r.reviewer_id == review.reviewer_id)
        {
            Some(i) => {
                self.pending_reviews.remove(i);
                true
            }
            None => false,
        };
        self.pending_reviews.push(review);
        if self.released.is_some() {
            self.changed_since_release = true;
        }
        replaced
    }

    pub fn public(&self) -> Option<&PublicRecord> {
        self.released.as_ref()
    }
}
