//! Public record formats.
//!
//! Two encodings carry the same ordered field list:
//!
//! - an HTML page whose `<head>` holds one `<META NAME=.. CONTENT=..>` per
//!   field value, so that general-purpose crawlers can index the judgements;
//! - a line-oriented `ReDIF-Review 1.0` template export, one template per
//!   record, keys in Train-Case.
//!
//! Field order is fixed (see [`FieldName`]). Repeatable fields keep the order
//! in which they were stored. Both parsers are lenient: unknown fields become
//! warnings, and a record missing a mandatory field becomes an error entry
//! without affecting its siblings.

use std::fmt;

use scraper::{Html, Selector};
use thiserror::Error;
use url::Url;

use crate::model::{flatten_text, BoardMeta, Dimension, PublicRecord, ReviewRecord};

pub const REDIF_TEMPLATE_TYPE: &str = "ReDIF-Review 1.0";

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("malformed URL {url:?}: {reason}")]
pub struct MalformedUrl {
    pub url: String,
    pub reason: String,
}

/// Canonical form of a paper URL: lowercase scheme and host, no default port,
/// no fragment. Path, query and trailing slashes are kept.
pub fn normalize_paper_url(url: &str) -> Result<String, MalformedUrl> {
    let fail = |reason: &str| MalformedUrl {
        url: url.to_string(),
        reason: reason.to_string(),
    };
    let mut parsed = Url::parse(url.trim()).map_err(|e| fail(&e.to_string()))?;
    if !matches!(parsed.scheme(), "http" | "https") {
        return Err(fail("scheme must be http or https"));
    }
    if parsed.host_str().is_none_or(str::is_empty) {
        return Err(fail("missing host"));
    }
    parsed.set_fragment(None);
    Ok(parsed.into())
}

/// The agreed core field set.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FieldName {
    PaperTitle,
    AuthorName,
    AuthorInstitution,
    PaperUrl,
    PublicationDate,
    Keyword,
    BoardTitle,
    BoardUrl,
    ClassificationCode,
    MaintainerEmail,
    NumberOfReviewers,
    ReviewDate,
    /// `avg-<dimension>`; the six default dimensions come first in their
    /// standard order, board-specific extras follow alphabetically.
    Average(Dimension),
    Comment,
}

const FIXED_NAMES: [(&str, FieldName); 13] = [
    ("paper-title", FieldName::PaperTitle),
    ("author-name", FieldName::AuthorName),
    ("author-institution", FieldName::AuthorInstitution),
    ("paper-url", FieldName::PaperUrl),
    ("publication-date", FieldName::PublicationDate),
    ("keyword", FieldName::Keyword),
    ("board-title", FieldName::BoardTitle),
    ("board-url", FieldName::BoardUrl),
    ("classification-code", FieldName::ClassificationCode),
    ("maintainer-email", FieldName::MaintainerEmail),
    ("number-of-reviewers", FieldName::NumberOfReviewers),
    ("review-date", FieldName::ReviewDate),
    ("comment", FieldName::Comment),
];

impl FieldName {
    pub const MANDATORY: [FieldName; 3] = [FieldName::PaperTitle, FieldName::PaperUrl, FieldName::BoardTitle];

    pub fn name(&self) -> String {
        match self {
            FieldName::Average(d) => format!("avg-{d}"),
            other => FIXED_NAMES
                .iter()
                .find(|(_, f)| f == other)
                .map(|(n, _)| n.to_string())
                .expect("every fixed field has a name"),
        }
    }

    /// Accepts any letter case.
    pub fn parse(name: &str) -> Option<FieldName> {
        let lower = name.trim().to_ascii_lowercase();
        if let Some((_, f)) = FIXED_NAMES.iter().find(|(n, _)| *n == lower) {
            return Some(f.clone());
        }
        let dim = lower.strip_prefix("avg-")?;
        Dimension::new(dim).ok().map(FieldName::Average)
    }

    /// `paper-title` -> `Paper-Title`
    pub fn redif_key(&self) -> String {
        self.name()
            .split('-')
            .map(|part| {
                let mut chars = part.chars();
                match chars.next() {
                    Some(first) => first.to_ascii_uppercase().to_string() + chars.as_str(),
                    None => String::new(),
                }
            })
            .collect::<Vec<_>>()
            .join("-")
    }

    pub fn is_repeatable(&self) -> bool {
        matches!(
            self,
            FieldName::AuthorName
                | FieldName::AuthorInstitution
                | FieldName::Keyword
                | FieldName::ClassificationCode
                | FieldName::Comment
        )
    }

    fn sort_key(&self) -> (u8, u8, String) {
        match self {
            FieldName::PaperTitle => (0, 0, String::new()),
            FieldName::AuthorName => (1, 0, String::new()),
            FieldName::AuthorInstitution => (2, 0, String::new()),
            FieldName::PaperUrl => (3, 0, String::new()),
            FieldName::PublicationDate => (4, 0, String::new()),
            FieldName::Keyword => (5, 0, String::new()),
            FieldName::BoardTitle => (6, 0, String::new()),
            FieldName::BoardUrl => (7, 0, String::new()),
            FieldName::ClassificationCode => (8, 0, String::new()),
            FieldName::MaintainerEmail => (9, 0, String::new()),
            FieldName::NumberOfReviewers => (10, 0, String::new()),
            FieldName::ReviewDate => (11, 0, String::new()),
            FieldName::Average(d) => match Dimension::DEFAULT_SET.iter().position(|n| *n == d.as_str()) {
                Some(i) => (12, i as u8, String::new()),
                None => (12, u8::MAX, d.as_str().to_string()),
            },
            FieldName::Comment => (13, 0, String::new()),
        }
    }
}

impl fmt::Display for FieldName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Ordered field/value list for one record.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecordFields(Vec<(FieldName, String)>);

impl RecordFields {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds the public field list of a released record.
    pub fn from_public(record: &PublicRecord, board: &BoardMeta) -> Self {
        let paper = &record.paper;
        let agg = &record.aggregates;
        let mut fields = Self::new();
        fields.push(FieldName::PaperTitle, &paper.title);
        for a in &paper.authors {
            fields.push(FieldName::AuthorName, a);
        }
        for i in &paper.institutions {
            fields.push(FieldName::AuthorInstitution, i);
        }
        fields.push(FieldName::PaperUrl, &paper.canonical_url);
        if let Some(date) = paper.publication_date {
            fields.push(FieldName::PublicationDate, &date.format("%Y-%m-%d").to_string());
        }
        for k in &paper.keywords {
            fields.push(FieldName::Keyword, k);
        }
        fields.push(FieldName::BoardTitle, &board.title);
        fields.push(FieldName::BoardUrl, &board.url);
        for c in &board.classification_codes {
            fields.push(FieldName::ClassificationCode, c);
        }
        fields.push(FieldName::MaintainerEmail, &board.maintainer_email);
        fields.push(FieldName::NumberOfReviewers, &agg.reviewer_count.to_string());
        fields.push(FieldName::ReviewDate, &agg.review_date.format("%Y-%m-%d").to_string());
        for (dim, avg) in &agg.averages {
            fields.push(FieldName::Average(dim.clone()), &avg.to_string());
        }
        for c in &agg.comments {
            fields.push(FieldName::Comment, c);
        }
        fields.canonicalize();
        fields
    }

    /// Appends a value after flattening; empty values are skipped.
    pub fn push(&mut self, name: FieldName, value: &str) {
        let value = flatten_text(value);
        if !value.is_empty() {
            self.0.push((name, value));
        }
    }

    /// Stable sort into the standard field order.
    pub fn canonicalize(&mut self) {
        self.0.sort_by_key(|(name, _)| name.sort_key());
    }

    pub fn canonical(mut self) -> Self {
        self.canonicalize();
        self
    }

    pub fn get(&self, name: &FieldName) -> Option<&str> {
        self.0.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_str())
    }

    pub fn get_all<'a>(&'a self, name: &'a FieldName) -> impl Iterator<Item = &'a str> + 'a {
        self.0.iter().filter(move |(n, _)| n == name).map(|(_, v)| v.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FieldName, &str)> {
        self.0.iter().map(|(n, v)| (n, v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn missing_mandatory(&self) -> Vec<FieldName> {
        FieldName::MANDATORY
            .iter()
            .filter(|f| self.get(f).is_none())
            .cloned()
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContentType {
    Html,
    Redif,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordDocument {
    pub content_type: ContentType,
    pub body: String,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("record {0} has not been released")]
    NotReleased(String),
    #[error("unparseable document: {0}")]
    UnparseableDocument(String),
}

fn escape_attr(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '"' => out.push_str("&quot;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '\n' | '\r' => out.push(' '),
            c => out.push(c),
        }
    }
    out
}

/// Escapes text for HTML element content.
pub fn escape_html(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            c => out.push(c),
        }
    }
    out
}

/// The META block for one record, one line per field value.
pub fn meta_block(fields: &RecordFields) -> String {
    let mut out = String::new();
    for (name, value) in fields.iter() {
        out.push_str(&format!(
            "<META NAME=\"{}\" CONTENT=\"{}\">\n",
            name.name(),
            escape_attr(value)
        ));
    }
    out
}

pub fn emit_html_record(record: &ReviewRecord, board: &BoardMeta) -> Result<RecordDocument, FormatError> {
    let public = record
        .public()
        .ok_or_else(|| FormatError::NotReleased(record.record_id().to_string()))?;
    Ok(emit_html_public(public, board))
}

pub fn emit_html_public(record: &PublicRecord, board: &BoardMeta) -> RecordDocument {
    let fields = RecordFields::from_public(record, board);
    let paper = &record.paper;
    let agg = &record.aggregates;
    let mut body = String::new();
    body.push_str("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n");
    body.push_str(&format!(
        "<title>{} | {}</title>\n",
        escape_html(&paper.title),
        escape_html(&flatten_text(&board.title))
    ));
    body.push_str(&meta_block(&fields));
    body.push_str("</head>\n<body>\n");
    body.push_str(&format!("<h1>{}</h1>\n", escape_html(&paper.title)));
    body.push_str(&format!(
        "<p class=\"authors\">{}</p>\n",
        escape_html(&paper.authors.join("; "))
    ));
    if !paper.institutions.is_empty() {
        body.push_str(&format!(
            "<p class=\"institutions\">{}</p>\n",
            escape_html(&paper.institutions.join("; "))
        ));
    }
    if let Some(date) = paper.publication_date {
        body.push_str(&format!("<p class=\"published\">Published {}</p>\n", date.format("%Y-%m-%d")));
    }
    body.push_str(&format!(
        "<p class=\"paper-link\"><a href=\"{}\">Read the paper</a></p>\n",
        escape_html(&paper.canonical_url)
    ));
    if !paper.abstract_text.is_empty() {
        body.push_str(&format!(
            "<h2>Abstract</h2>\n<p class=\"abstract\">{}</p>\n",
            escape_html(&paper.abstract_text)
        ));
    }
    if !paper.keywords.is_empty() {
        body.push_str(&format!(
            "<p class=\"keywords\">Keywords: {}</p>\n",
            escape_html(&paper.keywords.join(", "))
        ));
    }
    body.push_str(&format!(
        "<h2>Judgements</h2>\n<p>{} reviewer(s); last review {}.</p>\n<table class=\"grades\">\n",
        agg.reviewer_count,
        agg.review_date.format("%Y-%m-%d")
    ));
    for (dim, avg) in fields.iter().filter_map(|(n, v)| match n {
        FieldName::Average(d) => Some((d, v)),
        _ => None,
    }) {
        body.push_str(&format!(
            "<tr><th>{}</th><td class=\"grade\">{}</td></tr>\n",
            escape_html(dim.as_str()),
            escape_html(avg)
        ));
    }
    body.push_str("</table>\n");
    if !agg.comments.is_empty() {
        body.push_str("<h2>Reviewer comments</h2>\n<ul class=\"comments\">\n");
        for c in &agg.comments {
            body.push_str(&format!("<li>{}</li>\n", escape_html(c)));
        }
        body.push_str("</ul>\n");
    }
    body.push_str(&format!(
        "<p class=\"board\">Reviewed by <a href=\"{}\">{}</a></p>\n</body>\n</html>\n",
        escape_html(&board.url),
        escape_html(&flatten_text(&board.title))
    ));
    RecordDocument {
        content_type: ContentType::Html,
        body,
    }
}

pub fn emit_redif(records: &[&ReviewRecord], board: &BoardMeta) -> Result<RecordDocument, FormatError> {
    let public = records
        .iter()
        .map(|r| {
            r.public()
                .ok_or_else(|| FormatError::NotReleased(r.record_id().to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(emit_redif_public(public, board))
}

pub fn emit_redif_public<'a>(
    records: impl IntoIterator<Item = &'a PublicRecord>,
    board: &BoardMeta,
) -> RecordDocument {
    let templates: Vec<String> = records
        .into_iter()
        .map(|r| redif_template(&RecordFields::from_public(r, board)))
        .collect();
    RecordDocument {
        content_type: ContentType::Redif,
        body: templates.join("\n"),
    }
}

/// One template, each line newline-terminated.
pub fn redif_template(fields: &RecordFields) -> String {
    let mut out = format!("Template-Type: {REDIF_TEMPLATE_TYPE}\n");
    for (name, value) in fields.iter() {
        out.push_str(&format!("{}: {}\n", name.redif_key(), flatten_text(value)));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedRecord {
    pub fields: RecordFields,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("record {index}: missing mandatory field(s) {}", missing.iter().map(|f| f.name()).collect::<Vec<_>>().join(", "))]
pub struct RecordParseError {
    /// Position of the record within the document, from 0.
    pub index: usize,
    pub missing: Vec<FieldName>,
    pub partial: RecordFields,
    pub warnings: Vec<String>,
}

pub type ParsedEntry = Result<ParsedRecord, RecordParseError>;

#[derive(Debug, Default)]
struct RecordBuilder {
    fields: RecordFields,
    warnings: Vec<String>,
}

impl RecordBuilder {
    fn add(&mut self, raw_name: &str, value: &str) {
        match FieldName::parse(raw_name) {
            Some(name) => {
                if !name.is_repeatable() && self.fields.get(&name).is_some() {
                    self.warnings
                        .push(format!("duplicate field {} ignored", name.name()));
                } else {
                    self.fields.push(name, value);
                }
            }
            None => self
                .warnings
                .push(format!("unknown field {}", raw_name.trim().to_ascii_lowercase())),
        }
    }

    fn finish(mut self, index: usize) -> ParsedEntry {
        self.fields.canonicalize();
        let missing = self.fields.missing_mandatory();
        if missing.is_empty() {
            Ok(ParsedRecord {
                fields: self.fields,
                warnings: self.warnings,
            })
        } else {
            Err(RecordParseError {
                index,
                missing,
                partial: self.fields,
                warnings: self.warnings,
            })
        }
    }
}

pub fn parse_record_document(doc: &RecordDocument) -> Result<Vec<ParsedEntry>, FormatError> {
    match doc.content_type {
        ContentType::Html => parse_html(&doc.body).map(|entry| vec![entry]),
        ContentType::Redif => parse_redif(&doc.body),
    }
}

/// One record per HTML page.
pub fn parse_html(body: &str) -> Result<ParsedEntry, FormatError> {
    let html = Html::parse_document(body);
    let selector = Selector::parse("meta[name]").expect("static selector");
    let mut builder = RecordBuilder::default();
    let mut seen_any = false;
    for meta in html.select(&selector) {
        let el = meta.value();
        let Some(name) = el.attr("name") else { continue };
        seen_any = true;
        builder.add(name, el.attr("content").unwrap_or_default());
    }
    if !seen_any {
        return Err(FormatError::UnparseableDocument(
            "no named META elements found".into(),
        ));
    }
    Ok(builder.finish(0))
}

/// Templates start at each `Template-Type:` line.
pub fn parse_redif(body: &str) -> Result<Vec<ParsedEntry>, FormatError> {
    let body = body.strip_prefix('\u{feff}').unwrap_or(body);
    let mut entries = Vec::new();
    let mut current: Option<RecordBuilder> = None;
    let mut stray = 0usize;
    for line in body.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once(':') else {
            match current.as_mut() {
                Some(b) => b.warnings.push(format!("unparseable line {:?}", line.trim())),
                None => stray += 1,
            }
            continue;
        };
        let key = key.trim();
        if key.eq_ignore_ascii_case("template-type") {
            if let Some(done) = current.take() {
                entries.push(done.finish(entries.len()));
            }
            let mut builder = RecordBuilder::default();
            if value.trim() != REDIF_TEMPLATE_TYPE {
                builder
                    .warnings
                    .push(format!("unexpected template type {:?}", value.trim()));
            }
            current = Some(builder);
            continue;
        }
        match current.as_mut() {
            Some(b) => b.add(key, value),
            None => stray += 1,
        }
    }
    if let Some(done) = current.take() {
        entries.push(done.finish(entries.len()));
    }
    if entries.is_empty() && stray > 0 {
        return Err(FormatError::UnparseableDocument(
            "no Template-Type line found".into(),
        ));
    }
    Ok(entries)
}
