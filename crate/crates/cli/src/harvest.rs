//! Harvesting another board's public records into a local foreign-records
//! file. Harvested records never enter the local board's own state.

use std::collections::BTreeSet;

use anyhow::{bail, Context, Result};
use chrono::{SecondsFormat, Utc};
use scraper::{Html, Selector};
use serde::{Deserialize, Serialize};
use url::Url;

use reviewboard_core::model::{
    Aggregates, Average, Dimension, PaperInput, PaperRef, PublicRecord, RecordId,
};
use reviewboard_core::query::SearchIndex;
use reviewboard_core::record_format::{
    parse_record_document, ContentType, FieldName, RecordDocument, RecordFields,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ForeignRecord {
    pub source_url: String,
    /// `[field-name, value]` pairs in canonical order.
    pub fields: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct HarvestFailure {
    pub url: String,
    pub error: String,
}

/// Contents of a foreign-records file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ForeignFile {
    pub board_url: String,
    pub harvested_at: String,
    pub records: Vec<ForeignRecord>,
    pub failures: Vec<HarvestFailure>,
}

impl ForeignRecord {
    pub fn record_fields(&self) -> RecordFields {
        let mut fields = RecordFields::new();
        for (name, value) in &self.fields {
            if let Some(field) = FieldName::parse(name) {
                fields.push(field, value);
            }
        }
        fields
    }
}

fn base_url(board_url: &str) -> Result<Url> {
    let mut url = Url::parse(board_url).with_context(|| format!("bad board url {board_url}"))?;
    if !matches!(url.scheme(), "http" | "https") {
        bail!("board url must be http or https: {board_url}");
    }
    if !url.path().ends_with('/') {
        let path = format!("{}/", url.path());
        url.set_path(&path);
    }
    url.set_query(None);
    url.set_fragment(None);
    Ok(url)
}

/// Record page links on the board's index page, in page order.
pub fn record_links(index_html: &str, index_url: &Url, base: &Url) -> Vec<Url> {
    let selector = Selector::parse("a[href]").expect("static selector");
    let doc = Html::parse_document(index_html);
    let prefix = format!("{}records/", base.path());
    let mut seen = BTreeSet::new();
    let mut links = Vec::new();
    for a in doc.select(&selector) {
        let Some(href) = a.value().attr("href") else { continue };
        let Ok(mut url) = index_url.join(href) else { continue };
        url.set_fragment(None);
        let is_record = url.origin() == base.origin()
            && url
                .path()
                .strip_prefix(&prefix)
                .is_some_and(|id| RecordId::parse(id).is_some());
        if is_record && seen.insert(url.to_string()) {
            links.push(url);
        }
    }
    links
}

fn fetch(client: &reqwest::blocking::Client, url: &Url) -> Result<String> {
    let resp = client.get(url.clone()).send().with_context(|| format!("fetching {url}"))?;
    let status = resp.status();
    if !status.is_success() {
        bail!("{url}: HTTP {status}");
    }
    resp.text().with_context(|| format!("reading {url}"))
}

fn parse_page(body: String) -> Result<(RecordFields, Vec<String>)> {
    let entries = parse_record_document(&RecordDocument {
        content_type: ContentType::Html,
        body,
    })?;
    match entries.into_iter().next() {
        Some(Ok(parsed)) => Ok((parsed.fields.canonical(), parsed.warnings)),
        Some(Err(e)) => bail!("{e}"),
        None => bail!("page carries no record"),
    }
}

/// Fetches the board's index page and every record it links to. Failures on
/// individual records are collected and the harvest continues.
pub fn harvest(client: &reqwest::blocking::Client, board_url: &str) -> Result<ForeignFile> {
    let base = base_url(board_url)?;
    let index_url = base.join("records").expect("relative join");
    let index = fetch(client, &index_url)?;
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for link in record_links(&index, &index_url, &base) {
        match fetch(client, &link).and_then(parse_page) {
            Ok((fields, warnings)) => records.push(ForeignRecord {
                source_url: link.to_string(),
                fields: fields.iter().map(|(f, v)| (f.name(), v.to_string())).collect(),
                warnings,
            }),
            Err(e) => failures.push(HarvestFailure {
                url: link.to_string(),
                error: format!("{e:#}"),
            }),
        }
    }
    Ok(ForeignFile {
        board_url: base.to_string(),
        harvested_at: Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
        records,
        failures,
    })
}

/// Rebuilds a searchable record from harvested fields.
pub fn to_public(fields: &RecordFields) -> Result<PublicRecord> {
    let all = |f: FieldName| fields.get_all(&f).map(str::to_string).collect::<Vec<_>>();
    let one = |f: FieldName| fields.get(&f).map(str::to_string);
    let paper = PaperRef::from_input(&PaperInput {
        url: one(FieldName::PaperUrl).unwrap_or_default(),
        title: one(FieldName::PaperTitle).unwrap_or_default(),
        authors: all(FieldName::AuthorName),
        institutions: all(FieldName::AuthorInstitution),
        abstract_text: String::new(),
        keywords: all(FieldName::Keyword),
        publication_date: one(FieldName::PublicationDate).and_then(|d| d.parse().ok()),
    })?;
    let review_date = one(FieldName::ReviewDate)
        .and_then(|d| d.parse().ok())
        .unwrap_or_default();
    let mut averages = std::collections::BTreeMap::new();
    for (field, value) in fields.iter() {
        if let FieldName::Average(dim) = field {
            let avg: Average = value.parse().with_context(|| format!("{field}: {value}"))?;
            averages.insert(Dimension::clone(dim), avg);
        }
    }
    let reviewer_count = match one(FieldName::NumberOfReviewers) {
        Some(n) => n.parse().with_context(|| format!("number-of-reviewers: {n}"))?,
        None => 0,
    };
    Ok(PublicRecord {
        paper,
        aggregates: Aggregates {
            reviewer_count,
            averages,
            review_date,
            comments: all(FieldName::Comment),
        },
        last_release_seq: 0,
        released_at: review_date.and_hms_opt(0, 0, 0).expect("midnight").and_utc(),
    })
}

/// Index over one foreign file. Records that cannot be rebuilt are skipped
/// and reported.
pub fn foreign_index(file: &ForeignFile) -> (SearchIndex, Vec<String>) {
    let mut index = SearchIndex::new();
    let mut problems = Vec::new();
    for record in &file.records {
        match to_public(&record.record_fields()) {
            Ok(public) => index.insert(public),
            Err(e) => problems.push(format!("{}: {e:#}", record.source_url)),
        }
    }
    (index, problems)
}
