use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::Json;
use chrono::NaiveDate;
use serde_json::{json, Map, Value};

use reviewboard_core::alerts;
use reviewboard_core::ingest::{Principal, ReviewSubmission, Role, StoreError};
use reviewboard_core::model::{BoardMeta, Dimension, PaperInput, PublicRecord, RecordId};
use reviewboard_core::query::parse_query;
use reviewboard_core::record_format::{emit_html_public, emit_redif_public, RecordFields};

use crate::{pages, ApiError, AppState, Writer, DEFAULT_LIMIT, MAX_LIMIT};

type Shared = State<Arc<AppState>>;

const REDIF: &str = "text/plain; charset=utf-8";

/// Runs a mutation on the blocking pool with the writer held.
async fn write<T, F>(state: &Arc<AppState>, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&AppState, &mut Writer) -> Result<T, ApiError> + Send + 'static,
{
    let state = state.clone();
    tokio::task::spawn_blocking(move || {
        let mut writer = state.writer();
        f(&state, &mut writer)
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))?
}

fn bearer(headers: &HeaderMap) -> Option<String> {
    let value = headers.get(header::AUTHORIZATION)?.to_str().ok()?;
    let (scheme, token) = value.split_once(' ')?;
    scheme.eq_ignore_ascii_case("bearer").then(|| token.trim().to_string())
}

fn authenticate(writer: &Writer, token: Option<&str>, allowed: &[Role]) -> Result<Principal, ApiError> {
    let principal = writer
        .store
        .authenticate(token.ok_or_else(ApiError::unauthorized)?)?;
    if !allowed.contains(&principal.role) {
        return Err(StoreError::AuthFailed.into());
    }
    Ok(principal)
}

fn json_body(body: &Bytes) -> Result<Map<String, Value>, ApiError> {
    match serde_json::from_slice(body) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(ApiError::bad_request("request body must be a JSON object")),
        Err(e) => Err(ApiError::bad_request(format!("malformed JSON: {e}"))),
    }
}

/// A released record in the key-value form used on record pages.
pub(crate) fn record_json(record: &PublicRecord, board: &BoardMeta) -> Value {
    let mut out = Map::new();
    out.insert("record-id".into(), json!(record.record_id()));
    out.insert("release-seq".into(), json!(record.last_release_seq));
    for (field, value) in RecordFields::from_public(record, board).iter() {
        if field.is_repeatable() {
            out.entry(field.name())
                .or_insert_with(|| Value::Array(Vec::new()))
                .as_array_mut()
                .expect("repeatable fields are arrays")
                .push(json!(value));
        } else {
            out.insert(field.name(), json!(value));
        }
    }
    Value::Object(out)
}

fn html(body: String) -> Response {
    Html(body).into_response()
}

pub async fn title(State(state): Shared) -> Response {
    let snap = state.snapshot();
    html(pages::title_page(&snap.board, snap.index.len()))
}

pub async fn board(State(state): Shared) -> Response {
    html(pages::board_page(&state.snapshot().board, &state.config.roster))
}

pub async fn criteria(State(state): Shared) -> Response {
    html(pages::criteria_page(&state.snapshot().board))
}

fn help_files(dir: &std::path::Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .into_iter()
        .flatten()
        .flatten()
        .filter(|e| e.file_type().map(|t| t.is_file()).unwrap_or(false))
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|n| !n.starts_with('.'))
        .collect();
    names.sort();
    names
}

pub async fn help(State(state): Shared) -> Response {
    let board = &state.snapshot().board;
    match &state.config.help_dir {
        None => html(pages::default_help(board)),
        Some(dir) => {
            let files = help_files(dir);
            if files.iter().any(|f| f == "index.html") {
                return help_file(State(state.clone()), Path("index.html".into())).await;
            }
            html(pages::help_index(board, &files))
        }
    }
}

pub async fn help_file(State(state): Shared, Path(name): Path<String>) -> Response {
    let Some(dir) = &state.config.help_dir else {
        return ApiError::not_found("NotFound", "no help pages configured").into_response();
    };
    if !help_files(dir).contains(&name) {
        return ApiError::not_found("NotFound", format!("no help page {name}")).into_response();
    }
    match std::fs::read(dir.join(&name)) {
        Ok(bytes) => {
            let content_type = match name.rsplit_once('.').map(|(_, ext)| ext) {
                Some("html" | "htm") => "text/html; charset=utf-8",
                Some("css") => "text/css",
                _ => "text/plain; charset=utf-8",
            };
            ([(header::CONTENT_TYPE, content_type)], bytes).into_response()
        }
        Err(e) => ApiError::internal(e.to_string()).into_response(),
    }
}

pub async fn records(State(state): Shared) -> Response {
    let snap = state.snapshot();
    html(pages::records_index(&snap.board, &snap.ranked()))
}

pub async fn record(State(state): Shared, Path(id): Path<String>) -> Result<Response, ApiError> {
    let snap = state.snapshot();
    let record = RecordId::parse(&id)
        .and_then(|rid| snap.index.get(&rid))
        .ok_or_else(|| ApiError::not_found("UnknownRecord", format!("unknown record {id}")))?;
    Ok(html(emit_html_public(record, &snap.board).body))
}

pub async fn export(State(state): Shared) -> Response {
    let snap = state.snapshot();
    let doc = emit_redif_public(snap.index.records(), &snap.board);
    ([(header::CONTENT_TYPE, REDIF)], doc.body).into_response()
}

fn param_usize(params: &HashMap<String, String>, key: &str, default: usize) -> Result<usize, ApiError> {
    match params.get(key).map(|s| s.trim()).filter(|s| !s.is_empty()) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| ApiError::bad_request(format!("{key} must be a non-negative integer"))),
    }
}

pub async fn search(State(state): Shared, Query(params): Query<HashMap<String, String>>) -> Result<Response, ApiError> {
    let text = params
        .get("q")
        .map(|q| q.trim())
        .filter(|q| !q.is_empty())
        .unwrap_or("reviewers>=0");
    let query = parse_query(text)?;
    let limit = param_usize(&params, "limit", DEFAULT_LIMIT)?.min(MAX_LIMIT);
    let offset = param_usize(&params, "offset", 0)?;
    let snap = state.snapshot();
    let page = snap.index.search(&query, limit, offset);
    match params.get("format").map(String::as_str).unwrap_or("html") {
        "html" => Ok(html(pages::search_page(&snap.board, text, &page, offset))),
        "redif" => {
            let doc = emit_redif_public(page.results.iter().map(|r| &r.record), &snap.board);
            Ok(([(header::CONTENT_TYPE, REDIF)], doc.body).into_response())
        }
        "json" => Ok(Json(json!({
            "query": query.to_string(),
            "total": page.total,
            "limit": limit,
            "offset": offset,
            "warnings": page.warnings.iter().map(ToString::to_string).collect::<Vec<_>>(),
            "results": page.results.iter().map(|r| record_json(&r.record, &snap.board)).collect::<Vec<_>>(),
        }))
        .into_response()),
        other => Err(ApiError::bad_request(format!(
            "unknown format {other:?} (expected html, redif or json)"
        ))),
    }
}

fn string_list(key: &str, value: &Value) -> Result<Vec<String>, ApiError> {
    match value {
        Value::String(s) => Ok(vec![s.clone()]),
        Value::Array(items) => items
            .iter()
            .map(|v| {
                v.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| ApiError::bad_request(format!("{key} must contain strings")))
            })
            .collect(),
        _ => Err(ApiError::bad_request(format!("{key} must be a string or a list of strings"))),
    }
}

fn string(key: &str, value: &Value) -> Result<String, ApiError> {
    value
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| ApiError::bad_request(format!("{key} must be a string")))
}

/// Reads a review submission: paper fields by their record field names, one
/// integer per graded dimension, and an optional comment.
pub(crate) fn review_from_json(body: &Map<String, Value>) -> Result<ReviewSubmission, ApiError> {
    let mut paper = PaperInput::default();
    let mut grades = BTreeMap::new();
    let mut comment = String::new();
    for (key, value) in body {
        match key.as_str() {
            "paper-url" => paper.url = string(key, value)?,
            "paper-title" => paper.title = string(key, value)?,
            "author-name" => paper.authors = string_list(key, value)?,
            "author-institution" => paper.institutions = string_list(key, value)?,
            "abstract" => paper.abstract_text = string(key, value)?,
            "keyword" => paper.keywords = string_list(key, value)?,
            "publication-date" => {
                let s = string(key, value)?;
                let date = NaiveDate::parse_from_str(&s, "%Y-%m-%d")
                    .map_err(|_| ApiError::bad_request("publication-date must be YYYY-MM-DD"))?;
                paper.publication_date = Some(date);
            }
            "comment" => comment = string(key, value)?,
            other => {
                let dim = Dimension::new(other).map_err(|_| ApiError::bad_request(format!("unknown field {other}")))?;
                let grade = value
                    .as_i64()
                    .ok_or_else(|| ApiError::bad_request(format!("grade for {other} must be an integer")))?;
                grades.insert(dim, grade);
            }
        }
    }
    for (key, missing) in [
        ("paper-url", paper.url.is_empty()),
        ("paper-title", paper.title.is_empty()),
        ("author-name", paper.authors.is_empty()),
    ] {
        if missing {
            return Err(ApiError::bad_request(format!("missing {key}")));
        }
    }
    Ok(ReviewSubmission { paper, grades, comment })
}

pub async fn submit_review(State(state): Shared, headers: HeaderMap, body: Bytes) -> Result<Response, ApiError> {
    let token = bearer(&headers);
    let outcome = write(&state, move |_, w| {
        let principal = authenticate(w, token.as_deref(), &[Role::Reviewer, Role::Editor, Role::Admin])?;
        let submission = review_from_json(&json_body(&body)?)?;
        let probe = w.probe.clone();
        Ok(w.store.submit_review(&principal, &submission, probe.as_ref())?)
    })
    .await?;
    Ok((
        StatusCode::CREATED,
        Json(json!({
            "record-id": outcome.record_id,
            "state": outcome.new_state.to_string(),
            "replaced": outcome.replaced,
            "url-verified": outcome.url_verified,
        })),
    )
        .into_response())
}

pub async fn release(State(state): Shared, headers: HeaderMap, Path(id): Path<String>) -> Result<Response, ApiError> {
    let token = bearer(&headers);
    let body = write(&state, move |app, w| {
        let principal = authenticate(w, token.as_deref(), &[Role::Editor, Role::Admin])?;
        let record = w.store.release(&principal, &id)?;
        let public = record.public().expect("released records carry a snapshot").clone();
        let body = json!({
            "record-id": public.record_id(),
            "state": record.state(w.store.board().min_reviews).to_string(),
            "release-seq": public.last_release_seq,
            "number-of-reviewers": public.aggregates.reviewer_count,
        });
        app.publish(public);
        Ok(body)
    })
    .await?;
    Ok(Json(body).into_response())
}

pub async fn subscribe(State(state): Shared, body: Bytes) -> Result<Response, ApiError> {
    let body = json_body(&body)?;
    let contact = body.get("contact").map(|v| string("contact", v)).transpose()?.unwrap_or_default();
    let query = body
        .get("query")
        .map(|v| string("query", v))
        .transpose()?
        .ok_or_else(|| ApiError::bad_request("missing query"))?;
    let sub = write(&state, move |_, w| Ok(alerts::subscribe(&mut w.store, &contact, &query)?)).await?;
    Ok((
        StatusCode::CREATED,
        Json(json!({ "subscription-id": sub.subscription_id, "watermark": sub.watermark })),
    )
        .into_response())
}

pub async fn unsubscribe(State(state): Shared, Path(id): Path<String>) -> Result<Response, ApiError> {
    write(&state, move |_, w| Ok(alerts::unsubscribe(&mut w.store, &id)?)).await?;
    Ok(StatusCode::NO_CONTENT.into_response())
}

pub async fn audit(State(state): Shared, headers: HeaderMap) -> Result<Response, ApiError> {
    let token = bearer(&headers);
    let events = write(&state, move |_, w| {
        authenticate(w, token.as_deref(), &[Role::Editor, Role::Admin])?;
        Ok(w.store.events().to_vec())
    })
    .await?;
    Ok(Json(events).into_response())
}

pub async fn sweep(State(state): Shared, headers: HeaderMap) -> Result<Response, ApiError> {
    let token = bearer(&headers);
    let report = write(&state, move |_, w| {
        let principal = authenticate(w, token.as_deref(), &[Role::Admin])?;
        Ok(alerts::sweep(&mut w.store, w.sink.as_mut(), &principal.principal_id)?)
    })
    .await?;
    Ok(Json(json!({
        "sweep-seq": report.sweep_seq,
        "watermark": report.watermark,
        "subscriptions": report.subscriptions,
        "notifications": report.notifications.len(),
        "matched-records": report.notifications.iter().map(|n| n.lines.len()).sum::<usize>(),
        "failed": report.failed,
    }))
    .into_response())
}
