use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use reviewboard_core::alerts::MemorySink;
use reviewboard_core::ingest::{FakeProbe, ProbeStatus};
use reviewboard_core::query::parse_query;
use reviewboard_core::record_format::{parse_record_document, ContentType, FieldName, RecordDocument};
use reviewboard_core::testkit::{test_board, token_for, Fixture};
use reviewboard_service::{router, AppState, RosterEntry, ServiceConfig};

struct Harness {
    app: Router,
    state: Arc<AppState>,
}

impl Harness {
    fn new(config: ServiceConfig) -> Self {
        let fx = Fixture::new(test_board(), 3);
        let probe = FakeProbe::always_ok().with("http://example.org/gone.pdf", ProbeStatus::Status(404));
        let state = AppState::new(fx.store, Arc::new(probe), Box::new(MemorySink::new()), config);
        Self {
            app: router(state.clone()),
            state,
        }
    }

    async fn call(&self, method: Method, uri: &str, token: Option<&str>, body: Option<Value>) -> (StatusCode, String) {
        let mut req = Request::builder().method(method).uri(uri);
        if let Some(t) = token {
            req = req.header("authorization", format!("Bearer {}", token_for(t)));
        }
        let req = match body {
            Some(v) => req
                .header("content-type", "application/json")
                .body(Body::from(v.to_string())),
            None => req.body(Body::empty()),
        }
        .unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        (status, String::from_utf8(bytes.to_vec()).unwrap())
    }

    async fn get(&self, uri: &str) -> (StatusCode, String) {
        self.call(Method::GET, uri, None, None).await
    }

    async fn review(&self, reviewer: &str, n: usize, title: &str, grade: i64) -> (StatusCode, Value) {
        let mut body = json!({
            "paper-url": format!("http://example.org/p{n}.pdf"),
            "paper-title": title,
            "author-name": ["Edmonds, Bruce", "Moss, Scott"],
            "keyword": ["agents"],
            "comment": format!("{title} comment"),
        });
        for d in test_board().dimensions {
            body[d.as_str()] = json!(grade);
        }
        let (status, text) = self.call(Method::POST, "/reviews", Some(reviewer), Some(body)).await;
        (status, serde_json::from_str(&text).unwrap())
    }

    /// Two reviews and a release; returns the record id.
    async fn publish(&self, n: usize, title: &str, grade: i64) -> String {
        self.review("reviewer0", n, title, grade).await;
        let (_, out) = self.review("reviewer1", n, title, grade).await;
        let id = out["record-id"].as_str().unwrap().to_string();
        let (status, _) = self
            .call(Method::POST, &format!("/records/{id}/release"), Some("editor"), None)
            .await;
        assert_eq!(status, StatusCode::OK);
        id
    }
}

fn error_code(text: &str) -> String {
    let v: Value = serde_json::from_str(text).unwrap();
    v["code"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn review_lifecycle_over_http() {
    let h = Harness::new(ServiceConfig::default());
    let (status, out) = h.review("reviewer0", 1, "Agents in context", 3).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(out["state"], "PENDING");
    let id = out["record-id"].as_str().unwrap().to_string();

    assert_eq!(h.get(&format!("/records/{id}")).await.0, StatusCode::NOT_FOUND);
    let (status, text) = h.call(Method::POST, &format!("/records/{id}/release"), Some("editor"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(error_code(&text), "NotReady");

    let (_, out) = h.review("reviewer1", 1, "Agents in context", 4).await;
    assert_eq!(out["state"], "READY");
    let (status, _) = h.call(Method::POST, &format!("/records/{id}/release"), Some("reviewer0"), None).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    let (status, text) = h.call(Method::POST, &format!("/records/{id}/release"), Some("editor"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(serde_json::from_str::<Value>(&text).unwrap()["state"], "RELEASED");

    let (status, page) = h.get(&format!("/records/{id}")).await;
    assert_eq!(status, StatusCode::OK);
    assert!(page.contains("<META NAME=\"paper-title\" CONTENT=\"Agents in context\">"));
    assert!(page.contains("<META NAME=\"avg-presentation\" CONTENT=\"3.5\">"));
    assert!(page.contains("<META NAME=\"number-of-reviewers\" CONTENT=\"2\">"));

    let (_, out) = h.review("reviewer2", 1, "Agents in context", 5).await;
    assert_eq!(out["state"], "STALE");
    let (_, page) = h.get(&format!("/records/{id}")).await;
    assert!(page.contains("CONTENT=\"3.5\""), "stale record keeps its released snapshot");
}

#[tokio::test]
async fn error_statuses() {
    let h = Harness::new(ServiceConfig::default());
    let body = json!({"paper-url": "http://example.org/p.pdf", "paper-title": "T", "author-name": "A"});
    let (status, text) = h.call(Method::POST, "/reviews", None, Some(body.clone())).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    assert_eq!(error_code(&text), "AuthFailed");

    let (status, text) = h.call(Method::POST, "/reviews", Some("reviewer0"), Some(body)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(error_code(&text), "InvalidReview");

    let mut bad = json!({"paper-url": "mailto:x@y", "paper-title": "T", "author-name": "A"});
    for d in test_board().dimensions {
        bad[d.as_str()] = json!(3);
    }
    let (status, text) = h.call(Method::POST, "/reviews", Some("reviewer0"), Some(bad.clone())).await;
    assert_eq!((status, error_code(&text).as_str()), (StatusCode::BAD_REQUEST, "MalformedUrl"));

    bad["paper-url"] = json!("http://example.org/gone.pdf");
    let (status, text) = h.call(Method::POST, "/reviews", Some("reviewer0"), Some(bad.clone())).await;
    assert_eq!((status, error_code(&text).as_str()), (StatusCode::UNPROCESSABLE_ENTITY, "UnreachablePaper"));

    bad["presentation"] = json!(2.5);
    let (status, _) = h.call(Method::POST, "/reviews", Some("reviewer0"), Some(bad)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, text) = h
        .call(Method::POST, "/records/0123456789abcdef/release", Some("editor"), None)
        .await;
    assert_eq!((status, error_code(&text).as_str()), (StatusCode::NOT_FOUND, "UnknownRecord"));

    let (status, text) = h.get("/search?q=originality%20%3E%3E%203").await;
    assert_eq!((status, error_code(&text).as_str()), (StatusCode::BAD_REQUEST, "ParseError"));
    assert!(text.contains("13"), "{text}");

    let (status, _) = h.get("/search?q=title:a&format=xml").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = h.get("/search?limit=-1").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    assert_eq!(h.state.with_store(|s| s.events().len()), 5, "failed requests append nothing");
}

#[tokio::test]
async fn search_formats_agree() {
    let h = Harness::new(ServiceConfig::default());
    h.publish(1, "Low presentation", 2).await;
    h.publish(2, "High presentation", 4).await;
    h.publish(3, "Also high", 3).await;
    h.review("reviewer0", 4, "Pending high", 5).await;

    let (status, text) = h.get("/search?q=presentation%3E2&format=json").await;
    assert_eq!(status, StatusCode::OK);
    let v: Value = serde_json::from_str(&text).unwrap();
    let titles: Vec<&str> = v["results"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["paper-title"].as_str().unwrap())
        .collect();
    assert_eq!(titles, vec!["Also high", "High presentation"]);
    assert_eq!(v["total"], 2);

    let expected = h.state.snapshot().index.search(&parse_query("presentation > 2").unwrap(), 50, 0);
    let expected_ids: Vec<String> = expected.results.iter().map(|r| r.record_id.to_string()).collect();
    let json_ids: Vec<&str> = v["results"].as_array().unwrap().iter().map(|r| r["record-id"].as_str().unwrap()).collect();
    assert_eq!(json_ids, expected_ids);

    let (_, html) = h.get("/search?q=presentation%3E2").await;
    for id in &expected_ids {
        assert!(html.contains(&format!("/records/{id}")));
    }
    assert!(!html.contains("Low presentation"));

    let (_, redif) = h.get("/search?q=presentation%3E2&format=redif").await;
    let parsed = parse_record_document(&RecordDocument {
        content_type: ContentType::Redif,
        body: redif,
    })
    .unwrap();
    let redif_titles: Vec<String> = parsed
        .iter()
        .map(|p| p.as_ref().unwrap().fields.get(&FieldName::PaperTitle).unwrap().to_string())
        .collect();
    assert_eq!(redif_titles, titles);

    let (_, page) = h.get("/search?q=&limit=1&offset=1&format=json").await;
    let v: Value = serde_json::from_str(&page).unwrap();
    assert_eq!(v["total"], 3);
    assert_eq!(v["results"].as_array().unwrap().len(), 1);
    assert_eq!(v["results"][0]["paper-title"], "High presentation");
}

#[tokio::test]
async fn public_pages_link_every_released_record_and_hide_the_rest() {
    let roster = vec![RosterEntry {
        name: "Bruce Edmonds".into(),
        institution: "Centre for Policy Modelling".into(),
    }];
    let h = Harness::new(ServiceConfig {
        roster,
        ..Default::default()
    });
    let ids = [h.publish(1, "First paper", 3).await, h.publish(2, "Second paper", 4).await];
    h.review("reviewer0", 3, "Secretpendingtitle", 5).await;
    h.review("reviewer1", 3, "Secretpendingtitle", 5).await;

    let (_, home) = h.get("/").await;
    assert!(home.contains("href=\"/records\""));
    let (_, index) = h.get("/records").await;
    for id in &ids {
        assert!(index.contains(&format!("href=\"/records/{id}\"")));
    }
    for uri in ["/", "/records", "/board", "/criteria", "/help", "/export.redif", "/search", "/search?q=reviewers%3E%3D0"] {
        let (status, text) = h.get(uri).await;
        assert_eq!(status, StatusCode::OK, "{uri}");
        assert!(!text.to_lowercase().contains("secretpendingtitle"), "{uri} leaks pending content");
        assert!(!text.contains("p3.pdf"), "{uri} leaks pending url");
    }
    let (_, text) = h.get("/search?q=any:secretpendingtitle&format=json").await;
    assert_eq!(serde_json::from_str::<Value>(&text).unwrap()["total"], 0);
    let (_, board) = h.get("/board").await;
    assert!(board.contains("Centre for Policy Modelling"));
    let (_, criteria) = h.get("/criteria").await;
    assert!(criteria.contains("importance-results"));

    let (_, export) = h.get("/export.redif").await;
    assert_eq!(export.matches("Template-Type: ReDIF-Review 1.0").count(), 2);
}

#[tokio::test]
async fn subscriptions_audit_and_sweep() {
    let h = Harness::new(ServiceConfig::default());
    let (status, text) = h
        .call(Method::POST, "/subscriptions", None, Some(json!({"contact": "a@example.org", "query": "title:agents"})))
        .await;
    assert_eq!(status, StatusCode::CREATED);
    let sub = serde_json::from_str::<Value>(&text).unwrap()["subscription-id"].as_str().unwrap().to_string();

    let (status, text) = h
        .call(Method::POST, "/subscriptions", None, Some(json!({"contact": "a@example.org", "query": "title:"})))
        .await;
    assert_eq!((status, error_code(&text).as_str()), (StatusCode::BAD_REQUEST, "ParseError"));

    h.publish(1, "Agents everywhere", 4).await;
    assert_eq!(h.call(Method::POST, "/sweep", Some("editor"), None).await.0, StatusCode::UNAUTHORIZED);
    let (status, text) = h.call(Method::POST, "/sweep", Some("admin"), None).await;
    assert_eq!(status, StatusCode::OK);
    let report: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(report["notifications"], 1);
    let (_, text) = h.call(Method::POST, "/sweep", Some("admin"), None).await;
    assert_eq!(serde_json::from_str::<Value>(&text).unwrap()["notifications"], 0);

    assert_eq!(h.get("/audit").await.0, StatusCode::UNAUTHORIZED);
    assert_eq!(h.call(Method::GET, "/audit", Some("reviewer0"), None).await.0, StatusCode::UNAUTHORIZED);
    let (status, text) = h.call(Method::GET, "/audit", Some("editor"), None).await;
    assert_eq!(status, StatusCode::OK);
    let events: Vec<Value> = serde_json::from_str(&text).unwrap();
    assert_eq!(events.last().unwrap()["action"], "SWEEP_RUN");
    assert_eq!(events.last().unwrap()["actor"], "admin");

    let uri = format!("/subscriptions/{sub}");
    assert_eq!(h.call(Method::DELETE, &uri, None, None).await.0, StatusCode::NO_CONTENT);
    let (status, text) = h.call(Method::DELETE, &uri, None, None).await;
    assert_eq!((status, error_code(&text).as_str()), (StatusCode::NOT_FOUND, "UnknownSubscription"));
}

#[tokio::test]
async fn help_pages_from_directory() {
    let dir = std::env::temp_dir().join(format!("reviewboard-help-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("reviewing.txt"), "How to review.\n").unwrap();
    let h = Harness::new(ServiceConfig {
        help_dir: Some(dir.clone()),
        ..Default::default()
    });
    let (_, index) = h.get("/help").await;
    assert!(index.contains("/help/reviewing.txt"));
    assert_eq!(h.get("/help/reviewing.txt").await.1, "How to review.\n");
    assert_eq!(h.get("/help/..%2Fsecret").await.0, StatusCode::NOT_FOUND);
    assert_eq!(h.get("/help/missing.txt").await.0, StatusCode::NOT_FOUND);
    std::fs::remove_dir_all(dir).unwrap();
}
