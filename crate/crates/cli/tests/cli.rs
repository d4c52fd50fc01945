mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use reviewboard_cli::config::DataLock;
use reviewboard_cli::harvest::ForeignFile;
use reviewboard_core::alerts::NullSink;
use reviewboard_core::ingest::{FileLog, Role, Store, SystemClock, LOG_FILE};
use reviewboard_core::model::PaperInput;
use reviewboard_core::record_format::{parse_record_document, ContentType, FieldName, RecordDocument};
use reviewboard_core::testkit::{test_board, Fixture};

use common::TestServer;

struct Board {
    dir: tempfile::TempDir,
    admin_token: String,
}

impl Board {
    fn init() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let board = Self {
            dir,
            admin_token: String::new(),
        };
        let out = board.run(&[
            "init",
            "--title",
            "Review Board of Social Simulation",
            "--url",
            "http://board.example/",
            "--email",
            "editor@board.example",
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let stdout = String::from_utf8(out.stdout).unwrap();
        let token = stdout
            .lines()
            .find_map(|l| l.strip_prefix("admin token (shown once): "))
            .expect("token printed")
            .to_string();
        Self {
            admin_token: token,
            ..board
        }
    }

    fn config(&self) -> PathBuf {
        self.dir.path().join("reviewboard.toml")
    }

    fn data(&self) -> PathBuf {
        self.dir.path().join("data")
    }

    fn command(&self, args: &[&str]) -> Command {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_reviewboard"));
        cmd.arg("--config").arg(self.config()).args(args).env_remove("REVIEWBOARD_TOKEN");
        cmd
    }

    fn run(&self, args: &[&str]) -> Output {
        self.command(args).output().unwrap()
    }

    fn run_as(&self, token: &str, args: &[&str]) -> Output {
        self.command(args).env("REVIEWBOARD_TOKEN", token).output().unwrap()
    }

    fn events(&self) -> Vec<serde_json::Value> {
        std::fs::read_to_string(self.data().join(LOG_FILE))
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect()
    }

    /// Adds reviewers and releases `n` papers directly through the store.
    fn populate(&self, n: usize) {
        let (log, events) = FileLog::open(&self.data()).unwrap();
        let mut store = Store::open(test_board_from_config(), events, Box::new(log), Box::new(SystemClock)).unwrap();
        let admin = store.authenticate(&self.admin_token).unwrap();
        let editor = store.add_principal(Some(&admin), "ed", Role::Editor, "editor-secret-0001").unwrap();
        let r1 = store.add_principal(Some(&admin), "r1", Role::Reviewer, "reviewer-secret-01").unwrap();
        let r2 = store.add_principal(Some(&admin), "r2", Role::Reviewer, "reviewer-secret-02").unwrap();
        let probe = reviewboard_core::ingest::FakeProbe::always_ok();
        let grades = |g| test_board().dimensions.into_iter().map(|d| (d, g)).collect();
        for i in 0..n {
            let paper = PaperInput {
                url: format!("http://papers.example/{i}.pdf"),
                title: format!("Agents paper {i}"),
                authors: vec!["Edmonds, Bruce".into()],
                ..Default::default()
            };
            let sub = Fixture::submission(paper, grades(3), "solid");
            store.submit_review(&r1, &sub, &probe).unwrap();
            let out = store.submit_review(&r2, &Fixture::submission(sub.paper.clone(), grades(4), ""), &probe).unwrap();
            store.release(&editor, out.record_id.as_str()).unwrap();
        }
    }
}

fn test_board_from_config() -> reviewboard_core::model::BoardMeta {
    reviewboard_core::model::BoardMeta::new(
        "Review Board of Social Simulation",
        "http://board.example/",
        "editor@board.example",
    )
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn init_then_verify_audit() {
    let board = Board::init();
    let out = board.run(&["verify-audit"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "intact (1 events)");
    let events = board.events();
    assert_eq!(events[0]["action"], "PRINCIPAL_ADDED");
    assert_eq!(events[0]["actor"], "system");
    assert!(!std::fs::read_to_string(board.data().join(LOG_FILE))
        .unwrap()
        .contains(&board.admin_token));

    let again = board.run(&["init", "--title", "x", "--url", "http://x/", "--email", "e@x"]);
    assert!(!again.status.success());
}

#[test]
fn export_of_empty_board_is_empty() {
    let board = Board::init();
    let path = board.dir.path().join("out.redif");
    let out = board.run(&["export", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(std::fs::read(&path).unwrap(), b"");
}

#[test]
fn export_is_stable_and_contains_released_records() {
    let board = Board::init();
    board.populate(3);
    let a = board.dir.path().join("a.redif");
    let b = board.dir.path().join("b.redif");
    assert!(board.run(&["export", "--out", a.to_str().unwrap()]).status.success());
    assert!(board.run(&["export", "--out", b.to_str().unwrap()]).status.success());
    let first = std::fs::read(&a).unwrap();
    assert_eq!(first, std::fs::read(&b).unwrap());
    let doc = RecordDocument {
        content_type: ContentType::Redif,
        body: String::from_utf8(first).unwrap(),
    };
    assert_eq!(parse_record_document(&doc).unwrap().len(), 3);

    let out = board.run(&["search", "title:agents AND presentation>=3.5"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).lines().count(), 3);
}

#[test]
fn principal_commands_record_the_actor() {
    let board = Board::init();
    let out = board.run_as(&board.admin_token, &["principal", "add", "r1", "--role", "reviewer"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("token (shown once): "));
    let out = board.run(&["principal", "add", "e1", "--role", "editor", "--secret", "editor-secret-123"]);
    assert!(out.status.success());
    let out = board.run(&["principal", "add", "e1", "--role", "editor"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("already exists"));
    let out = board.run_as("editor-secret-123", &["principal", "revoke", "r1"]);
    assert!(!out.status.success(), "editors cannot manage principals");
    let out = board.run(&["principal", "revoke", "r1"]);
    assert!(out.status.success());

    let actors: Vec<String> = board.events().iter().map(|e| e["actor"].as_str().unwrap().to_string()).collect();
    assert_eq!(actors, vec!["system", "admin", "system", "system"]);
    assert!(board.run(&["verify-audit"]).status.success());
}

#[test]
fn sweep_from_cli() {
    let board = Board::init();
    let out = board.run_as(&board.admin_token, &["sweep"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("0 subscriptions"));
    assert_eq!(board.events().last().unwrap()["action"], "SWEEP_RUN");
    assert_eq!(board.events().last().unwrap()["actor"], "admin");
}

#[test]
fn tampering_is_reported() {
    let board = Board::init();
    board.populate(1);
    let path = board.data().join(LOG_FILE);
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, text.replacen("Agents paper 0", "Agents paper 9", 1)).unwrap();
    let out = board.run(&["verify-audit"]);
    assert!(!out.status.success());
    assert!(stdout(&out).starts_with("broken at seq 5"), "{}", stdout(&out));
    let out = board.run(&["export", "--out", board.dir.path().join("x").to_str().unwrap()]);
    assert!(!out.status.success(), "a corrupt log is never served");
}

#[test]
fn one_process_per_data_directory() {
    let board = Board::init();
    let _held = DataLock::acquire(&board.data()).unwrap();
    let out = board.run(&["verify-audit"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("in use"));
}

fn fields_by_url(doc: RecordDocument) -> Vec<(String, Vec<(String, String)>)> {
    let mut out: Vec<_> = parse_record_document(&doc)
        .unwrap()
        .into_iter()
        .map(|e| {
            let fields = e.unwrap().fields.canonical();
            let url = fields.get(&FieldName::PaperUrl).unwrap().to_string();
            (url, fields.iter().map(|(f, v)| (f.name(), v.to_string())).collect())
        })
        .collect();
    out.sort();
    out
}

fn harvest_into(base: &str, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reviewboard"))
        .args(["harvest", base, "--out", out.to_str().unwrap()])
        .output()
        .unwrap()
}

#[test]
fn harvest_reproduces_the_source_export() {
    let mut fx = Fixture::new(test_board(), 2);
    for i in 0..4 {
        let paper = PaperInput {
            url: format!("http://papers.example/{i}.pdf"),
            title: format!("Harvested \"paper\" <{i}> & co"),
            authors: vec!["Moss, Scott".into(), "Edmonds, Bruce".into()],
            keywords: vec!["agents".into()],
            ..Default::default()
        };
        for r in 0..2 {
            let reviewer = fx.reviewers[r].clone();
            let grades = fx.uniform_grades(r as i64 + 2);
            let out = fx
                .store
                .submit_review(&reviewer, &Fixture::submission(paper.clone(), grades, "a comment"), &fx.probe)
                .unwrap();
            if r == 1 && i < 3 {
                let editor = fx.editor.clone();
                fx.store.release(&editor, out.record_id.as_str()).unwrap();
            }
        }
    }
    let server = TestServer::start(fx.store, Arc::new(fx.probe), Box::new(NullSink));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("foreign.json");
    let out = harvest_into(&server.base, &path);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let file: ForeignFile = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(file.records.len(), 3);
    assert!(file.failures.is_empty());
    assert_eq!(file.board_url, server.base);

    let export = reqwest::blocking::get(server.url("export.redif")).unwrap().text().unwrap();
    let expected = fields_by_url(RecordDocument {
        content_type: ContentType::Redif,
        body: export,
    });
    let mut harvested: Vec<_> = file
        .records
        .iter()
        .map(|r| {
            let url = r.fields.iter().find(|(n, _)| n == "paper-url").unwrap().1.clone();
            (url, r.fields.clone())
        })
        .collect();
    harvested.sort();
    assert_eq!(harvested, expected);

    let board = Board::init();
    let out = board.run(&["search", "keyword:agents", "--include-foreign", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().all(|l| l.ends_with(&format!("[{}]", server.base))));
    let out = board.run(&["search", "keyword:agents"]);
    assert_eq!(stdout(&out), "", "foreign records are only searched on request");
}

/// Serves fixed responses by path; anything else is a 404.
fn fixed_server(routes: Vec<(String, String)>) -> String {
    use std::io::{BufRead, BufReader, Write};
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let base = format!("http://{}/", listener.local_addr().unwrap());
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let mut stream = stream.unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap() == 0 || line == "\r\n" {
                    break;
                }
            }
            let path = request_line.split_whitespace().nth(1).unwrap_or("").to_string();
            let (status, body) = match routes.iter().find(|(p, _)| *p == path) {
                Some((_, body)) => ("200 OK", body.clone()),
                None => ("404 Not Found", String::from("missing")),
            };
            let _ = write!(
                stream,
                "HTTP/1.1 {status}\r\nContent-Type: text/html\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
        }
    });
    base
}

#[test]
fn harvest_continues_past_broken_records() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("foreign.json");
    let out = harvest_into("http://127.0.0.1:9/", &path);
    assert!(!out.status.success(), "unreachable index page is an error");
    assert!(!path.exists());

    let mut rng = <rand::rngs::StdRng as rand::SeedableRng>::seed_from_u64(4);
    let board = test_board();
    let good = reviewboard_core::testkit::random_public_record(&mut rng, 0, &board.dimensions, 1);
    let page = reviewboard_core::record_format::emit_html_public(&good, &board).body;
    let good_id = good.record_id().to_string();
    let index = format!(
        "<ul><li><a href=\"/records/{good_id}\">ok</a></li>\
         <li><a href=\"/records/0000000000000000\">gone</a></li>\
         <li><a href=\"/records/1111111111111111\">not a record</a></li></ul>"
    );
    let base = fixed_server(vec![
        ("/records".into(), index),
        (format!("/records/{good_id}"), page),
        ("/records/1111111111111111".into(), "<html><body>nothing here</body></html>".into()),
    ]);
    let out = harvest_into(&base, &path);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("harvested 1 records"));
    assert_eq!(text.matches("failed ").count(), 2, "{text}");
    let file: ForeignFile = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(file.records.len(), 1);
    assert_eq!(file.failures.len(), 2);
    assert!(file.failures[0].error.contains("404"));
}
