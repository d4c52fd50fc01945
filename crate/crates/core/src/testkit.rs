//! Random fixtures for tests: boards, papers, released records, queries and
//! a populated in-memory store. Enabled by the `testkit` feature.

use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::ingest::{FakeProbe, Principal, ReviewSubmission, Role, SteppingClock, Store};
use crate::model::{Aggregates, Average, BoardMeta, Dimension, PaperInput, PaperRef, PublicRecord};
use crate::query::{CompareOp, Query, TextField};

pub const VOCABULARY: &[&str] = &[
    "agents", "context", "learning", "bounded", "rationality", "evolution", "simulation", "markets",
    "cognition", "emergence", "χ", "société", "networks", "memetic", "review", "judgement",
];

const AWKWARD: &[&str] = &["\"quoted\"", "a & b", "<tag>", "semi;colon", "tab\there", "line\nbreak", "Ünïcödé"];

pub fn test_board() -> BoardMeta {
    let mut board = BoardMeta::new("Review Board of Social Simulation", "http://board.example/", "editor@board.example");
    board.classification_codes = vec!["JEL:C63".into(), "ACM:I.2.11".into()];
    board.board_keywords = vec!["simulation".into()];
    board
}

pub fn token_for(principal_id: &str) -> String {
    format!("secret-token-for-{principal_id}")
}

fn words(rng: &mut impl Rng, min: usize, max: usize) -> String {
    let n = rng.gen_range(min..=max);
    (0..n)
        .map(|_| {
            if rng.gen_bool(0.1) {
                *AWKWARD.choose(rng).unwrap()
            } else {
                *VOCABULARY.choose(rng).unwrap()
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn capitalized_word(rng: &mut impl Rng) -> String {
    let w = VOCABULARY.choose(rng).unwrap();
    let mut chars = w.chars();
    let first = chars.next().unwrap();
    first.to_uppercase().collect::<String>() + chars.as_str()
}

pub fn random_paper_input(rng: &mut impl Rng, n: usize) -> PaperInput {
    let host = ["example.org", "papers.example.net", "cogprints.example.ac.uk"].choose(rng).unwrap();
    PaperInput {
        url: format!("http://{host}/papers/{n}/{}.pdf", rng.gen_range(0..1000)),
        title: words(rng, 2, 7),
        authors: (0..rng.gen_range(1..4))
            .map(|_| format!("{}, {}", capitalized_word(rng), capitalized_word(rng)))
            .collect(),
        institutions: (0..rng.gen_range(0..3)).map(|_| words(rng, 1, 3)).collect(),
        abstract_text: if rng.gen_bool(0.7) { words(rng, 5, 20) } else { String::new() },
        keywords: (0..rng.gen_range(0..4))
            .map(|_| VOCABULARY.choose(rng).unwrap().to_string())
            .collect(),
        publication_date: rng
            .gen_bool(0.6)
            .then(|| NaiveDate::from_ymd_opt(rng.gen_range(1990..2027), rng.gen_range(1..13), rng.gen_range(1..29)).unwrap()),
    }
}

pub fn random_grades(rng: &mut impl Rng, dims: &[Dimension]) -> BTreeMap<Dimension, i64> {
    dims.iter().map(|d| (d.clone(), rng.gen_range(1..=5))).collect()
}

/// A released record with arbitrary (not necessarily collated) aggregates.
pub fn random_public_record(rng: &mut impl Rng, n: usize, dims: &[Dimension], seq: u64) -> PublicRecord {
    let paper = PaperRef::from_input(&random_paper_input(rng, n)).expect("generated paper is valid");
    let reviewer_count = rng.gen_range(1..12);
    PublicRecord {
        paper,
        aggregates: Aggregates {
            reviewer_count,
            averages: dims
                .iter()
                .map(|d| (d.clone(), Average::from_tenths(rng.gen_range(10..=50))))
                .collect(),
            review_date: NaiveDate::from_ymd_opt(2026, rng.gen_range(1..13), rng.gen_range(1..29)).unwrap(),
            comments: (0..rng.gen_range(0..4))
                .map(|_| crate::model::flatten_text(&words(rng, 1, 12)))
                .filter(|c| !c.is_empty())
                .collect(),
        },
        last_release_seq: seq,
        released_at: Utc.with_ymd_and_hms(2026, 6, 1, 0, 0, 0).unwrap() + Duration::seconds(seq as i64),
    }
}

pub fn random_query(rng: &mut impl Rng, dims: &[Dimension], depth: u32) -> Query {
    let ops = [CompareOp::Lt, CompareOp::Le, CompareOp::Eq, CompareOp::Ge, CompareOp::Gt];
    if depth == 0 || rng.gen_bool(0.4) {
        return match rng.gen_range(0..4) {
            0 | 1 => Query::Compare {
                target: crate::query::CompareTarget::Dimension(dims.choose(rng).unwrap().clone()),
                op: *ops.choose(rng).unwrap(),
                value: rng.gen_range(10..=50),
            },
            2 => Query::compare_reviewers(*ops.choose(rng).unwrap(), rng.gen_range(0..12)),
            _ => {
                let field = *TextField::ALL.choose(rng).unwrap();
                let term = if rng.gen_bool(0.2) {
                    format!("{} {}", VOCABULARY.choose(rng).unwrap(), VOCABULARY.choose(rng).unwrap())
                } else {
                    VOCABULARY.choose(rng).unwrap().to_string()
                };
                Query::text(field, term)
            }
        };
    }
    match rng.gen_range(0..3) {
        0 => Query::And((0..rng.gen_range(2..4)).map(|_| random_query(rng, dims, depth - 1)).collect()),
        1 => Query::Or((0..rng.gen_range(2..4)).map(|_| random_query(rng, dims, depth - 1)).collect()),
        _ => Query::Not(Box::new(random_query(rng, dims, depth - 1))),
    }
}

/// An in-memory store with one admin, one editor and `reviewers` reviewers.
pub struct Fixture {
    pub store: Store,
    pub admin: Principal,
    pub editor: Principal,
    pub reviewers: Vec<Principal>,
    pub probe: FakeProbe,
}

impl Fixture {
    pub fn new(board: BoardMeta, reviewers: usize) -> Self {
        let clock = SteppingClock::new(Utc.with_ymd_and_hms(2026, 3, 1, 9, 0, 0).unwrap(), Duration::minutes(7));
        let mut store = Store::in_memory(board, Box::new(clock));
        let admin = store
            .add_principal(None, "admin", Role::Admin, &token_for("admin"))
            .expect("admin");
        let editor = store
            .add_principal(Some(&admin), "editor", Role::Editor, &token_for("editor"))
            .expect("editor");
        let reviewers = (0..reviewers)
            .map(|i| {
                let id = format!("reviewer{i}");
                store
                    .add_principal(Some(&admin), &id, Role::Reviewer, &token_for(&id))
                    .expect("reviewer")
            })
            .collect();
        Self {
            store,
            admin,
            editor,
            reviewers,
            probe: FakeProbe::always_ok(),
        }
    }

    pub fn submission(paper: PaperInput, grades: BTreeMap<Dimension, i64>, comment: &str) -> ReviewSubmission {
        ReviewSubmission {
            paper,
            grades,
            comment: comment.to_string(),
        }
    }

    pub fn uniform_grades(&self, grade: i64) -> BTreeMap<Dimension, i64> {
        self.store
            .board()
            .dimensions
            .iter()
            .map(|d| (d.clone(), grade))
            .collect()
    }
}
