use chrono::{TimeZone, Utc};
use num_rational::Ratio;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

use reviewboard_core::model::{collate, BoardMeta, Dimension, Review, RecordId};
use reviewboard_core::query::{evaluate, parse_query, Query, SearchIndex};
use reviewboard_core::record_format::{
    emit_html_public, emit_redif_public, parse_record_document, RecordFields,
};
use reviewboard_core::testkit::{random_public_record, random_query, test_board};

fn review(reviewer: usize, grades: &[i64], dims: &[Dimension]) -> Review {
    Review {
        reviewer_id: format!("r{reviewer}"),
        record_id: RecordId::for_canonical_url("http://example.org/x"),
        grades: dims.iter().cloned().zip(grades.iter().copied()).collect(),
        comment: String::new(),
        submitted_at: Utc.with_ymd_and_hms(2026, 1, 1, 0, 0, 0).unwrap(),
    }
}

/// Mean rounded half away from zero to one decimal, done in exact rationals.
fn oracle_mean(grades: &[i64]) -> String {
    let mean = Ratio::new(grades.iter().sum::<i64>(), grades.len() as i64);
    let tenths = (mean * 10).round().to_integer();
    format!("{}.{}", tenths / 10, tenths % 10)
}

proptest! {
    #[test]
    fn collate_matches_rational_oracle(grades in prop::collection::vec(1i64..=5, 1..40)) {
        let dims = vec![Dimension::new("soundness").unwrap()];
        let reviews: Vec<Review> = grades.iter().enumerate().map(|(i, g)| review(i, &[*g], &dims)).collect();
        let agg = collate(&reviews, &dims).unwrap();
        prop_assert_eq!(agg.averages[&dims[0]].to_string(), oracle_mean(&grades));
        prop_assert_eq!(agg.reviewer_count, grades.len() as u64);
    }

    #[test]
    fn raising_a_grade_never_lowers_the_average(
        grades in prop::collection::vec(1i64..=4, 1..20),
        which in any::<prop::sample::Index>(),
    ) {
        let dims = vec![Dimension::new("soundness").unwrap()];
        let before: Vec<Review> = grades.iter().enumerate().map(|(i, g)| review(i, &[*g], &dims)).collect();
        let mut raised = grades.clone();
        raised[which.index(grades.len())] += 1;
        let after: Vec<Review> = raised.iter().enumerate().map(|(i, g)| review(i, &[*g], &dims)).collect();
        let a = collate(&before, &dims).unwrap().averages[&dims[0]];
        let b = collate(&after, &dims).unwrap().averages[&dims[0]];
        prop_assert!(b >= a);
    }

    #[test]
    fn collate_ignores_review_order(grades in prop::collection::vec(1i64..=5, 1..20), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let dims = vec![Dimension::new("clarity").unwrap()];
        let reviews: Vec<Review> = grades.iter().enumerate().map(|(i, g)| review(i, &[*g], &dims)).collect();
        let mut shuffled = reviews.clone();
        shuffled.shuffle(&mut StdRng::seed_from_u64(seed));
        prop_assert_eq!(collate(&reviews, &dims).unwrap().averages, collate(&shuffled, &dims).unwrap().averages);
    }
}

#[test]
fn html_and_redif_round_trip_random_records() {
    let board = test_board();
    let mut rng = StdRng::seed_from_u64(3);
    let records: Vec<_> = (0..100)
        .map(|n| random_public_record(&mut rng, n, &board.dimensions, n as u64 + 1))
        .collect();
    for record in &records {
        let expected = RecordFields::from_public(record, &board).canonical();
        let parsed = parse_record_document(&emit_html_public(record, &board)).unwrap();
        assert_eq!(parsed.len(), 1);
        assert_eq!(parsed[0].as_ref().unwrap().fields.clone().canonical(), expected);
    }
    let doc = emit_redif_public(records.iter(), &board);
    let parsed = parse_record_document(&doc).unwrap();
    assert_eq!(parsed.len(), records.len());
    for (record, entry) in records.iter().zip(parsed) {
        assert_eq!(entry.unwrap().fields.canonical(), RecordFields::from_public(record, &board).canonical());
    }
}

#[test]
fn extra_dimensions_round_trip() {
    let mut board: BoardMeta = test_board();
    board.dimensions.push(Dimension::new("wit").unwrap());
    let mut rng = StdRng::seed_from_u64(5);
    let record = random_public_record(&mut rng, 0, &board.dimensions, 1);
    let parsed = parse_record_document(&emit_html_public(&record, &board)).unwrap();
    let fields = parsed[0].as_ref().unwrap().fields.clone().canonical();
    assert_eq!(fields, RecordFields::from_public(&record, &board).canonical());
    assert!(fields.iter().any(|(f, _)| f.name() == "avg-wit"));
}

#[test]
fn index_agrees_with_evaluate() {
    let board = test_board();
    let mut rng = StdRng::seed_from_u64(17);
    let records: Vec<_> = (0..120)
        .map(|n| random_public_record(&mut rng, n, &board.dimensions, n as u64 + 1))
        .collect();
    let mut index = SearchIndex::new();
    for r in &records {
        index.insert(r.clone());
    }
    for _ in 0..200 {
        let q = random_query(&mut rng, &board.dimensions, 3);
        let mut expected: Vec<_> = records.iter().filter(|r| evaluate(&q, r)).collect();
        expected.sort_by(|a, b| b.last_release_seq.cmp(&a.last_release_seq));
        let page = index.search(&q, usize::MAX, 0);
        let got: Vec<_> = page.results.iter().map(|r| &r.record).collect();
        assert_eq!(got, expected, "query {q}");
    }
}

#[test]
fn de_morgan_holds_on_index() {
    let board = test_board();
    let mut rng = StdRng::seed_from_u64(23);
    let mut index = SearchIndex::new();
    for n in 0..80 {
        index.insert(random_public_record(&mut rng, n, &board.dimensions, n as u64 + 1));
    }
    let ids = |q: &Query| -> Vec<RecordId> {
        index.search(q, usize::MAX, 0).results.into_iter().map(|r| r.record_id).collect()
    };
    for _ in 0..100 {
        let a = random_query(&mut rng, &board.dimensions, 2);
        let b = random_query(&mut rng, &board.dimensions, 2);
        let lhs = Query::Not(Box::new(Query::And(vec![a.clone(), b.clone()])));
        let rhs = Query::Or(vec![Query::Not(Box::new(a.clone())), Query::Not(Box::new(b.clone()))]);
        assert_eq!(ids(&lhs), ids(&rhs));
        let double = Query::Not(Box::new(Query::Not(Box::new(a.clone()))));
        assert_eq!(ids(&double), ids(&a));
    }
}

#[test]
fn threshold_is_strict() {
    let board = test_board();
    let mut rng = StdRng::seed_from_u64(1);
    let presentation = Dimension::new("presentation").unwrap();
    let mut at = |n: usize, tenths: u32| {
        let mut r = random_public_record(&mut rng, n, &board.dimensions, n as u64 + 1);
        r.aggregates.averages.insert(presentation.clone(), reviewboard_core::model::Average::from_tenths(tenths));
        r
    };
    let q = parse_query("presentation > 2").unwrap();
    assert!(!evaluate(&q, &at(0, 20)));
    assert!(evaluate(&q, &at(1, 21)));
}
