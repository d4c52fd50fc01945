use std::fmt;

use super::{CompareTarget, Query, TextField};
use crate::model::{Dimension, PublicRecord};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EvalWarning {
    UnknownDimension(Dimension),
}

impl fmt::Display for EvalWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalWarning::UnknownDimension(d) => write!(f, "unknown dimension {d}"),
        }
    }
}

/// Case-folded words: maximal runs of alphanumeric characters.
pub fn text_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// The text values a field search looks at. Each value is matched on its
/// own so phrases never span two authors or two comments.
pub(crate) fn field_values(record: &PublicRecord, field: TextField) -> Vec<&str> {
    let paper = &record.paper;
    let comments = record.aggregates.comments.iter().map(String::as_str);
    match field {
        TextField::Author => paper.authors.iter().map(String::as_str).collect(),
        TextField::Title => vec![paper.title.as_str()],
        TextField::Keyword => paper.keywords.iter().map(String::as_str).collect(),
        TextField::Abstract => vec![paper.abstract_text.as_str()],
        TextField::Comment => comments.collect(),
        TextField::Any => std::iter::once(paper.title.as_str())
            .chain(paper.authors.iter().map(String::as_str))
            .chain(paper.institutions.iter().map(String::as_str))
            .chain(paper.keywords.iter().map(String::as_str))
            .chain(std::iter::once(paper.abstract_text.as_str()))
            .chain(comments)
            .collect(),
    }
}

pub(crate) fn contains_phrase(haystack: &[String], phrase: &[String]) -> bool {
    !phrase.is_empty() && haystack.windows(phrase.len()).any(|w| w == phrase)
}

pub(crate) fn text_matches(record: &PublicRecord, field: TextField, phrase: &[String]) -> bool {
    field_values(record, field)
        .into_iter()
        .any(|v| contains_phrase(&text_tokens(v), phrase))
}

pub fn evaluate(query: &Query, record: &PublicRecord) -> bool {
    evaluate_with_warnings(query, record, &mut Vec::new())
}

/// Comparisons on a dimension the record does not carry are false and push
/// an [`EvalWarning::UnknownDimension`].
pub fn evaluate_with_warnings(query: &Query, record: &PublicRecord, warnings: &mut Vec<EvalWarning>) -> bool {
    match query {
        Query::And(children) => children
            .iter()
            .fold(true, |acc, c| evaluate_with_warnings(c, record, warnings) && acc),
        Query::Or(children) => children
            .iter()
            .fold(false, |acc, c| evaluate_with_warnings(c, record, warnings) || acc),
        Query::Not(inner) => !evaluate_with_warnings(inner, record, warnings),
        Query::Compare { target, op, value } => match target {
            CompareTarget::Reviewers => op.holds(record.aggregates.reviewer_count, *value),
            CompareTarget::Dimension(dim) => match record.aggregates.averages.get(dim) {
                Some(avg) => op.holds(u64::from(avg.tenths()), *value),
                None => {
                    let w = EvalWarning::UnknownDimension(dim.clone());
                    if !warnings.contains(&w) {
                        warnings.push(w);
                    }
                    false
                }
            },
        },
        Query::Text { field, term } => text_matches(record, *field, &text_tokens(term)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Aggregates, Average, PaperInput, PaperRef};
    use crate::query::parse_query;
    use chrono::{NaiveDate, Utc};

    fn record(avgs: &[(&str, u32)], keywords: &[&str]) -> PublicRecord {
        PublicRecord {
            paper: PaperRef::from_input(&PaperInput {
                url: "http://example.org/p.pdf".into(),
                title: "Context-dependent learning in agents".into(),
                authors: vec!["Edmonds, Bruce".into(), "Moss, Scott".into()],
                keywords: keywords.iter().map(|k| k.to_string()).collect(),
                abstract_text: "We study χ and other things.".into(),
                ..Default::default()
            })
            .unwrap(),
            aggregates: Aggregates {
                reviewer_count: 3,
                averages: avgs
                    .iter()
                    .map(|(d, t)| (Dimension::new(*d).unwrap(), Average::from_tenths(*t)))
                    .collect(),
                review_date: NaiveDate::from_ymd_opt(2026, 1, 1).unwrap(),
                comments: vec!["Sound argument".into()],
            },
            last_release_seq: 1,
            released_at: Utc::now(),
        }
    }

    fn eval(q: &str, r: &PublicRecord) -> bool {
        evaluate(&parse_query(q).unwrap(), r)
    }

    #[test]
    fn threshold_semantics() {
        assert!(eval("originality>=4", &record(&[("originality", 40)], &[])));
        assert!(!eval("presentation>2", &record(&[("presentation", 20)], &[])));
        assert!(eval("presentation>2", &record(&[("presentation", 21)], &[])));
        assert!(eval("reviewers=3", &record(&[], &[])));
    }

    #[test]
    fn range_and_keyword() {
        let r = record(&[("importance-results", 45)], &["χ", "context"]);
        assert!(eval("importance-results>=4 AND importance-results<=5 AND keyword:χ", &r));
        assert!(!eval("importance-results>=4 AND keyword:missing", &r));
    }

    #[test]
    fn whole_word_case_folded() {
        let r = record(&[], &[]);
        assert!(eval("title:CONTEXT", &r));
        assert!(eval("title:\"context dependent\"", &r));
        assert!(!eval("title:cont", &r));
        assert!(eval("author:edmonds", &r));
        assert!(!eval("author:\"bruce moss\"", &r), "phrases must not span values");
        assert!(eval("comment:sound", &r));
        assert!(eval("abstract:χ", &r));
        assert!(eval("sound", &r));
        assert!(!eval("title:sound", &r));
    }

    #[test]
    fn unknown_dimension_is_false_with_warning() {
        let r = record(&[("soundness", 40)], &[]);
        let mut warnings = Vec::new();
        let q = parse_query("wit>=1").unwrap();
        assert!(!evaluate_with_warnings(&q, &r, &mut warnings));
        assert_eq!(warnings, vec![EvalWarning::UnknownDimension(Dimension::new("wit").unwrap())]);
        assert!(eval("NOT wit>=1", &r));
    }
}
