use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::Bound;

use thiserror::Error;

use super::eval::{field_values, text_matches, text_tokens, EvalWarning};
use super::{CompareOp, CompareTarget, Query, TextField};
use crate::model::{Dimension, PublicRecord, RecordId, ReviewRecord};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IndexError {
    #[error("record {0} has not been released")]
    NotReleased(RecordId),
}

type Postings = BTreeSet<RecordId>;

/// Inverted index over released snapshots: word postings per text field,
/// plus ordered maps for each graded dimension and for reviewer counts.
#[derive(Debug, Clone, Default)]
pub struct SearchIndex {
    records: BTreeMap<RecordId, PublicRecord>,
    words: HashMap<(TextField, String), Postings>,
    grades: BTreeMap<Dimension, BTreeMap<u64, Postings>>,
    reviewers: BTreeMap<u64, Postings>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchResult {
    pub record_id: RecordId,
    pub record: PublicRecord,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SearchPage {
    /// Matches before paging.
    pub total: usize,
    pub results: Vec<SearchResult>,
    pub warnings: Vec<EvalWarning>,
}

fn range(op: CompareOp, value: u64) -> (Bound<u64>, Bound<u64>) {
    use Bound::*;
    match op {
        CompareOp::Lt => (Unbounded, Excluded(value)),
        CompareOp::Le => (Unbounded, Included(value)),
        CompareOp::Eq => (Included(value), Included(value)),
        CompareOp::Ge => (Included(value), Unbounded),
        CompareOp::Gt => (Excluded(value), Unbounded),
    }
}

fn remove_posting(map_entry: Option<&mut Postings>, id: &RecordId) -> bool {
    match map_entry {
        Some(set) => {
            set.remove(id);
            set.is_empty()
        }
        None => false,
    }
}

impl SearchIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &RecordId) -> Option<&PublicRecord> {
        self.records.get(id)
    }

    pub fn records(&self) -> impl Iterator<Item = &PublicRecord> {
        self.records.values()
    }

    /// Adds or replaces the entry for this record's released snapshot.
    pub fn insert(&mut self, record: PublicRecord) {
        let id = record.record_id().clone();
        self.remove(&id);
        for field in TextField::ALL {
            for value in field_values(&record, field) {
                for word in text_tokens(value) {
                    self.words.entry((field, word)).or_default().insert(id.clone());
                }
            }
        }
        for (dim, avg) in &record.aggregates.averages {
            self.grades
                .entry(dim.clone())
                .or_default()
                .entry(u64::from(avg.tenths()))
                .or_default()
                .insert(id.clone());
        }
        self.reviewers
            .entry(record.aggregates.reviewer_count)
            .or_default()
            .insert(id.clone());
        self.records.insert(id, record);
    }

    pub fn remove(&mut self, id: &RecordId) -> Option<PublicRecord> {
        let old = self.records.remove(id)?;
        for field in TextField::ALL {
            for value in field_values(&old, field) {
                for word in text_tokens(value) {
                    let key = (field, word);
                    if remove_posting(self.words.get_mut(&key), id) {
                        self.words.remove(&key);
                    }
                }
            }
        }
        for (dim, avg) in &old.aggregates.averages {
            if let Some(by_value) = self.grades.get_mut(dim) {
                let t = u64::from(avg.tenths());
                if remove_posting(by_value.get_mut(&t), id) {
                    by_value.remove(&t);
                }
                if by_value.is_empty() {
                    self.grades.remove(dim);
                }
            }
        }
        let count = old.aggregates.reviewer_count;
        if remove_posting(self.reviewers.get_mut(&count), id) {
            self.reviewers.remove(&count);
        }
        Some(old)
    }

    fn matching(&self, query: &Query, warnings: &mut Vec<EvalWarning>) -> Postings {
        match query {
            Query::And(children) => {
                let mut sets: Vec<Postings> = children.iter().map(|c| self.matching(c, warnings)).collect();
                sets.sort_by_key(BTreeSet::len);
                let mut iter = sets.into_iter();
                let first = iter.next().unwrap_or_default();
                iter.fold(first, |acc, s| acc.intersection(&s).cloned().collect())
            }
            Query::Or(children) => children
                .iter()
                .flat_map(|c| self.matching(c, warnings))
                .collect(),
            Query::Not(inner) => {
                let excluded = self.matching(inner, warnings);
                self.records
                    .keys()
                    .filter(|id| !excluded.contains(*id))
                    .cloned()
                    .collect()
            }
            Query::Compare { target, op, value } => {
                let by_value = match target {
                    CompareTarget::Reviewers => Some(&self.reviewers),
                    CompareTarget::Dimension(dim) => {
                        let found = self.grades.get(dim);
                        let carried_by_all = found
                            .map(|m| m.values().map(BTreeSet::len).sum::<usize>() == self.records.len())
                            .unwrap_or(self.records.is_empty());
                        if !carried_by_all {
                            let w = EvalWarning::UnknownDimension(dim.clone());
                            if !warnings.contains(&w) {
                                warnings.push(w);
                            }
                        }
                        found
                    }
                };
                by_value
                    .map(|m| m.range(range(*op, *value)).flat_map(|(_, ids)| ids.iter().cloned()).collect())
                    .unwrap_or_default()
            }
            Query::Text { field, term } => {
                let phrase = text_tokens(term);
                let mut candidates: Option<Postings> = None;
                for word in &phrase {
                    let Some(ids) = self.words.get(&(*field, word.clone())) else {
                        return Postings::new();
                    };
                    candidates = Some(match candidates {
                        None => ids.clone(),
                        Some(acc) => acc.intersection(ids).cloned().collect(),
                    });
                }
                let candidates = candidates.unwrap_or_default();
                if phrase.len() <= 1 {
                    candidates
                } else {
                    candidates
                        .into_iter()
                        .filter(|id| text_matches(&self.records[id], *field, &phrase))
                        .collect()
                }
            }
        }
    }

    /// Matches ordered by most recent release first, then record id.
    pub fn search(&self, query: &Query, limit: usize, offset: usize) -> SearchPage {
        let mut warnings = Vec::new();
        let ids = self.matching(query, &mut warnings);
        let mut hits: Vec<&PublicRecord> = ids.iter().map(|id| &self.records[id]).collect();
        hits.sort_by(|a, b| {
            b.last_release_seq
                .cmp(&a.last_release_seq)
                .then_with(|| a.record_id().cmp(b.record_id()))
        });
        SearchPage {
            total: hits.len(),
            results: hits
                .into_iter()
                .skip(offset)
                .take(limit)
                .map(|r| SearchResult {
                    record_id: r.record_id().clone(),
                    record: r.clone(),
                })
                .collect(),
            warnings,
        }
    }
}

/// Indexes the record's latest released snapshot.
pub fn index_record(index: &mut SearchIndex, record: &ReviewRecord) -> Result<(), IndexError> {
    let public = record
        .public()
        .ok_or_else(|| IndexError::NotReleased(record.record_id().clone()))?;
    index.insert(public.clone());
    Ok(())
}

pub fn search(query: &Query, index: &SearchIndex, limit: usize, offset: usize) -> SearchPage {
    index.search(query, limit, offset)
}
