//! Naive in-memory scan over a record list. Used as the reference answer
//! for every ledger query and as the `oracle` benchmark mode.

use crate::codec::LogRecord;
use crate::engine::Predicate;

#[derive(Clone, Debug, Default)]
pub struct NaiveStore {
    records: Vec<LogRecord>,
}

impl NaiveStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, record: LogRecord) {
        self.records.push(record);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    pub fn point(&self, pred: &Predicate) -> Vec<LogRecord> {
        self.and(std::slice::from_ref(pred))
    }

    pub fn and(&self, preds: &[Predicate]) -> Vec<LogRecord> {
        self.records
            .iter()
            .filter(|r| preds.iter().all(|p| p.matches(r)))
            .cloned()
            .collect()
    }

    /// Records with `start <= timestamp <= end`.
    pub fn range(&self, start: u64, end: u64) -> Vec<LogRecord> {
        self.records
            .iter()
            .filter(|r| (start..=end).contains(&r.timestamp))
            .cloned()
            .collect()
    }
}

impl FromIterator<LogRecord> for NaiveStore {
    fn from_iter<I: IntoIterator<Item = LogRecord>>(iter: I) -> Self {
        Self {
            records: iter.into_iter().collect(),
        }
    }
}
