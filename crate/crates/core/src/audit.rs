//! A replicated cluster bound to one encoding: insert records at any node,
//! query them from any node.

use std::collections::HashMap;
use std::path::Path;

use thiserror::Error;

use crate::codec::{self, CodecError, EncodingMode, Field, LogRecord};
use crate::engine::{self, EngineError, Predicate, ResultSet, SelectivityList};
use crate::ledger::{Chain, Txid};
use crate::network::{Cluster, ClusterConfig, NetworkError, NodeId, RoundOutcome};

#[derive(Debug, Error)]
pub enum AuditError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// A query: any mix of equality predicates and an optional inclusive
/// timestamp range. At least one of the two must be present.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Query {
    pub predicates: Vec<Predicate>,
    pub range: Option<(u64, u64)>,
}

impl Query {
    pub fn point(pred: Predicate) -> Self {
        Self {
            predicates: vec![pred],
            range: None,
        }
    }

    pub fn and(preds: Vec<Predicate>) -> Self {
        Self {
            predicates: preds,
            range: None,
        }
    }

    pub fn range(start: u64, end: u64) -> Self {
        Self {
            predicates: Vec::new(),
            range: Some((start, end)),
        }
    }
}

#[derive(Debug)]
pub struct AuditLog {
    cluster: Cluster,
    mode: EncodingMode,
    selectivity: SelectivityList,
    // Records inserted this session, by (node, id), for resolving references
    // of normalized follow-ups before their root is confirmed.
    inserted: HashMap<(String, String), LogRecord>,
}

impl AuditLog {
    pub fn new(config: ClusterConfig, mode: EncodingMode) -> Result<Self, AuditError> {
        Ok(Self::with_cluster(Cluster::new(config)?, mode))
    }

    /// File-backed cluster with one chain file per node under `dir`.
    pub fn open(config: ClusterConfig, mode: EncodingMode, dir: impl AsRef<Path>) -> Result<Self, AuditError> {
        Ok(Self::with_cluster(Cluster::open(config, dir)?, mode))
    }

    fn with_cluster(mut cluster: Cluster, mode: EncodingMode) -> Self {
        for stream in mode.streams() {
            cluster.ensure_stream(&stream);
        }
        Self {
            cluster,
            mode,
            selectivity: SelectivityList::default(),
            inserted: HashMap::new(),
        }
    }

    pub fn set_selectivity(&mut self, sel: SelectivityList) {
        self.selectivity = sel;
    }

    pub fn selectivity(&self) -> &SelectivityList {
        &self.selectivity
    }

    pub fn mode(&self) -> &EncodingMode {
        &self.mode
    }

    pub fn cluster(&self) -> &Cluster {
        &self.cluster
    }

    pub fn cluster_mut(&mut self) -> &mut Cluster {
        &mut self.cluster
    }

    pub fn view(&self, node: NodeId) -> Result<&Chain, AuditError> {
        Ok(self.cluster.query_node(node)?)
    }

    /// Encodes `record` and submits it at `node`. It becomes queryable after
    /// the next [`AuditLog::sync`].
    pub fn insert(&mut self, node: NodeId, record: &LogRecord) -> Result<Txid, AuditError> {
        let view = self.cluster.query_node(node)?;
        let inserted = &self.inserted;
        let mode = &self.mode;
        let mut lookup = |n: &str, id: &str| {
            inserted
                .get(&(n.to_owned(), id.to_owned()))
                .cloned()
                .or_else(|| find_record(view, n, id, mode))
        };
        let tx = codec::encode(record, mode, &mut lookup, node.0 as u32)?;
        let id = self.cluster.submit(node, tx)?;
        if self.mode.normalizes() {
            self.inserted
                .insert((record.node.clone(), record.id.clone()), record.clone());
        }
        Ok(id)
    }

    pub fn insert_all<'r>(&mut self, node: NodeId, records: impl IntoIterator<Item = &'r LogRecord>) -> Result<usize, AuditError> {
        let mut n = 0;
        for r in records {
            self.insert(node, r)?;
            n += 1;
        }
        Ok(n)
    }

    /// Runs production rounds until every submission is confirmed.
    pub fn sync(&mut self) -> Result<Vec<RoundOutcome>, AuditError> {
        Ok(self.cluster.drain()?)
    }

    pub fn point(&self, node: NodeId, pred: &Predicate) -> Result<ResultSet, AuditError> {
        Ok(engine::point_query(self.view(node)?, pred, &self.mode)?)
    }

    /// Baseline encodings intersect one point query per predicate; enhanced
    /// encodings query the most selective predicate and filter.
    pub fn and(&self, node: NodeId, preds: &[Predicate]) -> Result<ResultSet, AuditError> {
        let view = self.view(node)?;
        Ok(match self.mode {
            EncodingMode::Baseline => engine::and_query_baseline(view, preds, &self.mode)?,
            EncodingMode::Enhanced { .. } => engine::and_query_enhanced(view, preds, &self.selectivity, &self.mode)?,
        })
    }

    pub fn range(&self, node: NodeId, start: u64, end: u64) -> Result<ResultSet, AuditError> {
        Ok(engine::range_query(self.view(node)?, start, end, &self.mode)?)
    }

    /// Runs a combined query. With a range, the range is fetched and the
    /// predicates filter it in memory.
    pub fn query(&self, node: NodeId, query: &Query) -> Result<ResultSet, AuditError> {
        match (query.range, query.predicates.as_slice()) {
            (None, []) => Err(EngineError::NoPredicates.into()),
            (None, [p]) => self.point(node, p),
            (None, preds) => self.and(node, preds),
            (Some((s, e)), preds) => {
                let mut rs = self.range(node, s, e)?;
                rs.records.retain(|r| preds.iter().all(|p| p.matches(r)));
                Ok(rs)
            }
        }
    }
}

/// Record with `id` on `node` in a chain, if confirmed there.
pub fn find_record(view: &Chain, node: &str, id: &str, mode: &EncodingMode) -> Option<LogRecord> {
    let pred = Predicate::new(Field::Id, id).ok()?;
    engine::point_query(view, &pred, mode)
        .ok()?
        .records
        .into_iter()
        .find(|r| r.node == node)
}
