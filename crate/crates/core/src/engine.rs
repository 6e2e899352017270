//! Query layer over a node's chain.
//!
//! Every query counts the ledger primitives it invokes
//! (`list_stream_key_items` and `get_raw_transaction`) in [`QueryStats`].
//! Results come back in confirmation order unless re-sorted with
//! [`sort_results`].
//!
//! Baseline-encoded chains carry the whole record line in every item value,
//! so a point query is a single key lookup. Enhanced chains store empty
//! values; a point query lists matching txids and fetches each transaction
//! to rebuild the record (`T + 1` calls for `T` matches).

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet, VecDeque};

use thiserror::Error;

use crate::codec::{self, CodecError, EncodingMode, Field, LogRecord, RootLookup};
use crate::ledger::{Chain, KeyItem, LedgerError, Transaction, Txid};
use crate::tsindex::{self, TsIndexError, TsIndexParams};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("invalid range: start {start} > end {end}")]
    InvalidRange { start: u64, end: u64 },
    #[error("index parameters do not match the chain encoding")]
    ParamsMismatch,
    #[error("conflicting predicates on {0}")]
    ConflictingPredicates(Field),
    #[error("query needs at least one predicate")]
    NoPredicates,
    #[error("empty input")]
    EmptyInput,
}

impl From<TsIndexError> for EngineError {
    fn from(e: TsIndexError) -> Self {
        match e {
            TsIndexError::InvalidRange { start, end } => EngineError::InvalidRange { start, end },
            TsIndexError::EmptyInput => EngineError::EmptyInput,
            TsIndexError::InvalidParams(_) => EngineError::ParamsMismatch,
        }
    }
}

/// Equality condition on one attribute.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Predicate {
    pub field: Field,
    pub value: String,
}

impl Predicate {
    /// Timestamp values must be canonical decimals, matching how they are
    /// keyed on chain.
    pub fn new(field: Field, value: impl Into<String>) -> Result<Self, CodecError> {
        let value = value.into();
        if field == Field::Timestamp {
            codec::parse_timestamp(&value)?;
        }
        Ok(Self { field, value })
    }

    pub fn matches(&self, record: &LogRecord) -> bool {
        record.matches(self.field, &self.value)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct QueryStats {
    /// Ledger primitive invocations of any kind.
    pub api_calls: u64,
    /// `list_stream_key_items` invocations only.
    pub list_calls: u64,
    /// Most records held in memory at once while answering.
    pub peak_records: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ResultSet {
    pub records: Vec<LogRecord>,
    pub stats: QueryStats,
}

impl ResultSet {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn api_calls(&self) -> u64 {
        self.stats.api_calls
    }

    /// Canonical record lines, one per record.
    pub fn lines(&self) -> impl Iterator<Item = String> + '_ {
        self.records.iter().map(LogRecord::to_line)
    }
}

#[derive(Clone, Debug)]
struct Hit {
    seq: u64,
    txid: Txid,
    record: LogRecord,
}

struct Ctx<'a> {
    chain: &'a Chain,
    mode: &'a EncodingMode,
    api_calls: u64,
    list_calls: u64,
    roots: HashMap<(String, String), Option<LogRecord>>,
    resolving: HashSet<(String, String)>,
}

impl<'a> Ctx<'a> {
    fn new(chain: &'a Chain, mode: &'a EncodingMode) -> Self {
        Self {
            chain,
            mode,
            api_calls: 0,
            list_calls: 0,
            roots: HashMap::new(),
            resolving: HashSet::new(),
        }
    }

    fn list(&mut self, stream: &str, key: &[u8]) -> Result<Vec<KeyItem>, EngineError> {
        self.api_calls += 1;
        self.list_calls += 1;
        Ok(self.chain.list_stream_key_items(stream, key)?)
    }

    fn get(&mut self, txid: &Txid) -> Result<&'a Transaction, EngineError> {
        self.api_calls += 1;
        Ok(self.chain.get_raw_transaction(txid)?)
    }

    fn rebuild(&mut self, tx: &Transaction) -> Result<LogRecord, EngineError> {
        let mode = self.mode;
        Ok(codec::rebuild_record(tx, mode, self)?)
    }

    fn resolve_root(&mut self, node: &str, id: &str) -> Result<Option<LogRecord>, EngineError> {
        let key = (node.to_owned(), id.to_owned());
        if let Some(cached) = self.roots.get(&key) {
            return Ok(cached.clone());
        }
        if !self.resolving.insert(key.clone()) {
            return Ok(None);
        }
        let mut found = None;
        for item in self.list(Field::Id.name(), id.as_bytes())? {
            let tx = self.get(&item.txid)?;
            let on_node = tx.item(Field::Node.name()).is_some_and(|i| i.key == node.as_bytes());
            if on_node {
                found = Some(self.rebuild(tx)?);
                break;
            }
        }
        self.resolving.remove(&key);
        self.roots.insert(key, found.clone());
        Ok(found)
    }

    fn stats(&self, peak_records: usize) -> QueryStats {
        QueryStats {
            api_calls: self.api_calls,
            list_calls: self.list_calls,
            peak_records,
        }
    }

    /// Items for one key, turned into records under the current encoding.
    fn fetch(&mut self, items: Vec<KeyItem>, seen: &mut HashSet<Txid>, out: &mut Vec<Hit>) -> Result<(), EngineError> {
        for item in items {
            if !seen.insert(item.txid) {
                continue;
            }
            let record = match self.mode {
                EncodingMode::Baseline => parse_value(&item.value)?,
                EncodingMode::Enhanced { .. } => {
                    let tx = self.get(&item.txid)?;
                    self.rebuild(tx)?
                }
            };
            out.push(Hit {
                seq: item.seq,
                txid: item.txid,
                record,
            });
        }
        Ok(())
    }

    fn point(&mut self, pred: &Predicate) -> Result<Vec<Hit>, EngineError> {
        let items = self.list(pred.field.name(), pred.value.as_bytes())?;
        let mut seen = HashSet::with_capacity(items.len());
        let mut hits = Vec::with_capacity(items.len());
        self.fetch(items, &mut seen, &mut hits)?;
        if self.mode.normalizes() && matches!(pred.field, Field::User | Field::Resource) {
            self.expand_references(pred, &mut seen, &mut hits)?;
            hits.sort_by_key(|h| h.seq);
        }
        Ok(hits)
    }

    /// Follows Ref-ID links from matched records to normalized follow-ups
    /// that inherit the predicate's value.
    fn expand_references(&mut self, pred: &Predicate, seen: &mut HashSet<Txid>, hits: &mut Vec<Hit>) -> Result<(), EngineError> {
        let mut queue: VecDeque<(String, String)> =
            hits.iter().map(|h| (h.record.node.clone(), h.record.id.clone())).collect();
        let mut visited = HashSet::new();
        while let Some((node, id)) = queue.pop_front() {
            if !visited.insert((node.clone(), id.clone())) {
                continue;
            }
            let items = self.list(Field::RefId.name(), id.as_bytes())?;
            for item in items {
                if !seen.insert(item.txid) {
                    continue;
                }
                let tx = self.get(&item.txid)?;
                let record = self.rebuild(tx)?;
                if record.node == node && pred.matches(&record) {
                    queue.push_back((record.node.clone(), record.id.clone()));
                    hits.push(Hit {
                        seq: item.seq,
                        txid: item.txid,
                        record,
                    });
                }
            }
        }
        Ok(())
    }
}

impl RootLookup for Ctx<'_> {
    fn root(&mut self, node: &str, id: &str) -> Option<LogRecord> {
        self.resolve_root(node, id).ok().flatten()
    }
}

fn parse_value(value: &[u8]) -> Result<LogRecord, EngineError> {
    let line = std::str::from_utf8(value)
        .map_err(|_| CodecError::MalformedTransaction("value is not UTF-8".into()))?;
    codec::parse_log_line(line).map_err(|e| CodecError::MalformedTransaction(e.to_string()).into())
}

fn finish(hits: Vec<Hit>, stats: QueryStats) -> ResultSet {
    ResultSet {
        records: hits.into_iter().map(|h| h.record).collect(),
        stats,
    }
}

/// Rejects empty lists and conflicting values for one field; drops exact
/// repeats.
fn normalize_predicates(preds: &[Predicate]) -> Result<Vec<Predicate>, EngineError> {
    if preds.is_empty() {
        return Err(EngineError::NoPredicates);
    }
    let mut out: Vec<Predicate> = Vec::with_capacity(preds.len());
    for p in preds {
        match out.iter().find(|q| q.field == p.field) {
            Some(q) if q.value != p.value => return Err(EngineError::ConflictingPredicates(p.field)),
            Some(_) => {}
            None => out.push(p.clone()),
        }
    }
    Ok(out)
}

/// Single key lookup; records are parsed from the stored item values.
pub fn point_query_baseline(view: &Chain, pred: &Predicate) -> Result<ResultSet, EngineError> {
    let mut ctx = Ctx::new(view, &EncodingMode::Baseline);
    let hits = ctx.point(pred)?;
    let peak = hits.len();
    Ok(finish(hits, ctx.stats(peak)))
}

/// Key lookup for txids, then one transaction fetch and rebuild per match.
/// Under normalization, `User`/`Resource` predicates also follow Ref-ID
/// links to follow-ups that inherit the value.
pub fn point_query_enhanced(view: &Chain, pred: &Predicate, mode: &EncodingMode) -> Result<ResultSet, EngineError> {
    let mut ctx = Ctx::new(view, mode);
    let items = ctx.list(pred.field.name(), pred.value.as_bytes())?;
    let mut seen = HashSet::with_capacity(items.len());
    let mut hits = Vec::with_capacity(items.len());
    for item in items {
        if !seen.insert(item.txid) {
            continue;
        }
        let tx = ctx.get(&item.txid)?;
        let record = ctx.rebuild(tx)?;
        hits.push(Hit {
            seq: item.seq,
            txid: item.txid,
            record,
        });
    }
    if mode.normalizes() && matches!(pred.field, Field::User | Field::Resource) {
        ctx.expand_references(pred, &mut seen, &mut hits)?;
        hits.sort_by_key(|h| h.seq);
    }
    let peak = hits.len();
    Ok(finish(hits, ctx.stats(peak)))
}

/// Point query through the pipeline matching `mode`.
pub fn point_query(view: &Chain, pred: &Predicate, mode: &EncodingMode) -> Result<ResultSet, EngineError> {
    match mode {
        EncodingMode::Baseline => point_query_baseline(view, pred),
        EncodingMode::Enhanced { .. } => point_query_enhanced(view, pred, mode),
    }
}

/// Runs every predicate as a point query and intersects the results.
pub fn and_query_baseline(view: &Chain, preds: &[Predicate], mode: &EncodingMode) -> Result<ResultSet, EngineError> {
    let preds = normalize_predicates(preds)?;
    let mut ctx = Ctx::new(view, mode);
    let mut current: Option<Vec<Hit>> = None;
    let mut peak = 0;
    for pred in &preds {
        let hits = ctx.point(pred)?;
        current = Some(match current {
            None => {
                peak = peak.max(hits.len());
                hits
            }
            Some(mut acc) => {
                peak = peak.max(acc.len() + hits.len());
                let ids: HashSet<Txid> = hits.iter().map(|h| h.txid).collect();
                acc.retain(|h| ids.contains(&h.txid));
                acc
            }
        });
    }
    Ok(finish(current.unwrap_or_default(), ctx.stats(peak)))
}

/// Queries only the most selective predicate, then filters in memory.
pub fn and_query_enhanced(
    view: &Chain,
    preds: &[Predicate],
    sel: &SelectivityList,
    mode: &EncodingMode,
) -> Result<ResultSet, EngineError> {
    let preds = normalize_predicates(preds)?;
    let chosen = sel.most_selective(&preds).expect("non-empty predicates");
    let mut ctx = Ctx::new(view, mode);
    let mut hits = ctx.point(chosen)?;
    let peak = hits.len();
    hits.retain(|h| preds.iter().all(|p| p.matches(&h.record)));
    Ok(finish(hits, ctx.stats(peak)))
}

/// One `Timestamp` lookup per integer in `[start, end]`.
pub fn range_query_baseline(view: &Chain, start: u64, end: u64, mode: &EncodingMode) -> Result<ResultSet, EngineError> {
    if start > end {
        return Err(EngineError::InvalidRange { start, end });
    }
    let mut ctx = Ctx::new(view, mode);
    let mut seen = HashSet::new();
    let mut hits = Vec::new();
    for t in start..=end {
        let items = ctx.list(Field::Timestamp.name(), t.to_string().as_bytes())?;
        ctx.fetch(items, &mut seen, &mut hits)?;
    }
    hits.sort_by_key(|h| h.seq);
    let peak = hits.len();
    Ok(finish(hits, ctx.stats(peak)))
}

/// One lookup per bucket of the hierarchical cover of `[start, end]`.
pub fn range_query_enhanced(
    view: &Chain,
    start: u64,
    end: u64,
    params: &TsIndexParams,
    mode: &EncodingMode,
) -> Result<ResultSet, EngineError> {
    if mode.params() != Some(params) {
        return Err(EngineError::ParamsMismatch);
    }
    let cover = tsindex::decompose(start, end, params)?;
    let mut ctx = Ctx::new(view, mode);
    let mut seen = HashSet::new();
    let mut hits = Vec::new();
    for part in &cover.parts {
        let stream = codec::level_stream(part.level, params);
        let items = ctx.list(stream.as_str(), part.start.to_string().as_bytes())?;
        ctx.fetch(items, &mut seen, &mut hits)?;
    }
    hits.sort_by_key(|h| h.seq);
    let peak = hits.len();
    Ok(finish(hits, ctx.stats(peak)))
}

/// Range query through the pipeline matching `mode`.
pub fn range_query(view: &Chain, start: u64, end: u64, mode: &EncodingMode) -> Result<ResultSet, EngineError> {
    match mode.params() {
        None => range_query_baseline(view, start, end, mode),
        Some(p) => range_query_enhanced(view, start, end, p, mode),
    }
}

/// Attribute ranking by expected result size, most selective first.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectivityList {
    ranking: Vec<Field>,
    mean_size: [f64; 7],
    value_counts: [HashMap<String, usize>; 7],
}

impl Default for SelectivityList {
    /// No statistics: every attribute has the same estimate, so the ranking
    /// is the fixed field order.
    fn default() -> Self {
        Self {
            ranking: Field::ALL.to_vec(),
            mean_size: [1.0; 7],
            value_counts: Default::default(),
        }
    }
}

impl SelectivityList {
    /// Mean result size per attribute is `|sample| / distinct values`.
    pub fn build(sample: &[LogRecord]) -> Result<Self, EngineError> {
        if sample.is_empty() {
            return Err(EngineError::EmptyInput);
        }
        let mut value_counts: [HashMap<String, usize>; 7] = Default::default();
        for r in sample {
            for f in Field::ALL {
                *value_counts[f.index()].entry(r.value(f)).or_default() += 1;
            }
        }
        let mut mean_size = [0.0; 7];
        for f in Field::ALL {
            mean_size[f.index()] = sample.len() as f64 / value_counts[f.index()].len() as f64;
        }
        let mut ranking = Field::ALL.to_vec();
        ranking.sort_by(|a, b| {
            mean_size[a.index()]
                .partial_cmp(&mean_size[b.index()])
                .unwrap_or(Ordering::Equal)
                .then(a.index().cmp(&b.index()))
        });
        Ok(Self {
            ranking,
            mean_size,
            value_counts,
        })
    }

    pub fn ranking(&self) -> &[Field] {
        &self.ranking
    }

    pub fn mean_size(&self, field: Field) -> f64 {
        self.mean_size[field.index()]
    }

    fn rank(&self, field: Field) -> usize {
        self.ranking.iter().position(|f| *f == field).expect("ranking is a permutation")
    }

    /// Expected result size: the sampled count of this exact value, or the
    /// attribute mean when the value was not sampled.
    pub fn estimate(&self, pred: &Predicate) -> f64 {
        self.value_counts[pred.field.index()]
            .get(&pred.value)
            .map(|&n| n as f64)
            .unwrap_or(self.mean_size[pred.field.index()])
    }

    /// Predicate with the smallest estimate; ties go to the better-ranked
    /// attribute.
    pub fn most_selective<'p>(&self, preds: &'p [Predicate]) -> Option<&'p Predicate> {
        preds.iter().min_by(|a, b| {
            self.estimate(a)
                .partial_cmp(&self.estimate(b))
                .unwrap_or(Ordering::Equal)
                .then(self.rank(a.field).cmp(&self.rank(b.field)))
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SortOrder {
    Asc,
    Desc,
}

impl std::str::FromStr for SortOrder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "asc" | "ascending" => Ok(SortOrder::Asc),
            "desc" | "descending" => Ok(SortOrder::Desc),
            other => Err(format!("unknown sort order {other:?}")),
        }
    }
}

fn compare_field(a: &LogRecord, b: &LogRecord, field: Field) -> Ordering {
    match field {
        Field::Timestamp => a.timestamp.cmp(&b.timestamp),
        _ => a.value(field).as_bytes().cmp(b.value(field).as_bytes()),
    }
}

/// Stable sort by one field: timestamps numerically, other fields by bytes.
pub fn sort_results(mut rs: ResultSet, field: Field, order: SortOrder) -> ResultSet {
    rs.records.sort_by(|a, b| {
        let o = compare_field(a, b, field);
        match order {
            SortOrder::Asc => o,
            SortOrder::Desc => o.reverse(),
        }
    });
    rs
}
