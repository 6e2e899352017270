//! Benchmark harness.
//!
//! A [`BenchScenario`] names a workload, a set of corpus sizes, the storage
//! modes to compare and a seed. [`run_scenario`] builds one cluster per
//! (mode, size), runs the workload for `rounds` repetitions and checks every
//! ledger answer against the naive in-memory store. Wall-clock time is
//! reported alongside the deterministic counters (api calls, chain bytes).

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::Instant;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::audit::{AuditError, AuditLog, Query};
use crate::codec::{self, EncodingMode, Field, LogRecord};
use crate::engine::{Predicate, ResultSet, SelectivityList};
use crate::ledger::{Chain, ChainConfig, LedgerError};
use crate::network::{ClusterConfig, NodeId};
use crate::oracle::NaiveStore;
use crate::tsindex::TsIndexParams;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid corpus spec: {0}")]
    InvalidSpec(String),
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("{mode} disagrees with the oracle on {workload}: {detail}")]
    OracleMismatch {
        mode: BenchMode,
        workload: String,
        detail: String,
    },
    #[error(transparent)]
    Audit(#[from] AuditError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Codec(#[from] codec::CodecError),
}

/// Shape of a synthetic access log.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCorpusSpec {
    pub records: usize,
    /// Distinct values of the `Node` field ("1" ..= n).
    pub node_values: usize,
    pub users: usize,
    pub activities: usize,
    pub resources: usize,
    /// Fraction of records that reference an earlier record.
    pub follow_up_fraction: f64,
    pub start_ts: u64,
    pub span_ms: u64,
}

impl Default for SyntheticCorpusSpec {
    fn default() -> Self {
        Self {
            records: 1000,
            node_values: 4,
            users: 100,
            activities: 5,
            resources: 20,
            follow_up_fraction: 0.3,
            start_ts: 152_200_000,
            span_ms: 1_000_000,
        }
    }
}

const ACTIVITIES: [&str; 6] = [
    "REQ_RESOURCE",
    "VIEW_RESOURCE",
    "FILE_ACCESS",
    "DOWNLOAD",
    "UPLOAD",
    "SHARE",
];

const RESOURCES: [&str; 8] = [
    "MOD_FlyBase",
    "GTEx",
    "MOD_SGD",
    "MOD_WormBase",
    "MOD_ZFIN",
    "ClinVar",
    "dbGaP",
    "ENCODE",
];

fn activity_name(i: usize) -> String {
    ACTIVITIES.get(i).map(|s| s.to_string()).unwrap_or_else(|| format!("ACTIVITY_{i}"))
}

fn resource_name(i: usize) -> String {
    RESOURCES.get(i).map(|s| s.to_string()).unwrap_or_else(|| format!("RES_{i}"))
}

impl SyntheticCorpusSpec {
    pub fn validate(&self) -> Result<(), BenchError> {
        if !(0.0..=1.0).contains(&self.follow_up_fraction) {
            return Err(BenchError::InvalidSpec("follow-up fraction must be in [0, 1]".into()));
        }
        if self.span_ms == 0 {
            return Err(BenchError::InvalidSpec("timestamp span must be positive".into()));
        }
        if self.start_ts.checked_add(self.span_ms).is_none() {
            return Err(BenchError::InvalidSpec("timestamp span overflows".into()));
        }
        for (name, n) in [
            ("node_values", self.node_values),
            ("users", self.users),
            ("activities", self.activities),
            ("resources", self.resources),
        ] {
            if n == 0 {
                return Err(BenchError::InvalidSpec(format!("{name} must be >= 1")));
            }
            if self.records > 0 && n > self.records {
                return Err(BenchError::InvalidSpec(format!("{name} exceeds record count")));
            }
        }
        if self.records > 0 && self.follow_up_count() >= self.records {
            return Err(BenchError::InvalidSpec("at least one record must be a root".into()));
        }
        Ok(())
    }

    /// `floor(fraction * records)`.
    pub fn follow_up_count(&self) -> usize {
        (self.follow_up_fraction * self.records as f64 + 1e-9).floor() as usize
    }
}

/// Deterministic synthetic corpus. IDs are unique ("1" ..= n) and records
/// are in timestamp order. Follow-ups reference an earlier root on the same
/// node and copy its user and resource.
pub fn generate_corpus(spec: &SyntheticCorpusSpec, seed: u64) -> Result<Vec<LogRecord>, BenchError> {
    spec.validate()?;
    let n = spec.records;
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stamps: Vec<u64> = (0..n).map(|_| spec.start_ts + rng.gen_range(0..spec.span_ms)).collect();
    stamps.sort_unstable();

    let mut is_follow = vec![false; n];
    for i in index::sample(&mut rng, n - 1, spec.follow_up_count()) {
        is_follow[i + 1] = true;
    }

    let mut out: Vec<LogRecord> = Vec::with_capacity(n);
    let mut roots: Vec<usize> = Vec::new();
    for (i, ts) in stamps.into_iter().enumerate() {
        let id = (i + 1).to_string();
        let activity = activity_name(rng.gen_range(0..spec.activities));
        let record = if is_follow[i] {
            let root = &out[roots[rng.gen_range(0..roots.len())]];
            LogRecord {
                timestamp: ts,
                node: root.node.clone(),
                id,
                ref_id: root.id.clone(),
                user: root.user.clone(),
                activity,
                resource: root.resource.clone(),
            }
        } else {
            roots.push(i);
            LogRecord {
                timestamp: ts,
                node: (rng.gen_range(0..spec.node_values) + 1).to_string(),
                ref_id: id.clone(),
                id,
                user: (rng.gen_range(0..spec.users) + 1).to_string(),
                activity,
                resource: resource_name(rng.gen_range(0..spec.resources)),
            }
        };
        out.push(record);
    }
    Ok(out)
}

/// Chain sizes of one corpus under the baseline encoding and `enhanced`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StorageComparison {
    pub baseline_bytes: u64,
    pub enhanced_bytes: u64,
    /// `1 - enhanced / baseline`; negative when the enhanced layout is larger.
    pub reduction: f64,
}

/// Inserts `corpus` into two fresh single-node chains and compares sizes.
pub fn compare_storage(corpus: &[LogRecord], enhanced: &EncodingMode) -> Result<StorageComparison, BenchError> {
    let baseline_bytes = chain_bytes_for(corpus, &EncodingMode::Baseline)?;
    let enhanced_bytes = chain_bytes_for(corpus, enhanced)?;
    Ok(StorageComparison {
        baseline_bytes,
        enhanced_bytes,
        reduction: 1.0 - enhanced_bytes as f64 / baseline_bytes as f64,
    })
}

/// Size of a fresh chain holding `corpus` under `mode`.
pub fn chain_bytes_for(corpus: &[LogRecord], mode: &EncodingMode) -> Result<u64, BenchError> {
    let mut chain = Chain::new(ChainConfig::default());
    for s in mode.streams() {
        chain.ensure_stream(&s);
    }
    let mut seen: HashMap<(String, String), LogRecord> = HashMap::new();
    for r in corpus {
        let mut lookup = |node: &str, id: &str| seen.get(&(node.to_owned(), id.to_owned())).cloned();
        let tx = codec::encode(r, mode, &mut lookup, 0)?;
        chain.publish(tx)?;
        if mode.normalizes() {
            seen.insert((r.node.clone(), r.id.clone()), r.clone());
        }
    }
    while chain.pending_len() > 0 {
        chain.confirm_block()?;
    }
    Ok(chain.chain_size_bytes())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BenchMode {
    Baseline,
    Enhanced,
    EnhancedNormalized,
    Oracle,
}

impl BenchMode {
    fn encoding(self, params: &TsIndexParams) -> Option<EncodingMode> {
        match self {
            BenchMode::Baseline => Some(EncodingMode::Baseline),
            BenchMode::Enhanced => Some(EncodingMode::enhanced(params.clone())),
            BenchMode::EnhancedNormalized => Some(EncodingMode::normalized(params.clone())),
            BenchMode::Oracle => None,
        }
    }
}

impl fmt::Display for BenchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BenchMode::Baseline => "baseline",
            BenchMode::Enhanced => "enhanced",
            BenchMode::EnhancedNormalized => "enhanced-norm",
            BenchMode::Oracle => "oracle",
        })
    }
}

impl FromStr for BenchMode {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "baseline" => BenchMode::Baseline,
            "enhanced" => BenchMode::Enhanced,
            "enhanced-norm" | "normalized" => BenchMode::EnhancedNormalized,
            "oracle" => BenchMode::Oracle,
            other => return Err(BenchError::Scenario(format!("unknown mode {other:?}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Workload {
    /// Insert the whole corpus and sync, once per round.
    Insert,
    /// Same as `Insert`; reported for the chain size it produces.
    Storage,
    /// Point queries on each attribute, `queries` values per attribute.
    Point { attributes: Vec<Field>, queries: usize },
    /// Every combination of `k` attributes for each `k`, values taken from a
    /// random corpus record.
    And { key_counts: Vec<usize> },
    /// `queries` random ranges of each length.
    Range { lengths: Vec<u64>, queries: usize },
}

impl Workload {
    fn kind(&self) -> &'static str {
        match self {
            Workload::Insert => "insert",
            Workload::Storage => "storage",
            Workload::Point { .. } => "point",
            Workload::And { .. } => "and",
            Workload::Range { .. } => "range",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InsertOrder {
    /// Records submitted in corpus (timestamp) order, each at its own node.
    Interleaved,
    /// All of node 0's records, then node 1's, and so on.
    Sequential,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchScenario {
    pub name: String,
    pub record_counts: Vec<usize>,
    pub rounds: usize,
    pub modes: Vec<BenchMode>,
    pub workload: Workload,
    pub seed: u64,
    pub corpus: SyntheticCorpusSpec,
    pub params: TsIndexParams,
    pub cluster: ClusterConfig,
    pub order: InsertOrder,
}

impl Default for BenchScenario {
    fn default() -> Self {
        Self {
            name: "default".into(),
            record_counts: vec![100, 1_000, 10_000],
            rounds: 10,
            modes: vec![BenchMode::Baseline, BenchMode::Enhanced, BenchMode::Oracle],
            workload: Workload::Range {
                lengths: vec![1_000, 10_000, 100_000],
                queries: 3,
            },
            seed: 42,
            corpus: SyntheticCorpusSpec::default(),
            params: TsIndexParams::default(),
            cluster: ClusterConfig::default(),
            order: InsertOrder::Interleaved,
        }
    }
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>, BenchError> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| BenchError::Scenario(format!("bad value {s:?} for {key}"))))
        .collect()
}

fn parse_one<T: FromStr>(key: &str, v: &str) -> Result<T, BenchError> {
    v.trim()
        .parse()
        .map_err(|_| BenchError::Scenario(format!("bad value {v:?} for {key}")))
}

impl BenchScenario {
    /// Parses a flat `key=value` scenario file on top of `base`. Blank lines
    /// and `#` comments are ignored; unknown keys are errors.
    pub fn parse_with_base(text: &str, base: BenchScenario) -> Result<Self, BenchError> {
        let mut s = base;
        let mut workload: Option<String> = None;
        let mut attributes: Option<Vec<Field>> = None;
        let mut and_keys: Option<Vec<usize>> = None;
        let mut lengths: Option<Vec<u64>> = None;
        let mut queries: Option<usize> = None;
        let (mut levels, mut multiplier) = (s.params.levels(), s.params.multiplier());
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| BenchError::Scenario(format!("line {}: expected key=value", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "name" => s.name = value.to_owned(),
                "workload" => workload = Some(value.to_owned()),
                "records" => s.record_counts = parse_list(key, value)?,
                "rounds" => s.rounds = parse_one(key, value)?,
                "modes" => s.modes = parse_list(key, value)?,
                "seed" => s.seed = parse_one(key, value)?,
                "order" => {
                    s.order = match value {
                        "interleaved" => InsertOrder::Interleaved,
                        "sequential" => InsertOrder::Sequential,
                        _ => return Err(BenchError::Scenario(format!("unknown order {value:?}"))),
                    }
                }
                "attributes" => attributes = Some(parse_list(key, value)?),
                "and_keys" => and_keys = Some(parse_list(key, value)?),
                "range_lengths" => lengths = Some(parse_list(key, value)?),
                "queries" => queries = Some(parse_one(key, value)?),
                "levels" => levels = parse_one(key, value)?,
                "multiplier" => multiplier = parse_one(key, value)?,
                "nodes" => s.cluster.nodes = parse_one(key, value)?,
                "batch_limit" => s.cluster.batch_limit = parse_one(key, value)?,
                "confirm_delay" => s.cluster.confirm_delay = parse_one(key, value)?,
                "node_values" => s.corpus.node_values = parse_one(key, value)?,
                "users" => s.corpus.users = parse_one(key, value)?,
                "activities" => s.corpus.activities = parse_one(key, value)?,
                "resources" => s.corpus.resources = parse_one(key, value)?,
                "follow_up_fraction" => s.corpus.follow_up_fraction = parse_one(key, value)?,
                "start_ts" => s.corpus.start_ts = parse_one(key, value)?,
                "span_ms" => s.corpus.span_ms = parse_one(key, value)?,
                other => return Err(BenchError::Scenario(format!("unknown key {other:?}"))),
            }
        }
        s.params = TsIndexParams::new(levels, multiplier).map_err(|e| BenchError::Scenario(e.to_string()))?;
        let default_queries = 3;
        if let Some(kind) = workload {
            s.workload = match kind.as_str() {
                "insert" => Workload::Insert,
                "storage" => Workload::Storage,
                "point" => Workload::Point {
                    attributes: attributes.take().unwrap_or_else(|| Field::ALL.to_vec()),
                    queries: queries.unwrap_or(default_queries),
                },
                "and" => Workload::And {
                    key_counts: and_keys.take().unwrap_or_else(|| (2..=7).collect()),
                },
                "range" => Workload::Range {
                    lengths: lengths.take().unwrap_or_else(|| vec![1_000, 10_000, 100_000]),
                    queries: queries.unwrap_or(default_queries),
                },
                other => return Err(BenchError::Scenario(format!("unknown workload type {other:?}"))),
            };
        }
        s.validate()?;
        Ok(s)
    }

    pub fn parse(text: &str) -> Result<Self, BenchError> {
        Self::parse_with_base(text, BenchScenario::default())
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.rounds < 1 {
            return Err(BenchError::Scenario("rounds must be >= 1".into()));
        }
        if self.record_counts.is_empty()
            || self.record_counts[0] == 0
            || self.record_counts.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(BenchError::Scenario("record counts must be positive and increasing".into()));
        }
        if self.modes.is_empty() {
            return Err(BenchError::Scenario("no modes".into()));
        }
        if let Workload::And { key_counts } = &self.workload {
            if key_counts.iter().any(|&k| !(1..=7).contains(&k)) {
                return Err(BenchError::Scenario("and_keys must be within 1..=7".into()));
            }
        }
        if let Workload::Range { lengths, .. } = &self.workload {
            if lengths.contains(&0) {
                return Err(BenchError::Scenario("range lengths must be positive".into()));
            }
        }
        self.cluster
            .validate()
            .map_err(|e| BenchError::Scenario(e.to_string()))
    }
}

/// Measurements of one round.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoundSample {
    /// For query workloads, mean wall time per query in the batch; for
    /// insertion, the time to insert and confirm the corpus.
    pub wall_ms: f64,
    /// Ledger calls summed over the batch.
    pub api_calls: u64,
    pub chain_bytes: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchResult {
    pub scenario: String,
    pub mode: BenchMode,
    pub records: usize,
    pub workload: String,
    pub rounds: Vec<RoundSample>,
    pub mean_ms: f64,
    pub stddev_ms: f64,
}

impl BenchResult {
    fn new(s: &BenchScenario, mode: BenchMode, records: usize, workload: String, rounds: Vec<RoundSample>) -> Self {
        let n = rounds.len() as f64;
        let mean = rounds.iter().map(|r| r.wall_ms).sum::<f64>() / n;
        let var = rounds.iter().map(|r| (r.wall_ms - mean).powi(2)).sum::<f64>() / n;
        Self {
            scenario: s.name.clone(),
            mode,
            records,
            workload,
            rounds,
            mean_ms: mean,
            stddev_ms: var.sqrt(),
        }
    }

    pub fn api_calls(&self) -> u64 {
        self.rounds[0].api_calls
    }

    pub fn chain_bytes(&self) -> u64 {
        self.rounds[0].chain_bytes
    }
}

pub const CSV_HEADER: &str = "scenario,mode,records,workload,round,wall_ms,api_calls,chain_bytes";

/// One CSV row per round, header first.
pub fn to_csv(results: &[BenchResult]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in results {
        for (i, s) in r.rounds.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.3},{},{}",
                r.scenario,
                r.mode,
                r.records,
                r.workload,
                i + 1,
                s.wall_ms,
                s.api_calls,
                s.chain_bytes
            );
        }
    }
    out
}

/// A store under test: either a ledger cluster or the naive scan.
enum Store {
    Ledger(AuditLog),
    Oracle(NaiveStore),
}

fn cluster_node(record: &LogRecord, nodes: usize) -> NodeId {
    let v: usize = record.node.parse().unwrap_or(1);
    NodeId(v.saturating_sub(1) % nodes)
}

fn insertion_order<'c>(corpus: &'c [LogRecord], s: &BenchScenario) -> Vec<(NodeId, &'c LogRecord)> {
    let mut out: Vec<(NodeId, &LogRecord)> = corpus.iter().map(|r| (cluster_node(r, s.cluster.nodes), r)).collect();
    if s.order == InsertOrder::Sequential {
        out.sort_by_key(|(n, _)| *n);
    }
    out
}

fn build_store(s: &BenchScenario, mode: BenchMode, corpus: &[LogRecord]) -> Result<(Store, f64, u64), BenchError> {
    let start = Instant::now();
    match mode.encoding(&s.params) {
        None => {
            let store: NaiveStore = corpus.iter().cloned().collect();
            Ok((Store::Oracle(store), start.elapsed().as_secs_f64() * 1e3, 0))
        }
        Some(encoding) => {
            let mut log = AuditLog::new(s.cluster, encoding)?;
            let mut calls = 0;
            for (node, r) in insertion_order(corpus, s) {
                log.insert(node, r)?;
                calls += 1;
            }
            log.sync()?;
            let ms = start.elapsed().as_secs_f64() * 1e3;
            let sample = &corpus[..corpus.len().min(1000)];
            if !sample.is_empty() {
                log.set_selectivity(SelectivityList::build(sample).map_err(AuditError::from)?);
            }
            Ok((Store::Ledger(log), ms, calls))
        }
    }
}

impl Store {
    fn chain_bytes(&self) -> u64 {
        match self {
            Store::Ledger(log) => log.view(NodeId(0)).map(|c| c.chain_size_bytes()).unwrap_or(0),
            Store::Oracle(_) => 0,
        }
    }

    fn run(&self, q: &Query) -> Result<ResultSet, BenchError> {
        match self {
            Store::Ledger(log) => Ok(log.query(NodeId(0), q)?),
            Store::Oracle(o) => {
                let records = match q.range {
                    Some((a, b)) => o
                        .range(a, b)
                        .into_iter()
                        .filter(|r| q.predicates.iter().all(|p| p.matches(r)))
                        .collect(),
                    None => o.and(&q.predicates),
                };
                Ok(ResultSet {
                    records,
                    ..Default::default()
                })
            }
        }
    }
}

fn sorted_lines(records: &[LogRecord]) -> Vec<String> {
    let mut v: Vec<String> = records.iter().map(LogRecord::to_line).collect();
    v.sort();
    v
}

/// Named query batches of a query workload, generated deterministically.
fn query_batches(s: &BenchScenario, corpus: &[LogRecord], rng: &mut ChaCha8Rng) -> Vec<(String, Vec<Query>)> {
    let pick = |rng: &mut ChaCha8Rng| &corpus[rng.gen_range(0..corpus.len())];
    match &s.workload {
        Workload::Insert | Workload::Storage => Vec::new(),
        Workload::Point { attributes, queries } => attributes
            .iter()
            .map(|&f| {
                let qs = (0..*queries)
                    .map(|_| {
                        let r = pick(rng);
                        Query::point(Predicate::new(f, r.value(f)).expect("corpus values are valid"))
                    })
                    .collect();
                (format!("point:{f}"), qs)
            })
            .collect(),
        Workload::And { key_counts } => key_counts
            .iter()
            .map(|&k| {
                let qs = combinations(&Field::ALL, k)
                    .into_iter()
                    .map(|fields| {
                        let r = pick(rng);
                        Query::and(
                            fields
                                .iter()
                                .map(|&f| Predicate::new(f, r.value(f)).expect("corpus values are valid"))
                                .collect(),
                        )
                    })
                    .collect();
                (format!("and:{k}"), qs)
            })
            .collect(),
        Workload::Range { lengths, queries } => {
            let lo = corpus.iter().map(|r| r.timestamp).min().unwrap_or(0);
            let hi = corpus.iter().map(|r| r.timestamp).max().unwrap_or(0);
            lengths
                .iter()
                .map(|&len| {
                    let last_start = hi.saturating_sub(len - 1).max(lo);
                    let qs = (0..*queries)
                        .map(|_| {
                            let a = rng.gen_range(lo..=last_start);
                            Query::range(a, a + (len - 1))
                        })
                        .collect();
                    (format!("range:{len}"), qs)
                })
                .collect()
        }
    }
}

/// All `k`-element subsets of `items`, in lexicographic index order.
pub fn combinations<T: Copy>(items: &[T], k: usize) -> Vec<Vec<T>> {
    fn go<T: Copy>(items: &[T], k: usize, start: usize, cur: &mut Vec<T>, out: &mut Vec<Vec<T>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            cur.push(items[i]);
            go(items, k, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(items, k, 0, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Runs every (mode, record count, workload batch) cell of a scenario.
pub fn run_scenario(s: &BenchScenario) -> Result<Vec<BenchResult>, BenchError> {
    s.validate()?;
    let mut results = Vec::new();
    for &count in &s.record_counts {
        let spec = SyntheticCorpusSpec {
            records: count,
            ..s.corpus.clone()
        };
        let corpus = generate_corpus(&spec, s.seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed ^ count as u64);
        let batches = query_batches(s, &corpus, &mut rng);
        let oracle: NaiveStore = corpus.iter().cloned().collect();
        let expected: Vec<Vec<Vec<String>>> = batches
            .iter()
            .map(|(_, qs)| {
                qs.iter()
                    .map(|q| Store::Oracle(oracle.clone()).run(q).map(|rs| sorted_lines(&rs.records)))
                    .collect::<Result<_, _>>()
            })
            .collect::<Result<_, _>>()?;

        for &mode in &s.modes {
            if matches!(s.workload, Workload::Insert | Workload::Storage) {
                let mut rounds = Vec::with_capacity(s.rounds);
                for _ in 0..s.rounds {
                    let (store, ms, calls) = build_store(s, mode, &corpus)?;
                    rounds.push(RoundSample {
                        wall_ms: ms,
                        api_calls: calls,
                        chain_bytes: store.chain_bytes(),
                    });
                }
                results.push(BenchResult::new(s, mode, count, s.workload.kind().into(), rounds));
                continue;
            }
            let (store, _, _) = build_store(s, mode, &corpus)?;
            for ((label, queries), want) in batches.iter().zip(&expected) {
                let mut rounds = Vec::with_capacity(s.rounds);
                for _ in 0..s.rounds {
                    let mut calls = 0;
                    let start = Instant::now();
                    for (q, want) in queries.iter().zip(want) {
                        let rs = store.run(q)?;
                        calls += rs.stats.api_calls;
                        if sorted_lines(&rs.records) != *want {
                            return Err(BenchError::OracleMismatch {
                                mode,
                                workload: label.clone(),
                                detail: format!("{q:?}: got {} records, expected {}", rs.len(), want.len()),
                            });
                        }
                    }
                    let ms = start.elapsed().as_secs_f64() * 1e3 / queries.len().max(1) as f64;
                    rounds.push(RoundSample {
                        wall_ms: ms,
                        api_calls: calls,
                        chain_bytes: store.chain_bytes(),
                    });
                }
                results.push(BenchResult::new(s, mode, count, label.clone(), rounds));
            }
        }
    }
    Ok(results)
}

/// Shuffled copy of a corpus, for insertion-order experiments.
pub fn shuffled(corpus: &[LogRecord], seed: u64) -> Vec<LogRecord> {
    let mut v = corpus.to_vec();
    v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    v
}
