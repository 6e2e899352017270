//! Acceptance gate. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; the process exits non-zero
//! if any criterion fails.

use std::time::Instant;

use auditchain::bench::{self, combinations, generate_corpus, SyntheticCorpusSpec};
use auditchain::codec::{EncodingMode, Field, LogRecord};
use auditchain::engine::{self, Predicate, SelectivityList};
use auditchain::ledger::{Chain, ChainConfig, StreamItem, StreamName, Transaction};
use auditchain::network::{Cluster, ClusterConfig, NodeId};
use auditchain::oracle::NaiveStore;
use auditchain::tsindex::{self, RangePart, TsIndexParams};
use auditchain::AuditLog;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Tolerances and sizes.
const RANGE_RATIO_MIN: f64 = 10.0;
const RANGE_MIN_LEN: u64 = 10_000;
const RANGE_SPAN_MS: u64 = 1_000_000;
const RANGE_QUERIES: usize = 100;
const STORAGE_RATIO_MAX: f64 = 0.80;
const STORAGE_RECORDS: usize = 10_000;
const EXHAUSTIVE_LIMIT: u64 = 10_000;
const EQUIVALENCE_RECORDS: usize = 1_000;
const EQUIVALENCE_RANGES: usize = 50;
const RANDOM_OPERATIONS: usize = 1_000;
const PLANNER_RECORDS: usize = 1_000;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn cluster_with(records: &[LogRecord], mode: &EncodingMode) -> AuditLog {
    let mut log = AuditLog::new(ClusterConfig::default(), mode.clone()).expect("cluster");
    for r in records {
        let node: usize = r.node.parse().unwrap_or(1);
        log.insert(NodeId((node - 1) % 4), r).expect("insert");
    }
    log.sync().expect("sync");
    log
}

fn line_set(records: &[LogRecord]) -> Vec<String> {
    let mut v: Vec<String> = records.iter().map(LogRecord::to_line).collect();
    v.sort();
    v
}

fn worked_example() -> Outcome {
    let p = TsIndexParams::new(3, 10).unwrap();
    let d = tsindex::decompose(109, 120, &p).unwrap();
    let expected = vec![
        RangePart { level: 2, start: 109, width: 1 },
        RangePart { level: 1, start: 110, width: 10 },
        RangePart { level: 2, start: 120, width: 1 },
    ];
    ensure(d.parts == expected, || format!("parts {:?}", d.parts))?;
    let mut chain = Chain::new(ChainConfig::default());
    for stream in EncodingMode::enhanced(p.clone()).streams() {
        chain.ensure_stream(&stream);
    }
    let base = engine::range_query_baseline(&chain, 109, 120, &EncodingMode::Baseline).unwrap();
    ensure(base.api_calls() == 12, || format!("baseline api_calls {}", base.api_calls()))?;
    let enh = engine::range_query(&chain, 109, 120, &EncodingMode::enhanced(p)).unwrap();
    ensure(enh.api_calls() == 3, || format!("enhanced api_calls {}", enh.api_calls()))?;
    Ok("3 parts [(L2,109) (L1,110-119) (L2,120)], baseline 12 calls, enhanced 3 calls".into())
}

fn range_cost_reduction() -> Outcome {
    let spec = SyntheticCorpusSpec {
        records: 10_000,
        span_ms: RANGE_SPAN_MS,
        ..Default::default()
    };
    let corpus = generate_corpus(&spec, 2).unwrap();
    let params = TsIndexParams::new(3, 100).unwrap();
    let base = cluster_with(&corpus, &EncodingMode::Baseline);
    let enh = cluster_with(&corpus, &EncodingMode::enhanced(params));
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst = f64::INFINITY;
    for _ in 0..RANGE_QUERIES {
        let len = rng.gen_range(RANGE_MIN_LEN..=RANGE_SPAN_MS);
        let start = spec.start_ts + rng.gen_range(0..=RANGE_SPAN_MS - len);
        let end = start + len - 1;
        let b = base.range(NodeId(0), start, end).unwrap();
        let e = enh.range(NodeId(1), start, end).unwrap();
        ensure(line_set(&b.records) == line_set(&e.records), || format!("results differ on [{start},{end}]"))?;
        let ratio = b.api_calls() as f64 / e.api_calls() as f64;
        ensure(ratio >= RANGE_RATIO_MIN, || {
            format!("[{start},{end}] ratio {ratio:.2} ({} / {})", b.api_calls(), e.api_calls())
        })?;
        worst = worst.min(ratio);
    }
    Ok(format!("{RANGE_QUERIES} ranges, minimum baseline/enhanced call ratio {worst:.1} (need >= {RANGE_RATIO_MIN})"))
}

fn storage_reduction() -> Outcome {
    let spec = SyntheticCorpusSpec {
        records: STORAGE_RECORDS,
        ..Default::default()
    };
    let corpus = generate_corpus(&spec, 3).unwrap();
    let mean_line = corpus.iter().map(|r| r.to_line().len()).sum::<usize>() as f64 / corpus.len() as f64;
    let enhanced = EncodingMode::enhanced(TsIndexParams::new(3, 100).unwrap());
    let cmp = bench::compare_storage(&corpus, &enhanced).unwrap();
    let ratio = cmp.enhanced_bytes as f64 / cmp.baseline_bytes as f64;
    let detail = format!(
        "baseline {} B, enhanced {} B, ratio {ratio:.3} (need <= {STORAGE_RATIO_MAX}), mean line {mean_line:.1} B",
        cmp.baseline_bytes, cmp.enhanced_bytes
    );
    ensure(ratio <= STORAGE_RATIO_MAX, || detail.clone())?;
    Ok(detail)
}

fn oracle_equivalence() -> Outcome {
    let params = TsIndexParams::default();
    let modes = [
        EncodingMode::Baseline,
        EncodingMode::enhanced(params.clone()),
        EncodingMode::normalized(params),
    ];
    let mut total = 0usize;
    for seed in 0..3u64 {
        let spec = SyntheticCorpusSpec {
            records: EQUIVALENCE_RECORDS,
            ..Default::default()
        };
        let corpus = generate_corpus(&spec, 100 + seed).unwrap();
        let oracle: NaiveStore = corpus.iter().cloned().collect();
        let logs: Vec<AuditLog> = modes
            .iter()
            .map(|m| {
                let mut log = cluster_with(&corpus, m);
                log.set_selectivity(SelectivityList::build(&corpus[..200]).unwrap());
                log
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pick = |rng: &mut ChaCha8Rng| corpus[rng.gen_range(0..corpus.len())].clone();

        let mut check = |what: String, expected: Vec<LogRecord>, run: &dyn Fn(&AuditLog, NodeId) -> Vec<LogRecord>| {
            let want = line_set(&expected);
            for (i, log) in logs.iter().enumerate() {
                let got = line_set(&run(log, NodeId(i % 4)));
                if got != want {
                    return Err(format!("{} on {what}: {} vs oracle {}", log.mode().params().map_or("baseline", |_| "enhanced"), got.len(), want.len()));
                }
            }
            total += 1;
            Ok(())
        };

        for field in Field::ALL {
            for _ in 0..20 {
                let p = Predicate::new(field, pick(&mut rng).value(field)).unwrap();
                check(format!("{p:?}"), oracle.point(&p), &|l, n| l.point(n, &p).unwrap().records)?;
            }
            let missing = Predicate::new(field, "999999999").unwrap();
            check(format!("{missing:?}"), oracle.point(&missing), &|l, n| l.point(n, &missing).unwrap().records)?;
        }
        for k in 2..=7 {
            for fields in combinations(&Field::ALL, k) {
                let r = pick(&mut rng);
                let preds: Vec<Predicate> = fields.iter().map(|&f| Predicate::new(f, r.value(f)).unwrap()).collect();
                check(format!("{preds:?}"), oracle.and(&preds), &|l, n| l.and(n, &preds).unwrap().records)?;
                // Values drawn from different records: usually empty.
                let mixed: Vec<Predicate> =
                    fields.iter().map(|&f| Predicate::new(f, pick(&mut rng).value(f)).unwrap()).collect();
                check(format!("{mixed:?}"), oracle.and(&mixed), &|l, n| l.and(n, &mixed).unwrap().records)?;
            }
        }
        for _ in 0..EQUIVALENCE_RANGES {
            let a = spec.start_ts + rng.gen_range(0..spec.span_ms);
            let b = a + rng.gen_range(0..spec.span_ms / 4);
            check(format!("[{a},{b}]"), oracle.range(a, b), &|l, n| l.range(n, a, b).unwrap().records)?;
        }
    }
    Ok(format!("{total} queries agree across baseline, enhanced, enhanced-norm and the naive scan"))
}

/// Minimal number of aligned buckets covering `[s, x)` for every `x`, by
/// dynamic programming over bucket end points.
fn dp_optimum(s: u64, limit: u64, ranges: &[u64], best: &mut Vec<u32>) {
    best.clear();
    best.resize((limit - s + 1) as usize, u32::MAX);
    best[0] = 0;
    for x in s + 1..=limit {
        let mut b = u32::MAX;
        for &r in ranges {
            if x % r == 0 && x >= s + r {
                let prev = best[(x - r - s) as usize];
                if prev != u32::MAX && prev + 1 < b {
                    b = prev + 1;
                }
            }
        }
        best[(x - s) as usize] = b;
    }
}

fn exact_cover(parts: &[RangePart], s: u64, e: u64, ranges: &[u64]) -> bool {
    let mut next = s;
    for p in parts {
        if p.start != next || ranges.get(p.level) != Some(&p.width) || p.start % p.width != 0 {
            return false;
        }
        next = p.start + p.width;
    }
    next == e + 1
}

fn decomposition_minimality() -> Outcome {
    let p = TsIndexParams::new(3, 10).unwrap();
    let ranges = p.elemental_ranges().to_vec();
    let mut best = Vec::new();
    let mut intervals = 0u64;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for s in 0..EXHAUSTIVE_LIMIT {
        dp_optimum(s, EXHAUSTIVE_LIMIT, &ranges, &mut best);
        for e in s..EXHAUSTIVE_LIMIT {
            let optimum = best[(e + 1 - s) as usize] as u64;
            let greedy = tsindex::query_count(s, e, &p).unwrap();
            if greedy != optimum {
                return Err(format!("[{s},{e}]: greedy {greedy}, optimum {optimum}"));
            }
            let d = tsindex::decompose(s, e, &p).unwrap();
            if d.parts.len() as u64 != greedy || !exact_cover(&d.parts, s, e, &ranges) {
                return Err(format!("[{s},{e}]: inexact cover {:?}", d.parts));
            }
            // Spot-check by enumerating bucket members.
            if rng.gen_ratio(1, 50_000) {
                let members: Vec<u64> = d.parts.iter().flat_map(|q| q.start..q.start + q.width).collect();
                if members != (s..=e).collect::<Vec<_>>() {
                    return Err(format!("[{s},{e}]: enumeration mismatch"));
                }
            }
            intervals += 1;
        }
    }
    Ok(format!("{intervals} intervals in [0, {EXHAUSTIVE_LIMIT}): greedy = DP optimum, covers exact"))
}

fn point_query_cost() -> Outcome {
    let mut checked = 0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(600 + seed);
        let spec = SyntheticCorpusSpec {
            records: rng.gen_range(50..400),
            users: 20,
            resources: 10,
            follow_up_fraction: rng.gen_range(0.0..0.5),
            ..Default::default()
        };
        let corpus = generate_corpus(&spec, seed).unwrap();
        let log = cluster_with(&corpus, &EncodingMode::enhanced(TsIndexParams::default()));
        for field in Field::ALL {
            for _ in 0..10 {
                let value = if rng.gen_ratio(1, 10) {
                    "absent".to_string()
                } else {
                    corpus[rng.gen_range(0..corpus.len())].value(field)
                };
                let value = if field == Field::Timestamp && value == "absent" { "1".into() } else { value };
                let pred = Predicate::new(field, value).unwrap();
                let rs = log.point(NodeId(rng.gen_range(0..4)), &pred).unwrap();
                ensure(rs.api_calls() == rs.len() as u64 + 1, || {
                    format!("{pred:?}: {} calls for {} txids", rs.api_calls(), rs.len())
                })?;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} enhanced point queries cost exactly T + 1 calls"))
}

fn random_tx(rng: &mut ChaCha8Rng, streams: &[StreamName]) -> Transaction {
    let n = rng.gen_range(1..=3);
    let items = (0..n)
        .map(|_| {
            let s = streams[rng.gen_range(0..streams.len())].clone();
            let key: Vec<u8> = (0..rng.gen_range(1..6)).map(|_| rng.gen_range(b'a'..=b'z')).collect();
            let value: Vec<u8> = (0..rng.gen_range(0..12)).map(|_| rng.gen()).collect();
            StreamItem::new(s, key, value)
        })
        .collect();
    Transaction::new(rng.gen_range(0..4), items).unwrap()
}

fn immutability() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut chain = Chain::new(ChainConfig { batch_limit: 16 });
    let mut streams = vec![StreamName::new("s0").unwrap()];
    chain.create_stream(&streams[0]).unwrap();
    let mut published = Vec::new();
    for op in 0..RANDOM_OPERATIONS {
        match rng.gen_range(0..10) {
            0 => {
                let s = StreamName::new(format!("s{}", streams.len())).unwrap();
                chain.create_stream(&s).unwrap();
                streams.push(s);
            }
            1..=2 => {
                chain.confirm_block().unwrap();
            }
            3 if !published.is_empty() => {
                let tx: &Transaction = &published[rng.gen_range(0..published.len())];
                ensure(chain.publish(tx.clone()).is_err(), || format!("op {op}: duplicate accepted"))?;
            }
            _ => {
                let tx = random_tx(&mut rng, &streams);
                if chain.publish(tx.clone()).is_ok() {
                    published.push(tx);
                }
            }
        }
        ensure(chain.verify_chain(), || format!("verify failed after op {op}"))?;
    }
    while chain.pending_len() > 0 {
        chain.confirm_block().unwrap();
    }
    ensure(chain.verify_chain(), || "verify failed after final confirm".into())?;

    // Every byte of every confirmed item, through the hook.
    let mut hooked = 0;
    let txs: Vec<Transaction> = chain.transactions().cloned().collect();
    for tx in &txs {
        for (i, item) in tx.items().iter().enumerate() {
            for off in 0..item.key.len() + item.value.len() {
                // The hook flips one bit, so a second call restores the byte.
                ensure(chain.tamper_item_byte(&tx.txid(), i, off), || "hook refused".into())?;
                let detected = !chain.verify_chain();
                chain.tamper_item_byte(&tx.txid(), i, off);
                ensure(detected, || format!("tamper of {} item {i} byte {off} undetected", tx.txid()))?;
                hooked += 1;
            }
        }
    }

    // Every byte of a serialized chain holding the first few transactions.
    let mut small = Chain::new(ChainConfig { batch_limit: 8 });
    for s in &streams {
        small.ensure_stream(s);
    }
    for tx in txs.iter().take(60) {
        small.publish(tx.clone()).unwrap();
    }
    while small.pending_len() > 0 {
        small.confirm_block().unwrap();
    }
    let bytes = small.to_bytes();
    for i in 0..bytes.len() {
        let mut b = bytes.clone();
        b[i] ^= 0x01;
        if let Ok(c) = Chain::from_bytes(&b, ChainConfig::default()) {
            ensure(!c.verify_chain(), || format!("serialized byte {i} flip undetected"))?;
        }
    }

    // Four nodes agree byte for byte after sync.
    let mut cluster = Cluster::new(ClusterConfig::default()).unwrap();
    for s in &streams {
        cluster.ensure_stream(s);
    }
    for tx in txs.iter().take(300) {
        cluster.submit(NodeId(rng.gen_range(0..4)), tx.clone()).unwrap();
    }
    cluster.drain().unwrap();
    let first = cluster.query_node(NodeId(0)).unwrap().to_bytes();
    for (id, c) in cluster.nodes() {
        ensure(c.to_bytes() == first && c.verify_chain(), || format!("node {id} diverged"))?;
    }
    Ok(format!(
        "{RANDOM_OPERATIONS} operations verified, {hooked} hooked and {} serialized byte flips detected, 4 nodes identical",
        bytes.len()
    ))
}

fn planner_memory_bound() -> Outcome {
    let spec = SyntheticCorpusSpec {
        records: PLANNER_RECORDS,
        ..Default::default()
    };
    let corpus = generate_corpus(&spec, 8).unwrap();
    let mode = EncodingMode::enhanced(TsIndexParams::default());
    let log = cluster_with(&corpus, &mode);
    let sel = SelectivityList::build(&corpus).unwrap();
    let view = log.view(NodeId(0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let pairs = combinations(&Field::ALL, 2);
    for fields in &pairs {
        let r = &corpus[rng.gen_range(0..corpus.len())];
        let preds: Vec<Predicate> = fields.iter().map(|&f| Predicate::new(f, r.value(f)).unwrap()).collect();
        let rs = engine::and_query_enhanced(view, &preds, &sel, &mode).unwrap();
        let chosen = sel.most_selective(&preds).unwrap();
        let single = engine::point_query(view, chosen, &mode).unwrap();
        ensure(rs.stats.peak_records == single.len(), || {
            format!("{fields:?}: peak {} vs chosen result {}", rs.stats.peak_records, single.len())
        })?;
    }
    Ok(format!("{} attribute pairs: peak records = chosen predicate's result size", pairs.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("decomposition worked example", worked_example),
        ("range-query cost reduction", range_cost_reduction),
        ("storage reduction", storage_reduction),
        ("oracle equivalence", oracle_equivalence),
        ("decomposition minimality and exactness", decomposition_minimality),
        ("enhanced point-query cost", point_query_cost),
        ("immutability", immutability),
        ("AND-planner memory bound", planner_memory_bound),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = f();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
