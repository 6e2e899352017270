use std::collections::HashMap;

use auditchain::codec::{self, EncodingMode, Field, LogRecord, NoRoots};
use auditchain::engine::{self, Predicate, SelectivityList};
use auditchain::ledger::{Chain, ChainConfig, StreamItem, StreamName, Transaction};
use auditchain::network::{Cluster, ClusterConfig, NodeId};
use auditchain::oracle::NaiveStore;
use auditchain::tsindex::{self, TsIndexParams};
use auditchain::AuditLog;
use proptest::prelude::*;

fn token() -> impl Strategy<Value = String> {
    prop_oneof!["[a-c]", "[A-Z_]{1,12}", "[0-9]{1,3}"]
}

fn record() -> impl Strategy<Value = LogRecord> {
    (0u64..5_000, 1u8..4, token(), token(), token(), token()).prop_map(|(ts, node, id, user, activity, resource)| {
        LogRecord {
            timestamp: ts,
            node: node.to_string(),
            ref_id: id.clone(),
            id,
            user,
            activity,
            resource,
        }
    })
}

/// Records with unique (node, id) whose follow-ups point at earlier roots
/// and copy their user and resource.
fn corpus(max: usize) -> impl Strategy<Value = Vec<LogRecord>> {
    prop::collection::vec((record(), any::<prop::sample::Index>(), any::<bool>()), 0..max).prop_map(|raw| {
        let mut out: Vec<LogRecord> = Vec::new();
        for (i, (mut r, pick, follow)) in raw.into_iter().enumerate() {
            r.id = format!("{}{}", r.id, i);
            r.ref_id = r.id.clone();
            let roots: Vec<&LogRecord> = out.iter().filter(|x| !x.is_follow_up()).collect();
            if follow && !roots.is_empty() {
                let root = pick.get(&roots);
                r.node = root.node.clone();
                r.ref_id = root.id.clone();
                r.user = root.user.clone();
                r.resource = root.resource.clone();
            }
            out.push(r);
        }
        out
    })
}

fn params() -> impl Strategy<Value = TsIndexParams> {
    (1u32..5, 2u64..12).prop_map(|(l, m)| TsIndexParams::new(l, m).unwrap())
}

fn modes(p: TsIndexParams) -> [EncodingMode; 3] {
    [EncodingMode::Baseline, EncodingMode::enhanced(p.clone()), EncodingMode::normalized(p)]
}

fn sorted_lines(rs: &[LogRecord]) -> Vec<String> {
    let mut v: Vec<String> = rs.iter().map(LogRecord::to_line).collect();
    v.sort();
    v
}

fn load(records: &[LogRecord], mode: &EncodingMode, batch_limit: usize) -> AuditLog {
    let cfg = ClusterConfig { batch_limit, ..Default::default() };
    let mut log = AuditLog::new(cfg, mode.clone()).unwrap();
    for (i, r) in records.iter().enumerate() {
        log.insert(NodeId(i % 4), r).unwrap();
    }
    log.sync().unwrap();
    log
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn log_lines_round_trip(r in record()) {
        let line = r.to_line();
        prop_assert_eq!(codec::parse_log_line(&line).unwrap(), r.clone());
        prop_assert_eq!(line.split(' ').count(), 7);
    }

    #[test]
    fn encodings_rebuild_the_record(r in record(), p in params()) {
        for mode in [EncodingMode::Baseline, EncodingMode::enhanced(p.clone())] {
            let tx = codec::encode(&r, &mode, &mut NoRoots, 0).unwrap();
            prop_assert_eq!(codec::rebuild_record(&tx, &mode, &mut NoRoots).unwrap(), r.clone());
        }
    }

    #[test]
    fn decomposition_is_an_exact_ordered_cover(s in 0u64..1_000_000, len in 1u64..200_000, p in params()) {
        let e = s + len - 1;
        let d = tsindex::decompose(s, e, &p).unwrap();
        let mut next = s;
        for part in &d.parts {
            prop_assert_eq!(part.start, next);
            prop_assert_eq!(part.width, p.elemental_range(part.level));
            prop_assert_eq!(part.start % part.width, 0);
            next = part.end() + 1;
        }
        prop_assert_eq!(next, e + 1);
        prop_assert_eq!(d.parts.len() as u64, tsindex::query_count(s, e, &p).unwrap());
        let coarsest = p.elemental_range(0);
        if s % coarsest == 0 {
            prop_assert_eq!(tsindex::aligned_query_count(len, &p), d.parts.len() as u64);
        }
    }

    #[test]
    fn decomposition_near_u64_max(back in 0u64..10_000, len in 1u64..10_000, p in params()) {
        let e = u64::MAX - back;
        let s = e.saturating_sub(len - 1);
        let d = tsindex::decompose(s, e, &p).unwrap();
        prop_assert_eq!(d.parts.first().unwrap().start, s);
        prop_assert_eq!(d.parts.last().unwrap().end(), e);
    }

    #[test]
    fn bucket_keys_contain_the_timestamp(t in any::<u64>(), p in params()) {
        for (level, start) in tsindex::bucket_keys(t, &p) {
            let r = p.elemental_range(level);
            prop_assert!(start <= t && t - start < r && start % r == 0);
        }
    }

    /// Every confirmed item is listed under its key, nothing else is, and
    /// listings follow confirmation order.
    #[test]
    fn key_index_is_complete_sound_and_ordered(
        txs in prop::collection::vec(prop::collection::vec((0usize..3, "[a-d]{1,2}", "[x-z]{0,3}"), 1..4), 0..60),
        batch in 1usize..20,
    ) {
        let names: Vec<StreamName> = (0..3).map(|i| StreamName::new(format!("s{i}")).unwrap()).collect();
        let mut chain = Chain::new(ChainConfig { batch_limit: batch });
        for n in &names {
            chain.create_stream(n).unwrap();
        }
        // Confirmation is FIFO, so the i-th published transaction has seq i.
        let mut expected: HashMap<(usize, String), Vec<(u64, Vec<u8>)>> = HashMap::new();
        for (i, items) in txs.iter().enumerate() {
            for (s, k, v) in items {
                expected.entry((*s, k.clone())).or_default().push((i as u64, v.as_bytes().to_vec()));
            }
            let items: Vec<StreamItem> = items
                .iter()
                .map(|(s, k, v)| StreamItem::new(names[*s].clone(), k.as_bytes(), v.as_bytes()))
                .collect();
            chain.publish(Transaction::new(i as u32, items).unwrap()).unwrap();
            if i % 3 == 2 {
                chain.confirm_block().unwrap();
            }
        }
        while chain.pending_len() > 0 {
            chain.confirm_block().unwrap();
        }
        for s in 0..3 {
            for k in ["a", "b", "c", "d", "aa", "ab", "zz"] {
                let got = chain.list_stream_key_items(&format!("s{s}"), k.as_bytes()).unwrap();
                let want = expected.get(&(s, k.to_owned())).cloned().unwrap_or_default();
                prop_assert_eq!(got.len(), want.len());
                prop_assert!(got.windows(2).all(|w| w[0].seq <= w[1].seq));
                for (g, (seq, value)) in got.iter().zip(&want) {
                    prop_assert_eq!(g.seq, *seq);
                    prop_assert_eq!(&g.value, value);
                }
            }
        }
    }

    /// Appending blocks never changes the bytes already written.
    #[test]
    fn chain_bytes_only_grow_by_appending(keys in prop::collection::vec("[a-z]{1,4}", 1..40), batch in 1usize..8) {
        let s = StreamName::new("s").unwrap();
        let mut chain = Chain::new(ChainConfig { batch_limit: batch });
        chain.create_stream(&s).unwrap();
        let mut prev = chain.to_bytes();
        for (i, k) in keys.iter().enumerate() {
            let tx = Transaction::new(i as u32, vec![StreamItem::new(s.clone(), k.as_bytes(), b"v".to_vec())]).unwrap();
            chain.publish(tx).unwrap();
            if i % 2 == 1 {
                chain.confirm_block().unwrap();
                let now = chain.to_bytes();
                prop_assert!(now.starts_with(&prev));
                prop_assert_eq!(now.len() as u64, chain.chain_size_bytes());
                prop_assert!(chain.verify_chain());
                prev = now;
            }
        }
        let copy = Chain::from_bytes(&prev, ChainConfig::default()).unwrap();
        prop_assert_eq!(copy.to_bytes(), prev);
    }

    /// All encodings answer point, AND and range queries like the naive scan.
    #[test]
    fn engines_agree_with_the_oracle(
        records in corpus(40),
        p in params(),
        probes in prop::collection::vec((any::<prop::sample::Index>(), 0usize..7, 0usize..7), 1..8),
        ranges in prop::collection::vec((0u64..5_000, 0u64..2_000), 1..4),
    ) {
        let oracle: NaiveStore = records.iter().cloned().collect();
        let sel = SelectivityList::build(&records).unwrap_or_default();
        for mode in modes(p) {
            let mut log = load(&records, &mode, 7);
            log.set_selectivity(sel.clone());
            for (pick, f1, f2) in &probes {
                let Some(r) = (!records.is_empty()).then(|| pick.get(&records)) else { break };
                let a = Predicate::new(Field::ALL[*f1], r.value(Field::ALL[*f1])).unwrap();
                let b = Predicate::new(Field::ALL[*f2], r.value(Field::ALL[*f2])).unwrap();
                let got = log.point(NodeId(1), &a).unwrap();
                prop_assert_eq!(sorted_lines(&got.records), sorted_lines(&oracle.point(&a)));
                let both = [a, b];
                let got = log.and(NodeId(2), &both).unwrap();
                prop_assert_eq!(sorted_lines(&got.records), sorted_lines(&oracle.and(&both)));
            }
            for &(s, len) in &ranges {
                let got = log.range(NodeId(3), s, s + len).unwrap();
                prop_assert_eq!(sorted_lines(&got.records), sorted_lines(&oracle.range(s, s + len)));
            }
        }
    }

    /// Query results come back in confirmation order without repeats.
    #[test]
    fn results_are_ordered_and_distinct(records in corpus(40), p in params()) {
        let mode = EncodingMode::normalized(p);
        let log = load(&records, &mode, 5);
        let view = log.view(NodeId(0)).unwrap();
        let order: HashMap<String, usize> = records.iter().enumerate().map(|(i, r)| (r.to_line(), i)).collect();
        for field in [Field::User, Field::Resource, Field::Node] {
            for r in records.iter().take(5) {
                let rs = engine::point_query(view, &Predicate::new(field, r.value(field)).unwrap(), &mode).unwrap();
                let pos: Vec<usize> = rs.records.iter().map(|x| order[&x.to_line()]).collect();
                prop_assert!(pos.windows(2).all(|w| w[0] < w[1]), "{:?}", pos);
            }
        }
    }

    /// Every node of a cluster holds the same bytes after each round, and
    /// every chain verifies.
    #[test]
    fn nodes_stay_identical(
        subs in prop::collection::vec((0usize..4, "[a-f]{1,3}"), 0..80),
        nodes in 1usize..6,
        batch in 1usize..10,
        delay in 1u64..4,
    ) {
        let s = StreamName::new("s").unwrap();
        let mut c = Cluster::new(ClusterConfig { nodes, batch_limit: batch, confirm_delay: delay }).unwrap();
        c.create_stream(&s).unwrap();
        for (i, (n, k)) in subs.iter().enumerate() {
            let tx = Transaction::new(i as u32, vec![StreamItem::new(s.clone(), k.as_bytes(), i.to_string())]).unwrap();
            c.submit(NodeId(n % nodes), tx).unwrap();
            if i % 7 == 0 {
                c.round().unwrap();
                prop_assert!(c.converged());
            }
        }
        c.drain().unwrap();
        prop_assert!(c.converged());
        prop_assert_eq!(c.pending_len(), 0);
        for (_, chain) in c.nodes() {
            prop_assert!(chain.verify_chain());
            prop_assert_eq!(chain.tx_count(), subs.len());
        }
    }
}

#[test]
fn range_query_rejects_params_other_than_the_encoding() {
    let mode = EncodingMode::enhanced(TsIndexParams::default());
    let log = load(&["10 1 1 1 7 A R".parse().unwrap()], &mode, 4);
    let other = TsIndexParams::new(2, 10).unwrap();
    let view = log.view(NodeId(0)).unwrap();
    assert!(engine::range_query_enhanced(view, 0, 100, &other, &mode).is_err());
    assert_eq!(engine::range_query(view, 0, 100, &mode).unwrap().len(), 1);
}
