//! Point, AND and range queries with their ledger call counts, next to the
//! naive scan.

use auditchain::bench::{generate_corpus, SyntheticCorpusSpec};
use auditchain::engine::{sort_results, Predicate, SelectivityList, SortOrder};
use auditchain::oracle::NaiveStore;
use auditchain::{AuditLog, ClusterConfig, EncodingMode, Field, NodeId, TsIndexParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = generate_corpus(&SyntheticCorpusSpec { records: 5_000, ..Default::default() }, 7)?;
    let oracle: NaiveStore = corpus.iter().cloned().collect();
    let sel = SelectivityList::build(&corpus[..1_000])?;
    println!("selectivity ranking: {:?}", sel.ranking());

    let modes = [EncodingMode::Baseline, EncodingMode::enhanced(TsIndexParams::default())];
    let logs: Vec<AuditLog> = modes
        .into_iter()
        .map(|mode| {
            let mut log = AuditLog::new(ClusterConfig::default(), mode).unwrap();
            for r in &corpus {
                log.insert(NodeId(0), r).unwrap();
            }
            log.sync().unwrap();
            log.set_selectivity(sel.clone());
            log
        })
        .collect();

    let user = Predicate::new(Field::User, corpus[10].user.clone())?;
    let act = Predicate::new(Field::Activity, corpus[10].activity.clone())?;
    let (from, to) = (152_400_000, 152_450_000);
    for log in &logs {
        let point = log.point(NodeId(1), &user)?;
        let and = log.and(NodeId(2), &[user.clone(), act.clone()])?;
        let range = log.range(NodeId(3), from, to)?;
        println!(
            "{:<9} point {} rows/{} calls, and {} rows/{} calls (peak {}), range {} rows/{} calls",
            if log.mode().params().is_some() { "enhanced" } else { "baseline" },
            point.len(),
            point.api_calls(),
            and.len(),
            and.api_calls(),
            and.stats.peak_records,
            range.len(),
            range.api_calls()
        );
    }
    println!(
        "oracle    point {} rows, and {} rows, range {} rows",
        oracle.point(&user).len(),
        oracle.and(&[user.clone(), act]).len(),
        oracle.range(from, to).len()
    );

    let latest = sort_results(logs[1].point(NodeId(0), &user)?, Field::Timestamp, SortOrder::Desc);
    for line in latest.lines().take(3) {
        println!("{line}");
    }
    Ok(())
}
