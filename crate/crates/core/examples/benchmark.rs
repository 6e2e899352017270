//! A small range-length sweep printed as CSV. Pass a scenario file path to
//! run that instead.

use auditchain::bench::{run_scenario, to_csv, BenchMode, BenchScenario, Workload};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = match std::env::args().nth(1) {
        Some(path) => BenchScenario::parse(&std::fs::read_to_string(path)?)?,
        None => BenchScenario {
            name: "range_sweep".into(),
            record_counts: vec![1_000],
            rounds: 3,
            modes: vec![BenchMode::Baseline, BenchMode::Enhanced, BenchMode::Oracle],
            workload: Workload::Range { lengths: vec![1_000, 10_000, 100_000], queries: 5 },
            ..Default::default()
        },
    };
    let results = run_scenario(&scenario)?;
    print!("{}", to_csv(&results));
    for r in &results {
        eprintln!("{:<9} {:<13} mean {:.3} ms sd {:.3} calls {}", r.mode, r.workload, r.mean_ms, r.stddev_ms, r.api_calls());
    }
    Ok(())
}
