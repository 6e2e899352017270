//! Covering a timestamp range with aligned buckets, and picking parameters
//! for a workload.

use auditchain::bench::{generate_corpus, SyntheticCorpusSpec};
use auditchain::tsindex::{aligned_query_count, bucket_keys, decompose, query_count, tune_params};
use auditchain::TsIndexParams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = TsIndexParams::new(3, 10)?;
    println!("elemental ranges {:?}", p.elemental_ranges());
    println!("buckets of 1522000002418: {:?}", bucket_keys(1_522_000_002_418, &TsIndexParams::default()));

    let d = decompose(109, 120, &p)?;
    for part in &d.parts {
        println!("level {} [{}, {}]", part.level, part.start, part.end());
    }

    let p = TsIndexParams::new(3, 100)?;
    for (s, e) in [(0, 9_999), (1_234, 98_765), (5, 1_000_004)] {
        println!("[{s}, {e}]: {} lookups instead of {}", query_count(s, e, &p)?, e - s + 1);
    }
    println!("aligned length 12345 under (3, 100): {}", aligned_query_count(12_345, &p));

    let sample = generate_corpus(&SyntheticCorpusSpec::default(), 4)?;
    let workload: Vec<(u64, u64)> = (0..50).map(|i| (152_200_000 + i * 997, 152_200_000 + i * 997 + 20_000)).collect();
    let best = tune_params(&sample, &workload, &[1, 2, 3, 4], &[10, 32, 100, 316])?;
    println!("tuned: levels={} multiplier={}", best.levels(), best.multiplier());
    Ok(())
}
