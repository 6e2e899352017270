//! How one access-log record is laid out under each encoding, and what the
//! layouts cost in chain bytes.

use auditchain::bench::{compare_storage, generate_corpus, SyntheticCorpusSpec};
use auditchain::codec::{encode, EncodingMode, LogRecord, NoRoots};
use auditchain::TsIndexParams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let record: LogRecord = "152208352 1 2 1 1 VIEW_RESOURCE MOD_FlyBase".parse()?;
    let params = TsIndexParams::new(3, 100)?;
    for (name, mode) in [("baseline", EncodingMode::Baseline), ("enhanced", EncodingMode::enhanced(params.clone()))] {
        let tx = encode(&record, &mode, &mut NoRoots, 0)?;
        println!("{name}: {} bytes", tx.encoded_len());
        for item in tx.items() {
            println!(
                "  {:<10} key={:<14} value={:?}",
                item.stream.as_str(),
                String::from_utf8_lossy(&item.key),
                String::from_utf8_lossy(&item.value)
            );
        }
    }

    let corpus = generate_corpus(&SyntheticCorpusSpec { records: 2_000, ..Default::default() }, 1)?;
    for mode in [EncodingMode::enhanced(params.clone()), EncodingMode::normalized(params)] {
        let cmp = compare_storage(&corpus, &mode)?;
        println!(
            "normalize={}: baseline={} enhanced={} reduction={:.1}%",
            mode.normalizes(),
            cmp.baseline_bytes,
            cmp.enhanced_bytes,
            cmp.reduction * 100.0
        );
    }
    Ok(())
}
