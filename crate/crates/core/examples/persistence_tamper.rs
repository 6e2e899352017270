//! File-backed nodes: reopen across sessions, then corrupt a file and watch
//! verification fail.

use auditchain::ledger::{Chain, ChainConfig};
use auditchain::network::node_chain_path;
use auditchain::{AuditLog, ClusterConfig, EncodingMode, NodeId, TsIndexParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("auditchain-example-{}", std::process::id()));
    let mode = EncodingMode::normalized(TsIndexParams::default());
    {
        let mut log = AuditLog::open(ClusterConfig::default(), mode.clone(), &dir)?;
        log.insert(NodeId(0), &"152202801 1 1 1 1 REQ_RESOURCE MOD_FlyBase".parse()?)?;
        log.sync()?;
    }
    {
        // The follow-up's root is found on the reopened chain.
        let mut log = AuditLog::open(ClusterConfig::default(), mode, &dir)?;
        log.insert(NodeId(1), &"152208352 1 2 1 1 VIEW_RESOURCE MOD_FlyBase".parse()?)?;
        log.sync()?;
        println!("records in range: {}", log.range(NodeId(2), 0, u32::MAX as u64)?.len());
    }

    let path = node_chain_path(&dir, 3);
    let mut bytes = std::fs::read(&path)?;
    println!("node 3 verifies: {}", Chain::from_bytes(&bytes, ChainConfig::default())?.verify_chain());
    let at = bytes.windows(4).position(|w| w == b"VIEW").expect("record text is stored");
    bytes[at] = b'v';
    std::fs::write(&path, &bytes)?;
    let tampered = Chain::from_bytes(&std::fs::read(&path)?, ChainConfig::default())?;
    println!("after flipping one byte: {}", tampered.verify_chain());
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
