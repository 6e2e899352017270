//! Four nodes sharing one pool: round-robin block production, batching and
//! confirmation delay.

use auditchain::ledger::{StreamItem, StreamName, Transaction};
use auditchain::{Cluster, ClusterConfig, NodeId};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cluster = Cluster::new(ClusterConfig { nodes: 4, batch_limit: 512, confirm_delay: 2 })?;
    let s = StreamName::new("events")?;
    cluster.create_stream(&s)?;
    for i in 0..1_000u32 {
        let tx = Transaction::new(i % 4, vec![StreamItem::new(s.clone(), format!("k{i}"), "")])?;
        cluster.submit(NodeId(i as usize % 4), tx)?;
    }
    while cluster.pending_len() > 0 {
        let out = cluster.round()?;
        println!("round {} by node {}: {} txs", out.block.height, out.producer, out.block.txids.len());
    }
    for (id, chain) in cluster.nodes() {
        println!("node {id}: height={} txs={} tip={:02x?}", chain.height(), chain.tx_count(), &chain.tip_hash()[..4]);
    }
    println!("converged={}", cluster.converged());
    Ok(())
}
