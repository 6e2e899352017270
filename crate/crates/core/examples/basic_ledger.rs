//! Streams, publishing, confirmation and key lookups on a single chain.

use auditchain::ledger::{Chain, ChainConfig, StreamItem, StreamName, Transaction};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut chain = Chain::new(ChainConfig::default());
    let users = StreamName::new("User")?;
    let activity = StreamName::new("Activity")?;
    chain.create_stream(&users)?;
    chain.create_stream(&activity)?;

    let tx = Transaction::new(
        0,
        vec![
            StreamItem::new(users.clone(), "alice", "first login"),
            StreamItem::new(activity.clone(), "LOGIN", ""),
        ],
    )?;
    let id = chain.publish(tx)?;
    println!("pending={} visible={}", chain.pending_len(), chain.list_stream_key_items("User", b"alice")?.len());

    let block = chain.confirm_block()?;
    println!("block height={} txs={}", block.height, block.txids.len());
    for item in chain.list_stream_key_items("User", b"alice")? {
        println!("alice -> {} ({:?})", item.txid, String::from_utf8_lossy(&item.value));
    }
    println!("tx {id} has {} items", chain.get_raw_transaction(&id)?.items().len());
    println!("chain bytes={} verified={}", chain.chain_size_bytes(), chain.verify_chain());
    Ok(())
}
