//! Append-only, hash-chained, multi-stream key-value store.
//!
//! A [`Chain`] holds confirmed blocks, the transactions they list, and a
//! per-stream key index over confirmed items. Published transactions wait in
//! a pending queue and are invisible to reads until [`Chain::confirm_block`]
//! (or [`Chain::append_block`], for blocks produced elsewhere) moves them
//! into a block.
//!
//! The serialized chain is the concatenation of block records (header, then
//! the bodies of the listed transactions). [`Chain::chain_size_bytes`] is the
//! length of that serialization and, for file-backed chains, the file size.

mod types;
pub(crate) mod wire;

use std::collections::{HashMap, HashSet, VecDeque};
use std::fs::{File, OpenOptions};
use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

pub use types::{Block, StreamItem, StreamName, Transaction, Txid};

pub const DEFAULT_BATCH_LIMIT: usize = 512;

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("stream {0} already exists")]
    DuplicateStream(String),
    #[error("unknown stream {0}")]
    UnknownStream(String),
    #[error("malformed transaction: {0}")]
    MalformedTransaction(String),
    #[error("unknown txid {0}")]
    UnknownTxid(Txid),
    #[error("transaction {0} was already published")]
    DuplicateTransaction(Txid),
    #[error("invalid block: {0}")]
    InvalidBlock(String),
    #[error("corrupt chain data: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChainConfig {
    /// Maximum number of transactions moved into one block.
    pub batch_limit: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            batch_limit: DEFAULT_BATCH_LIMIT,
        }
    }
}

/// One entry returned by [`Chain::list_stream_key_items`].
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct KeyItem {
    pub txid: Txid,
    pub value: Vec<u8>,
    /// Position of the transaction in confirmation order, starting at 0.
    pub seq: u64,
}

#[derive(Clone, Copy, Debug)]
struct IndexEntry {
    seq: u32,
    item: u32,
}

#[derive(Debug)]
pub struct Chain {
    config: ChainConfig,
    streams: HashSet<String>,
    blocks: Vec<Block>,
    txs: Vec<Transaction>,
    by_txid: HashMap<Txid, usize>,
    index: HashMap<String, HashMap<Vec<u8>, Vec<IndexEntry>>>,
    pending: VecDeque<Transaction>,
    pending_ids: HashSet<Txid>,
    size_bytes: u64,
    sink: Option<File>,
}

impl Chain {
    /// In-memory chain holding only the genesis block.
    pub fn new(config: ChainConfig) -> Self {
        let mut chain = Self::empty(config);
        chain.apply(Block::genesis(), Vec::new());
        chain
    }

    fn empty(config: ChainConfig) -> Self {
        assert!(config.batch_limit >= 1, "batch limit must be at least 1");
        Self {
            config,
            streams: HashSet::new(),
            blocks: Vec::new(),
            txs: Vec::new(),
            by_txid: HashMap::new(),
            index: HashMap::new(),
            pending: VecDeque::new(),
            pending_ids: HashSet::new(),
            size_bytes: 0,
            sink: None,
        }
    }

    /// Opens a file-backed chain, creating the file with a genesis block if it
    /// does not exist. Every later confirmed block is appended to the file.
    ///
    /// Loading does not check hashes; a tampered file that still parses loads
    /// and is reported by [`Chain::verify_chain`].
    pub fn open(path: impl AsRef<Path>, config: ChainConfig) -> Result<Self, LedgerError> {
        let path = path.as_ref();
        if path.exists() {
            let mut bytes = Vec::new();
            File::open(path)?.read_to_end(&mut bytes)?;
            let mut chain = Self::from_bytes(&bytes, config)?;
            chain.sink = Some(OpenOptions::new().append(true).open(path)?);
            Ok(chain)
        } else {
            let mut chain = Self::new(config);
            let mut file = File::create(path)?;
            file.write_all(&chain.to_bytes())?;
            file.flush()?;
            chain.sink = Some(file);
            Ok(chain)
        }
    }

    /// Rebuilds a chain from its canonical serialization. Streams referenced
    /// by stored items are created implicitly.
    pub fn from_bytes(bytes: &[u8], config: ChainConfig) -> Result<Self, LedgerError> {
        let mut chain = Self::empty(config);
        let mut reader = wire::Reader::new(bytes);
        while !reader.is_empty() {
            let start = reader.position();
            let block = reader.block_header()?;
            let mut txs = Vec::with_capacity(block.txids.len());
            for &id in &block.txids {
                txs.push(reader.tx_body(id)?);
            }
            for tx in &txs {
                for item in tx.items() {
                    chain.streams.insert(item.stream.as_str().to_owned());
                }
            }
            chain.apply(block, txs);
            debug_assert_eq!(
                chain.size_bytes as usize,
                reader.position(),
                "record starting at {start} mis-sized"
            );
        }
        if chain.blocks.is_empty() {
            return Err(LedgerError::Corrupt("chain has no genesis block".into()));
        }
        Ok(chain)
    }

    /// Canonical serialization of every confirmed block and transaction.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(self.size_bytes as usize);
        let mut next_tx = 0;
        for block in &self.blocks {
            let n = block.txids.len();
            let txs: Vec<&Transaction> = self.txs[next_tx..next_tx + n].iter().collect();
            wire::encode_block_record(&mut buf, block, &txs);
            next_tx += n;
        }
        buf
    }

    pub fn config(&self) -> ChainConfig {
        self.config
    }

    pub fn create_stream(&mut self, name: &StreamName) -> Result<(), LedgerError> {
        if !self.streams.insert(name.as_str().to_owned()) {
            return Err(LedgerError::DuplicateStream(name.to_string()));
        }
        Ok(())
    }

    /// Creates the stream unless it already exists. Returns true if created.
    pub fn ensure_stream(&mut self, name: &StreamName) -> bool {
        self.streams.insert(name.as_str().to_owned())
    }

    pub fn has_stream(&self, name: &str) -> bool {
        self.streams.contains(name)
    }

    pub fn streams(&self) -> impl Iterator<Item = &str> {
        self.streams.iter().map(String::as_str)
    }

    /// Checks that `tx` could be published: consistent txid, non-empty items,
    /// known streams, and not already pending or confirmed here.
    pub fn validate(&self, tx: &Transaction) -> Result<(), LedgerError> {
        if tx.items().is_empty() {
            return Err(LedgerError::MalformedTransaction(
                "transaction has no items".into(),
            ));
        }
        if !tx.is_consistent() {
            return Err(LedgerError::MalformedTransaction(format!(
                "txid {} does not match contents",
                tx.txid()
            )));
        }
        if let Some(item) = tx.items().iter().find(|i| i.key.is_empty()) {
            return Err(LedgerError::MalformedTransaction(format!(
                "empty key in stream {}",
                item.stream
            )));
        }
        if let Some(item) = tx.items().iter().find(|i| !self.has_stream(i.stream.as_str())) {
            return Err(LedgerError::UnknownStream(item.stream.to_string()));
        }
        if self.by_txid.contains_key(&tx.txid()) || self.pending_ids.contains(&tx.txid()) {
            return Err(LedgerError::DuplicateTransaction(tx.txid()));
        }
        Ok(())
    }

    /// Queues a transaction for the next block. It stays invisible to reads
    /// until confirmed.
    pub fn publish(&mut self, tx: Transaction) -> Result<Txid, LedgerError> {
        self.validate(&tx)?;
        let id = tx.txid();
        self.pending_ids.insert(id);
        self.pending.push_back(tx);
        Ok(id)
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    /// Moves up to `batch_limit` pending transactions into a new block.
    /// An empty pending queue yields an empty block.
    pub fn confirm_block(&mut self) -> Result<Block, LedgerError> {
        let n = self.pending.len().min(self.config.batch_limit);
        let txs: Vec<Transaction> = self.pending.drain(..n).collect();
        for tx in &txs {
            self.pending_ids.remove(&tx.txid());
        }
        let block = self.next_block(txs.iter().map(Transaction::txid).collect());
        self.persist(&block, &txs)?;
        self.apply(block.clone(), txs);
        Ok(block)
    }

    /// Header of the block that would extend the current tip with `txids`.
    pub fn next_block(&self, txids: Vec<Txid>) -> Block {
        Block::new(self.blocks.len() as u64, self.tip_hash(), txids)
    }

    /// Appends a block produced elsewhere, after checking its linkage, hash
    /// and transactions against this chain.
    pub fn append_block(&mut self, block: Block, txs: Vec<Transaction>) -> Result<(), LedgerError> {
        if block.height != self.blocks.len() as u64 {
            return Err(LedgerError::InvalidBlock(format!(
                "height {} does not extend tip at {}",
                block.height,
                self.height()
            )));
        }
        if block.prev_hash != self.tip_hash() {
            return Err(LedgerError::InvalidBlock("prev_hash does not match tip".into()));
        }
        if !block.hash_is_valid() {
            return Err(LedgerError::InvalidBlock("block hash mismatch".into()));
        }
        if block.txids.len() != txs.len()
            || block.txids.iter().zip(&txs).any(|(id, tx)| *id != tx.txid())
        {
            return Err(LedgerError::InvalidBlock(
                "transactions do not match block txids".into(),
            ));
        }
        let mut seen = HashSet::with_capacity(txs.len());
        for tx in &txs {
            if !seen.insert(tx.txid()) {
                return Err(LedgerError::DuplicateTransaction(tx.txid()));
            }
            if self.by_txid.contains_key(&tx.txid()) {
                return Err(LedgerError::DuplicateTransaction(tx.txid()));
            }
            if !tx.is_consistent() {
                return Err(LedgerError::MalformedTransaction(format!(
                    "txid {} does not match contents",
                    tx.txid()
                )));
            }
            if let Some(item) = tx.items().iter().find(|i| !self.has_stream(i.stream.as_str())) {
                return Err(LedgerError::UnknownStream(item.stream.to_string()));
            }
        }
        if !self.pending_ids.is_empty() {
            self.pending.retain(|t| !seen.contains(&t.txid()));
            self.pending_ids.retain(|id| !seen.contains(id));
        }
        self.persist(&block, &txs)?;
        self.apply(block, txs);
        Ok(())
    }

    fn persist(&mut self, block: &Block, txs: &[Transaction]) -> Result<(), LedgerError> {
        if let Some(file) = self.sink.as_mut() {
            let refs: Vec<&Transaction> = txs.iter().collect();
            let mut buf = Vec::new();
            wire::encode_block_record(&mut buf, block, &refs);
            file.write_all(&buf)?;
            file.flush()?;
        }
        Ok(())
    }

    fn apply(&mut self, block: Block, txs: Vec<Transaction>) {
        self.size_bytes += wire::block_header_len(&block) as u64;
        for tx in txs {
            let seq = self.txs.len();
            self.size_bytes += tx.encoded_len() as u64;
            for (i, item) in tx.items().iter().enumerate() {
                self.index
                    .entry(item.stream.as_str().to_owned())
                    .or_default()
                    .entry(item.key.clone())
                    .or_default()
                    .push(IndexEntry {
                        seq: seq as u32,
                        item: i as u32,
                    });
            }
            self.by_txid.insert(tx.txid(), seq);
            self.txs.push(tx);
        }
        self.blocks.push(block);
    }

    /// All confirmed items in `stream` with exactly `key`, in confirmation
    /// order.
    pub fn list_stream_key_items(&self, stream: &str, key: &[u8]) -> Result<Vec<KeyItem>, LedgerError> {
        if !self.has_stream(stream) {
            return Err(LedgerError::UnknownStream(stream.to_owned()));
        }
        let Some(entries) = self.index.get(stream).and_then(|m| m.get(key)) else {
            return Ok(Vec::new());
        };
        Ok(entries
            .iter()
            .map(|e| {
                let tx = &self.txs[e.seq as usize];
                KeyItem {
                    txid: tx.txid(),
                    value: tx.items()[e.item as usize].value.clone(),
                    seq: e.seq as u64,
                }
            })
            .collect())
    }

    pub fn get_raw_transaction(&self, txid: &Txid) -> Result<&Transaction, LedgerError> {
        self.by_txid
            .get(txid)
            .map(|&seq| &self.txs[seq])
            .ok_or(LedgerError::UnknownTxid(*txid))
    }

    /// Confirmation-order position of a confirmed transaction.
    pub fn position(&self, txid: &Txid) -> Option<u64> {
        self.by_txid.get(txid).map(|&s| s as u64)
    }

    pub fn chain_size_bytes(&self) -> u64 {
        self.size_bytes
    }

    /// Height of the tip block (genesis is 0).
    pub fn height(&self) -> u64 {
        self.blocks.len() as u64 - 1
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn tip_hash(&self) -> [u8; 32] {
        self.blocks.last().map(|b| b.block_hash).unwrap_or([0; 32])
    }

    pub fn tx_count(&self) -> usize {
        self.txs.len()
    }

    /// Confirmed transactions in confirmation order.
    pub fn transactions(&self) -> impl Iterator<Item = &Transaction> {
        self.txs.iter()
    }

    /// Re-derives every block hash, linkage and txid.
    pub fn verify_chain(&self) -> bool {
        let mut next_tx = 0usize;
        let mut prev = [0u8; 32];
        for (h, block) in self.blocks.iter().enumerate() {
            if block.height != h as u64 || block.prev_hash != prev || !block.hash_is_valid() {
                return false;
            }
            for id in &block.txids {
                match self.txs.get(next_tx) {
                    Some(tx) if tx.txid() == *id && tx.is_consistent() => {}
                    _ => return false,
                }
                next_tx += 1;
            }
            prev = block.block_hash;
        }
        next_tx == self.txs.len() && self.by_txid.len() == self.txs.len()
    }

    /// Test hook: flips one byte of a confirmed item's key-then-value bytes
    /// in place, leaving hashes and the index untouched.
    #[doc(hidden)]
    pub fn tamper_item_byte(&mut self, txid: &Txid, item: usize, offset: usize) -> bool {
        let Some(&seq) = self.by_txid.get(txid) else {
            return false;
        };
        let Some(item) = self.txs[seq].items_mut().get_mut(item) else {
            return false;
        };
        let key_len = item.key.len();
        let byte = if offset < key_len {
            item.key.get_mut(offset)
        } else {
            item.value.get_mut(offset - key_len)
        };
        match byte {
            Some(b) => {
                *b ^= 0x01;
                true
            }
            None => false,
        }
    }
}
