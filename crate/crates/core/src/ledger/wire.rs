//! Canonical byte encoding for transactions and blocks.
//!
//! Every byte-string is written as a little-endian `u32` length followed by
//! its bytes. Integers are little-endian. The same encoding is used for
//! hashing, size accounting and the on-disk chain file, so a chain file is
//! exactly the concatenation of its block records.

use sha2::{Digest, Sha256};

use super::types::{Block, StreamItem, StreamName, Transaction, Txid};
use super::LedgerError;

pub(crate) fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_bytes(buf: &mut Vec<u8>, bytes: &[u8]) {
    put_u32(buf, bytes.len() as u32);
    buf.extend_from_slice(bytes);
}

pub(crate) fn sha256(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

/// Body of a transaction: publisher node, item count, then each item as
/// (stream, key, value). The txid is the SHA-256 of this body.
pub(crate) fn encode_tx_body(buf: &mut Vec<u8>, publisher: u32, items: &[StreamItem]) {
    put_u32(buf, publisher);
    put_u32(buf, items.len() as u32);
    for item in items {
        put_bytes(buf, item.stream.as_str().as_bytes());
        put_bytes(buf, &item.key);
        put_bytes(buf, &item.value);
    }
}

pub(crate) fn tx_body_len(items: &[StreamItem]) -> usize {
    8 + items
        .iter()
        .map(|i| 12 + i.stream.as_str().len() + i.key.len() + i.value.len())
        .sum::<usize>()
}

pub(crate) fn compute_txid(publisher: u32, items: &[StreamItem]) -> Txid {
    let mut buf = Vec::with_capacity(tx_body_len(items));
    encode_tx_body(&mut buf, publisher, items);
    Txid(sha256(&buf))
}

pub(crate) fn compute_block_hash(height: u64, prev_hash: &[u8; 32], txids: &[Txid]) -> [u8; 32] {
    let mut buf = Vec::with_capacity(8 + 32 + 4 + 32 * txids.len());
    put_u64(&mut buf, height);
    buf.extend_from_slice(prev_hash);
    put_u32(&mut buf, txids.len() as u32);
    for id in txids {
        buf.extend_from_slice(&id.0);
    }
    sha256(&buf)
}

/// Block header record: height, prev_hash, block_hash, txid count, txids.
pub(crate) fn encode_block_header(buf: &mut Vec<u8>, block: &Block) {
    put_u64(buf, block.height);
    buf.extend_from_slice(&block.prev_hash);
    buf.extend_from_slice(&block.block_hash);
    put_u32(buf, block.txids.len() as u32);
    for id in &block.txids {
        buf.extend_from_slice(&id.0);
    }
}

pub(crate) fn block_header_len(block: &Block) -> usize {
    8 + 32 + 32 + 4 + 32 * block.txids.len()
}

/// Full block record as stored on disk: the header followed by the body of
/// every transaction it lists, in order.
pub(crate) fn encode_block_record(buf: &mut Vec<u8>, block: &Block, txs: &[&Transaction]) {
    encode_block_header(buf, block);
    for tx in txs {
        encode_tx_body(buf, tx.publisher(), tx.items());
    }
}

pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.pos >= self.bytes.len()
    }

    pub(crate) fn position(&self) -> usize {
        self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], LedgerError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                LedgerError::Corrupt(format!("truncated record at byte {}", self.pos))
            })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, LedgerError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, LedgerError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn hash(&mut self) -> Result<[u8; 32], LedgerError> {
        Ok(self.take(32)?.try_into().unwrap())
    }

    fn bytes(&mut self) -> Result<&'a [u8], LedgerError> {
        let n = self.u32()? as usize;
        self.take(n)
    }

    pub(crate) fn block_header(&mut self) -> Result<Block, LedgerError> {
        let height = self.u64()?;
        let prev_hash = self.hash()?;
        let block_hash = self.hash()?;
        let count = self.u32()? as usize;
        // Each txid needs 32 bytes; reject counts the remaining input cannot hold.
        if count > (self.bytes.len() - self.pos) / 32 {
            return Err(LedgerError::Corrupt(format!(
                "block {height} claims {count} txids beyond end of input"
            )));
        }
        let mut txids = Vec::with_capacity(count);
        for _ in 0..count {
            txids.push(Txid(self.hash()?));
        }
        Ok(Block {
            height,
            prev_hash,
            block_hash,
            txids,
        })
    }

    /// Reads a transaction body. The returned transaction carries `claimed`
    /// as its txid without recomputing it, so later verification can detect
    /// a body that no longer matches its block listing.
    pub(crate) fn tx_body(&mut self, claimed: Txid) -> Result<Transaction, LedgerError> {
        let publisher = self.u32()?;
        let count = self.u32()? as usize;
        if count > (self.bytes.len() - self.pos) / 12 {
            return Err(LedgerError::Corrupt(format!(
                "transaction claims {count} items beyond end of input"
            )));
        }
        let mut items = Vec::with_capacity(count);
        for _ in 0..count {
            let stream = std::str::from_utf8(self.bytes()?)
                .map_err(|_| LedgerError::Corrupt("stream name is not UTF-8".into()))?;
            let stream = StreamName::new(stream)
                .map_err(|_| LedgerError::Corrupt("empty stream name".into()))?;
            let key = self.bytes()?.to_vec();
            let value = self.bytes()?.to_vec();
            items.push(StreamItem { stream, key, value });
        }
        Ok(Transaction::from_parts_unchecked(claimed, publisher, items))
    }
}
