use std::fmt;

use super::wire;
use super::LedgerError;

/// Content hash identifying a transaction.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Txid(pub [u8; 32]);

impl fmt::Display for Txid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Txid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Txid({self})")
    }
}

/// Name of a stream (a table in the ledger's key-value space).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct StreamName(String);

impl StreamName {
    pub fn new(name: impl Into<String>) -> Result<Self, LedgerError> {
        let name = name.into();
        if name.is_empty() {
            return Err(LedgerError::MalformedTransaction(
                "stream name must not be empty".into(),
            ));
        }
        Ok(Self(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for StreamName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for StreamName {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// One key-value pair published to a stream. The value may be empty.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct StreamItem {
    pub stream: StreamName,
    pub key: Vec<u8>,
    pub value: Vec<u8>,
}

impl StreamItem {
    pub fn new(stream: StreamName, key: impl Into<Vec<u8>>, value: impl Into<Vec<u8>>) -> Self {
        Self {
            stream,
            key: key.into(),
            value: value.into(),
        }
    }
}

/// An ordered list of stream items published by one node, identified by the
/// SHA-256 of its canonical body.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Transaction {
    txid: Txid,
    publisher: u32,
    items: Vec<StreamItem>,
}

impl Transaction {
    /// Builds a transaction and derives its txid. Items must be non-empty and
    /// every key must be non-empty.
    pub fn new(publisher: u32, items: Vec<StreamItem>) -> Result<Self, LedgerError> {
        if items.is_empty() {
            return Err(LedgerError::MalformedTransaction(
                "transaction has no items".into(),
            ));
        }
        if let Some(item) = items.iter().find(|i| i.key.is_empty()) {
            return Err(LedgerError::MalformedTransaction(format!(
                "empty key in stream {}",
                item.stream
            )));
        }
        let txid = wire::compute_txid(publisher, &items);
        Ok(Self {
            txid,
            publisher,
            items,
        })
    }

    pub(crate) fn from_parts_unchecked(txid: Txid, publisher: u32, items: Vec<StreamItem>) -> Self {
        Self {
            txid,
            publisher,
            items,
        }
    }

    pub fn txid(&self) -> Txid {
        self.txid
    }

    pub fn publisher(&self) -> u32 {
        self.publisher
    }

    pub fn items(&self) -> &[StreamItem] {
        &self.items
    }

    /// First item published to `stream`, if any.
    pub fn item(&self, stream: &str) -> Option<&StreamItem> {
        self.items.iter().find(|i| i.stream.as_str() == stream)
    }

    /// True when the stored txid matches the hash of the current contents.
    pub fn is_consistent(&self) -> bool {
        wire::compute_txid(self.publisher, &self.items) == self.txid
    }

    /// Length of the canonical body in bytes.
    pub fn encoded_len(&self) -> usize {
        wire::tx_body_len(&self.items)
    }

    pub(crate) fn items_mut(&mut self) -> &mut Vec<StreamItem> {
        &mut self.items
    }
}

/// A block header. Transactions are referenced by txid; their bodies follow
/// the header in the serialized chain.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Block {
    pub height: u64,
    pub prev_hash: [u8; 32],
    pub block_hash: [u8; 32],
    pub txids: Vec<Txid>,
}

impl Block {
    pub fn new(height: u64, prev_hash: [u8; 32], txids: Vec<Txid>) -> Self {
        let block_hash = wire::compute_block_hash(height, &prev_hash, &txids);
        Self {
            height,
            prev_hash,
            block_hash,
            txids,
        }
    }

    pub fn genesis() -> Self {
        Self::new(0, [0; 32], Vec::new())
    }

    pub fn hash_is_valid(&self) -> bool {
        wire::compute_block_hash(self.height, &self.prev_hash, &self.txids) == self.block_hash
    }
}
