//! Deterministic multi-node replication.
//!
//! Nodes share one FIFO pool of submitted transactions. Each [`Cluster::round`]
//! lets the next node in a strict round-robin build a block from the eligible
//! head of the pool; the block is then appended to every node's chain, so
//! after a round all chains are byte-identical.

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::ledger::{Block, Chain, ChainConfig, LedgerError, StreamName, Transaction, Txid, DEFAULT_BATCH_LIMIT};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("unknown node {0}")]
    UnknownNode(usize),
    #[error("invalid cluster config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub const DEFAULT_NODES: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClusterConfig {
    pub nodes: usize,
    pub batch_limit: usize,
    /// Rounds a submission waits before it can be included. 1 means the next
    /// round.
    pub confirm_delay: u64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            nodes: DEFAULT_NODES,
            batch_limit: DEFAULT_BATCH_LIMIT,
            confirm_delay: 1,
        }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<(), NetworkError> {
        if self.nodes < 1 {
            return Err(NetworkError::InvalidConfig("node count must be >= 1".into()));
        }
        if self.batch_limit < 1 {
            return Err(NetworkError::InvalidConfig("batch limit must be >= 1".into()));
        }
        if self.confirm_delay < 1 {
            return Err(NetworkError::InvalidConfig("confirmation delay must be >= 1".into()));
        }
        Ok(())
    }

    fn chain_config(&self) -> ChainConfig {
        ChainConfig {
            batch_limit: self.batch_limit,
        }
    }
}

#[derive(Clone, Debug)]
struct Submission {
    eligible_at: u64,
    origin: NodeId,
    tx: Transaction,
}

/// Result of one production round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundOutcome {
    pub producer: NodeId,
    pub block: Block,
}

#[derive(Debug)]
pub struct Cluster {
    config: ClusterConfig,
    nodes: Vec<Chain>,
    pool: VecDeque<Submission>,
    pool_ids: HashSet<Txid>,
    rounds: u64,
    next_producer: usize,
}

/// Path of node `i`'s chain file inside a data directory.
pub fn node_chain_path(dir: &Path, node: usize) -> PathBuf {
    dir.join(format!("node{node}.chain"))
}

impl Cluster {
    pub fn new(config: ClusterConfig) -> Result<Self, NetworkError> {
        config.validate()?;
        let nodes = (0..config.nodes).map(|_| Chain::new(config.chain_config())).collect();
        Ok(Self::with_nodes(config, nodes))
    }

    /// Opens (or creates) one chain file per node under `dir`. Rotation
    /// resumes from node 0's height.
    pub fn open(config: ClusterConfig, dir: impl AsRef<Path>) -> Result<Self, NetworkError> {
        config.validate()?;
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(LedgerError::from)?;
        let nodes = (0..config.nodes)
            .map(|i| Chain::open(node_chain_path(dir, i), config.chain_config()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::with_nodes(config, nodes))
    }

    fn with_nodes(config: ClusterConfig, nodes: Vec<Chain>) -> Self {
        let rounds = nodes[0].height();
        Self {
            next_producer: (rounds % config.nodes as u64) as usize,
            config,
            nodes,
            pool: VecDeque::new(),
            pool_ids: HashSet::new(),
            rounds,
        }
    }

    pub fn config(&self) -> ClusterConfig {
        self.config
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Creates a stream on every node.
    pub fn create_stream(&mut self, name: &StreamName) -> Result<(), NetworkError> {
        if self.nodes.iter().any(|c| c.has_stream(name.as_str())) {
            return Err(LedgerError::DuplicateStream(name.to_string()).into());
        }
        for chain in &mut self.nodes {
            chain.create_stream(name)?;
        }
        Ok(())
    }

    pub fn ensure_stream(&mut self, name: &StreamName) {
        for chain in &mut self.nodes {
            chain.ensure_stream(name);
        }
    }

    fn check_node(&self, node: NodeId) -> Result<(), NetworkError> {
        if node.0 >= self.nodes.len() {
            return Err(NetworkError::UnknownNode(node.0));
        }
        Ok(())
    }

    /// Adds a transaction to the shared pool on behalf of `node`.
    pub fn submit(&mut self, node: NodeId, tx: Transaction) -> Result<Txid, NetworkError> {
        self.check_node(node)?;
        self.nodes[node.0].validate(&tx)?;
        let id = tx.txid();
        if !self.pool_ids.insert(id) {
            return Err(LedgerError::DuplicateTransaction(id).into());
        }
        self.pool.push_back(Submission {
            eligible_at: self.rounds + self.config.confirm_delay - 1,
            origin: node,
            tx,
        });
        Ok(id)
    }

    pub fn pending_len(&self) -> usize {
        self.pool.len()
    }

    /// Number of rounds run so far (equals the height of every chain).
    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    /// Node that will produce the next block.
    pub fn next_producer(&self) -> NodeId {
        NodeId(self.next_producer)
    }

    /// Origin node of each pooled transaction, in pool order.
    pub fn pending_origins(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.pool.iter().map(|s| s.origin)
    }

    /// One production step: the current producer takes up to `batch_limit`
    /// eligible transactions from the head of the pool into a block that is
    /// applied to every node.
    pub fn round(&mut self) -> Result<RoundOutcome, NetworkError> {
        let producer = NodeId(self.next_producer);
        let take = self
            .pool
            .iter()
            .take(self.config.batch_limit)
            .take_while(|s| s.eligible_at <= self.rounds)
            .count();
        let txs: Vec<Transaction> = self.pool.drain(..take).map(|s| s.tx).collect();
        for tx in &txs {
            self.pool_ids.remove(&tx.txid());
        }
        let block = self.nodes[producer.0].next_block(txs.iter().map(Transaction::txid).collect());
        for chain in &mut self.nodes {
            chain.append_block(block.clone(), txs.clone())?;
        }
        self.rounds += 1;
        self.next_producer = (self.next_producer + 1) % self.nodes.len();
        Ok(RoundOutcome { producer, block })
    }

    /// Runs rounds until the pool is empty. Returns the blocks produced.
    pub fn drain(&mut self) -> Result<Vec<RoundOutcome>, NetworkError> {
        let mut out = Vec::new();
        while !self.pool.is_empty() {
            out.push(self.round()?);
        }
        Ok(out)
    }

    /// Read-only view of one node's chain.
    pub fn query_node(&self, node: NodeId) -> Result<&Chain, NetworkError> {
        self.check_node(node)?;
        Ok(&self.nodes[node.0])
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &Chain)> {
        self.nodes.iter().enumerate().map(|(i, c)| (NodeId(i), c))
    }

    /// True when every node's serialized chain is identical.
    pub fn converged(&self) -> bool {
        let first = self.nodes[0].to_bytes();
        self.nodes[1..].iter().all(|c| c.to_bytes() == first)
    }
}
