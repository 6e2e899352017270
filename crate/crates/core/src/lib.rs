//! Append-only audit-log ledger for dataset access records.
//!
//! Access-log records are stored one per transaction on a hash-chained,
//! multi-stream key-value ledger replicated across simulated nodes, and
//! answered through point, AND and timestamp-range queries.
//!
//! * [`ledger`]: chain, streams, blocks, verification and persistence.
//! * [`network`]: round-robin block production over N replicated nodes.
//! * [`codec`]: log-line parsing and the baseline/enhanced transaction layouts.
//! * [`tsindex`]: hierarchical timestamp buckets and range decomposition.
//! * [`engine`]: query pipelines, selectivity planning and sorting.
//! * [`oracle`]: naive in-memory reference store.
//! * [`bench`]: synthetic corpora and the benchmark harness.
//! * [`audit`]: a cluster plus an encoding, the usual entry point.
//! * [`cli`]: the `auditchain` command line.
//!
//! See the crate's `examples/` directory for one runnable program per
//! capability.

pub mod audit;
pub mod bench;
pub mod cli;
pub mod codec;
pub mod engine;
pub mod ledger;
pub mod network;
pub mod oracle;
pub mod tsindex;

pub use audit::{AuditError, AuditLog};
pub use codec::{EncodingMode, Field, LogRecord};
pub use engine::{Predicate, ResultSet, SelectivityList, SortOrder};
pub use ledger::{Chain, ChainConfig};
pub use network::{Cluster, ClusterConfig, NodeId};
pub use tsindex::TsIndexParams;
