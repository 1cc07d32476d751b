//! Columnar event storage with a basket/cluster layout.
//!
//! Events are stored column by column. Each column is cut into *baskets*
//! covering contiguous event ranges; every basket is optionally
//! pre-conditioned ([`precond`]) and compressed into 9-byte-header frames
//! ([`codec`]). [`writer`] decides where baskets end, either per column by
//! size or for all columns at event-cluster boundaries, and [`reader`]
//! reverses the pipeline. [`bench`] generates synthetic event data and
//! measures compression ratio and throughput across codecs, levels,
//! pre-conditioners and flush policies.

pub mod bench;
pub mod codec;
pub mod footer;
pub mod model;
pub mod precond;
pub mod reader;
pub mod writer;

pub use codec::{CodecError, CodecId, CompressionSettings, Dictionary};
pub use footer::{BasketDirectoryEntry, FileFooter, FlushPolicy};
pub use model::{Arity, Column, ColumnSchema, ColumnValues, ElementType, EventBatch, Schema};
pub use precond::PrecondId;
pub use reader::{ReadError, ReaderHandle, ScanSummary};
pub use writer::{BasketWriter, ColumnSettings, WriteError};
