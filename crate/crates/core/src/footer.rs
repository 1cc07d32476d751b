//! Container layout and footer metadata.
//!
//! ```text
//! [8-byte magic "BKIO\0\x01\0\0"]
//! [baskets: concatenated frame sequences]
//! [footer JSON]
//! [8-byte LE footer length]
//! [4-byte trailer "OIKB"]
//! ```

use serde::{Deserialize, Serialize};

use crate::codec::CodecId;
use crate::model::{ColumnSchema, Schema};
use crate::precond::PrecondId;

pub const FILE_MAGIC: [u8; 8] = *b"BKIO\x00\x01\x00\x00";
pub const TRAILER_MAGIC: [u8; 4] = *b"OIKB";
/// Footer length field plus trailer magic.
pub const TAIL_LEN: usize = 12;

/// When the writer turns buffered events into baskets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FlushPolicy {
    /// Each column flushes as soon as its buffered payload exceeds the limit.
    PerBasket { max_basket_bytes: usize },
    /// All columns flush together every `events_per_cluster` events.
    OnlyAtCluster { events_per_cluster: usize },
}

impl FlushPolicy {
    pub const MIN_BASKET_BYTES: usize = 1024;

    pub fn validate(&self) -> Result<(), String> {
        match *self {
            FlushPolicy::PerBasket { max_basket_bytes } if max_basket_bytes < Self::MIN_BASKET_BYTES => Err(
                format!("max_basket_bytes must be at least {}, got {max_basket_bytes}", Self::MIN_BASKET_BYTES),
            ),
            FlushPolicy::OnlyAtCluster { events_per_cluster: 0 } => {
                Err("events_per_cluster must be at least 1".into())
            }
            _ => Ok(()),
        }
    }

    /// Short label such as `cluster:1000` or `basket:32768`.
    pub fn label(&self) -> String {
        match self {
            FlushPolicy::PerBasket { max_basket_bytes } => format!("basket:{max_basket_bytes}"),
            FlushPolicy::OnlyAtCluster { events_per_cluster } => format!("cluster:{events_per_cluster}"),
        }
    }

    pub fn parse(s: &str) -> Result<Self, String> {
        let (kind, n) = s
            .split_once(':')
            .ok_or_else(|| format!("expected cluster:N or basket:BYTES, got {s:?}"))?;
        let n: usize = n.trim().parse().map_err(|e| format!("bad number in {s:?}: {e}"))?;
        let policy = match kind.trim() {
            "cluster" => FlushPolicy::OnlyAtCluster { events_per_cluster: n },
            "basket" => FlushPolicy::PerBasket { max_basket_bytes: n },
            other => return Err(format!("unknown flush policy {other:?}")),
        };
        policy.validate()?;
        Ok(policy)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasketDirectoryEntry {
    pub column_index: usize,
    pub first_event: u64,
    pub event_count: u64,
    pub file_offset: u64,
    pub framed_data_len: u64,
    /// Zero for fixed columns.
    pub framed_offsets_len: u64,
    pub uncompressed_data_len: u64,
    pub uncompressed_offsets_len: u64,
    pub codec: CodecId,
    pub level: i32,
    pub precond_applied: PrecondId,
}

impl BasketDirectoryEntry {
    pub fn framed_len(&self) -> u64 {
        self.framed_data_len + self.framed_offsets_len
    }

    pub fn uncompressed_len(&self) -> u64 {
        self.uncompressed_data_len + self.uncompressed_offsets_len
    }

    pub fn end_event(&self) -> u64 {
        self.first_event + self.event_count
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSettingsSummary {
    pub codec: CodecId,
    pub level: i32,
    pub precond: PrecondId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dictionary_id: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SettingsSummary {
    pub policy: FlushPolicy,
    pub columns: Vec<ColumnSettingsSummary>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileFooter {
    pub schema: Schema,
    pub total_events: u64,
    /// Exclusive end event of every cluster.
    pub clusters: Vec<u64>,
    pub directory: Vec<BasketDirectoryEntry>,
    pub settings: SettingsSummary,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum FooterError {
    #[error("corrupt footer: {0}")]
    Corrupt(String),
    #[error("directory gap: {0}")]
    Gap(String),
}

impl FileFooter {
    pub fn columns(&self) -> &[ColumnSchema] {
        self.schema.columns()
    }

    /// Directory entries of one column, in event order.
    pub fn column_entries(&self, column: usize) -> impl Iterator<Item = &BasketDirectoryEntry> {
        self.directory.iter().filter(move |e| e.column_index == column)
    }

    /// Checks the structural invariants a reader relies on.
    ///
    /// `basket_region` is the byte range baskets may occupy in the file.
    pub fn validate(&self, basket_region: std::ops::Range<u64>) -> Result<(), FooterError> {
        let corrupt = |m: String| Err(FooterError::Corrupt(m));
        if let Err(e) = Schema::new(self.schema.columns().to_vec()) {
            return corrupt(e.to_string());
        }
        if self.settings.columns.len() != self.schema.len() {
            return corrupt(format!(
                "{} column settings for {} columns",
                self.settings.columns.len(),
                self.schema.len()
            ));
        }
        if self.clusters.windows(2).any(|w| w[0] >= w[1]) || self.clusters.first() == Some(&0) {
            return corrupt("cluster boundaries are not strictly increasing".into());
        }
        if self.clusters.last().copied().unwrap_or(0) != self.total_events {
            return corrupt("cluster boundaries do not end at total_events".into());
        }
        let mut next_event = vec![0u64; self.schema.len()];
        for (i, e) in self.directory.iter().enumerate() {
            let Some(col) = self.schema.columns().get(e.column_index) else {
                return corrupt(format!("entry {i} names column {}", e.column_index));
            };
            if !col.is_variable() && (e.framed_offsets_len != 0 || e.uncompressed_offsets_len != 0) {
                return corrupt(format!("entry {i}: offsets recorded for fixed column {:?}", col.name));
            }
            let end = e.file_offset.checked_add(e.framed_len());
            if e.file_offset < basket_region.start || end.is_none_or(|end| end > basket_region.end) {
                return corrupt(format!("entry {i} lies outside the basket region"));
            }
            if e.event_count == 0 {
                return corrupt(format!("entry {i} holds no events"));
            }
            let expected = next_event[e.column_index];
            if e.first_event != expected {
                return Err(FooterError::Gap(format!(
                    "column {:?}: basket starts at event {}, expected {expected}",
                    col.name, e.first_event
                )));
            }
            next_event[e.column_index] = e.end_event();
        }
        for (col, &end) in self.schema.columns().iter().zip(&next_event) {
            if end != self.total_events {
                return Err(FooterError::Gap(format!(
                    "column {:?}: baskets cover {end} of {} events",
                    col.name, self.total_events
                )));
            }
        }
        Ok(())
    }

    /// True when every column's basket boundaries are cluster boundaries.
    pub fn baskets_aligned_to_clusters(&self) -> bool {
        self.directory
            .iter()
            .all(|e| self.clusters.binary_search(&e.end_event()).is_ok())
            && (0..self.schema.len()).all(|c| self.column_entries(c).count() == self.clusters.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_labels_round_trip() {
        for p in [
            FlushPolicy::OnlyAtCluster { events_per_cluster: 1000 },
            FlushPolicy::PerBasket { max_basket_bytes: 32768 },
        ] {
            assert_eq!(FlushPolicy::parse(&p.label()).unwrap(), p);
        }
        assert!(FlushPolicy::parse("basket:100").is_err());
        assert!(FlushPolicy::parse("cluster:0").is_err());
        assert!(FlushPolicy::parse("bucket:10").is_err());
    }

    #[test]
    fn magic_bytes() {
        assert_eq!(&FILE_MAGIC, &[b'B', b'K', b'I', b'O', 0, 1, 0, 0]);
        assert_eq!(&TRAILER_MAGIC, b"OIKB");
    }
}
