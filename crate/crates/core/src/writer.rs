//! Buffers event batches per column and flushes them as compressed baskets.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::codec::{CodecError, CompressionSettings, FrameCodec};
use crate::footer::{
    BasketDirectoryEntry, ColumnSettingsSummary, FileFooter, FlushPolicy, SettingsSummary,
    FILE_MAGIC, TRAILER_MAGIC,
};
use crate::model::{encode_offsets, EventBatch, Schema, SerializedColumn, OFFSET_WIDTH};
use crate::precond::{PrecondError, PrecondId};

#[derive(Debug, thiserror::Error)]
pub enum WriteError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("basket for column {column:?} exceeds the 4 GiB offset range")]
    BasketTooLarge { column: String },
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Precond(#[from] PrecondError),
    #[error("footer serialization failed: {0}")]
    Footer(#[from] serde_json::Error),
}

/// Compression and pre-conditioning applied to one column.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ColumnSettings {
    pub compression: CompressionSettings,
    pub precond: PrecondId,
}

impl ColumnSettings {
    pub fn new(compression: CompressionSettings, precond: PrecondId) -> Self {
        ColumnSettings { compression, precond }
    }
}

/// The same settings for every column of `schema`.
pub fn uniform_settings(schema: &Schema, settings: &ColumnSettings) -> HashMap<String, ColumnSettings> {
    schema
        .columns()
        .iter()
        .map(|c| (c.name.clone(), settings.clone()))
        .collect()
}

#[derive(Default)]
struct ColumnBuffer {
    data: Vec<u8>,
    offsets: Vec<u32>,
    first_event: u64,
    events: u64,
}

impl ColumnBuffer {
    fn payload_len(&self) -> usize {
        self.data.len() + self.offsets.len() * OFFSET_WIDTH
    }

    /// Appends events `range` of `src`; returns false on offset overflow.
    fn push(&mut self, src: &SerializedColumn, range: std::ops::Range<usize>, variable: bool) -> bool {
        let start = src.event_start(range.start);
        let end = src.event_start(range.end);
        if variable {
            let base = self.data.len();
            if base + (end - start) > u32::MAX as usize {
                return false;
            }
            self.offsets
                .extend((range.start..range.end).map(|e| (base + src.event_start(e) - start) as u32));
        }
        self.data.extend_from_slice(&src.data[start..end]);
        self.events += range.len() as u64;
        true
    }
}

/// Writes a container file basket by basket.
///
/// Not safe for concurrent use; baskets land on disk in flush order.
pub struct BasketWriter<W: Write> {
    sink: W,
    position: u64,
    schema: Schema,
    settings: Vec<ColumnSettings>,
    policy: FlushPolicy,
    buffers: Vec<ColumnBuffer>,
    directory: Vec<BasketDirectoryEntry>,
    clusters: Vec<u64>,
    total_events: u64,
    cluster_fill: usize,
    codec: FrameCodec,
}

impl BasketWriter<BufWriter<File>> {
    /// Creates (or truncates) `path` and writes the file header.
    pub fn create(
        path: impl AsRef<Path>,
        schema: Schema,
        settings: &HashMap<String, ColumnSettings>,
        policy: FlushPolicy,
    ) -> Result<Self, WriteError> {
        let resolved = resolve_settings(&schema, settings, &policy)?;
        let file = File::create(path)?;
        Self::with_resolved(BufWriter::new(file), schema, resolved, policy)
    }
}

fn resolve_settings(
    schema: &Schema,
    settings: &HashMap<String, ColumnSettings>,
    policy: &FlushPolicy,
) -> Result<Vec<ColumnSettings>, WriteError> {
    if schema.is_empty() {
        return Err(WriteError::InvalidSettings("schema has no columns".into()));
    }
    policy.validate().map_err(WriteError::InvalidSettings)?;
    if let Some(extra) = settings.keys().find(|k| schema.index_of(k).is_none()) {
        return Err(WriteError::InvalidSettings(format!(
            "settings given for unknown column {extra:?}"
        )));
    }
    schema
        .columns()
        .iter()
        .map(|c| {
            let s = settings.get(&c.name).ok_or_else(|| {
                WriteError::InvalidSettings(format!("no settings for column {:?}", c.name))
            })?;
            s.compression
                .validate()
                .map_err(|e| WriteError::InvalidSettings(format!("column {:?}: {e}", c.name)))?;
            Ok(s.clone())
        })
        .collect()
}

impl<W: Write> BasketWriter<W> {
    pub fn new(
        sink: W,
        schema: Schema,
        settings: &HashMap<String, ColumnSettings>,
        policy: FlushPolicy,
    ) -> Result<Self, WriteError> {
        let resolved = resolve_settings(&schema, settings, &policy)?;
        Self::with_resolved(sink, schema, resolved, policy)
    }

    fn with_resolved(
        mut sink: W,
        schema: Schema,
        settings: Vec<ColumnSettings>,
        policy: FlushPolicy,
    ) -> Result<Self, WriteError> {
        sink.write_all(&FILE_MAGIC)?;
        let buffers = (0..schema.len()).map(|_| ColumnBuffer::default()).collect();
        Ok(BasketWriter {
            sink,
            position: FILE_MAGIC.len() as u64,
            schema,
            settings,
            policy,
            buffers,
            directory: Vec::new(),
            clusters: Vec::new(),
            total_events: 0,
            cluster_fill: 0,
            codec: FrameCodec::new(),
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    /// Events appended so far, buffered or flushed.
    pub fn total_events(&self) -> u64 {
        self.total_events
    }

    pub fn clusters_flushed(&self) -> usize {
        self.clusters.len()
    }

    /// Events appended since the last cluster boundary (cluster policy) or
    /// the largest per-column backlog (basket policy).
    pub fn buffered_events(&self) -> u64 {
        self.buffers.iter().map(|b| b.events).max().unwrap_or(0)
    }

    pub fn directory(&self) -> &[BasketDirectoryEntry] {
        &self.directory
    }

    pub fn append_events(&mut self, batch: &EventBatch) -> Result<(), WriteError> {
        batch
            .check_schema(&self.schema)
            .map_err(|e| WriteError::SchemaMismatch(e.to_string()))?;
        let n = batch.event_count();
        let serialized: Vec<SerializedColumn> =
            batch.columns().iter().map(|c| c.serialize_with_ends()).collect();

        match self.policy {
            FlushPolicy::PerBasket { max_basket_bytes } => {
                for ev in 0..n {
                    self.total_events += 1;
                    for (c, src) in serialized.iter().enumerate() {
                        self.push(c, src, ev..ev + 1)?;
                        if self.buffers[c].payload_len() > max_basket_bytes {
                            self.flush_column(c)?;
                        }
                    }
                }
            }
            FlushPolicy::OnlyAtCluster { events_per_cluster } => {
                let mut ev = 0;
                while ev < n {
                    let take = (n - ev).min(events_per_cluster - self.cluster_fill);
                    for (c, src) in serialized.iter().enumerate() {
                        self.push(c, src, ev..ev + take)?;
                    }
                    ev += take;
                    self.cluster_fill += take;
                    self.total_events += take as u64;
                    if self.cluster_fill == events_per_cluster {
                        self.flush_cluster()?;
                    }
                }
            }
        }
        Ok(())
    }

    fn push(&mut self, c: usize, src: &SerializedColumn, range: std::ops::Range<usize>) -> Result<(), WriteError> {
        let variable = self.schema.columns()[c].is_variable();
        if !self.buffers[c].push(src, range, variable) {
            return Err(WriteError::BasketTooLarge {
                column: self.schema.columns()[c].name.clone(),
            });
        }
        Ok(())
    }

    fn flush_cluster(&mut self) -> Result<(), WriteError> {
        for c in 0..self.buffers.len() {
            self.flush_column(c)?;
        }
        self.clusters.push(self.total_events);
        self.cluster_fill = 0;
        Ok(())
    }

    fn flush_column(&mut self, c: usize) -> Result<(), WriteError> {
        let buf = std::mem::take(&mut self.buffers[c]);
        let next_first = buf.first_event + buf.events;
        self.buffers[c].first_event = next_first;
        self.buffers[c].data = Vec::with_capacity(buf.data.capacity());
        if buf.events == 0 {
            return Ok(());
        }
        let col = &self.schema.columns()[c];
        let settings = &self.settings[c];
        let width = col.width();
        let offsets_blob = col.is_variable().then(|| encode_offsets(&buf.offsets));

        let mut counts = vec![buf.data.len() / width];
        if col.is_variable() {
            counts.push(buf.offsets.len());
        }
        let precond = settings.precond.effective(&counts);

        let framed_data = frame_blob(&mut self.codec, &buf.data, width, precond, &settings.compression)?;
        let framed_offsets = match &offsets_blob {
            Some(blob) => frame_blob(&mut self.codec, blob, OFFSET_WIDTH, precond, &settings.compression)?,
            None => Vec::new(),
        };

        let entry = BasketDirectoryEntry {
            column_index: c,
            first_event: buf.first_event,
            event_count: buf.events,
            file_offset: self.position,
            framed_data_len: framed_data.len() as u64,
            framed_offsets_len: framed_offsets.len() as u64,
            uncompressed_data_len: buf.data.len() as u64,
            uncompressed_offsets_len: offsets_blob.as_ref().map_or(0, |b| b.len() as u64),
            codec: settings.compression.codec,
            level: settings.compression.level,
            precond_applied: precond,
        };
        self.sink.write_all(&framed_data)?;
        self.sink.write_all(&framed_offsets)?;
        self.position += entry.framed_len();
        self.directory.push(entry);
        Ok(())
    }

    /// Flushes the residual events, writes the footer and returns it along
    /// with the underlying sink.
    pub fn finish(mut self) -> Result<(FileFooter, W), WriteError> {
        match self.policy {
            FlushPolicy::OnlyAtCluster { .. } => {
                if self.cluster_fill > 0 {
                    self.flush_cluster()?;
                }
            }
            FlushPolicy::PerBasket { .. } => {
                for c in 0..self.buffers.len() {
                    self.flush_column(c)?;
                }
                if self.total_events > 0 {
                    self.clusters.push(self.total_events);
                }
            }
        }

        let footer = FileFooter {
            schema: self.schema.clone(),
            total_events: self.total_events,
            clusters: self.clusters.clone(),
            directory: std::mem::take(&mut self.directory),
            settings: SettingsSummary {
                policy: self.policy,
                columns: self
                    .settings
                    .iter()
                    .map(|s| ColumnSettingsSummary {
                        codec: s.compression.codec,
                        level: s.compression.level,
                        precond: s.precond,
                        dictionary_id: s.compression.dictionary.as_ref().map(|d| d.id().unwrap_or(0)),
                    })
                    .collect(),
            },
        };
        let json = serde_json::to_vec(&footer)?;
        self.sink.write_all(&json)?;
        self.sink.write_all(&(json.len() as u64).to_le_bytes())?;
        self.sink.write_all(&TRAILER_MAGIC)?;
        self.sink.flush()?;
        Ok((footer, self.sink))
    }

    pub fn close(self) -> Result<FileFooter, WriteError> {
        self.finish().map(|(footer, _)| footer)
    }
}

fn frame_blob(
    codec: &mut FrameCodec,
    blob: &[u8],
    elem_size: usize,
    precond: PrecondId,
    compression: &CompressionSettings,
) -> Result<Vec<u8>, WriteError> {
    if blob.is_empty() {
        return Ok(Vec::new());
    }
    let framed = if precond == PrecondId::None {
        codec.compress_buffer(blob, compression)?
    } else {
        codec.compress_buffer(&precond.apply(blob, elem_size)?, compression)?
    };
    Ok(framed)
}
