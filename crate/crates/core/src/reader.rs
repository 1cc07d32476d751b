//! Opens container files and reconstructs column values.

use std::collections::HashMap;
use std::fs::File;
use std::io;
use std::ops::Range;
use std::path::Path;
use std::time::{Duration, Instant};

use crate::codec::{CodecError, Dictionary, FrameCodec};
use crate::footer::{BasketDirectoryEntry, FileFooter, FooterError, FILE_MAGIC, TAIL_LEN, TRAILER_MAGIC};
use crate::model::{ColumnSchema, ColumnValues, ModelError, OFFSET_WIDTH};
use crate::precond::PrecondId;

#[derive(Debug, thiserror::Error)]
pub enum ReadError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("bad magic: {0}")]
    BadMagic(String),
    #[error("corrupt footer: {0}")]
    CorruptFooter(String),
    #[error("directory gap: {0}")]
    DirectoryGap(String),
    #[error("column {0:?} needs a dictionary")]
    MissingDictionary(String),
    #[error("dictionary for column {column:?} has id {found:?}, file expects {expected}")]
    DictionaryMismatch {
        column: String,
        expected: u32,
        found: Option<u32>,
    },
    #[error("no column named {0:?}")]
    UnknownColumn(String),
    #[error("event range {start}..{end} is outside 0..{total}")]
    BadRange { start: u64, end: u64, total: u64 },
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Precond(#[from] crate::precond::PrecondError),
}

impl From<FooterError> for ReadError {
    fn from(e: FooterError) -> Self {
        match e {
            FooterError::Corrupt(m) => ReadError::CorruptFooter(m),
            FooterError::Gap(m) => ReadError::DirectoryGap(m),
        }
    }
}

/// Positioned reads over a shared, immutable byte source.
pub trait ByteSource: Send + Sync {
    fn len(&self) -> u64;
    fn read_exact_at(&self, buf: &mut [u8], offset: u64) -> io::Result<()>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl ByteSource for Vec<u8> {
    fn len(&self) -> u64 {
        self.as_slice().len() as u64
    }

    fn read_exact_at(&self, buf: &mut [u8], offset: u64) -> io::Result<()> {
        let start = usize::try_from(offset).map_err(|_| io::ErrorKind::UnexpectedEof)?;
        let src = self
            .get(start..start + buf.len())
            .ok_or(io::ErrorKind::UnexpectedEof)?;
        buf.copy_from_slice(src);
        Ok(())
    }
}

struct FileSource {
    file: File,
    len: u64,
}

impl ByteSource for FileSource {
    fn len(&self) -> u64 {
        self.len
    }

    #[cfg(unix)]
    fn read_exact_at(&self, buf: &mut [u8], offset: u64) -> io::Result<()> {
        std::os::unix::fs::FileExt::read_exact_at(&self.file, buf, offset)
    }

    #[cfg(windows)]
    fn read_exact_at(&self, mut buf: &mut [u8], mut offset: u64) -> io::Result<()> {
        use std::os::windows::fs::FileExt;
        while !buf.is_empty() {
            match self.file.seek_read(buf, offset)? {
                0 => return Err(io::ErrorKind::UnexpectedEof.into()),
                n => {
                    buf = &mut buf[n..];
                    offset += n as u64;
                }
            }
        }
        Ok(())
    }
}

/// An open container. Immutable; `read_column` may be called concurrently.
pub struct ReaderHandle {
    footer: FileFooter,
    source: Box<dyn ByteSource>,
    dictionaries: Vec<Option<Dictionary>>,
}

/// Byte totals and timing from [`ReaderHandle::scan_all`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScanSummary {
    /// Uncompressed bytes per column (data plus offsets).
    pub column_bytes: Vec<u64>,
    pub column_data_bytes: Vec<u64>,
    pub column_offsets_bytes: Vec<u64>,
    /// Time spent decompressing, inverting pre-conditioners and deserializing.
    pub column_elapsed: Vec<Duration>,
    pub elapsed: Duration,
}

impl ScanSummary {
    pub fn total_bytes(&self) -> u64 {
        self.column_bytes.iter().sum()
    }

    /// Uncompressed MB (10^6 bytes) per second.
    pub fn throughput_mb_s(&self) -> f64 {
        mb_per_s(self.total_bytes(), self.elapsed)
    }
}

pub fn mb_per_s(bytes: u64, elapsed: Duration) -> f64 {
    bytes as f64 / 1e6 / elapsed.as_secs_f64().max(1e-9)
}

impl ReaderHandle {
    /// Opens `path`. `dictionaries` maps column names to sidecar files.
    pub fn open(path: impl AsRef<Path>, dictionaries: &HashMap<String, std::path::PathBuf>) -> Result<Self, ReadError> {
        let file = File::open(path)?;
        let len = file.metadata()?.len();
        let mut loaded = HashMap::new();
        for (column, p) in dictionaries {
            loaded.insert(column.clone(), Dictionary::from_bytes(std::fs::read(p)?));
        }
        Self::from_source(Box::new(FileSource { file, len }), &loaded)
    }

    pub fn from_source(
        source: Box<dyn ByteSource>,
        dictionaries: &HashMap<String, Dictionary>,
    ) -> Result<Self, ReadError> {
        let len = source.len();
        let min_len = (FILE_MAGIC.len() + TAIL_LEN) as u64;
        if len < min_len {
            return Err(ReadError::BadMagic(format!("file of {len} bytes is too short")));
        }
        let mut magic = [0u8; 8];
        source.read_exact_at(&mut magic, 0)?;
        if magic != FILE_MAGIC {
            return Err(ReadError::BadMagic(format!("header magic {magic:02X?}")));
        }
        let mut tail = [0u8; TAIL_LEN];
        source.read_exact_at(&mut tail, len - TAIL_LEN as u64)?;
        if tail[8..] != TRAILER_MAGIC {
            return Err(ReadError::BadMagic(format!("trailer magic {:02X?}", &tail[8..])));
        }
        let footer_len = u64::from_le_bytes(tail[..8].try_into().unwrap());
        if footer_len > len - min_len {
            return Err(ReadError::CorruptFooter(format!(
                "footer length {footer_len} exceeds file size {len}"
            )));
        }
        let footer_start = len - TAIL_LEN as u64 - footer_len;
        let mut json = vec![0u8; footer_len as usize];
        source.read_exact_at(&mut json, footer_start)?;
        let footer: FileFooter =
            serde_json::from_slice(&json).map_err(|e| ReadError::CorruptFooter(e.to_string()))?;
        footer.validate(FILE_MAGIC.len() as u64..footer_start)?;

        if let Some(name) = dictionaries.keys().find(|n| footer.schema.index_of(n).is_none()) {
            return Err(ReadError::UnknownColumn(name.clone()));
        }
        let mut dicts = Vec::with_capacity(footer.schema.len());
        for (col, s) in footer.columns().iter().zip(&footer.settings.columns) {
            let dict = dictionaries.get(&col.name).cloned();
            if let Some(expected) = s.dictionary_id {
                let Some(d) = &dict else {
                    return Err(ReadError::MissingDictionary(col.name.clone()));
                };
                if expected != 0 && d.id() != Some(expected) {
                    return Err(ReadError::DictionaryMismatch {
                        column: col.name.clone(),
                        expected,
                        found: d.id(),
                    });
                }
            }
            dicts.push(dict);
        }
        Ok(ReaderHandle {
            footer,
            source,
            dictionaries: dicts,
        })
    }

    pub fn footer(&self) -> &FileFooter {
        &self.footer
    }

    pub fn total_events(&self) -> u64 {
        self.footer.total_events
    }

    pub fn column_index(&self, name: &str) -> Result<usize, ReadError> {
        self.footer
            .schema
            .index_of(name)
            .ok_or_else(|| ReadError::UnknownColumn(name.to_string()))
    }

    fn read_basket_bytes(&self, entry: &BasketDirectoryEntry) -> Result<Vec<u8>, ReadError> {
        let mut buf = vec![0u8; entry.framed_len() as usize];
        self.source.read_exact_at(&mut buf, entry.file_offset)?;
        Ok(buf)
    }

    /// Decompresses, inverts pre-conditioning and deserializes one basket.
    fn decode_basket(
        &self,
        codec: &mut FrameCodec,
        entry: &BasketDirectoryEntry,
        framed: &[u8],
    ) -> Result<ColumnValues, ReadError> {
        let col: &ColumnSchema = &self.footer.columns()[entry.column_index];
        let dict = self.dictionaries[entry.column_index].as_ref();
        let (data_frames, offset_frames) = framed.split_at(entry.framed_data_len as usize);
        let precond = entry.precond_applied;

        let invert = |blob: Vec<u8>, width: usize| -> Result<Vec<u8>, ReadError> {
            match precond {
                PrecondId::None => Ok(blob),
                p => Ok(p.invert(&blob, width)?),
            }
        };
        let data = codec.decompress_buffer(data_frames, entry.uncompressed_data_len as usize, dict)?;
        let data = invert(data, col.width())?;
        let offsets = if col.is_variable() {
            let o = codec.decompress_buffer(offset_frames, entry.uncompressed_offsets_len as usize, dict)?;
            Some(invert(o, OFFSET_WIDTH)?)
        } else {
            None
        };
        let values = ColumnValues::from_blobs(col, &data, offsets.as_deref())?;
        if values.event_count() as u64 != entry.event_count {
            return Err(ModelError::MalformedOffsets(format!(
                "basket at {} decodes to {} events, directory says {}",
                entry.file_offset,
                values.event_count(),
                entry.event_count
            ))
            .into());
        }
        Ok(values)
    }

    /// Values of `column` for events in `range`.
    pub fn read_column(&self, column: usize, range: Range<u64>) -> Result<ColumnValues, ReadError> {
        let col = self
            .footer
            .columns()
            .get(column)
            .ok_or_else(|| ReadError::UnknownColumn(format!("#{column}")))?;
        if range.start > range.end || range.end > self.footer.total_events {
            return Err(ReadError::BadRange {
                start: range.start,
                end: range.end,
                total: self.footer.total_events,
            });
        }
        let mut out = ColumnValues::empty(col);
        if range.is_empty() {
            return Ok(out);
        }
        let mut codec = FrameCodec::new();
        for entry in self.footer.column_entries(column) {
            if entry.end_event() <= range.start || entry.first_event >= range.end {
                continue;
            }
            let framed = self.read_basket_bytes(entry)?;
            let values = self.decode_basket(&mut codec, entry, &framed)?;
            let lo = range.start.max(entry.first_event) - entry.first_event;
            let hi = range.end.min(entry.end_event()) - entry.first_event;
            if lo == 0 && hi == entry.event_count {
                out.extend(values);
            } else {
                out.extend(values.slice(lo as usize..hi as usize));
            }
        }
        Ok(out)
    }

    pub fn read_column_by_name(&self, name: &str, range: Range<u64>) -> Result<ColumnValues, ReadError> {
        self.read_column(self.column_index(name)?, range)
    }

    /// Reads every basket once in file order. Only the decode path is timed;
    /// fetching basket bytes from the source is not.
    pub fn scan_all(&self) -> Result<ScanSummary, ReadError> {
        let n = self.footer.schema.len();
        let mut summary = ScanSummary {
            column_bytes: vec![0; n],
            column_data_bytes: vec![0; n],
            column_offsets_bytes: vec![0; n],
            column_elapsed: vec![Duration::ZERO; n],
            elapsed: Duration::ZERO,
        };
        let mut codec = FrameCodec::new();
        for entry in &self.footer.directory {
            let framed = self.read_basket_bytes(entry)?;
            let start = Instant::now();
            let values = self.decode_basket(&mut codec, entry, &framed)?;
            let took = start.elapsed();
            drop(std::hint::black_box(values));
            let c = entry.column_index;
            summary.column_elapsed[c] += took;
            summary.elapsed += took;
            summary.column_bytes[c] += entry.uncompressed_len();
            summary.column_data_bytes[c] += entry.uncompressed_data_len;
            summary.column_offsets_bytes[c] += entry.uncompressed_offsets_len;
        }
        Ok(summary)
    }
}
