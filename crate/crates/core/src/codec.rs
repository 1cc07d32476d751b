//! Multi-codec compression behind a fixed 9-byte frame header.
//!
//! Frame layout (all integers little-endian):
//!
//! ```text
//! offset  size  field
//! 0       2     codec tag, ASCII ("RW", "ZL", "XZ", "L4", "ZS")
//! 2       1     method (compression level, 0 for raw frames)
//! 3       3     compressed payload length
//! 6       3     uncompressed length
//! 9       ..    payload
//! ```
//!
//! Both sizes are capped at 16,777,215 bytes, so buffers larger than that
//! are split into several frames by [`compress_buffer`]. When a codec fails
//! to shrink a chunk, the chunk is stored verbatim in a raw frame.

use std::fmt;
use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use zstd::zstd_safe::{self, CCtx, DCtx};

pub const FRAME_HEADER_LEN: usize = 9;

/// Largest payload a single frame can describe (3-byte size fields).
pub const MAX_FRAME_PAYLOAD: usize = 0xFF_FFFF;

pub const MIN_DICTIONARY_SAMPLES: usize = 8;
pub const MIN_DICTIONARY_SAMPLE_BYTES: usize = 1024;
pub const RECOMMENDED_DICTIONARY_SAMPLES: usize = 100;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("cannot frame an empty payload")]
    EmptyPayload,
    #[error("payload of {len} bytes exceeds the {MAX_FRAME_PAYLOAD}-byte frame limit")]
    PayloadTooLarge { len: usize },
    #[error("{codec} failure: {message}")]
    CodecFailure { codec: CodecId, message: String },
    #[error("unknown frame tag {0:02X?}")]
    UnknownTag([u8; 2]),
    #[error("truncated frame: need {needed} bytes, {available} available")]
    TruncatedFrame { needed: usize, available: usize },
    #[error("frame decompressed to {actual} bytes, header says {expected}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("frames decompressed to {actual} bytes in total, expected {expected}")]
    TotalSizeMismatch { expected: usize, actual: usize },
    #[error("level {level} is outside the valid range for {codec}")]
    InvalidLevel { codec: CodecId, level: i32 },
    #[error("dictionaries are only supported with zstd, not {0}")]
    DictionaryNotAllowed(CodecId),
    #[error("dictionary training needs at least {MIN_DICTIONARY_SAMPLES} samples and {MIN_DICTIONARY_SAMPLE_BYTES} bytes, got {count} samples / {bytes} bytes")]
    InsufficientSamples { count: usize, bytes: usize },
    #[error("dictionary training failed: {0}")]
    TrainingFailure(String),
}

/// Compression algorithm, numbered like ROOT's algorithm enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
#[repr(u8)]
pub enum CodecId {
    Raw = 0,
    Deflate = 1,
    Lzma = 2,
    Lz4 = 4,
    Zstd = 5,
}

impl CodecId {
    pub const ALL: [CodecId; 5] = [
        CodecId::Raw,
        CodecId::Deflate,
        CodecId::Lzma,
        CodecId::Lz4,
        CodecId::Zstd,
    ];

    pub const fn tag(self) -> [u8; 2] {
        match self {
            CodecId::Raw => *b"RW",
            CodecId::Deflate => *b"ZL",
            CodecId::Lzma => *b"XZ",
            CodecId::Lz4 => *b"L4",
            CodecId::Zstd => *b"ZS",
        }
    }

    pub fn from_tag(tag: [u8; 2]) -> Option<Self> {
        CodecId::ALL.into_iter().find(|c| c.tag() == tag)
    }

    pub fn name(self) -> &'static str {
        match self {
            CodecId::Raw => "raw",
            CodecId::Deflate => "zlib",
            CodecId::Lzma => "lzma",
            CodecId::Lz4 => "lz4",
            CodecId::Zstd => "zstd",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "raw" | "none" => Some(CodecId::Raw),
            "zlib" | "deflate" => Some(CodecId::Deflate),
            "lzma" | "xz" => Some(CodecId::Lzma),
            "lz4" => Some(CodecId::Lz4),
            "zstd" => Some(CodecId::Zstd),
            _ => None,
        }
    }

    pub fn levels(self) -> std::ops::RangeInclusive<i32> {
        match self {
            CodecId::Raw => 0..=0,
            CodecId::Deflate => 1..=9,
            CodecId::Lzma => 0..=9,
            CodecId::Lz4 => 1..=12,
            CodecId::Zstd => 1..=22,
        }
    }

    pub fn default_level(self) -> i32 {
        match self {
            CodecId::Raw => 0,
            CodecId::Deflate => 6,
            CodecId::Lzma => 6,
            CodecId::Lz4 => 1,
            CodecId::Zstd => 3,
        }
    }

    fn failure(self, err: impl fmt::Display) -> CodecError {
        CodecError::CodecFailure {
            codec: self,
            message: err.to_string(),
        }
    }
}

impl fmt::Display for CodecId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl From<CodecId> for u8 {
    fn from(c: CodecId) -> u8 {
        c as u8
    }
}

impl TryFrom<u8> for CodecId {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, String> {
        CodecId::ALL
            .into_iter()
            .find(|c| *c as u8 == v)
            .ok_or_else(|| format!("unknown codec id {v}"))
    }
}

/// A trained zstd dictionary. Immutable and cheap to clone.
#[derive(Clone, PartialEq, Eq)]
pub struct Dictionary {
    bytes: Arc<[u8]>,
}

impl Dictionary {
    pub fn from_bytes(bytes: impl Into<Vec<u8>>) -> Self {
        Dictionary {
            bytes: bytes.into().into(),
        }
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    /// The zstd dictionary id, or `None` for raw-content dictionaries.
    pub fn id(&self) -> Option<u32> {
        zstd_safe::get_dict_id_from_dict(&self.bytes).map(|id| id.get())
    }
}

impl fmt::Debug for Dictionary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dictionary")
            .field("len", &self.bytes.len())
            .field("id", &self.id())
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompressionSettings {
    pub codec: CodecId,
    pub level: i32,
    pub dictionary: Option<Dictionary>,
}

impl CompressionSettings {
    pub fn new(codec: CodecId, level: i32) -> Result<Self, CodecError> {
        let settings = CompressionSettings {
            codec,
            level,
            dictionary: None,
        };
        settings.validate()?;
        Ok(settings)
    }

    pub fn with_default_level(codec: CodecId) -> Self {
        CompressionSettings {
            codec,
            level: codec.default_level(),
            dictionary: None,
        }
    }

    pub fn raw() -> Self {
        Self::with_default_level(CodecId::Raw)
    }

    pub fn with_dictionary(mut self, dictionary: Dictionary) -> Result<Self, CodecError> {
        self.dictionary = Some(dictionary);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        if !self.codec.levels().contains(&self.level) {
            return Err(CodecError::InvalidLevel {
                codec: self.codec,
                level: self.level,
            });
        }
        if self.dictionary.is_some() && self.codec != CodecId::Zstd {
            return Err(CodecError::DictionaryNotAllowed(self.codec));
        }
        Ok(())
    }
}

impl Default for CompressionSettings {
    fn default() -> Self {
        Self::with_default_level(CodecId::Zstd)
    }
}

/// Parsed 9-byte frame header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameHeader {
    pub codec: CodecId,
    pub method: u8,
    pub compressed_len: usize,
    pub uncompressed_len: usize,
}

fn put_u24(out: &mut [u8], v: usize) {
    debug_assert!(v <= MAX_FRAME_PAYLOAD);
    out.copy_from_slice(&(v as u32).to_le_bytes()[..3]);
}

fn get_u24(b: &[u8]) -> usize {
    b[0] as usize | (b[1] as usize) << 8 | (b[2] as usize) << 16
}

impl FrameHeader {
    pub fn encode(&self) -> [u8; FRAME_HEADER_LEN] {
        let mut h = [0u8; FRAME_HEADER_LEN];
        h[..2].copy_from_slice(&self.codec.tag());
        h[2] = self.method;
        put_u24(&mut h[3..6], self.compressed_len);
        put_u24(&mut h[6..9], self.uncompressed_len);
        h
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, CodecError> {
        if bytes.len() < FRAME_HEADER_LEN {
            return Err(CodecError::TruncatedFrame {
                needed: FRAME_HEADER_LEN,
                available: bytes.len(),
            });
        }
        let tag = [bytes[0], bytes[1]];
        let codec = CodecId::from_tag(tag).ok_or(CodecError::UnknownTag(tag))?;
        Ok(FrameHeader {
            codec,
            method: bytes[2],
            compressed_len: get_u24(&bytes[3..6]),
            uncompressed_len: get_u24(&bytes[6..9]),
        })
    }

    pub fn frame_len(&self) -> usize {
        FRAME_HEADER_LEN + self.compressed_len
    }
}

/// Walks the headers of a concatenation of frames.
pub fn frame_headers(frames: &[u8]) -> FrameHeaders<'_> {
    FrameHeaders { rest: frames }
}

pub struct FrameHeaders<'a> {
    rest: &'a [u8],
}

impl Iterator for FrameHeaders<'_> {
    type Item = Result<FrameHeader, CodecError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.rest.is_empty() {
            return None;
        }
        let item = FrameHeader::parse(self.rest).and_then(|h| {
            if self.rest.len() < h.frame_len() {
                Err(CodecError::TruncatedFrame {
                    needed: h.frame_len(),
                    available: self.rest.len(),
                })
            } else {
                Ok(h)
            }
        });
        match &item {
            Ok(h) => self.rest = &self.rest[h.frame_len()..],
            Err(_) => self.rest = &[],
        }
        Some(item)
    }
}

// zstd-safe writes a bare Vec from index 0; a cursor at the end appends.
fn appending(out: &mut Vec<u8>) -> std::io::Cursor<&mut Vec<u8>> {
    let end = out.len() as u64;
    let mut cursor = std::io::Cursor::new(out);
    cursor.set_position(end);
    cursor
}

/// Compression and decompression with reusable zstd contexts.
///
/// Not `Sync`; create one per thread.
pub struct FrameCodec {
    cctx: Option<CCtx<'static>>,
    dctx: Option<DCtx<'static>>,
}

impl Default for FrameCodec {
    fn default() -> Self {
        Self::new()
    }
}

impl FrameCodec {
    pub fn new() -> Self {
        FrameCodec {
            cctx: None,
            dctx: None,
        }
    }

    /// Appends one frame holding `payload` to `out`.
    pub fn compress_frame_into(
        &mut self,
        payload: &[u8],
        settings: &CompressionSettings,
        out: &mut Vec<u8>,
    ) -> Result<(), CodecError> {
        if payload.is_empty() {
            return Err(CodecError::EmptyPayload);
        }
        if payload.len() > MAX_FRAME_PAYLOAD {
            return Err(CodecError::PayloadTooLarge { len: payload.len() });
        }
        settings.validate()?;

        let start = out.len();
        out.extend_from_slice(&[0u8; FRAME_HEADER_LEN]);
        let compressed = if settings.codec == CodecId::Raw {
            false
        } else {
            self.encode(payload, settings, out)?;
            // a frame that does not shrink its payload is stored raw instead
            if out.len() - start - FRAME_HEADER_LEN >= payload.len() {
                out.truncate(start + FRAME_HEADER_LEN);
                false
            } else {
                true
            }
        };
        let header = if compressed {
            FrameHeader {
                codec: settings.codec,
                method: settings.level as u8,
                compressed_len: out.len() - start - FRAME_HEADER_LEN,
                uncompressed_len: payload.len(),
            }
        } else {
            out.extend_from_slice(payload);
            FrameHeader {
                codec: CodecId::Raw,
                method: 0,
                compressed_len: payload.len(),
                uncompressed_len: payload.len(),
            }
        };
        out[start..start + FRAME_HEADER_LEN].copy_from_slice(&header.encode());
        Ok(())
    }

    fn encode(
        &mut self,
        payload: &[u8],
        settings: &CompressionSettings,
        out: &mut Vec<u8>,
    ) -> Result<(), CodecError> {
        let codec = settings.codec;
        let level = settings.level;
        match codec {
            CodecId::Raw => out.extend_from_slice(payload),
            CodecId::Deflate => {
                let mut enc = flate2::write::ZlibEncoder::new(
                    &mut *out,
                    flate2::Compression::new(level as u32),
                );
                enc.write_all(payload).map_err(|e| codec.failure(e))?;
                enc.finish().map_err(|e| codec.failure(e))?;
            }
            CodecId::Lzma => {
                let stream = xz2::stream::Stream::new_easy_encoder(level as u32, xz2::stream::Check::None)
                    .map_err(|e| codec.failure(e))?;
                let mut enc = xz2::write::XzEncoder::new_stream(&mut *out, stream);
                enc.write_all(payload).map_err(|e| codec.failure(e))?;
                enc.finish().map_err(|e| codec.failure(e))?;
            }
            CodecId::Lz4 => {
                let mode = if level <= 1 {
                    lz4::block::CompressionMode::DEFAULT
                } else {
                    lz4::block::CompressionMode::HIGHCOMPRESSION(level)
                };
                let block = lz4::block::compress(payload, Some(mode), false)
                    .map_err(|e| codec.failure(e))?;
                out.extend_from_slice(&block);
            }
            CodecId::Zstd => {
                let cctx = self.cctx.get_or_insert_with(CCtx::create);
                out.reserve(zstd_safe::compress_bound(payload.len()));
                let res = match &settings.dictionary {
                    Some(dict) => cctx.compress_using_dict(&mut appending(out), payload, dict.as_bytes(), level),
                    None => cctx.compress(&mut appending(out), payload, level),
                };
                res.map_err(|code| codec.failure(zstd_safe::get_error_name(code)))?;
            }
        }
        Ok(())
    }

    /// Decodes the frame at the start of `frame`, appending its payload to
    /// `out`. Returns the number of input bytes consumed.
    pub fn decompress_frame_into(
        &mut self,
        frame: &[u8],
        dictionary: Option<&Dictionary>,
        out: &mut Vec<u8>,
    ) -> Result<usize, CodecError> {
        let header = FrameHeader::parse(frame)?;
        if frame.len() < header.frame_len() {
            return Err(CodecError::TruncatedFrame {
                needed: header.frame_len(),
                available: frame.len(),
            });
        }
        let body = &frame[FRAME_HEADER_LEN..header.frame_len()];
        let expected = header.uncompressed_len;
        let start = out.len();
        let codec = header.codec;
        match codec {
            CodecId::Raw => out.extend_from_slice(body),
            CodecId::Deflate => {
                flate2::read::ZlibDecoder::new(body)
                    .take(expected as u64 + 1)
                    .read_to_end(out)
                    .map_err(|e| codec.failure(e))?;
            }
            CodecId::Lzma => {
                xz2::read::XzDecoder::new(body)
                    .take(expected as u64 + 1)
                    .read_to_end(out)
                    .map_err(|e| codec.failure(e))?;
            }
            CodecId::Lz4 => {
                out.resize(start + expected, 0);
                let n = lz4::block::decompress_to_buffer(body, Some(expected as i32), &mut out[start..])
                    .map_err(|e| codec.failure(e))?;
                out.truncate(start + n);
            }
            CodecId::Zstd => {
                if let Ok(Some(size)) = zstd_safe::get_frame_content_size(body) {
                    if size != expected as u64 {
                        return Err(CodecError::SizeMismatch {
                            expected,
                            actual: size as usize,
                        });
                    }
                }
                let dctx = self.dctx.get_or_insert_with(DCtx::create);
                out.reserve(expected);
                let res = match dictionary {
                    Some(dict) => dctx.decompress_using_dict(&mut appending(out), body, dict.as_bytes()),
                    None => dctx.decompress(&mut appending(out), body),
                };
                res.map_err(|code| codec.failure(zstd_safe::get_error_name(code)))?;
            }
        }
        let actual = out.len() - start;
        if actual != expected {
            out.truncate(start);
            return Err(CodecError::SizeMismatch { expected, actual });
        }
        Ok(header.frame_len())
    }

    /// Frames `payload` in chunks of at most [`MAX_FRAME_PAYLOAD`] bytes.
    pub fn compress_buffer(
        &mut self,
        payload: &[u8],
        settings: &CompressionSettings,
    ) -> Result<Vec<u8>, CodecError> {
        if payload.is_empty() {
            return Err(CodecError::EmptyPayload);
        }
        let mut out = Vec::with_capacity(payload.len() / 2 + FRAME_HEADER_LEN);
        for chunk in payload.chunks(MAX_FRAME_PAYLOAD) {
            self.compress_frame_into(chunk, settings, &mut out)?;
        }
        Ok(out)
    }

    pub fn decompress_buffer(
        &mut self,
        frames: &[u8],
        expected_size: usize,
        dictionary: Option<&Dictionary>,
    ) -> Result<Vec<u8>, CodecError> {
        let mut out = Vec::with_capacity(expected_size);
        let mut pos = 0;
        while pos < frames.len() {
            pos += self.decompress_frame_into(&frames[pos..], dictionary, &mut out)?;
            if out.len() > expected_size {
                break;
            }
        }
        if out.len() != expected_size {
            return Err(CodecError::TotalSizeMismatch {
                expected: expected_size,
                actual: out.len(),
            });
        }
        Ok(out)
    }
}

pub fn compress_frame(payload: &[u8], settings: &CompressionSettings) -> Result<Vec<u8>, CodecError> {
    let mut out = Vec::new();
    FrameCodec::new().compress_frame_into(payload, settings, &mut out)?;
    Ok(out)
}

/// Returns the payload of the first frame in `frame` and the bytes consumed.
pub fn decompress_frame(frame: &[u8]) -> Result<(Vec<u8>, usize), CodecError> {
    decompress_frame_with_dictionary(frame, None)
}

pub fn decompress_frame_with_dictionary(
    frame: &[u8],
    dictionary: Option<&Dictionary>,
) -> Result<(Vec<u8>, usize), CodecError> {
    let mut out = Vec::new();
    let consumed = FrameCodec::new().decompress_frame_into(frame, dictionary, &mut out)?;
    Ok((out, consumed))
}

pub fn compress_buffer(payload: &[u8], settings: &CompressionSettings) -> Result<Vec<u8>, CodecError> {
    FrameCodec::new().compress_buffer(payload, settings)
}

pub fn decompress_buffer(frames: &[u8], expected_size: usize) -> Result<Vec<u8>, CodecError> {
    FrameCodec::new().decompress_buffer(frames, expected_size, None)
}

/// Result of [`train_dictionary`].
#[derive(Debug, Clone)]
pub struct TrainedDictionary {
    pub dictionary: Dictionary,
    /// Set when fewer samples than recommended were supplied.
    pub warning: Option<String>,
}

/// Trains a zstd dictionary of at most `capacity` bytes from `samples`.
pub fn train_dictionary<S: AsRef<[u8]>>(
    samples: &[S],
    capacity: usize,
) -> Result<TrainedDictionary, CodecError> {
    let bytes: usize = samples.iter().map(|s| s.as_ref().len()).sum();
    if samples.len() < MIN_DICTIONARY_SAMPLES || bytes < MIN_DICTIONARY_SAMPLE_BYTES {
        return Err(CodecError::InsufficientSamples {
            count: samples.len(),
            bytes,
        });
    }
    let warning = (samples.len() < RECOMMENDED_DICTIONARY_SAMPLES).then(|| {
        format!(
            "training on {} samples; over {RECOMMENDED_DICTIONARY_SAMPLES} are recommended",
            samples.len()
        )
    });
    if let Some(w) = &warning {
        log::warn!("{w}");
    }
    let blob = zstd::dict::from_samples(samples, capacity)
        .map_err(|e| CodecError::TrainingFailure(e.to_string()))?;
    if blob.len() > capacity {
        return Err(CodecError::TrainingFailure(format!(
            "dictionary of {} bytes exceeds capacity {capacity}",
            blob.len()
        )));
    }
    Ok(TrainedDictionary {
        dictionary: Dictionary::from_bytes(blob),
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn matrix() -> Vec<CompressionSettings> {
        let mut out = vec![CompressionSettings::raw()];
        for (codec, levels) in [
            (CodecId::Deflate, vec![1, 6, 9]),
            (CodecId::Lzma, vec![0, 6]),
            (CodecId::Lz4, vec![1, 9]),
            (CodecId::Zstd, vec![1, 3, 19]),
        ] {
            for level in levels {
                out.push(CompressionSettings::new(codec, level).unwrap());
            }
        }
        out
    }

    fn payloads() -> Vec<Vec<u8>> {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let random: Vec<u8> = (0..5000).map(|_| rng.gen()).collect();
        let text: Vec<u8> = (0..200)
            .flat_map(|i| format!("event {i} pt={:.3} eta={:.2}\n", rng.gen::<f32>() * 50.0, rng.gen::<f32>()).into_bytes())
            .collect();
        vec![vec![0; 4096], random, text, vec![42], b"ab".to_vec()]
    }

    #[test]
    fn header_bytes() {
        let h = FrameHeader {
            codec: CodecId::Zstd,
            method: 3,
            compressed_len: 300,
            uncompressed_len: 0xFF_FFFF,
        };
        let bytes = h.encode();
        assert_eq!(bytes, [b'Z', b'S', 3, 0x2C, 0x01, 0x00, 0xFF, 0xFF, 0xFF]);
        assert_eq!(FrameHeader::parse(&bytes).unwrap(), h);
    }

    #[test]
    fn tags_are_bijective() {
        for c in CodecId::ALL {
            assert_eq!(CodecId::from_tag(c.tag()), Some(c));
            assert_eq!(CodecId::try_from(c as u8), Ok(c));
            assert_eq!(CodecId::from_name(c.name()), Some(c));
        }
        assert!(CodecId::try_from(3).is_err());
    }

    #[test]
    fn empty_payload_rejected() {
        assert_eq!(
            compress_frame(&[], &CompressionSettings::default()),
            Err(CodecError::EmptyPayload)
        );
        assert_eq!(
            compress_buffer(&[], &CompressionSettings::default()),
            Err(CodecError::EmptyPayload)
        );
    }

    #[test]
    fn oversized_frame_rejected() {
        let big = vec![0u8; MAX_FRAME_PAYLOAD + 1];
        assert_eq!(
            compress_frame(&big, &CompressionSettings::raw()),
            Err(CodecError::PayloadTooLarge { len: MAX_FRAME_PAYLOAD + 1 })
        );
    }

    #[test]
    fn zeros_via_zstd() {
        let frame = compress_frame(&[0; 100], &CompressionSettings::new(CodecId::Zstd, 3).unwrap()).unwrap();
        let h = FrameHeader::parse(&frame).unwrap();
        assert_eq!(h.codec, CodecId::Zstd);
        assert_eq!(h.uncompressed_len, 100);
        assert_eq!(&frame[6..9], &[100, 0, 0]);
        assert_eq!(decompress_frame(&frame).unwrap(), (vec![0; 100], frame.len()));
    }

    #[test]
    fn raw_frame() {
        let frame = compress_frame(b"abc", &CompressionSettings::raw()).unwrap();
        assert_eq!(frame, [b'R', b'W', 0, 3, 0, 0, 3, 0, 0, b'a', b'b', b'c']);
        assert_eq!(decompress_frame(&frame).unwrap(), (b"abc".to_vec(), 12));
    }

    #[test]
    fn incompressible_falls_back_to_raw() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data: Vec<u8> = (0..1000).map(|_| rng.gen()).collect();
        for s in matrix() {
            let frame = compress_frame(&data, &s).unwrap();
            assert!(frame.len() <= data.len() + FRAME_HEADER_LEN);
            assert_eq!(&frame[..2], b"RW", "{:?}", s.codec);
        }
    }

    #[test]
    fn round_trip_matrix() {
        for s in matrix() {
            for p in payloads() {
                let frame = compress_frame(&p, &s).unwrap();
                let h = FrameHeader::parse(&frame).unwrap();
                assert_eq!(h.frame_len(), frame.len());
                assert_eq!(h.uncompressed_len, p.len());
                assert!(h.codec == CodecId::Raw || h.compressed_len < h.uncompressed_len);
                let (back, consumed) = decompress_frame(&frame).unwrap();
                assert_eq!(back, p, "{:?} {}", s.codec, s.level);
                assert_eq!(consumed, frame.len());
            }
        }
    }

    #[test]
    fn corrupted_uncompressed_size() {
        let payload: Vec<u8> = (0..2000u32).map(|i| (i % 7) as u8).collect();
        for s in matrix() {
            let frame = compress_frame(&payload, &s).unwrap();
            let mut bad = frame.clone();
            bad[6] = bad[6].wrapping_add(1);
            assert!(
                matches!(decompress_frame(&bad), Err(CodecError::SizeMismatch { .. })),
                "{:?}: {:?}",
                s.codec,
                decompress_frame(&bad)
            );
        }
    }

    #[test]
    fn unknown_tag_and_truncation() {
        let mut frame = compress_frame(b"hello", &CompressionSettings::raw()).unwrap();
        assert!(matches!(
            decompress_frame(&frame[..frame.len() - 1]),
            Err(CodecError::TruncatedFrame { .. })
        ));
        assert!(matches!(decompress_frame(&frame[..4]), Err(CodecError::TruncatedFrame { .. })));
        frame[0] = b'Q';
        assert_eq!(decompress_frame(&frame), Err(CodecError::UnknownTag(*b"QW")));
    }

    #[test]
    fn invalid_settings() {
        assert!(matches!(
            CompressionSettings::new(CodecId::Zstd, 0),
            Err(CodecError::InvalidLevel { .. })
        ));
        assert!(matches!(
            CompressionSettings::new(CodecId::Raw, 1),
            Err(CodecError::InvalidLevel { .. })
        ));
        let dict = Dictionary::from_bytes(vec![1, 2, 3]);
        assert_eq!(
            CompressionSettings::with_default_level(CodecId::Lz4).with_dictionary(dict),
            Err(CodecError::DictionaryNotAllowed(CodecId::Lz4))
        );
    }

    #[test]
    fn buffer_boundaries() {
        let s = CompressionSettings::raw();
        let exact = vec![1u8; MAX_FRAME_PAYLOAD];
        let framed = compress_buffer(&exact, &s).unwrap();
        assert_eq!(frame_headers(&framed).count(), 1);
        assert_eq!(decompress_buffer(&framed, exact.len()).unwrap(), exact);

        let over = vec![1u8; MAX_FRAME_PAYLOAD + 1];
        let framed = compress_buffer(&over, &s).unwrap();
        let headers: Vec<_> = frame_headers(&framed).map(Result::unwrap).collect();
        assert_eq!(headers.len(), 2);
        assert_eq!(headers[0].uncompressed_len, MAX_FRAME_PAYLOAD);
        assert_eq!(headers[1].uncompressed_len, 1);
        assert_eq!(decompress_buffer(&framed, over.len()).unwrap(), over);
        assert!(matches!(
            decompress_buffer(&framed, over.len() - 1),
            Err(CodecError::TotalSizeMismatch { .. })
        ));
    }

    #[test]
    fn empty_frame_sequence() {
        assert!(decompress_buffer(&[], 0).unwrap().is_empty());
        assert!(matches!(
            decompress_buffer(&[], 3),
            Err(CodecError::TotalSizeMismatch { .. })
        ));
    }

    #[test]
    fn dictionary_needs_samples() {
        let none: Vec<Vec<u8>> = vec![];
        assert!(matches!(
            train_dictionary(&none, 1024),
            Err(CodecError::InsufficientSamples { count: 0, bytes: 0 })
        ));
        let tiny = vec![vec![0u8; 10]; 8];
        assert!(matches!(
            train_dictionary(&tiny, 1024),
            Err(CodecError::InsufficientSamples { .. })
        ));
    }
}
