//! Reversible byte and bit rearrangements applied to basket blobs before
//! compression.
//!
//! All transforms treat the input as `n` elements of `elem_size` bytes.
//!
//! * [`shuffle`] transposes the `n × elem_size` byte matrix: output byte
//!   `j·n + i` is input byte `i·elem_size + j`.
//! * [`byte_stream_split`] produces the same bytes as [`shuffle`]; stream `j`
//!   holds byte `j` of every value.
//! * [`bitshuffle`] goes one level further and emits `8·elem_size` bit planes.
//!   Bit `b = byte·8 + bit` (bit 0 is the least significant bit of a byte) of
//!   elements `0..n` is packed LSB-first into `n/8` bytes, planes in ascending
//!   `b`. It requires `n % 8 == 0`.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PrecondError {
    #[error("buffer of {len} bytes is not a multiple of element size {elem_size}")]
    BadStride { len: usize, elem_size: usize },
    #[error("bitshuffle needs an element count divisible by 8, got {count}")]
    CountNotMultipleOf8 { count: usize },
    #[error("unknown pre-conditioner id {0}")]
    UnknownId(u8),
}

/// Pre-conditioner selector, stored as one byte in the basket directory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
#[repr(u8)]
pub enum PrecondId {
    #[default]
    None = 0,
    Shuffle = 1,
    BitShuffle = 2,
    ByteStreamSplit = 3,
}

impl PrecondId {
    pub const ALL: [PrecondId; 4] = [
        PrecondId::None,
        PrecondId::Shuffle,
        PrecondId::BitShuffle,
        PrecondId::ByteStreamSplit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PrecondId::None => "none",
            PrecondId::Shuffle => "shuffle",
            PrecondId::BitShuffle => "bitshuffle",
            PrecondId::ByteStreamSplit => "bss",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "none" => Some(PrecondId::None),
            "shuffle" => Some(PrecondId::Shuffle),
            "bitshuffle" => Some(PrecondId::BitShuffle),
            "bss" | "byte_stream_split" => Some(PrecondId::ByteStreamSplit),
            _ => None,
        }
    }

    /// The transform actually applied to blobs holding `element_counts`
    /// elements: BitShuffle downgrades to Shuffle unless every count is a
    /// multiple of 8.
    pub fn effective(self, element_counts: &[usize]) -> PrecondId {
        if self == PrecondId::BitShuffle && element_counts.iter().any(|n| n % 8 != 0) {
            PrecondId::Shuffle
        } else {
            self
        }
    }

    pub fn apply(self, data: &[u8], elem_size: usize) -> Result<Vec<u8>, PrecondError> {
        match self {
            PrecondId::None => Ok(data.to_vec()),
            PrecondId::Shuffle => shuffle(data, elem_size),
            PrecondId::BitShuffle => bitshuffle(data, elem_size),
            PrecondId::ByteStreamSplit => byte_stream_split(data, elem_size),
        }
    }

    pub fn invert(self, data: &[u8], elem_size: usize) -> Result<Vec<u8>, PrecondError> {
        match self {
            PrecondId::None => Ok(data.to_vec()),
            PrecondId::Shuffle => unshuffle(data, elem_size),
            PrecondId::BitShuffle => unbitshuffle(data, elem_size),
            PrecondId::ByteStreamSplit => byte_stream_merge(data, elem_size),
        }
    }
}

impl From<PrecondId> for u8 {
    fn from(id: PrecondId) -> u8 {
        id as u8
    }
}

impl TryFrom<u8> for PrecondId {
    type Error = PrecondError;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            0 => Ok(PrecondId::None),
            1 => Ok(PrecondId::Shuffle),
            2 => Ok(PrecondId::BitShuffle),
            3 => Ok(PrecondId::ByteStreamSplit),
            other => Err(PrecondError::UnknownId(other)),
        }
    }
}

impl fmt::Display for PrecondId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn element_count(len: usize, elem_size: usize) -> Result<usize, PrecondError> {
    if elem_size == 0 || !len.is_multiple_of(elem_size) {
        return Err(PrecondError::BadStride { len, elem_size });
    }
    Ok(len / elem_size)
}

pub fn shuffle(data: &[u8], elem_size: usize) -> Result<Vec<u8>, PrecondError> {
    let n = element_count(data.len(), elem_size)?;
    if elem_size == 1 {
        return Ok(data.to_vec());
    }
    let mut out = vec![0u8; data.len()];
    for (i, elem) in data.chunks_exact(elem_size).enumerate() {
        for (j, &b) in elem.iter().enumerate() {
            out[j * n + i] = b;
        }
    }
    Ok(out)
}

pub fn unshuffle(data: &[u8], elem_size: usize) -> Result<Vec<u8>, PrecondError> {
    let n = element_count(data.len(), elem_size)?;
    if elem_size == 1 {
        return Ok(data.to_vec());
    }
    let mut out = vec![0u8; data.len()];
    for (i, elem) in out.chunks_exact_mut(elem_size).enumerate() {
        for (j, b) in elem.iter_mut().enumerate() {
            *b = data[j * n + i];
        }
    }
    Ok(out)
}

pub fn byte_stream_split(data: &[u8], elem_size: usize) -> Result<Vec<u8>, PrecondError> {
    shuffle(data, elem_size)
}

/// Inverse of [`byte_stream_split`].
pub fn byte_stream_merge(data: &[u8], elem_size: usize) -> Result<Vec<u8>, PrecondError> {
    unshuffle(data, elem_size)
}

/// Transposes an 8×8 bit matrix held in a u64, where bit `k` of byte `r`
/// sits at position `8r + k`. The transform is an involution.
#[inline]
fn transpose_8x8(mut x: u64) -> u64 {
    let t = (x ^ (x >> 7)) & 0x00AA_00AA_00AA_00AA;
    x ^= t ^ (t << 7);
    let t = (x ^ (x >> 14)) & 0x0000_CCCC_0000_CCCC;
    x ^= t ^ (t << 14);
    let t = (x ^ (x >> 28)) & 0x0000_0000_F0F0_F0F0;
    x ^= t ^ (t << 28);
    x
}

fn bit_element_count(len: usize, elem_size: usize) -> Result<usize, PrecondError> {
    let n = element_count(len, elem_size)?;
    if n % 8 != 0 {
        return Err(PrecondError::CountNotMultipleOf8 { count: n });
    }
    Ok(n)
}

pub fn bitshuffle(data: &[u8], elem_size: usize) -> Result<Vec<u8>, PrecondError> {
    let n = bit_element_count(data.len(), elem_size)?;
    let streams = shuffle(data, elem_size)?;
    let plane_len = n / 8;
    let mut out = vec![0u8; data.len()];
    for (j, stream) in streams.chunks_exact(n.max(1)).enumerate() {
        for (g, group) in stream.chunks_exact(8).enumerate() {
            let bits = transpose_8x8(u64::from_le_bytes(group.try_into().unwrap()));
            for (bit, byte) in bits.to_le_bytes().into_iter().enumerate() {
                out[(j * 8 + bit) * plane_len + g] = byte;
            }
        }
    }
    Ok(out)
}

pub fn unbitshuffle(data: &[u8], elem_size: usize) -> Result<Vec<u8>, PrecondError> {
    let n = bit_element_count(data.len(), elem_size)?;
    let plane_len = n / 8;
    let mut streams = vec![0u8; data.len()];
    for j in 0..elem_size {
        for g in 0..plane_len {
            let mut planes = [0u8; 8];
            for (bit, p) in planes.iter_mut().enumerate() {
                *p = data[(j * 8 + bit) * plane_len + g];
            }
            let bytes = transpose_8x8(u64::from_le_bytes(planes)).to_le_bytes();
            streams[j * n + g * 8..j * n + g * 8 + 8].copy_from_slice(&bytes);
        }
    }
    unshuffle(&streams, elem_size)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Reference transforms written straight from the index definitions.

    fn naive_shuffle(data: &[u8], e: usize) -> Vec<u8> {
        let n = data.len() / e;
        let mut out = vec![0u8; data.len()];
        for i in 0..n {
            for j in 0..e {
                out[j * n + i] = data[i * e + j];
            }
        }
        out
    }

    fn naive_bitshuffle(data: &[u8], e: usize) -> Vec<u8> {
        let n = data.len() / e;
        let mut out = vec![0u8; data.len()];
        for b in 0..8 * e {
            for i in 0..n {
                let bit = (data[i * e + b / 8] >> (b % 8)) & 1;
                out[b * (n / 8) + i / 8] |= bit << (i % 8);
            }
        }
        out
    }

    fn buffer(count_multiple: usize) -> impl Strategy<Value = (Vec<u8>, usize)> {
        prop::sample::select(vec![1usize, 2, 4, 8]).prop_flat_map(move |e| {
            (1usize..24).prop_flat_map(move |k| {
                (prop::collection::vec(any::<u8>(), k * count_multiple * e), Just(e))
            })
        })
    }

    #[test]
    fn shuffle_stride_one_is_identity() {
        let data: Vec<u8> = (0..=255).collect();
        assert_eq!(shuffle(&data, 1).unwrap(), data);
        assert_eq!(unshuffle(&data, 1).unwrap(), data);
        assert_eq!(byte_stream_split(&data, 1).unwrap(), data);
    }

    #[test]
    fn shuffle_two_by_two() {
        let (a0, a1, b0, b1) = (0xA0, 0xA1, 0xB0, 0xB1);
        assert_eq!(shuffle(&[a0, a1, b0, b1], 2).unwrap(), [a0, b0, a1, b1]);
        assert_eq!(unshuffle(&[a0, b0, a1, b1], 2).unwrap(), [a0, a1, b0, b1]);
    }

    #[test]
    fn shuffle_three_four_byte_elements() {
        let data: Vec<u8> = (0..12).collect();
        assert_eq!(shuffle(&data, 4).unwrap(), naive_shuffle(&data, 4));
        assert_eq!(
            shuffle(&data, 4).unwrap(),
            [0, 4, 8, 1, 5, 9, 2, 6, 10, 3, 7, 11]
        );
    }

    #[test]
    fn bad_stride() {
        assert_eq!(
            shuffle(&[1, 2, 3], 2),
            Err(PrecondError::BadStride { len: 3, elem_size: 2 })
        );
        assert!(matches!(unshuffle(&[1, 2, 3], 2), Err(PrecondError::BadStride { .. })));
        assert!(matches!(shuffle(&[1], 0), Err(PrecondError::BadStride { .. })));
        assert!(matches!(bitshuffle(&[0; 9], 2), Err(PrecondError::BadStride { .. })));
        assert!(matches!(byte_stream_split(&[0; 5], 4), Err(PrecondError::BadStride { .. })));
    }

    #[test]
    fn bitshuffle_needs_count_multiple_of_8() {
        assert_eq!(
            bitshuffle(&[0; 12], 4),
            Err(PrecondError::CountNotMultipleOf8 { count: 3 })
        );
        assert!(matches!(
            unbitshuffle(&[0; 7], 1),
            Err(PrecondError::CountNotMultipleOf8 { count: 7 })
        ));
    }

    #[test]
    fn bitshuffle_zero() {
        assert_eq!(bitshuffle(&[0; 64], 4).unwrap(), vec![0; 64]);
        assert_eq!(unbitshuffle(&[0; 64], 4).unwrap(), vec![0; 64]);
        assert!(bitshuffle(&[], 4).unwrap().is_empty());
    }

    #[test]
    fn bitshuffle_single_bits() {
        let expected_low = [0xFF, 0, 0, 0, 0, 0, 0, 0];
        let expected_high = [0, 0, 0, 0, 0, 0, 0, 0xFF];
        assert_eq!(naive_bitshuffle(&[0x01; 8], 1), expected_low);
        assert_eq!(naive_bitshuffle(&[0x80; 8], 1), expected_high);
        assert_eq!(bitshuffle(&[0x01; 8], 1).unwrap(), expected_low);
        assert_eq!(bitshuffle(&[0x80; 8], 1).unwrap(), expected_high);
        assert_eq!(unbitshuffle(&expected_low, 1).unwrap(), [0x01; 8]);
    }

    #[test]
    fn transpose_is_involution() {
        for x in [0u64, 1, 0x8000_0000_0000_0000, 0x0123_4567_89AB_CDEF, u64::MAX] {
            assert_eq!(transpose_8x8(transpose_8x8(x)), x);
        }
    }

    #[test]
    fn byte_stream_split_constant_upper_bytes() {
        // upper two bytes constant, lower two vary
        let values = [
            f32::from_bits(0x4248_1234),
            f32::from_bits(0x4248_5678),
            f32::from_bits(0x4248_9ABC),
            f32::from_bits(0x4248_DEF0),
        ];
        let data: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        let out = byte_stream_split(&data, 4).unwrap();
        assert_eq!(&out[8..12], &[0x48; 4]);
        assert_eq!(&out[12..16], &[0x42; 4]);
        assert_eq!(byte_stream_merge(&out, 4).unwrap(), data);
    }

    #[test]
    fn effective_downgrades_bitshuffle() {
        assert_eq!(PrecondId::BitShuffle.effective(&[16, 8]), PrecondId::BitShuffle);
        assert_eq!(PrecondId::BitShuffle.effective(&[16, 9]), PrecondId::Shuffle);
        assert_eq!(PrecondId::Shuffle.effective(&[3]), PrecondId::Shuffle);
        assert_eq!(PrecondId::None.effective(&[3]), PrecondId::None);
    }

    #[test]
    fn id_bytes() {
        for id in PrecondId::ALL {
            assert_eq!(PrecondId::try_from(u8::from(id)).unwrap(), id);
            assert_eq!(PrecondId::from_name(id.name()), Some(id));
        }
        assert_eq!(PrecondId::try_from(4), Err(PrecondError::UnknownId(4)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn shuffle_matches_oracle((data, e) in buffer(1)) {
            let out = shuffle(&data, e).unwrap();
            prop_assert_eq!(&out, &naive_shuffle(&data, e));
            prop_assert_eq!(unshuffle(&out, e).unwrap(), data);
        }

        #[test]
        fn bss_equals_shuffle((data, e) in buffer(1)) {
            let out = byte_stream_split(&data, e).unwrap();
            prop_assert_eq!(&out, &shuffle(&data, e).unwrap());
            prop_assert_eq!(byte_stream_merge(&out, e).unwrap(), data);
        }

        #[test]
        fn bitshuffle_matches_oracle((data, e) in buffer(8)) {
            let out = bitshuffle(&data, e).unwrap();
            prop_assert_eq!(&out, &naive_bitshuffle(&data, e));
            prop_assert_eq!(unbitshuffle(&out, e).unwrap(), data);
        }
    }
}
