//! Directional reproductions run by `bench --check`.

use crate::bench::dataset::{event_records, DatasetKind, NARROW_VARIABLE_COLUMN};
use crate::bench::matrix::{find_row, run_matrix, MatrixSpec};
use crate::bench::report::{BenchReportRow, FILE_ROW};
use crate::bench::BenchError;
use crate::codec::{compress_frame, train_dictionary, CodecId, CompressionSettings};
use crate::footer::FlushPolicy;
use crate::precond::PrecondId;

/// Upper bound on the LZ4 ratio of the offsets blob.
pub const LZ4_OFFSETS_MAX_RATIO: f64 = 1.05;
/// Maximum relative size overhead of cluster flushing.
pub const CLUSTER_SIZE_OVERHEAD: f64 = 0.10;
/// Required relative LZ4 size reduction from shuffling.
pub const SHUFFLE_MIN_GAIN: f64 = 0.05;
/// Required relative size reduction from a trained dictionary.
pub const DICTIONARY_MIN_GAIN: f64 = 0.20;
pub const DICTIONARY_RECORDS: usize = 128;
pub const DICTIONARY_CAPACITY: usize = 16 * 1024;

pub const CLUSTER: FlushPolicy = FlushPolicy::OnlyAtCluster { events_per_cluster: 1000 };
pub const BASKET: FlushPolicy = FlushPolicy::PerBasket { max_basket_bytes: 32 * 1024 };

#[derive(Debug, Clone, Copy)]
pub struct CheckConfig {
    pub n_events: usize,
    pub seed: u64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            n_events: 100_000,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        CheckOutcome { name, passed, detail }
    }
}

fn row<'a>(
    rows: &'a [BenchReportRow],
    column: &str,
    (codec, level): (CodecId, i32),
    precond: PrecondId,
    policy: FlushPolicy,
) -> Result<&'a BenchReportRow, BenchError> {
    let r = find_row(rows, column, codec, level, precond, policy)
        .ok_or_else(|| BenchError::MissingRow(format!("{column} {codec}:{level} {precond} {}", policy.label())))?;
    match &r.error {
        Some(e) => Err(BenchError::MissingRow(format!("{column} {codec}:{level} failed: {e}"))),
        None => Ok(r),
    }
}

const LZ4: (CodecId, i32) = (CodecId::Lz4, 1);
const ZSTD: (CodecId, i32) = (CodecId::Zstd, 3);
const LZMA: (CodecId, i32) = (CodecId::Lzma, 6);
const RAW: (CodecId, i32) = (CodecId::Raw, 0);

/// LZ4 barely compresses CArray offsets while zstd does better.
pub fn check_offsets(cfg: CheckConfig) -> Result<CheckOutcome, BenchError> {
    let spec = MatrixSpec::new(DatasetKind::CArray, cfg.n_events, cfg.seed)
        .codecs(&[ZSTD, LZ4])
        .policies(&[CLUSTER]);
    let rows = run_matrix(&spec)?;
    let zstd = row(&rows, "hits.offsets", ZSTD, PrecondId::None, CLUSTER)?.ratio;
    let lz4 = row(&rows, "hits.offsets", LZ4, PrecondId::None, CLUSTER)?.ratio;
    Ok(CheckOutcome::new(
        "offsets incompressible to lz4",
        zstd > lz4 && lz4 < LZ4_OFFSETS_MAX_RATIO,
        format!("offsets ratio zstd:3 {zstd:.4} > lz4:1 {lz4:.4}, lz4 < {LZ4_OFFSETS_MAX_RATIO}"),
    ))
}

/// Ratio ordering across codecs and the LZ4 versus LZMA read speed.
pub fn check_ratio_ordering(cfg: CheckConfig) -> Result<CheckOutcome, BenchError> {
    let spec = MatrixSpec::new(DatasetKind::NanoAodLike, cfg.n_events, cfg.seed)
        .codecs(&[LZMA, ZSTD, LZ4, RAW])
        .policies(&[CLUSTER]);
    let rows = run_matrix(&spec)?;
    let get = |c| row(&rows, FILE_ROW, c, PrecondId::None, CLUSTER);
    let (lzma, zstd, lz4, raw) = (get(LZMA)?, get(ZSTD)?, get(LZ4)?, get(RAW)?);
    let ordered = lzma.ratio >= zstd.ratio && zstd.ratio >= lz4.ratio && lz4.ratio >= raw.ratio;
    let lz4_read = lz4.read_mb_s.unwrap_or(0.0);
    let lzma_read = lzma.read_mb_s.unwrap_or(0.0);
    Ok(CheckOutcome::new(
        "ratio ordering",
        ordered && lz4_read > lzma_read,
        format!(
            "ratio lzma:6 {:.4} >= zstd:3 {:.4} >= lz4:1 {:.4} >= raw {:.4}; read lz4 {lz4_read:.1} MB/s > lzma {lzma_read:.1} MB/s",
            lzma.ratio, zstd.ratio, lz4.ratio, raw.ratio
        ),
    ))
}

/// Cluster flushing costs little size and does not slow the scan.
pub fn check_cluster_tradeoff(cfg: CheckConfig) -> Result<CheckOutcome, BenchError> {
    let spec = MatrixSpec::new(DatasetKind::NanoAodLike, cfg.n_events, cfg.seed)
        .codecs(&[ZSTD])
        .policies(&[CLUSTER, BASKET]);
    let rows = run_matrix(&spec)?;
    let cluster = row(&rows, FILE_ROW, ZSTD, PrecondId::None, CLUSTER)?;
    let basket = row(&rows, FILE_ROW, ZSTD, PrecondId::None, BASKET)?;
    let (cs, bs) = (cluster.file_bytes.unwrap_or(0), basket.file_bytes.unwrap_or(0));
    let overhead = cs as f64 / bs as f64 - 1.0;
    let (ct, bt) = (cluster.read_mb_s.unwrap_or(0.0), basket.read_mb_s.unwrap_or(0.0));
    Ok(CheckOutcome::new(
        "cluster flush trade-off",
        overhead <= CLUSTER_SIZE_OVERHEAD && ct >= bt,
        format!(
            "size {cs} vs {bs} bytes ({:+.2}% <= {:.0}%); scan {ct:.1} MB/s >= {bt:.1} MB/s",
            overhead * 100.0,
            CLUSTER_SIZE_OVERHEAD * 100.0
        ),
    ))
}

/// Shuffling a float column with shared exponent bytes helps LZ4.
pub fn check_shuffle(cfg: CheckConfig) -> Result<CheckOutcome, BenchError> {
    let spec = MatrixSpec::new(DatasetKind::NanoAodLike, cfg.n_events, cfg.seed)
        .codecs(&[LZ4])
        .preconds(&[PrecondId::None, PrecondId::Shuffle])
        .policies(&[CLUSTER]);
    let rows = run_matrix(&spec)?;
    let column = format!("{NARROW_VARIABLE_COLUMN}.data");
    let plain = row(&rows, &column, LZ4, PrecondId::None, CLUSTER)?.compressed_bytes;
    let shuffled = row(&rows, &column, LZ4, PrecondId::Shuffle, CLUSTER)?.compressed_bytes;
    let gain = 1.0 - shuffled as f64 / plain as f64;
    Ok(CheckOutcome::new(
        "shuffle helps lz4",
        gain >= SHUFFLE_MIN_GAIN,
        format!(
            "{column} lz4:1 {shuffled} bytes shuffled vs {plain} plain ({:.1}% >= {:.0}%)",
            gain * 100.0,
            SHUFFLE_MIN_GAIN * 100.0
        ),
    ))
}

/// A dictionary trained on one set of records shrinks a held-out set.
pub fn check_dictionary(cfg: CheckConfig) -> Result<CheckOutcome, BenchError> {
    let training = event_records(DICTIONARY_RECORDS, cfg.seed);
    let held_out = event_records(DICTIONARY_RECORDS, cfg.seed.wrapping_add(1));
    let dictionary = train_dictionary(&training, DICTIONARY_CAPACITY)?.dictionary;
    let plain_settings = CompressionSettings::new(CodecId::Zstd, 3)?;
    let dict_settings = plain_settings.clone().with_dictionary(dictionary)?;
    let mut plain = 0usize;
    let mut with_dict = 0usize;
    for r in &held_out {
        plain += compress_frame(r, &plain_settings)?.len();
        with_dict += compress_frame(r, &dict_settings)?.len();
    }
    let gain = 1.0 - with_dict as f64 / plain as f64;
    Ok(CheckOutcome::new(
        "dictionary benefit",
        gain >= DICTIONARY_MIN_GAIN,
        format!(
            "{DICTIONARY_RECORDS} records: {with_dict} bytes with dictionary vs {plain} without ({:.1}% >= {:.0}%)",
            gain * 100.0,
            DICTIONARY_MIN_GAIN * 100.0
        ),
    ))
}

type Check = fn(CheckConfig) -> Result<CheckOutcome, BenchError>;

/// Runs all directional checks. A check that cannot run is reported as failed.
pub fn run_checks(cfg: CheckConfig) -> Vec<CheckOutcome> {
    let checks: [(&'static str, Check); 5] = [
        ("offsets incompressible to lz4", check_offsets),
        ("ratio ordering", check_ratio_ordering),
        ("cluster flush trade-off", check_cluster_tradeoff),
        ("shuffle helps lz4", check_shuffle),
        ("dictionary benefit", check_dictionary),
    ];
    checks
        .into_iter()
        .map(|(name, f)| f(cfg).unwrap_or_else(|e| CheckOutcome::new(name, false, format!("error: {e}"))))
        .collect()
}
