//! The codec × level × pre-conditioner × flush-policy measurement matrix.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::bench::dataset::{generate_dataset, DatasetKind};
use crate::bench::report::{BenchReportRow, FILE_ROW};
use crate::bench::BenchError;
use crate::codec::{CodecId, CompressionSettings};
use crate::footer::{FileFooter, FlushPolicy};
use crate::model::EventBatch;
use crate::precond::PrecondId;
use crate::reader::{mb_per_s, ReaderHandle, ScanSummary};
use crate::writer::{uniform_settings, BasketWriter, ColumnSettings};

pub const DEFAULT_SCANS: usize = 3;

#[derive(Debug, Clone)]
pub struct MatrixSpec {
    pub kind: DatasetKind,
    pub n_events: usize,
    pub seed: u64,
    pub codecs: Vec<(CodecId, i32)>,
    pub preconds: Vec<PrecondId>,
    pub policies: Vec<FlushPolicy>,
    /// Read passes per cell; the median is reported.
    pub scans: usize,
    /// Where cell files are written; a temporary directory when `None`.
    pub work_dir: Option<PathBuf>,
}

impl MatrixSpec {
    pub fn new(kind: DatasetKind, n_events: usize, seed: u64) -> Self {
        MatrixSpec {
            kind,
            n_events,
            seed,
            codecs: vec![(CodecId::Zstd, 3)],
            preconds: vec![PrecondId::None],
            policies: vec![FlushPolicy::OnlyAtCluster { events_per_cluster: 1000 }],
            scans: DEFAULT_SCANS,
            work_dir: None,
        }
    }

    pub fn codecs(mut self, codecs: &[(CodecId, i32)]) -> Self {
        self.codecs = codecs.to_vec();
        self
    }

    pub fn preconds(mut self, preconds: &[PrecondId]) -> Self {
        self.preconds = preconds.to_vec();
        self
    }

    pub fn policies(mut self, policies: &[FlushPolicy]) -> Self {
        self.policies = policies.to_vec();
        self
    }
}

struct Cell {
    codec: CodecId,
    level: i32,
    precond: PrecondId,
    policy: FlushPolicy,
}

struct CellResult {
    footer: FileFooter,
    file_bytes: u64,
    write_time: Duration,
    scan: ScanSummary,
}

fn median(mut v: Vec<Duration>) -> Duration {
    v.sort();
    v[v.len() / 2]
}

fn run_cell(batches: &[EventBatch], kind: DatasetKind, cell: &Cell, path: &Path, scans: usize) -> Result<CellResult, BenchError> {
    let schema = kind.schema();
    let compression = CompressionSettings::new(cell.codec, cell.level)?;
    let settings = uniform_settings(&schema, &ColumnSettings::new(compression, cell.precond));

    let start = Instant::now();
    let mut writer = BasketWriter::create(path, schema, &settings, cell.policy)?;
    for b in batches {
        writer.append_events(b)?;
    }
    let footer = writer.close()?;
    let write_time = start.elapsed();
    let file_bytes = std::fs::metadata(path)?.len();

    let reader = ReaderHandle::open(path, &HashMap::new())?;
    let mut passes = Vec::with_capacity(scans);
    for _ in 0..scans.max(1) {
        passes.push(reader.scan_all()?);
    }
    let ncols = passes[0].column_bytes.len();
    let scan = ScanSummary {
        column_elapsed: (0..ncols)
            .map(|c| median(passes.iter().map(|p| p.column_elapsed[c]).collect()))
            .collect(),
        elapsed: median(passes.iter().map(|p| p.elapsed).collect()),
        ..passes.swap_remove(0)
    };
    Ok(CellResult {
        footer,
        file_bytes,
        write_time,
        scan,
    })
}

fn ratio(u: u64, c: u64) -> f64 {
    if c == 0 {
        0.0
    } else {
        u as f64 / c as f64
    }
}

/// Runs every cell of the matrix. A failing cell yields one file row
/// carrying the error instead of aborting the run.
pub fn run_matrix(spec: &MatrixSpec) -> Result<Vec<BenchReportRow>, BenchError> {
    if spec.codecs.is_empty() || spec.preconds.is_empty() || spec.policies.is_empty() {
        return Err(BenchError::EmptyMatrix);
    }
    let batches: Vec<EventBatch> = generate_dataset(spec.kind, spec.n_events, spec.seed).collect();
    let tmp;
    let dir = match &spec.work_dir {
        Some(d) => d.as_path(),
        None => {
            tmp = tempfile::tempdir()?;
            tmp.path()
        }
    };
    let schema = spec.kind.schema();
    let mut rows = Vec::new();

    for &(codec, level) in &spec.codecs {
        for &precond in &spec.preconds {
            for &policy in &spec.policies {
                let cell = Cell { codec, level, precond, policy };
                let base = BenchReportRow {
                    dataset: spec.kind.name().into(),
                    column: FILE_ROW.into(),
                    codec: codec.name().into(),
                    level,
                    precond: precond.name().into(),
                    policy: policy.label(),
                    uncompressed_bytes: 0,
                    compressed_bytes: 0,
                    ratio: 0.0,
                    write_mb_s: None,
                    read_mb_s: None,
                    write_s: None,
                    read_s: None,
                    file_bytes: None,
                    error: None,
                };
                let path = dir.join(format!(
                    "{}-{}{}-{}-{}.bkio",
                    spec.kind.name(),
                    codec.name(),
                    level,
                    precond.name(),
                    policy.label().replace(':', "")
                ));
                let result = run_cell(&batches, spec.kind, &cell, &path, spec.scans);
                let _ = std::fs::remove_file(&path);
                let res = match result {
                    Ok(r) => r,
                    Err(e) => {
                        log::warn!("cell {codec}:{level}/{precond}/{} failed: {e}", policy.label());
                        rows.push(BenchReportRow { error: Some(e.to_string()), ..base });
                        continue;
                    }
                };
                log::info!(
                    "{} {codec}:{level} {precond} {}: {:.1} MB/s read",
                    spec.kind,
                    policy.label(),
                    res.scan.throughput_mb_s()
                );

                let dir_entries = &res.footer.directory;
                let uncompressed: u64 = dir_entries.iter().map(|e| e.uncompressed_len()).sum();
                let compressed: u64 = dir_entries.iter().map(|e| e.framed_len()).sum();
                rows.push(BenchReportRow {
                    uncompressed_bytes: uncompressed,
                    compressed_bytes: compressed,
                    ratio: ratio(uncompressed, compressed),
                    write_mb_s: Some(mb_per_s(uncompressed, res.write_time)),
                    read_mb_s: Some(res.scan.throughput_mb_s()),
                    write_s: Some(res.write_time.as_secs_f64()),
                    read_s: Some(res.scan.elapsed.as_secs_f64()),
                    file_bytes: Some(res.file_bytes),
                    ..base.clone()
                });

                for (c, col) in schema.columns().iter().enumerate() {
                    let entries: Vec<_> = res.footer.column_entries(c).collect();
                    let sum = |f: fn(&crate::footer::BasketDirectoryEntry) -> u64| -> u64 {
                        entries.iter().map(|e| f(e)).sum()
                    };
                    let u = sum(|e| e.uncompressed_len());
                    let z = sum(|e| e.framed_len());
                    let elapsed = res.scan.column_elapsed[c];
                    rows.push(BenchReportRow {
                        column: col.name.clone(),
                        uncompressed_bytes: u,
                        compressed_bytes: z,
                        ratio: ratio(u, z),
                        read_mb_s: Some(mb_per_s(u, elapsed)),
                        read_s: Some(elapsed.as_secs_f64()),
                        ..base.clone()
                    });
                    if col.is_variable() {
                        for (suffix, u, z) in [
                            ("data", sum(|e| e.uncompressed_data_len), sum(|e| e.framed_data_len)),
                            ("offsets", sum(|e| e.uncompressed_offsets_len), sum(|e| e.framed_offsets_len)),
                        ] {
                            rows.push(BenchReportRow {
                                column: format!("{}.{suffix}", col.name),
                                uncompressed_bytes: u,
                                compressed_bytes: z,
                                ratio: ratio(u, z),
                                ..base.clone()
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(rows)
}

/// Finds the row for `column` in the cell identified by codec, precond and
/// policy.
pub fn find_row<'a>(
    rows: &'a [BenchReportRow],
    column: &str,
    codec: CodecId,
    level: i32,
    precond: PrecondId,
    policy: FlushPolicy,
) -> Option<&'a BenchReportRow> {
    let label = policy.label();
    rows.iter().find(|r| {
        r.column == column
            && r.codec == codec.name()
            && r.level == level
            && r.precond == precond.name()
            && r.policy == label
    })
}
