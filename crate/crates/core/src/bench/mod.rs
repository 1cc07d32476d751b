//! Synthetic datasets, the measurement matrix and report emission.

pub mod checks;
pub mod dataset;
pub mod matrix;
pub mod report;

pub use checks::{run_checks, CheckConfig, CheckOutcome};
pub use dataset::{event_records, generate_dataset, DatasetKind};
pub use matrix::{find_row, run_matrix, MatrixSpec};
pub use report::{emit_report, BenchReportRow, ReportFormat};

use crate::codec::CodecError;
use crate::reader::ReadError;
use crate::writer::WriteError;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("empty benchmark matrix")]
    EmptyMatrix,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Write(#[from] WriteError),
    #[error(transparent)]
    Read(#[from] ReadError),
    #[error("missing row {0}")]
    MissingRow(String),
}
