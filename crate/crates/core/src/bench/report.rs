//! CSV and markdown rendering of benchmark rows.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

/// One measurement of the benchmark matrix.
///
/// `column` is `*` for whole-file rows, a column name for per-column rows,
/// or `<name>.data` / `<name>.offsets` for the two blobs of a variable column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReportRow {
    pub dataset: String,
    pub column: String,
    pub codec: String,
    pub level: i32,
    pub precond: String,
    pub policy: String,
    pub uncompressed_bytes: u64,
    /// Framed bytes, headers included.
    pub compressed_bytes: u64,
    pub ratio: f64,
    pub write_mb_s: Option<f64>,
    pub read_mb_s: Option<f64>,
    pub write_s: Option<f64>,
    pub read_s: Option<f64>,
    /// Size of the whole container file (file rows only).
    pub file_bytes: Option<u64>,
    pub error: Option<String>,
}

pub const FILE_ROW: &str = "*";

pub const HEADER: [&str; 15] = [
    "dataset",
    "column",
    "codec",
    "level",
    "precond",
    "policy",
    "uncompressed_bytes",
    "compressed_bytes",
    "ratio",
    "write_mb_s",
    "read_mb_s",
    "write_s",
    "read_s",
    "file_bytes",
    "error",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(ReportFormat::Csv),
            "md" | "markdown" => Some(ReportFormat::Markdown),
            _ => None,
        }
    }
}

/// Formats `x` with `digits` significant digits.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    // round in scientific notation first so 9.9996 becomes 10.00, not 9.9996
    let rounded: f64 = format!("{:.*e}", digits.saturating_sub(1), x).parse().unwrap();
    let magnitude = rounded.abs().log10().floor() as i32;
    let decimals = digits as i32 - 1 - magnitude;
    if decimals > 0 {
        format!("{:.*}", decimals as usize, rounded)
    } else {
        format!("{rounded:.0}")
    }
}

fn opt_f(x: Option<f64>) -> String {
    x.map(|v| format_significant(v, 4)).unwrap_or_default()
}

impl BenchReportRow {
    pub fn fields(&self) -> [String; 15] {
        [
            self.dataset.clone(),
            self.column.clone(),
            self.codec.clone(),
            self.level.to_string(),
            self.precond.clone(),
            self.policy.clone(),
            self.uncompressed_bytes.to_string(),
            self.compressed_bytes.to_string(),
            format_significant(self.ratio, 4),
            opt_f(self.write_mb_s),
            opt_f(self.read_mb_s),
            opt_f(self.write_s),
            opt_f(self.read_s),
            self.file_bytes.map(|b| b.to_string()).unwrap_or_default(),
            self.error.clone().unwrap_or_default(),
        ]
    }

    pub fn is_file_row(&self) -> bool {
        self.column == FILE_ROW
    }
}

pub fn write_csv<W: Write>(rows: &[BenchReportRow], out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for row in rows {
        w.write_record(row.fields())?;
    }
    w.flush()
}

pub fn write_markdown<W: Write>(rows: &[BenchReportRow], mut out: W) -> io::Result<()> {
    writeln!(out, "| {} |", HEADER.join(" | "))?;
    writeln!(out, "|{}", "---|".repeat(HEADER.len()))?;
    for row in rows {
        let cells: Vec<String> = row.fields().iter().map(|f| f.replace('|', "\\|")).collect();
        writeln!(out, "| {} |", cells.join(" | "))?;
    }
    Ok(())
}

pub fn emit_report(rows: &[BenchReportRow], format: ReportFormat, path: impl AsRef<Path>) -> io::Result<()> {
    if rows.is_empty() {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "no rows to report"));
    }
    let mut out = BufWriter::new(File::create(path)?);
    match format {
        ReportFormat::Csv => write_csv(rows, &mut out)?,
        ReportFormat::Markdown => write_markdown(rows, &mut out)?,
    }
    out.flush()
}

pub fn parse_csv<R: io::Read>(input: R) -> Result<Vec<BenchReportRow>, csv::Error> {
    csv::Reader::from_reader(input).deserialize().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(i: u64) -> BenchReportRow {
        BenchReportRow {
            dataset: "carray".into(),
            column: if i.is_multiple_of(2) { FILE_ROW.into() } else { "hits.offsets".into() },
            codec: "zstd".into(),
            level: 3,
            precond: "none".into(),
            policy: "cluster:1000".into(),
            uncompressed_bytes: 1000 + i,
            compressed_bytes: 300 + i,
            ratio: (1000 + i) as f64 / (300 + i) as f64,
            write_mb_s: i.is_multiple_of(2).then_some(123.456789),
            read_mb_s: Some(0.000123456),
            write_s: None,
            read_s: Some(2.0),
            file_bytes: i.is_multiple_of(2).then_some(4000),
            error: (i == 3).then(|| "codec failure, bad".to_string()),
        }
    }

    fn rounded(r: &BenchReportRow) -> BenchReportRow {
        let f = |x: f64| format_significant(x, 4).parse::<f64>().unwrap();
        BenchReportRow {
            ratio: f(r.ratio),
            write_mb_s: r.write_mb_s.map(f),
            read_mb_s: r.read_mb_s.map(f),
            write_s: r.write_s.map(f),
            read_s: r.read_s.map(f),
            ..r.clone()
        }
    }

    #[test]
    fn significant_digits() {
        assert_eq!(format_significant(3.33333, 4), "3.333");
        assert_eq!(format_significant(123456.0, 4), "123500");
        assert_eq!(format_significant(0.000123456, 4), "0.0001235");
        assert_eq!(format_significant(9.99961, 4), "10.00");
        assert_eq!(format_significant(-2.5, 4), "-2.500");
        assert_eq!(format_significant(0.0, 4), "0");
    }

    #[test]
    fn one_row_csv_has_two_lines() {
        let mut out = Vec::new();
        write_csv(&[row(0)], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("dataset,column,codec,level,precond,policy,uncompressed_bytes,compressed_bytes,ratio,"));
    }

    #[test]
    fn csv_parses_back() {
        let rows: Vec<_> = (0..6).map(row).collect();
        let mut out = Vec::new();
        write_csv(&rows, &mut out).unwrap();
        let parsed = parse_csv(out.as_slice()).unwrap();
        let expected: Vec<_> = rows.iter().map(rounded).collect();
        assert_eq!(parsed, expected);
    }

    #[test]
    fn markdown_line_count() {
        let rows: Vec<_> = (0..5).map(row).collect();
        let mut out = Vec::new();
        write_markdown(&rows, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().lines().count(), rows.len() + 2);
    }

    #[test]
    fn empty_report_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_report(&[], ReportFormat::Csv, dir.path().join("r.csv")).is_err());
    }
}
