use std::collections::HashMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use basketio::bench::{emit_report, run_checks, run_matrix, CheckConfig, DatasetKind, MatrixSpec, ReportFormat};
use basketio::codec::{train_dictionary, CodecId, CompressionSettings, Dictionary};
use basketio::footer::FlushPolicy;
use basketio::precond::PrecondId;
use basketio::reader::ReaderHandle;
use basketio::writer::{uniform_settings, BasketWriter, ColumnSettings};

#[derive(Parser)]
#[command(name = "basketio", version, about = "Columnar basket container with pluggable compression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the codec, pre-conditioner and flush-policy matrix.
    Bench(BenchArgs),
    /// Write a synthetic dataset to a container file.
    Write(WriteArgs),
    /// Scan every column of a file and report throughput.
    Read(ReadArgs),
    /// Print the footer of a file as JSON.
    Inspect { file: PathBuf },
    /// Train a zstd dictionary from a directory of sample files.
    TrainDict {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long, default_value_t = 16 * 1024)]
        capacity: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct DatasetArgs {
    #[arg(long, default_value = "nanoaod", value_parser = parse_dataset)]
    dataset: DatasetKind,
    #[arg(long, default_value_t = 10_000)]
    events: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[arg(long, value_delimiter = ',', default_value = "zstd:3,lz4:1,zlib:6,lzma:6", value_parser = parse_codec)]
    codecs: Vec<(CodecId, i32)>,
    #[arg(long, value_delimiter = ',', default_value = "none", value_parser = parse_precond)]
    precond: Vec<PrecondId>,
    #[arg(long, value_delimiter = ',', default_value = "cluster:1000", value_parser = parse_policy)]
    policy: Vec<FlushPolicy>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv", value_parser = parse_format)]
    format: ReportFormat,
    /// Run the directional checks and exit nonzero if any fails.
    #[arg(long)]
    check: bool,
    /// Events per check dataset.
    #[arg(long, default_value_t = 100_000)]
    check_events: usize,
}

#[derive(Args)]
struct WriteArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[arg(long, default_value = "zstd:3", value_parser = parse_codec)]
    codec: (CodecId, i32),
    #[arg(long, default_value = "none", value_parser = parse_precond)]
    precond: PrecondId,
    #[arg(long, default_value = "cluster:1000", value_parser = parse_policy)]
    policy: FlushPolicy,
    /// Dictionary applied to every column (zstd only).
    #[arg(long)]
    dict: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReadArgs {
    file: PathBuf,
    /// Dictionary file for every column written with one.
    #[arg(long)]
    dict: Option<PathBuf>,
}

fn parse_dataset(s: &str) -> Result<DatasetKind, String> {
    DatasetKind::from_name(s).ok_or_else(|| format!("unknown dataset {s:?}"))
}

fn parse_codec(s: &str) -> Result<(CodecId, i32), String> {
    let (name, level) = match s.split_once(':') {
        Some((n, l)) => (n, Some(l)),
        None => (s, None),
    };
    let codec = CodecId::from_name(name).ok_or_else(|| format!("unknown codec {name:?}"))?;
    let level = match level {
        Some(l) => l.parse().map_err(|_| format!("bad level {l:?}"))?,
        None => codec.default_level(),
    };
    Ok((codec, level))
}

fn parse_precond(s: &str) -> Result<PrecondId, String> {
    PrecondId::from_name(s).ok_or_else(|| format!("unknown pre-conditioner {s:?}"))
}

fn parse_policy(s: &str) -> Result<FlushPolicy, String> {
    FlushPolicy::parse(s)
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    ReportFormat::parse(s).ok_or_else(|| format!("unknown format {s:?}"))
}

fn bench(args: BenchArgs) -> Result<bool> {
    let mut spec = MatrixSpec::new(args.data.dataset, args.data.events, args.data.seed)
        .codecs(&args.codecs)
        .preconds(&args.precond)
        .policies(&args.policy);
    spec.scans = basketio::bench::matrix::DEFAULT_SCANS;
    let rows = run_matrix(&spec)?;
    match &args.out {
        Some(path) => {
            emit_report(&rows, args.format, path).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {} rows to {}", rows.len(), path.display());
        }
        None => {
            let stdout = std::io::stdout().lock();
            match args.format {
                ReportFormat::Csv => basketio::bench::report::write_csv(&rows, stdout)?,
                ReportFormat::Markdown => basketio::bench::report::write_markdown(&rows, stdout)?,
            }
        }
    }
    let failed_cells = rows.iter().filter(|r| r.error.is_some()).count();
    if failed_cells > 0 {
        log::warn!("{failed_cells} cells failed");
    }
    if !args.check {
        return Ok(true);
    }
    let cfg = CheckConfig {
        n_events: args.check_events,
        seed: args.data.seed,
    };
    let mut all = true;
    for outcome in run_checks(cfg) {
        let verdict = if outcome.passed { "PASS" } else { "FAIL" };
        println!("{verdict} {}: {}", outcome.name, outcome.detail);
        all &= outcome.passed;
    }
    Ok(all)
}

fn write(args: WriteArgs) -> Result<()> {
    let (codec, level) = args.codec;
    let mut compression = CompressionSettings::new(codec, level)?;
    if let Some(path) = &args.dict {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        compression = compression.with_dictionary(Dictionary::from_bytes(bytes))?;
    }
    let schema = args.data.dataset.schema();
    let settings = uniform_settings(&schema, &ColumnSettings::new(compression, args.precond));
    let mut writer = BasketWriter::create(&args.out, schema, &settings, args.policy)?;
    for batch in basketio::bench::generate_dataset(args.data.dataset, args.data.events, args.data.seed) {
        writer.append_events(&batch)?;
    }
    let footer = writer.close()?;
    eprintln!(
        "wrote {} events in {} baskets to {}",
        footer.total_events,
        footer.directory.len(),
        args.out.display()
    );
    Ok(())
}

fn open(file: &PathBuf, dict: Option<&PathBuf>) -> Result<ReaderHandle> {
    let mut dictionaries = HashMap::new();
    if let Some(path) = dict {
        for name in footer_column_names(file)? {
            dictionaries.insert(name, path.clone());
        }
    }
    ReaderHandle::open(file, &dictionaries).with_context(|| format!("opening {}", file.display()))
}

fn footer_column_names(file: &PathBuf) -> Result<Vec<String>> {
    let footer = read_footer_json(file)?;
    let schema = footer
        .get("schema")
        .and_then(|s| s.as_array())
        .ok_or_else(|| anyhow!("footer has no schema"))?;
    Ok(schema
        .iter()
        .filter_map(|c| c.get("name").and_then(|n| n.as_str()).map(String::from))
        .collect())
}

fn read_footer_json(file: &PathBuf) -> Result<serde_json::Value> {
    let bytes = std::fs::read(file).with_context(|| format!("reading {}", file.display()))?;
    let tail = basketio::footer::TAIL_LEN;
    if bytes.len() < basketio::footer::FILE_MAGIC.len() + tail {
        bail!("{} is too short to be a container", file.display());
    }
    let len_at = bytes.len() - tail;
    if bytes[len_at + 8..] != basketio::footer::TRAILER_MAGIC {
        bail!("{} has no container trailer", file.display());
    }
    let len = u64::from_le_bytes(bytes[len_at..len_at + 8].try_into().unwrap()) as usize;
    let start = len_at.checked_sub(len).ok_or_else(|| anyhow!("footer length out of range"))?;
    Ok(serde_json::from_slice(&bytes[start..len_at])?)
}

fn read(args: ReadArgs) -> Result<()> {
    let reader = open(&args.file, args.dict.as_ref())?;
    let summary = reader.scan_all()?;
    println!("column,uncompressed_bytes,seconds,mb_s");
    for (c, col) in reader.footer().columns().iter().enumerate() {
        let t = summary.column_elapsed[c];
        println!(
            "{},{},{:.6},{:.1}",
            col.name,
            summary.column_bytes[c],
            t.as_secs_f64(),
            basketio::reader::mb_per_s(summary.column_bytes[c], t)
        );
    }
    println!(
        "*,{},{:.6},{:.1}",
        summary.total_bytes(),
        summary.elapsed.as_secs_f64(),
        summary.throughput_mb_s()
    );
    Ok(())
}

fn inspect(file: PathBuf) -> Result<()> {
    let json = read_footer_json(&file)?;
    println!("{}", serde_json::to_string_pretty(&json)?);
    Ok(())
}

fn train_dict(samples: PathBuf, capacity: usize, out: PathBuf) -> Result<()> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&samples)
        .with_context(|| format!("listing {}", samples.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    paths.retain(|p| p.is_file());
    paths.sort();
    let data: Vec<Vec<u8>> = paths.iter().map(std::fs::read).collect::<Result<_, _>>()?;
    let trained = train_dictionary(&data, capacity)?;
    if let Some(w) = &trained.warning {
        eprintln!("warning: {w}");
    }
    std::fs::write(&out, trained.dictionary.as_bytes())?;
    eprintln!(
        "trained {} byte dictionary (id {}) from {} samples",
        trained.dictionary.len(),
        trained.dictionary.id().unwrap_or(0),
        data.len()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Bench(args) => return bench(args),
        Command::Write(args) => write(args)?,
        Command::Read(args) => read(args)?,
        Command::Inspect { file } => inspect(file)?,
        Command::TrainDict { samples, capacity, out } => train_dict(samples, capacity, out)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
