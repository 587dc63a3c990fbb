//! `mfdfa` command-line tool.
//!
//! Exit status: 0 when every input succeeded, 1 on usage errors, 2 when some
//! inputs of a batch failed, 3 when nothing succeeded.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};

use mfdfa::config::AnalysisConfig;
use mfdfa::engine::Segmentation;
use mfdfa::io::{ingest_csv, prices_from_series, write_price_csv, CsvSchema};
use mfdfa::report::{batch, write_artifacts, BatchEntry, BatchReport, BatchStatus};
use mfdfa::series::{admit_series, log_returns};
use mfdfa::spectrum::TauConvention;
use mfdfa::surrogate::surrogate_analysis;
use mfdfa::synth::{binomial_cascade, fractional_gaussian_noise, white_noise, CascadeSpec, FgnSpec};
use mfdfa::{Error, Stage};

const EXIT_USAGE: u8 = 1;
const EXIT_PARTIAL: u8 = 2;
const EXIT_TOTAL: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "mfdfa", version, about = "Multifractal analysis of daily price series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Analyse one price file and print its report row.
    Analyze {
        file: PathBuf,
        /// Directory for report.csv, report.json and plot data.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        opts: AnalysisOpts,
    },
    /// Analyse many price files into one report table.
    Batch {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        opts: AnalysisOpts,
    },
    /// Rerun only the shuffle-surrogate comparison and print it as JSON.
    Surrogate {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        opts: AnalysisOpts,
    },
    /// Write a synthetic price file in the ingestion format.
    Generate {
        kind: Kind,
        #[arg(long)]
        out: PathBuf,
        /// Rows to write (fgn, white).
        #[arg(long, default_value_t = 8192)]
        length: usize,
        /// Cascade multiplier.
        #[arg(long, default_value_t = 0.75)]
        a: f64,
        /// Cascade levels; the file has 2^levels rows.
        #[arg(long, default_value_t = 14)]
        levels: u32,
        /// Keep the larger multiplier on the left child at every split.
        #[arg(long)]
        fixed_order: bool,
        #[arg(long, default_value_t = 0.8)]
        hurst: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// First date; later rows follow on consecutive weekdays.
        #[arg(long, default_value = "2013-11-04")]
        start: NaiveDate,
        #[arg(long, default_value_t = 100.0)]
        base_price: f64,
        /// Standard deviation of the daily log returns.
        #[arg(long, default_value_t = 0.01)]
        volatility: f64,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Kind {
    Cascade,
    Fgn,
    White,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Convention {
    Paper,
    PartitionFunction,
}

/// Configuration file plus overrides; flags win over the file.
#[derive(Args, Debug)]
struct AnalysisOpts {
    /// TOML file with analysis settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    q_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    q_max: Option<f64>,
    #[arg(long)]
    q_step: Option<f64>,
    #[arg(long)]
    n_min: Option<usize>,
    #[arg(long)]
    n_max_divisor: Option<usize>,
    /// Detrending polynomial order.
    #[arg(long)]
    order: Option<usize>,
    /// Segment from the start of the series only.
    #[arg(long)]
    forward_only: bool,
    /// Minimum number of returns for a fund to be analysed.
    #[arg(long)]
    min_length: Option<usize>,
    /// Surrogate ensemble size.
    #[arg(long)]
    ensemble: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    tau_convention: Option<Convention>,
    /// Spectrum points dropped at each end of the q range before the fit.
    #[arg(long)]
    trim: Option<usize>,
    #[arg(long, default_value = "Date")]
    date_col: String,
    #[arg(long, default_value = "Close")]
    close_col: String,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
}

impl AnalysisOpts {
    fn config(&self) -> Result<AnalysisConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => AnalysisConfig::from_file(path)?,
            None => AnalysisConfig::default(),
        };
        if let Some(v) = self.q_min {
            cfg.q_min = v;
        }
        if let Some(v) = self.q_max {
            cfg.q_max = v;
        }
        if let Some(v) = self.q_step {
            cfg.q_step = v;
        }
        if let Some(v) = self.n_min {
            cfg.n_min = v;
        }
        if let Some(v) = self.n_max_divisor {
            cfg.n_max_divisor = v;
        }
        if let Some(v) = self.order {
            cfg.polynomial_order = v;
        }
        if self.forward_only {
            cfg.segmentation = Segmentation::ForwardOnly;
        }
        if let Some(v) = self.min_length {
            cfg.min_length = v;
        }
        if let Some(v) = self.ensemble {
            cfg.ensemble_size = v;
        }
        if let Some(v) = self.seed {
            cfg.base_seed = v;
        }
        if let Some(v) = self.tau_convention {
            cfg.tau_convention = match v {
                Convention::Paper => TauConvention::Paper,
                Convention::PartitionFunction => TauConvention::PartitionFunction,
            };
        }
        if let Some(v) = self.trim {
            cfg.trim_endpoints = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn schema(&self) -> Result<CsvSchema, Error> {
        if !self.delimiter.is_ascii() {
            return Err(Error::Config(format!("delimiter must be ASCII, got {:?}", self.delimiter)));
        }
        Ok(CsvSchema {
            date_col: self.date_col.clone(),
            close_col: self.close_col.clone(),
            delimiter: self.delimiter as u8,
        })
    }
}

enum Failure {
    Usage(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Spec(_) => Failure::Usage(e.to_string()),
            other => Failure::Run(other.to_string()),
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Run(format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(path).map_err(|e| Failure::Run(format!("{}: {e}", path.display())))
}

fn write_reports(out: &Path, report: &BatchReport, cfg: &AnalysisConfig) -> Result<(), Failure> {
    create_dir(out)?;
    write_file(&out.join("report.csv"), &report.to_csv())?;
    write_file(&out.join("report.json"), &report.to_json(cfg)?)?;
    Ok(())
}

fn report_failures(report: &BatchReport) {
    for entry in &report.entries {
        match entry {
            BatchEntry::Failed { code, message, .. } => eprintln!("error: {code}: {message}"),
            BatchEntry::Analyzed { analysis, .. } => {
                if analysis.dropped_rows > 0 {
                    eprintln!(
                        "warning: {}: dropped {} rows with missing closes",
                        analysis.row.code, analysis.dropped_rows
                    );
                }
                if analysis.surrogate.failures > 0 {
                    eprintln!(
                        "warning: {}: {} of {} surrogate members rejected",
                        analysis.row.code, analysis.surrogate.failures, analysis.surrogate.ensemble_size
                    );
                }
            }
        }
    }
}

fn status_code(status: BatchStatus) -> u8 {
    match status {
        BatchStatus::AllSucceeded => 0,
        BatchStatus::PartialFailure => EXIT_PARTIAL,
        BatchStatus::TotalFailure => EXIT_TOTAL,
    }
}

fn run_batch(files: &[PathBuf], out: Option<&Path>, opts: &AnalysisOpts) -> Result<u8, Failure> {
    let cfg = opts.config()?;
    let schema = opts.schema()?;
    if let Some(dir) = out {
        create_dir(dir)?;
    }
    let report = batch(files, &cfg, &schema, out)?;
    report_failures(&report);
    print!("{}", report.to_csv());
    if let Some(dir) = out {
        write_reports(dir, &report, &cfg)?;
    }
    Ok(status_code(report.status()))
}

fn run_surrogate(file: &Path, out: Option<&Path>, opts: &AnalysisOpts) -> Result<u8, Failure> {
    let cfg = opts.config()?;
    let schema = opts.schema()?;
    let ingested = ingest_csv(file, &schema).map_err(|e| Failure::Run(format!("{} stage: {e}", Stage::Ingest)))?;
    let returns = log_returns(&ingested.prices).map_err(|e| Failure::Run(e.to_string()))?;
    if !admit_series(&returns, cfg.min_length) {
        eprintln!(
            "error: {}: {} returns, fewer than the required {}",
            returns.instrument_id(),
            returns.len(),
            cfg.min_length
        );
        return Ok(EXIT_TOTAL);
    }
    let report = match surrogate_analysis(&returns, &cfg.pipeline()?, &cfg.surrogate()) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {}: {e}", returns.instrument_id());
            return Ok(EXIT_TOTAL);
        }
    };
    let text = serde_json::to_string_pretty(&report).map_err(|e| Failure::Run(e.to_string()))? + "\n";
    match out {
        Some(path) => write_file(path, &text)?,
        None => print!("{text}"),
    }
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn run_generate(
    kind: Kind,
    out: &Path,
    length: usize,
    a: f64,
    levels: u32,
    fixed_order: bool,
    hurst: f64,
    seed: u64,
    start: NaiveDate,
    base_price: f64,
    volatility: f64,
) -> Result<u8, Failure> {
    if !(base_price > 0.0 && volatility > 0.0) {
        return Err(Failure::Usage("base price and volatility must be positive".into()));
    }
    let series = match kind {
        Kind::Cascade => binomial_cascade(
            &CascadeSpec {
                multiplier_a: a,
                levels,
                randomize_order: !fixed_order,
            },
            seed,
        )?,
        Kind::Fgn => fractional_gaussian_noise(&FgnSpec {
            hurst_h: hurst,
            length,
            seed,
        })?,
        Kind::White => white_noise(length, seed)?,
    };
    let prices = prices_from_series(&series, start, base_price, volatility)?;
    write_price_csv(out, &prices)?;
    eprintln!("wrote {} rows to {}", prices.len(), out.display());
    Ok(0)
}

fn dispatch(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Analyze { file, out, opts } => {
            let cfg = opts.config()?;
            let schema = opts.schema()?;
            if let Some(dir) = &out {
                create_dir(dir)?;
            }
            let report = batch(std::slice::from_ref(&file), &cfg, &schema, None)?;
            report_failures(&report);
            let report = match (&out, report.entries.into_iter().next()) {
                (Some(dir), Some(BatchEntry::Analyzed { analysis, .. })) => {
                    let artifacts = write_artifacts(dir, &analysis, &cfg.plot_qs)?;
                    BatchReport {
                        entries: vec![BatchEntry::Analyzed {
                            analysis,
                            artifacts: Some(artifacts),
                        }],
                    }
                }
                (_, entry) => BatchReport {
                    entries: entry.into_iter().collect(),
                },
            };
            print!("{}", report.to_csv());
            if let Some(dir) = &out {
                write_reports(dir, &report, &cfg)?;
            }
            Ok(status_code(report.status()))
        }
        Command::Batch { files, out, opts } => run_batch(&files, Some(&out), &opts),
        Command::Surrogate { file, out, opts } => run_surrogate(&file, out.as_deref(), &opts),
        Command::Generate {
            kind,
            out,
            length,
            a,
            levels,
            fixed_order,
            hurst,
            seed,
            start,
            base_price,
            volatility,
        } => run_generate(
            kind,
            &out,
            length,
            a,
            levels,
            fixed_order,
            hurst,
            seed,
            start,
            base_price,
            volatility,
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_TOTAL)
        }
    }
}
