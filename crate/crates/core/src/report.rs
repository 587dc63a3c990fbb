//! Per-fund analysis, the batch report table and plot-data files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::config::AnalysisConfig;
use crate::error::{Error, Result, Stage, StageExt};
use crate::io::{code_from_path, ingest_csv, CsvSchema};
use crate::pipeline::{run, PipelineOutput};
use crate::series::{admit_series, log_returns, PriceSeries, ReturnSeries};
use crate::surrogate::{surrogate_ensemble, Parameters, SurrogateReport};

/// Header of the report CSV.
pub const REPORT_HEADER: &str = "code,alpha0,W,r,alpha0_rand,W_rand,r_rand,d_alpha0,d_W,d_r";

/// One line of the report: original and randomized parameters and their
/// differences.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FundReportRow {
    pub code: String,
    pub alpha0: f64,
    pub width: f64,
    pub skew: f64,
    pub alpha0_rand: f64,
    pub width_rand: f64,
    pub skew_rand: f64,
    pub d_alpha0: f64,
    pub d_width: f64,
    pub d_skew: f64,
}

impl FundReportRow {
    pub fn new(code: impl Into<String>, original: Parameters, randomized: Parameters) -> Self {
        let delta = original.minus(&randomized);
        Self {
            code: code.into(),
            alpha0: original.alpha0,
            width: original.width,
            skew: original.skew,
            alpha0_rand: randomized.alpha0,
            width_rand: randomized.width,
            skew_rand: randomized.skew,
            d_alpha0: delta.alpha0,
            d_width: delta.width,
            d_skew: delta.skew,
        }
    }

    pub fn numbers(&self) -> [f64; 9] {
        [
            self.alpha0,
            self.width,
            self.skew,
            self.alpha0_rand,
            self.width_rand,
            self.skew_rand,
            self.d_alpha0,
            self.d_width,
            self.d_skew,
        ]
    }

    /// The row as it appears in the CSV report, two decimals per number.
    pub fn csv_line(&self) -> String {
        let mut line = self.code.clone();
        for x in self.numbers() {
            line.push(',');
            line.push_str(&round2(x));
        }
        line
    }
}

/// Two-decimal rendering, halves rounded away from zero. `-0.00` prints as
/// `0.00`.
pub fn round2(x: f64) -> String {
    let r = (x * 100.0).round() / 100.0;
    let r = if r == 0.0 { 0.0 } else { r };
    format!("{r:.2}")
}

/// Full result of analysing one fund.
#[derive(Debug, Clone)]
pub struct FundAnalysis {
    pub row: FundReportRow,
    pub returns_length: usize,
    pub dropped_rows: usize,
    pub output: PipelineOutput,
    pub surrogate: SurrogateReport,
}

/// Runs the whole chain on a return series that already passed admission.
pub fn analyze_returns(returns: &ReturnSeries, cfg: &AnalysisConfig) -> Result<FundAnalysis> {
    let pipeline = cfg.pipeline()?;
    let output = run(returns.values(), &pipeline)?;
    let ensemble = surrogate_ensemble(returns, &pipeline, &cfg.surrogate()).stage(Stage::Surrogate)?;
    let original = Parameters::from_fit(&output.fit);
    let surrogate = SurrogateReport::new(original, ensemble).stage(Stage::Surrogate)?;
    Ok(FundAnalysis {
        row: FundReportRow::new(returns.instrument_id(), surrogate.original, surrogate.randomized),
        returns_length: returns.len(),
        dropped_rows: 0,
        output,
        surrogate,
    })
}

/// Log returns, admission, engine, spectrum and surrogate for one fund.
pub fn analyze_one(prices: &PriceSeries, cfg: &AnalysisConfig) -> Result<FundAnalysis> {
    let returns = log_returns(prices).stage(Stage::Returns)?;
    if !admit_series(&returns, cfg.min_length) {
        return Err(Error::TooShort {
            required: cfg.min_length,
            actual: returns.len(),
        }
        .at(Stage::Admission));
    }
    analyze_returns(&returns, cfg)
}

/// Relative paths of the plot-data files written for one fund.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArtifactPaths {
    pub fluctuation: String,
    pub loglog: String,
    pub hurst: String,
    pub tau: String,
    pub spectrum: String,
    pub quartic: String,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes the per-fund plot-data files under `root/<code>/` and returns their
/// paths relative to `root`.
pub fn write_artifacts(root: &Path, analysis: &FundAnalysis, plot_qs: &[f64]) -> Result<ArtifactPaths> {
    let code = &analysis.row.code;
    let dir = root.join(code);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let out = &analysis.output;
    let scales = out.surface.scales.values();
    let qs = out.surface.qs.values();

    let mut text = String::from("q,n,ln_n,F,ln_F\n");
    for (q, row) in qs.iter().zip(&out.surface.f) {
        for (n, f) in scales.iter().zip(row) {
            let _ = writeln!(text, "{q},{n},{},{f},{}", (*n as f64).ln(), f.ln());
        }
    }
    write_text(&dir.join("fluctuation.csv"), &text)?;

    let selected: Vec<(f64, &Vec<f64>)> = plot_qs
        .iter()
        .filter_map(|&q| out.surface.qs.position(q).map(|i| (q, &out.surface.f[i])))
        .collect();
    let mut text = String::from("ln_n");
    for (q, _) in &selected {
        let _ = write!(text, ",ln_F_q{q}");
    }
    text.push('\n');
    for (j, n) in scales.iter().enumerate() {
        let _ = write!(text, "{}", (*n as f64).ln());
        for (_, row) in &selected {
            let _ = write!(text, ",{}", row[j].ln());
        }
        text.push('\n');
    }
    write_text(&dir.join("loglog.csv"), &text)?;

    let mut text = String::from("q,h,stderr\n");
    for ((q, h), se) in qs.iter().zip(&out.hurst.h).zip(&out.hurst.stderr) {
        let _ = writeln!(text, "{q},{h},{se}");
    }
    write_text(&dir.join("hurst.csv"), &text)?;

    let mut text = String::from("q,tau\n");
    for (q, t) in qs.iter().zip(&out.tau.tau) {
        let _ = writeln!(text, "{q},{t}");
    }
    write_text(&dir.join("tau.csv"), &text)?;

    let mut text = String::from("q,alpha,f\n");
    for ((q, a), f) in qs.iter().zip(&out.spectrum.alpha).zip(&out.spectrum.f) {
        let _ = writeln!(text, "{q},{a},{f}");
    }
    write_text(&dir.join("spectrum.csv"), &text)?;

    write_text(
        &dir.join("quartic.json"),
        &serde_json::to_string_pretty(&out.fit)?,
    )?;

    let rel = |name: &str| format!("{code}/{name}");
    Ok(ArtifactPaths {
        fluctuation: rel("fluctuation.csv"),
        loglog: rel("loglog.csv"),
        hurst: rel("hurst.csv"),
        tau: rel("tau.csv"),
        spectrum: rel("spectrum.csv"),
        quartic: rel("quartic.json"),
    })
}

/// Outcome for one input file of a batch.
#[derive(Debug, Clone)]
pub enum BatchEntry {
    Analyzed {
        analysis: Box<FundAnalysis>,
        artifacts: Option<ArtifactPaths>,
    },
    Failed {
        code: String,
        stage: Option<Stage>,
        message: String,
    },
}

impl BatchEntry {
    pub fn code(&self) -> &str {
        match self {
            BatchEntry::Analyzed { analysis, .. } => &analysis.row.code,
            BatchEntry::Failed { code, .. } => code,
        }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self, BatchEntry::Analyzed { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchStatus {
    AllSucceeded,
    PartialFailure,
    TotalFailure,
}

#[derive(Debug, Clone)]
pub struct BatchReport {
    pub entries: Vec<BatchEntry>,
}

impl BatchReport {
    pub fn status(&self) -> BatchStatus {
        let ok = self.entries.iter().filter(|e| e.is_ok()).count();
        if ok == self.entries.len() {
            BatchStatus::AllSucceeded
        } else if ok == 0 {
            BatchStatus::TotalFailure
        } else {
            BatchStatus::PartialFailure
        }
    }

    /// Table view: header plus one line per input. Failed inputs keep their
    /// code and leave the nine numeric fields empty.
    pub fn to_csv(&self) -> String {
        let mut text = String::from(REPORT_HEADER);
        text.push('\n');
        for entry in &self.entries {
            match entry {
                BatchEntry::Analyzed { analysis, .. } => text.push_str(&analysis.row.csv_line()),
                BatchEntry::Failed { code, .. } => {
                    text.push_str(code);
                    text.push_str(&",".repeat(9));
                }
            }
            text.push('\n');
        }
        text
    }

    /// Full-precision view with per-stage artifact references.
    pub fn to_json(&self, cfg: &AnalysisConfig) -> Result<String> {
        let funds: Vec<FundJson> = self.entries.iter().map(FundJson::from).collect();
        let doc = ReportJson { config: cfg, funds };
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        Ok(text)
    }
}

#[derive(Serialize)]
struct ReportJson<'a> {
    config: &'a AnalysisConfig,
    funds: Vec<FundJson<'a>>,
}

#[derive(Serialize)]
struct FundJson<'a> {
    code: &'a str,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    stage: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<FundResultJson<'a>>,
}

#[derive(Serialize)]
struct FundResultJson<'a> {
    returns_length: usize,
    dropped_rows: usize,
    hurst_h2: Option<f64>,
    row: &'a FundReportRow,
    surrogate: &'a SurrogateReport,
    quartic_coefficients: [f64; 5],
    alpha_min: f64,
    alpha_max: f64,
    rms_residual: f64,
    floored_segments: usize,
    concavity_violations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    artifacts: Option<&'a ArtifactPaths>,
}

impl<'a> From<&'a BatchEntry> for FundJson<'a> {
    fn from(entry: &'a BatchEntry) -> Self {
        match entry {
            BatchEntry::Analyzed {
                analysis,
                artifacts,
            } => {
                let out = &analysis.output;
                FundJson {
                    code: &analysis.row.code,
                    status: "ok",
                    stage: None,
                    error: None,
                    result: Some(FundResultJson {
                        returns_length: analysis.returns_length,
                        dropped_rows: analysis.dropped_rows,
                        hurst_h2: out.hurst.hurst(),
                        row: &analysis.row,
                        surrogate: &analysis.surrogate,
                        quartic_coefficients: out.fit.coefficients,
                        alpha_min: out.fit.alpha_min,
                        alpha_max: out.fit.alpha_max,
                        rms_residual: out.fit.rms_residual,
                        floored_segments: out.surface.floored_segments,
                        concavity_violations: out.tau.concavity_violations,
                        artifacts: artifacts.as_ref(),
                    }),
                }
            }
            BatchEntry::Failed {
                code,
                stage,
                message,
            } => FundJson {
                code,
                status: "failed",
                stage: stage.map(|s| s.to_string()),
                error: Some(message),
                result: None,
            },
        }
    }
}

/// Ingests and analyses one file; failures are labelled with their stage.
pub fn analyze_file(path: &Path, cfg: &AnalysisConfig, schema: &CsvSchema) -> Result<FundAnalysis> {
    let ingested = ingest_csv(path, schema).stage(Stage::Ingest)?;
    let mut analysis = analyze_one(&ingested.prices, cfg)?;
    analysis.dropped_rows = ingested.dropped_rows;
    Ok(analysis)
}

/// Analyses every file, in input order. When `artifact_root` is given the
/// plot-data files of successful funds are written beneath it.
pub fn batch(
    paths: &[PathBuf],
    cfg: &AnalysisConfig,
    schema: &CsvSchema,
    artifact_root: Option<&Path>,
) -> Result<BatchReport> {
    if paths.is_empty() {
        return Err(Error::Config("batch needs at least one input file".into()));
    }
    cfg.validate()?;
    let entries = paths
        .par_iter()
        .map(|path| {
            let result = analyze_file(path, cfg, schema).and_then(|analysis| {
                let artifacts = artifact_root
                    .map(|root| write_artifacts(root, &analysis, &cfg.plot_qs))
                    .transpose()?;
                Ok((analysis, artifacts))
            });
            match result {
                Ok((analysis, artifacts)) => BatchEntry::Analyzed {
                    analysis: Box::new(analysis),
                    artifacts,
                },
                Err(e) => BatchEntry::Failed {
                    code: code_from_path(path),
                    stage: e.stage(),
                    message: e.to_string(),
                },
            }
        })
        .collect();
    Ok(BatchReport { entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(alpha0: f64, width: f64, skew: f64) -> Parameters {
        Parameters { alpha0, width, skew }
    }

    #[test]
    fn rounding_rule() {
        assert_eq!(round2(0.474999), "0.47");
        assert_eq!(round2(0.475), "0.48");
        assert_eq!(round2(-0.05000000000000004), "-0.05");
        assert_eq!(round2(-0.001), "0.00");
        assert_eq!(round2(2.0), "2.00");
    }

    #[test]
    fn first_published_row_golden() {
        let row = FundReportRow::new("FR0010001214", params(0.75, 0.89, 0.47), params(0.64, 0.67, 0.52));
        assert_eq!(row.d_alpha0, 0.75 - 0.64);
        assert_eq!(row.d_width, 0.89 - 0.67);
        assert_eq!(row.d_skew, 0.47 - 0.52);
        assert_eq!(
            row.csv_line(),
            "FR0010001214,0.75,0.89,0.47,0.64,0.67,0.52,0.11,0.22,-0.05"
        );
    }

    #[test]
    fn csv_row_has_ten_fields() {
        let row = FundReportRow::new("X", params(1.0, 2.0, 3.0), params(0.5, 0.5, 0.5));
        assert_eq!(row.csv_line().split(',').count(), 10);
        assert_eq!(REPORT_HEADER.split(',').count(), 10);
    }

    #[test]
    fn empty_batch_is_usage_error() {
        assert!(batch(&[], &AnalysisConfig::default(), &CsvSchema::default(), None).is_err());
    }
}
