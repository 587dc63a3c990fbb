//! Engine and spectrum stages chained for one series.

use serde::{Deserialize, Serialize};

use crate::engine::{
    fluctuation_function, hurst_exponents, profile, DetrendConfig, FluctuationSurface,
    HurstCurve, QGrid, ScaleGrid,
};
use crate::error::{Result, Stage, StageExt};
use crate::spectrum::{
    fit_quartic, legendre, tau_curve, FitOptions, SingularitySpectrum, SpectrumFit,
    TauConvention, TauCurve,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub qs: QGrid,
    /// Explicit scales; when absent a grid is derived from the series length.
    pub scales: Option<ScaleGrid>,
    pub n_min: usize,
    pub n_max_divisor: usize,
    pub detrend: DetrendConfig,
    /// Restricts the log-log regression; defaults to the whole scale grid.
    pub fit_range: Option<(usize, usize)>,
    pub tau_convention: TauConvention,
    pub fit: FitOptions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            qs: QGrid::default(),
            scales: None,
            n_min: 10,
            n_max_divisor: 4,
            detrend: DetrendConfig::default(),
            fit_range: None,
            tau_convention: TauConvention::Paper,
            fit: FitOptions::default(),
        }
    }
}

impl PipelineConfig {
    pub fn scales_for(&self, len: usize) -> Result<ScaleGrid> {
        match &self.scales {
            Some(s) => Ok(s.clone()),
            None => ScaleGrid::for_length(len, self.n_min, self.n_max_divisor),
        }
    }
}

/// Everything computed for one series, stage by stage.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineOutput {
    pub surface: FluctuationSurface,
    pub hurst: HurstCurve,
    pub tau: TauCurve,
    pub spectrum: SingularitySpectrum,
    pub fit: SpectrumFit,
}

/// Runs the engine through `h(q)` only.
pub fn run_engine(values: &[f64], cfg: &PipelineConfig) -> Result<(FluctuationSurface, HurstCurve)> {
    let scales = cfg.scales_for(values.len()).stage(Stage::Engine)?;
    let x = profile(values).stage(Stage::Engine)?;
    let surface = fluctuation_function(&x, &scales, &cfg.qs, &cfg.detrend).stage(Stage::Engine)?;
    let range = cfg.fit_range.unwrap_or_else(|| {
        let s = surface.scales.values();
        (s[0], s[s.len() - 1])
    });
    let hurst = hurst_exponents(&surface, range).stage(Stage::Engine)?;
    Ok((surface, hurst))
}

pub fn run(values: &[f64], cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let (surface, hurst) = run_engine(values, cfg)?;
    let tau = tau_curve(&hurst, cfg.tau_convention);
    let spectrum = legendre(&tau).stage(Stage::Spectrum)?;
    let fit = fit_quartic(&spectrum, &cfg.fit).stage(Stage::Spectrum)?;
    Ok(PipelineOutput {
        surface,
        hurst,
        tau,
        spectrum,
        fit,
    })
}
