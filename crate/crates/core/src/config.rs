//! Declarative analysis configuration, loadable from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{DetrendConfig, QGrid, Segmentation};
use crate::error::{Error, Result};
use crate::pipeline::PipelineConfig;
use crate::series::DEFAULT_MIN_LENGTH;
use crate::spectrum::{FitOptions, TauConvention};
use crate::surrogate::{Permutation, SurrogateConfig};

/// Every knob of a fund analysis. Missing keys in a config file fall back to
/// the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub q_min: f64,
    pub q_max: f64,
    pub q_step: f64,
    pub n_min: usize,
    /// Largest scale is `N / n_max_divisor`.
    pub n_max_divisor: usize,
    pub polynomial_order: usize,
    pub segmentation: Segmentation,
    pub min_length: usize,
    pub ensemble_size: usize,
    pub base_seed: u64,
    pub tau_convention: TauConvention,
    pub trim_endpoints: usize,
    /// Moment orders written to the log-log plot file.
    pub plot_qs: Vec<f64>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            q_min: -10.0,
            q_max: 10.0,
            q_step: 0.5,
            n_min: 10,
            n_max_divisor: 4,
            polynomial_order: 2,
            segmentation: Segmentation::Bidirectional,
            min_length: DEFAULT_MIN_LENGTH,
            ensemble_size: 1000,
            base_seed: crate::DEFAULT_SEED,
            tau_convention: TauConvention::Paper,
            trim_endpoints: 0,
            plot_qs: vec![-10.0, 0.0, 10.0],
        }
    }
}

impl AnalysisConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q_min < self.q_max) {
            return Err(Error::Config(format!(
                "q_min ({}) must be below q_max ({})",
                self.q_min, self.q_max
            )));
        }
        if !(self.q_step > 0.0) {
            return Err(Error::Config(format!("q_step must be positive, got {}", self.q_step)));
        }
        if self.n_max_divisor < 2 {
            return Err(Error::Config(format!(
                "n_max_divisor must be at least 2, got {}",
                self.n_max_divisor
            )));
        }
        if self.n_min < self.polynomial_order + 2 {
            return Err(Error::Config(format!(
                "n_min ({}) must be at least polynomial_order + 2 ({})",
                self.n_min,
                self.polynomial_order + 2
            )));
        }
        if self.ensemble_size == 0 {
            return Err(Error::Config("ensemble_size must be at least 1".into()));
        }
        QGrid::range(self.q_min, self.q_max, self.q_step)?;
        Ok(())
    }

    pub fn pipeline(&self) -> Result<PipelineConfig> {
        Ok(PipelineConfig {
            qs: QGrid::range(self.q_min, self.q_max, self.q_step)?,
            scales: None,
            n_min: self.n_min,
            n_max_divisor: self.n_max_divisor,
            detrend: DetrendConfig {
                polynomial_order: self.polynomial_order,
                segmentation: self.segmentation,
            },
            fit_range: None,
            tau_convention: self.tau_convention,
            fit: FitOptions {
                trim_endpoints: self.trim_endpoints,
            },
        })
    }

    pub fn surrogate(&self) -> SurrogateConfig {
        SurrogateConfig {
            ensemble_size: self.ensemble_size,
            base_seed: self.base_seed,
            permutation: Permutation::Shuffle,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = AnalysisConfig::default();
        assert_eq!((c.q_min, c.q_max, c.q_step), (-10.0, 10.0, 0.5));
        assert_eq!((c.n_min, c.n_max_divisor, c.polynomial_order), (10, 4, 2));
        assert_eq!((c.min_length, c.ensemble_size), (700, 1000));
        assert_eq!(c.tau_convention, TauConvention::Paper);
        assert!(c.validate().is_ok());
        assert_eq!(c.pipeline().unwrap().qs.len(), 41);
    }

    #[test]
    fn partial_toml_keeps_defaults() {
        let c = AnalysisConfig::from_toml_str(
            "ensemble_size = 50\ntau_convention = \"partition_function\"\nsegmentation = \"forward_only\"\n",
        )
        .unwrap();
        assert_eq!(c.ensemble_size, 50);
        assert_eq!(c.tau_convention, TauConvention::PartitionFunction);
        assert_eq!(c.segmentation, Segmentation::ForwardOnly);
        assert_eq!(c.q_step, 0.5);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(AnalysisConfig::from_toml_str("q_min = 5.0\nq_max = 1.0").is_err());
        assert!(AnalysisConfig::from_toml_str("q_step = 0.0").is_err());
        assert!(AnalysisConfig::from_toml_str("n_max_divisor = 1").is_err());
        assert!(AnalysisConfig::from_toml_str("bogus = 1").is_err());
        assert!(AnalysisConfig::from_toml_str("n_min = 3").is_err());
    }
}
