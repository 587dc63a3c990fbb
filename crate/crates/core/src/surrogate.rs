//! Shuffle surrogates: the full pipeline is re-run on randomly permuted
//! returns and the spectrum parameters are compared against the original.
//!
//! Permuting destroys temporal correlations while keeping the distribution of
//! returns, so the part of the multifractality that survives shuffling is
//! attributable to the distribution alone.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Stage, StageExt};
use crate::pipeline::{run, PipelineConfig};
use crate::series::{shuffle, ReturnSeries};
use crate::spectrum::SpectrumFit;

/// How ensemble members are derived from the original series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Permutation {
    #[default]
    Shuffle,
    /// Members are the original series; a control for the delta arithmetic.
    Identity,
}

/// Member `i` is shuffled with seed `base_seed + i`; parameters are averaged
/// over the members whose spectrum fit succeeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    pub ensemble_size: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub permutation: Permutation,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            ensemble_size: 1000,
            base_seed: crate::DEFAULT_SEED,
            permutation: Permutation::Shuffle,
        }
    }
}

/// Spectrum position, width and skew.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub alpha0: f64,
    pub width: f64,
    pub skew: f64,
}

impl Parameters {
    pub fn from_fit(fit: &SpectrumFit) -> Self {
        Self {
            alpha0: fit.alpha0,
            width: fit.width,
            skew: fit.skew,
        }
    }

    pub fn minus(&self, other: &Parameters) -> Parameters {
        Parameters {
            alpha0: self.alpha0 - other.alpha0,
            width: self.width - other.width,
            skew: self.skew - other.skew,
        }
    }
}

/// Per-member outcome of a surrogate run, in seed order.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub members: Vec<Option<Parameters>>,
}

impl Ensemble {
    pub fn successes(&self) -> impl Iterator<Item = &Parameters> {
        self.members.iter().flatten()
    }

    pub fn failures(&self) -> usize {
        self.members.iter().filter(|m| m.is_none()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurrogateReport {
    pub original: Parameters,
    pub randomized: Parameters,
    pub deltas: Parameters,
    pub ensemble_stddev: Parameters,
    pub ensemble_size: usize,
    pub failures: usize,
    #[serde(skip)]
    pub members: Vec<Option<Parameters>>,
}

impl SurrogateReport {
    pub fn new(original: Parameters, ensemble: Ensemble) -> Result<Self> {
        let ok: Vec<&Parameters> = ensemble.successes().collect();
        if ok.is_empty() {
            return Err(Error::DegenerateEnsemble(ensemble.members.len()));
        }
        let count = ok.len() as f64;
        // sequential sums in seed order keep the result schedule-independent
        let mean = |get: fn(&Parameters) -> f64| ok.iter().map(|p| get(p)).sum::<f64>() / count;
        let randomized = Parameters {
            alpha0: mean(|p| p.alpha0),
            width: mean(|p| p.width),
            skew: mean(|p| p.skew),
        };
        let stddev = |get: fn(&Parameters) -> f64, m: f64| {
            if ok.len() < 2 {
                0.0
            } else {
                (ok.iter().map(|p| (get(p) - m).powi(2)).sum::<f64>() / (count - 1.0)).sqrt()
            }
        };
        let ensemble_stddev = Parameters {
            alpha0: stddev(|p| p.alpha0, randomized.alpha0),
            width: stddev(|p| p.width, randomized.width),
            skew: stddev(|p| p.skew, randomized.skew),
        };
        Ok(Self {
            original,
            randomized,
            deltas: original.minus(&randomized),
            ensemble_stddev,
            ensemble_size: ensemble.members.len(),
            failures: ensemble.failures(),
            members: ensemble.members,
        })
    }
}

/// Runs the pipeline on every ensemble member. Rejected fits become `None`.
pub fn surrogate_ensemble(
    returns: &ReturnSeries,
    pipeline: &PipelineConfig,
    cfg: &SurrogateConfig,
) -> Result<Ensemble> {
    if cfg.ensemble_size == 0 {
        return Err(Error::Config("ensemble_size must be at least 1".into()));
    }
    let members = (0..cfg.ensemble_size)
        .into_par_iter()
        .map(|i| {
            let member = match cfg.permutation {
                Permutation::Shuffle => shuffle(returns, cfg.base_seed.wrapping_add(i as u64)),
                Permutation::Identity => returns.clone(),
            };
            run(member.values(), pipeline)
                .ok()
                .map(|out| Parameters::from_fit(&out.fit))
        })
        .collect();
    Ok(Ensemble { members })
}

/// Original versus shuffled parameters for one return series.
pub fn surrogate_analysis(
    returns: &ReturnSeries,
    pipeline: &PipelineConfig,
    cfg: &SurrogateConfig,
) -> Result<SurrogateReport> {
    let original = run(returns.values(), pipeline)?;
    let ensemble = surrogate_ensemble(returns, pipeline, cfg).stage(Stage::Surrogate)?;
    SurrogateReport::new(Parameters::from_fit(&original.fit), ensemble).stage(Stage::Surrogate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(alpha0: f64, width: f64, skew: f64) -> Parameters {
        Parameters { alpha0, width, skew }
    }

    #[test]
    fn report_means_and_failures() {
        let ensemble = Ensemble {
            members: vec![Some(p(0.5, 0.2, 1.0)), None, Some(p(0.7, 0.4, 2.0))],
        };
        let r = SurrogateReport::new(p(0.9, 0.8, 0.5), ensemble).unwrap();
        assert_eq!(r.failures, 1);
        assert_eq!(r.ensemble_size, 3);
        assert!((r.randomized.alpha0 - 0.6).abs() < 1e-15);
        assert!((r.randomized.width - 0.3).abs() < 1e-15);
        assert!((r.randomized.skew - 1.5).abs() < 1e-15);
        assert_eq!(r.deltas.alpha0, r.original.alpha0 - r.randomized.alpha0);
        assert_eq!(r.deltas.width, r.original.width - r.randomized.width);
        assert_eq!(r.deltas.skew, r.original.skew - r.randomized.skew);
        assert!((r.ensemble_stddev.alpha0 - 0.02f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn all_failures_is_degenerate() {
        let ensemble = Ensemble {
            members: vec![None, None],
        };
        assert!(matches!(
            SurrogateReport::new(p(1.0, 1.0, 1.0), ensemble),
            Err(Error::DegenerateEnsemble(2))
        ));
    }

    #[test]
    fn zero_ensemble_is_rejected() {
        let r = ReturnSeries::from_values("X", vec![0.0; 10]).unwrap();
        let cfg = SurrogateConfig {
            ensemble_size: 0,
            ..Default::default()
        };
        assert!(surrogate_ensemble(&r, &PipelineConfig::default(), &cfg).is_err());
    }
}
