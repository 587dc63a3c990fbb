//! Synthetic series with known scaling, used as validation oracles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::ReturnSeries;

/// Binomial multiplicative cascade over `2^levels` cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeSpec {
    pub multiplier_a: f64,
    pub levels: u32,
    /// Decide per split, from the seed, which child receives `a`. When false
    /// the left child always does and the seed is ignored.
    pub randomize_order: bool,
}

impl CascadeSpec {
    pub fn new(multiplier_a: f64, levels: u32) -> Self {
        Self {
            multiplier_a,
            levels,
            randomize_order: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.multiplier_a > 0.5 && self.multiplier_a < 1.0) {
            return Err(Error::Spec(format!(
                "cascade multiplier must lie in (0.5, 1), got {}",
                self.multiplier_a
            )));
        }
        if !(8..=26).contains(&self.levels) {
            return Err(Error::Spec(format!(
                "cascade levels must lie in [8, 26], got {}",
                self.levels
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FgnSpec {
    pub hurst_h: f64,
    pub length: usize,
    pub seed: u64,
}

impl FgnSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.hurst_h > 0.0 && self.hurst_h < 1.0) {
            return Err(Error::Spec(format!(
                "Hurst exponent must lie in (0, 1), got {}",
                self.hurst_h
            )));
        }
        if self.length < 2 {
            return Err(Error::Spec(format!("length must be at least 2, got {}", self.length)));
        }
        Ok(())
    }
}

/// Cell masses of a unit-mass dyadic cascade.
pub fn binomial_cascade(spec: &CascadeSpec, seed: u64) -> Result<ReturnSeries> {
    spec.validate()?;
    let a = spec.multiplier_a;
    let b = 1.0 - a;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells = vec![1.0f64];
    for _ in 0..spec.levels {
        let mut next = Vec::with_capacity(cells.len() * 2);
        for &mass in &cells {
            let left_gets_a = !spec.randomize_order || rng.random::<bool>();
            let (l, r) = if left_gets_a { (a, b) } else { (b, a) };
            next.push(mass * l);
            next.push(mass * r);
        }
        cells = next;
    }
    ReturnSeries::from_values(format!("cascade-a{a}-l{}", spec.levels), cells)
}

/// Autocovariance of unit-variance fractional Gaussian noise at lag `k`.
pub fn fgn_autocovariance(hurst: f64, k: usize) -> f64 {
    let k = k as f64;
    let two_h = 2.0 * hurst;
    0.5 * ((k + 1.0).powf(two_h) - 2.0 * k.powf(two_h) + (k - 1.0).abs().powf(two_h))
}

/// Exact fractional Gaussian noise by circulant embedding of the
/// autocovariance (Davies-Harte).
pub fn fractional_gaussian_noise(spec: &FgnSpec) -> Result<ReturnSeries> {
    spec.validate()?;
    let n = spec.length;
    let m = 2 * n;
    // first row of the circulant: gamma(0..=n), then gamma(n-1..=1)
    let mut row: Vec<Complex<f64>> = (0..=n)
        .chain((1..n).rev())
        .map(|k| Complex::new(fgn_autocovariance(spec.hurst_h, k), 0.0))
        .collect();
    debug_assert_eq!(row.len(), m);

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(m);
    fft.process(&mut row);

    let largest = row.iter().fold(0.0f64, |acc, c| acc.max(c.re.abs()));
    let mut eigen = Vec::with_capacity(m);
    for c in &row {
        if c.re < -1e-10 * largest {
            return Err(Error::Spec(format!(
                "circulant embedding has negative eigenvalue {} for H = {}, N = {n}",
                c.re, spec.hurst_h
            )));
        }
        eigen.push(c.re.max(0.0));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut w: Vec<Complex<f64>> = eigen
        .iter()
        .map(|&lambda| {
            let s = (lambda / m as f64).sqrt();
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex::new(s * re, s * im)
        })
        .collect();
    fft.process(&mut w);
    let values = w[..n].iter().map(|c| c.re).collect();
    ReturnSeries::from_values(format!("fgn-h{}-s{}", spec.hurst_h, spec.seed), values)
}

/// I.i.d. standard normal draws.
pub fn white_noise(length: usize, seed: u64) -> Result<ReturnSeries> {
    if length < 2 {
        return Err(Error::Spec(format!("length must be at least 2, got {length}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..length).map(|_| rng.sample(StandardNormal)).collect();
    ReturnSeries::from_values(format!("white-s{seed}"), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cascade_conserves_mass() {
        for seed in 0..3 {
            let c = binomial_cascade(&CascadeSpec::new(0.75, 12), seed).unwrap();
            assert_eq!(c.len(), 4096);
            let total: f64 = c.values().iter().sum();
            assert!((total - 1.0).abs() < 1e-9);
            assert!(c.values().iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn cascade_fixed_order_matches_binary_digit_rule() {
        let spec = CascadeSpec {
            multiplier_a: 0.7,
            levels: 8,
            randomize_order: false,
        };
        let c = binomial_cascade(&spec, 0).unwrap();
        // cell k gets (1 - a) once per set bit of k
        for (k, v) in c.values().iter().enumerate() {
            let ones = (k as u32).count_ones() as i32;
            let expected = 0.7f64.powi(8 - ones) * 0.3f64.powi(ones);
            assert!((v - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn cascade_spec_validation() {
        assert!(CascadeSpec::new(0.5, 10).validate().is_err());
        assert!(CascadeSpec::new(1.0, 10).validate().is_err());
        assert!(CascadeSpec::new(0.75, 7).validate().is_err());
        assert!(CascadeSpec::new(0.75, 8).validate().is_ok());
    }

    #[test]
    fn fgn_covariance_values() {
        assert!(fgn_autocovariance(0.5, 0) == 1.0);
        for k in 1..10 {
            assert!(fgn_autocovariance(0.5, k).abs() < 1e-15);
        }
        let g1 = fgn_autocovariance(0.8, 1);
        assert!((g1 - 0.5 * (2f64.powf(1.6) - 2.0)).abs() < 1e-15);
        assert!(g1 > 0.0);
        assert!(fgn_autocovariance(0.2, 1) < 0.0);
    }

    #[test]
    fn fgn_sample_autocovariance_matches() {
        let n = 4096;
        let seeds = 50;
        let lags = 6;
        for hurst in [0.3, 0.8] {
            let mut estimates = vec![Vec::new(); lags];
            for seed in 0..seeds {
                let x = fractional_gaussian_noise(&FgnSpec {
                    hurst_h: hurst,
                    length: n,
                    seed,
                })
                .unwrap();
                let v = x.values();
                for (lag, est) in estimates.iter_mut().enumerate() {
                    let s: f64 = (0..n - lag).map(|i| v[i] * v[i + lag]).sum();
                    est.push(s / (n - lag) as f64);
                }
            }
            for (lag, est) in estimates.iter().enumerate() {
                let mean = est.iter().sum::<f64>() / seeds as f64;
                let sd = (est.iter().map(|e| (e - mean).powi(2)).sum::<f64>()
                    / (seeds as f64 - 1.0))
                    .sqrt();
                let se = sd / (seeds as f64).sqrt();
                let gamma = fgn_autocovariance(hurst, lag);
                assert!(
                    (mean - gamma).abs() <= 3.0 * se,
                    "H={hurst} lag={lag}: {mean} vs {gamma} (se {se})"
                );
            }
        }
    }

    #[test]
    fn white_noise_moments_and_determinism() {
        let n = 100_000;
        let x = white_noise(n, 3).unwrap();
        let mean = x.values().iter().sum::<f64>() / n as f64;
        let var = x.values().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        assert!(mean.abs() < 0.02);
        assert!((var - 1.0).abs() < 0.02);
        assert_eq!(white_noise(10, 3).unwrap().values()[0], x.values()[0]);
        assert!(white_noise(1, 0).is_err());
    }

    #[test]
    fn fgn_half_is_white() {
        // variance ratio of fGn(H = 0.5) to white noise over 20 seeds
        let n = 4096;
        let mut ratio = 0.0;
        for seed in 0..20 {
            let f = fractional_gaussian_noise(&FgnSpec {
                hurst_h: 0.5,
                length: n,
                seed,
            })
            .unwrap();
            let w = white_noise(n, 1000 + seed).unwrap();
            let var = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
            ratio += var(f.values()) / var(w.values());
        }
        ratio /= 20.0;
        assert!((ratio - 1.0).abs() < 0.03, "ratio {ratio}");
    }
}
