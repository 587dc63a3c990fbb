//! Mass exponents, the Legendre transform to the singularity spectrum, and the
//! quartic spectrum fit yielding position, width and skew.

use serde::{Deserialize, Serialize};

use crate::engine::{HurstCurve, QGrid};
use crate::error::{Error, Result};
use crate::linalg::least_squares;

/// Half-width of the band around `r = 1` classified as symmetric.
pub const SYMMETRY_BAND: f64 = 0.05;

/// Outward scan step and bound used to bracket the spectrum support.
const ROOT_SCAN_STEP: f64 = 0.01;
const ROOT_SCAN_LIMIT: f64 = 5.0;

/// How `tau(q)` is formed from `h(q)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauConvention {
    /// `tau = q h(q)`. The spectrum peaks at `f = 0` and its support is read at
    /// `f = -1`.
    #[default]
    Paper,
    /// `tau = q h(q) - 1`. The spectrum peaks at `f = 1` and its support is
    /// read at `f = 0`.
    PartitionFunction,
}

impl TauConvention {
    fn tau_offset(self) -> f64 {
        match self {
            TauConvention::Paper => 0.0,
            TauConvention::PartitionFunction => -1.0,
        }
    }

    /// Level of `f` at which the fitted spectrum is cut to find `alpha_min` and
    /// `alpha_max`.
    pub fn zero_level(self) -> f64 {
        match self {
            TauConvention::Paper => -1.0,
            TauConvention::PartitionFunction => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauCurve {
    pub qs: QGrid,
    pub tau: Vec<f64>,
    pub convention: TauConvention,
    /// Interior grid points where the second difference of `tau` is positive
    /// (a concave `tau` has none).
    pub concavity_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularitySpectrum {
    pub qs: QGrid,
    pub alpha: Vec<f64>,
    pub f: Vec<f64>,
    pub convention: TauConvention,
}

/// Options for [`fit_quartic`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FitOptions {
    /// Points dropped from each end of the q grid before fitting.
    pub trim_endpoints: usize,
}

/// Quartic fit `f = A + B u + C u^2 + D u^3 + E u^4`, `u = alpha - alpha0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumFit {
    pub coefficients: [f64; 5],
    pub alpha0: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub width: f64,
    pub skew: f64,
    pub rms_residual: f64,
    pub zero_level: f64,
}

impl SpectrumFit {
    pub fn eval(&self, alpha: f64) -> f64 {
        eval_poly(&self.coefficients, alpha - self.alpha0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkewClass {
    Symmetric,
    RightSkewed,
    LeftSkewed,
}

impl SkewClass {
    pub fn from_ratio(r: f64) -> Self {
        if (r - 1.0).abs() <= SYMMETRY_BAND {
            SkewClass::Symmetric
        } else if r > 1.0 {
            SkewClass::RightSkewed
        } else {
            SkewClass::LeftSkewed
        }
    }
}

pub fn tau_curve(h: &HurstCurve, convention: TauConvention) -> TauCurve {
    let offset = convention.tau_offset();
    let tau: Vec<f64> = h
        .qs
        .values()
        .iter()
        .zip(&h.h)
        .map(|(q, hq)| q * hq + offset)
        .collect();
    let qs = h.qs.values();
    let concavity_violations = (1..qs.len().saturating_sub(1))
        .filter(|&i| {
            let left = (tau[i] - tau[i - 1]) / (qs[i] - qs[i - 1]);
            let right = (tau[i + 1] - tau[i]) / (qs[i + 1] - qs[i]);
            right - left > 1e-12 * (1.0 + left.abs())
        })
        .count();
    TauCurve {
        qs: h.qs.clone(),
        tau,
        convention,
        concavity_violations,
    }
}

/// Derivative at `x[0]` of the parabola through three points.
fn three_point_derivative(x: [f64; 3], y: [f64; 3]) -> f64 {
    y[0] * (2.0 * x[0] - x[1] - x[2]) / ((x[0] - x[1]) * (x[0] - x[2]))
        + y[1] * (x[0] - x[2]) / ((x[1] - x[0]) * (x[1] - x[2]))
        + y[2] * (x[0] - x[1]) / ((x[2] - x[0]) * (x[2] - x[1]))
}

/// `alpha = d tau / dq` by finite differences, `f = q alpha - tau`.
///
/// Interior points use central differences; the two ends use the one-sided
/// three-point formula.
pub fn legendre(tau: &TauCurve) -> Result<SingularitySpectrum> {
    let q = tau.qs.values();
    let t = &tau.tau;
    let len = q.len();
    if len < 3 {
        return Err(Error::TooFewSpectrumPoints(len));
    }
    let mut alpha = Vec::with_capacity(len);
    alpha.push(three_point_derivative([q[0], q[1], q[2]], [t[0], t[1], t[2]]));
    for i in 1..len - 1 {
        alpha.push((t[i + 1] - t[i - 1]) / (q[i + 1] - q[i - 1]));
    }
    alpha.push(three_point_derivative(
        [q[len - 1], q[len - 2], q[len - 3]],
        [t[len - 1], t[len - 2], t[len - 3]],
    ));
    let f = q
        .iter()
        .zip(&alpha)
        .zip(t)
        .map(|((qi, ai), ti)| qi * ai - ti)
        .collect();
    Ok(SingularitySpectrum {
        qs: tau.qs.clone(),
        alpha,
        f,
        convention: tau.convention,
    })
}

fn eval_poly(c: &[f64], u: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, ci| acc * u + ci)
}

fn derivative(c: &[f64; 5]) -> [f64; 4] {
    [c[1], 2.0 * c[2], 3.0 * c[3], 4.0 * c[4]]
}

fn fit_around(alpha: &[f64], f: &[f64], center: f64) -> Result<[f64; 5]> {
    let design: Vec<f64> = alpha
        .iter()
        .flat_map(|&a| {
            let u = a - center;
            [1.0, u, u * u, u * u * u, u * u * u * u]
        })
        .collect();
    let sol = least_squares(&design, alpha.len(), 5, f).ok_or_else(|| {
        Error::SpectrumNotClosed("singular quartic design (alpha values too concentrated)".into())
    })?;
    Ok([sol[0], sol[1], sol[2], sol[3], sol[4]])
}

/// Bisection for a sign change of `g` on `[lo, hi]`.
fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut g_lo = g(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let g_mid = g(mid);
        if g_mid == 0.0 {
            return mid;
        }
        if (g_mid > 0.0) == (g_lo > 0.0) {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Stationary point of the quartic nearest `u = 0`, preferring local maxima.
fn nearest_stationary_point(c: &[f64; 5]) -> Option<f64> {
    let d = derivative(c);
    let dd = [d[1], 2.0 * d[2], 3.0 * d[3]];
    let step = 1e-3;
    let steps = (ROOT_SCAN_LIMIT / step) as i64;
    let mut roots = Vec::new();
    let mut prev_u = -ROOT_SCAN_LIMIT;
    let mut prev = eval_poly(&d, prev_u);
    for i in (-steps + 1)..=steps {
        let u = i as f64 * step;
        let cur = eval_poly(&d, u);
        if prev == 0.0 {
            roots.push(prev_u);
        } else if (prev > 0.0) != (cur > 0.0) && cur != 0.0 {
            roots.push(bisect(|x| eval_poly(&d, x), prev_u, u));
        }
        prev_u = u;
        prev = cur;
    }
    let by_distance = |a: &f64, b: &f64| a.abs().total_cmp(&b.abs());
    roots
        .iter()
        .copied()
        .filter(|&u| eval_poly(&dd, u) < 0.0)
        .min_by(by_distance)
        .or_else(|| roots.iter().copied().min_by(by_distance))
}

/// First crossing of `level` walking from `alpha0` in direction `dir`.
fn support_edge(c: &[f64; 5], level: f64, dir: f64) -> Option<f64> {
    let g = |u: f64| eval_poly(c, u) - level;
    let steps = (ROOT_SCAN_LIMIT / ROOT_SCAN_STEP).round() as usize;
    let mut prev_u = 0.0;
    for i in 1..=steps {
        let u = dir * i as f64 * ROOT_SCAN_STEP;
        if g(u) <= 0.0 {
            return Some(bisect(g, prev_u, u));
        }
        prev_u = u;
    }
    None
}

/// Fits the quartic to the spectrum and reads off `alpha0`, `W` and `r`.
pub fn fit_quartic(spec: &SingularitySpectrum, options: &FitOptions) -> Result<SpectrumFit> {
    let k = options.trim_endpoints;
    let len = spec.alpha.len();
    if len < 2 * k + 6 {
        return Err(Error::TooFewSpectrumPoints(len.saturating_sub(2 * k)));
    }
    let alpha = &spec.alpha[k..len - k];
    let f = &spec.f[k..len - k];
    if let Some(index) = alpha.iter().chain(f).position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }

    let mut sorted = alpha.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup_by(|a, b| (*a - *b).abs() <= 1e-10);
    if sorted.len() < 6 {
        return Err(Error::TooFewSpectrumPoints(sorted.len()));
    }

    let peak = f
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    let initial = alpha[peak];
    let first = fit_around(alpha, f, initial)?;
    let shift = nearest_stationary_point(&first).ok_or_else(|| {
        Error::SpectrumNotClosed("fitted quartic has no stationary point near the peak".into())
    })?;
    let alpha0 = initial + shift;
    let coefficients = fit_around(alpha, f, alpha0)?;

    let level = spec.convention.zero_level();
    if !(coefficients[0] > level) {
        return Err(Error::SpectrumNotClosed(format!(
            "fitted maximum {:.4} does not exceed the zero level {level}",
            coefficients[0]
        )));
    }
    let right = support_edge(&coefficients, level, 1.0).ok_or_else(|| {
        Error::SpectrumNotClosed(format!("no root above alpha0 = {alpha0:.4} within +{ROOT_SCAN_LIMIT}"))
    })?;
    let left = support_edge(&coefficients, level, -1.0).ok_or_else(|| {
        Error::SpectrumNotClosed(format!("no root below alpha0 = {alpha0:.4} within -{ROOT_SCAN_LIMIT}"))
    })?;
    let alpha_min = alpha0 + left;
    let alpha_max = alpha0 + right;

    let rms_residual = (alpha
        .iter()
        .zip(f)
        .map(|(a, fi)| (eval_poly(&coefficients, a - alpha0) - fi).powi(2))
        .sum::<f64>()
        / alpha.len() as f64)
        .sqrt();

    Ok(SpectrumFit {
        coefficients,
        alpha0,
        alpha_min,
        alpha_max,
        width: alpha_max - alpha_min,
        skew: (alpha_max - alpha0) / (alpha0 - alpha_min),
        rms_residual,
        zero_level: level,
    })
}

pub fn classify_skew(fit: &SpectrumFit) -> SkewClass {
    SkewClass::from_ratio(fit.skew)
}
