//! Multifractal detrended fluctuation analysis.
//!
//! The series is integrated into a mean-centred profile, cut into
//! non-overlapping segments of each scale `n`, detrended segment by segment
//! with a least-squares polynomial, and the per-segment residual variances are
//! combined into the q-order fluctuation function `F_q(n)`. The generalized
//! Hurst exponent `h(q)` is the slope of `ln F_q(n)` against `ln n`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{fit_line, PolyBasis};

/// Variance floor applied to flat segments before taking moments.
pub const VARIANCE_FLOOR: f64 = 1e-24;

/// Ordered moment orders. `q = 0` is allowed and uses the logarithmic limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct QGrid(Vec<f64>);

impl QGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidQGrid("empty".into()));
        }
        if values.iter().any(|q| !q.is_finite()) {
            return Err(Error::InvalidQGrid("non-finite entry".into()));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidQGrid("not strictly increasing".into()));
        }
        Ok(Self(values))
    }

    /// `min, min + step, ...` up to and including `max` (within rounding).
    pub fn range(min: f64, max: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(min < max) {
            return Err(Error::InvalidQGrid(format!(
                "need q_min < q_max and q_step > 0, got ({min}, {max}, {step})"
            )));
        }
        let count = ((max - min) / step + 1e-9).floor() as usize + 1;
        let values = (0..count)
            .map(|i| {
                let q = min + i as f64 * step;
                // snap values that should be exactly zero
                if q.abs() < step * 1e-9 {
                    0.0
                } else {
                    q
                }
            })
            .collect();
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn position(&self, q: f64) -> Option<usize> {
        self.0.iter().position(|&v| (v - q).abs() < 1e-12)
    }
}

impl Default for QGrid {
    fn default() -> Self {
        Self::range(-10.0, 10.0, 0.5).expect("default q grid")
    }
}

impl TryFrom<Vec<f64>> for QGrid {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<QGrid> for Vec<f64> {
    fn from(g: QGrid) -> Self {
        g.0
    }
}

/// Ordered segment lengths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct ScaleGrid(Vec<usize>);

impl ScaleGrid {
    pub fn new(values: Vec<usize>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidScaleGrid("empty".into()));
        }
        if values[0] == 0 {
            return Err(Error::InvalidScaleGrid("zero scale".into()));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidScaleGrid("not strictly increasing".into()));
        }
        Ok(Self(values))
    }

    /// About `count` integer scales spaced evenly in `ln n` between `n_min` and
    /// `n_max` inclusive; duplicates produced by rounding are dropped.
    pub fn log_spaced(n_min: usize, n_max: usize, count: usize) -> Result<Self> {
        if n_min == 0 || n_max < n_min {
            return Err(Error::InvalidScaleGrid(format!(
                "bad range [{n_min}, {n_max}]"
            )));
        }
        if count < 2 || n_min == n_max {
            return Self::new(vec![n_min]);
        }
        let (lo, hi) = ((n_min as f64).ln(), (n_max as f64).ln());
        let mut values: Vec<usize> = (0..count)
            .map(|i| (lo + (hi - lo) * i as f64 / (count - 1) as f64).exp().round() as usize)
            .collect();
        values[0] = n_min;
        values[count - 1] = n_max;
        values.dedup();
        Self::new(values)
    }

    /// Conventional grid for a series of length `len`: 20 scales from `n_min`
    /// to `len / divisor`.
    pub fn for_length(len: usize, n_min: usize, divisor: usize) -> Result<Self> {
        if divisor < 2 {
            return Err(Error::InvalidScaleGrid(format!("divisor {divisor} < 2")));
        }
        let n_max = len / divisor;
        if n_max < n_min {
            return Err(Error::InvalidScaleGrid(format!(
                "series of length {len} too short for n_min = {n_min} (n_max = {n_max})"
            )));
        }
        Self::log_spaced(n_min, n_max, 20)
    }

    /// Checks the grid against a series length and polynomial order.
    pub fn validate_for(&self, len: usize, order: usize) -> Result<()> {
        let (min, max) = (self.0[0], *self.0.last().unwrap());
        if min < order + 2 {
            return Err(Error::InvalidScaleGrid(format!(
                "smallest scale {min} below order + 2 = {}",
                order + 2
            )));
        }
        if max > len / 4 {
            return Err(Error::InvalidScaleGrid(format!(
                "largest scale {max} exceeds N/4 = {}",
                len / 4
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<usize>> for ScaleGrid {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ScaleGrid> for Vec<usize> {
    fn from(g: ScaleGrid) -> Self {
        g.0
    }
}

/// Which segments of the profile enter the average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segmentation {
    /// `floor(N/n)` segments from the start only; the tail is discarded.
    ForwardOnly,
    /// Segments from the start and again from the end, `2 floor(N/n)` in total.
    #[default]
    Bidirectional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetrendConfig {
    pub polynomial_order: usize,
    pub segmentation: Segmentation,
}

impl Default for DetrendConfig {
    fn default() -> Self {
        Self {
            polynomial_order: 2,
            segmentation: Segmentation::Bidirectional,
        }
    }
}

/// `F_q(n)` over a scale grid and a q grid, indexed `[q][n]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluctuationSurface {
    pub scales: ScaleGrid,
    pub qs: QGrid,
    pub f: Vec<Vec<f64>>,
    /// Segments whose residual variance was raised to [`VARIANCE_FLOOR`].
    pub floored_segments: usize,
    /// Segments pooled at each scale.
    pub segments_per_scale: Vec<usize>,
}

impl FluctuationSurface {
    pub fn row(&self, q: f64) -> Option<&[f64]> {
        self.qs.position(q).map(|i| self.f[i].as_slice())
    }
}

/// Generalized Hurst exponents with the regression standard errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HurstCurve {
    pub qs: QGrid,
    pub h: Vec<f64>,
    pub stderr: Vec<f64>,
    pub fit_range: (usize, usize),
}

impl HurstCurve {
    /// `h(2)`, the classical Hurst exponent, when 2 is on the grid.
    pub fn hurst(&self) -> Option<f64> {
        self.qs.position(2.0).map(|i| self.h[i])
    }
}

/// Cumulative sum of the mean-centred series.
pub fn profile(x: &[f64]) -> Result<Vec<f64>> {
    if x.len() < 2 {
        return Err(Error::TooShort {
            required: 2,
            actual: x.len(),
        });
    }
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let mut acc = 0.0;
    Ok(x
        .iter()
        .map(|v| {
            acc += v - mean;
            acc
        })
        .collect())
}

/// Non-overlapping segments of length `n` that fit into `len` samples, per
/// direction.
pub fn segment_count(len: usize, n: usize) -> usize {
    assert!(n >= 1, "scale must be positive");
    len / n
}

/// Residuals of a least-squares polynomial fit of degree `order` against the
/// sample index.
pub fn detrend_segment(segment: &[f64], order: usize) -> Result<Vec<f64>> {
    if segment.len() < order + 2 {
        return Err(Error::Underdetermined {
            len: segment.len(),
            order,
        });
    }
    let basis = PolyBasis::new(segment.len(), order).ok_or(Error::Underdetermined {
        len: segment.len(),
        order,
    })?;
    let mut out = Vec::with_capacity(segment.len());
    basis.residuals_into(segment, &mut out);
    Ok(out)
}

/// Start offsets of the segments pooled at scale `n`.
fn segment_starts(len: usize, n: usize, segmentation: Segmentation) -> Vec<usize> {
    let count = segment_count(len, n);
    let forward = (0..count).map(|i| i * n);
    match segmentation {
        Segmentation::ForwardOnly => forward.collect(),
        Segmentation::Bidirectional => forward.chain((0..count).map(|i| len - (i + 1) * n)).collect(),
    }
}

/// Per-segment residual variances at one scale, before flooring.
fn segment_variances(
    profile: &[f64],
    n: usize,
    order: usize,
    segmentation: Segmentation,
) -> Result<Vec<f64>> {
    let basis = PolyBasis::new(n, order).ok_or(Error::Underdetermined { len: n, order })?;
    let mut scratch = Vec::with_capacity(n);
    Ok(segment_starts(profile.len(), n, segmentation)
        .into_iter()
        .map(|s| basis.residual_variance(&profile[s..s + n], &mut scratch))
        .collect())
}

/// Generalized mean of the segment variances, returned as `F_q`.
///
/// Evaluated in log space so large |q| cannot overflow.
fn generalized_fluctuation(log_var: &[f64], q: f64) -> f64 {
    let count = log_var.len() as f64;
    if q == 0.0 {
        return (0.5 * log_var.iter().sum::<f64>() / count).exp();
    }
    let half = q / 2.0;
    let max = log_var
        .iter()
        .map(|lv| half * lv)
        .fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = log_var.iter().map(|lv| (half * lv - max).exp()).sum();
    ((max + (sum / count).ln()) / q).exp()
}

/// Computes `F_q(n)` for every scale and moment order.
pub fn fluctuation_function(
    profile: &[f64],
    scales: &ScaleGrid,
    qs: &QGrid,
    cfg: &DetrendConfig,
) -> Result<FluctuationSurface> {
    scales.validate_for(profile.len(), cfg.polynomial_order)?;

    let per_scale: Vec<(Vec<f64>, usize, usize)> = scales
        .values()
        .par_iter()
        .map(|&n| -> Result<_> {
            let mut variances =
                segment_variances(profile, n, cfg.polynomial_order, cfg.segmentation)?;
            let mut floored = 0;
            for v in variances.iter_mut() {
                if !(*v >= VARIANCE_FLOOR) {
                    *v = VARIANCE_FLOOR;
                    floored += 1;
                }
            }
            if floored == variances.len() {
                return Err(Error::DegenerateSeries { scale: n });
            }
            let log_var: Vec<f64> = variances.iter().map(|v| v.ln()).collect();
            let column = qs
                .values()
                .iter()
                .map(|&q| generalized_fluctuation(&log_var, q))
                .collect();
            Ok((column, floored, variances.len()))
        })
        .collect::<Result<_>>()?;

    let mut f = vec![Vec::with_capacity(scales.len()); qs.len()];
    let mut floored_segments = 0;
    let mut segments_per_scale = Vec::with_capacity(scales.len());
    for (column, floored, count) in per_scale {
        for (row, value) in f.iter_mut().zip(column) {
            row.push(value);
        }
        floored_segments += floored;
        segments_per_scale.push(count);
    }

    Ok(FluctuationSurface {
        scales: scales.clone(),
        qs: qs.clone(),
        f,
        floored_segments,
        segments_per_scale,
    })
}

/// OLS slopes of `ln F_q(n)` on `ln n` over the scales inside `fit_range`.
pub fn hurst_exponents(
    surface: &FluctuationSurface,
    fit_range: (usize, usize),
) -> Result<HurstCurve> {
    let (n_min, n_max) = fit_range;
    let selected: Vec<usize> = surface
        .scales
        .values()
        .iter()
        .enumerate()
        .filter(|(_, &n)| n >= n_min && n <= n_max)
        .map(|(i, _)| i)
        .collect();
    if selected.len() < 4 {
        return Err(Error::FitRange {
            n_min,
            n_max,
            count: selected.len(),
        });
    }
    let log_n: Vec<f64> = selected
        .iter()
        .map(|&i| (surface.scales.values()[i] as f64).ln())
        .collect();

    let mut h = Vec::with_capacity(surface.qs.len());
    let mut stderr = Vec::with_capacity(surface.qs.len());
    for row in &surface.f {
        let log_f: Vec<f64> = selected.iter().map(|&i| row[i].ln()).collect();
        let fit = fit_line(&log_n, &log_f).ok_or(Error::FitRange {
            n_min,
            n_max,
            count: selected.len(),
        })?;
        h.push(fit.slope);
        stderr.push(fit.slope_stderr);
    }
    Ok(HurstCurve {
        qs: surface.qs.clone(),
        h,
        stderr,
        fit_range,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_examples() {
        assert_eq!(profile(&[2.5, 2.5, 2.5]).unwrap(), vec![0.0, 0.0, 0.0]);
        assert_eq!(profile(&[1.0, -1.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(profile(&[3.0, 1.0, 2.0]).unwrap(), vec![1.0, 0.0, 0.0]);
        assert!(profile(&[1.0]).is_err());
    }

    #[test]
    fn segment_counts() {
        assert_eq!(segment_count(10, 3), 3);
        assert_eq!(segment_count(12, 3), 4);
        assert_eq!(segment_count(2779, 700), 3);
    }

    #[test]
    fn bidirectional_starts_cover_tail() {
        assert_eq!(segment_starts(10, 3, Segmentation::ForwardOnly), vec![0, 3, 6]);
        assert_eq!(
            segment_starts(10, 3, Segmentation::Bidirectional),
            vec![0, 3, 6, 7, 4, 1]
        );
    }

    #[test]
    fn detrend_reproduces_polynomials() {
        let seg = [0.0, 1.0, 4.0, 9.0, 16.0];
        for r in detrend_segment(&seg, 2).unwrap() {
            assert!(r.abs() < 1e-12);
        }
        let cubic: Vec<f64> = (0..30).map(|k| {
            let t = k as f64;
            1.0 - 2.0 * t + 0.3 * t * t - 0.01 * t * t * t
        }).collect();
        let scale = cubic.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for r in detrend_segment(&cubic, 3).unwrap() {
            assert!(r.abs() / scale < 1e-9);
        }
    }

    #[test]
    fn detrend_order_zero_removes_mean() {
        let seg = [1.0, 4.0, -2.0, 5.0];
        let r = detrend_segment(&seg, 0).unwrap();
        for (ri, si) in r.iter().zip(seg) {
            assert!((ri - (si - 2.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn detrend_rejects_underdetermined() {
        assert!(matches!(
            detrend_segment(&[1.0, 2.0, 3.0], 2),
            Err(Error::Underdetermined { .. })
        ));
    }

    #[test]
    fn detrend_residuals_orthogonal_and_idempotent() {
        let seg: Vec<f64> = (0..50).map(|k| ((k * 7919) % 101) as f64 / 10.0).collect();
        let r = detrend_segment(&seg, 2).unwrap();
        let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        for p in 0..=2 {
            let dot: f64 = r.iter().enumerate().map(|(k, v)| v * (k as f64).powi(p)).sum();
            let basis_norm = (0..50).map(|k| (k as f64).powi(2 * p)).sum::<f64>().sqrt();
            assert!(dot.abs() <= 1e-8 * norm * basis_norm);
        }
        let again = detrend_segment(&r, 2).unwrap();
        for (a, b) in again.iter().zip(&r) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn equal_variances_give_sqrt_for_every_q() {
        let log_var = vec![0.09f64.ln(); 7];
        for q in [-10.0, -2.0, 0.0, 0.5, 2.0, 10.0] {
            assert!((generalized_fluctuation(&log_var, q) - 0.3).abs() < 1e-14);
        }
    }

    #[test]
    fn q2_is_root_mean_variance() {
        let vars = [0.5f64, 2.0, 1.5, 4.0];
        let log_var: Vec<f64> = vars.iter().map(|v| v.ln()).collect();
        let expected = (vars.iter().sum::<f64>() / 4.0).sqrt();
        assert!((generalized_fluctuation(&log_var, 2.0) - expected).abs() < 1e-14);
    }

    #[test]
    fn grids() {
        let q = QGrid::default();
        assert_eq!(q.len(), 41);
        assert_eq!(q.values()[20], 0.0);
        assert!(q.position(2.0).is_some());
        assert!(QGrid::new(vec![1.0, 1.0]).is_err());

        let s = ScaleGrid::for_length(2779, 10, 4).unwrap();
        assert_eq!(s.values()[0], 10);
        assert_eq!(*s.values().last().unwrap(), 694);
        assert!(s.len() >= 18 && s.len() <= 20);
        assert!(s.validate_for(2779, 2).is_ok());
        assert!(s.validate_for(2000, 2).is_err());
        assert!(ScaleGrid::new(vec![3, 5]).unwrap().validate_for(100, 2).is_err());
    }

    #[test]
    fn constant_series_is_degenerate() {
        let p = profile(&vec![0.01; 400]).unwrap();
        let scales = ScaleGrid::log_spaced(10, 100, 8).unwrap();
        let err = fluctuation_function(&p, &scales, &QGrid::default(), &DetrendConfig::default());
        assert!(matches!(err, Err(Error::DegenerateSeries { .. })));
    }

    #[test]
    fn fit_range_needs_four_scales() {
        let scales = ScaleGrid::new(vec![10, 20, 40, 80, 160]).unwrap();
        let qs = QGrid::new(vec![2.0]).unwrap();
        let surface = FluctuationSurface {
            f: vec![scales.values().iter().map(|&n| (n as f64).powf(0.5)).collect()],
            scales,
            qs,
            floored_segments: 0,
            segments_per_scale: vec![1; 5],
        };
        assert!(hurst_exponents(&surface, (10, 160)).is_ok());
        assert!(matches!(
            hurst_exponents(&surface, (20, 80)),
            Err(Error::FitRange { count: 3, .. })
        ));
    }
}
