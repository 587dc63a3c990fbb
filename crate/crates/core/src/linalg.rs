//! Small dense least-squares helpers shared by the detrending and spectrum fits.

/// Orthonormal basis of the polynomials of degree `<= order` sampled at
/// `0..len`, stored column-major (`order + 1` columns of `len` values).
///
/// The basis is built by twice-iterated modified Gram-Schmidt on powers of the
/// centred and scaled index, which keeps it well conditioned for the segment
/// lengths used in practice.
#[derive(Debug, Clone)]
pub struct PolyBasis {
    len: usize,
    columns: Vec<Vec<f64>>,
}

impl PolyBasis {
    /// Returns `None` when `len < order + 1` (no unique fit).
    pub fn new(len: usize, order: usize) -> Option<Self> {
        if len < order + 1 {
            return None;
        }
        let mid = (len as f64 - 1.0) / 2.0;
        let half = mid.max(1.0);
        let t: Vec<f64> = (0..len).map(|k| (k as f64 - mid) / half).collect();

        let mut columns: Vec<Vec<f64>> = Vec::with_capacity(order + 1);
        for degree in 0..=order {
            let mut v: Vec<f64> = t.iter().map(|&x| x.powi(degree as i32)).collect();
            for _ in 0..2 {
                for q in &columns {
                    let proj = dot(q, &v);
                    v.iter_mut().zip(q).for_each(|(vi, qi)| *vi -= proj * qi);
                }
            }
            let norm = dot(&v, &v).sqrt();
            if !(norm > 0.0) {
                return None;
            }
            v.iter_mut().for_each(|vi| *vi /= norm);
            columns.push(v);
        }
        Some(Self { len, columns })
    }

    #[cfg(test)]
    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    /// Writes `y - P y` into `out`, where `P` projects onto the basis.
    pub fn residuals_into(&self, y: &[f64], out: &mut Vec<f64>) {
        debug_assert_eq!(y.len(), self.len);
        out.clear();
        out.extend_from_slice(y);
        for q in &self.columns {
            let proj = dot(q, out);
            out.iter_mut().zip(q).for_each(|(ri, qi)| *ri -= proj * qi);
        }
    }

    /// Mean squared residual of `y` after removing its projection.
    pub fn residual_variance(&self, y: &[f64], scratch: &mut Vec<f64>) -> f64 {
        self.residuals_into(y, scratch);
        dot(scratch, scratch) / self.len as f64
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `min ||A x - b||` by Householder QR. `a` is row-major `rows x cols`.
/// Returns `None` for rank-deficient systems.
pub fn least_squares(a: &[f64], rows: usize, cols: usize, b: &[f64]) -> Option<Vec<f64>> {
    assert_eq!(a.len(), rows * cols);
    assert_eq!(b.len(), rows);
    if rows < cols {
        return None;
    }
    let mut r = a.to_vec();
    let mut y = b.to_vec();
    let scale = r.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);

    for j in 0..cols {
        let norm = (j..rows).map(|i| r[i * cols + j].powi(2)).sum::<f64>().sqrt();
        if norm <= 1e-13 * scale {
            return None;
        }
        let alpha = if r[j * cols + j] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (j..rows).map(|i| r[i * cols + j]).collect();
        v[0] -= alpha;
        let vnorm2 = dot(&v, &v);
        if vnorm2 == 0.0 {
            continue;
        }
        for k in j..cols {
            let s = (j..rows).map(|i| v[i - j] * r[i * cols + k]).sum::<f64>() * 2.0 / vnorm2;
            for i in j..rows {
                r[i * cols + k] -= s * v[i - j];
            }
        }
        let s = (j..rows).map(|i| v[i - j] * y[i]).sum::<f64>() * 2.0 / vnorm2;
        for i in j..rows {
            y[i] -= s * v[i - j];
        }
    }

    let mut x = vec![0.0; cols];
    for j in (0..cols).rev() {
        let tail: f64 = (j + 1..cols).map(|k| r[j * cols + k] * x[k]).sum();
        x[j] = (y[j] - tail) / r[j * cols + j];
    }
    Some(x)
}

/// Ordinary least-squares line `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; zero for an exact or two-point fit.
    pub slope_stderr: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|xi| (xi - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_stderr = if n > 2 {
        let sse: f64 = x
            .iter()
            .zip(y)
            .map(|(xi, yi)| (yi - intercept - slope * xi).powi(2))
            .sum();
        (sse / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some(LineFit {
        slope,
        intercept,
        slope_stderr,
    })
}
