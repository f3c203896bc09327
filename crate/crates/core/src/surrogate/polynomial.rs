//! Ordinary least squares through a Householder QR factorization.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

#[derive(Clone, Debug, PartialEq)]
pub enum OlsError {
    TooFewRows {
        required: usize,
        available: usize,
    },
    /// Column `column` lies in the span of `partners` (empty: the column is zero).
    RankDeficient {
        column: usize,
        partners: Vec<usize>,
    },
}

#[derive(Clone, Debug)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Diagonal of the hat matrix.
    pub leverage: Vec<f64>,
}

/// Relative size of `|R_jj|` against the column norm below which a column is
/// treated as dependent on its predecessors.
const RANK_TOL: f64 = 1e-9;

pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit, OlsError> {
    let (n, m) = x.shape();
    if n < m || m == 0 {
        return Err(OlsError::TooFewRows { required: m.max(1), available: n });
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let q = qr.q();
    for j in 0..m {
        let norm = x.column(j).norm();
        if r[(j, j)].abs() <= RANK_TOL * norm || norm == 0.0 {
            return Err(OlsError::RankDeficient { column: j, partners: partners(x, &r, j) });
        }
    }
    let qty = q.transpose() * y;
    let beta = r.solve_upper_triangular(&qty).expect("nonzero diagonal checked above");
    let fitted = x * &beta;
    let residuals: Vec<f64> = y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
    let leverage = (0..n).map(|i| q.row(i).norm_squared()).collect();
    Ok(OlsFit { coefficients: beta.iter().copied().collect(), residuals, leverage })
}

/// Earlier columns carrying weight in the least-squares representation of column `j`.
fn partners(x: &DMatrix<f64>, r: &DMatrix<f64>, j: usize) -> Vec<usize> {
    if j == 0 || x.column(j).norm() == 0.0 {
        return Vec::new();
    }
    let head = r.view((0, 0), (j, j)).clone_owned();
    let rhs = r.view((0, j), (j, 1)).clone_owned();
    let Some(c) = head.solve_upper_triangular(&rhs) else {
        return Vec::new();
    };
    let target = x.column(j).norm();
    (0..j).filter(|&i| (c[i] * x.column(i).norm()).abs() > 1e-6 * target).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct OlsStats {
    pub r_squared: f64,
    pub adjusted_r_squared: Option<f64>,
    pub f_statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub loocv_rmse: Option<f64>,
}

/// Goodness-of-fit figures for a model with an intercept among its `m` columns.
pub fn stats(fit: &OlsFit, y: &DVector<f64>) -> OlsStats {
    let n = y.len();
    let m = fit.coefficients.len();
    let mean = y.mean();
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let sse: f64 = fit.residuals.iter().map(|e| e * e).sum();
    let r_squared = if sst > 0.0 { (1.0 - sse / sst).min(1.0) } else { 1.0 };
    let dof = n.saturating_sub(m);
    let adjusted_r_squared = (dof > 0 && n > 1).then(|| 1.0 - (1.0 - r_squared) * (n - 1) as f64 / dof as f64);
    let (f_statistic, p_value) = if m > 1 && dof > 0 && sst > 0.0 {
        let ssr = (sst - sse).max(0.0);
        let f = if sse > 0.0 { (ssr / (m - 1) as f64) / (sse / dof as f64) } else { f64::MAX };
        let f = f.min(f64::MAX);
        let p = FisherSnedecor::new((m - 1) as f64, dof as f64).map(|d| d.sf(f).clamp(0.0, 1.0)).ok();
        (Some(f), p)
    } else {
        (None, None)
    };
    let loocv_rmse = loocv(fit);
    OlsStats { r_squared, adjusted_r_squared, f_statistic, p_value, loocv_rmse }
}

/// Leave-one-out RMSE from the hat-matrix identity `e_(i) = e_i / (1 - h_ii)`.
/// `None` when some point has leverage 1 (its deletion leaves the fit underdetermined).
pub fn loocv(fit: &OlsFit) -> Option<f64> {
    let n = fit.residuals.len();
    let mut sum = 0.0;
    for (e, h) in fit.residuals.iter().zip(&fit.leverage) {
        let denom = 1.0 - h;
        if denom <= 1e-10 {
            return None;
        }
        sum += (e / denom).powi(2);
    }
    Some((sum / n as f64).sqrt())
}

pub fn dot(coefficients: &[f64], row: &[f64]) -> f64 {
    coefficients.iter().zip(row).fold(0.0, |acc, (c, x)| acc + c * x)
}
