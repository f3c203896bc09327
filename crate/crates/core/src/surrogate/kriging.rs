//! Ordinary Kriging with a squared-exponential correlation.
//!
//! For training inputs `x_1..x_n` and outputs `y`, with
//! `R_ij = exp(-sum_k theta_k (x_ik - x_jk)^2) + nugget * [i == j]`:
//!
//! ```text
//! mu      = (1' R^-1 y) / (1' R^-1 1)
//! sigma^2 = (y - mu 1)' R^-1 (y - mu 1) / n
//! ll      = -(n ln sigma^2 + ln |R|) / 2
//! y(x)    = mu + r(x)' R^-1 (y - mu 1)
//! s^2(x)  = sigma^2 (1 - r' R^-1 r + (1 - 1' R^-1 r)^2 / (1' R^-1 1))
//! ```
//!
//! The nugget belongs to the correlation at zero distance, so `r(x_i)` is row
//! `i` of `R` and the predictor reproduces every training output.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KrigingOptions {
    pub theta_bounds: (f64, f64),
    pub nugget: f64,
    pub grid_points: usize,
}

impl Default for KrigingOptions {
    fn default() -> Self {
        Self { theta_bounds: (1e-2, 1e2), nugget: 1e-8, grid_points: 25 }
    }
}

impl KrigingOptions {
    pub fn check(&self) -> Result<(), String> {
        let (lo, hi) = self.theta_bounds;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(format!("theta bounds must satisfy 0 < lower <= upper, got [{lo}, {hi}]"));
        }
        if !(self.nugget > 0.0 && self.nugget.is_finite()) {
            return Err(format!("nugget must be positive, got {}", self.nugget));
        }
        if self.grid_points < 2 {
            return Err("at least 2 grid points per dimension are required".into());
        }
        Ok(())
    }

    fn grid(&self) -> Vec<f64> {
        let (lo, hi) = (self.theta_bounds.0.ln(), self.theta_bounds.1.ln());
        let g = self.grid_points;
        (0..g).map(|k| (lo + (hi - lo) * k as f64 / (g - 1) as f64).exp()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KrigingFit {
    pub theta: Vec<f64>,
    pub nugget: f64,
    pub mean: f64,
    pub sigma2: f64,
    pub log_likelihood: f64,
    pub x: Vec<Vec<f64>>,
    /// `R^-1 (y - mu 1)`.
    pub weights: Vec<f64>,
    /// Lower Cholesky factor of `R`, row-major.
    pub chol: Vec<f64>,
    /// `L^-1 1`.
    pub chol_one: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NotPositiveDefinite;

pub fn correlation(theta: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let s = theta.iter().zip(a.iter().zip(b)).fold(0.0, |acc, (t, (x, y))| acc + t * (x - y) * (x - y));
    (-s).exp()
}

fn corr_matrix(x: &[Vec<f64>], theta: &[f64], nugget: f64) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 + nugget } else { correlation(theta, &x[i], &x[j]) })
}

/// Fits at a fixed `theta`.
pub fn fit_at(x: &[Vec<f64>], y: &[f64], theta: &[f64], nugget: f64) -> Result<KrigingFit, NotPositiveDefinite> {
    let n = x.len();
    let r = corr_matrix(x, theta, nugget);
    let chol = r.cholesky().ok_or(NotPositiveDefinite)?;
    let l = chol.l();
    let ones = DVector::from_element(n, 1.0);
    let yv = DVector::from_column_slice(y);
    let rinv_one = chol.solve(&ones);
    let rinv_y = chol.solve(&yv);
    let denom = ones.dot(&rinv_one);
    let mean = ones.dot(&rinv_y) / denom;
    let resid = &yv - DVector::from_element(n, mean);
    let weights = chol.solve(&resid);
    let scale = y.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let floor = f64::EPSILON * f64::EPSILON * scale.max(1.0);
    let sigma2 = (resid.dot(&weights) / n as f64).max(floor);
    let log_det: f64 = 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let log_likelihood = -0.5 * (n as f64 * sigma2.ln() + log_det);
    if !log_likelihood.is_finite() || !mean.is_finite() {
        return Err(NotPositiveDefinite);
    }
    let chol_one = l.solve_lower_triangular(&ones).ok_or(NotPositiveDefinite)?;
    Ok(KrigingFit {
        theta: theta.to_vec(),
        nugget,
        mean,
        sigma2,
        log_likelihood,
        x: x.to_vec(),
        weights: weights.iter().copied().collect(),
        chol: l.transpose().iter().copied().collect(),
        chol_one: chol_one.iter().copied().collect(),
    })
}

/// `ll` at `theta`, or `None` when the correlation matrix is not positive definite.
pub fn log_likelihood(x: &[Vec<f64>], y: &[f64], theta: &[f64], nugget: f64) -> Option<f64> {
    fit_at(x, y, theta, nugget).ok().map(|f| f.log_likelihood)
}

impl KrigingFit {
    fn cross_correlation(&self, x: &[f64]) -> Vec<f64> {
        self.x
            .iter()
            .map(|xi| if xi.as_slice() == x { 1.0 + self.nugget } else { correlation(&self.theta, xi, x) })
            .collect()
    }

    fn forward(&self, b: &[f64]) -> Vec<f64> {
        let n = self.x.len();
        let mut v = vec![0.0; n];
        for i in 0..n {
            let row = &self.chol[i * n..i * n + i];
            let s = row.iter().zip(&v).fold(b[i], |acc, (l, vj)| acc - l * vj);
            v[i] = s / self.chol[i * n + i];
        }
        v
    }

    /// Kriging variance at `x` divided by the process variance; depends on the
    /// training inputs only.
    pub fn reduced_variance(&self, x: &[f64]) -> f64 {
        let r = self.cross_correlation(x);
        let v = self.forward(&r);
        let rr: f64 = v.iter().map(|a| a * a).sum();
        let ur: f64 = v.iter().zip(&self.chol_one).map(|(a, b)| a * b).sum();
        let uu: f64 = self.chol_one.iter().map(|a| a * a).sum();
        (1.0 - rr + (1.0 - ur).powi(2) / uu).max(0.0)
    }

    /// Predicted mean and Kriging variance at `x`.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let r = self.cross_correlation(x);
        let mean = r.iter().zip(&self.weights).fold(self.mean, |acc, (ri, wi)| acc + ri * wi);
        let v = self.forward(&r);
        let rr: f64 = v.iter().map(|a| a * a).sum();
        let ur: f64 = v.iter().zip(&self.chol_one).map(|(a, b)| a * b).sum();
        let uu: f64 = self.chol_one.iter().map(|a| a * a).sum();
        let var = self.sigma2 * (1.0 - rr + (1.0 - ur).powi(2) / uu);
        (mean, var.max(0.0))
    }

    /// Leave-one-out residuals from the inverse of the bordered matrix
    /// `[[R, 1], [1', 0]]`: `e_i = (K^-1 [y; 0])_i / (K^-1)_ii`.
    pub fn loo_residuals(&self, y: &[f64]) -> Option<Vec<f64>> {
        let n = self.x.len();
        if n < 3 {
            return None;
        }
        let r = corr_matrix(&self.x, &self.theta, self.nugget);
        let k = DMatrix::from_fn(n + 1, n + 1, |i, j| match (i < n, j < n) {
            (true, true) => r[(i, j)],
            (false, false) => 0.0,
            _ => 1.0,
        });
        let inv = k.try_inverse()?;
        let mut rhs = DVector::zeros(n + 1);
        rhs.rows_mut(0, n).copy_from_slice(y);
        let a = &inv * rhs;
        let e: Vec<f64> = (0..n).map(|i| a[i] / inv[(i, i)]).collect();
        e.iter().all(|v| v.is_finite()).then_some(e)
    }
}

/// Every `(theta, ll)` pair evaluated during a search.
pub type SearchTrace = Vec<(Vec<f64>, f64)>;

fn better(a: (f64, &[f64]), b: (f64, &[f64])) -> bool {
    let sum = |t: &[f64]| t.iter().map(|v| v.ln()).sum::<f64>();
    a.0 > b.0 || (a.0 == b.0 && sum(a.1) < sum(b.1))
}

struct Search<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    nugget: f64,
    cache: HashMap<Vec<u64>, Option<f64>>,
    trace: SearchTrace,
    best: Option<(Vec<f64>, f64)>,
}

impl Search<'_> {
    fn eval(&mut self, theta: &[f64]) -> Option<f64> {
        let key: Vec<u64> = theta.iter().map(|t| t.to_bits()).collect();
        if let Some(v) = self.cache.get(&key) {
            return *v;
        }
        let ll = log_likelihood(self.x, self.y, theta, self.nugget);
        self.cache.insert(key, ll);
        if let Some(ll) = ll {
            self.trace.push((theta.to_vec(), ll));
            let replace = match &self.best {
                None => true,
                Some((bt, bl)) => better((ll, theta), (*bl, bt)),
            };
            if replace {
                self.best = Some((theta.to_vec(), ll));
            }
        }
        ll
    }
}

/// Maximizes the concentrated log-likelihood over `theta`: isotropic scan,
/// coordinate search on the log grid from several starts, then golden-section
/// refinement of each coordinate within its best grid cell. Ties go to the
/// smaller `theta`.
pub fn search_theta(
    x: &[Vec<f64>],
    y: &[f64],
    opts: &KrigingOptions,
) -> Result<(Vec<f64>, f64, SearchTrace), NotPositiveDefinite> {
    let dims = x.first().map_or(0, Vec::len);
    let grid = opts.grid();
    let g = grid.len();
    let mut s = Search { x, y, nugget: opts.nugget, cache: HashMap::new(), trace: Vec::new(), best: None };
    let mut iso_best: Option<(usize, f64)> = None;
    for (k, &t) in grid.iter().enumerate() {
        if let Some(ll) = s.eval(&vec![t; dims]) {
            if iso_best.is_none_or(|(_, b)| ll > b) {
                iso_best = Some((k, ll));
            }
        }
    }
    let mut starts = vec![iso_best.map_or(0, |(k, _)| k), g / 4, (3 * g) / 4];
    starts.dedup();
    for start in starts {
        let mut idx = vec![start; dims];
        let mut current = s.eval(&idx.iter().map(|&k| grid[k]).collect::<Vec<_>>());
        for _sweep in 0..20 {
            let mut changed = false;
            for j in 0..dims {
                for k in 0..g {
                    if k == idx[j] {
                        continue;
                    }
                    let mut cand = idx.clone();
                    cand[j] = k;
                    let theta: Vec<f64> = cand.iter().map(|&c| grid[c]).collect();
                    let cur_theta: Vec<f64> = idx.iter().map(|&c| grid[c]).collect();
                    if let Some(ll) = s.eval(&theta) {
                        let wins = match current {
                            None => true,
                            Some(cl) => better((ll, &theta), (cl, &cur_theta)),
                        };
                        if wins {
                            idx = cand;
                            current = Some(ll);
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
    }
    let Some((mut theta, _)) = s.best.clone() else {
        return Err(NotPositiveDefinite);
    };
    let (lo, hi) = (opts.theta_bounds.0.ln(), opts.theta_bounds.1.ln());
    let step = (hi - lo) / (g - 1) as f64;
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    for j in 0..dims {
        let centre = theta[j].ln();
        let (mut a, mut b) = ((centre - step).max(lo), (centre + step).min(hi));
        let probe = |s: &mut Search, base: &[f64], t: f64| {
            let mut th = base.to_vec();
            th[j] = t.exp();
            s.eval(&th).unwrap_or(f64::NEG_INFINITY)
        };
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let mut fc = probe(&mut s, &theta, c);
        let mut fd = probe(&mut s, &theta, d);
        for _ in 0..40 {
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = probe(&mut s, &theta, c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = probe(&mut s, &theta, d);
            }
        }
        theta = s.best.clone().expect("best exists").0;
    }
    let (theta, ll) = s.best.expect("best exists");
    Ok((theta, ll, s.trace))
}
