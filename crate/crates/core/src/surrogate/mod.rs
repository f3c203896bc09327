//! Surrogate models `t ≈ f_alpha(d, u)`, one scalar model per target.
//!
//! Two families: polynomial least squares and ordinary Kriging. Categorical
//! inputs either split the data into one sub-model per label combination
//! ([`CategoryMode::PerCategory`], the default) or enter a single joint model
//! as one-hot features ([`CategoryMode::Joint`]).

pub mod features;
pub mod kriging;
pub mod polynomial;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::hyperspace::{DesignPoint, HyperSpace, PointError, TargetVector, UseCasePoint, Value, VariableKind};
use crate::rng::StudyRng;
use crate::runner::ResultStore;

pub use features::{FeatureMap, Scale};
pub use kriging::{KrigingFit, KrigingOptions};

pub const FORMAT: &str = "hse-surrogate/1";

#[derive(Debug, thiserror::Error)]
pub enum FitError {
    #[error("sample size: {required} ok records required{segment}, {available} available")]
    InsufficientData { required: usize, available: usize, segment: String },
    #[error("rank-deficient design matrix{segment}: {detail}")]
    RankDeficient { segment: String, detail: String },
    #[error("conditioning: correlation matrix not positive definite{segment}; retry with a larger nugget")]
    Conditioning { segment: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("fold {fold} leaves no training data for {segment}")]
    EmptyFold { fold: usize, segment: String },
}

#[derive(Debug, thiserror::Error)]
pub enum PredictError {
    #[error("space mismatch: model was fit on space {expected}, got {found}")]
    SpaceMismatch { expected: String, found: String },
    #[error(transparent)]
    Point(#[from] PointError),
    #[error("no sub-model for category {0}")]
    UnknownCategory(String),
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("format: {0}")]
    Format(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoryMode {
    #[default]
    PerCategory,
    Joint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Polynomial { degree: u32 },
    Kriging(KrigingOptions),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(flatten)]
    pub family: Family,
    #[serde(default)]
    pub categories: CategoryMode,
}

impl ModelSpec {
    pub fn polynomial(degree: u32) -> Self {
        Self { family: Family::Polynomial { degree }, categories: CategoryMode::PerCategory }
    }

    pub fn kriging(opts: KrigingOptions) -> Self {
        Self { family: Family::Kriging(opts), categories: CategoryMode::PerCategory }
    }

    pub fn joint(mut self) -> Self {
        self.categories = CategoryMode::Joint;
        self
    }

    fn check(&self) -> Result<(), FitError> {
        match &self.family {
            Family::Polynomial { degree } if !(1..=4).contains(degree) => {
                Err(FitError::InvalidArgument(format!("polynomial degree must be in 1..=4, got {degree}")))
            }
            Family::Kriging(o) => o.check().map_err(FitError::InvalidArgument),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AreaBound {
    pub variable: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub target: String,
    pub r_squared: f64,
    /// `None` when there are no residual degrees of freedom.
    pub adjusted_r_squared: Option<f64>,
    /// `None` when some leave-one-out fit is undetermined.
    pub loocv_rmse: Option<f64>,
    /// F-test of the overall regression; `None` for Kriging.
    pub f_statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub n_train: usize,
    pub n_params: usize,
    pub validation_area: Vec<AreaBound>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetFit {
    Polynomial { coefficients: Vec<f64> },
    Kriging(KrigingFit),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// Label of each split input, in `SurrogateModel::split_inputs` order.
    pub key: Vec<String>,
    pub features: FeatureMap,
    pub validation_area: Vec<AreaBound>,
    pub fits: Vec<TargetFit>,
    pub reports: Vec<ValidationReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateModel {
    pub format: String,
    pub space_hash: String,
    pub spec: ModelSpec,
    pub targets: Vec<String>,
    /// Positions (in the design + use-case input list) of the categorical
    /// inputs that select a segment.
    pub split_inputs: Vec<usize>,
    pub segments: Vec<Segment>,
    /// Observed `[min, max]` per target over all training rows.
    pub target_ranges: Vec<[f64; 2]>,
    pub n_train: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub targets: TargetVector,
    /// Kriging variance per target.
    pub variance: Option<Vec<f64>>,
    pub extrapolated: bool,
}

/// One ok record in fitting form.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingRow {
    pub design: DesignPoint,
    pub use_case: UseCasePoint,
    pub targets: Vec<f64>,
}

impl TrainingRow {
    fn values(&self) -> Vec<&Value> {
        self.design.0.iter().chain(&self.use_case.0).collect()
    }
}

pub fn training_rows(store: &ResultStore) -> Vec<TrainingRow> {
    store
        .ok_records()
        .filter_map(|r| {
            Some(TrainingRow {
                design: r.design.clone(),
                use_case: r.use_case.clone(),
                targets: r.targets.as_ref()?.0.clone(),
            })
        })
        .collect()
}

pub fn fit_polynomial(store: &ResultStore, degree: u32) -> Result<SurrogateModel, FitError> {
    fit(store, &ModelSpec::polynomial(degree))
}

pub fn fit_kriging(store: &ResultStore, opts: KrigingOptions) -> Result<SurrogateModel, FitError> {
    fit(store, &ModelSpec::kriging(opts))
}

/// Fits on the ok records of `store`. Failed and skipped records are ignored.
pub fn fit(store: &ResultStore, spec: &ModelSpec) -> Result<SurrogateModel, FitError> {
    fit_rows(store.space(), store.space_hash(), &training_rows(store), spec)
}

fn split_inputs(space: &HyperSpace, mode: CategoryMode) -> Vec<usize> {
    match mode {
        CategoryMode::Joint => Vec::new(),
        CategoryMode::PerCategory => space
            .inputs()
            .enumerate()
            .filter(|(_, v)| matches!(v.kind, VariableKind::Categorical { .. }))
            .map(|(i, _)| i)
            .collect(),
    }
}

fn segment_label(space: &HyperSpace, split: &[usize], key: &[String]) -> String {
    if split.is_empty() {
        return String::new();
    }
    let names: Vec<&str> = space.inputs().map(|v| v.name.as_str()).collect();
    let parts: Vec<String> = split.iter().zip(key).map(|(&i, l)| format!("{}={}", names[i], l)).collect();
    format!(" [{}]", parts.join(", "))
}

pub fn fit_rows(
    space: &HyperSpace,
    space_hash: &str,
    rows: &[TrainingRow],
    spec: &ModelSpec,
) -> Result<SurrogateModel, FitError> {
    spec.check()?;
    let split = split_inputs(space, spec.categories);
    let mut groups: BTreeMap<Vec<String>, Vec<&TrainingRow>> = BTreeMap::new();
    for row in rows {
        let values = row.values();
        let key = split.iter().map(|&i| values[i].as_label().unwrap_or_default().to_owned()).collect();
        groups.entry(key).or_default().push(row);
    }
    if groups.is_empty() {
        groups.insert(split.iter().map(|_| String::new()).collect(), Vec::new());
    }
    let targets = space.target_names();
    let mut segments = Vec::new();
    for (key, group) in &groups {
        let label = segment_label(space, &split, key);
        let fixed: Vec<(usize, String)> = split.iter().copied().zip(key.iter().cloned()).collect();
        segments.push(fit_segment(space, &targets, &fixed, key, group, spec, &label)?);
    }
    let target_ranges = (0..targets.len())
        .map(|t| {
            rows.iter()
                .fold([f64::INFINITY, f64::NEG_INFINITY], |[lo, hi], r| [lo.min(r.targets[t]), hi.max(r.targets[t])])
        })
        .collect();
    Ok(SurrogateModel {
        format: FORMAT.to_owned(),
        space_hash: space_hash.to_owned(),
        spec: spec.clone(),
        targets,
        split_inputs: split,
        segments,
        target_ranges,
        n_train: rows.len(),
    })
}

fn validation_area(features: &FeatureMap, rows: &[&TrainingRow]) -> Vec<AreaBound> {
    features
        .numeric
        .iter()
        .map(|n| {
            let (lo, hi) = rows
                .iter()
                .filter_map(|r| {
                    let values = r.values();
                    let active = n.active_when.as_ref().is_none_or(|(p, l)| values[*p].as_label() == Some(l.as_str()));
                    active.then(|| values[n.input].as_real()).flatten()
                })
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            AreaBound { variable: n.name.clone(), lower: lo, upper: hi }
        })
        .collect()
}

fn fit_segment(
    space: &HyperSpace,
    targets: &[String],
    fixed: &[(usize, String)],
    key: &[String],
    rows: &[&TrainingRow],
    spec: &ModelSpec,
    label: &str,
) -> Result<Segment, FitError> {
    match &spec.family {
        Family::Polynomial { degree } => {
            let features = FeatureMap::for_segment(space, fixed, Scale::Symmetric).with_polynomial_terms(*degree);
            let area = validation_area(&features, rows);
            let m = features.terms.len();
            if rows.len() < m {
                return Err(FitError::InsufficientData {
                    required: m,
                    available: rows.len(),
                    segment: label.to_owned(),
                });
            }
            let design: Vec<Vec<f64>> = rows.iter().map(|r| features.polynomial_row(&r.values())).collect();
            let x = DMatrix::from_fn(rows.len(), m, |i, j| design[i][j]);
            let mut fits = Vec::new();
            let mut reports = Vec::new();
            for (t, name) in targets.iter().enumerate() {
                let y = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.targets[t]));
                let fit = polynomial::ols(&x, &y).map_err(|e| match e {
                    polynomial::OlsError::TooFewRows { required, available } => {
                        FitError::InsufficientData { required, available, segment: label.to_owned() }
                    }
                    polynomial::OlsError::RankDeficient { column, partners } => {
                        let col = features.term_name(&features.terms[column]);
                        let detail = if partners.is_empty() {
                            format!("column `{col}` is identically zero on the training data")
                        } else {
                            let names: Vec<String> = partners
                                .iter()
                                .map(|&p| format!("`{}`", features.term_name(&features.terms[p])))
                                .collect();
                            format!("column `{col}` is collinear with {}", names.join(", "))
                        };
                        FitError::RankDeficient { segment: label.to_owned(), detail }
                    }
                })?;
                let s = polynomial::stats(&fit, &y);
                reports.push(ValidationReport {
                    target: name.clone(),
                    r_squared: s.r_squared,
                    adjusted_r_squared: s.adjusted_r_squared,
                    loocv_rmse: s.loocv_rmse,
                    f_statistic: s.f_statistic,
                    p_value: s.p_value,
                    n_train: rows.len(),
                    n_params: m,
                    validation_area: area.clone(),
                });
                fits.push(TargetFit::Polynomial { coefficients: fit.coefficients });
            }
            Ok(Segment { key: key.to_vec(), features, validation_area: area, fits, reports })
        }
        Family::Kriging(opts) => {
            let features = FeatureMap::for_segment(space, fixed, Scale::Unit);
            let area = validation_area(&features, rows);
            // Average duplicate inputs.
            let mut dedup: BTreeMap<Vec<u64>, (Vec<f64>, Vec<f64>, usize)> = BTreeMap::new();
            for r in rows {
                let x = features.kriging_row(&r.values());
                let k: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
                let e = dedup.entry(k).or_insert_with(|| (x, vec![0.0; targets.len()], 0));
                for (s, v) in e.1.iter_mut().zip(&r.targets) {
                    *s += v;
                }
                e.2 += 1;
            }
            if dedup.len() < 4 {
                return Err(FitError::InsufficientData {
                    required: 4,
                    available: dedup.len(),
                    segment: label.to_owned(),
                });
            }
            let xs: Vec<Vec<f64>> = dedup.values().map(|(x, _, _)| x.clone()).collect();
            let ys: Vec<Vec<f64>> =
                (0..targets.len()).map(|t| dedup.values().map(|(_, s, c)| s[t] / *c as f64).collect()).collect();
            let results: Vec<Result<(KrigingFit, ValidationReport), FitError>> = std::thread::scope(|scope| {
                let handles: Vec<_> = targets
                    .iter()
                    .zip(&ys)
                    .map(|(name, y)| {
                        let xs = &xs;
                        let area = &area;
                        scope.spawn(move || fit_kriging_target(xs, y, opts, name, area, rows.len(), label))
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("kriging worker")).collect()
            });
            let mut fits = Vec::new();
            let mut reports = Vec::new();
            for r in results {
                let (f, rep) = r?;
                fits.push(TargetFit::Kriging(f));
                reports.push(rep);
            }
            Ok(Segment { key: key.to_vec(), features, validation_area: area, fits, reports })
        }
    }
}

fn fit_kriging_target(
    xs: &[Vec<f64>],
    y: &[f64],
    opts: &KrigingOptions,
    name: &str,
    area: &[AreaBound],
    n_rows: usize,
    label: &str,
) -> Result<(KrigingFit, ValidationReport), FitError> {
    let conditioning = || FitError::Conditioning { segment: label.to_owned() };
    let (theta, _, _) = kriging::search_theta(xs, y, opts).map_err(|_| conditioning())?;
    let fit = kriging::fit_at(xs, y, &theta, opts.nugget).map_err(|_| conditioning())?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let sse: f64 = xs.iter().zip(y).map(|(x, v)| (v - fit.predict(x).0).powi(2)).sum();
    let r_squared = if sst > 0.0 { (1.0 - sse / sst).min(1.0) } else { 1.0 };
    let loocv_rmse = fit.loo_residuals(y).map(|e| (e.iter().map(|v| v * v).sum::<f64>() / e.len() as f64).sqrt());
    let report = ValidationReport {
        target: name.to_owned(),
        r_squared,
        adjusted_r_squared: None,
        loocv_rmse,
        f_statistic: None,
        p_value: None,
        n_train: n_rows,
        n_params: fit.theta.len() + 1 + xs.len(),
        validation_area: area.to_vec(),
    };
    Ok((fit, report))
}

impl SurrogateModel {
    pub fn k(&self) -> usize {
        self.targets.len()
    }

    /// Index of the segment serving `(d, u)`.
    pub fn segment_index(&self, d: &DesignPoint, u: &UseCasePoint) -> Option<usize> {
        let values: Vec<&Value> = d.0.iter().chain(&u.0).collect();
        let seg = self.segment_for(&values).ok()?;
        self.segments.iter().position(|s| std::ptr::eq(s, seg))
    }

    fn segment_for(&self, values: &[&Value]) -> Result<&Segment, PredictError> {
        let key: Vec<&str> = self.split_inputs.iter().map(|&i| values[i].as_label().unwrap_or_default()).collect();
        self.segments
            .iter()
            .find(|s| s.key.iter().map(String::as_str).eq(key.iter().copied()))
            .ok_or_else(|| PredictError::UnknownCategory(key.join(",")))
    }

    pub fn predict(&self, space: &HyperSpace, d: &DesignPoint, u: &UseCasePoint) -> Result<Prediction, PredictError> {
        let found = space.hash();
        if found != self.space_hash {
            return Err(PredictError::SpaceMismatch { expected: self.space_hash.clone(), found });
        }
        space.validate_design(d)?;
        space.validate_use_case(u)?;
        self.predict_unchecked(d, u)
    }

    /// Prediction without the space-hash and bounds checks; for callers that
    /// generate points from the model's own space.
    pub fn predict_unchecked(&self, d: &DesignPoint, u: &UseCasePoint) -> Result<Prediction, PredictError> {
        let values: Vec<&Value> = d.0.iter().chain(&u.0).collect();
        let seg = self.segment_for(&values)?;
        let extrapolated = seg.features.numeric.iter().zip(&seg.validation_area).any(|(n, a)| {
            let active = n.active_when.as_ref().is_none_or(|(p, l)| values[*p].as_label() == Some(l.as_str()));
            let v = values[n.input].as_real().unwrap_or(f64::NAN);
            let tol = 1e-12 * (n.upper - n.lower);
            active && !(v >= a.lower - tol && v <= a.upper + tol)
        });
        let mut targets = Vec::with_capacity(seg.fits.len());
        let mut variance = Vec::new();
        let poly_row = matches!(seg.fits.first(), Some(TargetFit::Polynomial { .. }))
            .then(|| seg.features.polynomial_row(&values));
        let krig_row =
            matches!(seg.fits.first(), Some(TargetFit::Kriging(_))).then(|| seg.features.kriging_row(&values));
        for f in &seg.fits {
            match f {
                TargetFit::Polynomial { coefficients } => {
                    targets.push(polynomial::dot(coefficients, poly_row.as_deref().expect("row")));
                }
                TargetFit::Kriging(k) => {
                    let (m, v) = k.predict(krig_row.as_deref().expect("row"));
                    targets.push(m);
                    variance.push(v);
                }
            }
        }
        Ok(Prediction {
            targets: TargetVector(targets),
            variance: (!variance.is_empty()).then_some(variance),
            extrapolated,
        })
    }

    /// Training-weighted pooled LOOCV RMSE per target.
    pub fn loocv_rmse(&self) -> Vec<Option<f64>> {
        (0..self.k())
            .map(|t| {
                let mut sum = 0.0;
                let mut n = 0usize;
                for s in &self.segments {
                    let r = &s.reports[t];
                    sum += r.loocv_rmse?.powi(2) * r.n_train as f64;
                    n += r.n_train;
                }
                (n > 0).then(|| (sum / n as f64).sqrt())
            })
            .collect()
    }

    /// Worst LOOCV RMSE relative to the observed target range, over targets.
    /// Targets with zero range contribute 0.
    pub fn accuracy_fraction(&self) -> Option<f64> {
        let mut worst: f64 = 0.0;
        for (rmse, [lo, hi]) in self.loocv_rmse().into_iter().zip(&self.target_ranges) {
            let rmse = rmse?;
            let range = hi - lo;
            let frac = if range > 0.0 { rmse / range } else { 0.0 };
            worst = worst.max(frac);
        }
        Some(if worst < 1e-9 { 0.0 } else { worst })
    }

    /// Number of fitted parameters per target, summed over segments.
    pub fn n_params(&self) -> usize {
        self.segments.iter().map(|s| s.reports.first().map_or(0, |r| r.n_params)).sum()
    }

    /// Union of the segment validation areas, per named numeric input.
    pub fn validation_area(&self) -> Vec<AreaBound> {
        let mut out: Vec<AreaBound> = Vec::new();
        for s in &self.segments {
            for a in &s.validation_area {
                match out.iter_mut().find(|o| o.variable == a.variable) {
                    Some(o) => {
                        o.lower = o.lower.min(a.lower);
                        o.upper = o.upper.max(a.upper);
                    }
                    None => out.push(a.clone()),
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, LoadError> {
        let m: Self = serde_json::from_str(text).map_err(|e| LoadError::Format(e.to_string()))?;
        if m.format != FORMAT {
            return Err(LoadError::Format(format!("unsupported model format `{}`", m.format)));
        }
        if m.segments.iter().any(|s| s.fits.len() != m.targets.len()) {
            return Err(LoadError::Format("target count mismatch".into()));
        }
        Ok(m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub folds: usize,
    pub seed: u64,
    pub n: usize,
    /// RMSE over held-out points, per target.
    pub rmse: Vec<f64>,
}

/// K-fold cross-validation. Rows are shuffled with `seed` and dealt
/// round-robin into `folds` folds.
pub fn cross_validate(
    store: &ResultStore,
    spec: &ModelSpec,
    folds: usize,
    seed: u64,
) -> Result<CrossValidation, FitError> {
    cross_validate_rows(store.space(), store.space_hash(), &training_rows(store), spec, folds, seed)
}

pub fn cross_validate_rows(
    space: &HyperSpace,
    space_hash: &str,
    rows: &[TrainingRow],
    spec: &ModelSpec,
    folds: usize,
    seed: u64,
) -> Result<CrossValidation, FitError> {
    let n = rows.len();
    if folds < 2 || folds > n {
        return Err(FitError::InvalidArgument(format!("folds must be in 2..={n}, got {folds}")));
    }
    let perm = StudyRng::new(seed).permutation(n);
    let mut fold_of = vec![0; n];
    for (pos, &row) in perm.iter().enumerate() {
        fold_of[row] = pos % folds;
    }
    let k = space.targets.len();
    let mut sq = vec![0.0; k];
    for f in 0..folds {
        let train: Vec<TrainingRow> = (0..n).filter(|&i| fold_of[i] != f).map(|i| rows[i].clone()).collect();
        let model = fit_rows(space, space_hash, &train, spec)?;
        for i in (0..n).filter(|&i| fold_of[i] == f) {
            let p = model.predict_unchecked(&rows[i].design, &rows[i].use_case).map_err(|e| match e {
                PredictError::UnknownCategory(segment) => FitError::EmptyFold { fold: f, segment },
                other => FitError::InvalidArgument(other.to_string()),
            })?;
            for ((s, y), yhat) in sq.iter_mut().zip(&rows[i].targets).zip(&p.targets.0) {
                *s += (y - yhat).powi(2);
            }
        }
    }
    Ok(CrossValidation { folds, seed, n, rmse: sq.into_iter().map(|s| (s / n as f64).sqrt()).collect() })
}

#[cfg(test)]
mod tests;
