//! Design of virtual experiments: space-filling test plans over D x U.
//!
//! Design and use-case variables are sampled the same way. Available plans:
//! Latin hypercube ([`plan_lhs`]), best-of-candidates maximin Latin hypercube
//! ([`plan_maximin_lhs`]), full factorial grids ([`plan_full_factorial`]) and
//! plain Monte Carlo ([`plan_monte_carlo`]). [`augment_plan`] appends greedy
//! maximin infill points for refinement loops.
//!
//! Every plan is a pure function of `(space, method, parameters, seed)`.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hyperspace::{DesignPoint, HyperSpace, PointError, SpaceError, UseCasePoint, Value, Variable, VariableKind};
use crate::rng::StudyRng;
use crate::util::{atomic_write, fmt_f64, quote_csv, sha256_hex};

pub const DEFAULT_FACTORIAL_CAP: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum DoveError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("plan too large: {size} > {cap}")]
    PlanTooLarge { size: u128, cap: usize },
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Point(#[from] PointError),
    #[error("candidate pool exhausted: every remaining candidate duplicates a plan point")]
    PoolExhausted,
    #[error("plan file: {0}")]
    Format(String),
    #[error("plan file io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanMethod {
    Lhs,
    MaximinLhs,
    FullFactorial,
    MonteCarlo,
    /// Loaded from a plan file without metadata.
    Imported,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chosen_candidate: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels_per_continuous: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub augmentations: Vec<Augmentation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Augmentation {
    pub n_new: usize,
    pub seed: u64,
    pub pool_size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannedRun {
    pub run_id: usize,
    pub design: DesignPoint,
    pub use_case: UseCasePoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub space_hash: String,
    pub method: PlanMethod,
    pub seed: u64,
    pub params: PlanParams,
    pub runs: Vec<PlannedRun>,
}

/// Infill strategy for [`augment_plan`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AugmentStrategy {
    /// Greedy maximin selection from a seeded Latin hypercube pool.
    MaximinFill { pool_size: usize },
}

impl AugmentStrategy {
    pub fn maximin_fill(n_new: usize) -> Self {
        AugmentStrategy::MaximinFill { pool_size: (32 * n_new).max(64) }
    }
}

impl ExperimentPlan {
    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    /// Content hash over the planned points only.
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(&self.runs).expect("plan serializes"))
    }

    /// CSV form: `run_id,<design names>,<use-case names>`; labels quoted.
    pub fn to_csv(&self, space: &HyperSpace) -> String {
        let mut out = String::from("run_id");
        for v in space.inputs() {
            out.push(',');
            out.push_str(&v.name);
        }
        out.push('\n');
        for run in &self.runs {
            let _ = write!(out, "{}", run.run_id);
            for value in run.design.0.iter().chain(&run.use_case.0) {
                out.push(',');
                out.push_str(&csv_cell(value));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str, space: &HyperSpace) -> Result<Vec<PlannedRun>, DoveError> {
        let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| DoveError::Format(e.to_string()))?.clone();
        let expected: Vec<&str> = std::iter::once("run_id").chain(space.inputs().map(|v| v.name.as_str())).collect();
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(DoveError::Format(format!(
                "header {:?} does not match space columns {expected:?}",
                headers.iter().collect::<Vec<_>>()
            )));
        }
        let nd = space.design.len();
        let mut runs = Vec::new();
        for (row, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| DoveError::Format(e.to_string()))?;
            let run_id: usize =
                rec[0].parse().map_err(|_| DoveError::Format(format!("row {row}: bad run_id `{}`", &rec[0])))?;
            if run_id != row {
                return Err(DoveError::Format(format!("run_ids must be contiguous from 0; row {row} has {run_id}")));
            }
            let mut values = Vec::with_capacity(space.input_count());
            for (cell, var) in rec.iter().skip(1).zip(space.inputs()) {
                values.push(parse_cell(cell, var).map_err(DoveError::Format)?);
            }
            let use_case = values.split_off(nd);
            let run = PlannedRun { run_id, design: DesignPoint(values), use_case: UseCasePoint(use_case) };
            space.validate_design(&run.design)?;
            space.validate_use_case(&run.use_case)?;
            runs.push(run);
        }
        Ok(runs)
    }

    /// Writes the CSV and its `<path>.meta.json` sidecar atomically.
    pub fn save(&self, space: &HyperSpace, path: &Path) -> Result<(), DoveError> {
        atomic_write(path, self.to_csv(space).as_bytes())?;
        let meta = PlanMeta {
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            method: self.method,
            seed: self.seed,
            params: self.params.clone(),
            space_hash: self.space_hash.clone(),
            plan_hash: self.hash(),
        };
        let text = serde_json::to_string_pretty(&meta).expect("meta serializes") + "\n";
        atomic_write(&sidecar_path(path), text.as_bytes())?;
        Ok(())
    }

    /// Loads a plan CSV; metadata is taken from the sidecar when present.
    pub fn load(space: &HyperSpace, path: &Path) -> Result<Self, DoveError> {
        let runs = Self::from_csv(&std::fs::read_to_string(path)?, space)?;
        let meta_path = sidecar_path(path);
        let mut plan = ExperimentPlan {
            space_hash: space.hash(),
            method: PlanMethod::Imported,
            seed: 0,
            params: PlanParams::default(),
            runs,
        };
        if meta_path.exists() {
            let meta: PlanMeta = serde_json::from_str(&std::fs::read_to_string(&meta_path)?)
                .map_err(|e| DoveError::Format(format!("{}: {e}", meta_path.display())))?;
            if meta.space_hash != plan.space_hash {
                return Err(DoveError::Format(format!(
                    "plan was generated for space {} but space hashes to {}",
                    meta.space_hash, plan.space_hash
                )));
            }
            plan.method = meta.method;
            plan.seed = meta.seed;
            plan.params = meta.params;
        }
        Ok(plan)
    }
}

/// Sidecar document stored next to a plan CSV.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlanMeta {
    pub tool_version: String,
    pub method: PlanMethod,
    pub seed: u64,
    pub params: PlanParams,
    pub space_hash: String,
    pub plan_hash: String,
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    s.into()
}

pub(crate) fn csv_cell(value: &Value) -> String {
    match value {
        Value::Real(x) => fmt_f64(*x),
        Value::Label(s) => quote_csv(s),
    }
}

pub(crate) fn parse_cell(cell: &str, var: &Variable) -> Result<Value, String> {
    let value = match var.kind {
        VariableKind::Categorical { .. } => Value::Label(cell.to_owned()),
        _ => Value::Real(cell.trim().parse().map_err(|_| format!("column `{}`: `{cell}` is not a number", var.name))?),
    };
    var.check_value(&value).map_err(|e| e.to_string())?;
    Ok(value)
}

/// Latin hypercube plan with `n` runs.
pub fn plan_lhs(space: &HyperSpace, n: usize, seed: u64) -> Result<ExperimentPlan, DoveError> {
    space.check()?;
    if n == 0 {
        return Err(DoveError::InvalidArgument("n must be at least 1".into()));
    }
    let runs = lhs_runs(space, n, seed);
    Ok(ExperimentPlan {
        space_hash: space.hash(),
        method: PlanMethod::Lhs,
        seed,
        params: PlanParams { n: Some(n), ..PlanParams::default() },
        runs,
    })
}

fn lhs_runs(space: &HyperSpace, n: usize, seed: u64) -> Vec<PlannedRun> {
    let mut rng = StudyRng::new(seed);
    let columns: Vec<Vec<Value>> = space.inputs().map(|v| lhs_column(v, n, &mut rng)).collect();
    assemble(space, columns, n)
}

fn assemble(space: &HyperSpace, columns: Vec<Vec<Value>>, n: usize) -> Vec<PlannedRun> {
    let nd = space.design.len();
    (0..n)
        .map(|i| {
            let mut row: Vec<Value> = columns.iter().map(|c| c[i].clone()).collect();
            let use_case = row.split_off(nd);
            PlannedRun { run_id: i, design: DesignPoint(row), use_case: UseCasePoint(use_case) }
        })
        .collect()
}

/// One column of a Latin hypercube. Continuous variables get exactly one
/// sample per stratum; discrete and categorical variables get balanced level
/// counts (differing by at most one) in random order.
fn lhs_column(var: &Variable, n: usize, rng: &mut StudyRng) -> Vec<Value> {
    match &var.kind {
        VariableKind::Continuous { lower, upper } => {
            let width = upper - lower;
            let strata = rng.permutation(n);
            strata
                .into_iter()
                .map(|k| {
                    let u = (k as f64 + rng.uniform()) / n as f64;
                    let mut v = (lower + u * width).clamp(*lower, *upper);
                    if stratum_of((v - lower) / width, n) != k {
                        // Rounding pushed the sample across a stratum edge.
                        v = lower + (k as f64 + 0.5) / n as f64 * width;
                    }
                    Value::Real(v)
                })
                .collect()
        }
        VariableKind::Discrete { levels } => {
            balanced(levels.len(), n, rng).into_iter().map(|i| Value::Real(levels[i])).collect()
        }
        VariableKind::Categorical { labels } => {
            balanced(labels.len(), n, rng).into_iter().map(|i| Value::Label(labels[i].clone())).collect()
        }
    }
}

fn balanced(levels: usize, n: usize, rng: &mut StudyRng) -> Vec<usize> {
    let order = rng.permutation(levels);
    let mut picks: Vec<usize> = (0..n).map(|i| order[i % levels]).collect();
    rng.shuffle(&mut picks);
    picks
}

/// Stratum index of an encoded coordinate in an `n`-stratum partition of `[0, 1]`.
pub fn stratum_of(encoded: f64, n: usize) -> usize {
    ((encoded * n as f64).floor() as usize).min(n - 1)
}

/// Best of `candidates` Latin hypercubes by minimum pairwise distance.
/// Candidate `c` uses seed `StudyRng::derive_seed(seed, c)`, so candidate 0
/// reproduces [`plan_lhs`] with the same seed. Ties go to the lowest index.
pub fn plan_maximin_lhs(
    space: &HyperSpace,
    n: usize,
    seed: u64,
    candidates: usize,
) -> Result<ExperimentPlan, DoveError> {
    space.check()?;
    if n < 2 {
        return Err(DoveError::InvalidArgument("maximin needs n >= 2".into()));
    }
    if candidates == 0 {
        return Err(DoveError::InvalidArgument("candidates must be at least 1".into()));
    }
    let mut best: Option<(f64, usize, Vec<PlannedRun>)> = None;
    for c in 0..candidates {
        let runs = lhs_runs(space, n, StudyRng::derive_seed(seed, c as u64));
        let score = min_pairwise_distance(space, &runs)?;
        if best.as_ref().is_none_or(|(s, _, _)| score > *s) {
            best = Some((score, c, runs));
        }
    }
    let (_, chosen, runs) = best.expect("at least one candidate");
    Ok(ExperimentPlan {
        space_hash: space.hash(),
        method: PlanMethod::MaximinLhs,
        seed,
        params: PlanParams {
            n: Some(n),
            candidates: Some(candidates),
            chosen_candidate: Some(chosen),
            ..PlanParams::default()
        },
        runs,
    })
}

/// Independent uniform samples (no stratification).
pub fn plan_monte_carlo(space: &HyperSpace, n: usize, seed: u64) -> Result<ExperimentPlan, DoveError> {
    space.check()?;
    if n == 0 {
        return Err(DoveError::InvalidArgument("n must be at least 1".into()));
    }
    let mut rng = StudyRng::new(seed);
    let columns: Vec<Vec<Value>> = space
        .inputs()
        .map(|v| {
            (0..n)
                .map(|_| match &v.kind {
                    VariableKind::Continuous { lower, upper } => {
                        Value::Real((lower + rng.uniform() * (upper - lower)).min(*upper))
                    }
                    VariableKind::Discrete { levels } => Value::Real(levels[rng.below(levels.len() as u64) as usize]),
                    VariableKind::Categorical { labels } => {
                        Value::Label(labels[rng.below(labels.len() as u64) as usize].clone())
                    }
                })
                .collect()
        })
        .collect();
    Ok(ExperimentPlan {
        space_hash: space.hash(),
        method: PlanMethod::MonteCarlo,
        seed,
        params: PlanParams { n: Some(n), ..PlanParams::default() },
        runs: assemble(space, columns, n),
    })
}

/// Grid values of one variable: `levels` equi-spaced points for continuous
/// variables (the midpoint when `levels == 1`), every declared level or label
/// otherwise.
pub fn axis_values(var: &Variable, levels: usize) -> Vec<Value> {
    match &var.kind {
        VariableKind::Continuous { lower, upper } => {
            equispaced(*lower, *upper, levels).into_iter().map(Value::Real).collect()
        }
        VariableKind::Discrete { levels } => levels.iter().copied().map(Value::Real).collect(),
        VariableKind::Categorical { labels } => labels.iter().cloned().map(Value::Label).collect(),
    }
}

pub fn equispaced(lower: f64, upper: f64, levels: usize) -> Vec<f64> {
    match levels {
        0 => vec![],
        1 => vec![0.5 * (lower + upper)],
        _ => (0..levels)
            .map(|k| if k == levels - 1 { upper } else { lower + (upper - lower) * k as f64 / (levels - 1) as f64 })
            .collect(),
    }
}

/// Row-major Cartesian product of `axes` (last axis varies fastest).
pub fn cartesian(axes: &[Vec<Value>], cap: usize) -> Result<Vec<Vec<Value>>, DoveError> {
    let size = axes.iter().try_fold(1u128, |acc, a| acc.checked_mul(a.len() as u128)).unwrap_or(u128::MAX);
    if size > cap as u128 {
        return Err(DoveError::PlanTooLarge { size, cap });
    }
    let mut rows = vec![Vec::with_capacity(axes.len())];
    for axis in axes {
        rows = rows
            .into_iter()
            .flat_map(|row| {
                axis.iter().map(move |v| {
                    let mut r = row.clone();
                    r.push(v.clone());
                    r
                })
            })
            .collect();
    }
    Ok(rows)
}

pub fn plan_full_factorial(
    space: &HyperSpace,
    levels_per_continuous: usize,
    cap: usize,
) -> Result<ExperimentPlan, DoveError> {
    space.check()?;
    if levels_per_continuous == 0 {
        return Err(DoveError::InvalidArgument("levels_per_continuous must be at least 1".into()));
    }
    let axes: Vec<Vec<Value>> = space.inputs().map(|v| axis_values(v, levels_per_continuous)).collect();
    let nd = space.design.len();
    let runs = cartesian(&axes, cap)?
        .into_iter()
        .enumerate()
        .map(|(run_id, mut row)| {
            let use_case = row.split_off(nd);
            PlannedRun { run_id, design: DesignPoint(row), use_case: UseCasePoint(use_case) }
        })
        .collect();
    Ok(ExperimentPlan {
        space_hash: space.hash(),
        method: PlanMethod::FullFactorial,
        seed: 0,
        params: PlanParams { levels_per_continuous: Some(levels_per_continuous), ..PlanParams::default() },
        runs,
    })
}

/// Smallest Euclidean distance between any two runs, in distance coordinates.
pub fn min_pairwise_distance(space: &HyperSpace, runs: &[PlannedRun]) -> Result<f64, PointError> {
    let coords = runs.iter().map(|r| space.distance_coords(&r.design, &r.use_case)).collect::<Result<Vec<_>, _>>()?;
    let mut best = f64::INFINITY;
    for i in 0..coords.len() {
        for j in i + 1..coords.len() {
            best = best.min(dist2(&coords[i], &coords[j]));
        }
    }
    Ok(best.sqrt())
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Appends `n_new` infill points to `existing`, continuing run_ids.
pub fn augment_plan(
    space: &HyperSpace,
    existing: &ExperimentPlan,
    n_new: usize,
    seed: u64,
    strategy: AugmentStrategy,
) -> Result<ExperimentPlan, DoveError> {
    space.check()?;
    if existing.is_empty() {
        return Err(DoveError::InvalidArgument("cannot augment an empty plan".into()));
    }
    if n_new == 0 {
        return Ok(existing.clone());
    }
    let AugmentStrategy::MaximinFill { pool_size } = strategy;
    if pool_size < n_new {
        return Err(DoveError::InvalidArgument(format!("pool of {pool_size} cannot supply {n_new} points")));
    }
    let pool: Vec<(DesignPoint, UseCasePoint)> =
        lhs_runs(space, pool_size, seed).into_iter().map(|r| (r.design, r.use_case)).collect();
    let mut plan = augment_from_pool(space, existing, pool, n_new)?;
    plan.params.augmentations.push(Augmentation { n_new, seed, pool_size });
    Ok(plan)
}

/// Greedy maximin selection of `n_new` points from an explicit pool: each
/// pick maximizes the distance to every existing and already-picked point.
/// Ties go to the lowest pool index; exact duplicates are never picked.
pub fn augment_from_pool(
    space: &HyperSpace,
    existing: &ExperimentPlan,
    pool: Vec<(DesignPoint, UseCasePoint)>,
    n_new: usize,
) -> Result<ExperimentPlan, DoveError> {
    let pool_coords = pool.iter().map(|(d, u)| space.distance_coords(d, u)).collect::<Result<Vec<_>, _>>()?;
    let mut nearest = vec![f64::INFINITY; pool.len()];
    let mut taken = vec![false; pool.len()];
    for run in &existing.runs {
        let c = space.distance_coords(&run.design, &run.use_case)?;
        for (m, p) in nearest.iter_mut().zip(&pool_coords) {
            *m = m.min(dist2(p, &c));
        }
    }
    let mut plan = existing.clone();
    for _ in 0..n_new {
        let pick = (0..pool.len())
            .filter(|&i| !taken[i] && nearest[i] > 0.0)
            .fold(None::<usize>, |best, i| match best {
                Some(b) if nearest[b] >= nearest[i] => Some(b),
                _ => Some(i),
            })
            .ok_or(DoveError::PoolExhausted)?;
        taken[pick] = true;
        let chosen = pool_coords[pick].clone();
        for (m, p) in nearest.iter_mut().zip(&pool_coords) {
            *m = m.min(dist2(p, &chosen));
        }
        let (design, use_case) = pool[pick].clone();
        plan.runs.push(PlannedRun { run_id: plan.runs.len(), design, use_case });
    }
    Ok(plan)
}

/// Default plan size convention: ten runs per input dimension.
pub fn default_sample_size(space: &HyperSpace) -> usize {
    10 * space.input_count()
}
