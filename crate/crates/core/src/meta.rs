//! The outer loop: accuracy gating with loop-backs, and surrogate selection
//! treated as a front over model configurations.
//!
//! [`refine`] alternates two loop-backs until the model's worst range-relative
//! LOOCV error drops below the threshold:
//!
//! * resample: add infill points in the current space (greedy maximin, or
//!   maximum Kriging variance when the model is Kriging);
//! * respace: shrink each continuous design bound to the padded bounding box
//!   of the current observed front, keep the runs that still fit, and fill
//!   the smaller space.

use serde::{Deserialize, Serialize};

use crate::analysis::{self, front_of_rows, ParetoFront, Selection};
use crate::dove::{augment_plan, plan_lhs, AugmentStrategy, DoveError, ExperimentPlan, PlannedRun};
use crate::hyperspace::{DesignPoint, HyperSpace, Orientation, UseCasePoint, VariableKind};
use crate::rng::StudyRng;
use crate::runner::{run_plan, ExperimentRecord, ResultStore, RunError, RunOptions, Simulator};
use crate::surrogate::{fit, kriging, Family, FitError, ModelSpec, SurrogateModel, TargetFit};
use crate::util::fmt_f64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefinementPolicy {
    /// Stop once the worst LOOCV RMSE / target range is below this.
    pub accuracy_threshold: f64,
    /// Maximum number of loop-backs.
    pub max_iterations: usize,
    /// Infill size as a fraction of the initial plan size.
    pub infill_fraction: f64,
    /// Padding of the respaced bounds, as a fraction of the current range.
    pub pad_fraction: f64,
    pub seed: u64,
    pub run: RunSettings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSettings {
    pub parallelism: usize,
    pub max_failures: f64,
}

impl Default for RunSettings {
    fn default() -> Self {
        let o = RunOptions::default();
        Self { parallelism: o.parallelism, max_failures: o.max_failures }
    }
}

impl Default for RefinementPolicy {
    fn default() -> Self {
        Self {
            accuracy_threshold: 0.05,
            max_iterations: 5,
            infill_fraction: 0.5,
            pad_fraction: 0.1,
            seed: 0,
            run: RunSettings::default(),
        }
    }
}

impl RefinementPolicy {
    // Negated comparisons reject NaN as well.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn check(&self) -> Result<(), String> {
        if !(self.accuracy_threshold > 0.0) {
            return Err("accuracy_threshold must be positive".into());
        }
        if self.max_iterations < 1 {
            return Err("max_iterations must be at least 1".into());
        }
        if !(self.infill_fraction > 0.0) {
            return Err("infill_fraction must be positive".into());
        }
        if !(self.pad_fraction >= 0.0) {
            return Err("pad_fraction must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Initial,
    Resample,
    Respace,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::Initial => "initial",
            Action::Resample => "resample",
            Action::Respace => "respace",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    /// 1-based; row 1 assesses the model handed to [`refine`].
    pub iteration: usize,
    /// Action taken before this assessment.
    pub action: Action,
    pub n_samples: usize,
    pub loocv_rmse: Vec<Option<f64>>,
    pub accuracy: Option<f64>,
    pub space_hash: String,
}

#[derive(Debug)]
pub struct RefineOutcome {
    pub trace: Vec<TraceRow>,
    pub converged: bool,
    pub space: HyperSpace,
    pub plan: ExperimentPlan,
    pub store: ResultStore,
    pub model: SurrogateModel,
}

#[derive(Debug, thiserror::Error)]
pub enum RefineErrorKind {
    #[error("invalid policy: {0}")]
    Policy(String),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Plan(#[from] DoveError),
    #[error(transparent)]
    Analysis(#[from] analysis::AnalysisError),
}

/// Failure inside the loop; `trace` holds every completed assessment.
#[derive(Debug, thiserror::Error)]
#[error("refinement stopped after {} assessments: {kind}", trace.len())]
pub struct RefineError {
    pub kind: RefineErrorKind,
    pub trace: Vec<TraceRow>,
}

fn row(iteration: usize, action: Action, model: &SurrogateModel, space: &HyperSpace) -> TraceRow {
    TraceRow {
        iteration,
        action,
        n_samples: model.n_train,
        loocv_rmse: model.loocv_rmse(),
        accuracy: model.accuracy_fraction(),
        space_hash: space.hash(),
    }
}

fn converged(r: &TraceRow, threshold: f64) -> bool {
    r.accuracy.is_some_and(|a| a < threshold)
}

pub fn refine(
    space: &HyperSpace,
    plan: &ExperimentPlan,
    store: &ResultStore,
    model: &SurrogateModel,
    policy: &RefinementPolicy,
    simulator: &dyn Simulator,
) -> Result<RefineOutcome, RefineError> {
    let mut trace = vec![row(1, Action::Initial, model, space)];
    let fail = |kind: RefineErrorKind, trace: &[TraceRow]| RefineError { kind, trace: trace.to_vec() };
    policy.check().map_err(|e| fail(RefineErrorKind::Policy(e), &trace))?;
    let spec = model.spec.clone();
    let n_initial = plan.len();
    let n_new = ((plan.len() as f64 * policy.infill_fraction).round() as usize).max(1);
    let opts = RunOptions { parallelism: policy.run.parallelism, max_failures: policy.run.max_failures };
    let mut space = space.clone();
    let mut plan = plan.clone();
    let mut store = copy_store(&space, &plan, store.records().cloned());
    let mut model = model.clone();
    for it in 1..=policy.max_iterations {
        if converged(trace.last().expect("non-empty"), policy.accuracy_threshold) {
            break;
        }
        let seed = StudyRng::derive_seed(policy.seed, it as u64);
        let action = if it % 2 == 1 { Action::Resample } else { Action::Respace };
        let step = (|| -> Result<(), RefineErrorKind> {
            match action {
                Action::Resample => {
                    plan = resample(&space, &plan, &model, n_new, seed)?;
                }
                Action::Respace => {
                    let front = analysis::pareto_front_observed(&store, &Selection::all(), None)?;
                    let shrunk = respace(&space, &front, policy.pad_fraction);
                    let kept = kept_runs(&shrunk, &store);
                    let base = ExperimentPlan {
                        space_hash: shrunk.hash(),
                        method: plan.method,
                        seed: plan.seed,
                        params: plan.params.clone(),
                        runs: kept.iter().map(|r| r.0.clone()).collect(),
                    };
                    let records: Vec<ExperimentRecord> = kept.into_iter().map(|r| r.1).collect();
                    // Top up to at least the initial plan size so the refit
                    // has as much data as the first model had.
                    let n_fill = n_new.max(n_initial.saturating_sub(base.len()));
                    plan = if base.is_empty() {
                        let mut p = plan_lhs(&shrunk, n_fill, seed)?;
                        p.params = plan.params.clone();
                        p
                    } else {
                        augment_plan(&shrunk, &base, n_fill, seed, AugmentStrategy::maximin_fill(n_fill))?
                    };
                    space = shrunk;
                    store = copy_store(&space, &plan, records.into_iter());
                }
                Action::Initial => unreachable!(),
            }
            if action == Action::Resample {
                store = copy_store(&space, &plan, store.records().cloned());
            }
            run_plan(&plan, simulator, &opts, &mut store)?;
            model = fit(&store, &spec)?;
            Ok(())
        })();
        step.map_err(|k| fail(k, &trace))?;
        trace.push(row(it + 1, action, &model, &space));
    }
    let converged = converged(trace.last().expect("non-empty"), policy.accuracy_threshold);
    Ok(RefineOutcome { trace, converged, space, plan, store, model })
}

/// Fresh in-memory store for `plan` holding `records` (matched by run id).
fn copy_store(
    space: &HyperSpace,
    plan: &ExperimentPlan,
    records: impl Iterator<Item = ExperimentRecord>,
) -> ResultStore {
    let mut store = ResultStore::in_memory(space, plan);
    for r in records {
        if r.run_id < plan.len() {
            store.insert(r).expect("unique run ids");
        }
    }
    store
}

/// Runs of `store` inside `space`, renumbered from 0 in run-id order.
fn kept_runs(space: &HyperSpace, store: &ResultStore) -> Vec<(PlannedRun, ExperimentRecord)> {
    store
        .records()
        .filter(|r| space.validate_design(&r.design).is_ok() && space.validate_use_case(&r.use_case).is_ok())
        .enumerate()
        .map(|(i, r)| {
            let mut rec = r.clone();
            rec.run_id = i;
            let run = PlannedRun { run_id: i, design: r.design.clone(), use_case: r.use_case.clone() };
            (run, rec)
        })
        .collect()
}

/// Shrinks every continuous design variable to the bounding box of the front
/// members where it is active, padded by `pad` of its current range and
/// clipped to the current bounds.
pub fn respace(space: &HyperSpace, front: &ParetoFront, pad: f64) -> HyperSpace {
    let mut out = space.clone();
    for (i, var) in space.design.iter().enumerate() {
        let VariableKind::Continuous { lower, upper } = var.kind else {
            continue;
        };
        let values: Vec<f64> = front
            .members
            .iter()
            .filter(|m| space.is_active(var, &m.design, &m.use_case))
            .filter_map(|m| m.design.0[i].as_real())
            .collect();
        if values.is_empty() {
            continue;
        }
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let margin = pad * (upper - lower);
        let (mut nl, mut nu) = ((lo - margin).max(lower), (hi + margin).min(upper));
        if nu <= nl {
            // Zero padding on a single-valued front: keep a sliver around it.
            let eps = 1e-6 * (upper - lower);
            nl = (lo - eps).max(lower);
            nu = (hi + eps).min(upper);
        }
        out.design[i].kind = VariableKind::Continuous { lower: nl, upper: nu };
    }
    out
}

fn resample(
    space: &HyperSpace,
    plan: &ExperimentPlan,
    model: &SurrogateModel,
    n_new: usize,
    seed: u64,
) -> Result<ExperimentPlan, DoveError> {
    let strategy = AugmentStrategy::maximin_fill(n_new);
    if !matches!(model.spec.family, Family::Kriging(_)) {
        return augment_plan(space, plan, n_new, seed, strategy);
    }
    let AugmentStrategy::MaximinFill { pool_size } = strategy;
    let pool: Vec<(DesignPoint, UseCasePoint)> =
        plan_lhs(space, pool_size, seed)?.runs.into_iter().map(|r| (r.design, r.use_case)).collect();
    let picks = max_variance_infill(model, &pool, n_new);
    if picks.len() < n_new {
        return augment_plan(space, plan, n_new, seed, strategy);
    }
    let mut out = plan.clone();
    for i in picks {
        let (design, use_case) = pool[i].clone();
        out.runs.push(PlannedRun { run_id: out.runs.len(), design, use_case });
    }
    out.params.augmentations.push(crate::dove::Augmentation { n_new, seed, pool_size });
    Ok(out)
}

/// Greedy batch selection: each pick maximizes the largest reduced Kriging
/// variance over targets, after which the pick joins its segment's training
/// inputs (variance does not depend on outputs, so no refit of the mean is
/// needed). Ties go to the lowest pool index.
pub fn max_variance_infill(model: &SurrogateModel, pool: &[(DesignPoint, UseCasePoint)], n_new: usize) -> Vec<usize> {
    let mut fits: Vec<Vec<kriging::KrigingFit>> = model
        .segments
        .iter()
        .map(|s| {
            s.fits
                .iter()
                .filter_map(|f| match f {
                    TargetFit::Kriging(k) => Some(k.clone()),
                    TargetFit::Polynomial { .. } => None,
                })
                .collect()
        })
        .collect();
    let rows: Vec<Option<(usize, Vec<f64>)>> = pool
        .iter()
        .map(|(d, u)| {
            let s = model.segment_index(d, u)?;
            let values: Vec<&crate::hyperspace::Value> = d.0.iter().chain(&u.0).collect();
            Some((s, model.segments[s].features.kriging_row(&values)))
        })
        .collect();
    let mut taken = vec![false; pool.len()];
    let mut picks = Vec::new();
    for _ in 0..n_new {
        let mut best: Option<(usize, f64)> = None;
        for (i, r) in rows.iter().enumerate() {
            let Some((s, x)) = r else { continue };
            if taken[i] || fits[*s].is_empty() {
                continue;
            }
            let score = fits[*s].iter().map(|f| f.reduced_variance(x)).fold(0.0, f64::max);
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((i, score));
            }
        }
        let Some((i, _)) = best else { break };
        taken[i] = true;
        picks.push(i);
        let (s, x) = rows[i].clone().expect("scored row");
        for f in fits[s].iter_mut() {
            let mut xs = f.x.clone();
            xs.push(x.clone());
            let zeros = vec![0.0; xs.len()];
            match kriging::fit_at(&xs, &zeros, &f.theta, f.nugget) {
                Ok(g) => *f = g,
                Err(_) => return picks,
            }
        }
    }
    picks
}

/// Trace CSV: `iteration,action,n_samples,loocv_rmse:<target>...,accuracy,space_hash`.
pub fn trace_csv(targets: &[String], trace: &[TraceRow]) -> String {
    let mut out = String::from("iteration,action,n_samples");
    for t in targets {
        out.push_str(&format!(",loocv_rmse:{t}"));
    }
    out.push_str(",accuracy,space_hash\n");
    for r in trace {
        out.push_str(&format!("{},{},{}", r.iteration, r.action.as_str(), r.n_samples));
        for v in &r.loocv_rmse {
            out.push(',');
            out.push_str(&v.map(fmt_f64).unwrap_or_default());
        }
        out.push_str(&format!(",{},{}\n", r.accuracy.map(fmt_f64).unwrap_or_default(), r.space_hash));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub label: String,
    pub spec: ModelSpec,
}

impl Candidate {
    pub fn new(spec: ModelSpec) -> Self {
        let label = match &spec.family {
            Family::Polynomial { degree } => format!("poly-p{degree}"),
            Family::Kriging(o) => format!("kriging-nugget{:e}", o.nugget),
        };
        let label = match spec.categories {
            crate::surrogate::CategoryMode::PerCategory => label,
            crate::surrogate::CategoryMode::Joint => format!("{label}-joint"),
        };
        Self { label, spec }
    }
}

/// Polynomials of degree 1 to 4 and Kriging with nuggets 1e-10, 1e-8, 1e-6.
pub fn default_candidates() -> Vec<Candidate> {
    let mut out: Vec<Candidate> = (1..=4).map(|p| Candidate::new(ModelSpec::polynomial(p))).collect();
    for nugget in [1e-10, 1e-8, 1e-6] {
        out.push(Candidate::new(ModelSpec::kriging(kriging::KrigingOptions { nugget, ..Default::default() })));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateResult {
    pub label: String,
    pub spec: ModelSpec,
    /// Worst range-relative LOOCV RMSE over targets.
    pub loocv: Option<f64>,
    pub n_params: Option<usize>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaResult {
    pub candidates: Vec<CandidateResult>,
    /// Front over the successful candidates in (loocv, n_params), both minimized.
    pub front: ParetoFront,
}

pub const META_TARGETS: [&str; 2] = ["loocv", "n_params"];

/// Fits every candidate on the same store and returns the front of
/// configurations. Failed fits, or fits without a defined LOOCV, are reported
/// and left out of the front.
pub fn optimize_surrogate(store: &ResultStore, candidates: &[Candidate]) -> Result<MetaResult, String> {
    if candidates.is_empty() {
        return Err("at least one candidate is required".into());
    }
    let results: Vec<CandidateResult> = std::thread::scope(|scope| {
        let handles: Vec<_> = candidates
            .iter()
            .map(|c| {
                scope.spawn(move || match fit(store, &c.spec) {
                    Ok(m) => {
                        let loocv = m.accuracy_fraction();
                        CandidateResult {
                            label: c.label.clone(),
                            spec: c.spec.clone(),
                            loocv,
                            n_params: Some(m.n_params()),
                            error: loocv.is_none().then(|| "loocv undefined".to_owned()),
                        }
                    }
                    Err(e) => CandidateResult {
                        label: c.label.clone(),
                        spec: c.spec.clone(),
                        loocv: None,
                        n_params: None,
                        error: Some(e.to_string()),
                    },
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("candidate fit")).collect()
    });
    let ok: Vec<&CandidateResult> = results.iter().filter(|r| r.error.is_none()).collect();
    let labels: Vec<String> = ok.iter().map(|r| r.label.clone()).collect();
    let values: Vec<Vec<f64>> = ok.iter().map(|r| vec![r.loocv.expect("ok"), r.n_params.expect("ok") as f64]).collect();
    let mut front = front_of_rows(
        &labels,
        &values,
        &META_TARGETS.map(str::to_owned),
        &[Orientation::Minimize, Orientation::Minimize],
        "surrogate configurations",
    );
    // Member ids refer to positions in `candidates`.
    let positions: Vec<usize> = results.iter().enumerate().filter(|(_, r)| r.error.is_none()).map(|(i, _)| i).collect();
    for m in &mut front.members {
        m.id = positions[m.id];
    }
    Ok(MetaResult { candidates: results, front })
}

#[cfg(test)]
mod tests;
