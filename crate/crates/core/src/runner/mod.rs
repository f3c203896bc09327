//! Executes experiment plans against simulators and records the outcomes.
//!
//! A [`Simulator`] maps `(design, use_case)` to a [`TargetVector`] or a
//! failure reason. [`run_plan`] evaluates every pending run of a plan with a
//! fixed number of worker threads and funnels results through a single writer
//! into a [`ResultStore`]. Failures are recorded, not fatal, unless their
//! share of the plan exceeds `max_failures`.

mod external;
mod store;

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use thiserror::Error;

use crate::dove::{ExperimentPlan, PlannedRun};
use crate::hyperspace::{DesignPoint, HyperSpace, TargetVector, UseCasePoint};

pub use external::{serve_line_protocol, ExternalProcessSimulator, DEFAULT_TIMEOUT};
pub use store::{load_store, ResultStore, StoreError, StoreMeta};

/// Reason attached to a failed evaluation.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct SimFailure(pub String);

impl SimFailure {
    pub fn new(reason: impl Into<String>) -> Self {
        Self(reason.into())
    }
}

/// A modeling and simulation environment. Implementations must be
/// deterministic for fixed inputs and safe to call from several threads.
pub trait Simulator: Send + Sync {
    fn evaluate(
        &self,
        run_id: usize,
        design: &DesignPoint,
        use_case: &UseCasePoint,
    ) -> Result<TargetVector, SimFailure>;
}

impl<F> Simulator for F
where
    F: Fn(&DesignPoint, &UseCasePoint) -> Result<TargetVector, SimFailure> + Send + Sync,
{
    fn evaluate(
        &self,
        _run_id: usize,
        design: &DesignPoint,
        use_case: &UseCasePoint,
    ) -> Result<TargetVector, SimFailure> {
        self(design, use_case)
    }
}

/// Reference simulator returning, for each target, the design variable of the
/// same name.
pub struct EchoSimulator {
    columns: Vec<Option<usize>>,
}

impl EchoSimulator {
    pub fn new(space: &HyperSpace) -> Self {
        Self { columns: space.targets.iter().map(|t| space.design.iter().position(|v| v.name == t.name)).collect() }
    }
}

impl Simulator for EchoSimulator {
    fn evaluate(&self, _: usize, design: &DesignPoint, _: &UseCasePoint) -> Result<TargetVector, SimFailure> {
        self.columns
            .iter()
            .map(|c| {
                c.and_then(|i| design.0[i].as_real())
                    .ok_or_else(|| SimFailure::new("no numeric design variable named like the target"))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(TargetVector)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed,
    Skipped,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::Failed => "failed",
            RunStatus::Skipped => "skipped",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ok" => Some(RunStatus::Ok),
            "failed" => Some(RunStatus::Failed),
            "skipped" => Some(RunStatus::Skipped),
            _ => None,
        }
    }
}

/// One completed (or abandoned) virtual experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRecord {
    pub run_id: usize,
    pub design: DesignPoint,
    pub use_case: UseCasePoint,
    pub status: RunStatus,
    /// Present iff `status == Ok`; all entries finite.
    pub targets: Option<TargetVector>,
    pub duration_s: f64,
    pub reason: String,
}

impl ExperimentRecord {
    pub fn ok(run: &PlannedRun, targets: TargetVector, duration_s: f64) -> Self {
        Self::new(run, RunStatus::Ok, Some(targets), duration_s, String::new())
    }

    pub fn failed(run: &PlannedRun, reason: impl Into<String>, duration_s: f64) -> Self {
        Self::new(run, RunStatus::Failed, None, duration_s, reason.into())
    }

    pub fn skipped(run: &PlannedRun, reason: impl Into<String>) -> Self {
        Self::new(run, RunStatus::Skipped, None, 0.0, reason.into())
    }

    fn new(
        run: &PlannedRun,
        status: RunStatus,
        targets: Option<TargetVector>,
        duration_s: f64,
        reason: String,
    ) -> Self {
        Self {
            run_id: run.run_id,
            design: run.design.clone(),
            use_case: run.use_case.clone(),
            status,
            targets,
            duration_s,
            reason,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == RunStatus::Ok
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    /// Number of concurrent evaluations.
    pub parallelism: usize,
    /// Abort once failed runs exceed this fraction of the plan.
    pub max_failures: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { parallelism: 1, max_failures: 0.5 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RunSummary {
    pub ok: usize,
    pub failed: usize,
    pub skipped: usize,
    /// Runs already present in the store before this call.
    pub resumed: usize,
    /// Simulator invocations made by this call.
    pub evaluated: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("store belongs to plan {store} but plan hashes to {plan}")]
    PlanMismatch { store: String, plan: String },
    #[error("store belongs to space {store} but plan was built for {plan}")]
    SpaceMismatch { store: String, plan: String },
    #[error("aborted: {failed} of {total} runs failed (limit {limit})")]
    TooManyFailures { failed: usize, total: usize, limit: f64, summary: RunSummary },
    #[error("invalid run options: {0}")]
    Options(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Evaluates every run of `plan` that has no ok/failed record in `store`.
pub fn run_plan(
    plan: &ExperimentPlan,
    simulator: &dyn Simulator,
    opts: &RunOptions,
    store: &mut ResultStore,
) -> Result<RunSummary, RunError> {
    if store.plan_hash() != plan.hash() {
        return Err(RunError::PlanMismatch { store: store.plan_hash().to_owned(), plan: plan.hash() });
    }
    if store.space_hash() != plan.space_hash {
        return Err(RunError::SpaceMismatch { store: store.space_hash().to_owned(), plan: plan.space_hash.clone() });
    }
    if opts.parallelism == 0 {
        return Err(RunError::Options("parallelism must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&opts.max_failures) {
        return Err(RunError::Options("max_failures must be within [0, 1]".into()));
    }
    let started = Instant::now();
    store.discard_skipped()?;
    let k = store.space().targets.len();
    let total = plan.len();
    let resumed = plan.runs.iter().filter(|r| store.get(r.run_id).is_some()).count();
    let pending: Vec<&PlannedRun> = plan.runs.iter().filter(|r| store.get(r.run_id).is_none()).collect();
    let failed_before = store.records().filter(|r| r.status == RunStatus::Failed).count();
    let limit = opts.max_failures * total as f64;

    let next = AtomicUsize::new(0);
    let failed_total = AtomicUsize::new(failed_before);
    let abort = AtomicBool::new(failed_before as f64 > limit);
    let mut evaluated = 0;
    let mut write_error = None;
    std::thread::scope(|scope| {
        let (tx, rx) = mpsc::channel::<ExperimentRecord>();
        for _ in 0..opts.parallelism.min(pending.len().max(1)) {
            let tx = tx.clone();
            let (next, abort, pending, failed_total) = (&next, &abort, &pending, &failed_total);
            scope.spawn(move || loop {
                if abort.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(run) = pending.get(i) else { break };
                let t0 = Instant::now();
                let outcome = simulator.evaluate(run.run_id, &run.design, &run.use_case);
                let dt = t0.elapsed().as_secs_f64();
                let record = match outcome {
                    Ok(t) if t.0.len() != k => {
                        ExperimentRecord::failed(run, format!("expected {k} targets, got {}", t.0.len()), dt)
                    }
                    Ok(t) if !t.is_finite() => ExperimentRecord::failed(run, "non-finite target", dt),
                    Ok(t) => ExperimentRecord::ok(run, t, dt),
                    Err(e) => ExperimentRecord::failed(run, e.0, dt),
                };
                if record.status == RunStatus::Failed
                    && (failed_total.fetch_add(1, Ordering::SeqCst) + 1) as f64 > limit
                {
                    abort.store(true, Ordering::SeqCst);
                }
                if tx.send(record).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for record in rx {
            evaluated += 1;
            if write_error.is_none() {
                if let Err(e) = store.insert(record) {
                    write_error = Some(e);
                    abort.store(true, Ordering::SeqCst);
                }
            }
        }
    });
    if let Some(e) = write_error {
        return Err(e.into());
    }

    let aborted = abort.load(Ordering::SeqCst);
    if aborted {
        for run in &plan.runs {
            if store.get(run.run_id).is_none() {
                store.insert(ExperimentRecord::skipped(run, "aborted by failure guard"))?;
            }
        }
    }
    store.finalize()?;

    let count = |s| store.records().filter(|r| r.status == s).count();
    let summary = RunSummary {
        ok: count(RunStatus::Ok),
        failed: count(RunStatus::Failed),
        skipped: count(RunStatus::Skipped),
        resumed,
        evaluated,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    if aborted {
        return Err(RunError::TooManyFailures { failed: summary.failed, total, limit: opts.max_failures, summary });
    }
    Ok(summary)
}

/// Runs `plan` into a fresh in-memory store on one thread.
pub fn evaluate_in_memory(
    space: &HyperSpace,
    plan: &ExperimentPlan,
    simulator: &dyn Simulator,
) -> Result<ResultStore, RunError> {
    let mut store = ResultStore::in_memory(space, plan);
    let opts = RunOptions { max_failures: 1.0, ..RunOptions::default() };
    run_plan(plan, simulator, &opts, &mut store)?;
    Ok(store)
}
