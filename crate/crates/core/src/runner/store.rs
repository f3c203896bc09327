//! Simulation result storage: an append-only CSV file plus a metadata sidecar.
//!
//! Columns: `run_id,status,duration_s,<design names>,<use-case names>,<target names>,reason`.
//! Failed and skipped rows leave the target cells empty. While a campaign runs,
//! records are appended in completion order; [`ResultStore::finalize`]
//! rewrites the file in ascending `run_id` order.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{File, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ExperimentRecord, RunStatus};
use crate::dove::{csv_cell, parse_cell, sidecar_path, ExperimentPlan};
use crate::hyperspace::{DesignPoint, HyperSpace, TargetVector, UseCasePoint};
use crate::util::{atomic_write, fmt_f64, quote_csv};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("integrity: duplicate record for run {0}")]
    Duplicate(usize),
    #[error("schema: {0}")]
    Schema(String),
    #[error("store belongs to plan {found}, expected {expected}")]
    PlanMismatch { found: String, expected: String },
    #[error("store io: {0}")]
    Io(#[from] std::io::Error),
}

/// Sidecar written next to a result CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoreMeta {
    pub tool_version: String,
    pub space_hash: String,
    pub plan_hash: String,
}

#[derive(Debug)]
pub struct ResultStore {
    space: HyperSpace,
    space_hash: String,
    plan_hash: String,
    records: BTreeMap<usize, ExperimentRecord>,
    backing: Option<(PathBuf, File)>,
}

impl PartialEq for ResultStore {
    fn eq(&self, other: &Self) -> bool {
        self.space == other.space
            && self.space_hash == other.space_hash
            && self.plan_hash == other.plan_hash
            && self.records == other.records
    }
}

impl ResultStore {
    pub fn in_memory(space: &HyperSpace, plan: &ExperimentPlan) -> Self {
        Self::with_hashes(space, space.hash(), plan.hash())
    }

    pub fn with_hashes(space: &HyperSpace, space_hash: String, plan_hash: String) -> Self {
        Self { space: space.clone(), space_hash, plan_hash, records: BTreeMap::new(), backing: None }
    }

    /// Starts a new file-backed store, replacing anything at `path`.
    pub fn create(path: &Path, space: &HyperSpace, plan: &ExperimentPlan) -> Result<Self, StoreError> {
        let mut store = Self::in_memory(space, plan);
        store.attach(path)?;
        Ok(store)
    }

    /// Reopens a partially written store for the same plan. A truncated last
    /// line (from an interrupted writer) is dropped, as are skipped records,
    /// which will be evaluated again.
    pub fn resume(path: &Path, space: &HyperSpace, plan: &ExperimentPlan) -> Result<Self, StoreError> {
        let meta = read_meta(path)?;
        if meta.plan_hash != plan.hash() {
            return Err(StoreError::PlanMismatch { found: meta.plan_hash, expected: plan.hash() });
        }
        let mut text = std::fs::read_to_string(path)?;
        if !text.ends_with('\n') {
            text.truncate(text.rfind('\n').map_or(0, |i| i + 1));
        }
        let mut store = Self::from_csv(&text, space, meta.space_hash, meta.plan_hash)?;
        store.records.retain(|_, r| r.status != RunStatus::Skipped);
        store.attach(path)?;
        Ok(store)
    }

    fn attach(&mut self, path: &Path) -> Result<(), StoreError> {
        atomic_write(path, self.to_csv().as_bytes())?;
        let meta = StoreMeta {
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            space_hash: self.space_hash.clone(),
            plan_hash: self.plan_hash.clone(),
        };
        let text = serde_json::to_string_pretty(&meta).expect("meta serializes") + "\n";
        atomic_write(&sidecar_path(path), text.as_bytes())?;
        let file = OpenOptions::new().append(true).open(path)?;
        self.backing = Some((path.to_owned(), file));
        Ok(())
    }

    pub fn space(&self) -> &HyperSpace {
        &self.space
    }

    pub fn space_hash(&self) -> &str {
        &self.space_hash
    }

    pub fn plan_hash(&self) -> &str {
        &self.plan_hash
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, run_id: usize) -> Option<&ExperimentRecord> {
        self.records.get(&run_id)
    }

    /// Records in ascending `run_id` order.
    pub fn records(&self) -> impl Iterator<Item = &ExperimentRecord> + '_ {
        self.records.values()
    }

    pub fn ok_records(&self) -> impl Iterator<Item = &ExperimentRecord> + '_ {
        self.records.values().filter(|r| r.is_ok())
    }

    /// Adds a record; appends it to the backing file when there is one.
    pub fn insert(&mut self, record: ExperimentRecord) -> Result<(), StoreError> {
        if self.records.contains_key(&record.run_id) {
            return Err(StoreError::Duplicate(record.run_id));
        }
        if let Some((_, file)) = &mut self.backing {
            let mut line = String::new();
            write_row(&mut line, &record, self.space.targets.len(), true);
            file.write_all(line.as_bytes())?;
            file.flush()?;
        }
        self.records.insert(record.run_id, record);
        Ok(())
    }

    /// Drops skipped records so they can be re-run, rewriting the file.
    pub(crate) fn discard_skipped(&mut self) -> Result<(), StoreError> {
        let before = self.records.len();
        self.records.retain(|_, r| r.status != RunStatus::Skipped);
        if self.records.len() != before {
            self.finalize()?;
        }
        Ok(())
    }

    /// Rewrites the backing file in canonical order.
    pub fn finalize(&mut self) -> Result<(), StoreError> {
        if let Some((path, _)) = self.backing.take() {
            atomic_write(&path, self.to_csv().as_bytes())?;
            let file = OpenOptions::new().append(true).open(&path)?;
            self.backing = Some((path, file));
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        self.render(true)
    }

    /// Canonical form used for reproducibility comparisons: ascending
    /// `run_id` with wall-clock durations zeroed.
    pub fn canonical_csv(&self) -> String {
        self.render(false)
    }

    fn render(&self, durations: bool) -> String {
        let mut out = header(&self.space).join(",");
        out.push('\n');
        for r in self.records.values() {
            write_row(&mut out, r, self.space.targets.len(), durations);
        }
        out
    }

    pub fn from_csv(text: &str, space: &HyperSpace, space_hash: String, plan_hash: String) -> Result<Self, StoreError> {
        let schema = |m: String| StoreError::Schema(m);
        let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let found: Vec<String> =
            reader.headers().map_err(|e| schema(e.to_string()))?.iter().map(str::to_owned).collect();
        let expected = header(space);
        if found != expected {
            return Err(schema(format!("header {found:?} does not match {expected:?}")));
        }
        let nd = space.design.len();
        let nu = space.use_case.len();
        let k = space.targets.len();
        let mut store = Self::with_hashes(space, space_hash, plan_hash);
        for rec in reader.records() {
            let rec = rec.map_err(|e| schema(e.to_string()))?;
            let run_id: usize = rec[0].parse().map_err(|_| schema(format!("bad run_id `{}`", &rec[0])))?;
            let status =
                RunStatus::parse(&rec[1]).ok_or_else(|| schema(format!("run {run_id}: bad status `{}`", &rec[1])))?;
            let duration_s: f64 =
                rec[2].parse().map_err(|_| schema(format!("run {run_id}: bad duration `{}`", &rec[2])))?;
            let mut values = Vec::with_capacity(nd + nu);
            for (i, var) in space.inputs().enumerate() {
                values.push(parse_cell(&rec[3 + i], var).map_err(|m| schema(format!("run {run_id}: {m}")))?);
            }
            let use_case = UseCasePoint(values.split_off(nd));
            let design = DesignPoint(values);
            let cells: Vec<&str> = (0..k).map(|i| &rec[3 + nd + nu + i]).collect();
            let targets = match status {
                RunStatus::Ok => {
                    let t = cells
                        .iter()
                        .map(|c| c.parse::<f64>().ok().filter(|x| x.is_finite()))
                        .collect::<Option<Vec<f64>>>()
                        .ok_or_else(|| schema(format!("run {run_id}: ok row needs finite targets")))?;
                    Some(TargetVector(t))
                }
                _ => {
                    if cells.iter().any(|c| !c.is_empty()) {
                        return Err(schema(format!("run {run_id}: non-ok row carries targets")));
                    }
                    None
                }
            };
            let record = ExperimentRecord {
                run_id,
                design,
                use_case,
                status,
                targets,
                duration_s,
                reason: rec[3 + nd + nu + k].to_owned(),
            };
            if store.records.insert(run_id, record).is_some() {
                return Err(StoreError::Duplicate(run_id));
            }
        }
        Ok(store)
    }
}

/// Loads a result CSV, taking hashes from the sidecar when present.
pub fn load_store(path: &Path, space: &HyperSpace) -> Result<ResultStore, StoreError> {
    let text = std::fs::read_to_string(path)?;
    let (space_hash, plan_hash) = match read_meta(path) {
        Ok(m) => (m.space_hash, m.plan_hash),
        Err(StoreError::Io(e)) if e.kind() == std::io::ErrorKind::NotFound => (space.hash(), String::new()),
        Err(e) => return Err(e),
    };
    if space_hash != space.hash() {
        return Err(StoreError::Schema(format!("results were produced for space {space_hash}, not {}", space.hash())));
    }
    ResultStore::from_csv(&text, space, space_hash, plan_hash)
}

fn read_meta(path: &Path) -> Result<StoreMeta, StoreError> {
    let meta_path = sidecar_path(path);
    let text = std::fs::read_to_string(&meta_path)?;
    serde_json::from_str(&text).map_err(|e| StoreError::Schema(format!("{}: {e}", meta_path.display())))
}

fn header(space: &HyperSpace) -> Vec<String> {
    ["run_id", "status", "duration_s"]
        .into_iter()
        .map(str::to_owned)
        .chain(space.inputs().map(|v| v.name.clone()))
        .chain(space.targets.iter().map(|t| t.name.clone()))
        .chain(std::iter::once("reason".to_owned()))
        .collect()
}

fn write_row(out: &mut String, r: &ExperimentRecord, k: usize, duration: bool) {
    let _ =
        write!(out, "{},{},{}", r.run_id, r.status.as_str(), if duration { fmt_f64(r.duration_s) } else { "0".into() });
    for v in r.design.0.iter().chain(&r.use_case.0) {
        out.push(',');
        out.push_str(&csv_cell(v));
    }
    match &r.targets {
        Some(t) => {
            for x in &t.0 {
                out.push(',');
                out.push_str(&fmt_f64(*x));
            }
        }
        None => out.push_str(&",".repeat(k)),
    }
    out.push(',');
    if !r.reason.is_empty() {
        out.push_str(&quote_csv(&r.reason));
    }
    out.push('\n');
}
