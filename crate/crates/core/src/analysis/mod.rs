//! Trade-off quantification: dominance, Pareto fronts over observed or
//! surrogate-predicted targets, potential envelopes and trade-off tables.

pub mod envelope;
pub mod export;
pub mod oracle;
pub mod pareto;
pub mod plot;

use serde::{Deserialize, Serialize};

use crate::dove::{cartesian, equispaced, DoveError};
use crate::hyperspace::{
    encode_values, DesignPoint, HyperSpace, Orientation, TargetVector, UseCasePoint, Value, Variable, VariableKind,
};
use crate::runner::ResultStore;
use crate::surrogate::{PredictError, SurrogateModel};
use crate::util::sha256_hex;

pub use envelope::{potential_envelope, Envelope, EnvelopeSource, DEFAULT_SAMPLES};
pub use pareto::{dominates_cost, front_indices};

pub const DEFAULT_GRID_CAP: usize = 1_000_000;

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("arity mismatch: expected {expected} targets, got {found}")]
    Arity { expected: usize, found: usize },
    #[error("empty selection: no ok record matches the filter")]
    EmptySelection,
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("unknown target `{0}`")]
    UnknownTarget(String),
    #[error("grid too large: {size} > {cap} evaluations")]
    GridTooLarge { size: u128, cap: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Predict(#[from] PredictError),
}

impl From<DoveError> for AnalysisError {
    fn from(e: DoveError) -> Self {
        match e {
            DoveError::PlanTooLarge { size, cap } => Self::GridTooLarge { size, cap },
            other => Self::InvalidArgument(other.to_string()),
        }
    }
}

/// `a` dominates `b` under the given orientations.
pub fn dominates(a: &TargetVector, b: &TargetVector, orientations: &[Orientation]) -> Result<bool, AnalysisError> {
    for v in [a, b] {
        if v.0.len() != orientations.len() {
            return Err(AnalysisError::Arity { expected: orientations.len(), found: v.0.len() });
        }
    }
    Ok(dominates_cost(&costs(&a.0, orientations), &costs(&b.0, orientations)))
}

pub fn costs(values: &[f64], orientations: &[Orientation]) -> Vec<f64> {
    values.iter().zip(orientations).map(|(v, o)| o.cost(*v)).collect()
}

/// Restricts records by input values. Continuous and discrete inputs match
/// within `tolerance` on their encoded `[0, 1]` value; categorical inputs
/// match by label. Inactive inputs never match.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub conditions: Vec<(String, Value)>,
    pub tolerance: f64,
}

impl Selection {
    pub fn all() -> Self {
        Self { conditions: Vec::new(), tolerance: 1e-9 }
    }

    pub fn with(mut self, variable: &str, value: impl Into<Value>) -> Self {
        self.conditions.push((variable.to_owned(), value.into()));
        self
    }

    pub fn use_case(space: &HyperSpace, u: &UseCasePoint) -> Self {
        let mut s = Self::all();
        for (var, v) in space.use_case.iter().zip(&u.0) {
            s.conditions.push((var.name.clone(), v.clone()));
        }
        s
    }

    fn resolve<'a>(&'a self, space: &'a HyperSpace) -> Result<Vec<(&'a Variable, usize, &'a Value)>, AnalysisError> {
        self.conditions
            .iter()
            .map(|(name, value)| {
                let pos = space
                    .inputs()
                    .position(|v| &v.name == name)
                    .ok_or_else(|| AnalysisError::UnknownVariable(name.clone()))?;
                let var = space.inputs().nth(pos).expect("position found");
                Ok((var, pos, value))
            })
            .collect()
    }

    pub fn matches(&self, space: &HyperSpace, d: &DesignPoint, u: &UseCasePoint) -> Result<bool, AnalysisError> {
        let values: Vec<&Value> = d.0.iter().chain(&u.0).collect();
        for (var, pos, want) in self.resolve(space)? {
            if !space.is_active(var, d, u) {
                return Ok(false);
            }
            let got = values[pos];
            let ok = match &var.kind {
                VariableKind::Categorical { .. } => got.as_label() == want.as_label(),
                _ => {
                    let one = std::slice::from_ref(var);
                    match (
                        encode_values(one, std::slice::from_ref(got)),
                        encode_values(one, std::slice::from_ref(want)),
                    ) {
                        (Ok(a), Ok(b)) => (a[0] - b[0]).abs() <= self.tolerance,
                        _ => false,
                    }
                }
            };
            if !ok {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontMember {
    /// Run id for observed fronts, grid index for surrogate fronts.
    pub id: usize,
    pub design: DesignPoint,
    pub use_case: UseCasePoint,
    pub targets: TargetVector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridDomain {
    /// Bounding box of the model's training inputs.
    ValidationArea,
    /// Declared variable bounds.
    Bounds,
}

/// Evaluation grid for surrogate fronts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignGrid {
    /// Points per continuous variable. Discrete and categorical variables use
    /// all their levels.
    pub levels: usize,
    pub domain: GridDomain,
    /// Design variables held at one value.
    pub fixed: Vec<(String, Value)>,
    pub cap: usize,
}

impl Default for DesignGrid {
    fn default() -> Self {
        Self { levels: 21, domain: GridDomain::ValidationArea, fixed: Vec::new(), cap: DEFAULT_GRID_CAP }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FrontSource {
    Store { space_hash: String, plan_hash: String, selection: Selection },
    Surrogate { model_hash: String, grid: DesignGrid },
    Custom { description: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    /// `None` marks a front over observed data pooled across use cases.
    pub use_case: Option<UseCasePoint>,
    pub targets: Vec<String>,
    pub orientations: Vec<Orientation>,
    pub members: Vec<FrontMember>,
    pub source: FrontSource,
    /// Points considered, after exclusions.
    pub evaluated: usize,
    /// Surrogate grid points dropped for lying outside the validation area.
    pub excluded_extrapolated: usize,
}

fn target_indices(space: &HyperSpace, targets: Option<&[String]>) -> Result<Vec<usize>, AnalysisError> {
    match targets {
        None => Ok((0..space.targets.len()).collect()),
        Some(names) => {
            names.iter().map(|n| space.target_index(n).ok_or_else(|| AnalysisError::UnknownTarget(n.clone()))).collect()
        }
    }
}

fn point_key(d: &DesignPoint, u: &UseCasePoint) -> Vec<u64> {
    d.0.iter()
        .chain(&u.0)
        .map(|v| match v {
            Value::Real(x) => x.to_bits(),
            Value::Label(s) => u64::from_str_radix(&sha256_hex(s.as_bytes())[..16], 16).expect("hex"),
        })
        .collect()
}

fn build_front(
    candidates: Vec<FrontMember>,
    space: &HyperSpace,
    idx: &[usize],
    use_case: Option<UseCasePoint>,
    source: FrontSource,
    excluded_extrapolated: usize,
) -> ParetoFront {
    let orientations: Vec<Orientation> = idx.iter().map(|&t| space.targets[t].orientation).collect();
    let cost: Vec<Vec<f64>> = candidates
        .iter()
        .map(|m| idx.iter().zip(&orientations).map(|(&t, o)| o.cost(m.targets.0[t])).collect())
        .collect();
    let keys: Vec<Vec<u64>> = candidates.iter().map(|m| point_key(&m.design, &m.use_case)).collect();
    let keep = front_indices(&cost, &keys);
    let evaluated = candidates.len();
    let mut members: Vec<FrontMember> = Vec::with_capacity(keep.len());
    let mut it = keep.into_iter().peekable();
    for (i, mut m) in candidates.into_iter().enumerate() {
        if it.peek() == Some(&i) {
            it.next();
            m.targets = TargetVector(idx.iter().map(|&t| m.targets.0[t]).collect());
            members.push(m);
        }
    }
    ParetoFront {
        use_case,
        targets: idx.iter().map(|&t| space.targets[t].name.clone()).collect(),
        orientations,
        members,
        source,
        evaluated,
        excluded_extrapolated,
    }
}

/// Front over the ok records of `store` that pass `selection`, restricted to
/// the named targets (all targets when `None`). Exact repeats of a record keep
/// the lowest run id.
pub fn pareto_front_observed(
    store: &ResultStore,
    selection: &Selection,
    targets: Option<&[String]>,
) -> Result<ParetoFront, AnalysisError> {
    let space = store.space();
    let idx = target_indices(space, targets)?;
    let mut candidates = Vec::new();
    for r in store.ok_records() {
        if selection.matches(space, &r.design, &r.use_case)? {
            candidates.push(FrontMember {
                id: r.run_id,
                design: r.design.clone(),
                use_case: r.use_case.clone(),
                targets: r.targets.clone().expect("ok record has targets"),
            });
        }
    }
    if candidates.is_empty() {
        return Err(AnalysisError::EmptySelection);
    }
    let source = FrontSource::Store {
        space_hash: store.space_hash().to_owned(),
        plan_hash: store.plan_hash().to_owned(),
        selection: selection.clone(),
    };
    Ok(build_front(candidates, space, &idx, None, source, 0))
}

/// Enumerates the design grid: cartesian product of per-variable axes with
/// inactive variables collapsed onto their first axis value.
pub fn design_grid(
    space: &HyperSpace,
    model: Option<&SurrogateModel>,
    grid: &DesignGrid,
    u: &UseCasePoint,
) -> Result<Vec<DesignPoint>, AnalysisError> {
    if grid.levels < 1 {
        return Err(AnalysisError::InvalidArgument("grid levels must be at least 1".into()));
    }
    for (name, _) in &grid.fixed {
        if !space.design.iter().any(|v| &v.name == name) {
            return Err(AnalysisError::UnknownVariable(name.clone()));
        }
    }
    let area = match (&grid.domain, model) {
        (GridDomain::ValidationArea, Some(m)) => m.validation_area(),
        _ => Vec::new(),
    };
    let axes: Vec<Vec<Value>> = space
        .design
        .iter()
        .map(|var| {
            if let Some((_, v)) = grid.fixed.iter().find(|(n, _)| n == &var.name) {
                return vec![v.clone()];
            }
            match &var.kind {
                VariableKind::Continuous { lower, upper } => {
                    let (lo, hi) = area
                        .iter()
                        .find(|a| a.variable == var.name && a.lower.is_finite() && a.upper.is_finite())
                        .map_or((*lower, *upper), |a| (a.lower, a.upper));
                    equispaced(lo, hi, grid.levels).into_iter().map(Value::Real).collect()
                }
                VariableKind::Discrete { levels } => levels.iter().map(|&l| Value::Real(l)).collect(),
                VariableKind::Categorical { labels } => labels.iter().map(|l| Value::Label(l.clone())).collect(),
            }
        })
        .collect();
    let raw = cartesian(&axes, grid.cap)?;
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(raw.len());
    for mut values in raw {
        let d = DesignPoint(values.clone());
        for (i, var) in space.design.iter().enumerate() {
            if !space.is_active(var, &d, u) {
                values[i] = axes[i][0].clone();
            }
        }
        let d = DesignPoint(values);
        if seen.insert(point_key(&d, &UseCasePoint::default())) {
            out.push(d);
        }
    }
    Ok(out)
}

/// Front of surrogate predictions over a design grid at fixed use case `u`.
pub fn pareto_front_surrogate(
    model: &SurrogateModel,
    space: &HyperSpace,
    u: &UseCasePoint,
    grid: &DesignGrid,
    targets: Option<&[String]>,
) -> Result<ParetoFront, AnalysisError> {
    if model.space_hash != space.hash() {
        return Err(PredictError::SpaceMismatch { expected: model.space_hash.clone(), found: space.hash() }.into());
    }
    space.validate_use_case(u).map_err(|e| AnalysisError::InvalidArgument(e.to_string()))?;
    let idx = target_indices(space, targets)?;
    let points = design_grid(space, Some(model), grid, u)?;
    let predictions = predict_all(model, &points, u)?;
    let mut excluded = 0;
    let mut candidates = Vec::new();
    for (i, (d, p)) in points.into_iter().zip(predictions).enumerate() {
        if p.extrapolated {
            excluded += 1;
            continue;
        }
        candidates.push(FrontMember { id: i, design: d, use_case: u.clone(), targets: p.targets });
    }
    let source = FrontSource::Surrogate { model_hash: sha256_hex(model.to_json().as_bytes()), grid: grid.clone() };
    Ok(build_front(candidates, space, &idx, Some(u.clone()), source, excluded))
}

/// Predicts every point, splitting the work across threads and merging in order.
pub fn predict_all(
    model: &SurrogateModel,
    points: &[DesignPoint],
    u: &UseCasePoint,
) -> Result<Vec<crate::surrogate::Prediction>, PredictError> {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(16);
    let chunk = points.len().div_ceil(threads).max(256);
    std::thread::scope(|scope| {
        let handles: Vec<_> = points
            .chunks(chunk)
            .map(|c| scope.spawn(move || c.iter().map(|d| model.predict_unchecked(d, u)).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("prediction worker")).collect()
    })
}

/// Generic front over labelled rows, used for fronts outside the experiment
/// space (for example over surrogate configurations).
pub fn front_of_rows(
    labels: &[String],
    values: &[Vec<f64>],
    targets: &[String],
    orientations: &[Orientation],
    description: &str,
) -> ParetoFront {
    let cost: Vec<Vec<f64>> = values.iter().map(|v| costs(v, orientations)).collect();
    let keep = front_indices(&cost, labels);
    ParetoFront {
        use_case: None,
        targets: targets.to_vec(),
        orientations: orientations.to_vec(),
        members: keep
            .into_iter()
            .map(|i| FrontMember {
                id: i,
                design: DesignPoint(vec![Value::Label(labels[i].clone())]),
                use_case: UseCasePoint::default(),
                targets: TargetVector(values[i].clone()),
            })
            .collect(),
        source: FrontSource::Custom { description: description.to_owned() },
        evaluated: values.len(),
        excluded_extrapolated: 0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub id: usize,
    pub targets: Vec<f64>,
    /// `(t_b[i] - t_b[i-1]) / (t_a[i] - t_a[i-1])` for every target `b` after
    /// the first, `a` being the first. Empty on the first row; `None` where
    /// the first target does not change.
    pub exchange_rates: Vec<Option<f64>>,
}

/// Front members ordered by cost in the first target, with exchange rates
/// between neighbours.
pub fn tradeoff_table(front: &ParetoFront) -> Vec<TradeoffRow> {
    let o = front.orientations[0];
    let mut members: Vec<&FrontMember> = front.members.iter().collect();
    members.sort_by(|a, b| o.cost(a.targets.0[0]).total_cmp(&o.cost(b.targets.0[0])).then(a.id.cmp(&b.id)));
    let mut rows: Vec<TradeoffRow> = Vec::with_capacity(members.len());
    for (i, m) in members.iter().enumerate() {
        let exchange_rates = if i == 0 {
            Vec::new()
        } else {
            let prev = &members[i - 1].targets.0;
            let da = m.targets.0[0] - prev[0];
            (1..m.targets.0.len()).map(|b| (da != 0.0).then(|| (m.targets.0[b] - prev[b]) / da)).collect()
        };
        rows.push(TradeoffRow { id: m.id, targets: m.targets.0.clone(), exchange_rates });
    }
    rows
}

#[cfg(test)]
mod tests;
