//! Potential envelopes: per sweep value and group, the range a target can take
//! over all remaining inputs.

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::dove::plan_lhs;
use crate::hyperspace::{
    DesignPoint, HyperSpace, Orientation, TargetIndicator, UseCasePoint, Value, Variable, VariableKind,
};
use crate::runner::ResultStore;
use crate::surrogate::SurrogateModel;

pub const DEFAULT_SAMPLES: usize = 256;

pub enum EnvelopeSource<'a> {
    /// Evaluate the model on an LHS sample of the remaining inputs.
    Model { model: &'a SurrogateModel, space: &'a HyperSpace },
    /// Use the ok records whose sweep value lies on the grid.
    Store(&'a ResultStore),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub sweep: String,
    pub grid: Vec<f64>,
    pub target: String,
    pub orientation: Orientation,
    pub group_by: Option<String>,
    pub groups: Vec<String>,
    /// `lower[group][grid index]`; `None` where no evaluation exists.
    pub lower: Vec<Vec<Option<f64>>>,
    pub upper: Vec<Vec<Option<f64>>>,
    pub count: Vec<Vec<usize>>,
    /// LHS sample size for model sources; 0 for store sources.
    pub samples: usize,
    pub seed: u64,
}

impl Envelope {
    pub fn best(&self, group: usize, i: usize) -> Option<f64> {
        match self.orientation {
            Orientation::Minimize => self.lower[group][i],
            Orientation::Maximize => self.upper[group][i],
        }
    }

    pub fn worst(&self, group: usize, i: usize) -> Option<f64> {
        match self.orientation {
            Orientation::Minimize => self.upper[group][i],
            Orientation::Maximize => self.lower[group][i],
        }
    }
}

struct Layout<'a> {
    inputs: Vec<&'a Variable>,
    sweep: usize,
    group: Option<usize>,
    labels: Vec<String>,
    target: usize,
}

fn layout<'a>(
    space: &'a HyperSpace,
    sweep: &str,
    grid: &[f64],
    target: &str,
    group_by: Option<&str>,
) -> Result<Layout<'a>, AnalysisError> {
    let inputs: Vec<&Variable> = space.inputs().collect();
    let sweep_pos =
        inputs.iter().position(|v| v.name == sweep).ok_or_else(|| AnalysisError::UnknownVariable(sweep.to_owned()))?;
    let var = inputs[sweep_pos];
    if !var.kind.is_numeric() {
        return Err(AnalysisError::InvalidArgument(format!("sweep variable `{sweep}` must be numeric")));
    }
    for &g in grid {
        var.check_value(&Value::Real(g)).map_err(|e| AnalysisError::InvalidArgument(format!("grid value {g}: {e}")))?;
    }
    let target = space.target_index(target).ok_or_else(|| AnalysisError::UnknownTarget(target.to_owned()))?;
    let (group, labels) = match group_by {
        None => (None, vec![String::new()]),
        Some(name) => {
            let pos = inputs
                .iter()
                .position(|v| v.name == name)
                .ok_or_else(|| AnalysisError::UnknownVariable(name.to_owned()))?;
            let labels = inputs[pos].labels().ok_or_else(|| {
                AnalysisError::InvalidArgument(format!("group variable `{name}` must be categorical"))
            })?;
            if pos == sweep_pos {
                return Err(AnalysisError::InvalidArgument("group and sweep variables coincide".into()));
            }
            (Some(pos), labels.to_vec())
        }
    };
    Ok(Layout { inputs, sweep: sweep_pos, group, labels, target })
}

/// Envelope of `target` over `grid` values of `sweep`, one band per label of
/// `group_by`.
pub fn potential_envelope(
    source: EnvelopeSource<'_>,
    sweep: &str,
    grid: &[f64],
    target: &str,
    group_by: Option<&str>,
    samples: usize,
    seed: u64,
) -> Result<Envelope, AnalysisError> {
    let space = match &source {
        EnvelopeSource::Model { space, model } => {
            if model.space_hash != space.hash() {
                return Err(crate::surrogate::PredictError::SpaceMismatch {
                    expected: model.space_hash.clone(),
                    found: space.hash(),
                }
                .into());
            }
            *space
        }
        EnvelopeSource::Store(store) => store.space(),
    };
    let lay = layout(space, sweep, grid, target, group_by)?;
    let g = lay.labels.len();
    let mut lower = vec![vec![None; grid.len()]; g];
    let mut upper = vec![vec![None; grid.len()]; g];
    let mut count = vec![vec![0usize; grid.len()]; g];
    let mut push = |gi: usize, i: usize, v: f64| {
        lower[gi][i] = Some(lower[gi][i].map_or(v, |l: f64| l.min(v)));
        upper[gi][i] = Some(upper[gi][i].map_or(v, |u: f64| u.max(v)));
        count[gi][i] += 1;
    };
    let n_design = space.design.len();
    let used_samples = match source {
        EnvelopeSource::Model { model, .. } => {
            if samples == 0 {
                return Err(AnalysisError::InvalidArgument("samples must be positive".into()));
            }
            let residual: Vec<usize> =
                (0..lay.inputs.len()).filter(|&i| i != lay.sweep && Some(i) != lay.group).collect();
            let rows: Vec<Vec<Value>> = if residual.is_empty() {
                vec![Vec::new()]
            } else {
                let sub = HyperSpace::new(
                    residual
                        .iter()
                        .map(|&i| {
                            let mut v = lay.inputs[i].clone();
                            v.active_when = None;
                            v
                        })
                        .collect(),
                    vec![],
                    vec![TargetIndicator::new("_", Orientation::Minimize)],
                );
                plan_lhs(&sub, samples, seed)?.runs.into_iter().map(|r| r.design.0).collect()
            };
            for (gi, label) in lay.labels.iter().enumerate() {
                for (i, &gv) in grid.iter().enumerate() {
                    let points: Vec<(DesignPoint, UseCasePoint)> = rows
                        .iter()
                        .map(|row| {
                            let mut values = Vec::with_capacity(lay.inputs.len());
                            let mut rest = row.iter();
                            for k in 0..lay.inputs.len() {
                                values.push(if k == lay.sweep {
                                    Value::Real(gv)
                                } else if Some(k) == lay.group {
                                    Value::Label(label.clone())
                                } else {
                                    rest.next().expect("residual value").clone()
                                });
                            }
                            let u = values.split_off(n_design);
                            (DesignPoint(values), UseCasePoint(u))
                        })
                        .collect();
                    for (d, u) in &points {
                        let p = model.predict_unchecked(d, u)?;
                        push(gi, i, p.targets.0[lay.target]);
                    }
                }
            }
            rows.len()
        }
        EnvelopeSource::Store(store) => {
            let var = lay.inputs[lay.sweep];
            let span = match &var.kind {
                VariableKind::Continuous { lower, upper } => upper - lower,
                VariableKind::Discrete { levels } => levels[levels.len() - 1] - levels[0],
                VariableKind::Categorical { .. } => unreachable!("checked numeric"),
            };
            let tol = 1e-9 * span.abs().max(1.0);
            for r in store.ok_records() {
                if !space.is_active(var, &r.design, &r.use_case) {
                    continue;
                }
                let values: Vec<&Value> = r.design.0.iter().chain(&r.use_case.0).collect();
                let gi = match lay.group {
                    None => 0,
                    Some(p) => match lay.labels.iter().position(|l| Some(l.as_str()) == values[p].as_label()) {
                        Some(gi) => gi,
                        None => continue,
                    },
                };
                let sv = values[lay.sweep].as_real().expect("numeric sweep");
                let t = r.targets.as_ref().expect("ok record").0[lay.target];
                for (i, &gv) in grid.iter().enumerate() {
                    if (sv - gv).abs() <= tol {
                        push(gi, i, t);
                    }
                }
            }
            0
        }
    };
    Ok(Envelope {
        sweep: sweep.to_owned(),
        grid: grid.to_vec(),
        target: space.targets[lay.target].name.clone(),
        orientation: space.targets[lay.target].orientation,
        group_by: group_by.map(str::to_owned),
        groups: lay.labels,
        lower,
        upper,
        count,
        samples: used_samples,
        seed,
    })
}
