//! Design space, use-case space and target indicators.
//!
//! A [`HyperSpace`] is the triple of design variables (spanning D), use-case
//! variables (spanning U) and target indicators (spanning T). Inputs of a
//! virtual experiment are a `(DesignPoint, UseCasePoint)` pair; its outcome is
//! a [`TargetVector`].
//!
//! Points are mapped to normalized numeric vectors with [`HyperSpace::encode_design`]
//! and friends: continuous values to `(v - lower) / (upper - lower)`, discrete
//! values to `level_index / (levels - 1)`, categorical values to a one-hot
//! block. Space-filling distances use [`HyperSpace::distance_coords`], which
//! scales one-hot blocks by `1/sqrt(2)` so a category flip has distance 1.
//!
//! The persisted form is a JSON document:
//!
//! ```json
//! {
//!   "design": [
//!     {"name": "torque", "kind": "continuous", "lower": 150, "upper": 350, "unit": "N m"},
//!     {"name": "gearbox", "kind": "categorical", "labels": ["fixed", "two_speed"]},
//!     {"name": "ratio2", "kind": "discrete", "levels": [3, 4, 5],
//!      "active_when": {"variable": "gearbox", "equals": "two_speed"}}
//!   ],
//!   "use_case": [],
//!   "targets": [{"name": "time", "orientation": "minimize", "unit": "s"}]
//! }
//! ```
//!
//! Unknown keys are rejected. Kind-specific keys (`lower`/`upper`, `levels`,
//! `labels`) must match the declared `kind`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::util::sha256_hex;

/// One coordinate of a point: a real number or a categorical label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Real(f64),
    Label(String),
}

impl Value {
    pub fn as_real(&self) -> Option<f64> {
        match self {
            Value::Real(x) => Some(*x),
            Value::Label(_) => None,
        }
    }

    pub fn as_label(&self) -> Option<&str> {
        match self {
            Value::Label(s) => Some(s),
            Value::Real(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Real(x) => write!(f, "{x}"),
            Value::Label(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Real(x)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Label(s.to_owned())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum VariableKind {
    Continuous { lower: f64, upper: f64 },
    Discrete { levels: Vec<f64> },
    Categorical { labels: Vec<String> },
}

impl VariableKind {
    pub fn is_numeric(&self) -> bool {
        !matches!(self, VariableKind::Categorical { .. })
    }

    /// Width of this variable's block in the encoded vector.
    pub fn encoded_width(&self) -> usize {
        match self {
            VariableKind::Categorical { labels } => labels.len(),
            _ => 1,
        }
    }
}

/// Activation predicate: the variable only matters when the categorical
/// variable `variable` takes the label `equals`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActiveWhen {
    pub variable: String,
    pub equals: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawVariable", into = "RawVariable")]
pub struct Variable {
    pub name: String,
    pub kind: VariableKind,
    pub unit: String,
    pub active_when: Option<ActiveWhen>,
}

impl Variable {
    pub fn continuous(name: &str, lower: f64, upper: f64) -> Self {
        Self::new(name, VariableKind::Continuous { lower, upper })
    }

    pub fn discrete(name: &str, levels: &[f64]) -> Self {
        Self::new(name, VariableKind::Discrete { levels: levels.to_vec() })
    }

    pub fn categorical(name: &str, labels: &[&str]) -> Self {
        Self::new(name, VariableKind::Categorical { labels: labels.iter().map(|s| (*s).to_owned()).collect() })
    }

    fn new(name: &str, kind: VariableKind) -> Self {
        Self { name: name.to_owned(), kind, unit: String::new(), active_when: None }
    }

    pub fn with_unit(mut self, unit: &str) -> Self {
        self.unit = unit.to_owned();
        self
    }

    pub fn active_when(mut self, variable: &str, equals: &str) -> Self {
        self.active_when = Some(ActiveWhen { variable: variable.to_owned(), equals: equals.to_owned() });
        self
    }

    pub fn labels(&self) -> Option<&[String]> {
        match &self.kind {
            VariableKind::Categorical { labels } => Some(labels),
            _ => None,
        }
    }

    /// Checks that `value` is admissible for this variable.
    pub fn check_value(&self, value: &Value) -> Result<(), PointError> {
        self.encode_into(value, &mut Vec::new())
    }

    fn encode_into(&self, value: &Value, out: &mut Vec<f64>) -> Result<(), PointError> {
        let var = || self.name.clone();
        match (&self.kind, value) {
            (VariableKind::Continuous { lower, upper }, Value::Real(v)) => {
                if !v.is_finite() || v < lower || v > upper {
                    return Err(PointError::OutOfBounds { variable: var(), value: *v, lower: *lower, upper: *upper });
                }
                out.push((v - lower) / (upper - lower));
            }
            (VariableKind::Discrete { levels }, Value::Real(v)) => {
                let idx =
                    levels.iter().position(|l| l == v).ok_or(PointError::NotALevel { variable: var(), value: *v })?;
                out.push(idx as f64 / (levels.len() - 1) as f64);
            }
            (VariableKind::Categorical { labels }, Value::Label(s)) => {
                let idx = labels
                    .iter()
                    .position(|l| l == s)
                    .ok_or_else(|| PointError::UnknownLabel { variable: var(), label: s.clone() })?;
                out.extend((0..labels.len()).map(|i| if i == idx { 1.0 } else { 0.0 }));
            }
            (VariableKind::Categorical { .. }, Value::Real(_)) => {
                return Err(PointError::WrongType { variable: var(), expected: "label" })
            }
            (_, Value::Label(_)) => return Err(PointError::WrongType { variable: var(), expected: "number" }),
        }
        Ok(())
    }

    fn decode(&self, block: &[f64]) -> Result<Value, PointError> {
        let var = || self.name.clone();
        match &self.kind {
            VariableKind::Continuous { lower, upper } => {
                let x = block[0];
                if !(0.0..=1.0).contains(&x) {
                    return Err(PointError::EncodedOutOfRange { variable: var(), value: x });
                }
                Ok(Value::Real((lower + x * (upper - lower)).clamp(*lower, *upper)))
            }
            VariableKind::Discrete { levels } => {
                let x = block[0];
                let scaled = x * (levels.len() - 1) as f64;
                let idx = scaled.round();
                if !(0.0..=1.0).contains(&x) || (scaled - idx).abs() > 1e-9 {
                    return Err(PointError::EncodedOutOfRange { variable: var(), value: x });
                }
                Ok(Value::Real(levels[idx as usize]))
            }
            VariableKind::Categorical { labels } => {
                let hot: Vec<usize> = block.iter().enumerate().filter(|(_, &b)| b != 0.0).map(|(i, _)| i).collect();
                match hot.as_slice() {
                    [i] if block[*i] == 1.0 => Ok(Value::Label(labels[*i].clone())),
                    _ => Err(PointError::NotOneHot { variable: var(), block: block.to_vec() }),
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Minimize,
    Maximize,
}

impl Orientation {
    /// Maps a target value to a cost where smaller is always better.
    pub fn cost(self, value: f64) -> f64 {
        match self {
            Orientation::Minimize => value,
            Orientation::Maximize => -value,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Orientation::Minimize => Orientation::Maximize,
            Orientation::Maximize => Orientation::Minimize,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetIndicator {
    pub name: String,
    pub orientation: Orientation,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub unit: String,
}

impl TargetIndicator {
    pub fn new(name: &str, orientation: Orientation) -> Self {
        Self { name: name.to_owned(), orientation, unit: String::new() }
    }

    pub fn with_unit(mut self, unit: &str) -> Self {
        self.unit = unit.to_owned();
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint(pub Vec<Value>);

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct UseCasePoint(pub Vec<Value>);

/// Target indicator values of one experiment, in declaration order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetVector(pub Vec<f64>);

impl TargetVector {
    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

/// Which half of the input vector a variable belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Block {
    Design,
    UseCase,
}

/// Position of an input variable: block plus index within the block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct InputRef {
    pub block: Block,
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperSpace {
    pub design: Vec<Variable>,
    #[serde(default)]
    pub use_case: Vec<Variable>,
    pub targets: Vec<TargetIndicator>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rule {
    EmptyDesign,
    EmptyTargets,
    EmptyName,
    NameCollision,
    NonFiniteBounds,
    DegenerateBounds,
    TooFewLevels,
    LevelsNotIncreasing,
    TooFewLabels,
    DuplicateLabel,
    UnknownActivator,
    ActivatorNotCategorical,
    UnknownActivatorLabel,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::EmptyDesign => "empty design space",
            Rule::EmptyTargets => "no target indicators",
            Rule::EmptyName => "empty name",
            Rule::NameCollision => "name collision",
            Rule::NonFiniteBounds => "non-finite bounds",
            Rule::DegenerateBounds => "degenerate bounds",
            Rule::TooFewLevels => "fewer than 2 levels",
            Rule::LevelsNotIncreasing => "levels not strictly increasing",
            Rule::TooFewLabels => "fewer than 2 labels",
            Rule::DuplicateLabel => "duplicate label",
            Rule::UnknownActivator => "active_when refers to unknown variable",
            Rule::ActivatorNotCategorical => "active_when refers to non-categorical variable",
            Rule::UnknownActivatorLabel => "active_when label not declared",
        })
    }
}

/// A broken invariant of a [`HyperSpace`]; `subject` names the offending
/// variable or target (empty for space-level rules).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Violation {
    pub subject: String,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.subject.is_empty() {
            write!(f, "{}", self.rule)
        } else {
            write!(f, "`{}`: {}", self.subject, self.rule)
        }
    }
}

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("cannot parse space document: {0}")]
    Parse(String),
    #[error("invalid space: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

#[derive(Debug, Error, PartialEq)]
pub enum PointError {
    #[error("expected {expected} values, got {actual}")]
    Arity { expected: usize, actual: usize },
    #[error("variable `{variable}`: value {value} outside [{lower}, {upper}]")]
    OutOfBounds { variable: String, value: f64, lower: f64, upper: f64 },
    #[error("variable `{variable}`: {value} is not a declared level")]
    NotALevel { variable: String, value: f64 },
    #[error("variable `{variable}`: `{label}` is not a declared label")]
    UnknownLabel { variable: String, label: String },
    #[error("variable `{variable}`: expected a {expected}")]
    WrongType { variable: String, expected: &'static str },
    #[error("variable `{variable}`: encoded value {value} is not admissible")]
    EncodedOutOfRange { variable: String, value: f64 },
    #[error("variable `{variable}`: one-hot block {block:?} is not a unit basis vector")]
    NotOneHot { variable: String, block: Vec<f64> },
}

impl HyperSpace {
    pub fn new(design: Vec<Variable>, use_case: Vec<Variable>, targets: Vec<TargetIndicator>) -> Self {
        Self { design, use_case, targets }
    }

    pub fn from_json_str(text: &str) -> Result<Self, SpaceError> {
        serde_json::from_str(text).map_err(|e| SpaceError::Parse(e.to_string()))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("space serializes")
    }

    /// Content hash of the canonical (compact) serialization.
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("space serializes"))
    }

    /// Lists every violated invariant. The result is sorted, so it does not
    /// depend on the declaration order of variables.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = BTreeSet::new();
        let mut push = |subject: &str, rule| {
            out.insert(Violation { subject: subject.to_owned(), rule });
        };
        if self.design.is_empty() {
            push("", Rule::EmptyDesign);
        }
        if self.targets.is_empty() {
            push("", Rule::EmptyTargets);
        }

        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for name in self.inputs().map(|v| v.name.as_str()).chain(self.targets.iter().map(|t| t.name.as_str())) {
            *counts.entry(name).or_default() += 1;
        }
        for (name, count) in &counts {
            if name.trim().is_empty() {
                push(name, Rule::EmptyName);
            } else if *count > 1 {
                push(name, Rule::NameCollision);
            }
        }

        for v in self.inputs() {
            match &v.kind {
                VariableKind::Continuous { lower, upper } => {
                    if !lower.is_finite() || !upper.is_finite() {
                        push(&v.name, Rule::NonFiniteBounds);
                    } else if lower >= upper {
                        push(&v.name, Rule::DegenerateBounds);
                    }
                }
                VariableKind::Discrete { levels } => {
                    if levels.len() < 2 {
                        push(&v.name, Rule::TooFewLevels);
                    }
                    if levels.iter().any(|l| !l.is_finite()) {
                        push(&v.name, Rule::NonFiniteBounds);
                    }
                    if levels.windows(2).any(|w| w[0] >= w[1]) {
                        push(&v.name, Rule::LevelsNotIncreasing);
                    }
                }
                VariableKind::Categorical { labels } => {
                    if labels.len() < 2 {
                        push(&v.name, Rule::TooFewLabels);
                    }
                    if labels.iter().collect::<BTreeSet<_>>().len() != labels.len() {
                        push(&v.name, Rule::DuplicateLabel);
                    }
                }
            }
            if let Some(aw) = &v.active_when {
                match self.inputs().find(|o| o.name == aw.variable) {
                    None => push(&v.name, Rule::UnknownActivator),
                    Some(o) if o.name == v.name => push(&v.name, Rule::UnknownActivator),
                    Some(o) => match o.labels() {
                        None => push(&v.name, Rule::ActivatorNotCategorical),
                        Some(labels) if !labels.contains(&aw.equals) => push(&v.name, Rule::UnknownActivatorLabel),
                        Some(_) => {}
                    },
                }
            }
        }
        out.into_iter().collect()
    }

    pub fn check(&self) -> Result<(), SpaceError> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(SpaceError::Invalid(violations))
        }
    }

    /// Design variables followed by use-case variables.
    pub fn inputs(&self) -> impl Iterator<Item = &Variable> + '_ {
        self.design.iter().chain(self.use_case.iter())
    }

    pub fn input_count(&self) -> usize {
        self.design.len() + self.use_case.len()
    }

    pub fn input(&self, r: InputRef) -> &Variable {
        match r.block {
            Block::Design => &self.design[r.index],
            Block::UseCase => &self.use_case[r.index],
        }
    }

    pub fn find_input(&self, name: &str) -> Option<InputRef> {
        if let Some(index) = self.design.iter().position(|v| v.name == name) {
            return Some(InputRef { block: Block::Design, index });
        }
        self.use_case.iter().position(|v| v.name == name).map(|index| InputRef { block: Block::UseCase, index })
    }

    pub fn target_index(&self, name: &str) -> Option<usize> {
        self.targets.iter().position(|t| t.name == name)
    }

    pub fn target_names(&self) -> Vec<String> {
        self.targets.iter().map(|t| t.name.clone()).collect()
    }

    pub fn orientations(&self) -> Vec<Orientation> {
        self.targets.iter().map(|t| t.orientation).collect()
    }

    pub fn validate_design(&self, d: &DesignPoint) -> Result<(), PointError> {
        check_values(&self.design, &d.0)
    }

    pub fn validate_use_case(&self, u: &UseCasePoint) -> Result<(), PointError> {
        check_values(&self.use_case, &u.0)
    }

    pub fn encode_design(&self, d: &DesignPoint) -> Result<Vec<f64>, PointError> {
        encode_values(&self.design, &d.0)
    }

    pub fn encode_use_case(&self, u: &UseCasePoint) -> Result<Vec<f64>, PointError> {
        encode_values(&self.use_case, &u.0)
    }

    pub fn decode_design(&self, encoded: &[f64]) -> Result<DesignPoint, PointError> {
        decode_values(&self.design, encoded).map(DesignPoint)
    }

    pub fn decode_use_case(&self, encoded: &[f64]) -> Result<UseCasePoint, PointError> {
        decode_values(&self.use_case, encoded).map(UseCasePoint)
    }

    /// Concatenated encoding of design and use-case coordinates.
    pub fn encode_inputs(&self, d: &DesignPoint, u: &UseCasePoint) -> Result<Vec<f64>, PointError> {
        let mut x = self.encode_design(d)?;
        x.extend(self.encode_use_case(u)?);
        Ok(x)
    }

    /// Encoding used for space-filling distances: like [`Self::encode_inputs`]
    /// but with one-hot blocks scaled by `1/sqrt(2)`.
    pub fn distance_coords(&self, d: &DesignPoint, u: &UseCasePoint) -> Result<Vec<f64>, PointError> {
        let mut x = self.encode_inputs(d, u)?;
        let mut at = 0;
        for v in self.inputs() {
            let w = v.kind.encoded_width();
            if !v.kind.is_numeric() {
                for c in &mut x[at..at + w] {
                    *c *= std::f64::consts::FRAC_1_SQRT_2;
                }
            }
            at += w;
        }
        Ok(x)
    }

    /// Value of input `r` at the point `(d, u)`.
    pub fn value<'a>(&self, r: InputRef, d: &'a DesignPoint, u: &'a UseCasePoint) -> &'a Value {
        match r.block {
            Block::Design => &d.0[r.index],
            Block::UseCase => &u.0[r.index],
        }
    }

    /// Whether `var` is active at `(d, u)` according to its `active_when`
    /// predicate. Variables without a predicate are always active.
    pub fn is_active(&self, var: &Variable, d: &DesignPoint, u: &UseCasePoint) -> bool {
        match &var.active_when {
            None => true,
            Some(aw) => match self.find_input(&aw.variable) {
                Some(r) => self.value(r, d, u).as_label() == Some(aw.equals.as_str()),
                None => true,
            },
        }
    }
}

fn check_values(vars: &[Variable], values: &[Value]) -> Result<(), PointError> {
    if vars.len() != values.len() {
        return Err(PointError::Arity { expected: vars.len(), actual: values.len() });
    }
    vars.iter().zip(values).try_for_each(|(v, x)| v.check_value(x))
}

/// Encodes `values` against `vars` (see the module docs for the mapping).
pub fn encode_values(vars: &[Variable], values: &[Value]) -> Result<Vec<f64>, PointError> {
    if vars.len() != values.len() {
        return Err(PointError::Arity { expected: vars.len(), actual: values.len() });
    }
    let mut out = Vec::with_capacity(encoded_width(vars));
    for (v, x) in vars.iter().zip(values) {
        v.encode_into(x, &mut out)?;
    }
    Ok(out)
}

pub fn decode_values(vars: &[Variable], encoded: &[f64]) -> Result<Vec<Value>, PointError> {
    let width = encoded_width(vars);
    if encoded.len() != width {
        return Err(PointError::Arity { expected: width, actual: encoded.len() });
    }
    let mut at = 0;
    vars.iter()
        .map(|v| {
            let w = v.kind.encoded_width();
            let value = v.decode(&encoded[at..at + w]);
            at += w;
            value
        })
        .collect()
}

pub fn encoded_width(vars: &[Variable]) -> usize {
    vars.iter().map(|v| v.kind.encoded_width()).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum KindTag {
    Continuous,
    Discrete,
    Categorical,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVariable {
    name: String,
    kind: KindTag,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    unit: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    upper: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    levels: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    active_when: Option<ActiveWhen>,
}

impl TryFrom<RawVariable> for Variable {
    type Error = String;

    fn try_from(raw: RawVariable) -> Result<Self, Self::Error> {
        let stray = |field: &str| format!("variable `{}`: `{field}` not allowed for this kind", raw.name);
        let missing = |field: &str| format!("variable `{}`: missing `{field}`", raw.name);
        let kind = match raw.kind {
            KindTag::Continuous => {
                if raw.levels.is_some() {
                    return Err(stray("levels"));
                }
                if raw.labels.is_some() {
                    return Err(stray("labels"));
                }
                VariableKind::Continuous {
                    lower: raw.lower.ok_or_else(|| missing("lower"))?,
                    upper: raw.upper.ok_or_else(|| missing("upper"))?,
                }
            }
            KindTag::Discrete => {
                if raw.lower.is_some() || raw.upper.is_some() {
                    return Err(stray("lower/upper"));
                }
                if raw.labels.is_some() {
                    return Err(stray("labels"));
                }
                VariableKind::Discrete { levels: raw.levels.ok_or_else(|| missing("levels"))? }
            }
            KindTag::Categorical => {
                if raw.lower.is_some() || raw.upper.is_some() {
                    return Err(stray("lower/upper"));
                }
                if raw.levels.is_some() {
                    return Err(stray("levels"));
                }
                VariableKind::Categorical { labels: raw.labels.ok_or_else(|| missing("labels"))? }
            }
        };
        Ok(Variable { name: raw.name, kind, unit: raw.unit, active_when: raw.active_when })
    }
}

impl From<Variable> for RawVariable {
    fn from(v: Variable) -> Self {
        let mut raw = RawVariable {
            name: v.name,
            kind: KindTag::Continuous,
            unit: v.unit,
            lower: None,
            upper: None,
            levels: None,
            labels: None,
            active_when: v.active_when,
        };
        match v.kind {
            VariableKind::Continuous { lower, upper } => {
                raw.lower = Some(lower);
                raw.upper = Some(upper);
            }
            VariableKind::Discrete { levels } => {
                raw.kind = KindTag::Discrete;
                raw.levels = Some(levels);
            }
            VariableKind::Categorical { labels } => {
                raw.kind = KindTag::Categorical;
                raw.labels = Some(labels);
            }
        }
        raw
    }
}
