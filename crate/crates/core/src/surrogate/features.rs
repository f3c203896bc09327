//! Input scaling and polynomial feature expansion.

use serde::{Deserialize, Serialize};

use crate::hyperspace::{HyperSpace, Value, VariableKind};

/// Target interval of the affine map applied to numeric inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// `[-1, 1]`, used for polynomial bases.
    Symmetric,
    /// `[0, 1]`, used for Kriging distances.
    Unit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumericInput {
    pub name: String,
    /// Position in the concatenated design + use-case input list.
    pub input: usize,
    pub lower: f64,
    pub upper: f64,
    /// `(input position, label)` of the categorical input gating this one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_when: Option<(usize, String)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoricalInput {
    pub name: String,
    pub input: usize,
    pub labels: Vec<String>,
}

/// One polynomial column: a monomial over the scaled numeric inputs,
/// optionally multiplied by a category indicator `[categorical[c] == labels[l]]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Term {
    pub exponents: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indicator: Option<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    pub scale: Scale,
    pub numeric: Vec<NumericInput>,
    pub categorical: Vec<CategoricalInput>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub terms: Vec<Term>,
}

impl FeatureMap {
    /// Inputs of a segment. `fixed` lists categorical inputs held at one label
    /// (the segment key); those are left out, as are numeric inputs whose
    /// activation predicate contradicts the key. Remaining categorical inputs
    /// become one-hot features.
    pub fn for_segment(space: &HyperSpace, fixed: &[(usize, String)], scale: Scale) -> Self {
        let mut numeric = Vec::new();
        let mut categorical = Vec::new();
        for (i, var) in space.inputs().enumerate() {
            let gate = var
                .active_when
                .as_ref()
                .and_then(|aw| space.inputs().position(|v| v.name == aw.variable).map(|p| (p, aw.equals.clone())));
            if let Some((p, label)) = &gate {
                if let Some((_, l)) = fixed.iter().find(|(q, _)| q == p) {
                    if l != label {
                        continue;
                    }
                }
            }
            match &var.kind {
                VariableKind::Continuous { lower, upper } => numeric.push(NumericInput {
                    name: var.name.clone(),
                    input: i,
                    lower: *lower,
                    upper: *upper,
                    active_when: gate.filter(|(p, _)| !fixed.iter().any(|(q, _)| q == p)),
                }),
                VariableKind::Discrete { levels } => numeric.push(NumericInput {
                    name: var.name.clone(),
                    input: i,
                    lower: levels[0],
                    upper: *levels.last().expect("validated levels"),
                    active_when: gate.filter(|(p, _)| !fixed.iter().any(|(q, _)| q == p)),
                }),
                VariableKind::Categorical { labels } => {
                    if !fixed.iter().any(|(q, _)| *q == i) {
                        categorical.push(CategoricalInput { name: var.name.clone(), input: i, labels: labels.clone() });
                    }
                }
            }
        }
        Self { scale, numeric, categorical, terms: Vec::new() }
    }

    /// Adds polynomial terms: all monomials of total degree `<= degree`, one
    /// indicator per non-reference label (the first label is the reference),
    /// and indicator x monomial interactions of degree `1..=min(degree, 2)`.
    ///
    /// Numeric inputs gated by a categorical input are zero off their gate, so
    /// monomials mixing inputs gated on different labels, and interactions
    /// between a gated monomial and its own categorical input, are dropped as
    /// structurally zero or duplicate columns.
    pub fn with_polynomial_terms(mut self, degree: u32) -> Self {
        let gates: Vec<Option<(usize, &str)>> = self
            .numeric
            .iter()
            .map(|n| {
                let (p, label) = n.active_when.as_ref()?;
                let c = self.categorical.iter().position(|c| c.input == *p)?;
                Some((c, label.as_str()))
            })
            .collect();
        let gated_on = |e: &[u32]| -> Result<Vec<(usize, &str)>, ()> {
            let mut out: Vec<(usize, &str)> = Vec::new();
            for (g, _) in gates.iter().zip(e).filter(|(_, &k)| k > 0) {
                if let Some((c, l)) = g {
                    match out.iter().find(|(oc, _)| oc == c) {
                        Some((_, ol)) if ol != l => return Err(()),
                        Some(_) => {}
                        None => out.push((*c, l)),
                    }
                }
            }
            Ok(out)
        };
        let monomials: Vec<Vec<u32>> =
            monomials(self.numeric.len(), degree).into_iter().filter(|e| gated_on(e).is_ok()).collect();
        let mut terms: Vec<Term> = monomials.iter().map(|e| Term { exponents: e.clone(), indicator: None }).collect();
        let zero = vec![0; self.numeric.len()];
        for (c, cat) in self.categorical.iter().enumerate() {
            for l in 1..cat.labels.len() {
                terms.push(Term { exponents: zero.clone(), indicator: Some((c, l)) });
            }
        }
        let max_interaction = degree.min(2);
        for (c, cat) in self.categorical.iter().enumerate() {
            for l in 1..cat.labels.len() {
                for e in &monomials {
                    let total: u32 = e.iter().sum();
                    let own_gate = gated_on(e).unwrap_or_default().iter().any(|(gc, _)| *gc == c);
                    if (1..=max_interaction).contains(&total) && !own_gate {
                        terms.push(Term { exponents: e.clone(), indicator: Some((c, l)) });
                    }
                }
            }
        }
        self.terms = terms;
        self
    }

    /// Scaled numeric inputs; inactive coordinates sit at the interval midpoint.
    pub fn scaled_numeric(&self, values: &[&Value]) -> Vec<f64> {
        self.numeric
            .iter()
            .map(|n| {
                let active =
                    n.active_when.as_ref().is_none_or(|(p, label)| values[*p].as_label() == Some(label.as_str()));
                let unit = if active {
                    let v = values[n.input].as_real().expect("numeric input");
                    (v - n.lower) / (n.upper - n.lower)
                } else {
                    0.5
                };
                match self.scale {
                    Scale::Symmetric => 2.0 * unit - 1.0,
                    Scale::Unit => unit,
                }
            })
            .collect()
    }

    fn label_index(&self, c: usize, values: &[&Value]) -> Option<usize> {
        let cat = &self.categorical[c];
        let label = values[cat.input].as_label()?;
        cat.labels.iter().position(|l| l == label)
    }

    /// Kriging input vector: scaled numeric inputs followed by one-hot blocks.
    pub fn kriging_row(&self, values: &[&Value]) -> Vec<f64> {
        let mut row = self.scaled_numeric(values);
        for (c, cat) in self.categorical.iter().enumerate() {
            let hot = self.label_index(c, values);
            row.extend((0..cat.labels.len()).map(|l| if Some(l) == hot { 1.0 } else { 0.0 }));
        }
        row
    }

    pub fn kriging_dims(&self) -> usize {
        self.numeric.len() + self.categorical.iter().map(|c| c.labels.len()).sum::<usize>()
    }

    /// Polynomial design-matrix row.
    pub fn polynomial_row(&self, values: &[&Value]) -> Vec<f64> {
        let x = self.scaled_numeric(values);
        let labels: Vec<Option<usize>> = (0..self.categorical.len()).map(|c| self.label_index(c, values)).collect();
        self.terms
            .iter()
            .map(|t| {
                if let Some((c, l)) = t.indicator {
                    if labels[c] != Some(l) {
                        return 0.0;
                    }
                }
                t.exponents.iter().zip(&x).fold(1.0, |acc, (&e, &xi)| acc * xi.powi(e as i32))
            })
            .collect()
    }

    pub fn term_name(&self, t: &Term) -> String {
        let mut parts = Vec::new();
        if let Some((c, l)) = t.indicator {
            let cat = &self.categorical[c];
            parts.push(format!("[{}={}]", cat.name, cat.labels[l]));
        }
        for (e, n) in t.exponents.iter().zip(&self.numeric) {
            match e {
                0 => {}
                1 => parts.push(n.name.clone()),
                _ => parts.push(format!("{}^{e}", n.name)),
            }
        }
        if parts.is_empty() {
            "1".to_owned()
        } else {
            parts.join("*")
        }
    }
}

/// Exponent vectors over `dims` variables with total degree `<= degree`,
/// ordered by total degree, then lexicographically descending.
pub fn monomials(dims: usize, degree: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for total in 0..=degree {
        let mut current = vec![0; dims];
        fill(&mut out, &mut current, 0, total);
    }
    out
}

fn fill(out: &mut Vec<Vec<u32>>, current: &mut Vec<u32>, at: usize, remaining: u32) {
    if at == current.len() {
        if remaining == 0 {
            out.push(current.clone());
        }
        return;
    }
    if at + 1 == current.len() {
        current[at] = remaining;
        out.push(current.clone());
        current[at] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        current[at] = e;
        fill(out, current, at + 1, remaining - e);
    }
    current[at] = 0;
}
