//! Constrained quadratic models over binary variables.
//!
//! A [`CqmModel`] is lowered to a [`PenalizedModel`] by [`lower_to_qubo`],
//! sampled with the simulated annealer in [`anneal`], and driven to
//! feasibility by the penalty calibration loop in [`solve_cqm`]. The
//! [`remote`] module ships the same model to an external sampler.

mod anneal;
mod calibrate;
mod ising;
mod lower;
pub mod remote;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use anneal::{anneal, AnnealParams, SlackMoves};
pub(crate) use anneal::mix_seed;
pub use calibrate::{initial_penalties, solve_cqm, Calibration};
pub use ising::{ising_from_qubo, qubo_from_ising, IsingModel};
pub use lower::{lower_to_qubo, PenaltyTerm, PenalizedModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CqmError {
    #[error("variable {var} out of range for a model with {num_vars} variables")]
    VariableOutOfRange { var: usize, num_vars: usize },
    #[error("constraint `{0}` has no variables")]
    EmptyConstraint(String),
    #[error("penalty for constraint {index} must be positive, got {value}")]
    NonPositivePenalty { index: usize, value: f64 },
    #[error("expected {expected} penalties, got {found}")]
    PenaltyCount { expected: usize, found: usize },
    #[error("model has no variables")]
    EmptyModel,
    #[error("invalid annealing parameters: {0}")]
    InvalidParams(String),
}

/// Sparse quadratic form `offset + Σ c_i x_i + Σ_{i<j} q_ij x_i x_j` over
/// binary variables. Diagonal terms fold into the linear part (`x² = x`).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuadForm {
    pub offset: f64,
    linear: BTreeMap<usize, f64>,
    quadratic: BTreeMap<(usize, usize), f64>,
}

impl QuadForm {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        QuadForm {
            offset: c,
            ..Self::default()
        }
    }

    pub fn add_linear(&mut self, i: usize, c: f64) {
        if c == 0.0 {
            return;
        }
        let e = self.linear.entry(i).or_insert(0.0);
        *e += c;
        if *e == 0.0 {
            self.linear.remove(&i);
        }
    }

    pub fn add_quadratic(&mut self, i: usize, j: usize, c: f64) {
        if i == j {
            self.add_linear(i, c);
            return;
        }
        if c == 0.0 {
            return;
        }
        let key = if i < j { (i, j) } else { (j, i) };
        let e = self.quadratic.entry(key).or_insert(0.0);
        *e += c;
        if *e == 0.0 {
            self.quadratic.remove(&key);
        }
    }

    /// `self += k · other`.
    pub fn add_scaled(&mut self, other: &QuadForm, k: f64) {
        self.offset += k * other.offset;
        for (&i, &c) in &other.linear {
            self.add_linear(i, k * c);
        }
        for (&(i, j), &c) in &other.quadratic {
            self.add_quadratic(i, j, k * c);
        }
    }

    pub fn scaled(&self, k: f64) -> QuadForm {
        let mut out = QuadForm::constant(0.0);
        out.add_scaled(self, k);
        out
    }

    pub fn linear(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.linear.iter().map(|(&i, &c)| (i, c))
    }

    pub fn quadratic(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.quadratic.iter().map(|(&(i, j), &c)| (i, j, c))
    }

    pub fn linear_coefficient(&self, i: usize) -> f64 {
        self.linear.get(&i).copied().unwrap_or(0.0)
    }

    pub fn quadratic_coefficient(&self, i: usize, j: usize) -> f64 {
        let key = if i < j { (i, j) } else { (j, i) };
        self.quadratic.get(&key).copied().unwrap_or(0.0)
    }

    pub fn num_linear(&self) -> usize {
        self.linear.len()
    }

    pub fn num_quadratic(&self) -> usize {
        self.quadratic.len()
    }

    pub fn is_linear(&self) -> bool {
        self.quadratic.is_empty()
    }

    /// True when no variable appears.
    pub fn is_constant(&self) -> bool {
        self.linear.is_empty() && self.quadratic.is_empty()
    }

    /// Sorted, deduplicated variable indices.
    pub fn variables(&self) -> Vec<usize> {
        let mut vars: Vec<usize> = self
            .linear
            .keys()
            .copied()
            .chain(self.quadratic.keys().flat_map(|&(i, j)| [i, j]))
            .collect();
        vars.sort_unstable();
        vars.dedup();
        vars
    }

    pub fn max_variable(&self) -> Option<usize> {
        self.variables().last().copied()
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.linear
            .values()
            .chain(self.quadratic.values())
            .fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn evaluate(&self, x: &[bool]) -> f64 {
        let mut e = self.offset;
        for (&i, &c) in &self.linear {
            if x[i] {
                e += c;
            }
        }
        for (&(i, j), &c) in &self.quadratic {
            if x[i] && x[j] {
                e += c;
            }
        }
        e
    }

    /// Loose bounds over all binary assignments: each term contributes its
    /// coefficient to the upper bound when positive and to the lower bound
    /// when negative.
    pub fn bounds(&self) -> (f64, f64) {
        let mut lo = self.offset;
        let mut hi = self.offset;
        for &c in self.linear.values().chain(self.quadratic.values()) {
            if c < 0.0 {
                lo += c;
            } else {
                hi += c;
            }
        }
        (lo, hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "==")]
    Eq,
}

/// Absolute tolerance for constraint checks.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub expr: QuadForm,
    pub sense: Sense,
    pub bound: f64,
    pub label: String,
}

impl Constraint {
    pub fn new(expr: QuadForm, sense: Sense, bound: f64, label: impl Into<String>) -> Self {
        Constraint {
            expr,
            sense,
            bound,
            label: label.into(),
        }
    }

    /// Amount by which the assignment misses the bound; zero when satisfied.
    pub fn violation(&self, x: &[bool]) -> f64 {
        let v = self.expr.evaluate(x);
        match self.sense {
            Sense::Le => (v - self.bound).max(0.0),
            Sense::Ge => (self.bound - v).max(0.0),
            Sense::Eq => (v - self.bound).abs(),
        }
    }

    pub fn is_satisfied(&self, x: &[bool]) -> bool {
        self.violation(x) <= FEASIBILITY_TOL
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CqmModel {
    num_vars: usize,
    pub objective: QuadForm,
    constraints: Vec<Constraint>,
}

impl CqmModel {
    pub fn new(num_vars: usize) -> Self {
        CqmModel {
            num_vars,
            objective: QuadForm::new(),
            constraints: Vec::new(),
        }
    }

    pub fn with_objective(num_vars: usize, objective: QuadForm) -> Result<Self, CqmError> {
        check_range(&objective, num_vars)?;
        Ok(CqmModel {
            num_vars,
            objective,
            constraints: Vec::new(),
        })
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn set_objective(&mut self, objective: QuadForm) -> Result<(), CqmError> {
        check_range(&objective, self.num_vars)?;
        self.objective = objective;
        Ok(())
    }

    pub fn add_constraint(&mut self, c: Constraint) -> Result<(), CqmError> {
        if c.expr.is_constant() {
            return Err(CqmError::EmptyConstraint(c.label));
        }
        check_range(&c.expr, self.num_vars)?;
        self.constraints.push(c);
        Ok(())
    }

    pub fn is_feasible(&self, x: &[bool]) -> bool {
        self.constraints.iter().all(|c| c.is_satisfied(x))
    }

    pub fn violated_labels(&self, x: &[bool]) -> Vec<&str> {
        self.constraints
            .iter()
            .filter(|c| !c.is_satisfied(x))
            .map(|c| c.label.as_str())
            .collect()
    }
}

fn check_range(form: &QuadForm, num_vars: usize) -> Result<(), CqmError> {
    match form.max_variable() {
        Some(v) if v >= num_vars => Err(CqmError::VariableOutOfRange { var: v, num_vars }),
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub assignment: Vec<bool>,
    pub energy: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleInfo {
    /// Penalty vector used in each calibration round, first round first.
    pub penalties: Vec<Vec<f64>>,
    pub slack_vars: usize,
    pub source: String,
}

/// Samples ordered feasible-first, then by energy, then by assignment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub samples: Vec<Sample>,
    pub info: SampleInfo,
}

impl SampleSet {
    pub fn new(mut samples: Vec<Sample>, info: SampleInfo) -> Self {
        samples.sort_by(|a, b| {
            b.feasible
                .cmp(&a.feasible)
                .then(a.energy.total_cmp(&b.energy))
                .then_with(|| a.assignment.cmp(&b.assignment))
        });
        SampleSet { samples, info }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first(&self) -> Option<&Sample> {
        self.samples.first()
    }

    /// Lowest-energy sample among those flagged feasible.
    pub fn best_feasible(&self) -> Option<&Sample> {
        self.samples.first().filter(|s| s.feasible)
    }

    pub fn num_feasible(&self) -> usize {
        self.samples.iter().filter(|s| s.feasible).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_keys_are_canonical() {
        let mut q = QuadForm::new();
        q.add_quadratic(3, 1, 2.0);
        q.add_quadratic(1, 3, 1.0);
        q.add_quadratic(2, 2, 5.0);
        assert_eq!(q.quadratic().collect::<Vec<_>>(), vec![(1, 3, 3.0)]);
        assert_eq!(q.linear_coefficient(2), 5.0);
        q.add_quadratic(1, 3, -3.0);
        assert!(q.is_linear());
    }

    #[test]
    fn evaluate_and_bounds() {
        let mut q = QuadForm::constant(1.0);
        q.add_linear(0, -2.0);
        q.add_linear(1, 3.0);
        q.add_quadratic(0, 1, 4.0);
        assert_eq!(q.evaluate(&[false, false]), 1.0);
        assert_eq!(q.evaluate(&[true, true]), 6.0);
        assert_eq!(q.bounds(), (-1.0, 8.0));
    }

    #[test]
    fn model_validates_constraints() {
        let mut m = CqmModel::new(2);
        let mut e = QuadForm::new();
        e.add_linear(5, 1.0);
        assert!(matches!(
            m.add_constraint(Constraint::new(e, Sense::Le, 1.0, "far")),
            Err(CqmError::VariableOutOfRange { var: 5, .. })
        ));
        assert!(matches!(
            m.add_constraint(Constraint::new(QuadForm::constant(2.0), Sense::Le, 1.0, "const")),
            Err(CqmError::EmptyConstraint(_))
        ));
    }

    #[test]
    fn sample_set_ordering() {
        let s = |e: f64, f: bool| Sample {
            assignment: vec![f],
            energy: e,
            feasible: f,
        };
        let set = SampleSet::new(vec![s(-5.0, false), s(3.0, true), s(1.0, true)], SampleInfo::default());
        assert_eq!(set.samples[0].energy, 1.0);
        assert_eq!(set.samples[2].energy, -5.0);
        assert_eq!(set.best_feasible().unwrap().energy, 1.0);
    }
}
