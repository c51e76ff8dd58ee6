use serde::{Deserialize, Serialize};

use super::anneal::mix_seed;
use super::{anneal, lower_to_qubo, AnnealParams, CqmError, CqmModel, SampleSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Calibration {
    pub lambda_init_multiplier: f64,
    pub escalation_factor: f64,
    /// Total number of anneal rounds, the first one included.
    pub max_rounds: usize,
}

impl Default for Calibration {
    fn default() -> Self {
        Calibration {
            lambda_init_multiplier: 2.0,
            escalation_factor: 10.0,
            max_rounds: 4,
        }
    }
}

/// Objective coefficient scale; 1 for a pure feasibility model.
fn objective_scale(model: &CqmModel) -> f64 {
    let m = model.objective.max_abs_coefficient();
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

/// `multiplier × max |objective coefficient| × (variables in the constraint)`.
pub fn initial_penalties(model: &CqmModel, multiplier: f64) -> Vec<f64> {
    let scale = objective_scale(model);
    model
        .constraints()
        .iter()
        .map(|c| multiplier * scale * c.expr.variables().len() as f64)
        .collect()
}

/// Anneals the lowered model, multiplying every penalty by the escalation
/// factor while the best sample is infeasible. Running out of rounds is not an
/// error: the last sample set is returned with its feasibility flags.
pub fn solve_cqm(
    model: &CqmModel,
    params: &AnnealParams,
    calibration: &Calibration,
) -> Result<SampleSet, CqmError> {
    if calibration.max_rounds == 0
        || !(calibration.lambda_init_multiplier > 0.0)
        || !(calibration.escalation_factor >= 1.0)
    {
        return Err(CqmError::InvalidParams(format!("bad calibration {calibration:?}")));
    }
    let mut penalties = initial_penalties(model, calibration.lambda_init_multiplier);
    let mut history = Vec::new();
    let mut round_params = params.clone();
    round_params.energy_scale = params.energy_scale * objective_scale(model);
    let mut round = 0;
    loop {
        let lowered = lower_to_qubo(model, &penalties)?;
        round_params.seed = if round == 0 { params.seed } else { mix_seed(params.seed, 1 << 32 | round as u64) };
        let mut set = anneal(&lowered, &round_params)?;
        history.push(penalties.clone());
        round += 1;
        let done = set.best_feasible().is_some() || round >= calibration.max_rounds;
        if done {
            set.info.penalties = history;
            return Ok(set);
        }
        log::debug!("round {round}: no feasible sample, escalating penalties");
        for p in &mut penalties {
            *p *= calibration.escalation_factor;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cqm::{Constraint, QuadForm, Sense};

    fn fast() -> AnnealParams {
        AnnealParams {
            sweeps: 500,
            num_reads: 16,
            ..AnnealParams::default()
        }
    }

    #[test]
    fn one_hot_feasibility_only() {
        let mut e = QuadForm::new();
        for i in 0..3 {
            e.add_linear(i, 1.0);
        }
        let mut m = CqmModel::new(3);
        m.add_constraint(Constraint::new(e, Sense::Eq, 1.0, "one")).unwrap();
        let set = solve_cqm(&m, &fast(), &Calibration::default()).unwrap();
        let best = set.best_feasible().unwrap();
        assert_eq!(best.assignment.iter().filter(|&&b| b).count(), 1);
    }

    #[test]
    fn tiny_knapsack() {
        let mut obj = QuadForm::new();
        let mut cap = QuadForm::new();
        for (i, (p, w)) in [(10.0, 5.0), (7.0, 4.0), (4.0, 3.0)].into_iter().enumerate() {
            obj.add_linear(i, -p);
            cap.add_linear(i, w);
        }
        let mut m = CqmModel::with_objective(3, obj).unwrap();
        m.add_constraint(Constraint::new(cap, Sense::Le, 7.0, "cap")).unwrap();
        let set = solve_cqm(&m, &fast(), &Calibration::default()).unwrap();
        let best = set.best_feasible().unwrap();
        assert_eq!(best.energy, -11.0);
        assert_eq!(best.assignment, vec![false, true, true]);
        assert_eq!(set.info.penalties, vec![vec![2.0 * 10.0 * 3.0]]);
    }

    #[test]
    fn contradiction_is_flagged_not_raised() {
        let mut x = QuadForm::new();
        x.add_linear(0, 1.0);
        let mut m = CqmModel::new(1);
        m.add_constraint(Constraint::new(x.clone(), Sense::Eq, 1.0, "one")).unwrap();
        m.add_constraint(Constraint::new(x, Sense::Eq, 0.0, "zero")).unwrap();
        let set = solve_cqm(&m, &fast(), &Calibration::default()).unwrap();
        assert_eq!(set.num_feasible(), 0);
        assert_eq!(set.info.penalties.len(), 4);
        for w in set.info.penalties.windows(2) {
            assert!(w[0].iter().zip(&w[1]).all(|(a, b)| b >= a));
        }
    }
}
