//! Single-flip Metropolis simulated annealing over a [`PenalizedModel`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CqmError, PenalizedModel, Sample, SampleInfo, SampleSet};

/// How slack variables take part in the anneal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlackMoves {
    /// Slack bits are ordinary variables visited by the sweep.
    Explicit,
    /// Slack is held at its conditional optimum for the current model
    /// variables; only model variables are flipped.
    Optimal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnealParams {
    pub num_reads: usize,
    pub sweeps: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    pub seed: u64,
    /// Energy differences are divided by this before the Metropolis test, so
    /// the β range is relative to the problem's coefficient scale.
    pub energy_scale: f64,
    pub slack_moves: SlackMoves,
}

impl Default for AnnealParams {
    fn default() -> Self {
        AnnealParams {
            num_reads: 32,
            sweeps: 2000,
            beta_min: 0.1,
            beta_max: 10.0,
            seed: 0,
            energy_scale: 1.0,
            slack_moves: SlackMoves::Optimal,
        }
    }
}

impl AnnealParams {
    pub fn validate(&self) -> Result<(), CqmError> {
        if self.num_reads == 0 || self.sweeps == 0 {
            return Err(CqmError::InvalidParams("num_reads and sweeps must be positive".into()));
        }
        if !(self.beta_min > 0.0) || !(self.beta_min < self.beta_max) || !self.beta_max.is_finite() {
            return Err(CqmError::InvalidParams(format!(
                "need 0 < beta_min < beta_max, got {} and {}",
                self.beta_min, self.beta_max
            )));
        }
        if !(self.energy_scale > 0.0) || !self.energy_scale.is_finite() {
            return Err(CqmError::InvalidParams("energy_scale must be positive".into()));
        }
        Ok(())
    }

    /// Inverse temperature for each sweep, geometric from `beta_min` to `beta_max`.
    pub fn schedule(&self) -> Vec<f64> {
        if self.sweeps == 1 {
            return vec![self.beta_max];
        }
        let ratio = self.beta_max / self.beta_min;
        (0..self.sweeps)
            .map(|k| self.beta_min * ratio.powf(k as f64 / (self.sweeps - 1) as f64))
            .collect()
    }
}

/// SplitMix64 step; derives independent per-read seeds from a master seed.
pub(crate) fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy)]
struct Incidence {
    term: u32,
    lin: f64,
    nb_start: u32,
    nb_end: u32,
}

#[derive(Debug, Clone, Copy)]
struct TermState {
    lambda: f64,
    offset: f64,
    /// Slack range when slack is minimized out; `None` for a plain square.
    optimal_range: Option<f64>,
}

impl TermState {
    #[inline]
    fn penalty(&self, v: f64) -> f64 {
        let r = match self.optimal_range {
            Some(range) => v + (-v).round().clamp(0.0, range),
            None => v,
        };
        self.lambda * r * r
    }
}

/// Flattened adjacency for fast flip deltas.
struct Compiled {
    num_vars: usize,
    fixed: Vec<Option<bool>>,
    obj_lin: Vec<f64>,
    obj_start: Vec<usize>,
    obj_adj: Vec<(u32, f64)>,
    inc_start: Vec<usize>,
    inc: Vec<Incidence>,
    inc_adj: Vec<(u32, f64)>,
    terms: Vec<TermState>,
}

impl Compiled {
    fn new(model: &PenalizedModel, slack: SlackMoves) -> Self {
        let num_vars = match slack {
            SlackMoves::Explicit => model.num_vars(),
            SlackMoves::Optimal => model.num_model_vars(),
        };
        let mut obj_lin = vec![0.0; num_vars];
        let mut obj_nb: Vec<Vec<(u32, f64)>> = vec![Vec::new(); num_vars];
        for (i, c) in model.objective.linear() {
            obj_lin[i] += c;
        }
        for (i, j, c) in model.objective.quadratic() {
            obj_nb[i].push((j as u32, c));
            obj_nb[j].push((i as u32, c));
        }
        // per variable: term -> (linear coefficient, neighbours)
        let mut per_var: Vec<Vec<(u32, f64, Vec<(u32, f64)>)>> = vec![Vec::new(); num_vars];
        let mut terms = Vec::with_capacity(model.terms.len());
        for (t, term) in model.terms.iter().enumerate() {
            let t32 = t as u32;
            let entry = |per_var: &mut Vec<Vec<(u32, f64, Vec<(u32, f64)>)>>, v: usize| -> usize {
                let list = &mut per_var[v];
                match list.iter().position(|e| e.0 == t32) {
                    Some(p) => p,
                    None => {
                        list.push((t32, 0.0, Vec::new()));
                        list.len() - 1
                    }
                }
            };
            for (i, c) in term.residual.linear() {
                let p = entry(&mut per_var, i);
                per_var[i][p].1 += c;
            }
            for (i, j, c) in term.residual.quadratic() {
                let p = entry(&mut per_var, i);
                per_var[i][p].2.push((j as u32, c));
                let p = entry(&mut per_var, j);
                per_var[j][p].2.push((i as u32, c));
            }
            let explicit = slack == SlackMoves::Explicit;
            if explicit {
                for &(v, c) in &term.slack {
                    let p = entry(&mut per_var, v);
                    per_var[v][p].1 += c;
                }
            }
            terms.push(TermState {
                lambda: term.lambda,
                offset: term.residual.offset,
                optimal_range: (!explicit && !term.slack.is_empty()).then_some(term.slack_range),
            });
        }

        let mut obj_start = Vec::with_capacity(num_vars + 1);
        let mut obj_adj = Vec::new();
        let mut inc_start = Vec::with_capacity(num_vars + 1);
        let mut inc = Vec::new();
        let mut inc_adj = Vec::new();
        for v in 0..num_vars {
            obj_start.push(obj_adj.len());
            obj_adj.extend_from_slice(&obj_nb[v]);
            inc_start.push(inc.len());
            for (t, lin, nbs) in &per_var[v] {
                let nb_start = inc_adj.len() as u32;
                inc_adj.extend_from_slice(nbs);
                inc.push(Incidence {
                    term: *t,
                    lin: *lin,
                    nb_start,
                    nb_end: inc_adj.len() as u32,
                });
            }
        }
        obj_start.push(obj_adj.len());
        inc_start.push(inc.len());
        let mut fixed = model.fixed().to_vec();
        fixed.resize(num_vars, None);
        Compiled {
            num_vars,
            fixed,
            obj_lin,
            obj_start,
            obj_adj,
            inc_start,
            inc,
            inc_adj,
            terms,
        }
    }

    fn term_values(&self, x: &[bool]) -> Vec<f64> {
        let mut vals: Vec<f64> = self.terms.iter().map(|t| t.offset).collect();
        for v in 0..self.num_vars {
            if !x[v] {
                continue;
            }
            for inc in &self.inc[self.inc_start[v]..self.inc_start[v + 1]] {
                vals[inc.term as usize] += inc.lin;
                // each quadratic pair is seen from both ends; count it once
                for &(j, c) in &self.inc_adj[inc.nb_start as usize..inc.nb_end as usize] {
                    if (j as usize) > v && x[j as usize] {
                        vals[inc.term as usize] += c;
                    }
                }
            }
        }
        vals
    }

    fn run(&self, betas: &[f64], scale: f64, seed: u64) -> Vec<bool> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x: Vec<bool> = (0..self.num_vars).map(|_| rng.random_bool(0.5)).collect();
        for (xi, f) in x.iter_mut().zip(&self.fixed) {
            if let Some(v) = f {
                *xi = *v;
            }
        }
        let free: Vec<usize> = (0..self.num_vars).filter(|&i| self.fixed[i].is_none()).collect();
        let mut vals = self.term_values(&x);
        let mut dvs: Vec<f64> = Vec::new();
        for (sweep, &beta) in betas.iter().enumerate() {
            // Recompute residuals periodically to keep rounding drift bounded.
            if sweep % 64 == 63 {
                vals = self.term_values(&x);
            }
            let beta = beta / scale;
            for &i in &free {
                let s = if x[i] { -1.0 } else { 1.0 };
                let mut field = self.obj_lin[i];
                for &(j, c) in &self.obj_adj[self.obj_start[i]..self.obj_start[i + 1]] {
                    if x[j as usize] {
                        field += c;
                    }
                }
                let mut delta = s * field;
                let incs = &self.inc[self.inc_start[i]..self.inc_start[i + 1]];
                dvs.clear();
                for inc in incs {
                    let mut d = inc.lin;
                    for &(j, c) in &self.inc_adj[inc.nb_start as usize..inc.nb_end as usize] {
                        if x[j as usize] {
                            d += c;
                        }
                    }
                    let dv = s * d;
                    let t = &self.terms[inc.term as usize];
                    let v = vals[inc.term as usize];
                    delta += t.penalty(v + dv) - t.penalty(v);
                    dvs.push(dv);
                }
                if delta <= 0.0 || rng.random::<f64>() < (-beta * delta).exp() {
                    x[i] = !x[i];
                    for (inc, dv) in incs.iter().zip(&dvs) {
                        vals[inc.term as usize] += dv;
                    }
                }
            }
        }
        x
    }
}

/// Runs `num_reads` independent anneals. Each read gets its own seed derived
/// from `params.seed`, so results do not depend on how reads are scheduled.
/// Variables pinned by a single-variable equality are held at their value.
/// Returned assignments cover the model variables only; energies are the
/// penalized energy with slack set to its optimum, and feasibility is checked
/// against the original constraints.
pub fn anneal(model: &PenalizedModel, params: &AnnealParams) -> Result<SampleSet, CqmError> {
    params.validate()?;
    if model.num_model_vars() == 0 {
        return Err(CqmError::EmptyModel);
    }
    let compiled = Compiled::new(model, params.slack_moves);
    let betas = params.schedule();
    let one_read = |r: usize| -> Sample {
        let x = compiled.run(&betas, params.energy_scale, mix_seed(params.seed, r as u64));
        let assignment = x[..model.num_model_vars()].to_vec();
        Sample {
            energy: model.model_energy(&assignment),
            feasible: model.is_feasible(&assignment),
            assignment,
        }
    };
    #[cfg(feature = "parallel")]
    let samples: Vec<Sample> = {
        use rayon::prelude::*;
        (0..params.num_reads).into_par_iter().map(one_read).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let samples: Vec<Sample> = (0..params.num_reads).map(one_read).collect();
    Ok(SampleSet::new(
        samples,
        SampleInfo {
            penalties: vec![model.penalties()],
            slack_vars: model.num_slack_vars(),
            source: "simulated-annealing".into(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cqm::{lower_to_qubo, Constraint, CqmModel, QuadForm, Sense};
    use rand::Rng;

    fn bits(mask: usize, n: usize) -> Vec<bool> {
        (0..n).map(|i| mask >> i & 1 == 1).collect()
    }

    #[test]
    fn one_variable_minimum() {
        let mut q = QuadForm::new();
        q.add_linear(0, 1.0);
        let p = PenalizedModel::unconstrained(1, q).unwrap();
        let set = anneal(&p, &AnnealParams::default()).unwrap();
        let best = set.first().unwrap();
        assert_eq!(best.assignment, vec![false]);
        assert_eq!(best.energy, 0.0);
        assert_eq!(set.len(), 32);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut q = QuadForm::new();
        for i in 0..10 {
            for j in i..10 {
                q.add_quadratic(i, j, rng.random_range(-1.0..1.0));
            }
        }
        let p = PenalizedModel::unconstrained(10, q).unwrap();
        let params = AnnealParams {
            sweeps: 200,
            seed: 99,
            ..AnnealParams::default()
        };
        assert_eq!(anneal(&p, &params).unwrap(), anneal(&p, &params).unwrap());
    }

    #[test]
    fn rejects_bad_params_and_empty_model() {
        let p = PenalizedModel::unconstrained(0, QuadForm::new()).unwrap();
        assert_eq!(anneal(&p, &AnnealParams::default()), Err(CqmError::EmptyModel));
        let mut q = QuadForm::new();
        q.add_linear(0, 1.0);
        let p = PenalizedModel::unconstrained(1, q).unwrap();
        let bad = AnnealParams {
            beta_min: 5.0,
            beta_max: 1.0,
            ..AnnealParams::default()
        };
        assert!(anneal(&p, &bad).is_err());
    }

    #[test]
    fn energies_match_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 6;
        let mut obj = QuadForm::new();
        for i in 0..n {
            obj.add_linear(i, rng.random_range(-3.0..3.0));
            for j in (i + 1)..n {
                obj.add_quadratic(i, j, rng.random_range(-3.0..3.0));
            }
        }
        let mut m = CqmModel::with_objective(n, obj).unwrap();
        let mut cap = QuadForm::new();
        let mut quad = QuadForm::new();
        for i in 0..n {
            cap.add_linear(i, (i % 3 + 1) as f64);
        }
        quad.add_quadratic(0, 1, 1.0);
        quad.add_linear(2, 1.0);
        m.add_constraint(Constraint::new(cap, Sense::Le, 5.0, "cap")).unwrap();
        m.add_constraint(Constraint::new(quad, Sense::Ge, 1.0, "quad")).unwrap();
        let p = lower_to_qubo(&m, &[4.0, 4.0]).unwrap();
        for slack_moves in [SlackMoves::Explicit, SlackMoves::Optimal] {
            let params = AnnealParams {
                sweeps: 300,
                num_reads: 16,
                slack_moves,
                ..AnnealParams::default()
            };
            let set = anneal(&p, &params).unwrap();
            for s in &set.samples {
                let full = p.complete_slack(&s.assignment);
                assert!((s.energy - p.energy(&full)).abs() < 1e-9);
                assert_eq!(s.feasible, m.is_feasible(&s.assignment));
            }
            // exhaustive minimum over model variables with slack minimized out
            let exact = (0..1usize << n)
                .map(|mask| p.model_energy(&bits(mask, n)))
                .fold(f64::INFINITY, f64::min);
            assert!((set.first().unwrap().energy - exact).abs() < 1e-9);
        }
    }
}
