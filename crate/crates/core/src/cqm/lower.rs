//! Penalty lowering of a [`CqmModel`].
//!
//! Every constraint is first rewritten as a residual `r(x)` that must satisfy
//! `r ≤ 0` (inequalities) or `r = 0` (equalities). When the coefficients allow
//! it, `r` is rescaled to integer coefficients with unit gcd and its constant
//! tightened to an integer, so one unit of residual is the smallest possible
//! violation. Inequalities then receive binary-expanded slack `s ∈ [0, R]`
//! and contribute `λ (r(x) + s)²`; equalities contribute `λ r(x)²`.
//! Inequalities that can never be violated are dropped.

use super::{Constraint, CqmError, CqmModel, QuadForm, Sense};

const INTEGRAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyTerm {
    pub label: String,
    /// Index of the originating constraint.
    pub constraint: usize,
    pub lambda: f64,
    /// `r(x)` over model variables, after rescaling.
    pub residual: QuadForm,
    /// Slack variables and their weights; empty for equalities.
    pub slack: Vec<(usize, f64)>,
    /// Largest representable slack value.
    pub slack_range: f64,
    /// Whether `residual` has integer coefficients and constant.
    pub integral: bool,
}

impl PenaltyTerm {
    pub fn slack_value(&self, x: &[bool]) -> f64 {
        self.slack.iter().filter(|(v, _)| x[*v]).map(|(_, c)| c).sum()
    }

    /// `r(x) + s` on a full (model + slack) assignment.
    pub fn value(&self, x: &[bool]) -> f64 {
        self.residual.evaluate(x) + self.slack_value(x)
    }

    /// Slack value minimizing `(r + s)²` over the representable range.
    pub fn best_slack(&self, r: f64) -> f64 {
        if self.slack.is_empty() {
            0.0
        } else {
            (-r).round().clamp(0.0, self.slack_range)
        }
    }

    /// `min_s (r + s)²`.
    pub fn min_square(&self, r: f64) -> f64 {
        let v = r + self.best_slack(r);
        v * v
    }

    /// Writes the bits encoding slack value `s` into `x`.
    fn encode_slack(&self, s: f64, x: &mut [bool]) {
        let k = self.slack.len();
        if k == 0 {
            return;
        }
        let (top_var, top_coef) = self.slack[k - 1];
        let mut rest = s;
        let low_max = ((1u64 << (k - 1)) - 1) as f64;
        x[top_var] = rest > low_max;
        if x[top_var] {
            rest -= top_coef;
        }
        let mut rest = rest.round() as u64;
        for &(v, _) in &self.slack[..k - 1] {
            x[v] = rest & 1 == 1;
            rest >>= 1;
        }
    }
}

/// Objective plus squared-residual penalties over model and slack variables.
#[derive(Debug, Clone, PartialEq)]
pub struct PenalizedModel {
    num_model_vars: usize,
    num_vars: usize,
    pub objective: QuadForm,
    pub terms: Vec<PenaltyTerm>,
    constraints: Vec<Constraint>,
    fixed: Vec<Option<bool>>,
}

impl PenalizedModel {
    /// A plain QUBO.
    pub fn unconstrained(num_vars: usize, objective: QuadForm) -> Result<Self, CqmError> {
        let model = CqmModel::with_objective(num_vars, objective)?;
        lower_to_qubo(&model, &[])
    }

    pub fn num_model_vars(&self) -> usize {
        self.num_model_vars
    }

    /// Model plus slack variables.
    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_slack_vars(&self) -> usize {
        self.num_vars - self.num_model_vars
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// Model variables pinned by a single-variable equality constraint.
    /// Samplers may hold these at their value instead of flipping them.
    pub fn fixed(&self) -> &[Option<bool>] {
        &self.fixed
    }

    pub fn penalties(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.lambda).collect()
    }

    /// Energy of a full assignment.
    pub fn energy(&self, x: &[bool]) -> f64 {
        let mut e = self.objective.evaluate(x);
        for t in &self.terms {
            let v = t.value(x);
            e += t.lambda * v * v;
        }
        e
    }

    /// Extends a model assignment with the energy-minimizing slack bits.
    pub fn complete_slack(&self, model_x: &[bool]) -> Vec<bool> {
        let mut x = model_x[..self.num_model_vars].to_vec();
        x.resize(self.num_vars, false);
        for t in &self.terms {
            let s = t.best_slack(t.residual.evaluate(&x));
            t.encode_slack(s, &mut x);
        }
        x
    }

    /// Energy with slack minimized out; equals [`Self::energy`] on
    /// [`Self::complete_slack`].
    pub fn model_energy(&self, model_x: &[bool]) -> f64 {
        let mut e = self.objective.evaluate(model_x);
        for t in &self.terms {
            e += t.lambda * t.min_square(t.residual.evaluate(model_x));
        }
        e
    }

    pub fn is_feasible(&self, model_x: &[bool]) -> bool {
        self.constraints.iter().all(|c| c.is_satisfied(model_x))
    }

    /// Expands the penalties into a single quadratic form. `None` when a
    /// constraint is quadratic, since its square has quartic terms.
    pub fn to_qubo(&self) -> Option<QuadForm> {
        let mut q = self.objective.clone();
        for t in &self.terms {
            if !t.residual.is_linear() {
                return None;
            }
            let mut lin: Vec<(usize, f64)> = t.residual.linear().collect();
            lin.extend(t.slack.iter().copied());
            let c = t.residual.offset;
            q.offset += t.lambda * c * c;
            for (a, &(i, ai)) in lin.iter().enumerate() {
                q.add_linear(i, t.lambda * (ai * ai + 2.0 * c * ai));
                for &(j, aj) in &lin[a + 1..] {
                    q.add_quadratic(i, j, 2.0 * t.lambda * ai * aj);
                }
            }
        }
        Some(q)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn is_integral(v: f64) -> bool {
    (v - v.round()).abs() <= INTEGRAL_TOL * v.abs().max(1.0)
}

/// Scale factor turning the variable coefficients of `r` into coprime
/// integers, if a power of ten up to 10⁶ does it.
fn integral_scale(r: &QuadForm) -> Option<f64> {
    let coefs: Vec<f64> = r.linear().map(|(_, c)| c).chain(r.quadratic().map(|(_, _, c)| c)).collect();
    for k in 0..=6 {
        let p = 10f64.powi(k);
        if coefs.iter().all(|c| is_integral(c * p) && (c * p).abs() < 9.0e15) {
            let g = coefs
                .iter()
                .map(|c| (c * p).round().abs() as u64)
                .fold(0, gcd)
                .max(1);
            return Some(p / g as f64);
        }
    }
    None
}

/// Residual form `r` (feasible iff `r ≤ 0`, or `r = 0` for equalities), its
/// integrality, and whether it is provably always satisfied.
fn residual(c: &Constraint) -> (QuadForm, bool) {
    let mut r = match c.sense {
        Sense::Le | Sense::Eq => c.expr.clone(),
        Sense::Ge => c.expr.scaled(-1.0),
    };
    let sign = if c.sense == Sense::Ge { -1.0 } else { 1.0 };
    r.offset -= sign * c.bound;
    match integral_scale(&r) {
        Some(k) => {
            let scaled = r.scaled(k);
            let mut r = QuadForm::constant(scaled.offset);
            for (i, c) in scaled.linear() {
                r.add_linear(i, c.round());
            }
            for (i, j, c) in scaled.quadratic() {
                r.add_quadratic(i, j, c.round());
            }
            if c.sense != Sense::Eq || is_integral(r.offset) {
                // Variable part is integral, so `part + c ≤ 0` iff `part + ceil(c) ≤ 0`.
                r.offset = (r.offset - INTEGRAL_TOL * r.offset.abs().max(1.0)).ceil();
            }
            (r, true)
        }
        None => {
            let smallest = r
                .linear()
                .map(|(_, c)| c.abs())
                .chain(r.quadratic().map(|(_, _, c)| c.abs()))
                .fold(f64::INFINITY, f64::min);
            (r.scaled(1.0 / smallest), false)
        }
    }
}

/// Values forced by equalities `a·x_i + c = bound` with a binary solution.
/// Variables with conflicting pins are left free.
fn fixed_values(model: &CqmModel) -> Vec<Option<bool>> {
    let mut fixed: Vec<Option<Option<bool>>> = vec![None; model.num_vars()];
    for c in model.constraints() {
        if c.sense != Sense::Eq || !c.expr.is_linear() || c.expr.num_linear() != 1 {
            continue;
        }
        let (i, a) = c.expr.linear().next().expect("one linear term");
        let v = (c.bound - c.expr.offset) / a;
        let value = if v.abs() <= 1e-12 {
            Some(false)
        } else if (v - 1.0).abs() <= 1e-12 {
            Some(true)
        } else {
            None
        };
        fixed[i] = match fixed[i] {
            None => Some(value),
            Some(prev) if prev == value => Some(prev),
            Some(_) => Some(None),
        };
    }
    fixed.into_iter().map(Option::flatten).collect()
}

/// Lowers `model` with one penalty weight per constraint.
pub fn lower_to_qubo(model: &CqmModel, penalties: &[f64]) -> Result<PenalizedModel, CqmError> {
    let constraints = model.constraints();
    if penalties.len() != constraints.len() {
        return Err(CqmError::PenaltyCount {
            expected: constraints.len(),
            found: penalties.len(),
        });
    }
    for (index, &value) in penalties.iter().enumerate() {
        if !(value > 0.0) || !value.is_finite() {
            return Err(CqmError::NonPositivePenalty { index, value });
        }
    }
    let mut next_var = model.num_vars();
    let mut terms = Vec::new();
    for (ci, (c, &lambda)) in constraints.iter().zip(penalties).enumerate() {
        let (r, integral) = residual(c);
        let (lo, hi) = r.bounds();
        let mut slack = Vec::new();
        let mut slack_range = 0.0;
        if c.sense != Sense::Eq {
            if hi <= 0.0 {
                continue;
            }
            let range = if integral { (-lo).round() } else { (-lo).floor() };
            if range >= 1.0 {
                let bits = (range + 1.0).log2().ceil() as u32;
                for b in 0..bits - 1 {
                    slack.push((next_var, (1u64 << b) as f64));
                    next_var += 1;
                }
                let top = range - ((1u64 << (bits - 1)) - 1) as f64;
                slack.push((next_var, top));
                next_var += 1;
                slack_range = range;
            }
        }
        terms.push(PenaltyTerm {
            label: c.label.clone(),
            constraint: ci,
            lambda,
            residual: r,
            slack,
            slack_range,
            integral,
        });
    }
    Ok(PenalizedModel {
        num_model_vars: model.num_vars(),
        num_vars: next_var,
        objective: model.objective.clone(),
        terms,
        constraints: constraints.to_vec(),
        fixed: fixed_values(model),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bits(mask: usize, n: usize) -> Vec<bool> {
        (0..n).map(|i| mask >> i & 1 == 1).collect()
    }

    fn sum_form(vars: &[usize]) -> QuadForm {
        let mut e = QuadForm::new();
        for &v in vars {
            e.add_linear(v, 1.0);
        }
        e
    }

    #[test]
    fn equality_penalty_is_squared_violation() {
        let mut m = CqmModel::new(2);
        m.add_constraint(Constraint::new(sum_form(&[0, 1]), Sense::Eq, 1.0, "one"))
            .unwrap();
        let p = lower_to_qubo(&m, &[10.0]).unwrap();
        assert_eq!(p.num_slack_vars(), 0);
        assert_eq!(p.energy(&[true, true]), 10.0);
        assert_eq!(p.energy(&[true, false]), 0.0);
        assert_eq!(p.energy(&[false, false]), 10.0);
        let q = p.to_qubo().unwrap();
        for mask in 0..4 {
            let x = bits(mask, 2);
            assert!((q.evaluate(&x) - p.energy(&x)).abs() < 1e-12);
        }
    }

    #[test]
    fn inequality_min_over_slack() {
        let mut m = CqmModel::new(2);
        m.add_constraint(Constraint::new(sum_form(&[0, 1]), Sense::Le, 1.0, "atmost"))
            .unwrap();
        let p = lower_to_qubo(&m, &[5.0]).unwrap();
        assert_eq!(p.num_slack_vars(), 1);
        // enumerate the slack bit for (1, 1)
        let min = [false, true]
            .iter()
            .map(|&s| p.energy(&[true, true, s]))
            .fold(f64::INFINITY, f64::min);
        assert_eq!(min, 5.0);
        assert_eq!(p.model_energy(&[true, true]), 5.0);
        for x in [[false, false], [true, false], [false, true]] {
            let full = p.complete_slack(&x);
            assert_eq!(p.energy(&full), 0.0);
        }
    }

    #[test]
    fn redundant_inequality_is_dropped() {
        let mut m = CqmModel::new(2);
        m.add_constraint(Constraint::new(sum_form(&[0, 1]), Sense::Le, 3.0, "loose"))
            .unwrap();
        let p = lower_to_qubo(&m, &[1.0]).unwrap();
        assert!(p.terms.is_empty());
    }

    #[test]
    fn non_positive_penalty_rejected() {
        let mut m = CqmModel::new(1);
        m.add_constraint(Constraint::new(sum_form(&[0]), Sense::Eq, 1.0, "pin"))
            .unwrap();
        assert!(matches!(
            lower_to_qubo(&m, &[0.0]),
            Err(CqmError::NonPositivePenalty { .. })
        ));
        assert!(matches!(lower_to_qubo(&m, &[]), Err(CqmError::PenaltyCount { .. })));
    }

    #[test]
    fn single_variable_pins_are_detected() {
        let mut m = CqmModel::new(4);
        m.add_constraint(Constraint::new(sum_form(&[0]), Sense::Eq, 1.0, "one")).unwrap();
        let mut two = QuadForm::new();
        two.add_linear(1, 2.0);
        m.add_constraint(Constraint::new(two, Sense::Eq, 0.0, "zero")).unwrap();
        m.add_constraint(Constraint::new(sum_form(&[2]), Sense::Eq, 1.0, "a")).unwrap();
        m.add_constraint(Constraint::new(sum_form(&[2]), Sense::Eq, 0.0, "b")).unwrap();
        m.add_constraint(Constraint::new(sum_form(&[3]), Sense::Le, 0.0, "le")).unwrap();
        let p = lower_to_qubo(&m, &[1.0; 5]).unwrap();
        assert_eq!(p.fixed(), &[Some(true), Some(false), None, None]);
    }

    #[test]
    fn fractional_coefficients_are_integralized() {
        // 0.9·(3x0 + 5x1) ≤ 4.6  ⇔  3x0 + 5x1 ≤ 5.11..  ⇔  3x0 + 5x1 ≤ 5
        let mut e = QuadForm::new();
        e.add_linear(0, 2.7);
        e.add_linear(1, 4.5);
        let mut m = CqmModel::new(2);
        m.add_constraint(Constraint::new(e, Sense::Le, 4.6, "frac")).unwrap();
        let p = lower_to_qubo(&m, &[1.0]).unwrap();
        let t = &p.terms[0];
        assert!(t.integral);
        assert_eq!(t.residual.linear_coefficient(0), 3.0);
        assert_eq!(t.residual.linear_coefficient(1), 5.0);
        assert_eq!(t.residual.offset, -5.0);
        assert_eq!(t.slack_range, 5.0);
        assert_eq!(p.model_energy(&[true, true]), 9.0);
        assert_eq!(p.model_energy(&[false, true]), 0.0);
    }

    #[test]
    fn slack_encoding_covers_range() {
        for range in 1..40u32 {
            let mut e = QuadForm::new();
            e.add_linear(0, f64::from(range));
            let mut m = CqmModel::new(1);
            m.add_constraint(Constraint::new(e, Sense::Ge, 0.0, "r")).unwrap();
            let mut neg = QuadForm::new();
            neg.add_linear(0, -f64::from(range));
            let mut m2 = CqmModel::new(1);
            m2.add_constraint(Constraint::new(neg, Sense::Le, 0.0, "r")).unwrap();
            // both are redundant
            assert!(lower_to_qubo(&m, &[1.0]).unwrap().terms.is_empty());

            let mut e = QuadForm::new();
            e.add_linear(0, f64::from(range));
            let mut m3 = CqmModel::new(1);
            m3.add_constraint(Constraint::new(e, Sense::Le, f64::from(range), "r")).unwrap();
            let mut pos = QuadForm::new();
            pos.add_linear(0, 1.0);
            pos.add_linear(1, f64::from(range));
            let mut m4 = CqmModel::new(2);
            m4.add_constraint(Constraint::new(pos, Sense::Le, f64::from(range), "r")).unwrap();
            let p = lower_to_qubo(&m4, &[1.0]).unwrap();
            let t = &p.terms[0];
            let expected_bits = (f64::from(range) + 1.0).log2().ceil() as usize;
            assert_eq!(t.slack.len(), expected_bits);
            let total: f64 = t.slack.iter().map(|s| s.1).sum();
            assert_eq!(total, f64::from(range));
            for s in 0..=range {
                let mut x = vec![false; p.num_vars()];
                t.encode_slack(f64::from(s), &mut x);
                assert_eq!(t.slack_value(&x), f64::from(s));
            }
        }
    }

    #[test]
    fn lowered_energy_exact_on_feasible_assignments() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut checked = 0;
        while checked < 1000 {
            let n = 8;
            let mut obj = QuadForm::constant(rng.random_range(-3.0..3.0));
            for i in 0..n {
                obj.add_linear(i, rng.random_range(-5.0..5.0));
                for j in (i + 1)..n {
                    obj.add_quadratic(i, j, rng.random_range(-5.0..5.0));
                }
            }
            let mut m = CqmModel::with_objective(n, obj).unwrap();
            let mut e = QuadForm::new();
            for i in 0..n {
                e.add_linear(i, rng.random_range(1..6) as f64);
            }
            m.add_constraint(Constraint::new(e, Sense::Le, rng.random_range(5..20) as f64, "cap"))
                .unwrap();
            m.add_constraint(Constraint::new(sum_form(&[0, 1, 2]), Sense::Eq, 1.0, "pick"))
                .unwrap();
            let mut q = QuadForm::new();
            q.add_quadratic(3, 4, 2.0);
            q.add_linear(5, 1.0);
            m.add_constraint(Constraint::new(q, Sense::Ge, 1.0, "quad")).unwrap();
            let lam: Vec<f64> = (0..3).map(|_| rng.random_range(0.5..20.0)).collect();
            let p = lower_to_qubo(&m, &lam).unwrap();
            for _ in 0..50 {
                let x: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
                if m.is_feasible(&x) {
                    let full = p.complete_slack(&x);
                    let lowered = p.energy(&full);
                    assert!((lowered - m.objective.evaluate(&x)).abs() < 1e-9);
                    assert_eq!(p.model_energy(&x), lowered);
                    checked += 1;
                } else {
                    assert!(p.model_energy(&x) > m.objective.evaluate(&x));
                }
            }
        }
    }

    #[test]
    fn expanded_qubo_matches_penalized_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 5;
        let mut obj = QuadForm::new();
        for i in 0..n {
            obj.add_linear(i, rng.random_range(-2.0..2.0));
        }
        let mut m = CqmModel::with_objective(n, obj).unwrap();
        let mut e = QuadForm::new();
        for i in 0..n {
            e.add_linear(i, (i + 1) as f64);
        }
        m.add_constraint(Constraint::new(e, Sense::Ge, 6.0, "ge")).unwrap();
        let p = lower_to_qubo(&m, &[3.0]).unwrap();
        let q = p.to_qubo().unwrap();
        for mask in 0..(1usize << p.num_vars()) {
            let x = bits(mask, p.num_vars());
            assert!((q.evaluate(&x) - p.energy(&x)).abs() < 1e-9);
        }
    }
}
