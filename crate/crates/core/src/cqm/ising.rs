use std::collections::BTreeMap;

use super::{CqmModel, QuadForm};

/// `offset + Σ h_i σ_i + Σ J_ij σ_i σ_j` with spins in {−1, +1}.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IsingModel {
    pub h: Vec<f64>,
    pub couplings: BTreeMap<(usize, usize), f64>,
    pub offset: f64,
}

impl IsingModel {
    pub fn new(h: Vec<f64>) -> Self {
        IsingModel {
            h,
            ..Self::default()
        }
    }

    /// Adds `c` to the coupling between `i` and `j`. A self-coupling is the
    /// constant `c` since `σ² = 1`.
    pub fn add_coupling(&mut self, i: usize, j: usize, c: f64) {
        if i == j {
            self.offset += c;
            return;
        }
        let key = if i < j { (i, j) } else { (j, i) };
        *self.couplings.entry(key).or_insert(0.0) += c;
    }

    pub fn num_spins(&self) -> usize {
        let coupled = self.couplings.keys().map(|&(_, j)| j + 1).max().unwrap_or(0);
        self.h.len().max(coupled)
    }

    pub fn energy(&self, spins: &[i8]) -> f64 {
        let mut e = self.offset;
        for (i, &h) in self.h.iter().enumerate() {
            e += h * f64::from(spins[i]);
        }
        for (&(i, j), &c) in &self.couplings {
            e += c * f64::from(spins[i]) * f64::from(spins[j]);
        }
        e
    }
}

/// Substitutes `σ = 2x − 1`; the result agrees with the Ising energy on every
/// assignment.
pub fn qubo_from_ising(ising: &IsingModel) -> CqmModel {
    let mut q = QuadForm::constant(ising.offset);
    for (i, &h) in ising.h.iter().enumerate() {
        q.add_linear(i, 2.0 * h);
        q.offset -= h;
    }
    for (&(i, j), &c) in &ising.couplings {
        q.add_quadratic(i, j, 4.0 * c);
        q.add_linear(i, -2.0 * c);
        q.add_linear(j, -2.0 * c);
        q.offset += c;
    }
    let n = ising.num_spins();
    CqmModel::with_objective(n, q).expect("indices come from the Ising model")
}

/// Inverse substitution `x = (σ + 1) / 2`.
pub fn ising_from_qubo(qubo: &QuadForm, num_vars: usize) -> IsingModel {
    let mut ising = IsingModel::new(vec![0.0; num_vars]);
    ising.offset = qubo.offset;
    for (i, c) in qubo.linear() {
        ising.h[i] += c / 2.0;
        ising.offset += c / 2.0;
    }
    for (i, j, c) in qubo.quadratic() {
        ising.add_coupling(i, j, c / 4.0);
        ising.h[i] += c / 4.0;
        ising.h[j] += c / 4.0;
        ising.offset += c / 4.0;
    }
    ising
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bits(mask: usize, n: usize) -> Vec<bool> {
        (0..n).map(|i| mask >> i & 1 == 1).collect()
    }

    fn spins(x: &[bool]) -> Vec<i8> {
        x.iter().map(|&b| if b { 1 } else { -1 }).collect()
    }

    fn random_ising(n: usize, rng: &mut ChaCha8Rng) -> IsingModel {
        let mut m = IsingModel::new((0..n).map(|_| rng.random_range(-2.0..2.0)).collect());
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random_bool(0.6) {
                    m.add_coupling(i, j, rng.random_range(-2.0..2.0));
                }
            }
        }
        m.offset = rng.random_range(-1.0..1.0);
        m
    }

    #[test]
    fn single_bias() {
        let q = qubo_from_ising(&IsingModel::new(vec![1.0]));
        assert_eq!(q.objective.linear_coefficient(0), 2.0);
        assert_eq!(q.objective.offset, -1.0);
    }

    #[test]
    fn single_coupling() {
        let mut m = IsingModel::new(vec![0.0, 0.0]);
        m.add_coupling(0, 1, 1.0);
        let q = qubo_from_ising(&m);
        assert_eq!(q.objective.quadratic_coefficient(0, 1), 4.0);
        assert_eq!(q.objective.linear_coefficient(0), -2.0);
        assert_eq!(q.objective.linear_coefficient(1), -2.0);
        assert_eq!(q.objective.offset, 1.0);
    }

    #[test]
    fn six_spin_energies_match_everywhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let m = random_ising(6, &mut rng);
        let q = qubo_from_ising(&m);
        for mask in 0..64 {
            let x = bits(mask, 6);
            assert!((q.objective.evaluate(&x) - m.energy(&spins(&x))).abs() < 1e-12);
        }
    }

    #[test]
    fn argmin_sets_preserved_and_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [3usize, 8, 12] {
            let m = random_ising(n, &mut rng);
            let q = qubo_from_ising(&m);
            let back = ising_from_qubo(&q.objective, n);
            let mut best_q = f64::INFINITY;
            let mut best_i = f64::INFINITY;
            let mut arg_q = Vec::new();
            let mut arg_i = Vec::new();
            for mask in 0..(1usize << n) {
                let x = bits(mask, n);
                let eq = q.objective.evaluate(&x);
                let ei = m.energy(&spins(&x));
                assert!((back.energy(&spins(&x)) - ei).abs() < 1e-9);
                if eq < best_q - 1e-12 {
                    best_q = eq;
                    arg_q.clear();
                }
                if (eq - best_q).abs() <= 1e-12 {
                    arg_q.push(mask);
                }
                if ei < best_i - 1e-12 {
                    best_i = ei;
                    arg_i.clear();
                }
                if (ei - best_i).abs() <= 1e-12 {
                    arg_i.push(mask);
                }
            }
            assert_eq!(arg_q, arg_i);
        }
    }
}
