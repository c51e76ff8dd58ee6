//! Evaluation of tours and picking plans.
//!
//! Leg `i` runs from `tour[i]` to `tour[i + 1]`, the last leg returning to the
//! depot. The thief travels leg `i` carrying `W_i`, the weight collected at
//! positions `0..=i`, at speed `v_max - (W_i / W)(v_max - v_min)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::TtpInstance;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid tour: {0}")]
    InvalidTour(String),
    #[error("picking plan has {found} flags, instance has {expected} items")]
    PlanLength { expected: usize, found: usize },
    #[error("knapsack overweight: carrying {load} with capacity {capacity}")]
    Overweight { load: f64, capacity: f64 },
    #[error("item id {0} out of range")]
    ItemOutOfRange(usize),
}

/// Inclusive interval `[lo, hi]` on the profit objective `g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    pub fn new(lo: f64, hi: f64) -> Self {
        Band { lo, hi }
    }

    pub fn contains(&self, g: f64) -> bool {
        self.lo <= g && g <= self.hi
    }
}

/// Checks that `tour` is a permutation of `0..n` starting at the depot.
pub fn validate_tour(n: usize, tour: &[usize]) -> Result<(), ModelError> {
    if tour.len() != n {
        return Err(ModelError::InvalidTour(format!(
            "length {} for {n} cities",
            tour.len()
        )));
    }
    if tour.first() != Some(&0) {
        return Err(ModelError::InvalidTour("tour must start at city 1".into()));
    }
    let mut seen = vec![false; n];
    for &c in tour {
        if c >= n || seen[c] {
            return Err(ModelError::InvalidTour(format!("city {} repeated or out of range", c + 1)));
        }
        seen[c] = true;
    }
    Ok(())
}

/// Weight of picked items at each city, indexed by city.
fn city_loads(instance: &TtpInstance, picked: &[bool]) -> Vec<f64> {
    let mut load = vec![0.0; instance.num_cities()];
    for (item, &on) in instance.items().iter().zip(picked) {
        if on {
            load[item.city] += item.weight;
        }
    }
    load
}

/// `W_i` for every tour position.
pub fn cumulative_weights(instance: &TtpInstance, tour: &[usize], picked: &[bool]) -> Vec<f64> {
    let load = city_loads(instance, picked);
    let mut acc = 0.0;
    tour.iter()
        .map(|&c| {
            acc += load[c];
            acc
        })
        .collect()
}

/// `W·v_max − W_i·(v_max − v_min)`: the per-leg speed scaled by `W`.
pub fn speed_denominators(instance: &TtpInstance, weights: &[f64]) -> Vec<f64> {
    let w = instance.capacity;
    let dv = instance.v_max - instance.v_min;
    weights.iter().map(|wi| w * instance.v_max - wi * dv).collect()
}

pub(crate) fn time_from_weights(instance: &TtpInstance, tour: &[usize], weights: &[f64]) -> f64 {
    let n = tour.len();
    let w = instance.capacity;
    let dv = instance.v_max - instance.v_min;
    let mut f = 0.0;
    for i in 0..n {
        let d = instance.dist(tour[i], tour[(i + 1) % n]);
        f += d / (instance.v_max - weights[i] / w * dv);
    }
    f
}

/// Total travel time `f`. Errors when the final load exceeds the capacity.
pub fn travel_time(instance: &TtpInstance, tour: &[usize], picked: &[bool]) -> Result<f64, ModelError> {
    let weights = cumulative_weights(instance, tour, picked);
    let load = weights.last().copied().unwrap_or(0.0);
    if load > instance.capacity {
        return Err(ModelError::Overweight {
            load,
            capacity: instance.capacity,
        });
    }
    Ok(time_from_weights(instance, tour, &weights))
}

/// `g = −Σ p` over picked items.
pub fn profit_objective(instance: &TtpInstance, picked: &[bool]) -> f64 {
    -instance
        .items()
        .iter()
        .zip(picked)
        .filter(|(_, &on)| on)
        .map(|(it, _)| it.profit)
        .sum::<f64>()
}

pub fn total_weight(instance: &TtpInstance, picked: &[bool]) -> f64 {
    instance
        .items()
        .iter()
        .zip(picked)
        .filter(|(_, &on)| on)
        .map(|(it, _)| it.weight)
        .sum()
}

/// Valid depot-anchored tour, load within capacity, and `g` inside `band`
/// when one is given. All bounds inclusive.
pub fn is_feasible(instance: &TtpInstance, tour: &[usize], picked: &[bool], band: Option<Band>) -> bool {
    if validate_tour(instance.num_cities(), tour).is_err() || picked.len() != instance.num_items() {
        return false;
    }
    if total_weight(instance, picked) > instance.capacity {
        return false;
    }
    band.is_none_or(|b| b.contains(profit_objective(instance, picked)))
}

/// A capacity-feasible tour and picking plan with its objectives.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    tour: Vec<usize>,
    picked: Vec<bool>,
    f: f64,
    g: f64,
    weights: Vec<f64>,
}

impl Solution {
    pub fn new(instance: &TtpInstance, tour: Vec<usize>, picked: Vec<bool>) -> Result<Self, ModelError> {
        validate_tour(instance.num_cities(), &tour)?;
        if picked.len() != instance.num_items() {
            return Err(ModelError::PlanLength {
                expected: instance.num_items(),
                found: picked.len(),
            });
        }
        let weights = cumulative_weights(instance, &tour, &picked);
        let load = weights.last().copied().unwrap_or(0.0);
        if load > instance.capacity {
            return Err(ModelError::Overweight {
                load,
                capacity: instance.capacity,
            });
        }
        let f = time_from_weights(instance, &tour, &weights);
        let g = profit_objective(instance, &picked);
        Ok(Solution {
            tour,
            picked,
            f,
            g,
            weights,
        })
    }

    /// Tour with nothing picked.
    pub fn empty(instance: &TtpInstance, tour: Vec<usize>) -> Result<Self, ModelError> {
        let m = instance.num_items();
        Self::new(instance, tour, vec![false; m])
    }

    pub fn from_picked_ids(instance: &TtpInstance, tour: Vec<usize>, ids: &[usize]) -> Result<Self, ModelError> {
        let mut picked = vec![false; instance.num_items()];
        for &k in ids {
            *picked.get_mut(k).ok_or(ModelError::ItemOutOfRange(k))? = true;
        }
        Self::new(instance, tour, picked)
    }

    /// Same tour, different plan.
    pub fn with_picked(&self, instance: &TtpInstance, picked: Vec<bool>) -> Result<Self, ModelError> {
        Self::new(instance, self.tour.clone(), picked)
    }

    pub fn tour(&self) -> &[usize] {
        &self.tour
    }

    pub fn picked(&self) -> &[bool] {
        &self.picked
    }

    pub fn picked_ids(&self) -> Vec<usize> {
        self.picked
            .iter()
            .enumerate()
            .filter_map(|(k, &on)| on.then_some(k))
            .collect()
    }

    pub fn f(&self) -> f64 {
        self.f
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn cumulative_weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_feasible(&self, instance: &TtpInstance, band: Option<Band>) -> bool {
        is_feasible(instance, &self.tour, &self.picked, band)
    }

    /// Speed on each leg.
    pub fn velocities(&self, instance: &TtpInstance) -> Vec<f64> {
        let dv = instance.v_max - instance.v_min;
        self.weights
            .iter()
            .map(|w| instance.v_max - w / instance.capacity * dv)
            .collect()
    }

    pub fn to_doc(&self) -> SolutionDoc {
        SolutionDoc {
            tour: self.tour.iter().map(|c| c + 1).collect(),
            picked: self.picked_ids(),
            f: self.f,
            g: self.g,
        }
    }

    pub fn from_doc(instance: &TtpInstance, doc: &SolutionDoc) -> Result<Self, ModelError> {
        let tour = doc
            .tour
            .iter()
            .map(|&c| {
                c.checked_sub(1)
                    .ok_or_else(|| ModelError::InvalidTour("city ids are 1-based".into()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_picked_ids(instance, tour, &doc.picked)
    }
}

/// Solution document: 1-based tour, 0-based picked item ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionDoc {
    pub tour: Vec<usize>,
    pub picked: Vec<usize>,
    pub f: f64,
    pub g: f64,
}

/// Incremental evaluator for plan edits on a fixed tour. Keeps the weight
/// added at each tour position so a candidate costs O(N) rather than O(N + M).
#[derive(Debug, Clone)]
pub struct PlanEvaluator<'a> {
    instance: &'a TtpInstance,
    tour: &'a [usize],
    position_of: Vec<usize>,
    added: Vec<f64>,
    total: f64,
    profit: f64,
}

impl<'a> PlanEvaluator<'a> {
    pub fn new(instance: &'a TtpInstance, tour: &'a [usize], picked: &[bool]) -> Self {
        let n = tour.len();
        let mut position_of = vec![0; n];
        for (i, &c) in tour.iter().enumerate() {
            position_of[c] = i;
        }
        let mut added = vec![0.0; n];
        let mut total = 0.0;
        let mut profit = 0.0;
        for (item, &on) in instance.items().iter().zip(picked) {
            if on {
                added[position_of[item.city]] += item.weight;
                total += item.weight;
                profit += item.profit;
            }
        }
        PlanEvaluator {
            instance,
            tour,
            position_of,
            added,
            total,
            profit,
        }
    }

    pub fn position_of_city(&self, city: usize) -> usize {
        self.position_of[city]
    }

    pub fn total_weight(&self) -> f64 {
        self.total
    }

    pub fn g(&self) -> f64 {
        -self.profit
    }

    pub fn f(&self) -> f64 {
        self.f_with(&[])
    }

    /// Travel time after applying `(item, picked)` edits, without committing.
    pub fn f_with(&self, edits: &[(usize, bool)]) -> f64 {
        let n = self.tour.len();
        let inst = self.instance;
        let dv = inst.v_max - inst.v_min;
        let mut delta = vec![0.0; n];
        for &(k, on) in edits {
            let it = &inst.items()[k];
            delta[self.position_of[it.city]] += if on { it.weight } else { -it.weight };
        }
        let mut acc = 0.0;
        let mut f = 0.0;
        for i in 0..n {
            acc += self.added[i] + delta[i];
            let d = inst.dist(self.tour[i], self.tour[(i + 1) % n]);
            f += d / (inst.v_max - acc / inst.capacity * dv);
        }
        f
    }

    /// Weight and `g` after applying the edits.
    pub fn totals_with(&self, edits: &[(usize, bool)]) -> (f64, f64) {
        let mut w = self.total;
        let mut p = self.profit;
        for &(k, on) in edits {
            let it = &self.instance.items()[k];
            let s = if on { 1.0 } else { -1.0 };
            w += s * it.weight;
            p += s * it.profit;
        }
        (w, -p)
    }

    pub fn apply(&mut self, edits: &[(usize, bool)]) {
        for &(k, on) in edits {
            let it = &self.instance.items()[k];
            let s = if on { 1.0 } else { -1.0 };
            self.added[self.position_of[it.city]] += s * it.weight;
            self.total += s * it.weight;
            self.profit += s * it.profit;
        }
    }
}
