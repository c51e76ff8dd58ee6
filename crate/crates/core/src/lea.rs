//! Later-and-enough-accumulation refinement of a picking plan on a fixed tour.
//!
//! Phase 1 moves picks toward items collected later in the tour when that
//! shortens the travel time; phase 2 drops picks while the plan stays inside
//! the capacity and the profit band.

use thiserror::Error;

use crate::instance::TtpInstance;
use crate::model::{Band, ModelError, PlanEvaluator, Solution};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LeaError {
    #[error("input solution is outside capacity or band (g = {g}, band [{lo}, {hi}])")]
    InfeasibleInput { g: f64, lo: f64, hi: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Item ids ordered by the tour position of their city, then by their order
/// within the city, with the pick flags aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct FlattenedPlan {
    pub order: Vec<usize>,
    pub flags: Vec<bool>,
}

impl FlattenedPlan {
    pub fn new(instance: &TtpInstance, tour: &[usize], picked: &[bool]) -> Self {
        let order: Vec<usize> = tour.iter().flat_map(|&c| instance.items_at(c).iter().copied()).collect();
        let flags = order.iter().map(|&k| picked[k]).collect();
        FlattenedPlan { order, flags }
    }

    /// Flags back in item-id order.
    pub fn picked(&self) -> Vec<bool> {
        let mut picked = vec![false; self.order.len()];
        for (&k, &on) in self.order.iter().zip(&self.flags) {
            picked[k] = on;
        }
        picked
    }

    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeaOutcome {
    pub solution: Solution,
    pub swaps: usize,
    pub drops: usize,
    /// Plan after phase 1.
    pub after_swaps: Vec<bool>,
}

fn admissible(instance: &TtpInstance, band: Band, (weight, g): (f64, f64)) -> bool {
    weight <= instance.capacity && band.contains(g)
}

/// Both phases; see [`lea_refine`].
pub fn lea_refine_detailed(instance: &TtpInstance, solution: &Solution, band: Band) -> Result<LeaOutcome, LeaError> {
    if !solution.is_feasible(instance, Some(band)) {
        return Err(LeaError::InfeasibleInput {
            g: solution.g(),
            lo: band.lo,
            hi: band.hi,
        });
    }
    let tour = solution.tour();
    let mut plan = FlattenedPlan::new(instance, tour, solution.picked());
    let mut eval = PlanEvaluator::new(instance, tour, solution.picked());
    let m = plan.order.len();

    let mut f = eval.f();
    let mut swaps = 0;
    for p in 0..m.saturating_sub(1) {
        for q in (p + 1)..m {
            if !(plan.flags[p] && !plan.flags[q]) {
                continue;
            }
            let edits = [(plan.order[p], false), (plan.order[q], true)];
            if !admissible(instance, band, eval.totals_with(&edits)) {
                continue;
            }
            let candidate = eval.f_with(&edits);
            if candidate < f {
                eval.apply(&edits);
                plan.flags.swap(p, q);
                f = candidate;
                swaps += 1;
            }
        }
    }
    let after_swaps = plan.picked();

    let mut drops = 0;
    for p in 0..m {
        if !plan.flags[p] {
            continue;
        }
        let edits = [(plan.order[p], false)];
        if admissible(instance, band, eval.totals_with(&edits)) {
            eval.apply(&edits);
            plan.flags[p] = false;
            drops += 1;
        }
    }
    let solution = Solution::new(instance, tour.to_vec(), plan.picked())?;
    Ok(LeaOutcome {
        solution,
        swaps,
        drops,
        after_swaps,
    })
}

/// Refines the picking plan of a feasible solution without touching its
/// tour. The result is feasible for `band` and never slower than the input.
pub fn lea_refine(instance: &TtpInstance, solution: &Solution, band: Band) -> Result<Solution, LeaError> {
    lea_refine_detailed(instance, solution, band).map(|o| o.solution)
}
