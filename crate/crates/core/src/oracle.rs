//! Exhaustive Pareto front for tiny instances.

use thiserror::Error;

use crate::instance::TtpInstance;
use crate::model::{Band, Solution};
use crate::pareto::{filter_nondominated_by, ObjectivePoint};

pub const MAX_CITIES: usize = 8;
pub const MAX_ITEMS: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("instance too large for enumeration: {cities} cities, {items} items (limits {MAX_CITIES} and {MAX_ITEMS})")]
    TooLarge { cities: usize, items: usize },
}

/// Rearranges `v` into the next permutation in lexicographic order; false
/// after the last one.
pub(crate) fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = v.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = v.iter().rposition(|&x| x > v[i]).expect("v[i + 1] > v[i]");
    v.swap(i, j);
    v[i + 1..].reverse();
    true
}

/// Every depot-anchored tour crossed with every capacity-feasible plan whose
/// `g` lies in `band`, reduced to the non-dominated solutions (one per
/// distinct objective pair, lowest tour and plan first).
pub fn exact_front(instance: &TtpInstance, band: Option<Band>) -> Result<Vec<Solution>, OracleError> {
    let n = instance.num_cities();
    let m = instance.num_items();
    if n > MAX_CITIES || m > MAX_ITEMS {
        return Err(OracleError::TooLarge { cities: n, items: m });
    }
    let plans: Vec<Vec<bool>> = (0..1usize << m)
        .map(|mask| (0..m).map(|k| mask >> k & 1 == 1).collect::<Vec<bool>>())
        .filter(|p| {
            let w: f64 = instance.items().iter().zip(p).filter(|(_, &on)| on).map(|(it, _)| it.weight).sum();
            let g: f64 = -instance.items().iter().zip(p).filter(|(_, &on)| on).map(|(it, _)| it.profit).sum::<f64>();
            w <= instance.capacity && band.is_none_or(|b| b.contains(g))
        })
        .collect();
    let mut rest: Vec<usize> = (1..n).collect();
    let mut candidates = Vec::new();
    loop {
        let mut tour = vec![0];
        tour.extend_from_slice(&rest);
        for plan in &plans {
            let s = Solution::new(instance, tour.clone(), plan.clone()).expect("plan within capacity");
            candidates.push(s);
        }
        // keep memory bounded on the largest inputs
        if candidates.len() > 1 << 16 {
            candidates = filter_nondominated_by(candidates, |s| ObjectivePoint::new(s.f(), s.g()));
        }
        if !next_permutation(&mut rest) {
            break;
        }
    }
    Ok(filter_nondominated_by(candidates, |s| ObjectivePoint::new(s.f(), s.g())))
}
