/// Largest total profit of a subset of `(profit, weight)` pairs whose weight
/// is at most `capacity`. Dynamic program over integer weights; `None` when a
/// weight or the capacity is not integral.
pub fn max_profit(items: &[(f64, f64)], capacity: f64) -> Option<f64> {
    let integral = |v: f64| v.is_finite() && v >= 0.0 && v.fract() == 0.0;
    if !integral(capacity.floor()) || items.iter().any(|&(_, w)| !integral(w)) {
        return None;
    }
    let cap = capacity.floor() as usize;
    let mut best = vec![0.0f64; cap + 1];
    for &(p, w) in items {
        let w = w as usize;
        if w > cap {
            continue;
        }
        for c in (w..=cap).rev() {
            let cand = best[c - w] + p;
            if cand > best[c] {
                best[c] = cand;
            }
        }
    }
    Some(best[cap])
}
