//! Non-dominated filtering and normalized 2-D hypervolume.
//!
//! Both objectives are minimized. Hypervolume is measured after min-max
//! scaling over the union of every compared set, against the reference point
//! `(1, 1)`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectivePoint {
    pub f: f64,
    pub g: f64,
}

impl ObjectivePoint {
    pub fn new(f: f64, g: f64) -> Self {
        ObjectivePoint { f, g }
    }

    /// `self` is no worse in both objectives and better in one.
    pub fn dominates(&self, other: &ObjectivePoint) -> bool {
        self.f <= other.f && self.g <= other.g && (self.f < other.f || self.g < other.g)
    }
}

/// Mutually non-dominated points, ascending in `f` and strictly descending in `g`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    pub points: Vec<ObjectivePoint>,
}

impl ParetoFront {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Keeps the items whose keys are non-dominated, one per distinct key, in
/// ascending `f`. Among duplicates the first in input order survives.
pub fn filter_nondominated_by<T>(items: Vec<T>, key: impl Fn(&T) -> ObjectivePoint) -> Vec<T> {
    let mut keyed: Vec<(ObjectivePoint, usize, T)> =
        items.into_iter().enumerate().map(|(i, t)| (key(&t), i, t)).collect();
    keyed.sort_by(|a, b| {
        a.0.f
            .total_cmp(&b.0.f)
            .then(a.0.g.total_cmp(&b.0.g))
            .then(a.1.cmp(&b.1))
    });
    let mut out = Vec::new();
    let mut best_g = f64::INFINITY;
    for (p, _, t) in keyed {
        if p.g < best_g {
            best_g = p.g;
            out.push(t);
        }
    }
    out
}

pub fn filter_nondominated(points: &[ObjectivePoint]) -> ParetoFront {
    ParetoFront {
        points: filter_nondominated_by(points.to_vec(), |p| *p),
    }
}

/// Per-objective ranges used for scaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub f_min: f64,
    pub f_max: f64,
    pub g_min: f64,
    pub g_max: f64,
}

fn unit(v: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        (v - lo) / (hi - lo)
    } else {
        0.0
    }
}

impl Normalization {
    /// Ranges over the union of `sets`; `None` when all sets are empty.
    pub fn over(sets: &[&[ObjectivePoint]]) -> Option<Self> {
        let mut it = sets.iter().flat_map(|s| s.iter());
        let first = it.next()?;
        let mut n = Normalization {
            f_min: first.f,
            f_max: first.f,
            g_min: first.g,
            g_max: first.g,
        };
        for p in it {
            n.f_min = n.f_min.min(p.f);
            n.f_max = n.f_max.max(p.f);
            n.g_min = n.g_min.min(p.g);
            n.g_max = n.g_max.max(p.g);
        }
        Some(n)
    }

    /// Maps into the unit square; a coordinate with zero range maps to 0.
    pub fn scale(&self, p: &ObjectivePoint) -> ObjectivePoint {
        ObjectivePoint {
            f: unit(p.f, self.f_min, self.f_max),
            g: unit(p.g, self.g_min, self.g_max),
        }
    }
}

/// Area dominated by `points` inside `[0, 1]²` relative to `(1, 1)`, by a
/// sweep over the points sorted by `f`.
pub fn hypervolume_unit(points: &[ObjectivePoint]) -> f64 {
    let front = filter_nondominated(points);
    let inside: Vec<&ObjectivePoint> = front.points.iter().filter(|p| p.f < 1.0 && p.g < 1.0).collect();
    let mut area = 0.0;
    for (i, p) in inside.iter().enumerate() {
        let next_f = inside.get(i + 1).map_or(1.0, |q| q.f);
        area += (next_f - p.f) * (1.0 - p.g);
    }
    area
}

/// Hypervolume of each set under the normalization of their union.
pub fn hypervolumes(sets: &[&[ObjectivePoint]]) -> (Vec<f64>, Option<Normalization>) {
    let Some(norm) = Normalization::over(sets) else {
        return (vec![0.0; sets.len()], None);
    };
    let hv = sets
        .iter()
        .map(|s| {
            let scaled: Vec<ObjectivePoint> = s.iter().map(|p| norm.scale(p)).collect();
            hypervolume_unit(&scaled)
        })
        .collect();
    (hv, Some(norm))
}

/// Hypervolume of `sets[target]` normalized jointly with all of `sets`.
pub fn hypervolume(sets: &[&[ObjectivePoint]], target: usize) -> f64 {
    hypervolumes(sets).0[target]
}

/// Front document: points plus the normalization they were measured under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontDoc {
    pub points: Vec<ObjectivePoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hv: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<Normalization>,
}

impl FrontDoc {
    /// Document for a single front, normalized over itself.
    pub fn standalone(front: &ParetoFront) -> Self {
        let sets = [front.points.as_slice()];
        let (hv, norm) = hypervolumes(&sets);
        FrontDoc {
            points: front.points.clone(),
            hv: norm.map(|_| hv[0]),
            normalization: norm,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pts(v: &[(f64, f64)]) -> Vec<ObjectivePoint> {
        v.iter().map(|&(f, g)| ObjectivePoint::new(f, g)).collect()
    }

    fn pairwise_oracle(points: &[ObjectivePoint]) -> Vec<ObjectivePoint> {
        let mut out: Vec<ObjectivePoint> = Vec::new();
        for p in points {
            if points.iter().any(|q| q.dominates(p)) || out.contains(p) {
                continue;
            }
            out.push(*p);
        }
        out.sort_by(|a, b| a.f.total_cmp(&b.f));
        out
    }

    // Exact area of the union of rectangles [p, (1,1)] by coordinate compression.
    fn union_area(points: &[ObjectivePoint]) -> f64 {
        let mut xs: Vec<f64> = points.iter().map(|p| p.f.clamp(0.0, 1.0)).chain([1.0]).collect();
        let mut ys: Vec<f64> = points.iter().map(|p| p.g.clamp(0.0, 1.0)).chain([1.0]).collect();
        xs.sort_by(f64::total_cmp);
        ys.sort_by(f64::total_cmp);
        let mut area = 0.0;
        for xw in xs.windows(2) {
            for yw in ys.windows(2) {
                let covered = points.iter().any(|p| p.f <= xw[0] && p.g <= yw[0]);
                if covered {
                    area += (xw[1] - xw[0]) * (yw[1] - yw[0]);
                }
            }
        }
        area
    }

    #[test]
    fn filter_examples() {
        let f = filter_nondominated(&pts(&[(1.0, 2.0), (2.0, 1.0), (2.0, 2.0)]));
        assert_eq!(f.points, pts(&[(1.0, 2.0), (2.0, 1.0)]));
        let one = filter_nondominated(&pts(&[(3.0, -4.0)]));
        assert_eq!(one.points, pts(&[(3.0, -4.0)]));
        let dup = filter_nondominated(&pts(&[(1.0, 1.0), (1.0, 1.0)]));
        assert_eq!(dup.len(), 1);
    }

    #[test]
    fn filter_matches_pairwise_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let p: Vec<ObjectivePoint> = (0..100)
                .map(|_| ObjectivePoint::new(rng.random_range(0..30) as f64, rng.random_range(0..30) as f64))
                .collect();
            assert_eq!(filter_nondominated(&p).points, pairwise_oracle(&p));
        }
    }

    #[test]
    fn worked_hypervolumes() {
        let (hv, _) = hypervolumes(&[&pts(&[(0.0, 0.0)])]);
        assert_eq!(hv[0], 1.0);
        assert_eq!(hypervolume_unit(&pts(&[(0.5, 0.5)])), 0.25);
        assert_eq!(hypervolume_unit(&pts(&[(0.25, 0.75), (0.75, 0.25)])), 0.3125);
        assert_eq!(union_area(&pts(&[(0.25, 0.75), (0.75, 0.25)])), 0.3125);
    }

    #[test]
    fn grid_oracle_for_two_rectangles() {
        // midpoint count on a 400x400 grid; both corners lie on grid lines
        let p = pts(&[(0.25, 0.75), (0.75, 0.25)]);
        let k = 400;
        let mut hits = 0;
        for a in 0..k {
            for b in 0..k {
                let (x, y) = ((a as f64 + 0.5) / k as f64, (b as f64 + 0.5) / k as f64);
                if p.iter().any(|q| q.f <= x && q.g <= y) {
                    hits += 1;
                }
            }
        }
        assert_eq!(hits as f64 / (k * k) as f64, 0.3125);
    }

    #[test]
    fn sweep_matches_union_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let n = rng.random_range(1..=20);
            let p: Vec<ObjectivePoint> = (0..n)
                .map(|_| ObjectivePoint::new(rng.random::<f64>(), rng.random::<f64>()))
                .collect();
            assert!((hypervolume_unit(&p) - union_area(&p)).abs() <= 1e-12);
        }
    }

    #[test]
    fn sweep_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let p: Vec<ObjectivePoint> = (0..8)
                .map(|_| ObjectivePoint::new(rng.random::<f64>(), rng.random::<f64>()))
                .collect();
            let trials = 20_000;
            let hits = (0..trials)
                .filter(|_| {
                    let (x, y) = (rng.random::<f64>(), rng.random::<f64>());
                    p.iter().any(|q| q.f <= x && q.g <= y)
                })
                .count();
            let est = hits as f64 / trials as f64;
            let se = (est * (1.0 - est) / trials as f64).sqrt();
            assert!((hypervolume_unit(&p) - est).abs() <= 3.0 * se + 1e-12);
        }
    }

    #[test]
    fn zero_range_maps_to_zero() {
        let a = pts(&[(5.0, -3.0), (5.0, -1.0)]);
        let n = Normalization::over(&[&a]).unwrap();
        assert_eq!(n.scale(&a[1]), ObjectivePoint::new(0.0, 1.0));
        assert_eq!(hypervolume(&[&a], 0), 1.0);
    }

    #[test]
    fn front_doc_round_trip() {
        let front = filter_nondominated(&pts(&[(1.0, -2.0), (2.0, -5.0)]));
        let doc = FrontDoc::standalone(&front);
        let text = serde_json::to_string(&doc).unwrap();
        assert_eq!(serde_json::from_str::<FrontDoc>(&text).unwrap(), doc);
        assert!(text.contains("\"normalization\":{\"f_min\":1.0"));
    }

    fn point_strategy() -> impl Strategy<Value = Vec<ObjectivePoint>> {
        prop::collection::vec((0u8..20, 0u8..20), 1..25)
            .prop_map(|v| v.into_iter().map(|(f, g)| ObjectivePoint::new(f as f64, g as f64)).collect())
    }

    proptest! {
        #[test]
        fn filter_idempotent_and_order_free(mut p in point_strategy()) {
            let once = filter_nondominated(&p);
            prop_assert_eq!(&filter_nondominated(&once.points), &once);
            p.reverse();
            prop_assert_eq!(filter_nondominated(&p), once);
        }

        #[test]
        fn hv_monotone_and_ignores_dominated(p in point_strategy(), extra in (0u8..20, 0u8..20)) {
            let q: Vec<ObjectivePoint> = p.iter().copied()
                .chain([ObjectivePoint::new(extra.0 as f64, extra.1 as f64)]).collect();
            let sets = [p.as_slice(), q.as_slice()];
            let (hv, _) = hypervolumes(&sets);
            prop_assert!(hv[1] >= hv[0]);
            let nd = filter_nondominated(&p).points;
            let sets = [p.as_slice(), nd.as_slice()];
            let (hv, _) = hypervolumes(&sets);
            prop_assert_eq!(hv[0], hv[1]);
        }
    }
}
