//! Binary encodings of the band subproblems.
//!
//! `x(v, i) = 1` when city `v` occupies tour position `i`; `z(k) = 1` when
//! item `k` is picked. With the speed denominators fixed to `b`, the travel
//! time becomes the quadratic form `Σ_i Σ_{u,v} W·d(u,v)·x(u,i)·x(v,i+1) / b_i`,
//! positions taken modulo `N`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cqm::{Constraint, CqmError, CqmModel, QuadForm, Sense};
use crate::instance::TtpInstance;
use crate::model::{Band, ModelError, Solution};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncodeError {
    #[error("band lower end {lo} exceeds upper end {hi}, or upper end is positive")]
    BandOrder { lo: f64, hi: f64 },
    #[error("b has {found} entries for {expected} positions")]
    WeightCount { expected: usize, found: usize },
    #[error("b[{index}] = {value} is outside (0, W·v_max]")]
    WeightRange { index: usize, value: f64 },
    #[error("alpha {0} outside [0, 1]")]
    Alpha(f64),
    #[error("band [{lo}, {hi}] excludes g = 0 and the instance has no items")]
    EmptyBand { lo: f64, hi: f64 },
    #[error(transparent)]
    Model(#[from] CqmError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecodeError {
    #[error("assignment has {found} entries, layout has {expected}")]
    Length { expected: usize, found: usize },
    #[error("no city at position {position}")]
    EmptyPosition { position: usize },
    #[error("cities {first} and {second} both at position {position}")]
    SharedPosition { position: usize, first: usize, second: usize },
    #[error("city {city} visited more than once")]
    RepeatedCity { city: usize },
    #[error("tour starts at city {city}, not the depot")]
    DepotNotFirst { city: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutKind {
    /// `N² + M` variables.
    #[default]
    Compact,
    /// `N·(N + max items per city)`; cities with fewer items get inert
    /// variables that no constraint or objective term touches.
    Padded,
}

/// Flat indices of the tour and picking variables.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableLayout {
    n: usize,
    m: usize,
    kind: LayoutKind,
    pick_index: Vec<usize>,
    total: usize,
}

impl VariableLayout {
    pub fn new(instance: &TtpInstance, kind: LayoutKind) -> Self {
        let n = instance.num_cities();
        let m = instance.num_items();
        let (pick_index, total) = match kind {
            LayoutKind::Compact => ((0..m).map(|k| n * n + k).collect(), n * n + m),
            LayoutKind::Padded => {
                let slots = instance.max_items_per_city();
                let mut idx = vec![0; m];
                for t in 0..n {
                    for (slot, &k) in instance.items_at(t).iter().enumerate() {
                        idx[k] = n * n + t * slots + slot;
                    }
                }
                (idx, n * (n + slots))
            }
        };
        VariableLayout {
            n,
            m,
            kind,
            pick_index,
            total,
        }
    }

    pub fn compact(instance: &TtpInstance) -> Self {
        Self::new(instance, LayoutKind::Compact)
    }

    pub fn num_cities(&self) -> usize {
        self.n
    }

    pub fn num_items(&self) -> usize {
        self.m
    }

    pub fn kind(&self) -> LayoutKind {
        self.kind
    }

    #[inline]
    pub fn tour_var(&self, city: usize, position: usize) -> usize {
        city * self.n + position
    }

    #[inline]
    pub fn pick_var(&self, item: usize) -> usize {
        self.pick_index[item]
    }

    pub fn total_vars(&self) -> usize {
        self.total
    }

    /// The assignment representing `solution`.
    pub fn encode_solution(&self, solution: &Solution) -> Vec<bool> {
        let mut x = vec![false; self.total];
        for (i, &c) in solution.tour().iter().enumerate() {
            x[self.tour_var(c, i)] = true;
        }
        for (k, &on) in solution.picked().iter().enumerate() {
            x[self.pick_var(k)] = on;
        }
        x
    }
}

/// The speed denominators held fixed while sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxiliaryWeights {
    pub b: Vec<f64>,
}

impl AuxiliaryWeights {
    pub fn ones(n: usize) -> Self {
        AuxiliaryWeights { b: vec![1.0; n] }
    }

    fn validate(&self, instance: &TtpInstance) -> Result<(), EncodeError> {
        let n = instance.num_cities();
        if self.b.len() != n {
            return Err(EncodeError::WeightCount {
                expected: n,
                found: self.b.len(),
            });
        }
        let top = instance.capacity * instance.v_max;
        for (index, &value) in self.b.iter().enumerate() {
            if !(value > 0.0) || value > top * (1.0 + 1e-12) {
                return Err(EncodeError::WeightRange { index, value });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EncodeOptions {
    pub layout: LayoutKind,
    /// Write profit and capacity with the tour factors `Σ_i x(t, i)` kept.
    pub quadratic_forms: bool,
    /// Keep speed floors that the capacity constraint already implies.
    pub keep_implied_floors: bool,
}

/// `Σ_i Σ_{u≠v} W·d(u,v)/b_i · x(u,i)·x(v,i+1)`.
pub fn travel_form(instance: &TtpInstance, layout: &VariableLayout, b: &AuxiliaryWeights) -> QuadForm {
    let n = instance.num_cities();
    let w = instance.capacity;
    let mut q = QuadForm::new();
    for i in 0..n {
        let next = (i + 1) % n;
        let k = w / b.b[i];
        for u in 0..n {
            for v in 0..n {
                let d = instance.dist(u, v);
                if d != 0.0 {
                    q.add_quadratic(layout.tour_var(u, i), layout.tour_var(v, next), k * d);
                }
            }
        }
    }
    q
}

/// Sum over items of `coef(k)·z(k)`, optionally times `Σ_i x(t_k, i)`.
fn item_form(
    instance: &TtpInstance,
    layout: &VariableLayout,
    quadratic: bool,
    coef: impl Fn(usize) -> f64,
) -> QuadForm {
    let mut q = QuadForm::new();
    for (k, item) in instance.items().iter().enumerate() {
        let c = coef(k);
        if quadratic {
            for i in 0..instance.num_cities() {
                q.add_quadratic(layout.tour_var(item.city, i), layout.pick_var(k), c);
            }
        } else {
            q.add_linear(layout.pick_var(k), c);
        }
    }
    q
}

/// `Σ p·z`, the negated profit objective.
pub fn profit_form(instance: &TtpInstance, layout: &VariableLayout, quadratic: bool) -> QuadForm {
    item_form(instance, layout, quadratic, |k| instance.items()[k].profit)
}

/// `Σ w·z`, the knapsack load.
pub fn weight_form(instance: &TtpInstance, layout: &VariableLayout, quadratic: bool) -> QuadForm {
    item_form(instance, layout, quadratic, |k| instance.items()[k].weight)
}

/// `W_i(x, z) = Σ_{j ≤ i} Σ_k w_k·x(t_k, j)·z(k)`.
pub fn position_load_form(instance: &TtpInstance, layout: &VariableLayout, position: usize) -> QuadForm {
    let mut q = QuadForm::new();
    for (k, item) in instance.items().iter().enumerate() {
        for j in 0..=position {
            q.add_quadratic(layout.tour_var(item.city, j), layout.pick_var(k), item.weight);
        }
    }
    q
}

/// `W·v_max − W_i(x, z)·(v_max − v_min)` on an assignment.
pub fn velocity_residual(instance: &TtpInstance, layout: &VariableLayout, x: &[bool], position: usize) -> f64 {
    let load = position_load_form(instance, layout, position).evaluate(x);
    instance.capacity * instance.v_max - load * (instance.v_max - instance.v_min)
}

fn one_hot(vars: impl Iterator<Item = usize>) -> QuadForm {
    let mut q = QuadForm::new();
    for v in vars {
        q.add_linear(v, 1.0);
    }
    q
}

/// Permutation, depot, capacity and speed-floor constraints shared by every
/// subproblem.
fn base_model(
    instance: &TtpInstance,
    layout: &VariableLayout,
    b: &AuxiliaryWeights,
    opts: &EncodeOptions,
    objective: QuadForm,
) -> Result<CqmModel, EncodeError> {
    let n = instance.num_cities();
    let mut m = CqmModel::with_objective(layout.total_vars(), objective)?;
    for i in 0..n {
        let e = one_hot((0..n).map(|v| layout.tour_var(v, i)));
        m.add_constraint(Constraint::new(e, Sense::Eq, 1.0, format!("position {i}")))?;
    }
    for v in 0..n {
        let e = one_hot((0..n).map(|i| layout.tour_var(v, i)));
        m.add_constraint(Constraint::new(e, Sense::Eq, 1.0, format!("city {v}")))?;
    }
    m.add_constraint(Constraint::new(one_hot([layout.tour_var(0, 0)].into_iter()), Sense::Eq, 1.0, "depot"))?;
    if instance.num_items() > 0 {
        let cap = weight_form(instance, layout, opts.quadratic_forms);
        m.add_constraint(Constraint::new(cap, Sense::Le, instance.capacity, "capacity"))?;
        let dv = instance.v_max - instance.v_min;
        for i in 0..n {
            // W·v_max − W_i·dv ≥ b_i  ⇔  W_i ≤ (W·v_max − b_i)/dv
            let limit = (instance.capacity * instance.v_max - b.b[i]) / dv;
            if limit >= instance.capacity && !opts.keep_implied_floors {
                continue;
            }
            let load = position_load_form(instance, layout, i);
            m.add_constraint(Constraint::new(load, Sense::Le, limit, format!("speed {i}")))?;
        }
    }
    Ok(m)
}

/// Travel time with fixed `b`, subject to the permutation, capacity, band
/// and speed-floor constraints.
pub fn encode_subproblem(
    instance: &TtpInstance,
    band: Band,
    b: &AuxiliaryWeights,
    opts: &EncodeOptions,
) -> Result<CqmModel, EncodeError> {
    if !(band.lo <= band.hi) || band.hi > 0.0 {
        return Err(EncodeError::BandOrder { lo: band.lo, hi: band.hi });
    }
    b.validate(instance)?;
    let layout = VariableLayout::new(instance, opts.layout);
    let mut m = base_model(instance, &layout, b, opts, travel_form(instance, &layout, b))?;
    if instance.num_items() == 0 {
        if !band.contains(0.0) {
            return Err(EncodeError::EmptyBand { lo: band.lo, hi: band.hi });
        }
        return Ok(m);
    }
    let profit = profit_form(instance, &layout, opts.quadratic_forms);
    // lo ≤ −Σp·z ≤ hi
    m.add_constraint(Constraint::new(profit.clone(), Sense::Le, -band.lo, "band lower"))?;
    m.add_constraint(Constraint::new(profit, Sense::Ge, -band.hi, "band upper"))?;
    Ok(m)
}

/// Knapsack over the picking variables alone: minimize `−Σ p·z` subject to
/// the capacity. Variables are indexed by item id.
pub fn encode_profit_bound(instance: &TtpInstance) -> CqmModel {
    let m = instance.num_items();
    let mut obj = QuadForm::new();
    let mut cap = QuadForm::new();
    for (k, item) in instance.items().iter().enumerate() {
        obj.add_linear(k, -item.profit);
        cap.add_linear(k, item.weight);
    }
    let mut model = CqmModel::with_objective(m, obj).expect("indices are item ids");
    if m > 0 {
        model
            .add_constraint(Constraint::new(cap, Sense::Le, instance.capacity, "capacity"))
            .expect("capacity form is non-empty");
    }
    model
}

/// `α·(travel form) + (1 − α)·(−Σ p·z)` without a band.
pub fn encode_weighted_sum(
    instance: &TtpInstance,
    alpha: f64,
    b: &AuxiliaryWeights,
    opts: &EncodeOptions,
) -> Result<CqmModel, EncodeError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(EncodeError::Alpha(alpha));
    }
    b.validate(instance)?;
    let layout = VariableLayout::new(instance, opts.layout);
    let mut obj = travel_form(instance, &layout, b).scaled(alpha);
    obj.add_scaled(&profit_form(instance, &layout, opts.quadratic_forms), -(1.0 - alpha));
    base_model(instance, &layout, b, opts, obj)
}

/// Reads the tour position by position and copies the picking flags.
pub fn decode(instance: &TtpInstance, layout: &VariableLayout, x: &[bool]) -> Result<Solution, DecodeError> {
    if x.len() != layout.total_vars() {
        return Err(DecodeError::Length {
            expected: layout.total_vars(),
            found: x.len(),
        });
    }
    let n = layout.num_cities();
    let mut tour = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for i in 0..n {
        let mut at = (0..n).filter(|&v| x[layout.tour_var(v, i)]);
        let city = at.next().ok_or(DecodeError::EmptyPosition { position: i })?;
        if let Some(second) = at.next() {
            return Err(DecodeError::SharedPosition {
                position: i,
                first: city,
                second,
            });
        }
        if seen[city] {
            return Err(DecodeError::RepeatedCity { city });
        }
        seen[city] = true;
        tour.push(city);
    }
    if tour[0] != 0 {
        return Err(DecodeError::DepotNotFirst { city: tour[0] });
    }
    let picked = (0..layout.num_items()).map(|k| x[layout.pick_var(k)]).collect();
    Ok(Solution::new(instance, tour, picked)?)
}
