//! Browser bindings: solve a random instance, compare fronts by
//! hypervolume, and inspect the speed profile of a plan before and after
//! LEA refinement. Every call takes and returns JSON strings.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use bittp::cqm::{AnnealParams, Calibration};
use bittp::instance::TtpInstance;
use bittp::lea::lea_refine_detailed;
use bittp::model::{Band, Solution, SolutionDoc};
use bittp::pareto::{hypervolumes, Normalization, ObjectivePoint};
use bittp::solver::{solve, BackendConfig, SolverConfig};

#[derive(Debug, Clone, Deserialize)]
pub struct SolveRequest {
    pub cities: usize,
    pub items: usize,
    pub seed: u64,
    #[serde(default = "default_segments")]
    pub segments: usize,
    #[serde(default = "default_sweeps")]
    pub sweeps: usize,
    #[serde(default = "default_reads")]
    pub reads: usize,
}

fn default_segments() -> usize {
    4
}

fn default_sweeps() -> usize {
    1000
}

fn default_reads() -> usize {
    8
}

#[derive(Debug, Clone, Serialize)]
pub struct BandView {
    pub lo: f64,
    pub hi: f64,
    pub best: Option<SolutionDoc>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveView {
    pub coords: Vec<(f64, f64)>,
    pub capacity: f64,
    pub front: Vec<SolutionDoc>,
    pub bands: Vec<BandView>,
    pub g_min: f64,
}

fn err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// Core of [`solve_synthetic`], usable outside the browser.
pub fn solve_request(req: &SolveRequest) -> Result<SolveView, String> {
    if !(3..=40).contains(&req.cities) || req.items > 120 {
        return Err("demo limits: 3 to 40 cities, at most 120 items".into());
    }
    let inst = TtpInstance::synthetic(req.cities, req.items, req.seed);
    let config = SolverConfig {
        segments: req.segments,
        seed: req.seed,
        exact_bounds: true,
        backend: BackendConfig::Local {
            anneal: AnnealParams {
                sweeps: req.sweeps,
                num_reads: req.reads,
                ..AnnealParams::default()
            },
            calibration: Calibration::default(),
        },
        ..SolverConfig::default()
    };
    let sampler = config.backend.sampler().map_err(|e| e.to_string())?;
    let report = solve(&inst, &config, sampler.as_ref()).map_err(|e| e.to_string())?;
    Ok(SolveView {
        coords: inst.coords.clone().unwrap_or_default(),
        capacity: inst.capacity,
        front: report.front.clone(),
        bands: report
            .bands
            .iter()
            .map(|b| BandView {
                lo: b.band.lo,
                hi: b.band.hi,
                best: b.best.clone(),
                iterations: b.iterations,
            })
            .collect(),
        g_min: report.bounds.g_min,
    })
}

/// Solves `TtpInstance::synthetic(cities, items, seed)` and returns the
/// coordinates, the band incumbents and the front.
#[wasm_bindgen(js_name = solveSynthetic)]
pub fn solve_synthetic(request: &str) -> Result<String, JsValue> {
    let req: SolveRequest = serde_json::from_str(request).map_err(err)?;
    let view = solve_request(&req).map_err(err)?;
    serde_json::to_string(&view).map_err(err)
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareView {
    pub hv: Vec<f64>,
    pub normalization: Option<Normalization>,
}

pub fn compare_sets(sets: &[Vec<ObjectivePoint>]) -> Result<CompareView, String> {
    if sets.is_empty() {
        return Err("need at least one front".into());
    }
    if sets.iter().flatten().any(|p| !p.f.is_finite() || !p.g.is_finite()) {
        return Err("points must be finite".into());
    }
    let refs: Vec<&[ObjectivePoint]> = sets.iter().map(Vec::as_slice).collect();
    let (hv, normalization) = hypervolumes(&refs);
    Ok(CompareView { hv, normalization })
}

/// Hypervolume of each front in `[[{f, g}, ...], ...]`, normalized jointly.
#[wasm_bindgen(js_name = compareFronts)]
pub fn compare_fronts(fronts: &str) -> Result<String, JsValue> {
    let sets: Vec<Vec<ObjectivePoint>> = serde_json::from_str(fronts).map_err(err)?;
    serde_json::to_string(&compare_sets(&sets).map_err(err)?).map_err(err)
}

#[derive(Debug, Clone, Deserialize)]
pub struct ProfileRequest {
    pub cities: usize,
    pub items: usize,
    pub seed: u64,
    /// Same conventions as a solution document: 1-based cities, 0-based
    /// item ids.
    pub tour: Vec<usize>,
    pub picked: Vec<usize>,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileView {
    pub before: Vec<f64>,
    pub after: Vec<f64>,
    pub f_before: f64,
    pub f_after: f64,
    pub swaps: usize,
    pub drops: usize,
    pub picked_after: Vec<usize>,
}

pub fn profile_request(req: &ProfileRequest) -> Result<ProfileView, String> {
    let inst = TtpInstance::synthetic(req.cities, req.items, req.seed);
    let doc = SolutionDoc {
        tour: req.tour.clone(),
        picked: req.picked.clone(),
        f: 0.0,
        g: 0.0,
    };
    let s = Solution::from_doc(&inst, &doc).map_err(|e| e.to_string())?;
    let out = lea_refine_detailed(&inst, &s, Band::new(req.lo, req.hi)).map_err(|e| e.to_string())?;
    Ok(ProfileView {
        before: s.velocities(&inst),
        after: out.solution.velocities(&inst),
        f_before: s.f(),
        f_after: out.solution.f(),
        swaps: out.swaps,
        drops: out.drops,
        picked_after: out.solution.picked_ids(),
    })
}

/// Per-leg speeds of a plan before and after LEA refinement within a band.
#[wasm_bindgen(js_name = velocityProfile)]
pub fn velocity_profile(request: &str) -> Result<String, JsValue> {
    let req: ProfileRequest = serde_json::from_str(request).map_err(err)?;
    serde_json::to_string(&profile_request(&req).map_err(err)?).map_err(err)
}
