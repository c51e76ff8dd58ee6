//! ε-constraint orchestration: profit bounds, the band schedule, the
//! per-band sample/refine/update loop, and the final non-dominated filter.


use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cqm::remote::{remote_sample, RemoteConfig, RemoteError, Transport};
use crate::cqm::{mix_seed, solve_cqm, AnnealParams, Calibration, CqmError, CqmModel, SampleSet};
use crate::encoder::{decode, encode_profit_bound, encode_subproblem, AuxiliaryWeights, DecodeError, EncodeError, EncodeOptions, VariableLayout};
use crate::instance::TtpInstance;
use crate::knapsack;
use crate::lea::{lea_refine, LeaError};
use crate::model::{speed_denominators, Band, Solution, SolutionDoc};
use crate::pareto::{filter_nondominated_by, FrontDoc, ObjectivePoint, ParetoFront};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Cqm(#[from] CqmError),
    #[error(transparent)]
    Remote(#[from] RemoteError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error("feasible sample failed to decode: {0}")]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Lea(#[from] LeaError),
}

/// Anything that returns low-energy assignments for a model. `seed` fixes
/// the randomness of one call.
pub trait Sampler: Sync {
    fn sample(&self, model: &CqmModel, seed: u64) -> Result<SampleSet, SolverError>;

    fn name(&self) -> String;
}

/// Simulated annealing with penalty calibration. The seed passed to
/// [`Sampler::sample`] replaces `params.seed`.
#[derive(Debug, Clone, Default)]
pub struct LocalSampler {
    pub params: AnnealParams,
    pub calibration: Calibration,
}

impl Sampler for LocalSampler {
    fn sample(&self, model: &CqmModel, seed: u64) -> Result<SampleSet, SolverError> {
        let params = AnnealParams { seed, ..self.params.clone() };
        Ok(solve_cqm(model, &params, &self.calibration)?)
    }

    fn name(&self) -> String {
        format!(
            "simulated-annealing(reads={}, sweeps={})",
            self.params.num_reads, self.params.sweeps
        )
    }
}

pub struct RemoteSampler<T> {
    pub transport: T,
    pub config: RemoteConfig,
}

impl<T: Transport + Sync> Sampler for RemoteSampler<T> {
    fn sample(&self, model: &CqmModel, _seed: u64) -> Result<SampleSet, SolverError> {
        Ok(remote_sample(model, &self.transport, &self.config)?)
    }

    fn name(&self) -> String {
        format!("remote({})", self.config.endpoint)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub g_min: f64,
    pub g_max: f64,
    /// Computed by the knapsack dynamic program rather than sampled.
    pub exact: bool,
    /// No feasible sample was found and `g_min` fell back to 0.
    pub fallback: bool,
}

/// `g_max` is always 0 (pick nothing). `g_min` is `−` the best knapsack
/// profit, exact when `exact` is set and the weights are integral, otherwise
/// the best feasible sample of the knapsack model.
pub fn compute_bounds(
    instance: &TtpInstance,
    sampler: &dyn Sampler,
    exact: bool,
    seed: u64,
) -> Result<Bounds, SolverError> {
    let mut bounds = Bounds {
        g_min: 0.0,
        g_max: 0.0,
        exact,
        fallback: false,
    };
    if instance.num_items() == 0 {
        return Ok(bounds);
    }
    if exact {
        let items: Vec<(f64, f64)> = instance.items().iter().map(|i| (i.profit, i.weight)).collect();
        if let Some(p) = knapsack::max_profit(&items, instance.capacity) {
            bounds.g_min = -p;
            return Ok(bounds);
        }
        log::warn!("weights are not integral; sampling the profit bound instead");
        bounds.exact = false;
    }
    let model = encode_profit_bound(instance);
    let set = sampler.sample(&model, seed)?;
    match set.best_feasible() {
        Some(s) => bounds.g_min = model.objective.evaluate(&s.assignment).min(0.0),
        None => {
            log::warn!("no feasible knapsack sample; using g_min = 0");
            bounds.fallback = true;
        }
    }
    Ok(bounds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    #[default]
    Equal,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub g_min: f64,
    pub g_max: f64,
    pub segments: usize,
    pub mode: ScheduleMode,
    pub levels: Vec<f64>,
}

impl EpsilonSchedule {
    /// `[ε_s, ε_{s+1}]` for each segment.
    pub fn bands(&self) -> Vec<Band> {
        self.levels.windows(2).map(|w| Band::new(w[0], w[1])).collect()
    }
}

pub fn make_schedule(
    g_min: f64,
    g_max: f64,
    segments: usize,
    mode: ScheduleMode,
    seed: u64,
) -> Result<EpsilonSchedule, SolverError> {
    if segments == 0 {
        return Err(SolverError::Config("number of segments must be at least 1".into()));
    }
    if !(g_min <= g_max) {
        return Err(SolverError::Config(format!("g_min {g_min} exceeds g_max {g_max}")));
    }
    let span = g_max - g_min;
    let mut levels: Vec<f64> = match mode {
        ScheduleMode::Equal => (0..=segments)
            .map(|s| g_min + s as f64 * span / segments as f64)
            .collect(),
        ScheduleMode::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut u: Vec<f64> = (1..segments).map(|_| rng.random::<f64>()).collect();
            u.sort_by(f64::total_cmp);
            std::iter::once(g_min)
                .chain(u.into_iter().map(|u| g_min + u * span))
                .chain(std::iter::once(g_max))
                .collect()
        }
    };
    levels[0] = g_min;
    levels[segments] = g_max;
    Ok(EpsilonSchedule {
        g_min,
        g_max,
        segments,
        mode,
        levels,
    })
}

/// `b_i = W·v_max − W_i·(v_max − v_min)` for the solution's loads.
pub fn update_b(instance: &TtpInstance, solution: &Solution) -> AuxiliaryWeights {
    AuxiliaryWeights {
        b: speed_denominators(instance, solution.cumulative_weights()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Stop when the refined iterate fails to beat the incumbent strictly;
    /// return the best iterate seen.
    #[default]
    NoImprovement,
    /// Stop as soon as an iterate improves on the previous one and return
    /// the previous one. Kept for comparison only.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    pub samples: usize,
    pub feasible_samples: usize,
    /// Travel time of the decoded best feasible sample.
    pub sampled_f: Option<f64>,
    /// Cumulative weights of that sample.
    pub sampled_weights: Vec<f64>,
    /// After refinement.
    pub refined_f: Option<f64>,
    pub refined_g: Option<f64>,
    /// Cumulative weights of the refined iterate.
    pub weights: Vec<f64>,
    pub accepted: bool,
    /// Incumbent after this iteration.
    pub incumbent_f: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandParams {
    pub t_max: usize,
    pub termination: Termination,
    pub encode: EncodeOptions,
}

impl Default for BandParams {
    fn default() -> Self {
        BandParams {
            t_max: 5,
            termination: Termination::NoImprovement,
            encode: EncodeOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandOutcome {
    pub band: Band,
    /// `None` marks a band with no feasible sample in any iteration.
    pub best: Option<Solution>,
    pub iterations: usize,
    pub trace: Vec<IterationRecord>,
}

/// Alternates sampling with fixed `b`, refinement, and the `b` update,
/// starting from `b = 1`.
pub fn solve_band(
    instance: &TtpInstance,
    band: Band,
    sampler: &dyn Sampler,
    params: &BandParams,
    seed: u64,
) -> Result<BandOutcome, SolverError> {
    if params.t_max == 0 {
        return Err(SolverError::Config("T_max must be at least 1".into()));
    }
    let layout = VariableLayout::new(instance, params.encode.layout);
    let mut b = AuxiliaryWeights::ones(instance.num_cities());
    let mut incumbent: Option<Solution> = None;
    let mut previous: Option<Solution> = None;
    let mut trace = Vec::new();
    for t in 1..=params.t_max {
        let model = match encode_subproblem(instance, band, &b, &params.encode) {
            Ok(m) => m,
            Err(EncodeError::EmptyBand { .. }) => break,
            Err(e) => return Err(e.into()),
        };
        let set = sampler.sample(&model, mix_seed(seed, t as u64))?;
        let mut rec = IterationRecord {
            t,
            samples: set.len(),
            feasible_samples: set.num_feasible(),
            sampled_f: None,
            sampled_weights: Vec::new(),
            refined_f: None,
            refined_g: None,
            weights: Vec::new(),
            accepted: false,
            incumbent_f: incumbent.as_ref().map(Solution::f),
        };
        let Some(best) = set.best_feasible() else {
            log::debug!("band [{}, {}] t={t}: no feasible sample", band.lo, band.hi);
            trace.push(rec);
            break;
        };
        let sampled = decode(instance, &layout, &best.assignment)?;
        let refined = lea_refine(instance, &sampled, band)?;
        rec.sampled_f = Some(sampled.f());
        rec.sampled_weights = sampled.cumulative_weights().to_vec();
        rec.refined_f = Some(refined.f());
        rec.refined_g = Some(refined.g());
        rec.weights = refined.cumulative_weights().to_vec();
        let next_b = update_b(instance, &refined);
        match params.termination {
            Termination::NoImprovement => {
                let improves = incumbent.as_ref().is_none_or(|inc| refined.f() < inc.f());
                if improves {
                    rec.accepted = true;
                    rec.incumbent_f = Some(refined.f());
                    incumbent = Some(refined);
                    b = next_b;
                    trace.push(rec);
                } else {
                    trace.push(rec);
                    break;
                }
            }
            Termination::Literal => {
                let improves = previous.as_ref().is_some_and(|p| refined.f() < p.f());
                if improves {
                    trace.push(rec);
                    break;
                }
                rec.accepted = true;
                rec.incumbent_f = Some(refined.f());
                incumbent = Some(refined.clone());
                previous = Some(refined);
                b = next_b;
                trace.push(rec);
            }
        }
    }
    Ok(BandOutcome {
        band,
        best: incumbent,
        iterations: trace.len(),
        trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendConfig {
    Local {
        #[serde(default)]
        anneal: AnnealParams,
        #[serde(default)]
        calibration: Calibration,
    },
    Remote(RemoteConfig),
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig::Local {
            anneal: AnnealParams::default(),
            calibration: Calibration::default(),
        }
    }
}

impl BackendConfig {
    pub fn sampler(&self) -> Result<Box<dyn Sampler>, SolverError> {
        match self {
            BackendConfig::Local { anneal, calibration } => {
                anneal.validate()?;
                Ok(Box::new(LocalSampler {
                    params: anneal.clone(),
                    calibration: calibration.clone(),
                }))
            }
            BackendConfig::Remote(config) => {
                if config.endpoint.is_empty() {
                    return Err(SolverError::Config("remote backend needs an endpoint".into()));
                }
                remote_sampler(config)
            }
        }
    }
}

#[cfg(feature = "http")]
fn remote_sampler(config: &RemoteConfig) -> Result<Box<dyn Sampler>, SolverError> {
    use crate::cqm::remote::HttpTransport;
    Ok(Box::new(RemoteSampler {
        transport: HttpTransport::new(config),
        config: config.clone(),
    }))
}

#[cfg(not(feature = "http"))]
fn remote_sampler(_: &RemoteConfig) -> Result<Box<dyn Sampler>, SolverError> {
    Err(SolverError::Config("built without the `http` feature".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    #[serde(rename = "S")]
    pub segments: usize,
    pub mode: ScheduleMode,
    pub seed: u64,
    #[serde(rename = "T_max")]
    pub t_max: usize,
    pub backend: BackendConfig,
    pub exact_bounds: bool,
    pub termination: Termination,
    pub encode: EncodeOptions,
    /// Bands solved at once; 0 uses every available core.
    pub concurrency: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            segments: 10,
            mode: ScheduleMode::Equal,
            seed: 0,
            t_max: 5,
            backend: BackendConfig::default(),
            exact_bounds: false,
            termination: Termination::NoImprovement,
            encode: EncodeOptions::default(),
            concurrency: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandReport {
    pub index: usize,
    pub band: Band,
    pub feasible: bool,
    pub best: Option<SolutionDoc>,
    pub iterations: usize,
    pub trace: Vec<IterationRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub bounds_s: f64,
    pub bands_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableCounts {
    pub compact: usize,
    pub padded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub instance: String,
    pub sampler: String,
    pub bounds: Bounds,
    pub schedule: EpsilonSchedule,
    pub variables: VariableCounts,
    pub bands: Vec<BandReport>,
    /// Non-dominated incumbents, ascending in `f`.
    pub front: Vec<SolutionDoc>,
    pub timing: Timing,
    #[serde(skip)]
    pub solutions: Vec<Solution>,
}

impl SolveReport {
    pub fn front(&self) -> ParetoFront {
        ParetoFront {
            points: self.solutions.iter().map(|s| ObjectivePoint::new(s.f(), s.g())).collect(),
        }
    }

    pub fn front_doc(&self) -> FrontDoc {
        FrontDoc::standalone(&self.front())
    }
}

/// Wall clock that reads zero where `std::time::Instant` is unavailable
/// (wasm32 in the browser).
struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    fn start() -> Self {
        Stopwatch {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    fn secs(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        return self.start.elapsed().as_secs_f64();
        #[cfg(target_arch = "wasm32")]
        0.0
    }
}

fn run_bands(
    instance: &TtpInstance,
    bands: &[Band],
    sampler: &dyn Sampler,
    params: &BandParams,
    seed: u64,
    concurrency: usize,
) -> Result<Vec<BandOutcome>, SolverError> {
    let one = |(s, band): (usize, &Band)| solve_band(instance, *band, sampler, params, mix_seed(seed, s as u64));
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(concurrency)
            .build()
            .map_err(|e| SolverError::Config(e.to_string()))?;
        pool.install(|| bands.par_iter().enumerate().map(one).collect())
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = concurrency;
        bands.iter().enumerate().map(one).collect()
    }
}

/// Bounds, schedule, one independent solve per band, then the
/// non-dominated filter over the band incumbents.
pub fn solve(instance: &TtpInstance, config: &SolverConfig, sampler: &dyn Sampler) -> Result<SolveReport, SolverError> {
    let start = Stopwatch::start();
    let bounds = compute_bounds(instance, sampler, config.exact_bounds, mix_seed(config.seed, u64::MAX))?;
    let bounds_s = start.secs();
    let schedule = make_schedule(bounds.g_min, bounds.g_max, config.segments, config.mode, config.seed)?;
    let params = BandParams {
        t_max: config.t_max,
        termination: config.termination,
        encode: config.encode,
    };
    let band_start = Stopwatch::start();
    let outcomes = run_bands(
        instance,
        &schedule.bands(),
        sampler,
        &params,
        config.seed,
        config.concurrency,
    )?;
    let bands_s = band_start.secs();
    let incumbents: Vec<Solution> = outcomes.iter().filter_map(|o| o.best.clone()).collect();
    let solutions = filter_nondominated_by(incumbents, |s| ObjectivePoint::new(s.f(), s.g()));
    let bands = outcomes
        .into_iter()
        .enumerate()
        .map(|(index, o)| BandReport {
            index,
            band: o.band,
            feasible: o.best.is_some(),
            best: o.best.as_ref().map(Solution::to_doc),
            iterations: o.iterations,
            trace: o.trace,
        })
        .collect();
    Ok(SolveReport {
        instance: instance.name.clone(),
        sampler: sampler.name(),
        bounds,
        schedule,
        variables: VariableCounts {
            compact: instance.compact_variable_count(),
            padded: instance.padded_variable_count(),
        },
        bands,
        front: solutions.iter().map(Solution::to_doc).collect(),
        timing: Timing {
            bounds_s,
            bands_s,
            total_s: start.secs(),
        },
        solutions,
    })
}
