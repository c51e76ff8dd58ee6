use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use bittp::cqm::remote::{RemoteConfig, TOKEN_ENV};
use bittp::instance::{load_instance, TtpInstance};
use bittp::model::{Band, Solution};
use bittp::oracle::exact_front;
use bittp::pareto::{filter_nondominated, hypervolumes, FrontDoc, ObjectivePoint};
use bittp::solver::{solve, BackendConfig, ScheduleMode, SolveReport, SolverConfig};

/// Exit statuses beyond 0 and 1.
mod status {
    pub const PARSE: u8 = 2;
    pub const CONFIG: u8 = 3;
    pub const INFEASIBLE: u8 = 4;
    pub const SOLVER: u8 = 5;
}

#[derive(Debug)]
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn fail(code: u8) -> impl FnOnce(anyhow::Error) -> Failure {
    move |error| Failure { code, error }
}

#[derive(Parser)]
#[command(name = "bittp", version, about = "Bi-objective traveling thief solver")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance and write its Pareto front.
    Solve(SolveArgs),
    /// Hypervolume of several fronts under a shared normalization.
    Compare(CompareArgs),
    /// Exact front of a tiny instance by enumeration.
    Oracle(OracleArgs),
    /// Parse an instance and print its summary.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Backend {
    Local,
    Remote,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Equal,
    Random,
}

#[derive(Args)]
struct SolveArgs {
    /// Instance file (.ttp text or .json).
    #[arg(long)]
    instance: PathBuf,
    /// Solver config document (JSON); flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    segments: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tmax: Option<usize>,
    #[arg(long, value_enum)]
    backend: Option<Backend>,
    /// Remote sampler URL (implies --backend remote).
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    sweeps: Option<usize>,
    #[arg(long)]
    reads: Option<usize>,
    /// Use the knapsack DP for the profit bound.
    #[arg(long)]
    exact_bounds: bool,
    /// Front JSON path. The report goes next to it as `<stem>.report.json`,
    /// and with `--format csv` the band table as `<stem>.csv`. Without it the
    /// front (or CSV) is printed.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Explicit report path.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct CompareArgs {
    /// Front JSON files.
    #[arg(required = true)]
    fronts: Vec<PathBuf>,
    /// Index of the front to highlight.
    #[arg(long, default_value_t = 0)]
    target: usize,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Profit band `lo,hi` on g (both ≤ 0).
    #[arg(long, value_parser = parse_band, allow_hyphen_values = true)]
    band: Option<Band>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    instance: PathBuf,
}

fn parse_band(raw: &str) -> Result<Band, String> {
    let (lo, hi) = raw.split_once(',').ok_or("expected `lo,hi`")?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("bad lower bound: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("bad upper bound: {e}"))?;
    if !(lo <= hi) {
        return Err(format!("empty band [{lo}, {hi}]"));
    }
    Ok(Band::new(lo, hi))
}

fn load(path: &Path) -> Result<TtpInstance, Failure> {
    load_instance(path)
        .with_context(|| format!("cannot load instance {}", path.display()))
        .map_err(fail(status::PARSE))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text)
            .with_context(|| format!("cannot write {}", p.display()))
            .map_err(fail(1)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn build_config(args: &SolveArgs) -> Result<SolverConfig> {
    let mut config = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("cannot read config {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("invalid config {}", p.display()))?
        }
        None => SolverConfig::default(),
    };
    if let Some(s) = args.segments {
        config.segments = s;
    }
    if let Some(m) = args.mode {
        config.mode = match m {
            Mode::Equal => ScheduleMode::Equal,
            Mode::Random => ScheduleMode::Random,
        };
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(t) = args.tmax {
        config.t_max = t;
    }
    if args.exact_bounds {
        config.exact_bounds = true;
    }
    let backend = args.backend.or(args.endpoint.as_ref().map(|_| Backend::Remote));
    match backend {
        Some(Backend::Remote) if !matches!(config.backend, BackendConfig::Remote(_)) => {
            config.backend = BackendConfig::Remote(RemoteConfig::default());
        }
        Some(Backend::Local) if !matches!(config.backend, BackendConfig::Local { .. }) => {
            config.backend = BackendConfig::default();
        }
        _ => {}
    }
    match &mut config.backend {
        BackendConfig::Local { anneal, .. } => {
            if let Some(s) = args.sweeps {
                anneal.sweeps = s;
            }
            if let Some(r) = args.reads {
                anneal.num_reads = r;
            }
        }
        BackendConfig::Remote(remote) => {
            if let Some(e) = &args.endpoint {
                remote.endpoint = e.clone();
            }
            if args.sweeps.is_some() || args.reads.is_some() {
                log::warn!("--sweeps and --reads only apply to the local backend");
            }
            if std::env::var_os(TOKEN_ENV).is_none() {
                log::warn!("{TOKEN_ENV} is not set; sending requests without a token");
            }
        }
    }
    Ok(config)
}

fn band_csv(report: &SolveReport) -> String {
    let mut out = String::from("band_index,f,g,iterations\n");
    for b in &report.bands {
        match &b.best {
            Some(s) => writeln!(out, "{},{},{},{}", b.index, s.f, s.g, b.iterations),
            None => writeln!(out, "{},,,{}", b.index, b.iterations),
        }
        .expect("string write");
    }
    out
}

fn with_extension(path: &Path, ext: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{ext}"))
}

fn cmd_solve(args: SolveArgs) -> Result<(), Failure> {
    let instance = load(&args.instance)?;
    let config = build_config(&args).map_err(fail(status::CONFIG))?;
    let sampler = config
        .backend
        .sampler()
        .map_err(|e| anyhow!(e))
        .map_err(fail(status::CONFIG))?;
    log::info!(
        "solving {} (N={}, M={}) with {} bands on {}",
        instance.name,
        instance.num_cities(),
        instance.num_items(),
        config.segments,
        sampler.name()
    );
    let report = solve(&instance, &config, sampler.as_ref()).map_err(|e| match e {
        bittp::solver::SolverError::Config(_) => fail(status::CONFIG)(anyhow!(e)),
        _ => fail(status::SOLVER)(anyhow!(e)),
    })?;
    log::info!("{} front points in {:.2}s", report.solutions.len(), report.timing.total_s);

    let front = to_json(&report.front_doc());
    let csv = band_csv(&report);
    match &args.out {
        Some(out) => {
            write_out(Some(out), &front)?;
            let report_path = args.report.clone().unwrap_or_else(|| with_extension(out, "report.json"));
            write_out(Some(&report_path), &to_json(&report))?;
            if args.format == Format::Csv {
                write_out(Some(&with_extension(out, "csv")), &csv)?;
            }
        }
        None => {
            if let Some(p) = &args.report {
                write_out(Some(p), &to_json(&report))?;
            }
            write_out(None, if args.format == Format::Csv { &csv } else { &front })?;
        }
    }
    if report.solutions.is_empty() {
        return Err(fail(status::INFEASIBLE)(anyhow!("no band produced a feasible solution")));
    }
    Ok(())
}

fn read_front(path: &Path) -> Result<Vec<ObjectivePoint>> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read front {}", path.display()))?;
    let doc: FrontDoc = serde_json::from_str(&text).with_context(|| format!("malformed front {}", path.display()))?;
    if doc.points.iter().any(|p| !p.f.is_finite() || !p.g.is_finite()) {
        return Err(anyhow!("front {} has non-finite points", path.display()));
    }
    Ok(filter_nondominated(&doc.points).points)
}

fn cmd_compare(args: CompareArgs) -> Result<(), Failure> {
    let fronts = args
        .fronts
        .iter()
        .map(|p| read_front(p))
        .collect::<Result<Vec<_>>>()
        .map_err(fail(status::PARSE))?;
    if args.target >= fronts.len() {
        return Err(fail(status::CONFIG)(anyhow!(
            "target {} out of range for {} fronts",
            args.target,
            fronts.len()
        )));
    }
    let sets: Vec<&[ObjectivePoint]> = fronts.iter().map(Vec::as_slice).collect();
    let (hv, norm) = hypervolumes(&sets);
    match args.format {
        Format::Json => {
            let rows: Vec<_> = args
                .fronts
                .iter()
                .zip(&hv)
                .enumerate()
                .map(|(i, (p, h))| {
                    serde_json::json!({"index": i, "path": p.display().to_string(), "hv": h, "points": fronts[i].len()})
                })
                .collect();
            let doc = serde_json::json!({
                "target": args.target,
                "target_hv": hv[args.target],
                "normalization": norm,
                "fronts": rows,
            });
            write_out(None, &to_json(&doc))
        }
        Format::Csv => {
            let mut out = String::from("index,path,points,hv\n");
            for (i, (p, h)) in args.fronts.iter().zip(&hv).enumerate() {
                writeln!(out, "{i},{},{},{h}", p.display(), fronts[i].len()).expect("string write");
            }
            write_out(None, &out)
        }
    }
}

fn cmd_oracle(args: OracleArgs) -> Result<(), Failure> {
    let instance = load(&args.instance)?;
    let front = exact_front(&instance, args.band).map_err(|e| fail(status::CONFIG)(anyhow!(e)))?;
    let points: Vec<ObjectivePoint> = front.iter().map(|s| ObjectivePoint::new(s.f(), s.g())).collect();
    let mut doc = serde_json::to_value(FrontDoc::standalone(&filter_nondominated(&points))).expect("serializable");
    doc["solutions"] = serde_json::to_value(front.iter().map(Solution::to_doc).collect::<Vec<_>>()).expect("serializable");
    write_out(args.out.as_deref(), &to_json(&doc))
}

fn cmd_validate(args: ValidateArgs) -> Result<(), Failure> {
    let inst = load(&args.instance)?;
    let doc = serde_json::json!({
        "name": inst.name,
        "knapsack_data_type": inst.knapsack_data_type,
        "cities": inst.num_cities(),
        "items": inst.num_items(),
        "capacity": inst.capacity,
        "v_min": inst.v_min,
        "v_max": inst.v_max,
        "renting_ratio": inst.renting_ratio,
        "max_items_per_city": inst.max_items_per_city(),
        "padded_variables": inst.padded_variable_count(),
        "compact_variables": inst.compact_variable_count(),
        "ceil_2d_consistent": inst.ceil_2d_consistent(),
    });
    write_out(None, &to_json(&doc))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(status::CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Validate(a) => cmd_validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}
