//! `treebolic`: closed forms, simulators, reports and the acceptance runner.
//!
//! Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 acceptance
//! failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use treebolic::acceptance;
use treebolic::analysis::{self, SampleSummary};
use treebolic::closed_forms::{ModelParams, Regime};
use treebolic::isometry::bs_word;
use treebolic::path::{self, SimConfig, TrajectoryRecord};
use treebolic::skeleton::{self, RngStream};
use treebolic::treebolic::HTParams;
use treebolic::Error;

/// Environment variable holding the worker thread count.
const THREADS_VAR: &str = "TREEBOLIC_THREADS";

#[derive(Parser, Debug)]
#[command(name = "treebolic", version, about = "Brownian motion on treebolic space HT(q, p)")]
struct Cli {
    /// Echo the resolved configuration as JSON on stderr.
    #[arg(long, global = true)]
    emit_config: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
enum Command {
    /// Closed-form quantities of the model.
    Formulas(ModelArgs),
    /// Trajectories as CSV or JSONL.
    Simulate(SimulateArgs),
    /// Skeleton walk as JSONL.
    Skeleton(SkeletonArgs),
    /// Rate of escape report.
    Escape(EnsembleArgs),
    /// Vertical and distance CLT report.
    Clt(EnsembleArgs),
    /// Exit measure of the first line visit.
    ExitMeasure(ExitArgs),
    /// Boundary behavior for the regime of the parameters.
    Boundary(EnsembleArgs),
    /// Evaluate a word in BS(p).
    BsWord(BsArgs),
    /// Run the acceptance suite.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Clone, Copy, Serialize)]
struct ModelArgs {
    /// Plane parameter, q > 1.
    #[arg(long)]
    q: f64,
    /// Tree parameter, an integer p >= 1.
    #[arg(long)]
    p: u32,
    #[arg(long)]
    alpha: f64,
    /// Bifurcation weight, beta > 0.
    #[arg(long)]
    beta: f64,
}

#[derive(Args, Debug, Clone, Copy, Serialize)]
struct SeedArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Jsonl,
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    seed: SeedArgs,
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
    #[arg(long, default_value_t = 1)]
    paths: u64,
    /// Record every k-th step.
    #[arg(long, default_value_t = 1)]
    stride: u64,
    /// Include d_HT to the origin in each record.
    #[arg(long)]
    distance: bool,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file; standard output if absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct SkeletonArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    seed: SeedArgs,
    #[arg(long, default_value_t = 100)]
    steps: u64,
    #[arg(long, default_value_t = 1)]
    paths: u64,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct EnsembleArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    seed: SeedArgs,
    #[arg(long, default_value_t = 500)]
    paths: u64,
    /// Horizon in units of E(tau).
    #[arg(long, default_value_t = 200.0)]
    horizon_taus: f64,
}

#[derive(Args, Debug, Serialize)]
struct ExitArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    seed: SeedArgs,
    #[arg(long, default_value_t = 10_000)]
    samples: u64,
    /// Histogram window [-w, w] around the start abscissa.
    #[arg(long, default_value_t = 5.0)]
    window: f64,
    #[arg(long, default_value_t = 10)]
    bins: usize,
}

#[derive(Args, Debug, Serialize)]
struct BsArgs {
    #[arg(long)]
    p: u32,
    /// Word in a, b, A = a^-1, B = b^-1 with optional ^k exponents.
    word: String,
}

#[derive(Args, Debug, Serialize)]
struct VerifyArgs {
    /// Only the exact and deterministic criteria.
    #[arg(long)]
    quick: bool,
}

enum Failure {
    Usage(String),
    Numerical(String),
    Acceptance,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::Parse(_) => Failure::Usage(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Numerical(format!("i/o: {e}"))
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Numerical(format!("json: {e}"))
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Numerical(format!("csv: {e}"))
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

impl ModelArgs {
    fn params(&self) -> Outcome<ModelParams> {
        ModelParams::new(self.q, self.p, self.alpha, self.beta)
            .map_err(|e| Failure::Usage(format!("invalid model flags (--q, --p, --alpha, --beta): {e}")))
    }
}

fn positive(name: &str, v: u64) -> Outcome<()> {
    if v < 1 {
        return Err(Failure::Usage(format!("--{name} must be at least 1")));
    }
    Ok(())
}

fn sim_config(seed: &SeedArgs, horizon: f64) -> Outcome<SimConfig> {
    SimConfig::new(seed.dt, horizon, seed.seed).map_err(|e| Failure::Usage(format!("--dt/--horizon: {e}")))
}

fn sink(output: &Option<PathBuf>) -> Outcome<Box<dyn Write>> {
    Ok(match output {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Seed and stream ids carried by every report.
#[derive(Serialize)]
struct Header {
    seed: u64,
    streams: String,
    dt: f64,
}

impl Header {
    fn new(seed: &SeedArgs, n: u64) -> Self {
        Header { seed: seed.seed, streams: format!("0..{n}"), dt: seed.dt }
    }
}

#[derive(Serialize)]
struct Report<T: Serialize> {
    header: Header,
    params: ModelParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    horizon: Option<f64>,
    report: T,
}

fn print_json<T: Serialize>(value: &T) -> Outcome<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn formulas(args: &ModelArgs) -> Outcome<()> {
    print_json(&args.params()?.closed_forms())
}

fn simulate(args: &SimulateArgs) -> Outcome<()> {
    let params = args.model.params()?;
    positive("paths", args.paths)?;
    let cfg = sim_config(&args.seed, args.horizon)?
        .with_stride(args.stride)
        .map_err(|e| Failure::Usage(format!("--stride: {e}")))?;
    let start = HTParams::new(params.q, params.p)?.origin();
    let runs: Vec<Vec<TrajectoryRecord>> = (0..args.paths)
        .into_par_iter()
        .map(|i| path::simulate_path(&params, &cfg, &start, i, args.distance))
        .collect::<treebolic::Result<_>>()?;
    let mut out = sink(&args.output)?;
    match args.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut out);
            for r in runs.iter().flatten() {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        Format::Jsonl => {
            for r in runs.iter().flatten() {
                serde_json::to_writer(&mut out, r)?;
                writeln!(out)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SkeletonRecord {
    path: u64,
    n: u64,
    tau: f64,
    hor: i64,
    vertex: String,
}

fn skeleton_cmd(args: &SkeletonArgs) -> Outcome<()> {
    let params = args.model.params()?;
    positive("paths", args.paths)?;
    positive("steps", args.steps)?;
    sim_config(&args.seed, args.seed.dt)?;
    let runs: Vec<_> = (0..args.paths)
        .into_par_iter()
        .map(|i| skeleton::run_skeleton(&params, args.steps, &mut RngStream::new(args.seed.seed, i).rng(), args.seed.dt))
        .collect::<treebolic::Result<_>>()?;
    let mut out = sink(&args.output)?;
    for (i, run) in runs.iter().enumerate() {
        for s in run {
            let rec = SkeletonRecord { path: i as u64, n: s.n, tau: s.clock, hor: s.vertex.hor(), vertex: s.vertex.to_string() };
            serde_json::to_writer(&mut out, &rec)?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}

struct Ensemble {
    params: ModelParams,
    horizon: f64,
    runs: Vec<path::PathRun>,
}

fn ensemble(args: &EnsembleArgs, fractions: &[f64]) -> Outcome<Ensemble> {
    let params = args.model.params()?;
    positive("paths", args.paths)?;
    if !(args.horizon_taus > 0.0) {
        return Err(Failure::Usage("--horizon-taus must be positive".into()));
    }
    let horizon = args.horizon_taus * params.exp_tau();
    let cfg = sim_config(&args.seed, horizon)?;
    let start = HTParams::new(params.q, params.p)?.origin();
    let times: Vec<f64> = fractions.iter().map(|f| f * horizon).collect();
    let runs = path::run_many(&params, &cfg, &start, args.paths, &times)?;
    Ok(Ensemble { params, horizon, runs })
}

impl Ensemble {
    fn report<T: Serialize>(&self, args: &EnsembleArgs, report: T) -> Report<T> {
        Report { header: Header::new(&args.seed, args.paths), params: self.params, horizon: Some(self.horizon), report }
    }

    fn distances(&self, k: usize) -> Vec<f64> {
        self.runs.par_iter().map(|r| path::distance_to_origin(&r.snapshots[k], &self.params)).collect()
    }
}

fn escape(args: &EnsembleArgs) -> Outcome<()> {
    let ens = ensemble(args, &[1.0])?;
    let states: Vec<_> = ens.runs.iter().map(|r| r.snapshots[0].clone()).collect();
    let rep = analysis::estimate_escape_rate(&states, &ens.params, ens.horizon);
    print_json(&ens.report(args, rep))
}

#[derive(Serialize)]
struct CltOutput {
    vertical: analysis::CltReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    distance: Option<analysis::DistanceCltReport>,
    /// Two-sample KS against the drift-free limit law when `ρ = 1`.
    #[serde(skip_serializing_if = "Option::is_none")]
    drift_free: Option<analysis::KsResult>,
}

fn clt(args: &EnsembleArgs) -> Outcome<()> {
    let ens = ensemble(args, &[1.0])?;
    let states: Vec<_> = ens.runs.iter().map(|r| r.snapshots[0].clone()).collect();
    let vertical = analysis::vertical_clt(&states, &ens.params, ens.horizon);
    let d = ens.distances(0);
    let (distance, drift_free) = if ens.params.regime() == Regime::Critical {
        let limit = analysis::drift_free_limit_samples(&ens.params, args.seed.seed ^ 0x6c69_6d69, 10_000, 10_000)?;
        (None, Some(analysis::drift_free_clt(&d, &ens.params, ens.horizon, &limit)?))
    } else {
        (Some(analysis::distance_clt(&d, &ens.params, ens.horizon)?), None)
    };
    print_json(&ens.report(args, CltOutput { vertical, distance, drift_free }))
}

#[derive(Serialize)]
struct ExitOutput {
    line: String,
    count: usize,
    mass: f64,
    bins: Vec<usize>,
}

#[derive(Serialize)]
struct ExitReport {
    window: f64,
    lines: Vec<ExitOutput>,
    x: SampleSummary,
    skewness: f64,
    skewness_se: f64,
}

fn exit_measure(args: &ExitArgs) -> Outcome<()> {
    let params = args.model.params()?;
    positive("samples", args.samples)?;
    positive("bins", args.bins as u64)?;
    if !(args.window > 0.0) {
        return Err(Failure::Usage("--window must be positive".into()));
    }
    sim_config(&args.seed, args.seed.dt)?;
    let o = HTParams::new(params.q, params.p)?.origin();
    let samples = analysis::exit_samples(&params, &o, args.samples, args.seed.seed, args.seed.dt)?;
    let xs: Vec<f64> = samples.iter().map(|s| s.x).collect();
    let (skewness, skewness_se) = analysis::skewness_with_se(&xs, 25);
    let hist = analysis::exit_measure_histogram(samples, o.x, args.window, args.bins);
    let lines = hist
        .lines
        .into_iter()
        .map(|l| ExitOutput { line: l.line.to_string(), count: l.count, mass: l.mass, bins: l.bins })
        .collect();
    let report = ExitReport { window: hist.window, lines, x: SampleSummary::new(&xs), skewness, skewness_se };
    print_json(&Report { header: Header::new(&args.seed, args.samples), params, horizon: None, report })
}

#[derive(Serialize)]
struct ConeOutput {
    cone: String,
    mass: f64,
    se: f64,
    oracle: f64,
}

#[derive(Serialize)]
#[serde(tag = "regime", rename_all = "lowercase")]
enum BoundaryReport {
    Upward { oracle_depth: usize, cones: Vec<ConeOutput> },
    Downward { ks: analysis::KsResult, oracle_draws: usize },
    Critical { median_abs_x: Vec<(f64, f64)>, hor_positive: usize, hor_negative: usize },
}

fn boundary(args: &EnsembleArgs) -> Outcome<()> {
    let params = args.model.params()?;
    let report = match params.regime() {
        Regime::Upward => {
            let ens = ensemble(args, &[1.0])?;
            let oracle = analysis::cone_oracle(&params, 12)?;
            let strips: Vec<_> = ens.runs.iter().map(|r| r.snapshots[0].strip.clone()).collect();
            let cones = analysis::cone_masses(&strips, &params, &oracle)
                .into_iter()
                .map(|c| ConeOutput { cone: c.cone.to_string(), mass: c.mass, se: c.se, oracle: c.oracle })
                .collect();
            (ens, BoundaryReport::Upward { oracle_depth: oracle.depth, cones })
        }
        Regime::Downward => {
            let ens = ensemble(args, &[1.0])?;
            let o = HTParams::new(params.q, params.p)?.origin();
            let pool = analysis::affine_pool(
                &params,
                &analysis::exit_samples(&params, &o, 20_000, args.seed.seed ^ 0x706f_6f6c, args.seed.dt)?,
            );
            let z: Vec<f64> = (0..10_000u64)
                .into_par_iter()
                .map(|i| analysis::z_infinity_sample(&pool, &mut RngStream::new(args.seed.seed ^ 0x7a69_6e66, i).rng()))
                .collect::<treebolic::Result<_>>()?;
            let x: Vec<f64> = ens.runs.iter().map(|r| r.snapshots[0].x).collect();
            (ens, BoundaryReport::Downward { ks: analysis::ks_two_sample(&x, &z), oracle_draws: z.len() })
        }
        Regime::Critical => {
            let fractions = [0.25, 0.5, 1.0];
            let ens = ensemble(args, &fractions)?;
            let median_abs_x = (0..fractions.len())
                .map(|k| {
                    let mut ax: Vec<f64> = ens.runs.iter().map(|r| r.snapshots[k].x.abs()).collect();
                    ax.sort_by(f64::total_cmp);
                    (fractions[k] * ens.horizon, ax[ax.len() / 2])
                })
                .collect();
            let hor: Vec<i64> = ens.runs.iter().map(|r| r.snapshots[2].y.floor() as i64).collect();
            let report = BoundaryReport::Critical {
                median_abs_x,
                hor_positive: hor.iter().filter(|&&h| h > 0).count(),
                hor_negative: hor.iter().filter(|&&h| h < 0).count(),
            };
            (ens, report)
        }
    };
    print_json(&report.0.report(args, report.1))
}

fn bs(args: &BsArgs) -> Outcome<()> {
    let g = bs_word(&args.word, args.p)?;
    let af = g.to_af();
    let mut out = io::stdout().lock();
    writeln!(out, "{g}")?;
    writeln!(
        out,
        "plane: z -> {}^{} z + {}; tree: u -> {}^{} u + {}",
        af.plane().q,
        af.plane().n,
        af.plane().b,
        args.p,
        af.tree().k,
        af.tree().c
    )?;
    Ok(())
}

fn verify(args: &VerifyArgs) -> Outcome<()> {
    let ids: &[u8] = if args.quick { &acceptance::QUICK } else { &acceptance::ALL };
    let mut ok = true;
    for &id in ids {
        let outcome = acceptance::run_criterion(id);
        println!("{outcome}");
        ok &= outcome.passed;
    }
    if ok {
        Ok(())
    } else {
        Err(Failure::Acceptance)
    }
}

fn run(cli: &Cli) -> Outcome<()> {
    if cli.emit_config {
        eprintln!("{}", serde_json::to_string(&cli.command)?);
    }
    match &cli.command {
        Command::Formulas(a) => formulas(a),
        Command::Simulate(a) => simulate(a),
        Command::Skeleton(a) => skeleton_cmd(a),
        Command::Escape(a) => escape(a),
        Command::Clt(a) => clt(a),
        Command::ExitMeasure(a) => exit_measure(a),
        Command::Boundary(a) => boundary(a),
        Command::BsWord(a) => bs(a),
        Command::Verify(a) => verify(a),
    }
}

fn init_threads() -> Outcome<()> {
    let Ok(v) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| Failure::Usage(format!("{THREADS_VAR} must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Numerical(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match init_threads().and_then(|()| run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Acceptance) => {
            eprintln!("acceptance failure");
            ExitCode::from(3)
        }
    }
}
