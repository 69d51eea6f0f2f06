//! Command-line interface for the `privroute` binary.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::field::PrimeModulus;
use crate::laplace::{fit_inverse_cdf_poly, LaplaceError, LaplaceParams, PolyFitOptions};
use crate::protocol::{run_round_seeded, write_transcript_jsonl, PartyInput, ProtocolError};
use crate::roadnet::{theorem1_condition, verify_theorem1, DelayFunction, RoadError};
use crate::sim::{self, Mode, NoiseSource, SimConfig, SimError, SimOutcome};
use crate::tntp::{read_net, read_trips, TntpError, TntpUnits};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Input(_) => 3,
            CliError::Internal(_) => 1,
        }
    }
}

impl From<TntpError> for CliError {
    fn from(e: TntpError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidConfig(_) | SimError::Laplace(_) => CliError::Config(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

impl From<LaplaceError> for CliError {
    fn from(e: LaplaceError) -> Self {
        match e {
            LaplaceError::FitFailed(_) => CliError::Internal(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<ProtocolError> for CliError {
    fn from(e: ProtocolError) -> Self {
        match e {
            ProtocolError::TooFewParties { .. } | ProtocolError::OverflowRisk { .. } => CliError::Config(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

impl From<RoadError> for CliError {
    fn from(e: RoadError) -> Self {
        match e {
            RoadError::InvalidDelay(_) => CliError::Config(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "privroute", version, about = "Private traffic-count estimation and routing experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run private and non-private simulations on a TNTP network and compare them.
    Simulate(SimulateArgs),
    /// Check the accuracy condition for one road and estimate it by Monte Carlo.
    VerifyTheorem1(TheoremArgs),
    /// Fit the polynomial inverse CDF used for in-protocol noise.
    FitNoise(FitArgs),
    /// Run one protocol round on synthetic parties and dump its transcript.
    ProtocolDemo(DemoArgs),
    /// Per-edge critical counts of a TNTP network against the accuracy threshold.
    CriticalCounts(CriticalArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct UnitArgs {
    /// Seconds per unit of the free-flow time column.
    #[arg(long, default_value_t = 60.0)]
    pub time_unit: f64,
    /// Seconds the capacity column refers to.
    #[arg(long, default_value_t = 7200.0)]
    pub capacity_period: f64,
}

impl UnitArgs {
    fn units(&self) -> Result<TntpUnits> {
        if !(self.time_unit > 0.0 && self.capacity_period > 0.0) {
            return Err(CliError::Config("unit conversions must be positive".into()));
        }
        Ok(TntpUnits {
            time_unit_seconds: self.time_unit,
            capacity_period_seconds: self.capacity_period,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    /// Private and non-private runs with common demand.
    Paired,
    Private,
    NonPrivate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseArg {
    Exact,
    Mpc,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub net: PathBuf,
    #[arg(long)]
    pub trips: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    /// Demand multiplier.
    #[arg(long, default_value_t = 1.0)]
    pub demand: f64,
    /// Trip-table rate to vehicles per hour.
    #[arg(long, default_value_t = 1.0 / 6.0)]
    pub demand_scale: f64,
    /// Seconds between estimate refreshes.
    #[arg(long, default_value_t = 120.0)]
    pub dt: f64,
    #[arg(long, default_value_t = 10.0)]
    pub timestep: f64,
    #[arg(long, default_value_t = 7200.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::Paired)]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value_t = NoiseArg::Exact)]
    pub noise: NoiseArg,
    /// Also write per-vehicle traces.
    #[arg(long)]
    pub trace: bool,
    #[command(flatten)]
    pub units: UnitArgs,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TheoremArgs {
    #[arg(long, default_value_t = 0.2)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.1)]
    pub p_fail: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t0: f64,
    #[arg(long, default_value_t = 130.0)]
    pub capacity: f64,
    #[arg(long, default_value_t = DelayFunction::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = DelayFunction::DEFAULT_BETA)]
    pub beta: f64,
    #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 50.0, 127.0, 500.0, 5000.0])]
    pub counts: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 15)]
    pub degree: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub clamp: f64,
    #[arg(long, default_value_t = 16)]
    pub uniform_bits: u32,
    #[arg(long, default_value_t = 16)]
    pub fraction_bits: u32,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DemoArgs {
    #[arg(long, default_value_t = 5)]
    pub parties: usize,
    #[arg(long, default_value_t = 3)]
    pub edges: usize,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 15)]
    pub degree: usize,
    #[arg(long, default_value_t = 16)]
    pub uniform_bits: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CriticalArgs {
    #[arg(long)]
    pub net: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.2)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    pub p_fail: f64,
    #[command(flatten)]
    pub units: UnitArgs,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("--{name} must be positive, got {v}")))
    }
}

fn check_theorem_params(epsilon: f64, delta: f64, p_fail: f64) -> Result<()> {
    check_positive("epsilon", epsilon)?;
    check_positive("delta", delta)?;
    if !(p_fail > 0.0 && p_fail < 1.0) {
        return Err(CliError::Config(format!("--p-fail must lie in (0, 1), got {p_fail}")));
    }
    Ok(())
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Internal(format!("cannot write {}: {e}", path.display()))
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| io_error(path, e))
}

fn write_manifest<T: Serialize>(dir: &Path, command: &str, seed: Option<u64>, config: &T) -> Result<()> {
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let manifest = json!({
        "command": command,
        "config": config,
        "seed": seed,
        "version": env!("CARGO_PKG_VERSION"),
        "git_describe": env!("PRIVROUTE_GIT_DESCRIBE"),
        "timestamp": timestamp,
    });
    write_json(&dir.join("manifest.json"), &manifest)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Internal(e.to_string())
}

fn write_trace(path: &Path, outcome: &SimOutcome) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["id", "origin", "destination", "depart", "arrive", "route_hash"])
        .map_err(csv_err)?;
    for v in &outcome.vehicles {
        w.write_record([
            v.id.to_string(),
            v.origin.to_string(),
            v.destination.to_string(),
            v.departure.to_string(),
            v.arrival.map(|a| a.to_string()).unwrap_or_default(),
            format!("{:016x}", v.route_hash()),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

fn flatten(prefix: &str, value: &Value, out: &mut BTreeMap<String, String>) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        other => {
            out.insert(prefix.to_string(), other.to_string());
        }
    }
}

fn write_key_value_csv(path: &Path, value: &Value) -> Result<()> {
    let mut rows = BTreeMap::new();
    flatten("", value, &mut rows);
    let mut w = csv_writer(path)?;
    w.write_record(["metric", "value"]).map_err(csv_err)?;
    for (k, v) in rows {
        w.write_record([k, v]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

fn outcome_summary(o: &SimOutcome) -> Value {
    json!({
        "vehicles": o.vehicles.len(),
        "unfinished": o.unfinished,
        "mean_travel_time": o.mean_travel_time(),
        "utilization": o.utilization,
        "steps": o.steps,
        "refreshes": o.refreshes,
    })
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    check_positive("epsilon", args.epsilon)?;
    let units = args.units.units()?;
    let net = read_net(&args.net, units)?;
    let od = read_trips(&args.trips)?;
    od.validate_against(&net)?;
    let config = SimConfig {
        timestep: args.timestep,
        horizon: args.horizon,
        refresh_period: args.dt,
        epsilon: args.epsilon,
        demand_multiplier: args.demand,
        demand_scale: args.demand_scale,
        seed: args.seed,
        mode: Mode::Private,
        noise: match args.noise {
            NoiseArg::Exact => NoiseSource::Exact,
            NoiseArg::Mpc => NoiseSource::Mpc,
        },
        drain_factor: 2.0,
    };
    config.validate()?;
    prepare_out(&args.out)?;
    write_manifest(&args.out, "simulate", Some(args.seed), &json!({ "args": args, "resolved": config }))?;

    let metrics = match args.mode {
        ModeArg::Paired => {
            let exp = sim::run_experiment(&net, &od, &config)?;
            if args.trace {
                write_trace(&args.out.join("vehicles_private.csv"), &exp.private)?;
                write_trace(&args.out.join("vehicles_non_private.csv"), &exp.non_private)?;
            }
            json!({
                "comparison": exp.metrics,
                "private": outcome_summary(&exp.private),
                "non_private": outcome_summary(&exp.non_private),
            })
        }
        single => {
            let mode = if single == ModeArg::Private { Mode::Private } else { Mode::NonPrivate };
            let outcome = sim::simulate(&net, &od, SimConfig { mode, ..config })?;
            if args.trace {
                write_trace(&args.out.join("vehicles.csv"), &outcome)?;
            }
            json!({ "run": outcome_summary(&outcome) })
        }
    };
    write_json(&args.out.join("metrics.json"), &metrics)?;
    write_key_value_csv(&args.out.join("metrics.csv"), &metrics)
}

pub fn cmd_verify_theorem1(args: &TheoremArgs) -> Result<()> {
    check_theorem_params(args.epsilon, args.delta, args.p_fail)?;
    if args.trials == 0 {
        return Err(CliError::Config("--trials must be positive".into()));
    }
    let delay = DelayFunction::new(args.t0, args.capacity, args.alpha, args.beta)?;
    let check = theorem1_condition(&delay, args.epsilon, args.delta, args.p_fail);
    let mut rng = sim::substream(args.seed, 0);
    let trials = verify_theorem1(&delay, args.epsilon, args.delta, &args.counts, args.trials, &mut rng)?;
    prepare_out(&args.out)?;
    write_manifest(&args.out, "verify-theorem1", Some(args.seed), args)?;
    write_json(
        &args.out.join("theorem1.json"),
        &json!({ "condition": check, "required_success_rate": 1.0 - args.p_fail, "trials": trials }),
    )?;
    let path = args.out.join("theorem1.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["count", "trials", "successes", "success_rate", "mean_relative_error", "max_relative_error", "below_critical"])
        .map_err(csv_err)?;
    for t in &trials {
        w.serialize((t.count, t.trials, t.successes, t.success_rate, t.mean_relative_error, t.max_relative_error, t.below_critical))
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| io_error(&path, e))
}

pub fn cmd_fit_noise(args: &FitArgs) -> Result<()> {
    let params = LaplaceParams::new(args.epsilon)?;
    let options = PolyFitOptions {
        degree: args.degree,
        clamp: args.clamp,
        fraction_bits: args.fraction_bits,
        uniform_bits: args.uniform_bits,
        ..Default::default()
    };
    let fit = fit_inverse_cdf_poly(&params, options, &PrimeModulus::mersenne521())?;
    prepare_out(&args.out)?;
    write_manifest(&args.out, "fit-noise", None, args)?;
    write_json(&args.out.join("fit_report.json"), &fit.report())?;
    write_json(&args.out.join("coefficients.json"), &fit.coefficients())
}

pub fn cmd_protocol_demo(args: &DemoArgs) -> Result<()> {
    if args.edges == 0 {
        return Err(CliError::Config("--edges must be positive".into()));
    }
    let params = LaplaceParams::new(args.epsilon)?;
    let options = PolyFitOptions {
        degree: args.degree,
        uniform_bits: args.uniform_bits,
        ..Default::default()
    };
    let fit = fit_inverse_cdf_poly(&params, options, &PrimeModulus::mersenne521())?;
    let inputs: Vec<PartyInput> = (0..args.parties)
        .map(|i| PartyInput::on_edge(i + 1, i % args.edges, args.edges))
        .collect();
    let exact: Vec<usize> = (0..args.edges)
        .map(|e| inputs.iter().filter(|p| p.edge() == Some(e)).count())
        .collect();
    let round = run_round_seeded(&inputs, fit.encoded(), args.seed, true)?;
    prepare_out(&args.out)?;
    write_manifest(&args.out, "protocol-demo", Some(args.seed), args)?;
    let messages: usize = round.transcripts.iter().map(|t| t.transcript.messages.len()).sum();
    write_json(
        &args.out.join("round.json"),
        &json!({
            "exact_counts": exact,
            "noisy_counts": round.counts,
            "fixed_point": round.fixed_point,
            "fraction_bits": fit.encoded().fraction_bits(),
            "messages": messages,
            "seed": round.seed,
        }),
    )?;
    let path = args.out.join("transcript.jsonl");
    let file = fs::File::create(&path).map_err(|e| io_error(&path, e))?;
    write_transcript_jsonl(BufWriter::new(file), &round.transcripts)?;
    Ok(())
}

pub fn cmd_critical_counts(args: &CriticalArgs) -> Result<()> {
    check_theorem_params(args.epsilon, args.delta, args.p_fail)?;
    let net = read_net(&args.net, args.units.units()?)?;
    let threshold = crate::roadnet::theorem1_threshold(args.epsilon, args.delta, args.p_fail);
    prepare_out(&args.out)?;
    write_manifest(&args.out, "critical-counts", None, args)?;
    let path = args.out.join("critical_counts.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["edge", "tail", "head", "critical_count", "meets_threshold"])
        .map_err(csv_err)?;
    let mut above = 0;
    for e in net.edges() {
        let c = e.delay.delta_critical_count(args.delta);
        let meets = c >= threshold;
        above += meets as usize;
        w.serialize((e.id, e.tail, e.head, c, meets)).map_err(csv_err)?;
    }
    w.flush().map_err(|e| io_error(&path, e))?;
    let edges = net.edge_count();
    let fraction = if edges == 0 { json!("NA") } else { json!(above as f64 / edges as f64) };
    write_json(
        &args.out.join("critical_summary.json"),
        &json!({
            "threshold": threshold,
            "min_integer_count": threshold.ceil(),
            "edges": edges,
            "above_threshold": above,
            "fraction_above": fraction,
        }),
    )
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::VerifyTheorem1(a) => cmd_verify_theorem1(a),
        Command::FitNoise(a) => cmd_fit_noise(a),
        Command::ProtocolDemo(a) => cmd_protocol_demo(a),
        Command::CriticalCounts(a) => cmd_critical_counts(a),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PRIVROUTE_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("privroute: {e}");
            e.exit_code()
        }
    }
}
