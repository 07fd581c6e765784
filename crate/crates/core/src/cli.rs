//! Command-line front end.
//!
//! Every subcommand takes its parameters from flags, an optional JSON config
//! file (`--config`) and built-in defaults, in that order of precedence. The
//! fully resolved parameter set is embedded in every output: as a leading
//! `# config: {...}` line in CSV files and as a `"config"` field in JSON.
//!
//! Exit codes: 0 on success, 2 for usage and validation errors, 3 for runtime
//! failures (event cap, solver failure, output I/O).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::bounds::{self, BoundsError};
use crate::graph::{self, Graph, GraphError, RggMetadata, RggSpec};
use crate::mc::{self, CiMethod, McError, TrialPlan, UniformInit};
use crate::prc::{self, Prc, PrcConfig, PrcError, PrcParams};
use crate::sim::{self, ModelParams, SimError, Simulation};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

const DEFAULT_GRAPH_SEED: u64 = 1;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        usage(e.to_string())
    }
}

impl From<PrcError> for CliError {
    fn from(e: PrcError) -> Self {
        usage(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::EventCap { .. } => CliError::Runtime(e.to_string()),
            _ => usage(e.to_string()),
        }
    }
}

impl From<BoundsError> for CliError {
    fn from(e: BoundsError) -> Self {
        match e {
            BoundsError::NoRoot { .. } => CliError::Runtime(e.to_string()),
            _ => usage(e.to_string()),
        }
    }
}

impl From<McError> for CliError {
    fn from(e: McError) -> Self {
        match e {
            McError::Sim(e) => e.into(),
            McError::Graph(e) => e.into(),
            McError::Bounds(e) => e.into(),
            McError::NoTrials | McError::InvalidPlan(_) => usage(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "pcosync", version, about = "Delayed pulse-coupled oscillator simulation and convergence bounds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one trajectory or a quantile ensemble of the phase spread.
    Simulate(SimulateArgs),
    /// Monte Carlo estimate of the convergence probability.
    Estimate(EstimateArgs),
    /// Analytic bounds, minimum degrees and random geometric graph thresholds.
    Bound(BoundArgs),
    /// Classify a phase response curve.
    Classify(ClassifyArgs),
    /// Sweep the radius of a random geometric graph.
    Sweep(SweepArgs),
    /// Generate a graph and write it as an edge list.
    GenGraph(GenGraphArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Certificate,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CiKind {
    Wilson,
    Wald,
}

impl From<CiKind> for CiMethod {
    fn from(c: CiKind) -> Self {
        match c {
            CiKind::Wilson => CiMethod::Wilson,
            CiKind::Wald => CiMethod::Wald,
        }
    }
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct Common {
    /// Master seed for initial phases.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Worker threads for Monte Carlo trials.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// JSON file with default values for any flag.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

/// Graph source and oscillator model.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    /// `file:<path>`, `rgg:n=..,dim=..,r=..`, `er:n=..,p=..` or `complete:n=..`.
    #[arg(long)]
    pub graph: Option<String>,
    /// Seed for generated graphs.
    #[arg(long)]
    pub graph_seed: Option<u64>,
    /// `sf`, `stii:h=..,m=..[,margin=..]`, `charging:b=..,eps=..` or `table:<path>`.
    #[arg(long)]
    pub prc: Option<String>,
    /// Breakpoint between the inhibitory and excitatory branches.
    #[arg(long = "B")]
    #[serde(rename = "B")]
    pub b: Option<f64>,
    /// Transmission delay.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// Critical range used for certificates; defaults to `min(B - tau, 1 - B + tau)`.
    #[arg(long)]
    pub rho0: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Emit spread quantiles over an ensemble instead of one trajectory.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub quantiles: Option<bool>,
    /// Ensemble size in quantile mode.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub sample_dt: Option<f64>,
    /// Last sample time.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Horizon for the synchrony outcome in the summary.
    #[arg(long)]
    pub max_periods: Option<u32>,
    /// Comma-separated initial phases; drawn from the seed when absent.
    #[arg(long, value_delimiter = ',')]
    pub phases: Option<Vec<f64>>,
    /// Write the event log of the trajectory up to the horizon.
    #[arg(long)]
    pub event_log: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum)]
    pub estimator: Option<EstimatorKind>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub first_trial: Option<u64>,
    #[arg(long)]
    pub max_periods: Option<u32>,
    #[arg(long, value_enum)]
    pub ci: Option<CiKind>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct BoundArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Use this `s` instead of deriving it from `B` and `tau`.
    #[arg(long)]
    pub s: Option<f64>,
    /// STII order; 1 gives the strong-firing bound.
    #[arg(long)]
    pub k: Option<u32>,
    /// Per-node ready probability for the STII bound.
    #[arg(long)]
    pub q: Option<f64>,
    /// Report the minimum degree for each `--p`.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub delta_n: Option<bool>,
    #[arg(long, value_delimiter = ',')]
    pub p: Option<Vec<f64>>,
    /// Node count for the degree and threshold reports.
    #[arg(long)]
    pub n: Option<usize>,
    /// Report the threshold constant and radius for a torus RGG.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub rgg_threshold: Option<bool>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ClassifyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub h_max: Option<u32>,
    #[arg(long)]
    pub m_max: Option<u32>,
    /// Grid points per unit phase for the checks.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Degrees listed in the bound table.
    #[arg(long, value_delimiter = ',')]
    pub degrees: Option<Vec<usize>>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Comma-separated radii.
    #[arg(long, value_delimiter = ',')]
    pub radii: Option<Vec<f64>>,
    /// `start:stop:step`, inclusive of `stop`.
    #[arg(long)]
    pub radius_range: Option<String>,
    /// Curve spec; repeat for several curves.
    #[arg(long = "prc")]
    #[serde(rename = "prc")]
    pub prcs: Option<Vec<String>>,
    #[arg(long = "B")]
    #[serde(rename = "B")]
    pub b: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub cert_trials: Option<usize>,
    #[arg(long)]
    pub full_trials: Option<usize>,
    #[arg(long)]
    pub max_periods: Option<u32>,
    #[arg(long)]
    pub replicates: Option<u64>,
    #[arg(long)]
    pub graph_seed: Option<u64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct GenGraphArgs {
    #[arg(long)]
    pub graph: Option<String>,
    #[arg(long)]
    pub graph_seed: Option<u64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

/// Entry point for the binary.
pub fn main() -> i32 {
    run(std::env::args_os())
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate(a) => {
            let a = resolve(&a, a.common.config.as_deref())?;
            with_jobs(a.common.jobs, || cmd_simulate(a))
        }
        Command::Estimate(a) => {
            let a = resolve(&a, a.common.config.as_deref())?;
            with_jobs(a.common.jobs, || cmd_estimate(a))
        }
        Command::Bound(a) => {
            let a = resolve(&a, a.common.config.as_deref())?;
            cmd_bound(a)
        }
        Command::Classify(a) => {
            let a = resolve(&a, a.common.config.as_deref())?;
            cmd_classify(a)
        }
        Command::Sweep(a) => {
            let a = resolve(&a, a.common.config.as_deref())?;
            with_jobs(a.common.jobs, || cmd_sweep(a))
        }
        Command::GenGraph(a) => {
            let a = resolve(&a, a.common.config.as_deref())?;
            cmd_gen_graph(a)
        }
    }
}

/// Overlays flag values on the config file's values.
fn resolve<T>(flags: &T, config: Option<&Path>) -> Result<T, CliError>
where
    T: Serialize + DeserializeOwned + Default,
{
    let Some(path) = config else {
        return Ok(clone_via_json(flags));
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    let file: Value =
        serde_json::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
    let Value::Object(mut merged) = file else {
        return Err(usage(format!("config {} must hold a JSON object", path.display())));
    };
    let known = match serde_json::to_value(T::default()).expect("args serialize") {
        Value::Object(m) => m,
        _ => unreachable!(),
    };
    if let Some(k) = merged.keys().find(|k| !known.contains_key(*k)) {
        return Err(usage(format!("config {}: unknown key {k:?}", path.display())));
    }
    if let Value::Object(f) = serde_json::to_value(flags).expect("args serialize") {
        for (k, v) in f {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| usage(format!("config {}: {e}", path.display())))
}

fn clone_via_json<T: Serialize + DeserializeOwned>(v: &T) -> T {
    serde_json::from_value(serde_json::to_value(v).expect("args serialize")).expect("args roundtrip")
}

fn with_jobs(jobs: Option<usize>, f: impl FnOnce() -> Result<(), CliError> + Send) -> Result<(), CliError> {
    match jobs {
        None => f(),
        Some(0) => Err(usage("--jobs must be at least 1")),
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| CliError::Runtime(e.to_string()))?
            .install(f),
    }
}

/// Resolved config without the keys that do not affect results.
fn config_value<T: Serialize>(args: &T) -> Value {
    let mut v = serde_json::to_value(args).expect("args serialize");
    if let Value::Object(m) = &mut v {
        m.remove("out");
        m.remove("jobs");
        m.retain(|_, v| !v.is_null());
    }
    v
}

fn csv_with_config(config: &Value, body: &str) -> String {
    format!("# config: {config}\n{body}")
}

fn json_with_config(config: &Value, mut body: Map<String, Value>) -> String {
    body.insert("config".into(), config.clone());
    let mut s = serde_json::to_string_pretty(&Value::Object(body)).expect("json");
    s.push('\n');
    s
}

fn write_output(path: Option<&Path>, content: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, content)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

/// `<out>` with `suffix` appended to the file name.
fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn require<T: Copy>(v: Option<T>, flag: &str) -> Result<T, CliError> {
    v.ok_or_else(|| usage(format!("missing required --{flag}")))
}

/// `key=value` pairs after the `family:` prefix.
fn spec_pairs(body: &str) -> Result<Vec<(&str, &str)>, CliError> {
    if body.is_empty() {
        return Ok(Vec::new());
    }
    body.split(',')
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| usage(format!("expected key=value, got {kv:?}")))
        })
        .collect()
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse().map_err(|_| usage(format!("bad value for {key}: {v:?}")))
}

/// A parsed `--graph` value.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphSource {
    File(PathBuf),
    Rgg(RggSpec),
    Er { n: usize, p: f64 },
    Complete(usize),
}

pub fn parse_graph_spec(spec: &str) -> Result<GraphSource, CliError> {
    let (family, body) = spec.split_once(':').unwrap_or((spec, ""));
    if family == "file" {
        if body.is_empty() {
            return Err(usage("file: graph source needs a path"));
        }
        return Ok(GraphSource::File(PathBuf::from(body)));
    }
    let pairs = spec_pairs(body)?;
    let mut n = None;
    let mut dim = None;
    let mut r = None;
    let mut p = None;
    let mut symmetric = true;
    for (k, v) in pairs {
        match (family, k) {
            (_, "n") => n = Some(num::<usize>(k, v)?),
            ("rgg", "dim") => dim = Some(num::<usize>(k, v)?),
            ("rgg", "r") => r = Some(num::<f64>(k, v)?),
            ("rgg", "symmetric") => symmetric = num::<bool>(k, v)?,
            ("er", "p") => p = Some(num::<f64>(k, v)?),
            _ => return Err(usage(format!("unknown key {k:?} for graph family {family:?}"))),
        }
    }
    let n = n.ok_or_else(|| usage(format!("graph spec {spec:?} needs n")))?;
    match family {
        "rgg" => {
            let spec = RggSpec {
                n,
                dim: dim.unwrap_or(2),
                radius: r.ok_or_else(|| usage("rgg graph spec needs r"))?,
                symmetric,
            };
            spec.validate()?;
            Ok(GraphSource::Rgg(spec))
        }
        "er" => Ok(GraphSource::Er {
            n,
            p: p.ok_or_else(|| usage("er graph spec needs p"))?,
        }),
        "complete" => Ok(GraphSource::Complete(n)),
        other => Err(usage(format!("unknown graph family {other:?}"))),
    }
}

fn load_graph(spec: Option<&str>, seed: u64) -> Result<(Graph, GraphSource), CliError> {
    let spec = spec.ok_or_else(|| usage("missing required --graph"))?;
    let source = parse_graph_spec(spec)?;
    let g = match &source {
        GraphSource::File(p) => graph::load_edge_list(p)?,
        GraphSource::Rgg(s) => graph::generate_rgg(s, seed)?,
        GraphSource::Er { n, p } => graph::generate_er(*n, *p, seed)?,
        GraphSource::Complete(n) => {
            if *n == 0 {
                return Err(usage("complete graph needs n >= 1"));
            }
            Graph::complete(*n)
        }
    };
    Ok((g, source))
}

pub fn parse_prc_spec(spec: &str) -> Result<PrcConfig, CliError> {
    let (family, body) = spec.split_once(':').unwrap_or((spec, ""));
    let mut cfg = PrcConfig::family(family);
    match family {
        "table" => {
            if body.is_empty() {
                return Err(usage("table: curve needs a path"));
            }
            cfg.path = Some(body.to_string());
            return Ok(cfg);
        }
        "sf" | "stii" | "charging" => {}
        other => return Err(usage(format!("unknown PRC family {other:?}"))),
    }
    for (k, v) in spec_pairs(body)? {
        match (family, k) {
            ("stii", "h") => cfg.h = Some(num(k, v)?),
            ("stii", "m") => cfg.m = Some(num(k, v)?),
            ("stii", "margin") => cfg.margin = Some(num(k, v)?),
            ("charging", "b") => cfg.charge_b = Some(num(k, v)?),
            ("charging", "eps" | "epsilon") => cfg.epsilon = Some(num(k, v)?),
            _ => return Err(usage(format!("unknown key {k:?} for PRC family {family:?}"))),
        }
    }
    Ok(cfg)
}

fn base_params(b: Option<f64>, tau: f64, kappa: Option<f64>, eta: Option<f64>) -> Result<PrcParams, CliError> {
    let d = PrcParams::default();
    Ok(PrcParams::new(
        b.unwrap_or(d.b),
        kappa.unwrap_or(d.kappa),
        eta.unwrap_or(d.eta),
        tau,
    )?)
}

fn build_prc(spec: Option<&str>, base: PrcParams) -> Result<Prc, CliError> {
    let spec = spec.ok_or_else(|| usage("missing required --prc"))?;
    Ok(parse_prc_spec(spec)?.build(base)?)
}

/// Fills model defaults in place so the embedded config is complete.
fn fill_model(m: &mut ModelArgs) -> Result<PrcParams, CliError> {
    let tau = require(m.tau, "tau")?;
    let base = base_params(m.b, tau, m.kappa, m.eta)?;
    m.b = Some(base.b);
    m.kappa = Some(base.kappa);
    m.eta = Some(base.eta);
    m.graph_seed.get_or_insert(DEFAULT_GRAPH_SEED);
    Ok(base)
}

struct Model {
    graph: Graph,
    prc: Prc,
    params: ModelParams,
}

fn build_model(m: &mut ModelArgs) -> Result<Model, CliError> {
    let base = fill_model(m)?;
    let prc = build_prc(m.prc.as_deref(), base)?;
    let (graph, _) = load_graph(m.graph.as_deref(), m.graph_seed.unwrap())?;
    let st = graph::validate_structure(&graph);
    if !(st.strongly_connected && st.aperiodic) {
        eprintln!(
            "warning: graph is {}; exact synchrony is not guaranteed",
            if st.strongly_connected {
                format!("periodic with period {}", st.period.unwrap_or(0))
            } else {
                format!("not strongly connected ({} components)", st.scc_count)
            }
        );
    }
    let mut params = ModelParams::weighted(base.tau, prc.clone(), &graph)?;
    match m.rho0 {
        Some(r) => params = params.with_rho0(r)?,
        None => m.rho0 = Some(params.rho0),
    }
    Ok(Model { graph, prc, params })
}

fn cmd_simulate(mut a: SimulateArgs) -> Result<(), CliError> {
    let model = build_model(&mut a.model)?;
    let seed = *a.common.seed.get_or_insert(0);
    let format = *a.common.format.get_or_insert(Format::Csv);
    let quantiles = *a.quantiles.get_or_insert(false);
    let sample_dt = *a.sample_dt.get_or_insert(0.01);
    let horizon = *a.horizon.get_or_insert(5.0);
    let max_periods = *a.max_periods.get_or_insert(mc::DEFAULT_MAX_PERIODS);
    if !(sample_dt > 0.0) || !(horizon >= 0.0) {
        return Err(usage("--sample-dt must be > 0 and --horizon >= 0"));
    }
    let n = model.graph.node_count();
    let out = a.common.out.clone();

    if quantiles {
        if a.phases.is_some() || a.event_log.is_some() {
            return Err(usage("--phases and --event-log apply to single trajectories only"));
        }
        let trials = *a.trials.get_or_insert(100);
        if trials == 0 {
            return Err(usage("--trials must be at least 1"));
        }
        let config = config_value(&a);
        let plan = TrialPlan::full(trials, seed, max_periods);
        let rows = mc::trajectory_quantiles(&model.graph, &model.params, &plan, sample_dt, horizon)?;
        let est = mc::estimate_full(&model.graph, &model.params, &plan)?;
        let body = match format {
            Format::Csv => csv_with_config(&config, &mc::quantile_csv(&rows)),
            Format::Json => {
                let mut m = Map::new();
                m.insert("rows".into(), serde_json::to_value(&rows).unwrap());
                json_with_config(&config, m)
            }
        };
        write_output(out.as_deref(), &body)?;
        let mut summary = Map::new();
        summary.insert("prc".into(), json!(model.prc.name()));
        summary.insert("nodes".into(), json!(n));
        summary.insert("edges".into(), json!(model.graph.edge_count()));
        summary.insert("synchrony".into(), serde_json::to_value(est).unwrap());
        write_summary(out.as_deref(), &config, summary)
    } else {
        if a.trials.is_some_and(|t| t != 1) {
            return Err(usage("--trials applies to --quantiles mode"));
        }
        let phases = match &a.phases {
            Some(p) => {
                if p.len() != n {
                    return Err(usage(format!("--phases has {} values for {n} nodes", p.len())));
                }
                p.clone()
            }
            None => mc::trial_phases(&UniformInit, n, seed, 0),
        };
        let config = config_value(&a);
        let traj = mc::spread_trajectory(&phases, &model.graph, &model.params, sample_dt, horizon)?;
        let body = match format {
            Format::Csv => {
                let mut s = String::from("t,spread\n");
                for (t, sp) in &traj {
                    writeln!(s, "{t},{sp}").unwrap();
                }
                csv_with_config(&config, &s)
            }
            Format::Json => {
                let rows: Vec<Value> = traj.iter().map(|(t, sp)| json!({"t": t, "spread": sp})).collect();
                let mut m = Map::new();
                m.insert("rows".into(), Value::Array(rows));
                json_with_config(&config, m)
            }
        };
        write_output(out.as_deref(), &body)?;
        if let Some(path) = &a.event_log {
            let mut sim = Simulation::new(&model.graph, &model.params, &phases)?;
            sim.enable_log();
            sim.advance_to(horizon)?;
            let log = sim.take_log().unwrap_or_default();
            write_output(Some(path), &csv_with_config(&config, &sim::event_log_csv(&log)))?;
        }
        let cert = sim::run_one_period(&phases, &model.graph, &model.params)?;
        let outcome = sim::run_to_synchrony(&phases, &model.graph, &model.params, max_periods)?;
        let mut summary = Map::new();
        summary.insert("prc".into(), json!(model.prc.name()));
        summary.insert("nodes".into(), json!(n));
        summary.insert("edges".into(), json!(model.graph.edge_count()));
        summary.insert("certificate".into(), serde_json::to_value(cert).unwrap());
        summary.insert("outcome".into(), serde_json::to_value(outcome).unwrap());
        write_summary(out.as_deref(), &config, summary)
    }
}

/// `<out>.summary.json`, or standard error without `--out`.
fn write_summary(out: Option<&Path>, config: &Value, summary: Map<String, Value>) -> Result<(), CliError> {
    let text = json_with_config(config, summary);
    match out {
        Some(p) => write_output(Some(&sidecar(p, ".summary.json")), &text),
        None => {
            eprint!("{text}");
            Ok(())
        }
    }
}

fn cmd_estimate(mut a: EstimateArgs) -> Result<(), CliError> {
    let model = build_model(&mut a.model)?;
    let seed = *a.common.seed.get_or_insert(0);
    let format = *a.common.format.get_or_insert(Format::Json);
    let kind = *a.estimator.get_or_insert(EstimatorKind::Certificate);
    let trials = *a.trials.get_or_insert(1000);
    let first_trial = *a.first_trial.get_or_insert(0);
    let ci = *a.ci.get_or_insert(CiKind::Wilson);
    if trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    let mut plan = match kind {
        EstimatorKind::Certificate => TrialPlan::certificate(trials, seed),
        EstimatorKind::Full => {
            let mp = *a.max_periods.get_or_insert(mc::DEFAULT_MAX_PERIODS);
            TrialPlan::full(trials, seed, mp)
        }
    };
    plan.first_trial = first_trial;
    plan.ci = ci.into();
    plan.init = Arc::new(UniformInit);
    let config = config_value(&a);
    let est = match kind {
        EstimatorKind::Certificate => mc::estimate_certificate(&model.graph, &model.params, &plan)?,
        EstimatorKind::Full => mc::estimate_full(&model.graph, &model.params, &plan)?,
    };
    let body = match format {
        Format::Json => {
            let mut m = Map::new();
            m.insert("prc".into(), json!(model.prc.name()));
            m.insert("estimate".into(), serde_json::to_value(est).unwrap());
            json_with_config(&config, m)
        }
        Format::Csv => csv_with_config(
            &config,
            &format!(
                "successes,trials,point,ci_low,ci_high\n{},{},{},{},{}\n",
                est.successes, est.trials, est.point, est.ci_low, est.ci_high
            ),
        ),
    };
    write_output(a.common.out.as_deref(), &body)
}

fn cmd_bound(mut a: BoundArgs) -> Result<(), CliError> {
    let format = *a.common.format.get_or_insert(Format::Json);
    let want_delta = *a.delta_n.get_or_insert(false);
    let want_rgg = *a.rgg_threshold.get_or_insert(false);
    if a.model.graph.is_none() && !want_delta && !want_rgg {
        return Err(usage("bound needs --graph, --delta-n or --rgg-threshold"));
    }
    if format == Format::Csv && a.model.graph.is_none() {
        return Err(usage("CSV output lists per-node bounds and needs --graph"));
    }
    if a.model.prc.is_some() {
        return Err(usage("bound takes --k instead of --prc"));
    }
    let mut warnings: Vec<String> = Vec::new();
    let k = *a.k.get_or_insert(1);
    let eta = *a.model.eta.get_or_insert(0.0);
    if k == 0 {
        return Err(usage("--k must be at least 1"));
    }
    if !(eta >= 0.0) {
        return Err(usage("--eta must be >= 0"));
    }
    // `s` is either explicit or derived from (B, tau).
    let s: Option<f64> = match a.s {
        Some(s) => {
            if !(s > 0.0 && s < 1.0) {
                warnings.push(BoundsError::VacuousWindow(s).to_string());
                None
            } else {
                Some(s)
            }
        }
        None => {
            let tau = require(a.model.tau, "tau (or --s)")?;
            let b = *a.model.b.get_or_insert(PrcParams::default().b);
            match bounds::compute_s(b, tau) {
                Ok(s) => Some(s),
                Err(e @ BoundsError::VacuousWindow(_)) => {
                    warnings.push(e.to_string());
                    None
                }
                Err(e) => return Err(e.into()),
            }
        }
    };

    let graph = match a.model.graph.as_deref() {
        Some(spec) => {
            let seed = *a.model.graph_seed.get_or_insert(DEFAULT_GRAPH_SEED);
            Some(load_graph(Some(spec), seed)?.0)
        }
        None => None,
    };
    let needs_n = want_delta || want_rgg;
    let n = match (a.n, &graph) {
        (Some(n), _) => Some(n),
        (None, Some(g)) if needs_n => {
            a.n = Some(g.node_count());
            a.n
        }
        (None, _) if needs_n => return Err(usage("missing required --n")),
        _ => None,
    };
    let mut out = Map::new();
    out.insert("s".into(), json!(s));

    let mut report = None;
    if let (Some(g), Some(s)) = (&graph, s) {
        let r = if k == 1 {
            bounds::sf_graph_bounds(g, s)?
        } else {
            let q = *a.q.get_or_insert(bounds::default_ready_probability(s, eta));
            if !(q > 0.0 && q <= 1.0) {
                return Err(usage(format!("ready probability q = {q} not in (0, 1]")));
            }
            bounds::stii_graph_bound(g, &vec![q; g.node_count()], k, s, eta)?
        };
        if r.union < 0.0 {
            warnings.push(format!("union bound {} is negative and therefore vacuous", r.union));
        }
        if !r.vacuous_nodes.is_empty() {
            warnings.push(format!("{} nodes have a vacuous per-node bound", r.vacuous_nodes.len()));
        }
        out.insert("bounds".into(), serde_json::to_value(&r).unwrap());
        out.insert("structure".into(), serde_json::to_value(graph::validate_structure(g)).unwrap());
        report = Some(r);
    }

    if want_delta {
        let s = s.ok_or_else(|| usage("minimum degree needs a valid s"))?;
        let ps = a.p.get_or_insert_with(|| vec![0.95]).clone();
        let n = n.unwrap();
        let mut rows = Vec::new();
        for p in ps {
            let (c0, c1) = bounds::delta_n_coefficients(p, s)?;
            let mut row = json!({
                "p": p,
                "n": n,
                "delta_n": bounds::delta_n(p, s, n)?,
                "intercept": c0,
                "log_n_coefficient": c1,
            });
            if k > 1 {
                row["stii_degree_requirement"] = json!(bounds::stii_degree_requirement(k, n, p)?);
            }
            rows.push(row);
        }
        out.insert("delta_n".into(), Value::Array(rows));
    }

    if want_rgg {
        let s = s.ok_or_else(|| usage("threshold needs a valid s"))?;
        let dim = *a.dim.get_or_insert(2);
        let n = n.unwrap();
        let c = bounds::rgg_c_threshold(s)?;
        let r = bounds::rgg_radius_for_c(n, dim, c)?;
        out.insert(
            "rgg_threshold".into(),
            json!({"c": c, "radius": r, "n": n, "dim": dim, "residual": bounds::rgg_threshold_residual(c, s)}),
        );
    }

    out.insert("warnings".into(), json!(warnings));
    let config = config_value(&a);
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let body = match format {
        Format::Json => json_with_config(&config, out),
        Format::Csv => {
            let g = graph.as_ref().unwrap();
            let mut s = String::from("node,indegree,bound\n");
            if let Some(r) = &report {
                for (i, b) in r.per_node.iter().enumerate() {
                    writeln!(s, "{i},{},{b}", g.indegree(i)).unwrap();
                }
            }
            csv_with_config(&config, &s)
        }
    };
    write_output(a.common.out.as_deref(), &body)
}

fn cmd_classify(mut a: ClassifyArgs) -> Result<(), CliError> {
    let format = *a.common.format.get_or_insert(Format::Json);
    let h_max = *a.h_max.get_or_insert(16);
    let m_max = *a.m_max.get_or_insert(16);
    let grid = *a.grid.get_or_insert(prc::DEFAULT_GRID);
    let degrees = a.degrees.get_or_insert_with(|| vec![1, 2, 5, 10, 20, 50, 100]).clone();
    if grid == 0 {
        return Err(usage("--grid must be at least 1"));
    }
    if a.model.graph.is_some() {
        return Err(usage("classify does not take --graph"));
    }
    let base = fill_model(&mut a.model)?;
    a.model.graph_seed = None;
    let curve = build_prc(a.model.prc.as_deref(), base)?;
    let member = prc::is_stii(&curve, &base, grid);
    let class = prc::classify_stii_with_grid(&curve, &base, h_max, m_max, grid);
    let s = bounds::compute_s(base.b, base.tau).ok();

    let mut table = Vec::new();
    if let (Some(c), Some(s)) = (class, s) {
        let q = bounds::default_ready_probability(s, base.eta);
        for &d in &degrees {
            let b = if c.class.k == 1 {
                bounds::sf_node_bound(d, s)
            } else {
                bounds::stii_node_bound(d, q, c.class.k)
            };
            table.push((d, b));
        }
    }
    let verdict = match (member, class) {
        (_, Some(c)) => format!("STII_{{{},{}}}", c.class.k, c.eta),
        (true, None) => "STII, order above search limit".to_string(),
        (false, None) => "not STII".to_string(),
    };
    let config = config_value(&a);
    let body = match format {
        Format::Json => {
            let mut m = Map::new();
            m.insert("prc".into(), json!(curve.name()));
            m.insert("verdict".into(), json!(verdict));
            m.insert("stii".into(), json!(member));
            m.insert(
                "class".into(),
                class.map(|c| serde_json::to_value(c).unwrap()).unwrap_or(Value::Null),
            );
            m.insert("s".into(), json!(s));
            m.insert(
                "degree_bounds".into(),
                Value::Array(table.iter().map(|&(d, b)| json!({"d": d, "bound": b})).collect()),
            );
            json_with_config(&config, m)
        }
        Format::Csv => {
            let mut s = String::from("d,bound\n");
            for (d, b) in &table {
                writeln!(s, "{d},{b}").unwrap();
            }
            csv_with_config(&config, &s)
        }
    };
    write_output(a.common.out.as_deref(), &body)
}

/// Inclusive `start:stop:step` list, robust to rounding at the end point.
pub fn parse_radius_range(spec: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [a, b, c] = parts.as_slice() else {
        return Err(usage(format!("radius range {spec:?} must be start:stop:step")));
    };
    let (start, stop, step): (f64, f64, f64) = (num("start", a)?, num("stop", b)?, num("step", c)?);
    if !(step > 0.0) || !(stop >= start) {
        return Err(usage(format!("radius range {spec:?} needs step > 0 and stop >= start")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|i| start + i as f64 * step).collect())
}

fn cmd_sweep(mut a: SweepArgs) -> Result<(), CliError> {
    let format = *a.common.format.get_or_insert(Format::Csv);
    let seed = *a.common.seed.get_or_insert(0);
    let tau = require(a.tau, "tau")?;
    let base = base_params(a.b, tau, a.kappa, a.eta)?;
    a.b = Some(base.b);
    a.kappa = Some(base.kappa);
    a.eta = Some(base.eta);
    let n = *a.n.get_or_insert(400);
    let dim = *a.dim.get_or_insert(2);
    let radii = match (&a.radii, &a.radius_range) {
        (Some(_), Some(_)) => return Err(usage("give --radii or --radius-range, not both")),
        (Some(r), None) => r.clone(),
        (None, Some(spec)) => parse_radius_range(spec)?,
        (None, None) => return Err(usage("missing --radii or --radius-range")),
    };
    if radii.is_empty() {
        return Err(usage("radius list is empty"));
    }
    let specs = a.prcs.get_or_insert_with(|| vec!["sf".into()]).clone();
    if specs.is_empty() {
        return Err(usage("PRC list is empty"));
    }
    let prcs = specs
        .iter()
        .map(|s| build_prc(Some(s), base))
        .collect::<Result<Vec<_>, _>>()?;
    let d = mc::SweepPlan::default();
    let plan = mc::SweepPlan {
        cert_trials: *a.cert_trials.get_or_insert(d.cert_trials),
        full_trials: *a.full_trials.get_or_insert(d.full_trials),
        max_periods: *a.max_periods.get_or_insert(d.max_periods),
        replicates: *a.replicates.get_or_insert(d.replicates),
        graph_seed: *a.graph_seed.get_or_insert(d.graph_seed),
        seed,
    };
    for &r in &radii {
        RggSpec::new(n, dim, r).validate()?;
    }
    let config = config_value(&a);
    let rows = mc::sweep_radius(RggSpec::new(n, dim, radii[0]), &radii, &prcs, tau, &plan)?;
    let body = match format {
        Format::Csv => csv_with_config(&config, &mc::sweep_csv(&rows)),
        Format::Json => {
            let mut m = Map::new();
            m.insert("rows".into(), serde_json::to_value(&rows).unwrap());
            json_with_config(&config, m)
        }
    };
    write_output(a.common.out.as_deref(), &body)
}

fn cmd_gen_graph(mut a: GenGraphArgs) -> Result<(), CliError> {
    let format = *a.common.format.get_or_insert(Format::Csv);
    let seed = *a.graph_seed.get_or_insert(a.common.seed.unwrap_or(DEFAULT_GRAPH_SEED));
    let (g, source) = load_graph(a.graph.as_deref(), seed)?;
    let config = config_value(&a);
    let meta = match &source {
        GraphSource::Rgg(spec) => RggMetadata::new(spec, seed, &g),
        _ => None,
    };
    let body = match format {
        Format::Csv => {
            // the node-count line must stay first for the edge-list reader
            let list = g.to_edge_list();
            let (first, rest) = list.split_once('\n').unwrap_or((&list, ""));
            format!("{first}\n# config: {config}\n{rest}")
        }
        Format::Json => {
            let mut m = Map::new();
            m.insert("n".into(), json!(g.node_count()));
            let edges: Vec<Value> = g
                .edges()
                .iter()
                .map(|e| {
                    if e.weight == 1.0 {
                        json!([e.src, e.dst])
                    } else {
                        json!([e.src, e.dst, e.weight])
                    }
                })
                .collect();
            m.insert("edges".into(), Value::Array(edges));
            if let Some(meta) = &meta {
                m.insert("metadata".into(), serde_json::to_value(meta).unwrap());
            }
            json_with_config(&config, m)
        }
    };
    write_output(a.common.out.as_deref(), &body)?;
    if let (Some(meta), Some(out), Format::Csv) = (&meta, &a.common.out, format) {
        let text = serde_json::to_string(meta).expect("json");
        write_output(Some(&sidecar(out, ".meta.json")), &format!("{text}\n"))?;
    }
    Ok(())
}
