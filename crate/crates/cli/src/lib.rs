//! Command-line front end for `fairpol`.
//!
//! Every long option may also be given in a `key=value` file passed with
//! `--config`; options on the command line win. Outputs are written to
//! `--output-dir` through a temporary file and a rename. Diagnostics go to
//! stderr.
//!
//! Exit codes: 0 success, 1 failed self-test, 2 malformed input, 3 schema
//! violation, 4 optimizer failure, 5 invalid or missing configuration.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use fairpol::distributions::SupportInterval;
use fairpol::estimation::{empirical_pz, fit_plugin, PropensityModel, TrainingSample};
use fairpol::functionals::{SimilarityMeasure, TargetFunctional};
use fairpol::io::{
    read_path_csv, read_propensity_csv, read_sample_csv, write_path_csv, write_sim_aggregates_csv, write_sim_rows_csv,
    FittedArrayDoc, RulesDoc, SampleCsvOptions, SelectionDoc,
};
use fairpol::objective::omega;
use fairpol::optimizer::{maximize, OptimizerConfig};
use fairpol::oracle::{
    penalty_constant, toy_argmax, toy_cond_array, toy_max_value, toy_objective, toy_penalty, toy_rule, toy_threshold,
    Mechanism, ToyParams,
};
use fairpol::selection::{select_budget_from_targets, select_lambda_budget, sweep, Estimator, LambdaGrid};
use fairpol::simharness::{run_simulation, SimConfig};
use fairpol::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_SELF_TEST: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_SCHEMA: i32 = 3;
pub const EXIT_OPTIMIZER: i32 = 4;
pub const EXIT_CONFIG: i32 = 5;

pub const FITTED_FILE: &str = "fitted.json";
pub const PATH_FILE: &str = "path.csv";
pub const RULES_FILE: &str = "rules.json";
pub const SELECTION_FILE: &str = "selection.json";
pub const SIM_ROWS_FILE: &str = "simulation.csv";
pub const SIM_AGGREGATE_FILE: &str = "simulation_aggregate.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { code: EXIT_CONFIG, message: message.into() }
    }
}

impl Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Parse { .. } => EXIT_PARSE,
            Error::Schema(_)
            | Error::OutOfSupport { .. }
            | Error::InvalidRecord { .. }
            | Error::EmptySample
            | Error::InvalidPropensity(_)
            | Error::ZeroPropensity { .. }
            | Error::ZeroEstimatedPropensity { .. } => EXIT_SCHEMA,
            Error::NonFiniteObjective(_) => EXIT_OPTIMIZER,
            _ => EXIT_CONFIG,
        };
        Self { code, message: e.to_string() }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "fairpol", version, about = "Fairness-penalized distributional policy learning")]
pub struct Cli {
    /// File of key=value lines supplying any long option.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit conditional outcome cdfs and covariate masses; writes fitted.json.
    Fit(FitArgs),
    /// Maximize the penalized objective over a lambda grid; writes path.csv and rules.json.
    Sweep(SweepArgs),
    /// Choose lambda under a welfare budget; writes selection.json.
    Select(SelectArgs),
    /// Monte Carlo replications on the closed-form example; writes simulation CSVs.
    Simulate(SimulateArgs),
    /// Check the numeric pipeline against the closed-form example.
    OracleCheck(OracleArgs),
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Sample CSV with header y,x,z,d.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Outcome support as `a,b` (default 0,1).
    #[arg(long)]
    pub support: Option<String>,
    /// Number of treatments (default: largest d in the data).
    #[arg(long)]
    pub k: Option<usize>,
    /// Comma-separated x levels in order (default: order of appearance).
    #[arg(long)]
    pub x_levels: Option<String>,
    /// Comma-separated z levels in order (default: order of appearance).
    #[arg(long)]
    pub z_levels: Option<String>,
    /// Drop x levels without observations.
    #[arg(long)]
    pub drop_empty_x: bool,
    /// Min-max rescale outcomes to [0, 1].
    #[arg(long)]
    pub rescale: bool,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Directory for output files (default: current directory).
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ObjectiveArgs {
    /// gini, mean or quantile:<tau> (default gini).
    #[arg(long)]
    pub target: Option<String>,
    /// ks, ks1 or absdiff:<target> (default ks).
    #[arg(long)]
    pub similarity: Option<String>,
    /// Grid {0, 1/m, ..., 1} (default 49).
    #[arg(long)]
    pub m: Option<usize>,
    /// plugin, ipw or ipw-estimated (default plugin).
    #[arg(long)]
    pub estimator: Option<String>,
    /// Known propensities for --estimator ipw: CSV with header x,z,d,e.
    #[arg(long)]
    pub propensity: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OptimArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub candidate_starts: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub ftol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub sample: SampleArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub sample: SampleArgs,
    #[command(flatten)]
    pub objective: ObjectiveArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Welfare budget.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Existing rules.json, or path.csv together with --n.
    #[arg(long)]
    pub path: Option<PathBuf>,
    /// Sample size behind a path.csv.
    #[arg(long)]
    pub n: Option<usize>,
    #[command(flatten)]
    pub sample: SampleArgs,
    #[command(flatten)]
    pub objective: ObjectiveArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Comma-separated sample sizes (default 100,1000,10000).
    #[arg(long)]
    pub sizes: Option<String>,
    /// Comma-separated mechanisms (default A1,A2).
    #[arg(long)]
    pub mechanisms: Option<String>,
    /// Replications per sample size and mechanism (default 100).
    #[arg(long)]
    pub replications: Option<usize>,
    /// Majority share (default 0.75).
    #[arg(long)]
    pub p: Option<f64>,
    /// Grid {0, 1/m, ..., 1} (default 49).
    #[arg(long)]
    pub m: Option<usize>,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Majority share (default 0.75).
    #[arg(long)]
    pub p: Option<f64>,
    /// Relative error injected into the reference penalty constant.
    #[arg(long, hide = true, default_value_t = 0.0)]
    pub perturb: f64,
}

const CONFIG_KEYS: &[&str] = &[
    "input",
    "support",
    "k",
    "x-levels",
    "z-levels",
    "drop-empty-x",
    "rescale",
    "output-dir",
    "target",
    "similarity",
    "m",
    "estimator",
    "propensity",
    "seed",
    "restarts",
    "candidate-starts",
    "max-iters",
    "ftol",
    "beta",
    "path",
    "n",
    "sizes",
    "mechanisms",
    "replications",
    "p",
];

/// Option values from a config file.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Settings {
    values: HashMap<String, String>,
}

impl Settings {
    /// Parses `key=value` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut values = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("config line {}: expected key=value", i + 1)))?;
            let key = key.trim().replace('_', "-");
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(CliError::config(format!("config line {}: unknown key {key:?}", i + 1)));
            }
            values.insert(key, value.trim().to_owned());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn value<T: FromStr>(&self, cli: Option<T>, key: &str) -> CliResult<Option<T>>
    where
        T::Err: Display,
    {
        if cli.is_some() {
            return Ok(cli);
        }
        self.values
            .get(key)
            .map(|v| v.parse::<T>().map_err(|e| CliError::config(format!("invalid value {v:?} for {key}: {e}"))))
            .transpose()
    }

    fn or<T: FromStr>(&self, cli: Option<T>, key: &str, default: T) -> CliResult<T>
    where
        T::Err: Display,
    {
        Ok(self.value(cli, key)?.unwrap_or(default))
    }

    fn required<T: FromStr>(&self, cli: Option<T>, key: &str) -> CliResult<T>
    where
        T::Err: Display,
    {
        self.value(cli, key)?.ok_or_else(|| CliError::config(format!("missing --{key}")))
    }

    fn flag(&self, cli: bool, key: &str) -> CliResult<bool> {
        Ok(cli || self.value::<bool>(None, key)?.unwrap_or(false))
    }
}

fn list<T: FromStr>(text: &str, key: &str) -> CliResult<Vec<T>>
where
    T::Err: Display,
{
    text.split(',')
        .map(|s| s.trim().parse::<T>().map_err(|e| CliError::config(format!("invalid entry {s:?} in --{key}: {e}"))))
        .collect()
}

fn labels(text: Option<String>) -> Option<Vec<String>> {
    text.map(|t| t.split(',').map(|s| s.trim().to_owned()).collect())
}

fn load_sample(settings: &Settings, args: &SampleArgs) -> CliResult<TrainingSample> {
    let input: PathBuf = settings.required(args.input.clone(), "input")?;
    let support = match settings.value(args.support.clone(), "support")? {
        Some(text) => {
            let ends: Vec<f64> = list(&text, "support")?;
            match ends[..] {
                [a, b] => SupportInterval::new(a, b)?,
                _ => return Err(CliError::config("--support takes two values a,b")),
            }
        }
        None => SupportInterval::unit(),
    };
    let opts = SampleCsvOptions {
        support,
        k: settings.value(args.k, "k")?,
        x_levels: labels(settings.value(args.x_levels.clone(), "x-levels")?),
        z_levels: labels(settings.value(args.z_levels.clone(), "z-levels")?),
        drop_empty_x: settings.flag(args.drop_empty_x, "drop-empty-x")?,
        rescale: settings.flag(args.rescale, "rescale")?,
    };
    let file = fs::File::open(&input).map_err(|e| CliError::config(format!("cannot open {}: {e}", input.display())))?;
    read_sample_csv(std::io::BufReader::new(file), &opts).map_err(|e| {
        let mut err = CliError::from(e);
        err.message = format!("{}: {}", input.display(), err.message);
        err
    })
}

fn output_dir(settings: &Settings, args: &OutputArgs) -> CliResult<PathBuf> {
    let dir = settings.or(args.output_dir.clone(), "output-dir", PathBuf::from("."))?;
    fs::create_dir_all(&dir).map_err(|e| CliError::config(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let io_err = |e: std::io::Error| CliError::config(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(bytes).map_err(io_err)?;
    tmp.flush().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::config(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn optimizer(settings: &Settings, args: &OptimArgs) -> CliResult<OptimizerConfig> {
    let d = OptimizerConfig::default();
    let cfg = OptimizerConfig {
        restarts: settings.or(args.restarts, "restarts", d.restarts)?,
        candidate_starts: settings.or(args.candidate_starts, "candidate-starts", d.candidate_starts)?,
        max_iters: settings.or(args.max_iters, "max-iters", d.max_iters)?,
        ftol: settings.or(args.ftol, "ftol", d.ftol)?,
        seed: settings.or(args.seed, "seed", d.seed)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn grid(settings: &Settings, m: Option<usize>) -> CliResult<LambdaGrid> {
    let m = settings.or(m, "m", 49)?;
    if m == 0 {
        return Err(CliError::config("--m must be at least 1"));
    }
    Ok(LambdaGrid::uniform(m)?)
}

struct Objective {
    target: TargetFunctional,
    similarity: SimilarityMeasure,
    grid: LambdaGrid,
    estimator: Estimator,
}

fn objective(settings: &Settings, args: &ObjectiveArgs, sample: &TrainingSample) -> CliResult<Objective> {
    let target: TargetFunctional =
        settings.or(args.target.clone(), "target", "gini".into())?.parse().map_err(CliError::config)?;
    let similarity: SimilarityMeasure =
        settings.or(args.similarity.clone(), "similarity", "ks".into())?.parse().map_err(CliError::config)?;
    let estimator = match settings.or(args.estimator.clone(), "estimator", "plugin".into())?.as_str() {
        "plugin" => Estimator::Plugin,
        "ipw-estimated" => Estimator::IpwEstimated,
        "ipw" => {
            let path: PathBuf = settings
                .value(args.propensity.clone(), "propensity")?
                .ok_or_else(|| CliError::config("--estimator ipw needs --propensity"))?;
            let file =
                fs::File::open(&path).map_err(|e| CliError::config(format!("cannot open {}: {e}", path.display())))?;
            let model: PropensityModel = read_propensity_csv(file, sample.space(), empirical_pz(sample))?;
            Estimator::Ipw(model)
        }
        other => return Err(CliError::config(format!("unknown estimator {other:?}"))),
    };
    Ok(Objective { target, similarity, grid: grid(settings, args.m)?, estimator })
}

pub fn cmd_fit(settings: &Settings, args: &FitArgs) -> CliResult<()> {
    let sample = load_sample(settings, &args.sample)?;
    let dir = output_dir(settings, &args.output)?;
    let doc = FittedArrayDoc::new(&sample, &fit_plugin(&sample));
    write_json(&dir.join(FITTED_FILE), &doc)
}

fn run_sweep(
    settings: &Settings,
    sample_args: &SampleArgs,
    objective_args: &ObjectiveArgs,
    optim_args: &OptimArgs,
) -> CliResult<(fairpol::selection::LambdaPath, Objective)> {
    let sample = load_sample(settings, sample_args)?;
    let obj = objective(settings, objective_args, &sample)?;
    let cfg = optimizer(settings, optim_args)?;
    let path = sweep(&sample, &obj.grid, &obj.target, &obj.similarity, &cfg, &obj.estimator)?;
    Ok((path, obj))
}

pub fn cmd_sweep(settings: &Settings, args: &SweepArgs) -> CliResult<()> {
    let (path, obj) = run_sweep(settings, &args.sample, &args.objective, &args.optim)?;
    let dir = output_dir(settings, &args.output)?;
    let mut table = Vec::new();
    write_path_csv(&path, &mut table)?;
    write_atomic(&dir.join(PATH_FILE), &table)?;
    let doc = RulesDoc::new(&path, &obj.target.to_string(), &obj.similarity.to_string())?;
    write_json(&dir.join(RULES_FILE), &doc)
}

pub fn cmd_select(settings: &Settings, args: &SelectArgs) -> CliResult<()> {
    let beta: f64 = settings.required(args.beta, "beta")?;
    let doc = match settings.value(args.path.clone(), "path")? {
        Some(path) => {
            let text = fs::read_to_string(&path)
                .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
            if path.extension().is_some_and(|e| e == "json") {
                let rules: RulesDoc = serde_json::from_str(&text)
                    .map_err(|e| CliError { code: EXIT_PARSE, message: format!("{}: {e}", path.display()) })?;
                let lambda_path = rules.to_path()?;
                let sel = select_lambda_budget(&lambda_path, beta)?;
                SelectionDoc::new(&sel, lambda_path.n, Some(&lambda_path.entries[sel.chosen_index].rule))
            } else {
                let n: usize = settings.required(args.n, "n")?;
                let table = read_path_csv(text.as_bytes())?;
                let sel = select_budget_from_targets(&table.lambdas, &table.target_values, n, beta)?;
                SelectionDoc::new(&sel, n, None)
            }
        }
        None => {
            if settings.value(args.sample.input.clone(), "input")?.is_none() {
                return Err(CliError::config("select needs --path or --input"));
            }
            let (path, _) = run_sweep(settings, &args.sample, &args.objective, &args.optim)?;
            let sel = select_lambda_budget(&path, beta)?;
            SelectionDoc::new(&sel, path.n, Some(&path.entries[sel.chosen_index].rule))
        }
    };
    let dir = output_dir(settings, &args.output)?;
    write_json(&dir.join(SELECTION_FILE), &doc)
}

pub fn cmd_simulate(settings: &Settings, args: &SimulateArgs) -> CliResult<()> {
    let sizes = settings.or(args.sizes.clone(), "sizes", "100,1000,10000".into())?;
    let mechanisms = settings.or(args.mechanisms.clone(), "mechanisms", "A1,A2".into())?;
    let cfg = SimConfig {
        sample_sizes: list(&sizes, "sizes")?,
        mechanisms: list::<Mechanism>(&mechanisms, "mechanisms")?,
        grid: grid(settings, args.m)?,
        replications: settings.or(args.replications, "replications", 100)?,
        p: settings.or(args.p, "p", 0.75)?,
        seed: settings.or(args.optim.seed, "seed", 0)?,
        optimizer: optimizer(settings, &args.optim)?,
    };
    let result = run_simulation(&cfg)?;
    let dir = output_dir(settings, &args.output)?;
    let mut rows = Vec::new();
    write_sim_rows_csv(&result, &mut rows)?;
    write_atomic(&dir.join(SIM_ROWS_FILE), &rows)?;
    let mut agg = Vec::new();
    write_sim_aggregates_csv(&result, &mut agg)?;
    write_atomic(&dir.join(SIM_AGGREGATE_FILE), &agg)
}

/// Outcome of one self-test.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Numeric pipeline against the closed-form example with majority share `p`.
/// `perturb` scales the reference penalty constant by `1 + perturb`.
pub fn oracle_checks(p: f64, perturb: f64) -> CliResult<Vec<Check>> {
    let reference = |delta: f64, lambda: f64| -> CliResult<f64> {
        Ok(toy_objective(delta, ToyParams::new(p, lambda)?) - lambda * perturb * toy_penalty(delta, p))
    };
    let (t, s) = (TargetFunctional::GiniWelfare, SimilarityMeasure::Ks);
    let arr = toy_cond_array(p, 2000)?;
    let mut checks = Vec::new();

    let mut worst: f64 = 0.0;
    for i in 0..=20 {
        let delta = i as f64 / 20.0;
        let rule = toy_rule(arr.space(), delta)?;
        for lambda in [0.0, 0.25, 0.5, 0.75, 1.0] {
            worst = worst.max((omega(&rule, &arr, lambda, &t, &s)? - reference(delta, lambda)?).abs());
        }
    }
    checks.push(Check {
        name: "objective agreement",
        passed: worst < 0.01,
        detail: format!("max |numeric - closed form| = {worst:.3e} over 21 x 5 points (tolerance 1e-2)"),
    });

    let c = toy_threshold(p);
    let mut worst: f64 = 0.0;
    for lambda in [0.0, c / 2.0, (c + 1.0) / 2.0, 1.0] {
        let obj = |r: &fairpol::objective::DecisionRule| omega(r, &arr, lambda, &t, &s).unwrap_or(f64::NAN);
        let best = maximize(obj, arr.space(), &OptimizerConfig::default())?;
        let delta = best.rule.prob(0, 0);
        let gap =
            toy_argmax(ToyParams::new(p, lambda)?).iter().map(|d| (d - delta).abs()).fold(f64::INFINITY, f64::min);
        worst = worst.max(gap);
    }
    checks.push(Check {
        name: "argmax recovery",
        passed: worst < 0.01,
        detail: format!("max distance to the closed-form argmax = {worst:.3e} (tolerance 1e-2)"),
    });

    let gap = (reference(0.0, c)? - reference(0.5, c)?).abs();
    checks.push(Check {
        name: "threshold branch equality",
        passed: gap < 1e-10,
        detail: format!("|Omega(0) - Omega(1/2)| at lambda = c(p) = {c:.6}: {gap:.3e} (tolerance 1e-10)"),
    });

    let left = toy_max_value(ToyParams::new(p, c)?);
    let right = 89.0 / 560.0 * (1.0 - c);
    let gap = (left - right).abs();
    checks.push(Check {
        name: "value continuity",
        passed: gap < 1e-10,
        detail: format!("branches of the value function differ by {gap:.3e} at c(p) (tolerance 1e-10)"),
    });

    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let g = |t: f64| t * (1.0 - t.powi(3));
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let (a, b) = (hi - phi * (hi - lo), lo + phi * (hi - lo));
        if g(a) < g(b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    let numeric = g((lo + hi) / 2.0);
    let gap = (numeric - penalty_constant() * (1.0 + perturb)).abs();
    checks.push(Check {
        name: "penalty constant",
        passed: gap < 1e-9,
        detail: format!("max t(1 - t^3) = {numeric:.12} vs reference, difference {gap:.3e} (tolerance 1e-9)"),
    });
    Ok(checks)
}

pub fn cmd_oracle_check(settings: &Settings, args: &OracleArgs) -> CliResult<bool> {
    let p = settings.or(args.p, "p", 0.75)?;
    ToyParams::new(p, 0.0)?;
    let checks = oracle_checks(p, args.perturb)?;
    for c in &checks {
        eprintln!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(checks.iter().all(|c| c.passed))
}

pub fn execute(cli: &Cli) -> CliResult<i32> {
    let settings = match &cli.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    match &cli.command {
        Command::Fit(a) => cmd_fit(&settings, a)?,
        Command::Sweep(a) => cmd_sweep(&settings, a)?,
        Command::Select(a) => cmd_select(&settings, a)?,
        Command::Simulate(a) => cmd_simulate(&settings, a)?,
        Command::OracleCheck(a) => return Ok(if cmd_oracle_check(&settings, a)? { EXIT_OK } else { EXIT_SELF_TEST }),
    }
    Ok(EXIT_OK)
}

/// Parses `args` (program name first) and runs the command; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
