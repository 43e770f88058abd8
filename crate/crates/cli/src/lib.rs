//! Command-line driver: every experiment as a reproducible command emitting CSV or JSON.
//!
//! Column layouts:
//!
//! * `fidelity-curve`: `n,estimator,mean_F,stderr,F_sat_closed_form`
//! * `continuum-compare`: `t,n,discrete_mean_purity,discrete_stderr,sde_mean_purity,sde_stderr,drift_closed_form`
//! * `validate`: `check,parameter,value,threshold,status`
//!
//! JSON output wraps the same rows as `{"meta": {...}, "rows": [...]}`. The meta block holds
//! the command, every flag that affects the numbers, the seed and the crate version. Output
//! path and worker count do not enter the output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use unsharp::continuous::{Integrator, DEFAULT_DT};
use unsharp::ensemble::{run_ensemble, run_ensemble_with_workers, EnsembleStatistics, ExperimentKind, ExperimentSpec};
use unsharp::povm::PurificationStrategy;

pub mod table;
pub mod validate;

use table::{Cell, Format, OutputTable};

#[derive(Debug, Parser)]
#[command(name = "unsharp", version, about = "Qubit estimation from unsharp Gaussian measurements")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Average estimation fidelity against the number of measurements.
    FidelityCurve(FidelityCurveArgs),
    /// Discrete hypothetical purity against conditional-master-equation trajectories.
    ContinuumCompare(ContinuumCompareArgs),
    /// Fast invariant battery; exits 1 if any check fails.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CommonArgs {
    /// Master seed for all random streams.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Output file (default: standard output).
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores). Does not change the output.
    #[arg(long)]
    #[serde(skip)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Direct,
    Purity,
    Both,
}

fn parse_strategy(s: &str) -> Result<PurificationStrategy, String> {
    s.parse().map_err(|e: unsharp::Error| e.to_string())
}

fn parse_integrator(s: &str) -> Result<Integrator, String> {
    s.parse().map_err(|e: unsharp::Error| e.to_string())
}

fn serialize_strategy<S: serde::Serializer>(s: &PurificationStrategy, ser: S) -> Result<S::Ok, S::Error> {
    ser.serialize_str(s.name())
}

fn serialize_integrator<S: serde::Serializer>(i: &Integrator, ser: S) -> Result<S::Ok, S::Error> {
    ser.serialize_str(i.name())
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FidelityCurveArgs {
    #[arg(long, default_value_t = 20.0, allow_negative_numbers = true)]
    pub delta: f64,
    /// Comma-separated measurement counts, ascending.
    #[arg(long, value_delimiter = ',', default_values_t = [0u64, 2, 5, 10, 20, 40])]
    pub n_grid: Vec<u64>,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    /// random-eigenstate or dominant-eigenstate.
    #[arg(long, value_parser = parse_strategy, default_value = "random-eigenstate")]
    #[serde(serialize_with = "serialize_strategy")]
    pub strategy: PurificationStrategy,
    #[arg(long, value_enum, default_value_t = Estimator::Direct)]
    pub estimator: Estimator,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ContinuumCompareArgs {
    #[arg(long, default_value_t = 20.0, allow_negative_numbers = true)]
    pub delta: f64,
    /// Largest measurement count (default: the count mapping to t = 1).
    #[arg(long)]
    pub n_max: Option<u64>,
    /// Number of grid points between 0 and n-max.
    #[arg(long, default_value_t = 21)]
    pub points: u64,
    #[arg(long, default_value_t = DEFAULT_DT)]
    pub dt: f64,
    /// Trajectories, and discrete runs, per grid point.
    #[arg(long, default_value_t = 1000)]
    pub trajectories: u64,
    /// measurement-operator or euler-maruyama.
    #[arg(long, value_parser = parse_integrator, default_value = "measurement-operator")]
    #[serde(serialize_with = "serialize_integrator")]
    pub integrator: Integrator,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ValidateArgs {
    /// Precisions for the completeness and spectral-match checks.
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 1.0, 10.0])]
    pub delta_list: Vec<f64>,
    /// Smaller samples for the statistical checks.
    #[arg(long)]
    pub quick: bool,
    /// Scales the noise of the matrix-form SDE step; for sensitivity testing only.
    #[arg(long, hide = true, default_value_t = 1.0)]
    pub inject_fault: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug)]
pub enum CliError {
    /// Invalid flag values; exit code 2.
    Usage(String),
    /// Numerical failure or failed validation; exit code 1.
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Failure(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

pub struct Report {
    pub table: OutputTable,
    pub meta: Value,
    pub format: Format,
    pub out: Option<PathBuf>,
    /// Failures to report after the table has been written.
    pub failures: Vec<String>,
}

impl Report {
    pub fn emit(&self) -> io::Result<()> {
        let to_io = |e: anyhow::Error| io::Error::other(e.to_string());
        match &self.out {
            Some(path) => {
                let mut w = BufWriter::new(File::create(path)?);
                self.table.write(&mut w, self.format, self.meta.clone()).map_err(to_io)?;
                w.flush()
            }
            None => {
                let stdout = io::stdout();
                let mut w = stdout.lock();
                self.table.write(&mut w, self.format, self.meta.clone()).map_err(to_io)?;
                w.flush()
            }
        }
    }
}

fn meta<T: Serialize>(command: &str, args: &T, seed: u64) -> Value {
    json!({
        "command": command,
        "flags": serde_json::to_value(args).unwrap_or(Value::Null),
        "seed": seed,
        "version": env!("CARGO_PKG_VERSION"),
    })
}

fn execute(spec: &ExperimentSpec, workers: Option<usize>) -> Result<EnsembleStatistics, CliError> {
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let result = match workers {
        Some(0) => return Err(CliError::Usage("--workers must be at least 1".into())),
        Some(w) => run_ensemble_with_workers(spec, w),
        None => run_ensemble(spec),
    };
    result.map_err(|e| CliError::Failure(format!("numerical failure: {e}")))
}

pub fn fidelity_curve(args: &FidelityCurveArgs) -> Result<Report, CliError> {
    let mut kinds = Vec::new();
    if matches!(args.estimator, Estimator::Direct | Estimator::Both) {
        kinds.push(ExperimentKind::SequentialFidelity {
            precision: args.delta,
            n_grid: args.n_grid.clone(),
            strategy: args.strategy,
        });
    }
    if matches!(args.estimator, Estimator::Purity | Estimator::Both) {
        kinds.push(ExperimentKind::HypotheticalPurity {
            precision: args.delta,
            n_grid: args.n_grid.clone(),
        });
    }
    let mut table = OutputTable::new(vec!["n", "estimator", "mean_F", "stderr", "F_sat_closed_form"]);
    for kind in kinds {
        let spec = ExperimentSpec {
            kind,
            trials: args.trials,
            seed: args.common.seed,
        };
        let stats = execute(&spec, args.common.workers)?;
        for series in &stats.series {
            for (p, &n) in series.points.iter().zip(&args.n_grid) {
                table.rows.push(vec![
                    Cell::Int(n),
                    Cell::Text(series.name.clone()),
                    p.mean.into(),
                    p.std_error.into(),
                    p.reference.unwrap_or(f64::NAN).into(),
                ]);
            }
        }
    }
    Ok(Report {
        table,
        meta: meta("fidelity-curve", args, args.common.seed),
        format: args.common.format,
        out: args.common.out.clone(),
        failures: Vec::new(),
    })
}

/// `points` counts spread evenly over `[0, n_max]`, rounded and deduplicated.
pub fn count_grid(n_max: u64, points: u64) -> Vec<u64> {
    if points <= 1 || n_max == 0 {
        return vec![0];
    }
    let mut grid: Vec<u64> = (0..points)
        .map(|k| ((k as f64) * (n_max as f64) / ((points - 1) as f64)).round() as u64)
        .collect();
    grid.dedup();
    grid
}

pub fn continuum_compare(args: &ContinuumCompareArgs) -> Result<Report, CliError> {
    if !(args.delta > 0.0) || !args.delta.is_finite() {
        return Err(CliError::Usage(format!("--delta must be positive, got {}", args.delta)));
    }
    let n_max = args.n_max.unwrap_or_else(|| (args.delta * args.delta / 12.0).ceil() as u64);
    let n_grid = count_grid(n_max, args.points);
    let spec = ExperimentSpec {
        kind: ExperimentKind::ContinuumCompare {
            precision: args.delta,
            n_grid: n_grid.clone(),
            dt: args.dt,
            integrator: args.integrator,
        },
        trials: args.trajectories,
        seed: args.common.seed,
    };
    let stats = execute(&spec, args.common.workers)?;
    let (Some(discrete), Some(sde)) = (stats.series("discrete"), stats.series("sde")) else {
        return Err(CliError::Failure("ensemble returned no comparison series".into()));
    };
    let mut table = OutputTable::new(vec![
        "t",
        "n",
        "discrete_mean_purity",
        "discrete_stderr",
        "sde_mean_purity",
        "sde_stderr",
        "drift_closed_form",
    ]);
    for ((d, s), &n) in discrete.points.iter().zip(&sde.points).zip(&n_grid) {
        table.rows.push(vec![
            d.grid.into(),
            Cell::Int(n),
            d.mean.into(),
            d.std_error.into(),
            s.mean.into(),
            s.std_error.into(),
            d.reference.unwrap_or(f64::NAN).into(),
        ]);
    }
    let mut resolved = args.clone();
    resolved.n_max = Some(n_max);
    Ok(Report {
        table,
        meta: meta("continuum-compare", &resolved, args.common.seed),
        format: args.common.format,
        out: args.common.out.clone(),
        failures: Vec::new(),
    })
}

pub fn validate(args: &ValidateArgs) -> Result<Report, CliError> {
    if args.delta_list.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
        return Err(CliError::Usage("--delta-list entries must be positive".into()));
    }
    let opts = validate::ValidateOptions {
        deltas: args.delta_list.clone(),
        quick: args.quick,
        seed: args.common.seed,
        noise_fault: args.inject_fault,
    };
    let checks = validate::run_checks(&opts).map_err(|e| CliError::Failure(format!("validation aborted: {e}")))?;
    let failures = checks
        .iter()
        .filter(|c| !c.passed())
        .map(|c| format!("{} ({}): {:e} >= {:e}", c.name, c.parameter, c.value, c.threshold))
        .collect();
    Ok(Report {
        table: validate::table(&checks),
        meta: meta("validate", args, args.common.seed),
        format: args.common.format,
        out: args.common.out.clone(),
        failures,
    })
}

pub fn run(cli: &Cli) -> Result<Report, CliError> {
    match &cli.command {
        Command::FidelityCurve(a) => fidelity_curve(a),
        Command::ContinuumCompare(a) => continuum_compare(a),
        Command::Validate(a) => validate(a),
    }
}
