//! Deterministic Monte Carlo fan-out.
//!
//! Every trial owns one random stream derived from `(master seed, stream index)` by
//! [`derive_stream`]: the ChaCha8 key is expanded from the master seed with
//! `SeedableRng::seed_from_u64`, and the stream index selects the ChaCha stream
//! (`set_stream`). Streams with different indices share no state.
//!
//! Stream indices are laid out as `lane << 56 | grid_index << 32 | trial`, so the
//! independent series of one experiment never reuse a stream. Trials may run in parallel;
//! results are collected in index order and summed sequentially, so statistics are
//! bitwise independent of the worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::continuous::{drift_purity, mean_fidelity_closed_form, time_from_steps, Integrator, TrajectoryStepper};
use crate::povm::{MeasurementSettings, PurificationStrategy};
use crate::qubit::DensityMatrix;
use crate::sequential::{self, FidelityStatistic, SequenceRunner};
use crate::{Error, Result};

pub type Stream = ChaCha8Rng;

pub fn derive_stream(master_seed: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

pub fn stream_index(lane: u64, grid_index: u64, trial: u64) -> u64 {
    debug_assert!(lane < 1 << 8 && grid_index < 1 << 24 && trial < 1 << 32);
    lane << 56 | grid_index << 32 | trial
}

/// Mean and standard error (sample standard deviation over `sqrt(n)`). A single
/// sample yields `std_error = 0`, flagged by [`FidelityStatistic::is_degenerate`].
pub fn summarize(samples: &[f64]) -> Result<FidelityStatistic> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("cannot summarize an empty sample".into()));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let std_error = if samples.len() < 2 {
        0.0
    } else {
        let ss: f64 = samples.iter().map(|x| (x - mean) * (x - mean)).sum();
        (ss / (n - 1.0)).sqrt() / n.sqrt()
    };
    Ok(FidelityStatistic {
        mean,
        std_error,
        samples: samples.len() as u64,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentKind {
    /// Direct fidelity of purified sequence estimates over random pure states.
    SequentialFidelity {
        precision: f64,
        n_grid: Vec<u64>,
        strategy: PurificationStrategy,
    },
    /// Average fidelity from the purity of hypothetical runs.
    HypotheticalPurity { precision: f64, n_grid: Vec<u64> },
    /// Mean purity of conditional-master-equation trajectories from the mixed state.
    ContinuumTrajectory {
        t_grid: Vec<f64>,
        dt: f64,
        integrator: Integrator,
    },
    /// Discrete hypothetical purity and trajectory purity at `t = 12 n / D^2`.
    ContinuumCompare {
        precision: f64,
        n_grid: Vec<u64>,
        dt: f64,
        integrator: Integrator,
    },
    /// One measurement with dominant-eigenstate purification, swept over precision.
    SharpLimit { precision_grid: Vec<f64> },
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::SequentialFidelity { .. } => "sequential-fidelity",
            Self::HypotheticalPurity { .. } => "hypothetical-purity",
            Self::ContinuumTrajectory { .. } => "continuum-trajectory",
            Self::ContinuumCompare { .. } => "continuum-compare",
            Self::SharpLimit { .. } => "sharp-limit",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub trials: u64,
    pub seed: u64,
}

fn check_sorted<T: PartialOrd + Copy>(grid: &[T], what: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidInput(format!("{what} grid is empty")));
    }
    if grid.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::InvalidInput(format!("{what} grid is not sorted ascending")));
    }
    Ok(())
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidInput("trials must be at least 1".into()));
        }
        if self.trials >= 1 << 32 {
            return Err(Error::InvalidInput("trials must be below 2^32".into()));
        }
        match &self.kind {
            ExperimentKind::SequentialFidelity { precision, n_grid, .. }
            | ExperimentKind::HypotheticalPurity { precision, n_grid } => {
                MeasurementSettings::new(*precision)?;
                check_sorted(n_grid, "step")
            }
            ExperimentKind::ContinuumTrajectory { t_grid, dt, .. } => {
                check_step(*dt)?;
                check_sorted(t_grid, "time")?;
                if t_grid.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
                    return Err(Error::Domain("times must be finite and nonnegative".into()));
                }
                Ok(())
            }
            ExperimentKind::ContinuumCompare { precision, n_grid, dt, .. } => {
                let settings = MeasurementSettings::new(*precision)?;
                check_step(*dt)?;
                // coarse-graining guard: at least ten SDE steps per discrete measurement
                let rate = crate::continuous::TimeMapping::new(&settings).rate();
                if *dt > 1.0 / (10.0 * rate) {
                    return Err(Error::InvalidStep(*dt));
                }
                settings.check_continuum_advisory();
                check_sorted(n_grid, "step")
            }
            ExperimentKind::SharpLimit { precision_grid } => {
                for d in precision_grid {
                    MeasurementSettings::new(*d)?;
                }
                check_sorted(precision_grid, "precision")
            }
        }
    }
}

fn check_step(dt: f64) -> Result<()> {
    if !(dt > 0.0) || dt > crate::continuous::DEFAULT_DT_MAX {
        return Err(Error::InvalidStep(dt));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    /// Step count, time or precision depending on the experiment kind.
    pub grid: f64,
    pub mean: f64,
    pub std_error: f64,
    pub samples: u64,
    /// Closed-form value at this grid point, when the kind has one.
    pub reference: Option<f64>,
}

impl GridPoint {
    fn new(grid: f64, stat: FidelityStatistic, reference: Option<f64>) -> Self {
        Self {
            grid,
            mean: stat.mean,
            std_error: stat.std_error,
            samples: stat.samples,
            reference,
        }
    }

    pub fn statistic(&self) -> FidelityStatistic {
        FidelityStatistic {
            mean: self.mean,
            std_error: self.std_error,
            samples: self.samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<GridPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStatistics {
    pub kind: &'static str,
    pub series: Vec<Series>,
}

impl EnsembleStatistics {
    pub fn series(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }
}

/// Sharp-limit reference for one measurement with dominant-eigenstate purification:
/// the dominant eigenstate is `sign(s) n`, which gives `1/2 + erf(1 / (sqrt(2) D)) / 6`.
pub fn single_dominant_fidelity(precision: f64) -> f64 {
    0.5 + libm::erf(1.0 / (std::f64::consts::SQRT_2 * precision)) / 6.0
}

/// Runs `trials` closures in parallel, keeping results in trial order. The first failing
/// trial (by index) aborts the experiment.
fn fan_out<T, F>(trials: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    let results: Vec<Result<T>> = (0..trials).into_par_iter().map(&f).collect();
    results
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| match e {
                Error::Trial { .. } => e,
                other => Error::Trial {
                    index: i as u64,
                    source: Box::new(other),
                },
            })
        })
        .collect()
}

fn column(rows: &[Vec<f64>], j: usize) -> Vec<f64> {
    rows.iter().map(|r| r[j]).collect()
}

fn stepper_purities(
    seed: u64,
    index: u64,
    dt: f64,
    integrator: Integrator,
    times: &[f64],
) -> Result<Vec<f64>> {
    let mut rng = derive_stream(seed, index);
    let mut stepper = TrajectoryStepper::new(DensityMatrix::maximally_mixed(), dt, integrator, false)?;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let target = (t / dt).round() as u64;
        while stepper.steps() < target {
            stepper.step(&mut rng)?;
        }
        out.push(stepper.snapshot().state.purity());
    }
    Ok(out)
}

/// Runs the experiment on the current rayon pool.
pub fn run_ensemble(spec: &ExperimentSpec) -> Result<EnsembleStatistics> {
    spec.validate()?;
    let seed = spec.seed;
    let trials = spec.trials;
    let series = match &spec.kind {
        ExperimentKind::SequentialFidelity { precision, n_grid, strategy } => {
            let settings = MeasurementSettings::new(*precision)?;
            let mut points = Vec::with_capacity(n_grid.len());
            for (g, &n) in n_grid.iter().enumerate() {
                let values = fan_out(trials, |t| {
                    let mut rng = derive_stream(seed, stream_index(0, g as u64, t));
                    sequential::direct_fidelity_sample(&settings, n as usize, *strategy, &mut rng)
                })?;
                let reference = mean_fidelity_closed_form(n as f64, &settings)?;
                points.push(GridPoint::new(n as f64, summarize(&values)?, Some(reference)));
            }
            vec![Series { name: "direct".into(), points }]
        }
        ExperimentKind::HypotheticalPurity { precision, n_grid } => {
            let settings = MeasurementSettings::new(*precision)?;
            let mut points = Vec::with_capacity(n_grid.len());
            for (g, &n) in n_grid.iter().enumerate() {
                let values = fan_out(trials, |t| {
                    let mut rng = derive_stream(seed, stream_index(1, g as u64, t));
                    sequential::purity_fidelity_sample(&settings, n as usize, &mut rng)
                })?;
                let reference = mean_fidelity_closed_form(n as f64, &settings)?;
                points.push(GridPoint::new(n as f64, summarize(&values)?, Some(reference)));
            }
            vec![Series { name: "purity".into(), points }]
        }
        ExperimentKind::ContinuumTrajectory { t_grid, dt, integrator } => {
            let rows = fan_out(trials, |t| stepper_purities(seed, stream_index(2, 0, t), *dt, *integrator, t_grid))?;
            let points = t_grid
                .iter()
                .enumerate()
                .map(|(j, &t)| Ok(GridPoint::new(t, summarize(&column(&rows, j))?, Some(drift_purity(t)?))))
                .collect::<Result<Vec<_>>>()?;
            vec![Series { name: "sde".into(), points }]
        }
        ExperimentKind::ContinuumCompare { precision, n_grid, dt, integrator } => {
            let settings = MeasurementSettings::new(*precision)?;
            let times = n_grid
                .iter()
                .map(|&n| time_from_steps(n as f64, &settings))
                .collect::<Result<Vec<_>>>()?;

            let discrete_rows = fan_out(trials, |t| {
                let mut rng = derive_stream(seed, stream_index(3, 0, t));
                let mut runner = SequenceRunner::new(DensityMatrix::maximally_mixed(), settings);
                let mut out = Vec::with_capacity(n_grid.len());
                for &n in n_grid {
                    while (runner.steps() as u64) < n {
                        runner.step(&mut rng)?;
                    }
                    out.push(runner.current().purity());
                }
                Ok(out)
            })?;
            let sde_rows = fan_out(trials, |t| stepper_purities(seed, stream_index(4, 0, t), *dt, *integrator, &times))?;

            let build = |rows: &[Vec<f64>]| -> Result<Vec<GridPoint>> {
                times
                    .iter()
                    .enumerate()
                    .map(|(j, &t)| Ok(GridPoint::new(t, summarize(&column(rows, j))?, Some(drift_purity(t)?))))
                    .collect()
            };
            vec![
                Series { name: "discrete".into(), points: build(&discrete_rows)? },
                Series { name: "sde".into(), points: build(&sde_rows)? },
            ]
        }
        ExperimentKind::SharpLimit { precision_grid } => {
            let mut points = Vec::with_capacity(precision_grid.len());
            for (g, &d) in precision_grid.iter().enumerate() {
                let settings = MeasurementSettings::new(d)?;
                let values = fan_out(trials, |t| {
                    let mut rng = derive_stream(seed, stream_index(5, g as u64, t));
                    sequential::direct_fidelity_sample(&settings, 1, PurificationStrategy::DominantEigenstate, &mut rng)
                })?;
                points.push(GridPoint::new(d, summarize(&values)?, Some(single_dominant_fidelity(d))));
            }
            vec![Series { name: "dominant".into(), points }]
        }
    };
    Ok(EnsembleStatistics {
        kind: spec.kind.name(),
        series,
    })
}

/// [`run_ensemble`] on a dedicated pool of `workers` threads.
pub fn run_ensemble_with_workers(spec: &ExperimentSpec, workers: usize) -> Result<EnsembleStatistics> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot build worker pool: {e}")))?;
    pool.install(|| run_ensemble(spec))
}
