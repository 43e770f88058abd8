//! Continuum limit of the measurement sequence.
//!
//! The conditional state obeys the Itô equation
//!
//! ```text
//! d rho = -1/2 sum_i [s_i, [s_i, rho]] dt + sum_i {s_i - <s_i>, rho} dW_i
//! ```
//!
//! with record `dy = <s> dt + dW / 2`. In Bloch coordinates this reads
//! `dr = -4 r dt + 2 (dW - r (r.dW))`, and `u = |r|^2` has drift `4 (1 - u)(3 - u)`.
//!
//! Two one-step schemes are provided. [`sme_step`] is the Euler-Maruyama update of the
//! matrix equation followed by trace renormalization and projection into the Bloch ball;
//! [`bloch_sde_step`] is the same update in Bloch form. [`measurement_operator_step`]
//! applies `M rho M / tr` with a Hermitian measurement operator built from the record
//! increment; it is first-order consistent with the same equation and maps pure states to
//! pure states exactly, which the projected Euler-Maruyama scheme does not.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::povm::MeasurementSettings;
use crate::qubit::{axpy, dot, scale, DensityMatrix, GeneralOperator, Vec3};
use crate::{Error, Result};

pub const DEFAULT_DT: f64 = 1e-4;
pub const DEFAULT_DT_MAX: f64 = 1e-3;

/// Discrete step count to continuous time at the rate `12 / D^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeMapping {
    precision: f64,
}

impl TimeMapping {
    pub fn new(settings: &MeasurementSettings) -> Self {
        Self {
            precision: settings.precision(),
        }
    }

    pub fn rate(&self) -> f64 {
        12.0 / (self.precision * self.precision)
    }

    pub fn time(&self, steps: f64) -> f64 {
        12.0 * steps / (self.precision * self.precision)
    }

    /// Inverse of [`TimeMapping::time`]; not rounded.
    pub fn steps(&self, time: f64) -> f64 {
        time * self.precision * self.precision / 12.0
    }
}

/// `t = 12 n / D^2`.
pub fn time_from_steps(n: f64, settings: &MeasurementSettings) -> Result<f64> {
    if !(n >= 0.0) {
        return Err(Error::Domain(format!("step count must be nonnegative, got {n}")));
    }
    Ok(TimeMapping::new(settings).time(n))
}

// u(t) = (e^{8t} - 1) / (e^{8t} - 1/3), written to stay finite for large t
fn drift_bloch_norm_sq(t: f64) -> f64 {
    1.0 / (1.0 + (2.0 / 3.0) / (8.0 * t).exp_m1())
}

/// Purity from the drift term alone, starting at the maximally mixed state:
/// `1/2 + 1/2 (e^{8t} - 1) / (e^{8t} - 1/3)`.
pub fn drift_purity(t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("time must be nonnegative, got {t}")));
    }
    Ok(0.5 + 0.5 * drift_bloch_norm_sq(t))
}

/// `1/2 + 1/6 (e^{96 n / D^2} - 1) / (e^{96 n / D^2} - 1/3)`.
pub fn mean_fidelity_closed_form(n: f64, settings: &MeasurementSettings) -> Result<f64> {
    if !(n >= 0.0) {
        return Err(Error::Domain(format!("step count must be nonnegative, got {n}")));
    }
    let d = settings.precision();
    let x = 96.0 * n / (d * d);
    Ok(0.5 + (1.0 / 6.0) / (1.0 + (2.0 / 3.0) / x.exp_m1()))
}

/// Wiener increment for one step, each component `N(0, dt)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseIncrement {
    pub dw: Vec3,
}

impl NoiseIncrement {
    pub fn new(dw: Vec3) -> Self {
        Self { dw }
    }

    pub fn zero() -> Self {
        Self { dw: [0.0; 3] }
    }

    pub fn sample<R: Rng + ?Sized>(dt: f64, rng: &mut R) -> Self {
        let sd = dt.sqrt();
        let mut draw = || sd * rng.sample::<f64, _>(StandardNormal);
        Self {
            dw: [draw(), draw(), draw()],
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dw: scale(&self.dw, factor),
        }
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidStep(dt));
    }
    Ok(())
}

/// Euler-Maruyama update of the matrix equation, renormalized to unit trace but not
/// projected. The result may leave the Bloch ball by O(dt).
pub fn sme_step_unprojected(state: &DensityMatrix, dt: f64, noise: &NoiseIncrement) -> Result<Vec3> {
    check_dt(dt)?;
    let rho = state.to_operator();
    let mean = state.expectation();
    let mut next = rho;
    for i in 0..3 {
        let s = GeneralOperator::pauli(i);
        let double = s.commutator(&s.commutator(&rho));
        let centred = s - GeneralOperator::identity().scale_real(mean[i]);
        next = next + double.scale_real(-0.5 * dt) + centred.anticommutator(&rho).scale_real(noise.dw[i]);
    }
    let trace_half = next.c0.re;
    Ok(next.c.map(|c| c.re / trace_half))
}

/// [`sme_step_unprojected`] followed by projection into the Bloch ball.
pub fn sme_step(state: &DensityMatrix, dt: f64, noise: &NoiseIncrement) -> Result<DensityMatrix> {
    Ok(DensityMatrix::project_into_ball(sme_step_unprojected(state, dt, noise)?))
}

/// `dr = -4 r dt + 2 (dW - r (r.dW))`.
pub fn bloch_sde_increment(r: &Vec3, dt: f64, noise: &NoiseIncrement) -> Result<Vec3> {
    check_dt(dt)?;
    let proj = dot(r, &noise.dw);
    let diffusion = axpy(-proj, r, &noise.dw);
    Ok(axpy(-4.0 * dt, r, &scale(&diffusion, 2.0)))
}

/// Euler-Maruyama step in Bloch form, projected into the ball like [`sme_step`].
pub fn bloch_sde_step(r: &Vec3, dt: f64, noise: &NoiseIncrement) -> Result<Vec3> {
    let dr = bloch_sde_increment(r, dt, noise)?;
    Ok(DensityMatrix::project_into_ball(axpy(1.0, &dr, r)).bloch())
}

/// `rho -> M rho M / tr` with `M = (1 - 3 dt + |dY|^2 / 2) + dY.s` and
/// `dY = 2 <s> dt + dW`.
pub fn measurement_operator_step(state: &DensityMatrix, dt: f64, noise: &NoiseIncrement) -> Result<DensityMatrix> {
    check_dt(dt)?;
    let r = state.bloch();
    let dy = axpy(2.0 * dt, &r, &noise.dw);
    let m = GeneralOperator::from_real(1.0 - 3.0 * dt + 0.5 * dot(&dy, &dy), dy);
    let next = m * state.to_operator() * m;
    let trace_half = next.c0.re;
    if !(trace_half > 0.0) {
        return Err(Error::InvalidState(format!(
            "measurement operator step produced trace {}",
            2.0 * trace_half
        )));
    }
    Ok(DensityMatrix::project_into_ball(next.c.map(|c| c.re / trace_half)))
}

/// `dy = <s> dt + dW / 2`, using the same increment as the concurrent state step.
pub fn record_increment(state: &DensityMatrix, dt: f64, noise: &NoiseIncrement) -> Vec3 {
    axpy(dt, &state.expectation(), &scale(&noise.dw, 0.5))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Integrator {
    /// Projected Euler-Maruyama, [`sme_step`].
    EulerMaruyama,
    /// Purity-preserving [`measurement_operator_step`].
    #[default]
    MeasurementOperator,
}

impl Integrator {
    pub fn step(&self, state: &DensityMatrix, dt: f64, noise: &NoiseIncrement) -> Result<DensityMatrix> {
        match self {
            Self::EulerMaruyama => sme_step(state, dt, noise),
            Self::MeasurementOperator => measurement_operator_step(state, dt, noise),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::EulerMaruyama => "euler-maruyama",
            Self::MeasurementOperator => "measurement-operator",
        }
    }
}

impl std::str::FromStr for Integrator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler-maruyama" | "em" => Ok(Self::EulerMaruyama),
            "measurement-operator" | "kraus" => Ok(Self::MeasurementOperator),
            other => Err(Error::InvalidInput(format!("unknown integrator {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryState {
    pub state: DensityMatrix,
    pub time: f64,
    /// Accumulated record `int dy`, when requested.
    pub record: Option<Vec3>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryConfig {
    pub t_max: f64,
    pub dt: f64,
    pub dt_max: f64,
    /// Emit every `stride`-th step (the initial and final states are always emitted).
    pub stride: usize,
    pub emit_record: bool,
    pub integrator: Integrator,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            t_max: 1.0,
            dt: DEFAULT_DT,
            dt_max: DEFAULT_DT_MAX,
            stride: 1,
            emit_record: false,
            integrator: Integrator::default(),
        }
    }
}

impl TrajectoryConfig {
    pub fn validate(&self) -> Result<()> {
        check_dt(self.dt)?;
        if self.dt > self.dt_max {
            return Err(Error::InvalidStep(self.dt));
        }
        if !(self.t_max > 0.0) || !self.t_max.is_finite() {
            return Err(Error::Domain(format!("t_max must be positive, got {}", self.t_max)));
        }
        if self.stride == 0 {
            return Err(Error::InvalidInput("output stride must be at least 1".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> u64 {
        ((self.t_max / self.dt).round() as u64).max(1)
    }
}

/// Single trajectory advanced one step at a time. Time is `steps * dt`.
#[derive(Debug, Clone)]
pub struct TrajectoryStepper {
    state: DensityMatrix,
    steps: u64,
    dt: f64,
    record: Option<Vec3>,
    integrator: Integrator,
}

impl TrajectoryStepper {
    pub fn new(initial: DensityMatrix, dt: f64, integrator: Integrator, emit_record: bool) -> Result<Self> {
        check_dt(dt)?;
        Ok(Self {
            state: initial,
            steps: 0,
            dt,
            record: emit_record.then_some([0.0; 3]),
            integrator,
        })
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let noise = NoiseIncrement::sample(self.dt, rng);
        if let Some(acc) = self.record.as_mut() {
            let dy = record_increment(&self.state, self.dt, &noise);
            *acc = axpy(1.0, &dy, acc);
        }
        self.state = self.integrator.step(&self.state, self.dt, &noise)?;
        self.steps += 1;
        Ok(())
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn snapshot(&self) -> TrajectoryState {
        TrajectoryState {
            state: self.state,
            time: self.time(),
            record: self.record,
        }
    }
}

/// Integrates from `initial` to `t_max`, emitting states at the configured stride.
pub fn simulate_trajectory<R: Rng + ?Sized>(
    initial: &DensityMatrix,
    config: &TrajectoryConfig,
    rng: &mut R,
) -> Result<Vec<TrajectoryState>> {
    config.validate()?;
    let total = config.steps();
    let mut stepper = TrajectoryStepper::new(*initial, config.dt, config.integrator, config.emit_record)?;
    let mut out = Vec::with_capacity((total as usize) / config.stride + 2);
    out.push(stepper.snapshot());
    while stepper.steps() < total {
        stepper.step(rng)?;
        if stepper.steps() % config.stride as u64 == 0 || stepper.steps() == total {
            out.push(stepper.snapshot());
        }
    }
    Ok(out)
}
