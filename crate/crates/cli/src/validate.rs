//! Fast invariant battery behind `unsharp validate`.

use rand::Rng;
use unsharp::continuous::{
    bloch_sde_step, drift_purity, mean_fidelity_closed_form, sme_step, time_from_steps, NoiseIncrement,
};
use unsharp::ensemble::derive_stream;
use unsharp::povm::{completeness_defect, MeasurementSettings, QuadratureSpec};
use unsharp::qubit::{random_axis, random_pure_state, DensityMatrix, MeasurementAxis};
use unsharp::sequential::{replay_hypothetical, run_sequence, spectral_match};
use unsharp::Result;

use crate::table::{Cell, OutputTable};

pub const COMPLETENESS_TOLERANCE: f64 = 1e-9;
pub const SPECTRAL_TOLERANCE: f64 = 1e-9;
pub const PATHWISE_TOLERANCE: f64 = 1e-8;
pub const FD_TOLERANCE: f64 = 1e-6;
pub const IDENTITY_TOLERANCE: f64 = 4.0 * f64::EPSILON;
/// Relative error allowed on the fitted Ito drift and diffusion coefficients of the purity.
pub const ITO_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct ValidateOptions {
    pub deltas: Vec<f64>,
    pub quick: bool,
    pub seed: u64,
    /// Multiplies the noise fed to the matrix-form SDE step. 1 for a healthy build.
    pub noise_fault: f64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            deltas: vec![0.1, 1.0, 10.0],
            quick: false,
            seed: 0,
            noise_fault: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub parameter: String,
    pub value: f64,
    pub threshold: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.value < self.threshold
    }
}

fn mixed(axis: &MeasurementAxis, radius: f64) -> Result<DensityMatrix> {
    DensityMatrix::new(axis.direction().map(|x| radius * x))
}

fn faulty_sme_step(state: &DensityMatrix, dt: f64, noise: &NoiseIncrement, fault: f64) -> Result<DensityMatrix> {
    sme_step(state, dt, &noise.scaled(fault))
}

fn completeness(deltas: &[f64], out: &mut Vec<Check>) -> Result<()> {
    for &delta in deltas {
        let settings = MeasurementSettings::new(delta)?;
        let quad = QuadratureSpec::around_eigenvalues(&settings, 10.0, 10_000);
        let value = [MeasurementAxis::x(), MeasurementAxis::y(), MeasurementAxis::z()]
            .into_iter()
            .map(|axis| completeness_defect(axis, &settings, &quad))
            .fold(0.0, f64::max);
        out.push(Check {
            name: "completeness",
            parameter: format!("delta={delta}"),
            value,
            threshold: COMPLETENESS_TOLERANCE,
        });
    }
    Ok(())
}

fn spectral(opts: &ValidateOptions, out: &mut Vec<Check>) -> Result<()> {
    let (records, n_max) = if opts.quick { (20, 50) } else { (100, 200) };
    for &delta in &opts.deltas {
        let settings = MeasurementSettings::new(delta)?;
        let mut worst = 0.0f64;
        for k in 0..records {
            let mut rng = derive_stream(opts.seed, 1 << 32 | k);
            let truth = random_pure_state(&mut rng);
            let n = rng.random_range(0..=n_max);
            let run = run_sequence(&truth, n, &settings, &mut rng)?;
            let hyp = replay_hypothetical(&run.outcomes, &settings)?;
            worst = worst.max(spectral_match(&run, &hyp)?);
        }
        out.push(Check {
            name: "spectral-match",
            parameter: format!("delta={delta} n<={n_max}"),
            value: worst,
            threshold: SPECTRAL_TOLERANCE,
        });
    }
    Ok(())
}

fn pathwise(opts: &ValidateOptions, out: &mut Vec<Check>) -> Result<()> {
    let dt = 1e-4;
    let mut worst = 0.0f64;
    for path in 0..if opts.quick { 2 } else { 10 } {
        let mut rng = derive_stream(opts.seed, 2 << 32 | path);
        let mut matrix = if path == 0 {
            DensityMatrix::maximally_mixed()
        } else {
            mixed(&random_axis(&mut rng), 0.5)?
        };
        let mut bloch = matrix.bloch();
        for _ in 0..1000 {
            let noise = NoiseIncrement::sample(dt, &mut rng);
            matrix = faulty_sme_step(&matrix, dt, &noise, opts.noise_fault)?;
            bloch = bloch_sde_step(&bloch, dt, &noise)?;
            let r = matrix.bloch();
            for i in 0..3 {
                worst = worst.max((r[i] - bloch[i]).abs());
            }
        }
    }
    out.push(Check {
        name: "bloch-vs-matrix",
        parameter: "1000 steps dt=1e-4".into(),
        value: worst,
        threshold: PATHWISE_TOLERANCE,
    });
    Ok(())
}

/// Fits `du = a (1-u)(3-u) dt + b (1-u) r.dW` over one-step increments of the matrix-form
/// step and reports the larger relative deviation of `a` and `b` from 4.
fn ito_drift(opts: &ValidateOptions, out: &mut Vec<Check>) -> Result<()> {
    let dt = 1e-4;
    let samples = if opts.quick { 20_000 } else { 100_000 };
    let mut rng = derive_stream(opts.seed, 3 << 32);
    let (mut sxx, mut sxy, mut syy, mut sxz, mut syz) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for _ in 0..samples {
        let radius = rng.random_range(0.0..0.95f64).sqrt();
        let state = mixed(&random_axis(&mut rng), radius)?;
        let r = state.bloch();
        let u0 = state.bloch_norm().powi(2);
        let noise = NoiseIncrement::sample(dt, &mut rng);
        let next = faulty_sme_step(&state, dt, &noise, opts.noise_fault)?;
        let du = next.bloch_norm().powi(2) - u0;
        let x = (1.0 - u0) * (3.0 - u0) * dt;
        let y = (1.0 - u0) * (r[0] * noise.dw[0] + r[1] * noise.dw[1] + r[2] * noise.dw[2]);
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
        sxz += x * du;
        syz += y * du;
    }
    let det = sxx * syy - sxy * sxy;
    let a = (sxz * syy - syz * sxy) / det;
    let b = (syz * sxx - sxz * sxy) / det;
    out.push(Check {
        name: "ito-drift",
        parameter: format!("{samples} increments"),
        value: (a / 4.0 - 1.0).abs().max((b / 4.0 - 1.0).abs()),
        threshold: ITO_TOLERANCE,
    });
    Ok(())
}

fn closed_forms(out: &mut Vec<Check>) -> Result<()> {
    let u = |t: f64| drift_purity(t).map(|p| 2.0 * p - 1.0);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for k in 0..=100 {
        let t = 0.01 + 0.99 * k as f64 / 100.0;
        let fd = (u(t + h)? - u(t - h)?) / (2.0 * h);
        let ut = u(t)?;
        let rhs = 4.0 * (1.0 - ut) * (3.0 - ut);
        worst = worst.max(((fd - rhs) / rhs).abs());
    }
    out.push(Check {
        name: "drift-ode",
        parameter: "t in [0.01, 1]".into(),
        value: worst,
        threshold: FD_TOLERANCE,
    });

    let mut worst = 0.0f64;
    for delta in [1.0, 7.5, 20.0, 30.0] {
        let settings = MeasurementSettings::new(delta)?;
        for n in [0.0, 0.3, 1.0, 2.0, 5.0, 40.0, 1e3] {
            let lhs = mean_fidelity_closed_form(n, &settings)?;
            let rhs = 1.0 / 3.0 + drift_purity(time_from_steps(n, &settings)?)? / 3.0;
            worst = worst.max((lhs - rhs).abs());
        }
    }
    out.push(Check {
        name: "saturation-identity",
        parameter: "delta in {1, 7.5, 20, 30}".into(),
        value: worst,
        threshold: IDENTITY_TOLERANCE,
    });
    Ok(())
}

pub fn run_checks(opts: &ValidateOptions) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    completeness(&opts.deltas, &mut checks)?;
    spectral(opts, &mut checks)?;
    pathwise(opts, &mut checks)?;
    ito_drift(opts, &mut checks)?;
    closed_forms(&mut checks)?;
    Ok(checks)
}

pub fn table(checks: &[Check]) -> OutputTable {
    let mut t = OutputTable::new(vec!["check", "parameter", "value", "threshold", "status"]);
    for c in checks {
        t.rows.push(vec![
            c.name.into(),
            Cell::Text(c.parameter.clone()),
            c.value.into(),
            c.threshold.into(),
            if c.passed() { "pass" } else { "FAIL" }.into(),
        ]);
    }
    t
}
