//! Gaussian unsharp measurement of a polarization `n.sigma`.
//!
//! The effect for outcome `s` weights the two eigenprojectors of `n.sigma` by Gaussian
//! densities centred on the eigenvalues:
//!
//! ```text
//! Pi(s) = g(s - 1) P+ + g(s + 1) P-,    g(x) = exp(-x^2 / 2D^2) / sqrt(2 pi D^2)
//! ```
//!
//! For `|s| >> D` both weights underflow while their ratio stays well conditioned, so
//! every consumer works from the log-weights.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::qubit::{self, axpy, dot, scale, DensityMatrix, GeneralOperator, MeasurementAxis};
use crate::{Error, Result};

/// Precision below which the continuum description is not expected to hold.
pub const DEFAULT_CONTINUUM_ADVISORY: f64 = 9.797_958_971_132_712; // sqrt(96)

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementSettings {
    precision: f64,
    continuum_advisory: f64,
}

impl MeasurementSettings {
    /// `precision` is the standard deviation of the Gaussian smearing, in units of the
    /// polarization eigenvalues.
    pub fn new(precision: f64) -> Result<Self> {
        if !(precision > 0.0) || !precision.is_finite() {
            return Err(Error::InvalidSettings(format!(
                "precision must be positive and finite, got {precision}"
            )));
        }
        Ok(Self {
            precision,
            continuum_advisory: DEFAULT_CONTINUUM_ADVISORY,
        })
    }

    pub fn with_continuum_advisory(mut self, threshold: f64) -> Self {
        self.continuum_advisory = threshold;
        self
    }

    pub fn precision(&self) -> f64 {
        self.precision
    }

    pub fn continuum_advisory(&self) -> f64 {
        self.continuum_advisory
    }

    /// Logs a warning and returns `false` when the precision is below the advisory
    /// threshold for continuum-limit use. Never an error.
    pub fn check_continuum_advisory(&self) -> bool {
        let ok = self.precision >= self.continuum_advisory;
        if !ok {
            log::warn!(
                "precision {} is below the continuum-limit advisory {}",
                self.precision,
                self.continuum_advisory
            );
        }
        ok
    }

    /// `ln g(x)` for the Gaussian kernel of this precision.
    pub fn log_kernel(&self, x: f64) -> f64 {
        let var = self.precision * self.precision;
        -0.5 * (2.0 * std::f64::consts::PI * var).ln() - x * x / (2.0 * var)
    }

    pub fn kernel(&self, x: f64) -> f64 {
        self.log_kernel(x).exp()
    }
}

/// One POVM element `Pi(s)` in spectral form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianEffect {
    pub axis: MeasurementAxis,
    pub outcome: f64,
    pub precision: f64,
    /// `g(s - 1)`, may underflow to zero; see `log_weight_plus`.
    pub weight_plus: f64,
    /// `g(s + 1)`, may underflow to zero; see `log_weight_minus`.
    pub weight_minus: f64,
    pub log_weight_plus: f64,
    pub log_weight_minus: f64,
}

impl GaussianEffect {
    /// Half the log-weight difference, `(ln g+ - ln g-) / 2 = s / D^2`.
    pub fn half_log_ratio(&self) -> f64 {
        0.5 * (self.log_weight_plus - self.log_weight_minus)
    }

    /// Dense operator `g+ P+ + g- P-`, in linear scale.
    pub fn operator(&self) -> GeneralOperator {
        let n = self.axis.direction();
        GeneralOperator::from_real(
            0.5 * (self.weight_plus + self.weight_minus),
            scale(&n, 0.5 * (self.weight_plus - self.weight_minus)),
        )
    }

    /// Spectral square root `Pi^(1/2)` split as `(B, ln c)` with `Pi^(1/2) = c B` and the
    /// larger branch of `B` equal to 1.
    pub fn sqrt_operator_scaled(&self) -> (GeneralOperator, f64) {
        let half_plus = 0.5 * self.log_weight_plus;
        let half_minus = 0.5 * self.log_weight_minus;
        let top = half_plus.max(half_minus);
        let a = (half_plus - top).exp();
        let b = (half_minus - top).exp();
        let n = self.axis.direction();
        (
            GeneralOperator::from_real(0.5 * (a + b), scale(&n, 0.5 * (a - b))),
            top,
        )
    }
}

/// Builds `Pi(s)` along `axis`.
pub fn make_effect(
    axis: MeasurementAxis,
    settings: &MeasurementSettings,
    outcome: f64,
) -> Result<GaussianEffect> {
    if !outcome.is_finite() {
        return Err(Error::InvalidInput(format!("outcome {outcome} is not finite")));
    }
    let log_weight_plus = settings.log_kernel(outcome - 1.0);
    let log_weight_minus = settings.log_kernel(outcome + 1.0);
    Ok(GaussianEffect {
        axis,
        outcome,
        precision: settings.precision(),
        weight_plus: log_weight_plus.exp(),
        weight_minus: log_weight_minus.exp(),
        log_weight_plus,
        log_weight_minus,
    })
}

/// Truncated trapezoid rule on `[lower, upper]` with `nodes` points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub lower: f64,
    pub upper: f64,
    pub nodes: usize,
}

impl QuadratureSpec {
    /// `[-1 - k D, 1 + k D]`.
    pub fn around_eigenvalues(settings: &MeasurementSettings, half_width: f64, nodes: usize) -> Self {
        let reach = 1.0 + half_width * settings.precision();
        Self {
            lower: -reach,
            upper: reach,
            nodes,
        }
    }

    /// Nodes with their trapezoid weights.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let n = self.nodes.max(2);
        let h = (self.upper - self.lower) / (n - 1) as f64;
        (0..n).map(move |k| {
            let w = if k == 0 || k == n - 1 { 0.5 * h } else { h };
            (self.lower + k as f64 * h, w)
        })
    }
}

/// Max-norm deviation of the quadrature of `Pi(s) ds` from the identity.
pub fn completeness_defect(
    axis: MeasurementAxis,
    settings: &MeasurementSettings,
    quadrature: &QuadratureSpec,
) -> f64 {
    let mut c0 = 0.0;
    let mut c = [0.0; 3];
    for (s, w) in quadrature.points() {
        let g_plus = settings.kernel(s - 1.0);
        let g_minus = settings.kernel(s + 1.0);
        c0 += w * 0.5 * (g_plus + g_minus);
        c = axpy(w * 0.5 * (g_plus - g_minus), &axis.direction(), &c);
    }
    (GeneralOperator::from_real(c0, c) - GeneralOperator::identity()).max_abs_entry()
}

/// The outcome law `p(s) = p+ g(s - 1) + p- g(s + 1)` of a state along an axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeDistribution {
    pub weight_plus_branch: f64,
    pub weight_minus_branch: f64,
    pub precision: f64,
}

impl OutcomeDistribution {
    pub fn new(state: &DensityMatrix, axis: &MeasurementAxis, settings: &MeasurementSettings) -> Self {
        let p_plus = (0.5 * (1.0 + dot(&axis.direction(), &state.bloch()))).clamp(0.0, 1.0);
        Self {
            weight_plus_branch: p_plus,
            weight_minus_branch: 1.0 - p_plus,
            precision: settings.precision(),
        }
    }

    pub fn density(&self, s: f64) -> f64 {
        let var = self.precision * self.precision;
        let norm = 1.0 / (2.0 * std::f64::consts::PI * var).sqrt();
        let g = |x: f64| norm * (-x * x / (2.0 * var)).exp();
        self.weight_plus_branch * g(s - 1.0) + self.weight_minus_branch * g(s + 1.0)
    }

    pub fn cdf(&self, s: f64) -> f64 {
        let phi = |x: f64| 0.5 * libm::erfc(-x / (self.precision * std::f64::consts::SQRT_2));
        self.weight_plus_branch * phi(s - 1.0) + self.weight_minus_branch * phi(s + 1.0)
    }

    pub fn mean(&self) -> f64 {
        self.weight_plus_branch - self.weight_minus_branch
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.precision * self.precision + 1.0 - m * m
    }

    /// Exact two-component mixture sampling.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let center = if rng.random::<f64>() < self.weight_plus_branch { 1.0 } else { -1.0 };
        let z: f64 = rng.sample(StandardNormal);
        center + self.precision * z
    }
}

/// `p(s) = tr[Pi(s) rho]`.
pub fn outcome_density(
    state: &DensityMatrix,
    axis: &MeasurementAxis,
    settings: &MeasurementSettings,
    outcome: f64,
) -> f64 {
    OutcomeDistribution::new(state, axis, settings).density(outcome)
}

pub fn sample_outcome<R: Rng + ?Sized>(
    state: &DensityMatrix,
    axis: &MeasurementAxis,
    settings: &MeasurementSettings,
    rng: &mut R,
) -> f64 {
    OutcomeDistribution::new(state, axis, settings).sample(rng)
}

/// `Pi^(1/2) rho Pi^(1/2) / tr[Pi rho]`, computed in the eigenbasis of the effect: the
/// branch populations are reweighted by `g+-` and the coherences by `sqrt(g+ g-)`.
pub fn posterior_update(state: &DensityMatrix, effect: &GaussianEffect) -> Result<DensityMatrix> {
    let n = effect.axis.direction();
    let r = state.bloch();
    let along = dot(&n, &r);
    let transverse = axpy(-along, &n, &r);
    let p_plus = 0.5 * (1.0 + along);
    let p_minus = 0.5 * (1.0 - along);

    let top = effect.log_weight_plus.max(effect.log_weight_minus);
    let w_plus = p_plus * (effect.log_weight_plus - top).exp();
    let w_minus = p_minus * (effect.log_weight_minus - top).exp();
    let total = w_plus + w_minus;
    if !(total > 0.0) {
        return Err(Error::DegenerateUpdate {
            outcome: effect.outcome,
        });
    }
    let coherence = (0.5 * (effect.log_weight_plus + effect.log_weight_minus) - top).exp() / total;
    let bloch = axpy((w_plus - w_minus) / total, &n, &scale(&transverse, coherence));
    Ok(DensityMatrix::project_into_ball(bloch))
}

/// `Pi(s) / tr Pi(s)`, Bloch vector `n tanh(s / D^2)`.
pub fn single_estimate(effect: &GaussianEffect) -> DensityMatrix {
    DensityMatrix::project_into_ball(scale(&effect.axis.direction(), effect.half_log_ratio().tanh()))
}

/// How a mixed estimate is turned into a pure one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum PurificationStrategy {
    /// An eigenstate drawn with probability equal to its eigenvalue.
    #[default]
    RandomEigenstate,
    /// The eigenstate with the larger eigenvalue.
    DominantEigenstate,
}

impl PurificationStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            Self::RandomEigenstate => "random-eigenstate",
            Self::DominantEigenstate => "dominant-eigenstate",
        }
    }
}

impl std::str::FromStr for PurificationStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random-eigenstate" | "random" => Ok(Self::RandomEigenstate),
            "dominant-eigenstate" | "dominant" => Ok(Self::DominantEigenstate),
            other => Err(Error::InvalidInput(format!("unknown strategy {other:?}"))),
        }
    }
}

/// Picks a pure eigenstate of `mixed`. A degenerate (maximally mixed) input yields a
/// uniformly random pure state under either strategy.
pub fn purify_estimate<R: Rng + ?Sized>(
    mixed: &DensityMatrix,
    strategy: PurificationStrategy,
    rng: &mut R,
) -> DensityMatrix {
    let spectrum = mixed.spectral_decomposition();
    if spectrum.degenerate {
        return qubit::random_pure_state(rng);
    }
    match strategy {
        PurificationStrategy::DominantEigenstate => spectrum.projector_plus,
        PurificationStrategy::RandomEigenstate => {
            if rng.random::<f64>() < spectrum.eigenvalue_plus {
                spectrum.projector_plus
            } else {
                spectrum.projector_minus
            }
        }
    }
}

/// Fidelity of [`purify_estimate`] with `truth`, averaged over the purification's own
/// randomness. For the random strategy this is `tr[mixed truth]` by bilinearity; a
/// uniformly random pure state averages to the maximally mixed state.
pub fn expected_purified_fidelity(
    mixed: &DensityMatrix,
    strategy: PurificationStrategy,
    truth: &DensityMatrix,
) -> f64 {
    let spectrum = mixed.spectral_decomposition();
    if spectrum.degenerate {
        return DensityMatrix::maximally_mixed().fidelity(truth);
    }
    match strategy {
        PurificationStrategy::RandomEigenstate => mixed.fidelity(truth),
        PurificationStrategy::DominantEigenstate => spectrum.projector_plus.fidelity(truth),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubit::{random_axis, random_pure_state};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn settings(delta: f64) -> MeasurementSettings {
        MeasurementSettings::new(delta).unwrap()
    }

    // Plain Gaussian density, independent of the log-space path.
    fn gauss(x: f64, delta: f64) -> f64 {
        (-x * x / (2.0 * delta * delta)).exp() / (2.0 * std::f64::consts::PI * delta * delta).sqrt()
    }

    #[test]
    fn rejects_nonpositive_precision() {
        assert!(matches!(MeasurementSettings::new(0.0), Err(Error::InvalidSettings(_))));
        assert!(matches!(MeasurementSettings::new(-1.0), Err(Error::InvalidSettings(_))));
        assert!(MeasurementSettings::new(f64::NAN).is_err());
    }

    #[test]
    fn advisory_is_a_warning_only() {
        assert!(!settings(1.0).check_continuum_advisory());
        assert!(settings(10.0).check_continuum_advisory());
        assert!(settings(1.0).with_continuum_advisory(0.5).check_continuum_advisory());
    }

    #[test]
    fn effect_weights() {
        let e = make_effect(MeasurementAxis::z(), &settings(1.0), 0.0).unwrap();
        assert_abs_diff_eq!(e.weight_plus, gauss(1.0, 1.0), epsilon = 1e-15);
        assert_abs_diff_eq!(e.weight_plus, 0.241_970_7, epsilon = 1e-7);
        assert_eq!(e.weight_plus, e.weight_minus);

        let e = make_effect(MeasurementAxis::z(), &settings(1.0), 1.0).unwrap();
        assert_abs_diff_eq!(e.weight_plus, 0.398_942_3, epsilon = 1e-7);
        assert_abs_diff_eq!(e.weight_minus, 0.053_991_0, epsilon = 1e-7);

        let axis = random_axis(&mut ChaCha8Rng::seed_from_u64(1));
        let e = make_effect(axis, &settings(1.0), 0.0).unwrap();
        let op = e.operator();
        assert!(op.c.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn log_weights_survive_far_outcomes() {
        let e = make_effect(MeasurementAxis::z(), &settings(1.0), 60.0).unwrap();
        assert_eq!(e.weight_plus, 0.0);
        assert_eq!(e.weight_minus, 0.0);
        assert_abs_diff_eq!(e.half_log_ratio(), 60.0, epsilon = 1e-9);
        let est = single_estimate(&e);
        assert_abs_diff_eq!(est.bloch()[2], 1.0, epsilon = 1e-15);
        let post = posterior_update(&DensityMatrix::maximally_mixed(), &e).unwrap();
        assert_abs_diff_eq!(post.bloch()[2], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn completeness_quadrature() {
        for delta in [0.1, 1.0, 10.0] {
            let s = settings(delta);
            let q = QuadratureSpec::around_eigenvalues(&s, 10.0, 10_000);
            for axis in [MeasurementAxis::z(), MeasurementAxis::x()] {
                let defect = completeness_defect(axis, &s, &q);
                assert!(defect < 1e-9, "delta {delta}: defect {defect}");
            }
        }
        // a too-narrow window must show a visible defect
        let s = settings(1.0);
        let q = QuadratureSpec::around_eigenvalues(&s, 1.0, 10_000);
        assert!(completeness_defect(MeasurementAxis::z(), &s, &q) > 1e-3);
    }

    #[test]
    fn outcome_density_examples() {
        let s = settings(1.0);
        let mixed = DensityMatrix::maximally_mixed();
        let up = DensityMatrix::pure(&MeasurementAxis::z());
        assert_abs_diff_eq!(
            outcome_density(&mixed, &MeasurementAxis::z(), &s, 0.0),
            0.241_970_7,
            epsilon = 1e-7
        );
        assert_abs_diff_eq!(
            outcome_density(&up, &MeasurementAxis::z(), &s, 1.0),
            0.398_942_3,
            epsilon = 1e-7
        );
        for delta in [0.3, 2.0] {
            let s = settings(delta);
            let q = QuadratureSpec::around_eigenvalues(&s, 12.0, 20_000);
            let total: f64 = q
                .points()
                .map(|(x, w)| w * outcome_density(&up, &MeasurementAxis::z(), &s, x))
                .sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
        }
    }

    fn moments(samples: &[f64]) -> (f64, f64) {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn sampling_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 1_000_000;
        let delta = 1.5;
        let s = settings(delta);
        let up = DensityMatrix::pure(&MeasurementAxis::z());
        let draws: Vec<f64> = (0..n).map(|_| sample_outcome(&up, &MeasurementAxis::z(), &s, &mut rng)).collect();
        let (mean, _) = moments(&draws);
        assert!((mean - 1.0).abs() < 3.0 * delta / 1e3);

        let axis = random_axis(&mut rng);
        let draws: Vec<f64> =
            (0..n).map(|_| sample_outcome(&DensityMatrix::maximally_mixed(), &axis, &s, &mut rng)).collect();
        let (mean, var) = moments(&draws);
        let expected_var = delta * delta + 1.0;
        let se_mean = (expected_var / n as f64).sqrt();
        assert!(mean.abs() < 5.0 * se_mean);
        // fourth central moment of the mixture: 3D^4 + 6D^2 + 1
        let m4 = 3.0 * delta.powi(4) + 6.0 * delta * delta + 1.0;
        let se_var = ((m4 - expected_var * expected_var) / n as f64).sqrt();
        assert!((var - expected_var).abs() < 5.0 * se_var, "var {var}");

        let state = DensityMatrix::new([0.3, -0.4, 0.5]).unwrap();
        let axis = MeasurementAxis::new([1.0, 1.0, 1.0]).unwrap();
        let dist = OutcomeDistribution::new(&state, &axis, &s);
        let draws: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
        let (mean, _) = moments(&draws);
        let target = dot(&axis.direction(), &state.bloch());
        assert_abs_diff_eq!(dist.mean(), target, epsilon = 1e-15);
        assert!((mean - target).abs() < 5.0 * (dist.variance() / n as f64).sqrt());
    }

    #[test]
    fn posterior_examples() {
        let s = settings(1.0);
        let state = DensityMatrix::new([0.2, -0.1, 0.4]).unwrap();
        let e0 = make_effect(MeasurementAxis::z(), &s, 0.0).unwrap();
        let post = posterior_update(&state, &e0).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(post.bloch()[i], state.bloch()[i], epsilon = 1e-15);
        }

        let e1 = make_effect(MeasurementAxis::z(), &s, 1.0).unwrap();
        let post = posterior_update(&DensityMatrix::maximally_mixed(), &e1).unwrap();
        let oracle = (gauss(0.0, 1.0) - gauss(2.0, 1.0)) / (gauss(0.0, 1.0) + gauss(2.0, 1.0));
        assert_abs_diff_eq!(post.bloch()[2], oracle, epsilon = 1e-15);
        assert_abs_diff_eq!(post.bloch()[2], 0.761_594_2, epsilon = 1e-7);

        let up = DensityMatrix::pure(&MeasurementAxis::z());
        for sigma in [-3.0, -0.2, 0.7, 4.0] {
            let e = make_effect(MeasurementAxis::z(), &s, sigma).unwrap();
            assert_eq!(posterior_update(&up, &e).unwrap().bloch(), [0.0, 0.0, 1.0]);
        }
    }

    #[test]
    fn posterior_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = settings(0.8);
        for _ in 0..100 {
            let state = DensityMatrix::new(scale(&random_pure_state(&mut rng).bloch(), 0.7)).unwrap();
            let axis = random_axis(&mut rng);
            let e = make_effect(axis, &s, rng.random_range(-2.0..2.0)).unwrap();
            let n = axis.direction();
            let root = GeneralOperator::from_real(
                0.5 * (e.weight_plus.sqrt() + e.weight_minus.sqrt()),
                scale(&n, 0.5 * (e.weight_plus.sqrt() - e.weight_minus.sqrt())),
            );
            let dense = root * state.to_operator() * root;
            let oracle = dense.normalized_state().unwrap();
            let post = posterior_update(&state, &e).unwrap();
            for i in 0..3 {
                assert_abs_diff_eq!(post.bloch()[i], oracle.bloch()[i], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_update_is_reported() {
        let down = DensityMatrix::pure(&MeasurementAxis::new([0.0, 0.0, -1.0]).unwrap());
        let e = make_effect(MeasurementAxis::z(), &settings(0.1), 1e6).unwrap();
        assert!(matches!(posterior_update(&down, &e), Err(Error::DegenerateUpdate { .. })));
    }

    #[test]
    fn expected_update_identity() {
        for delta in [1.0, 3.0] {
            let s = settings(delta);
            let state = DensityMatrix::new([0.3, 0.5, -0.4]).unwrap();
            let axis = MeasurementAxis::z();
            let q = QuadratureSpec::around_eigenvalues(&s, 12.0, 40_000);
            let mut acc = [0.0; 4];
            for (x, w) in q.points() {
                let e = make_effect(axis, &s, x).unwrap();
                let p = outcome_density(&state, &axis, &s, x);
                let post = posterior_update(&state, &e).unwrap();
                // p(s) * posterior = unnormalized back-action, accumulate in Pauli basis
                acc[0] += w * p;
                for i in 0..3 {
                    acc[i + 1] += w * p * post.bloch()[i];
                }
            }
            assert_abs_diff_eq!(acc[0], 1.0, epsilon = 1e-6);
            assert_abs_diff_eq!(acc[3], state.bloch()[2], epsilon = 1e-6);
            let damping = (-1.0 / (2.0 * delta * delta)).exp();
            assert_abs_diff_eq!(acc[1], state.bloch()[0] * damping, epsilon = 1e-6);
            assert_abs_diff_eq!(acc[2], state.bloch()[1] * damping, epsilon = 1e-6);
        }
    }

    #[test]
    fn single_estimate_examples() {
        let s = settings(1.0);
        let e = make_effect(MeasurementAxis::z(), &s, 0.0).unwrap();
        assert_eq!(single_estimate(&e).bloch(), [0.0; 3]);
        let e = make_effect(MeasurementAxis::z(), &s, 1.0).unwrap();
        assert_abs_diff_eq!(single_estimate(&e).bloch()[2], 1f64.tanh(), epsilon = 1e-15);
        let sharp = make_effect(MeasurementAxis::z(), &settings(0.01), 1.0).unwrap();
        assert_abs_diff_eq!(single_estimate(&sharp).purity(), 1.0, epsilon = 1e-15);
        assert!(single_estimate(&sharp).bloch()[2] > 0.0);
    }

    #[test]
    fn purification_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = DensityMatrix::new([0.0, 0.0, 0.6]).unwrap();
        let trials = 100_000;
        let ups = (0..trials)
            .filter(|_| purify_estimate(&m, PurificationStrategy::RandomEigenstate, &mut rng).bloch()[2] > 0.0)
            .count();
        assert!((ups as f64 / trials as f64 - 0.8).abs() < 0.004);
        for _ in 0..100 {
            assert_eq!(
                purify_estimate(&m, PurificationStrategy::DominantEigenstate, &mut rng).bloch(),
                [0.0, 0.0, 1.0]
            );
        }

        for strategy in [PurificationStrategy::RandomEigenstate, PurificationStrategy::DominantEigenstate] {
            let n = 20_000;
            let mut mean = [0.0; 3];
            for _ in 0..n {
                let p = purify_estimate(&DensityMatrix::maximally_mixed(), strategy, &mut rng);
                assert_abs_diff_eq!(p.purity(), 1.0, epsilon = 1e-15);
                for i in 0..3 {
                    mean[i] += p.bloch()[i] / n as f64;
                }
            }
            let se = (1.0 / 3.0 / n as f64).sqrt();
            assert!(mean.iter().all(|m| m.abs() < 5.0 * se), "{mean:?}");
        }
    }

    #[test]
    fn random_purification_is_unbiased_in_fidelity() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..5 {
            let truth = random_pure_state(&mut rng);
            let m = DensityMatrix::new(scale(&random_pure_state(&mut rng).bloch(), 0.55)).unwrap();
            let n = 50_000;
            let samples: Vec<f64> = (0..n)
                .map(|_| purify_estimate(&m, PurificationStrategy::RandomEigenstate, &mut rng).fidelity(&truth))
                .collect();
            let (mean, var) = moments(&samples);
            let se = (var / n as f64).sqrt();
            let exact = expected_purified_fidelity(&m, PurificationStrategy::RandomEigenstate, &truth);
            assert_eq!(exact, m.fidelity(&truth));
            assert!((mean - exact).abs() < 5.0 * se);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn posterior_keeps_pure_states_pure(
                seed in any::<u64>(),
                delta in 0.05..30.0f64,
                sigma in -50.0..50.0f64,
            ) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let state = random_pure_state(&mut rng);
                let e = make_effect(random_axis(&mut rng), &settings(delta), sigma).unwrap();
                if let Ok(post) = posterior_update(&state, &e) {
                    prop_assert!((post.purity() - 1.0).abs() < 1e-12);
                }
            }

            #[test]
            fn single_estimate_is_posterior_of_mixed_state(
                seed in any::<u64>(),
                delta in 0.05..30.0f64,
                sigma in -50.0..50.0f64,
            ) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let e = make_effect(random_axis(&mut rng), &settings(delta), sigma).unwrap();
                let a = single_estimate(&e).bloch();
                let b = posterior_update(&DensityMatrix::maximally_mixed(), &e).unwrap().bloch();
                for i in 0..3 {
                    prop_assert!((a[i] - b[i]).abs() < 1e-12);
                }
            }
        }
    }
}
