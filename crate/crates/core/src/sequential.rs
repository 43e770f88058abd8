//! Sequences of unsharp measurements along independent random axes.
//!
//! The whole sequence is one measurement with POVM element `E = A^dagger A`, where
//! `A = Pi_n^(1/2) ... Pi_1^(1/2)`. Its normalized form is the sequence estimate. The same
//! outcome record replayed from the maximally mixed state produces `A A^dagger / tr`, which
//! shares the spectrum of the estimate; the purity-based fidelity estimator rests on that.

use rand::Rng;

use crate::ensemble::summarize;
use crate::povm::{
    self, expected_purified_fidelity, make_effect, posterior_update, GaussianEffect,
    MeasurementSettings, PurificationStrategy,
};
use crate::qubit::{random_axis, random_pure_state, DensityMatrix, GeneralOperator, MeasurementAxis};
use crate::{Error, Result};

/// Minimum purity accepted for the true state of a fidelity experiment.
pub const PURE_STATE_TOLERANCE: f64 = 1e-9;

/// Product of effect square roots, kept at unit largest singular value with the
/// discarded scale in `log_norm`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChain {
    operator: GeneralOperator,
    log_norm: f64,
    len: usize,
}

impl Default for KrausChain {
    fn default() -> Self {
        Self::new()
    }
}

impl KrausChain {
    pub fn new() -> Self {
        Self {
            operator: GeneralOperator::identity(),
            log_norm: 0.0,
            len: 0,
        }
    }

    /// Unit-normalized `A`.
    pub fn operator(&self) -> &GeneralOperator {
        &self.operator
    }

    /// `A_true = exp(log_norm) * operator`.
    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Left-multiplies `Pi^(1/2)(s)` onto `A` and renormalizes.
    pub fn append(&mut self, effect: &GaussianEffect) -> Result<()> {
        let (root, log_scale) = effect.sqrt_operator_scaled();
        let product = root * self.operator;
        let top = product.max_singular_value();
        if !(top > 0.0) || !top.is_finite() {
            return Err(Error::DegenerateUpdate {
                outcome: effect.outcome,
            });
        }
        self.operator = product.scale_real(1.0 / top);
        self.log_norm += log_scale + top.ln();
        self.len += 1;
        Ok(())
    }

    /// `ln tr[A^dagger A]` including the factored-out scale.
    pub fn log_trace(&self) -> f64 {
        let (h0, _) = self.operator.gram();
        (2.0 * h0).ln() + 2.0 * self.log_norm
    }

    /// `A^dagger A / tr[A^dagger A]`.
    pub fn estimate(&self) -> DensityMatrix {
        let (h0, h) = self.operator.gram();
        DensityMatrix::project_into_ball(h.map(|x| x / h0))
    }

    /// `A A^dagger / tr[A A^dagger]`, the state the chain prepares from the mixed state.
    pub fn hypothetical_state(&self) -> DensityMatrix {
        let g = self.operator * self.operator.adjoint();
        DensityMatrix::project_into_ball(g.c.map(|x| x.re / g.c0.re))
    }
}

/// Free-function form of [`KrausChain::estimate`].
pub fn sequence_estimate(chain: &KrausChain) -> DensityMatrix {
    chain.estimate()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub axis: MeasurementAxis,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceResult {
    pub outcomes: Vec<Outcome>,
    /// Conditional state of the measured system after the last step.
    pub aposteriori: DensityMatrix,
    pub chain: KrausChain,
    /// Normalized sequence POVM element.
    pub estimate: DensityMatrix,
}

/// Incremental form of [`run_sequence`], for callers that sample along the way.
#[derive(Debug, Clone)]
pub struct SequenceRunner {
    settings: MeasurementSettings,
    current: DensityMatrix,
    chain: KrausChain,
    outcomes: Vec<Outcome>,
}

impl SequenceRunner {
    pub fn new(initial: DensityMatrix, settings: MeasurementSettings) -> Self {
        Self {
            settings,
            current: initial,
            chain: KrausChain::new(),
            outcomes: Vec::new(),
        }
    }

    /// Measures along a fresh random axis with an outcome drawn from the current state.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let axis = random_axis(rng);
        let sigma = povm::sample_outcome(&self.current, &axis, &self.settings, rng);
        self.apply(Outcome { axis, sigma })
    }

    /// Applies a given outcome without sampling.
    pub fn apply(&mut self, outcome: Outcome) -> Result<()> {
        let effect = make_effect(outcome.axis, &self.settings, outcome.sigma)?;
        self.current = posterior_update(&self.current, &effect)?;
        self.chain.append(&effect)?;
        self.outcomes.push(outcome);
        Ok(())
    }

    pub fn current(&self) -> &DensityMatrix {
        &self.current
    }

    pub fn steps(&self) -> usize {
        self.outcomes.len()
    }

    pub fn finish(self) -> SequenceResult {
        let estimate = self.chain.estimate();
        SequenceResult {
            outcomes: self.outcomes,
            aposteriori: self.current,
            chain: self.chain,
            estimate,
        }
    }
}

/// Runs `n` unsharp measurements on `true_state`.
pub fn run_sequence<R: Rng + ?Sized>(
    true_state: &DensityMatrix,
    n: usize,
    settings: &MeasurementSettings,
    rng: &mut R,
) -> Result<SequenceResult> {
    let mut runner = SequenceRunner::new(*true_state, *settings);
    for _ in 0..n {
        runner.step(rng)?;
    }
    Ok(runner.finish())
}

/// [`run_sequence`] from the maximally mixed state; outcomes follow `tr Pi / 2`.
pub fn hypothetical_run<R: Rng + ?Sized>(
    n: usize,
    settings: &MeasurementSettings,
    rng: &mut R,
) -> Result<SequenceResult> {
    run_sequence(&DensityMatrix::maximally_mixed(), n, settings, rng)
}

/// Re-applies a recorded outcome list starting from `initial`.
pub fn replay(
    initial: &DensityMatrix,
    outcomes: &[Outcome],
    settings: &MeasurementSettings,
) -> Result<SequenceResult> {
    let mut runner = SequenceRunner::new(*initial, *settings);
    for &o in outcomes {
        runner.apply(o)?;
    }
    Ok(runner.finish())
}

pub fn replay_hypothetical(outcomes: &[Outcome], settings: &MeasurementSettings) -> Result<SequenceResult> {
    replay(&DensityMatrix::maximally_mixed(), outcomes, settings)
}

/// Largest eigenvalue difference between the sequence estimate of `result_true` and the
/// aposteriori state of `hypothetical`, which must replay the same outcome record.
pub fn spectral_match(result_true: &SequenceResult, hypothetical: &SequenceResult) -> Result<f64> {
    if result_true.outcomes != hypothetical.outcomes {
        return Err(Error::InvalidComparison(format!(
            "outcome records differ ({} vs {} entries)",
            result_true.outcomes.len(),
            hypothetical.outcomes.len()
        )));
    }
    // eigenvalues are (1 +- |r|)/2, so both pairs differ by the same amount
    let a = result_true.estimate.bloch_norm();
    let b = hypothetical.aposteriori.bloch_norm();
    Ok(0.5 * (a - b).abs())
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidelityStatistic {
    pub mean: f64,
    pub std_error: f64,
    pub samples: u64,
}

impl FidelityStatistic {
    /// A single sample carries no spread estimate; its `std_error` is 0 by convention.
    pub fn is_degenerate(&self) -> bool {
        self.samples < 2
    }

    /// `sqrt(se_a^2 + se_b^2)`.
    pub fn combined_error(&self, other: &Self) -> f64 {
        self.std_error.hypot(other.std_error)
    }
}

fn require_pure(state: &DensityMatrix) -> Result<()> {
    let purity = state.purity();
    if purity < 1.0 - PURE_STATE_TOLERANCE {
        return Err(Error::NotPure { purity });
    }
    Ok(())
}

fn require_trials(trials: u64) -> Result<()> {
    if trials == 0 {
        return Err(Error::InvalidInput("at least one trial is required".into()));
    }
    Ok(())
}

/// Fidelity of the purified sequence estimate with a known pure state, averaged over the
/// purification's internal randomness.
pub fn direct_fidelity_sample_fixed<R: Rng + ?Sized>(
    true_state: &DensityMatrix,
    settings: &MeasurementSettings,
    n: usize,
    strategy: PurificationStrategy,
    rng: &mut R,
) -> Result<f64> {
    require_pure(true_state)?;
    let result = run_sequence(true_state, n, settings, rng)?;
    Ok(expected_purified_fidelity(&result.estimate, strategy, true_state))
}

/// One trial of [`fidelity_direct`]: a fresh random pure state, measured and estimated.
pub fn direct_fidelity_sample<R: Rng + ?Sized>(
    settings: &MeasurementSettings,
    n: usize,
    strategy: PurificationStrategy,
    rng: &mut R,
) -> Result<f64> {
    let truth = random_pure_state(rng);
    direct_fidelity_sample_fixed(&truth, settings, n, strategy, rng)
}

/// One trial of [`fidelity_hypothetical_fixed`]: `2 (tr[rho?_n rho])^2`.
pub fn hypothetical_fixed_sample<R: Rng + ?Sized>(
    true_state: &DensityMatrix,
    settings: &MeasurementSettings,
    n: usize,
    rng: &mut R,
) -> Result<f64> {
    let result = hypothetical_run(n, settings, rng)?;
    let overlap = result.aposteriori.fidelity(true_state);
    Ok(2.0 * overlap * overlap)
}

/// One trial of [`fidelity_purity`]: `1/3 + purity(rho?_n) / 3`.
pub fn purity_fidelity_sample<R: Rng + ?Sized>(
    settings: &MeasurementSettings,
    n: usize,
    rng: &mut R,
) -> Result<f64> {
    let result = hypothetical_run(n, settings, rng)?;
    Ok((1.0 + result.aposteriori.purity()) / 3.0)
}

fn collect<R, F>(trials: u64, rng: &mut R, mut sample: F) -> Result<FidelityStatistic>
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> Result<f64>,
{
    require_trials(trials)?;
    let mut values = Vec::with_capacity(trials as usize);
    for index in 0..trials {
        let v = sample(rng).map_err(|e| Error::Trial {
            index,
            source: Box::new(e),
        })?;
        values.push(v);
    }
    summarize(&values)
}

/// Average fidelity over random pure states of the purified sequence estimate.
pub fn fidelity_direct<R: Rng + ?Sized>(
    settings: &MeasurementSettings,
    n: usize,
    trials: u64,
    strategy: PurificationStrategy,
    rng: &mut R,
) -> Result<FidelityStatistic> {
    collect(trials, rng, |rng| direct_fidelity_sample(settings, n, strategy, rng))
}

/// Direct fidelity for one fixed pure state.
pub fn fidelity_direct_fixed<R: Rng + ?Sized>(
    true_state: &DensityMatrix,
    settings: &MeasurementSettings,
    n: usize,
    trials: u64,
    strategy: PurificationStrategy,
    rng: &mut R,
) -> Result<FidelityStatistic> {
    require_pure(true_state)?;
    collect(trials, rng, |rng| {
        direct_fidelity_sample_fixed(true_state, settings, n, strategy, rng)
    })
}

/// Fidelity for a fixed pure state from hypothetical runs, `2 E?[(tr[rho?_n rho])^2]`.
pub fn fidelity_hypothetical_fixed<R: Rng + ?Sized>(
    true_state: &DensityMatrix,
    settings: &MeasurementSettings,
    n: usize,
    trials: u64,
    rng: &mut R,
) -> Result<FidelityStatistic> {
    require_pure(true_state)?;
    collect(trials, rng, |rng| hypothetical_fixed_sample(true_state, settings, n, rng))
}

/// Average fidelity from the purity of hypothetical runs, `1/3 + E[purity(rho?_n)] / 3`.
pub fn fidelity_purity<R: Rng + ?Sized>(
    settings: &MeasurementSettings,
    n: usize,
    trials: u64,
    rng: &mut R,
) -> Result<FidelityStatistic> {
    collect(trials, rng, |rng| purity_fidelity_sample(settings, n, rng))
}
