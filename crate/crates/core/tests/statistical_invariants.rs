use unsharp::ensemble::{derive_stream, run_ensemble, ExperimentKind, ExperimentSpec};
use unsharp::povm::{MeasurementSettings, OutcomeDistribution, PurificationStrategy};
use unsharp::qubit::{random_pure_state, DensityMatrix};
use unsharp::sequential::{fidelity_direct, fidelity_purity, run_sequence, SequenceRunner};

const ONE_HALF: f64 = 0.5;
const TWO_THIRDS: f64 = 2.0 / 3.0;

fn settings(delta: f64) -> MeasurementSettings {
    MeasurementSettings::new(delta).unwrap()
}

/// Kolmogorov-Smirnov distance of a sample from Uniform(0, 1).
fn ks_uniform(mut u: Vec<f64>) -> f64 {
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    u.iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).max((i + 1) as f64 / n - x))
        .fold(0.0, f64::max)
}

#[test]
fn first_outcome_follows_the_true_state_law() {
    // each draw has its own axis, so test the probability integral transform
    for (delta, seed) in [(0.3, 1u64), (2.0, 2), (20.0, 3)] {
        let s = settings(delta);
        let mut rng = derive_stream(seed, 0);
        let truth = random_pure_state(&mut rng);
        let pit: Vec<f64> = (0..100_000)
            .map(|_| {
                let mut runner = SequenceRunner::new(truth, s);
                runner.step(&mut rng).unwrap();
                let first = runner.finish().outcomes[0];
                OutcomeDistribution::new(&truth, &first.axis, &s).cdf(first.sigma)
            })
            .collect();
        let d = ks_uniform(pit);
        assert!(d < 0.01, "delta {delta}: KS distance {d}");
    }
}

#[test]
fn ks_distance_detects_a_wrong_state() {
    let s = settings(0.3);
    let mut rng = derive_stream(9, 0);
    let truth = DensityMatrix::new([0.0, 0.0, 1.0]).unwrap();
    let wrong = DensityMatrix::new([0.0, 0.0, -1.0]).unwrap();
    let pit: Vec<f64> = (0..20_000)
        .map(|_| {
            let o = run_sequence(&truth, 1, &s, &mut rng).unwrap().outcomes[0];
            OutcomeDistribution::new(&wrong, &o.axis, &s).cdf(o.sigma)
        })
        .collect();
    assert!(ks_uniform(pit) > 0.05);
}

#[test]
fn purity_fidelity_is_monotone_in_n() {
    let s = settings(20.0);
    let grid = [0usize, 1, 2, 5, 10, 20, 40];
    let stats: Vec<_> = grid
        .iter()
        .enumerate()
        .map(|(k, &n)| fidelity_purity(&s, n, 10_000, &mut derive_stream(31, k as u64)).unwrap())
        .collect();
    for w in stats.windows(2) {
        assert!(
            w[1].mean >= w[0].mean - 3.0 * w[0].combined_error(&w[1]),
            "{:?} then {:?}",
            w[0],
            w[1]
        );
    }
}

#[test]
fn ensemble_means_are_monotone_and_bounded() {
    for (kind, seed) in [
        (
            ExperimentKind::SequentialFidelity {
                precision: 3.0,
                n_grid: vec![0, 1, 3, 10, 30, 100],
                strategy: PurificationStrategy::RandomEigenstate,
            },
            1u64,
        ),
        (
            ExperimentKind::SequentialFidelity {
                precision: 1.0,
                n_grid: vec![0, 1, 3, 10, 30],
                strategy: PurificationStrategy::DominantEigenstate,
            },
            2,
        ),
        (
            ExperimentKind::HypotheticalPurity {
                precision: 3.0,
                n_grid: vec![0, 1, 3, 10, 30, 100, 300],
            },
            3,
        ),
    ] {
        let spec = ExperimentSpec { kind, trials: 4000, seed };
        let stats = run_ensemble(&spec).unwrap();
        let points = &stats.series[0].points;
        for p in points {
            assert_eq!(p.samples, 4000);
            assert!(p.reference.is_some());
            assert!(p.mean >= ONE_HALF - 3.0 * p.std_error, "{p:?}");
            assert!(p.mean <= TWO_THIRDS + 3.0 * p.std_error, "{p:?}");
        }
        for w in points.windows(2) {
            let combined = w[0].statistic().combined_error(&w[1].statistic());
            assert!(w[1].mean >= w[0].mean - 3.0 * combined, "{:?} then {:?}", w[0], w[1]);
        }
    }
}

#[test]
fn sharp_single_measurement_reaches_two_thirds() {
    let s = settings(0.05);
    let stat = fidelity_direct(&s, 1, 100_000, PurificationStrategy::DominantEigenstate, &mut derive_stream(4, 0))
        .unwrap();
    assert!((stat.mean - TWO_THIRDS).abs() < 0.005, "{stat:?}");
}

#[test]
fn direct_and_purity_estimators_agree() {
    let s = settings(20.0);
    for (k, n) in [2usize, 5, 10].into_iter().enumerate() {
        let direct = fidelity_direct(&s, n, 10_000, PurificationStrategy::RandomEigenstate, &mut derive_stream(5, k as u64))
            .unwrap();
        let purity = fidelity_purity(&s, n, 10_000, &mut derive_stream(6, k as u64)).unwrap();
        let gap = (direct.mean - purity.mean).abs();
        assert!(gap <= 3.0 * direct.combined_error(&purity), "n {n}: {direct:?} vs {purity:?}");
    }
}

#[test]
fn dominant_strategy_is_at_least_random() {
    let s = settings(1.5);
    for (k, n) in [1usize, 4, 12].into_iter().enumerate() {
        let random = fidelity_direct(&s, n, 20_000, PurificationStrategy::RandomEigenstate, &mut derive_stream(7, k as u64))
            .unwrap();
        let dominant =
            fidelity_direct(&s, n, 20_000, PurificationStrategy::DominantEigenstate, &mut derive_stream(8, k as u64))
                .unwrap();
        assert!(dominant.mean >= random.mean - 3.0 * random.combined_error(&dominant));
    }
}
