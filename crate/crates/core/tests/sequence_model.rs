use gplb_core::rng::stream_rng;
use gplb_core::sequence::{
    contraction_stats, coordinate_risk, exact_risk, mc_risk, posterior_update, sample_observation,
};
use gplb_core::stats::RunningStats;
use gplb_core::transfer::contraction_floor;
use gplb_core::{BasisId, Spectrum, TruthCoefficients};
use proptest::prelude::*;
use rand::Rng;

fn id() -> BasisId {
    BasisId::new("seq")
}

fn spectrum_and_theta(max_len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..=max_len).prop_flat_map(|k| {
        (
            prop::collection::vec(1e-6f64..10.0, k),
            prop::collection::vec(-2.0f64..2.0, k),
        )
    })
}

proptest! {
    #[test]
    fn posterior_weights_and_variances(
        (lambdas, ys) in spectrum_and_theta(40),
        n in 1e-2f64..1e6,
    ) {
        let spec = Spectrum::new(id(), lambdas.clone()).unwrap();
        let obs = gplb_core::SequenceObservation::new(id(), n, ys.clone()).unwrap();
        let post = posterior_update(&spec, &obs).unwrap();
        for k in 0..lambdas.len() {
            let a = post.weights[k];
            prop_assert!(a > 0.0 && a < 1.0, "a = {a}");
            prop_assert!((post.variances[k] - lambdas[k] * (1.0 - a)).abs() <= 1e-12 * lambdas[k]);
            prop_assert!(post.variances[k] < lambdas[k]);
            prop_assert!((post.means[k] - a * ys[k]).abs() <= 1e-15 * ys[k].abs().max(1e-300));
        }
    }

    #[test]
    fn risk_nonincreasing_once_every_coordinate_is_resolved(
        (lambdas, theta) in spectrum_and_theta(30),
        scale in 1.0f64..100.0,
        factor in 1.0f64..50.0,
    ) {
        let min_lambda = lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
        let n1 = scale / min_lambda;
        let n2 = n1 * factor;
        let spec = Spectrum::new(id(), lambdas).unwrap();
        let theta = TruthCoefficients::new(id(), theta).unwrap();
        let r1 = exact_risk(&spec, &theta, n1).unwrap();
        let r2 = exact_risk(&spec, &theta, n2).unwrap();
        prop_assert!(r2 <= r1 * (1.0 + 1e-12), "{r2} > {r1}");
    }

    #[test]
    fn coordinate_risk_minimum(theta in -3.0f64..3.0, n in 1.0f64..1e4) {
        let a_opt = n * theta * theta / (1.0 + n * theta * theta);
        let best = theta * theta / (1.0 + n * theta * theta);
        let direct = (1.0 - a_opt).powi(2) * theta * theta + a_opt * a_opt / n;
        prop_assert!((direct - best).abs() <= 1e-14 * best.max(1e-300));
        // grid over (0, 1) never beats the closed form, and the closest point is near it
        let mut grid_min = f64::INFINITY;
        for i in 1..10_000 {
            let a = i as f64 / 10_000.0;
            grid_min = grid_min.min((1.0 - a).powi(2) * theta * theta + a * a / n);
        }
        prop_assert!(grid_min >= best * (1.0 - 1e-12));
        let slack = (theta * theta + 1.0 / n) * 1e-8;
        prop_assert!(grid_min - best <= slack, "{grid_min} vs {best}");
        // and it matches the coordinate risk at lambda = theta^2
        prop_assert!((coordinate_risk(theta * theta, theta, n) - best).abs() <= 1e-14 * best.max(1e-300));
    }

    #[test]
    fn sampling_is_deterministic(seed in any::<u64>(), n in 1.0f64..1e3) {
        let theta = TruthCoefficients::new(id(), vec![0.1, -0.2, 0.3]).unwrap();
        let a = sample_observation(&theta, n, &mut stream_rng(seed, 0, 0)).unwrap();
        let b = sample_observation(&theta, n, &mut stream_rng(seed, 0, 0)).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn risk_can_grow_with_n_below_resolution() {
    let spec = Spectrum::new(id(), vec![1.0]).unwrap();
    let zero = TruthCoefficients::zeros(id(), 1);
    let small = exact_risk(&spec, &zero, 0.5).unwrap();
    let large = exact_risk(&spec, &zero, 1.0).unwrap();
    assert!((small - 2.0 / 9.0).abs() < 1e-15);
    assert!((large - 0.25).abs() < 1e-15);
    assert!(large > small);
}

#[test]
fn zero_signal_observation_variance() {
    let n = 1e6;
    let theta = TruthCoefficients::zeros(id(), 1);
    let mut stats = RunningStats::new();
    let mut rng = stream_rng(11, 0, 0);
    for _ in 0..10_000 {
        stats.push(sample_observation(&theta, n, &mut rng).unwrap().coefficients()[0]);
    }
    assert!((stats.variance() - 1e-6).abs() < 0.05 * 1e-6, "{}", stats.variance());
}

#[test]
fn observation_mean_passes_through() {
    let theta = TruthCoefficients::new(id(), vec![1.0, 0.0, 0.0]).unwrap();
    let n = 50.0;
    let mut stats = [RunningStats::new(); 3];
    let mut rng = stream_rng(12, 0, 0);
    for _ in 0..10_000 {
        let y = sample_observation(&theta, n, &mut rng).unwrap();
        for (s, v) in stats.iter_mut().zip(y.coefficients()) {
            s.push(*v);
        }
    }
    for (s, t) in stats.iter().zip(theta.theta()) {
        assert!((s.mean() - t).abs() < 4.0 * s.stderr(), "{} vs {t}", s.mean());
    }
}

#[test]
fn degenerate_priors_in_the_limit() {
    let theta = TruthCoefficients::new(id(), vec![0.5, -0.25, 1.0]).unwrap();
    let obs = gplb_core::SequenceObservation::new(id(), 10.0, vec![0.4, -0.3, 1.2]).unwrap();
    let tiny = Spectrum::new(id(), vec![1e-14; 3]).unwrap();
    let post = posterior_update(&tiny, &obs).unwrap();
    assert!(post.means.iter().all(|m| m.abs() < 1e-12));
    assert!(post.variances.iter().all(|v| *v < 1e-13));
    assert!((exact_risk(&tiny, &theta, 10.0).unwrap() - theta.norm_sq()).abs() < 1e-11);
    let huge = Spectrum::new(id(), vec![1e14; 3]).unwrap();
    assert!((exact_risk(&huge, &theta, 10.0).unwrap() - 0.3).abs() < 1e-12);
}

#[test]
fn mc_matches_exact_single_coordinate() {
    let n = 100.0;
    let spec = Spectrum::new(id(), vec![1.0 / n]).unwrap();
    let theta = TruthCoefficients::zeros(id(), 1);
    let (est, se) = mc_risk(&spec, &theta, n, 100_000, &mut stream_rng(3, 0, 0)).unwrap();
    assert!((est - 0.0025).abs() < 4.0 * se, "{est} ± {se}");
}

#[test]
fn mc_matches_exact_on_random_triples() {
    let mut gen = stream_rng(2024, 99, 0);
    let mut violations = 0;
    for trial in 0..100u64 {
        let k = gen.random_range(1..60);
        let decay: f64 = gen.random_range(0.5..3.0);
        let scale: f64 = gen.random_range(0.01..10.0);
        let lambdas: Vec<f64> = (1..=k).map(|i| scale * (i as f64).powf(-decay)).collect();
        let theta: Vec<f64> = (0..k).map(|_| gen.random_range(-0.5..0.5)).collect();
        let n = 10f64.powf(gen.random_range(1.0..5.0));
        let spec = Spectrum::new(id(), lambdas).unwrap();
        let theta = TruthCoefficients::new(id(), theta).unwrap();
        let exact = exact_risk(&spec, &theta, n).unwrap();
        let (est, se) = mc_risk(&spec, &theta, n, 2000, &mut stream_rng(5, trial, 0)).unwrap();
        if (est - exact).abs() > 4.0 * se {
            violations += 1;
        }
    }
    assert_eq!(violations, 0);
}

#[test]
fn stderr_follows_root_n() {
    let spec = Spectrum::new(id(), vec![0.3, 0.1, 0.05]).unwrap();
    let theta = TruthCoefficients::new(id(), vec![0.2, 0.1, 0.0]).unwrap();
    let mut ratios = RunningStats::new();
    for t in 0..20 {
        let (_, s1) = mc_risk(&spec, &theta, 20.0, 2000, &mut stream_rng(8, t, 0)).unwrap();
        let (_, s2) = mc_risk(&spec, &theta, 20.0, 4000, &mut stream_rng(8, t, 1)).unwrap();
        ratios.push(s2 / s1);
    }
    assert!((0.6..=0.85).contains(&ratios.mean()), "{}", ratios.mean());
}

#[test]
fn contraction_extremes() {
    let spec = Spectrum::new(id(), vec![1.0, 0.5, 0.25]).unwrap();
    let theta = TruthCoefficients::new(id(), vec![0.1, 0.2, 0.0]).unwrap();
    let far = contraction_stats(&spec, &theta, 100.0, 1e6, 50, 50, &mut stream_rng(1, 0, 0)).unwrap();
    assert_eq!(far.probability, 0.0);
    let near = contraction_stats(&spec, &theta, 100.0, 1e-12, 50, 50, &mut stream_rng(1, 0, 0)).unwrap();
    assert_eq!(near.probability, 1.0);
}

#[test]
fn contraction_exceeds_transfer_floor() {
    // flat spectrum large enough that n mu^2 clears the concentration threshold
    let k = 200;
    let n = 1000.0;
    let spec = Spectrum::new(id(), vec![1.0; k]).unwrap();
    let theta = TruthCoefficients::new(id(), (0..k).map(|i| 0.01 / (1.0 + i as f64)).collect()).unwrap();
    let mu_sq = exact_risk(&spec, &theta, n).unwrap();
    let floor = contraction_floor(n, mu_sq).unwrap();
    assert!(floor > 0.2);
    let est = contraction_stats(&spec, &theta, n, mu_sq.sqrt() / 4.0, 100, 100, &mut stream_rng(4, 0, 0)).unwrap();
    assert!(
        est.probability >= floor - 3.0 * est.stderr,
        "{} < {floor}",
        est.probability
    );
}
