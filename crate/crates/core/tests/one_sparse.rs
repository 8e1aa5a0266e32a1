use gplb_core::adversarial::{compute_coefficients, CoefficientMatrix};
use gplb_core::rng::stream_rng;
use gplb_core::sequence::sample_observation;
use gplb_core::sparse::{
    brute_force_argmin, diagonal_reduction, gp_mean_dominates_linear, linear_minimax_risk, reduce_observation,
    reduce_to_sequence, scalar_risk,
};
use gplb_core::stats::RunningStats;
use gplb_core::{BasisDescriptor, BasisId, HaarTensorBasis, LinearEstimator, PyramidFamily, Spectrum};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

/// Asymptotic two-sided Kolmogorov–Smirnov critical value at level `alpha`.
fn ks_critical(samples: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (samples as f64).sqrt()
}

fn ks_statistic(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, x)| {
            let f = cdf(*x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn reduced_observation_has_the_one_sparse_law() {
    let fam = PyramidFamily::build(2, 2).unwrap();
    let n = 5e4;
    let j_star = 2;
    let draws = 10_000;
    let mut columns = vec![Vec::with_capacity(draws); fam.m()];
    let mut sigma = 0.0;
    let mut rng = stream_rng(31, 0, 0);
    for _ in 0..draws {
        let (y, model) = reduce_to_sequence(&fam, j_star, n, &mut rng).unwrap();
        sigma = model.sigma();
        for (col, v) in columns.iter_mut().zip(y) {
            col.push(v);
        }
    }
    let crit = ks_critical(draws, 1e-3);
    for (i, col) in columns.iter().enumerate() {
        let mean = if i == j_star { 1.0 } else { 0.0 };
        let mut stats = RunningStats::new();
        stats.extend(col.iter().copied());
        assert!((stats.mean() - mean).abs() < 4.0 * stats.stderr());
        let d = ks_statistic(col.clone(), |x| normal_cdf((x - mean) / sigma));
        assert!(d < crit, "coordinate {i}: D = {d} >= {crit}");
    }
    // off-diagonal covariances vanish
    for i in 0..fam.m() {
        for j in (i + 1)..fam.m() {
            let mi = if i == j_star { 1.0 } else { 0.0 };
            let mj = if j == j_star { 1.0 } else { 0.0 };
            let mut prod = RunningStats::new();
            prod.extend(columns[i].iter().zip(&columns[j]).map(|(a, b)| (a - mi) * (b - mj)));
            assert!(prod.mean().abs() < 4.0 * prod.stderr(), "({i},{j})");
        }
    }
}

#[test]
fn noiseless_limit_recovers_the_signal() {
    let fam = PyramidFamily::build(1, 3).unwrap();
    let (y, _) = reduce_to_sequence(&fam, 1, 1e18, &mut stream_rng(0, 0, 0)).unwrap();
    assert!((y[1] - 1.0).abs() < 1e-5 && y[0].abs() < 1e-5 && y[2].abs() < 1e-5);
}

#[test]
fn reduction_from_sequence_observation() {
    // k = 2 aligns the pyramid supports with Haar cells, so projections stay disjoint
    let fam = PyramidFamily::build(1, 2).unwrap();
    let basis = BasisDescriptor::Haar(HaarTensorBasis::new(1, 8).unwrap());
    let c = compute_coefficients(&fam, &basis).unwrap();
    let n = 1e3;
    let truth = c.truth(1);
    let mut stats = [RunningStats::new(), RunningStats::new()];
    let mut rng = stream_rng(4, 0, 0);
    let mut sigma = 0.0;
    for _ in 0..5000 {
        let obs = sample_observation(&truth, n, &mut rng).unwrap();
        let (y, model) = reduce_observation(&c, &obs).unwrap();
        sigma = model.sigma();
        stats[0].push(y[0]);
        stats[1].push(y[1]);
    }
    assert!(stats[0].mean().abs() < 4.0 * stats[0].stderr());
    assert!((stats[1].mean() - 1.0).abs() < 4.0 * stats[1].stderr());
    assert!((stats[1].variance() / (sigma * sigma) - 1.0).abs() < 0.06);
}

#[test]
fn unequal_norms_are_rejected() {
    let fam = PyramidFamily::build(1, 2).unwrap();
    let id = BasisId::new("custom");
    let c = CoefficientMatrix::from_rows(id.clone(), fam, 2, vec![1.0, 0.0, 0.0, 2.0]).unwrap();
    let obs = gplb_core::SequenceObservation::new(id, 10.0, vec![0.0, 0.0]).unwrap();
    assert!(matches!(
        reduce_observation(&c, &obs),
        Err(gplb_core::Error::Contract(_))
    ));
}

#[test]
fn diagonal_domination_on_random_matrices() {
    let mut gen = stream_rng(8, 0, 0);
    for trial in 0..600 {
        let m = gen.random_range(2..=8);
        let sigma = [0.1, 1.0, 3.0][trial % 3];
        let entries: Vec<f64> = (0..m * m).map(|_| gen.sample(StandardNormal)).collect();
        let a = LinearEstimator::new(m, entries).unwrap();
        let (_, dominated) = diagonal_reduction(&a, sigma).unwrap();
        assert!(dominated, "trial {trial}");
    }
}

#[test]
fn brute_force_argmin_sits_next_to_the_closed_form() {
    for (m, sigma) in [(1usize, 1.0), (4, 0.5), (7, 0.2), (3, 2.0)] {
        let (risk, a) = brute_force_argmin(m, sigma, 1001).unwrap();
        let (exact, a_star) = linear_minimax_risk(m, sigma).unwrap();
        assert!((a - a_star).abs() <= 1.0 / 1000.0 + 1e-15);
        assert!(risk >= exact && risk - exact < 1e-5);
    }
}

#[test]
fn gp_mean_is_never_better_than_linear_minimax() {
    let fam = PyramidFamily::build(1, 4).unwrap();
    let basis = BasisDescriptor::Haar(HaarTensorBasis::new(1, 10).unwrap());
    let c = compute_coefficients(&fam, &basis).unwrap();
    let mut gen = stream_rng(12, 0, 0);
    for _ in 0..200 {
        let decay: f64 = gen.random_range(0.0..4.0);
        let scale = 10f64.powf(gen.random_range(-9.0..1.0));
        let lambdas: Vec<f64> = (1..=basis.len())
            .map(|i| scale * (i as f64).powf(-decay) * gen.random_range(0.1..1.0))
            .collect();
        let spec = Spectrum::new(basis.id(), lambdas).unwrap();
        let n = 10f64.powf(gen.random_range(2.0..6.0));
        let out = gp_mean_dominates_linear(&spec, &c, n).unwrap();
        assert!(out.holds, "{} < {}", out.gp_risk_max, out.linear_minimax);
    }
    // matched spectrum and a flat huge spectrum
    let n = 1e3;
    let matched = Spectrum::new(basis.id(), c.t_k()).unwrap();
    assert!(gp_mean_dominates_linear(&matched, &c, n).unwrap().holds);
    let flat = Spectrum::new(basis.id(), vec![1e6; basis.len()]).unwrap();
    let out = gp_mean_dominates_linear(&flat, &c, n).unwrap();
    assert!(out.holds);
    assert!((out.gp_risk_max - basis.len() as f64 / n).abs() < 1e-6 * out.gp_risk_max);
}

proptest! {
    #[test]
    fn scalar_risk_never_beats_the_minimax_value(a in -2.0f64..3.0, m in 1usize..50, sigma in 1e-3f64..10.0) {
        let (best, a_star) = linear_minimax_risk(m, sigma).unwrap();
        let r = scalar_risk(a, m, sigma);
        prop_assert!(r >= best * (1.0 - 1e-12));
        // equality only at a*: the excess is (1 + m sigma^2)(a - a*)^2
        let excess = (1.0 + m as f64 * sigma * sigma) * (a - a_star).powi(2);
        prop_assert!((r - best - excess).abs() <= 1e-10 * r.max(1.0));
    }
}
