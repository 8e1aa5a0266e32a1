use gplb_core::adversarial::{averaged_risk_floor, compute_coefficients, pyramid_norm_sq, risk_lower_bound};
use gplb_core::quadrature::{adaptive_integrate, tensor_composite, GaussLegendre};
use gplb_core::rng::stream_rng;
use gplb_core::sequence::exact_risk;
use gplb_core::{BasisDescriptor, CosineTensorBasis, HaarTensorBasis, PyramidFamily, Spectrum};
use proptest::prelude::*;
use rand::Rng;

fn haar(d: u32, level: u32) -> BasisDescriptor {
    BasisDescriptor::Haar(HaarTensorBasis::new(d, level).unwrap())
}

#[test]
fn norm_matches_tensor_quadrature() {
    let rule = GaussLegendre::new(8);
    for d in 1..=2u32 {
        for k in [1u64, 2, 4] {
            let fam = PyramidFamily::build(d, k).unwrap();
            let p = fam.member(0).unwrap();
            let h = fam.bandwidth();
            let lo: Vec<f64> = p.center().iter().map(|a| a - h).collect();
            let hi: Vec<f64> = p.center().iter().map(|a| a + h).collect();
            // panels split every axis at the center, so each panel sees one linear piece per axis
            let q = tensor_composite(&rule, &|x| p.eval(x).powi(2), &lo, &hi, 64);
            let exact = pyramid_norm_sq(d, k);
            assert!((q - exact).abs() / exact < 1e-6, "d={d} k={k}: {q} vs {exact}");
        }
    }
}

#[test]
fn neighbours_have_zero_overlap() {
    let rule = GaussLegendre::new(8);
    let fam = PyramidFamily::build(2, 3).unwrap();
    for i in 0..fam.m() {
        for j in (i + 1)..fam.m() {
            let (pi, pj) = (fam.member(i).unwrap(), fam.member(j).unwrap());
            let q = tensor_composite(&rule, &|x| pi.eval(x) * pj.eval(x), &[0.0, 0.0], &[1.0, 1.0], 12);
            assert!(q.abs() < 1e-12, "({i},{j}) -> {q}");
        }
    }
}

#[test]
fn members_are_one_lipschitz_per_axis() {
    let fam = PyramidFamily::build(2, 2).unwrap();
    let step = 1e-3;
    for j in 0..fam.m() {
        let mut sup = 0.0f64;
        for a in 0..=200 {
            for b in 0..=200 {
                let x = [a as f64 / 200.0, b as f64 / 200.0];
                let v = fam.evaluate(j, &x).unwrap();
                sup = sup.max(v);
                for axis in 0..2 {
                    let mut y = x;
                    y[axis] = (y[axis] + step).min(1.0);
                    let dx = y[axis] - x[axis];
                    if dx > 0.0 {
                        let slope = (fam.evaluate(j, &y).unwrap() - v).abs() / dx;
                        assert!(slope <= 1.0 + 1e-8, "slope {slope}");
                    }
                }
            }
        }
        assert!((sup - fam.bandwidth()).abs() < 1e-12);
    }
}

#[test]
fn haar_parseval_at_fine_levels() {
    for (d, k, level) in [(1u32, 1u64, 12u32), (1, 3, 12), (2, 2, 7)] {
        let fam = PyramidFamily::build(d, k).unwrap();
        let c = compute_coefficients(&fam, &haar(d, level)).unwrap();
        for j in 0..fam.m() {
            let row = c.row_norm_sq(j);
            assert!(row <= fam.norm_sq() * (1.0 + 1e-12));
            assert!(fam.norm_sq() - row < 1e-6, "d={d} k={k}: {row} vs {}", fam.norm_sq());
        }
    }
}

#[test]
fn cosine_parseval() {
    let fam = PyramidFamily::build(1, 1).unwrap();
    let basis = BasisDescriptor::Cosine(CosineTensorBasis::new(1, 64).unwrap());
    let c = compute_coefficients(&fam, &basis).unwrap();
    assert!((c.row_norm_sq(0) - 1.0 / 12.0).abs() < 1e-6);
    let fam2 = PyramidFamily::build(2, 2).unwrap();
    let basis2 = BasisDescriptor::Cosine(CosineTensorBasis::new(2, 8).unwrap());
    let c2 = compute_coefficients(&fam2, &basis2).unwrap();
    assert!(c2.row_norm_sq(3) <= fam2.norm_sq() * (1.0 + 1e-9));
}

/// `\int p(x) g(x) dx` over the support of a 2-D pyramid by nested adaptive
/// Gauss–Kronrod, split at every kink of `p`.
fn nested_pyramid_integral(center: [f64; 2], h: f64, g: &dyn Fn(f64, f64) -> f64) -> f64 {
    let outer = |x: f64| {
        let rest = h - (x - center[0]).abs();
        if rest <= 0.0 {
            return 0.0;
        }
        let inner = |y: f64| (rest - (y - center[1]).abs()).max(0.0) * g(x, y);
        adaptive_integrate(&inner, center[1] - rest, center[1] + rest, &[center[1]], 1e-15, 1e-13)
            .unwrap()
            .value
    };
    adaptive_integrate(&outer, center[0] - h, center[0] + h, &[center[0]], 1e-14, 1e-12)
        .unwrap()
        .value
}

#[test]
fn cosine_entries_match_nested_quadrature() {
    let fam = PyramidFamily::build(2, 2).unwrap();
    let cos = CosineTensorBasis::new(2, 4).unwrap();
    let c = compute_coefficients(&fam, &BasisDescriptor::Cosine(cos)).unwrap();
    let p = fam.member(1).unwrap();
    let center = [p.center()[0], p.center()[1]];
    for flat in [0usize, 1, 5, 10, 15] {
        let q = nested_pyramid_integral(center, fam.bandwidth(), &|x, y| cos.eval(flat, &[x, y]));
        assert!(
            (q - c.entry(1, flat)).abs() < 1e-10,
            "{flat}: {q} vs {}",
            c.entry(1, flat)
        );
    }
}

fn random_spectrum(gen: &mut impl Rng, len: usize) -> Vec<f64> {
    let decay: f64 = gen.random_range(0.0..4.0);
    let scale = 10f64.powf(gen.random_range(-8.0..1.0));
    (1..=len)
        .map(|i| scale * (i as f64).powf(-decay) * gen.random_range(0.1..1.0))
        .collect()
}

#[test]
fn averaged_floor_is_dominated_by_every_spectrum() {
    let mut gen = stream_rng(77, 0, 0);
    for (d, k, level) in [(1u32, 4u64, 6u32), (2, 2, 3), (1, 3, 5)] {
        let fam = PyramidFamily::build(d, k).unwrap();
        let basis = haar(d, level);
        let c = compute_coefficients(&fam, &basis).unwrap();
        for _ in 0..300 {
            let spec = Spectrum::new(basis.id(), random_spectrum(&mut gen, basis.len())).unwrap();
            let n = 10f64.powf(gen.random_range(1.0..6.0));
            let floor = averaged_risk_floor(&c, n).unwrap();
            let worst = (0..fam.m())
                .map(|j| exact_risk(&spec, &c.truth(j), n).unwrap())
                .fold(0.0, f64::max);
            assert!(worst >= floor * (1.0 - 1e-12), "{worst} < {floor}");
            let classical = risk_lower_bound(&c, n).unwrap();
            assert!(floor <= classical * (1.0 + 1e-12) && floor >= 0.5 * classical * (1.0 - 1e-12));
        }
    }
}

#[test]
fn classical_bound_exceeds_matched_prior_risk() {
    // the matched prior attains the averaged floor, which sits below sum T_k ∧ 1/n
    let fam = PyramidFamily::build(1, 4).unwrap();
    let basis = haar(1, 6);
    let c = compute_coefficients(&fam, &basis).unwrap();
    let n = 1e4;
    let spec = Spectrum::new(basis.id(), c.t_k()).unwrap();
    let avg = (0..fam.m())
        .map(|j| exact_risk(&spec, &c.truth(j), n).unwrap())
        .sum::<f64>()
        / fam.m() as f64;
    let floor = averaged_risk_floor(&c, n).unwrap();
    assert!((avg - floor).abs() < 1e-12 * floor);
    assert!(risk_lower_bound(&c, n).unwrap() > floor);
}

proptest! {
    #[test]
    fn t_k_below_inverse_n_when_norms_are_small(d in 1u32..=2, k in 1u64..=4, slack in 1.0f64..10.0) {
        let fam = PyramidFamily::build(d, k).unwrap();
        let level = HaarTensorBasis::minimal_level_for(k) + 1;
        let c = compute_coefficients(&fam, &haar(d, level)).unwrap();
        // choose n with ||f||^2 <= m / n
        let n = fam.m() as f64 / fam.norm_sq() / slack;
        for t in c.t_k() {
            prop_assert!(t <= 1.0 / n * (1.0 + 1e-12));
        }
    }

    #[test]
    fn centers_are_distinct_and_supports_disjoint(d in 1u32..=3, k in 1u64..=5) {
        let fam = PyramidFamily::build(d, k).unwrap();
        let h = fam.bandwidth();
        for i in 0..fam.m() {
            for j in (i + 1)..fam.m() {
                let (a, b) = (fam.center(i), fam.center(j));
                let gap = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                prop_assert!(gap >= 2.0 * h - 1e-15);
            }
        }
    }
}
