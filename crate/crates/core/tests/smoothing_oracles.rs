//! Smoothed density, score and Fisher information against brute-force oracles.

use nalgebra::DVector;
use proptest::prelude::*;
use smoothloc_core::smoothing::{Evaluation, QuadratureConfig};
use smoothloc_core::stats::{ks_critical, ks_statistic};
use smoothloc_core::{Density1d, DensityHd, RngSeed, SmoothedModel1d, SmoothedModelHd};

const TAU: f64 = std::f64::consts::TAU;

/// Composite Simpson on `[a, b]` with `panels` (even) subintervals.
fn simpson(a: f64, b: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / panels as f64;
    let mut s = f(a) + f(b);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn brute_pdf(base: &Density1d, r: f64, x: f64, panels: usize) -> f64 {
    let k = |t: f64| (-t * t / (2.0 * r * r)).exp() / (r * TAU.sqrt());
    simpson(x - 14.0 * r, x + 14.0 * r, panels, |u| k(x - u) * base.pdf(u))
}

fn non_gaussian_bases() -> Vec<Density1d> {
    vec![
        Density1d::laplace(0.0, 1.0).unwrap(),
        Density1d::laplace(0.4, 0.3).unwrap(),
        Density1d::sawtooth(0.05, 4.0).unwrap(),
        Density1d::sawtooth(0.2, 1.0).unwrap(),
    ]
}

#[test]
fn laplace_pdf_against_million_panel_simpson() {
    let base = Density1d::laplace(0.0, 1.0).unwrap();
    for r in [0.1, 0.5, 2.0] {
        let m = SmoothedModel1d::new(base.clone(), r).unwrap();
        for x in [-3.0, -0.2, 0.0, 0.7, 4.0] {
            let oracle = brute_pdf(&base, r, x, 1_000_000);
            assert!((m.pdf(x) - oracle).abs() < 1e-8, "r={r} x={x}: {} vs {oracle}", m.pdf(x));
        }
    }
}

#[test]
fn sawtooth_pdf_against_simpson() {
    let base = Density1d::sawtooth(0.05, 4.0).unwrap();
    for r in [0.01, 0.05, 0.3] {
        let m = SmoothedModel1d::new(base.clone(), r).unwrap();
        for x in [-1.01, -0.03, 0.0, 0.26, 0.9] {
            let oracle = brute_pdf(&base, r, x, 400_000);
            assert!((m.pdf(x) - oracle).abs() < 1e-8, "r={r} x={x}");
        }
    }
}

#[test]
fn score_against_finite_differences() {
    for base in non_gaussian_bases() {
        for r in [0.05, 0.4, 1.5] {
            let m = SmoothedModel1d::new(base.clone(), r).unwrap();
            for x in [-1.3, -0.02, 0.5, 2.2] {
                let h = 1e-4 * r;
                let fd = (m.pdf(x + h).ln() - m.pdf(x - h).ln()) / (2.0 * h);
                let s = m.score(x).unwrap();
                assert!((s - fd).abs() < 1e-6 * (1.0 + s.abs()), "r={r} x={x}: {s} vs {fd}");
            }
        }
    }
}

#[test]
fn score_against_importance_sampling() {
    // s_r(x) = E[(u - x)/r² | x] with u ~ f weighted by φ_r(x - u)
    let base = Density1d::laplace(0.0, 1.0).unwrap();
    let r = 0.5;
    let m = SmoothedModel1d::new(base.clone(), r).unwrap();
    let us = base.sample(400_000, RngSeed::new(8, 0));
    for x in [-1.0, 0.3, 1.7] {
        let (mut num, mut den) = (0.0, 0.0);
        for &u in &us {
            let w = (-(x - u) * (x - u) / (2.0 * r * r)).exp();
            num += w * (u - x) / (r * r);
            den += w;
        }
        let est = num / den;
        assert!((est - m.score(x).unwrap()).abs() < 0.02, "x={x}: {est}");
    }
}

#[test]
fn gaussian_closed_forms_match_forced_quadrature() {
    let bases = [
        Density1d::gaussian(0.3, 0.7).unwrap(),
        Density1d::mixture(&[(0.3, -1.0, 0.5), (0.7, 1.0, 1.2)]).unwrap(),
    ];
    for base in bases {
        for r in [0.1, 1.0] {
            let exact = SmoothedModel1d::new(base.clone(), r).unwrap();
            let quad = SmoothedModel1d::with_config(base.clone(), r, QuadratureConfig::default(), Evaluation::Quadrature).unwrap();
            assert!(exact.is_closed_form() && !quad.is_closed_form());
            for x in [-2.0, 0.0, 0.9, 3.0] {
                assert!((exact.pdf(x) - quad.pdf(x)).abs() < 1e-10);
                assert!((exact.score(x).unwrap() - quad.score(x).unwrap()).abs() < 1e-8);
            }
            assert!((exact.fisher() - quad.fisher()).abs() < 1e-8);
        }
    }
}

#[test]
fn fisher_against_brute_force_integral() {
    let base = Density1d::laplace(0.0, 1.0).unwrap();
    for r in [0.25, 1.0] {
        let m = SmoothedModel1d::new(base.clone(), r).unwrap();
        // I_r = ∫ f_r'(x)² / f_r(x) dx with f_r' by differentiating the kernel
        let d_kernel = |t: f64| -t / (r * r) * (-t * t / (2.0 * r * r)).exp() / (r * TAU.sqrt());
        let integrand = |x: f64| {
            let f = brute_pdf(&base, r, x, 4_000);
            let df = simpson(x - 14.0 * r, x + 14.0 * r, 4_000, |u| d_kernel(x - u) * base.pdf(u));
            df * df / f
        };
        let oracle = simpson(-30.0, 30.0, 6_000, integrand);
        assert!((m.fisher() - oracle).abs() < 1e-6, "r={r}: {} vs {oracle}", m.fisher());
    }
}

#[test]
fn score_has_mean_zero() {
    for base in non_gaussian_bases() {
        for r in [0.05, 0.5] {
            let m = SmoothedModel1d::new(base.clone(), r).unwrap();
            assert!(m.expected_shifted_score(0.0).abs() < 1e-9, "{base} r={r}");
        }
    }
}

#[test]
fn sawtooth_sampler_passes_ks() {
    let base = Density1d::sawtooth(0.05, 4.0).unwrap();
    let xs = base.sample(50_000, RngSeed::new(12, 0));
    let d = ks_statistic(&xs, |x| base.cdf(x));
    assert!(d < ks_critical(xs.len(), 0.001), "{d}");
}

#[test]
fn monte_carlo_fisher_matches_quadrature() {
    let base = DensityHd::new(vec![
        Density1d::laplace(0.0, 1.0).unwrap(),
        Density1d::sawtooth(0.1, 2.0).unwrap(),
        Density1d::laplace(0.0, 1.0).unwrap(),
    ])
    .unwrap();
    let m = SmoothedModelHd::new(base, 0.5).unwrap().with_mc_samples(100_000);
    let exact = m.fisher();
    let mc = m.fisher_monte_carlo(RngSeed::new(6, 0)).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            let tol = 5.0 * mc.std_error[(i, j)] + 1e-12;
            assert!((mc.matrix[(i, j)] - exact.matrix[(i, j)]).abs() < tol, "({i},{j})");
        }
    }
    assert!(mc.relative_std_error < 0.02);
    let too_few = SmoothedModelHd::new(DensityHd::iid(Density1d::laplace(0.0, 1.0).unwrap(), 2).unwrap(), 1.0)
        .unwrap()
        .with_mc_samples(999);
    assert!(too_few.fisher_monte_carlo(RngSeed::new(0, 0)).is_err());
}

#[test]
fn product_score_is_coordinatewise() {
    let l = Density1d::laplace(0.0, 1.0).unwrap();
    let g = Density1d::gaussian(1.0, 2.0).unwrap();
    let m = SmoothedModelHd::new(DensityHd::new(vec![l.clone(), g.clone()]).unwrap(), 0.7).unwrap();
    let x = DVector::from_vec(vec![0.4, -1.1]);
    let s = m.score(&x).unwrap();
    let ml = SmoothedModel1d::new(l, 0.7).unwrap();
    let mg = SmoothedModel1d::new(g, 0.7).unwrap();
    assert_eq!(s[0], ml.score(0.4).unwrap());
    assert_eq!(s[1], mg.score(-1.1).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fisher_sandwich_and_monotone(idx in 0usize..4, r in 0.02..3.0f64, bump in 1.05..2.0f64) {
        let base = non_gaussian_bases().swap_remove(idx);
        let var = base.variance();
        let small = SmoothedModel1d::new(base.clone(), r).unwrap().fisher();
        let large = SmoothedModel1d::new(base, r * bump).unwrap().fisher();
        prop_assert!(1.0 / (var + r * r) <= small + 1e-6);
        prop_assert!(small <= 1.0 / (r * r) + 1e-6);
        prop_assert!(large <= small + 1e-9);
    }

    #[test]
    fn translation_equivariance(shift in -5.0..5.0f64, x in -3.0..3.0f64) {
        let base = Density1d::laplace(0.0, 1.0).unwrap();
        let m0 = SmoothedModel1d::new(base.clone(), 0.4).unwrap();
        let m1 = SmoothedModel1d::new(base.with_shift(shift), 0.4).unwrap();
        prop_assert!((m1.pdf(x + shift) - m0.pdf(x)).abs() < 1e-12);
        prop_assert!((m1.score(x + shift).unwrap() - m0.score(x).unwrap()).abs() < 1e-9);
    }
}
