//! Seeded Monte Carlo studies of the estimators at reduced trial counts.

use nalgebra::DVector;
use smoothloc_core::estimator1d::{global_mle_1d, local_mle_1d_with, Config1d, Estimator1d};
use smoothloc_core::estimatorhd::{geometric_median_of_means, local_mle_hd_with, ConfigHd, EstimatorHd};
use smoothloc_core::stats::{ceil_order_statistic, sorted};
use smoothloc_core::{Density1d, DensityHd, RngSeed, SmoothedModel1d, SmoothedModelHd};

fn quantile(values: &[f64], p: f64) -> f64 {
    ceil_order_statistic(&sorted(values), p)
}

#[test]
fn local_1d_laplace_error_quantile() {
    let base = Density1d::laplace(0.0, 1.0).unwrap();
    let model = SmoothedModel1d::new(base.clone(), 0.3).unwrap();
    let truth = base.clone().with_shift(3.0);
    let n = 10_000;
    let errs: Vec<f64> = (0..300)
        .map(|t| {
            let xs = truth.sample(n, RngSeed::new(100, 2 * t));
            let hat = local_mle_1d_with(&model, &xs, 3.05, RngSeed::new(100, 2 * t + 1)).unwrap();
            (hat - 3.0).abs()
        })
        .collect();
    let radius = (2.0 * 20f64.ln() / (n as f64 * model.fisher())).sqrt();
    assert!(quantile(&errs, 0.9) <= 1.3 * radius, "{} vs {}", quantile(&errs, 0.9), radius);
}

#[test]
fn global_1d_is_shift_equivariant() {
    let base = Density1d::sawtooth(0.1, 2.0).unwrap();
    let xs = base.sample(3000, RngSeed::new(4, 0));
    let cfg = Config1d::default();
    let seed = RngSeed::new(4, 1);
    let a = global_mle_1d(&base, &xs, &cfg, seed).unwrap();
    for c in [-7.25, 0.5, 40.0] {
        let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
        let b = global_mle_1d(&base, &shifted, &cfg, seed).unwrap();
        assert!((b.lambda_hat - a.lambda_hat - c).abs() < 1e-9 * (1.0 + c.abs()));
        assert!((b.lambda_initial - a.lambda_initial - c).abs() < 1e-12 * (1.0 + c.abs()));
    }
}

#[test]
fn global_1d_gaussian_failure_rate() {
    let base = Density1d::gaussian(0.0, 1.0).unwrap();
    let n = 10_000;
    let est = Estimator1d::new(&base, n, &Config1d::with_delta(0.1)).unwrap();
    let trials = 400;
    let fails = (0..trials)
        .filter(|&t| {
            let xs = base.sample(n, RngSeed::new(55, 2 * t));
            let rep = est.estimate(&xs, RngSeed::new(55, 2 * t + 1)).unwrap();
            rep.lambda_hat.abs() > rep.theoretical_radius
        })
        .count();
    assert!((fails as f64) / (trials as f64) <= 0.12, "{fails}");
}

#[test]
fn mom_initialization_error_quantile() {
    let d = 4;
    let base = DensityHd::iid(Density1d::laplace(0.0, 1.0).unwrap(), d).unwrap();
    let n = 10_000;
    let errs: Vec<f64> = (0..500)
        .map(|t| {
            let xs = base.sample(n, RngSeed::new(9, t));
            geometric_median_of_means(&xs, 0.05, 3.5).unwrap().norm()
        })
        .collect();
    let (tr, op) = (2.0 * d as f64, 2.0);
    let bound = 3.0 * ((tr / n as f64).sqrt() + (op * 20f64.ln() / n as f64).sqrt());
    assert!(quantile(&errs, 0.95) <= bound);
}

#[test]
fn local_hd_laplace_error_quantile() {
    let base = DensityHd::iid(Density1d::laplace(0.0, 1.0).unwrap(), 4).unwrap();
    let lambda = DVector::from_vec(vec![1.0, -1.0, 2.0, 0.0]);
    let truth = base.clone().with_shift(lambda.clone()).unwrap();
    let model = SmoothedModelHd::new(base, 0.5).unwrap();
    let lambda1 = &lambda + DVector::from_element(4, 0.05);
    let n = 5000;
    let errs: Vec<f64> = (0..200)
        .map(|t| {
            let xs = truth.sample(n, RngSeed::new(21, 2 * t));
            let hat = local_mle_hd_with(&model, &xs, &lambda1, RngSeed::new(21, 2 * t + 1)).unwrap();
            (hat - &lambda).norm()
        })
        .collect();
    let inv = model.fisher().inverse();
    let nf = n as f64;
    let bound = 1.3 * ((inv.trace() / nf).sqrt() + 4.0 * (inv.diagonal().max() * 20f64.ln() / nf).sqrt());
    assert!(quantile(&errs, 0.9) <= bound);
}

#[test]
fn global_hd_equivariance_and_permutation() {
    let base = DensityHd::iid(Density1d::gaussian(0.0, 1.0).unwrap(), 3).unwrap();
    let cfg = ConfigHd::default();
    let est = EstimatorHd::new(&base, 600, &cfg).unwrap();
    let xs = base.sample(600, RngSeed::new(3, 0));
    let seed = RngSeed::new(3, 1);
    let a = est.estimate(&xs, seed).unwrap();
    let c = DVector::from_vec(vec![5.0, -2.5, 0.125]);
    let shifted: Vec<DVector<f64>> = xs.iter().map(|x| x + &c).collect();
    let b = est.estimate(&shifted, seed).unwrap();
    assert!((&b.lambda_hat - &a.lambda_hat - &c).amax() < 1e-9);

    // spherical Gaussian: a coordinate permutation permutes the estimate, with the
    // smoothing noise permuted alongside (the noise is applied coordinatewise in order)
    let perm = [2usize, 0, 1];
    let permute = |x: &DVector<f64>| DVector::from_iterator(3, perm.iter().map(|&i| x[i]));
    let (init, local) = est.split(&xs);
    let noise: Vec<DVector<f64>> = smoothloc_core::estimatorhd::perturb_hd(local, 1.0, seed)
        .iter()
        .zip(local)
        .map(|(p, x)| p - x)
        .collect();
    let lambda1 = geometric_median_of_means(init, cfg.delta, cfg.mom_buckets_multiplier).unwrap();
    let direct: DVector<f64> = local.iter().zip(&noise).fold(DVector::zeros(3), |acc, (x, z)| acc + x + z) / local.len() as f64;
    assert!((&a.lambda_hat - &direct).amax() < 1e-12);
    let lambda1_perm = geometric_median_of_means(&init.iter().map(permute).collect::<Vec<_>>(), cfg.delta, 3.5).unwrap();
    assert!((permute(&lambda1) - lambda1_perm).amax() < 1e-12);
    let direct_perm: DVector<f64> = local
        .iter()
        .zip(&noise)
        .fold(DVector::zeros(3), |acc, (x, z)| acc + permute(x) + permute(z))
        / local.len() as f64;
    assert!((permute(&direct) - direct_perm).amax() < 1e-12);
}

#[test]
fn global_hd_gaussian_coverage() {
    let base = DensityHd::iid(Density1d::gaussian(0.0, 1.0).unwrap(), 8).unwrap();
    let cfg = ConfigHd {
        delta: 0.1,
        r: 1.0,
        eta: 0.25,
        ..ConfigHd::default()
    };
    let est = EstimatorHd::new(&base, 500, &cfg).unwrap();
    let trials = 300;
    let fails = (0..trials)
        .filter(|&t| {
            let xs = base.sample(500, RngSeed::new(17, 2 * t));
            let rep = est.estimate(&xs, RngSeed::new(17, 2 * t + 1)).unwrap();
            rep.lambda_hat.norm() > rep.m_norm_error_bound
        })
        .count();
    assert!(fails as f64 / trials as f64 <= 0.13);
}
