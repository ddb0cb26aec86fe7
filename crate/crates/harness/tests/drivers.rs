use smoothloc::config::ExperimentConfig;
use smoothloc::experiments::{
    run_coverage, run_fisher_sweep, run_sawtooth_phase, CoverageSpec, PhaseSpec,
};
use smoothloc_core::estimator1d::Config1d;
use smoothloc_core::Density1d;

#[test]
fn fisher_sweep_examples() {
    let saw = run_fisher_sweep(&Density1d::sawtooth(0.05, 4.0).unwrap(), &[0.01, 0.2]).unwrap();
    let i = saw.reals("fisher");
    assert!(i[0] >= 2.0 * i[1], "{i:?}");

    let grid = [0.05, 0.1, 0.25, 0.5, 1.0, 2.0];
    let lap = run_fisher_sweep(&Density1d::laplace(0.0, 1.0).unwrap(), &grid).unwrap();
    let i = lap.reals("fisher");
    assert!(i.windows(2).all(|w| w[1] <= w[0]), "{i:?}");
    for ((f, lo), hi) in i.iter().zip(lap.reals("lower_bound")).zip(lap.reals("upper_bound")) {
        assert!(lo <= *f && *f <= hi);
    }
}

#[test]
fn gaussian_coverage_failure_rate() {
    let spec = CoverageSpec {
        base: Density1d::gaussian(0.0, 1.0).unwrap(),
        n: 10_000,
        trials: 2000,
        cfg: Config1d::default(),
        lambda: 0.25,
        radius_multiplier: 1.3,
        seed: 17,
    };
    let out = run_coverage(&spec, 1).unwrap();
    assert_eq!(out.summary.errors, 0);
    assert!(out.summary.failure_rate <= 0.12, "{:?}", out.summary);
}

#[test]
fn single_trial_reruns_identically() {
    let spec = CoverageSpec {
        base: Density1d::laplace(0.0, 1.0).unwrap(),
        n: 1000,
        trials: 1,
        cfg: Config1d::default(),
        lambda: 0.0,
        radius_multiplier: 1.3,
        seed: 99,
    };
    let a = run_coverage(&spec, 1).unwrap().table.to_csv_string();
    let b = run_coverage(&spec, 1).unwrap().table.to_csv_string();
    assert_eq!(a, b);
}

/// With no sawtooth the local step is the mean of `n_local` perturbed samples, so
/// `median|λ̂ - λ|·√n = Φ⁻¹(3/4)·√((σ² + r²)·n/n_local)` exactly in distribution.
#[test]
fn flat_sawtooth_matches_gaussian_local_mean() {
    const MEDIAN_ABS_NORMAL: f64 = 0.674_489_750_196_081_7;
    let spec = PhaseSpec {
        width: 0.05,
        slope: 0.0,
        n_grid: vec![100, 3000],
        trials_grid: vec![3000, 300],
        cfg: Config1d {
            min_n_constant: 1.0,
            ..Config1d::default()
        },
        lambda: 0.4,
        seed: 21,
    };
    let (_, rows) = run_sawtooth_phase(&spec, 1).unwrap();
    let var = Density1d::sawtooth(0.05, 0.0).unwrap().variance();
    for row in &rows {
        let est = smoothloc_core::estimator1d::Estimator1d::new(
            &Density1d::sawtooth(0.05, 0.0).unwrap(),
            row.n,
            &spec.cfg,
        )
        .unwrap();
        let n_local = (row.n - est.n_init()) as f64;
        let predicted = MEDIAN_ABS_NORMAL * ((var + row.r_used.powi(2)) * row.n as f64 / n_local).sqrt();
        // sample-median sd of |Z| is about 1.17/√T in units of the median
        let tol = 4.0 * 1.17 / (row.trials as f64).sqrt();
        assert_eq!(row.errors, 0);
        assert!(
            (row.normalized_error / predicted - 1.0).abs() < tol,
            "n={} got {} predicted {}",
            row.n,
            row.normalized_error,
            predicted
        );
    }
}

#[test]
fn config_text_round_trips_through_display() {
    let text = "experiment = sawtooth-phase\nn_grid = 100,1000000\ntrials_grid = 4000,100\n\
                width = 0.05\nslope = 4\nmin_n_constant = 1\nseed = 7\n";
    let cfg = ExperimentConfig::parse(text).unwrap();
    let once = cfg.to_string();
    assert_eq!(ExperimentConfig::parse(&once).unwrap(), cfg);
    assert_eq!(ExperimentConfig::parse(&once).unwrap().to_string(), once);
}
