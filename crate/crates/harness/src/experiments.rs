//! Experiment drivers. Each returns a [`CsvTable`] and, where useful, a typed summary.

use nalgebra::{DMatrix, DVector};
use smoothloc_core::concentration::{tail_report, VectorGenerator};
use smoothloc_core::estimator1d::{Config1d, Estimator1d};
use smoothloc_core::estimatorhd::{ConfigHd, EstimatorHd};
use smoothloc_core::stats::{mean, median};
use smoothloc_core::{Density1d, DensityHd, ModelSpec, RngSeed, SmoothedModel1d, SmoothedModelHd};

use crate::config::{Experiment, ExperimentConfig};
use crate::error::{Error, Result};
use crate::runner::{run_indexed, trial_seed};
use crate::table::{real, CsvTable};

const SAMPLES: u64 = 0;
const NOISE: u64 = 1;

fn vector_cell(v: &DVector<f64>) -> String {
    v.iter().map(|x| real(*x)).collect::<Vec<_>>().join(";")
}

fn sample_mean_hd(xs: &[DVector<f64>]) -> DVector<f64> {
    xs.iter().fold(DVector::zeros(xs[0].len()), |acc, x| acc + x) / xs.len() as f64
}

/// `(r, I_r, 1/(Var + r²), 1/r²)` for every `r` in the grid.
pub fn run_fisher_sweep(base: &Density1d, r_grid: &[f64]) -> Result<CsvTable> {
    let mut t = CsvTable::new(&["r", "fisher", "lower_bound", "upper_bound"]);
    let var = base.variance();
    for &r in r_grid {
        let m = SmoothedModel1d::new(base.clone(), r)?;
        t.push(vec![real(r), real(m.fisher()), real(1.0 / (var + r * r)), real(1.0 / (r * r))]);
    }
    Ok(t)
}

/// One global estimate from `n` samples of `base` shifted by `lambda`.
pub fn run_estimate(base: &Density1d, n: usize, cfg: &Config1d, lambda: f64, seed: u64) -> Result<CsvTable> {
    let est = Estimator1d::new(base, n, cfg)?;
    let xs = base.clone().with_shift(lambda).sample(n, trial_seed(seed, 0, SAMPLES));
    let rep = est.estimate(&xs, trial_seed(seed, 0, NOISE))?;
    let mut t = CsvTable::new(&[
        "lambda_true",
        "lambda_hat",
        "lambda_initial",
        "abs_err",
        "r_used",
        "fisher_at_r",
        "theoretical_radius",
        "n_used_init",
        "n_used_local",
        "alpha",
        "q",
        "baseline_mean",
    ]);
    t.push(vec![
        real(lambda),
        real(rep.lambda_hat),
        real(rep.lambda_initial),
        real((rep.lambda_hat - lambda).abs()),
        real(rep.r_used),
        real(rep.fisher_at_r),
        real(rep.theoretical_radius),
        rep.n_used_init.to_string(),
        rep.n_used_local.to_string(),
        real(rep.alpha),
        real(rep.q),
        real(mean(&xs)),
    ]);
    Ok(t)
}

pub fn run_estimate_hd(base: &DensityHd, n: usize, cfg: &ConfigHd, lambda: f64, seed: u64) -> Result<CsvTable> {
    let est = EstimatorHd::new(base, n, cfg)?;
    let truth = DVector::from_element(base.dim(), lambda);
    let xs = base.clone().with_shift(truth.clone())?.sample(n, trial_seed(seed, 0, SAMPLES));
    let rep = est.estimate(&xs, trial_seed(seed, 0, NOISE))?;
    let mut t = CsvTable::new(&[
        "d",
        "n",
        "n_used_init",
        "n_used_local",
        "error_norm",
        "m_norm_error_bound",
        "d_eff_t",
        "baseline_error_norm",
        "lambda_hat",
        "lambda_initial",
    ]);
    t.push(vec![
        base.dim().to_string(),
        n.to_string(),
        rep.n_used_init.to_string(),
        rep.n_used_local.to_string(),
        real(est.error(&rep.lambda_hat, &truth)?),
        real(rep.m_norm_error_bound),
        real(rep.d_eff_t),
        real(est.error(&sample_mean_hd(&xs), &truth)?),
        vector_cell(&rep.lambda_hat),
        vector_cell(&rep.lambda_initial),
    ]);
    Ok(t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageSummary {
    pub trials: usize,
    /// Trials outside the threshold, including error trials.
    pub failures: usize,
    pub errors: usize,
    pub failure_rate: f64,
    /// Over successful trials.
    pub median_abs_err: f64,
    pub median_baseline_abs_err: f64,
    pub threshold: f64,
    pub r_used: f64,
    pub fisher_at_r: f64,
}

#[derive(Debug, Clone)]
pub struct CoverageOutcome {
    pub table: CsvTable,
    pub summary: CoverageSummary,
}

#[derive(Debug, Clone)]
pub struct CoverageSpec {
    pub base: Density1d,
    pub n: usize,
    pub trials: usize,
    pub cfg: Config1d,
    pub lambda: f64,
    /// The threshold is `radius_multiplier·√(2·log(2/δ)/(n·I_r))`, `n` the total sample count.
    pub radius_multiplier: f64,
    pub seed: u64,
}

enum Trial1d {
    Ok { hat: f64, initial: f64, radius: f64, baseline: f64 },
    Failed { baseline: f64, message: String },
}

/// Per-trial rows followed by one `summary` row.
///
/// In the summary row `abs_err` and `baseline_abs_err` are medians over successful
/// trials, `within` counts trials inside the threshold and `message` carries the
/// failure tally.
pub fn run_coverage(spec: &CoverageSpec, threads: usize) -> Result<CoverageOutcome> {
    let est = Estimator1d::new(&spec.base, spec.n, &spec.cfg)?;
    let truth = spec.base.unshifted().with_shift(spec.lambda);
    let fisher = est.model().fisher();
    let threshold = spec.radius_multiplier * (2.0 * (2.0 / spec.cfg.delta).ln() / (spec.n as f64 * fisher)).sqrt();
    let results = run_indexed(spec.trials, threads, |t| {
        let xs = truth.sample(spec.n, trial_seed(spec.seed, t as u64, SAMPLES));
        let baseline = mean(&xs);
        match est.estimate(&xs, trial_seed(spec.seed, t as u64, NOISE)) {
            Ok(rep) => Trial1d::Ok {
                hat: rep.lambda_hat,
                initial: rep.lambda_initial,
                radius: rep.theoretical_radius,
                baseline,
            },
            Err(e) => Trial1d::Failed {
                baseline,
                message: e.to_string(),
            },
        }
    })?;

    let mut table = CsvTable::new(&[
        "trial",
        "status",
        "lambda_true",
        "lambda_hat",
        "lambda_initial",
        "abs_err",
        "theoretical_radius",
        "threshold",
        "within",
        "baseline_mean",
        "baseline_abs_err",
        "message",
    ]);
    let (mut errs, mut base_errs) = (Vec::new(), Vec::new());
    let (mut within, mut errors) = (0usize, 0usize);
    let lam = real(spec.lambda);
    for (t, res) in results.iter().enumerate() {
        match res {
            Trial1d::Ok {
                hat,
                initial,
                radius,
                baseline,
            } => {
                let err = (hat - spec.lambda).abs();
                let base_err = (baseline - spec.lambda).abs();
                let inside = err <= threshold;
                within += inside as usize;
                errs.push(err);
                base_errs.push(base_err);
                table.push(vec![
                    t.to_string(),
                    "ok".into(),
                    lam.clone(),
                    real(*hat),
                    real(*initial),
                    real(err),
                    real(*radius),
                    real(threshold),
                    (inside as u8).to_string(),
                    real(*baseline),
                    real(base_err),
                    String::new(),
                ]);
            }
            Trial1d::Failed { baseline, message } => {
                errors += 1;
                table.push(vec![
                    t.to_string(),
                    "error".into(),
                    lam.clone(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    real(threshold),
                    "0".into(),
                    real(*baseline),
                    real((baseline - spec.lambda).abs()),
                    message.clone(),
                ]);
            }
        }
    }
    let failures = spec.trials - within;
    let summary = CoverageSummary {
        trials: spec.trials,
        failures,
        errors,
        failure_rate: failures as f64 / spec.trials as f64,
        median_abs_err: if errs.is_empty() { f64::NAN } else { median(&errs) },
        median_baseline_abs_err: if base_errs.is_empty() { f64::NAN } else { median(&base_errs) },
        threshold,
        r_used: est.r(),
        fisher_at_r: fisher,
    };
    table.push(vec![
        "summary".into(),
        "summary".into(),
        lam,
        String::new(),
        String::new(),
        real(summary.median_abs_err),
        String::new(),
        real(threshold),
        within.to_string(),
        String::new(),
        real(summary.median_baseline_abs_err),
        format!(
            "trials={} failures={} errors={} failure_rate={}",
            summary.trials,
            failures,
            errors,
            real(summary.failure_rate)
        ),
    ]);
    Ok(CoverageOutcome { table, summary })
}

#[derive(Debug, Clone)]
pub struct CoverageHdSpec {
    pub base: DensityHd,
    pub n: usize,
    pub trials: usize,
    pub cfg: ConfigHd,
    pub lambda: f64,
    pub seed: u64,
}

/// Per-trial rows of `‖λ̂ - λ‖_M` against the reported bound, then a `summary` row.
pub fn run_coverage_hd(spec: &CoverageHdSpec, threads: usize) -> Result<CoverageOutcome> {
    let est = EstimatorHd::new(&spec.base, spec.n, &spec.cfg)?;
    let lambda = DVector::from_element(spec.base.dim(), spec.lambda);
    let truth = spec.base.unshifted().with_shift(lambda.clone())?;
    let results = run_indexed(spec.trials, threads, |t| {
        let xs = truth.sample(spec.n, trial_seed(spec.seed, t as u64, SAMPLES));
        let baseline = est.error(&sample_mean_hd(&xs), &lambda);
        let rep = est
            .estimate(&xs, trial_seed(spec.seed, t as u64, NOISE))
            .and_then(|rep| Ok((est.error(&rep.lambda_hat, &lambda)?, rep)));
        (rep, baseline)
    })?;
    let mut table = CsvTable::new(&[
        "trial",
        "status",
        "error_norm",
        "bound",
        "within",
        "baseline_error_norm",
        "d_eff_t",
        "n_used_init",
        "n_used_local",
        "message",
    ]);
    let (mut errs, mut base_errs) = (Vec::new(), Vec::new());
    let (mut within, mut errors, mut bound) = (0usize, 0usize, f64::NAN);
    for (t, (res, baseline)) in results.into_iter().enumerate() {
        let baseline = baseline?;
        base_errs.push(baseline);
        match res {
            Ok((err, rep)) => {
                bound = rep.m_norm_error_bound;
                let inside = err <= bound;
                within += inside as usize;
                errs.push(err);
                table.push(vec![
                    t.to_string(),
                    "ok".into(),
                    real(err),
                    real(bound),
                    (inside as u8).to_string(),
                    real(baseline),
                    real(rep.d_eff_t),
                    rep.n_used_init.to_string(),
                    rep.n_used_local.to_string(),
                    String::new(),
                ]);
            }
            Err(e) => {
                errors += 1;
                table.push(vec![
                    t.to_string(),
                    "error".into(),
                    String::new(),
                    String::new(),
                    "0".into(),
                    real(baseline),
                    String::new(),
                    String::new(),
                    String::new(),
                    e.to_string(),
                ]);
            }
        }
    }
    let failures = spec.trials - within;
    let summary = CoverageSummary {
        trials: spec.trials,
        failures,
        errors,
        failure_rate: failures as f64 / spec.trials as f64,
        median_abs_err: if errs.is_empty() { f64::NAN } else { median(&errs) },
        median_baseline_abs_err: median(&base_errs),
        threshold: bound,
        r_used: spec.cfg.r,
        fisher_at_r: est.model().fisher().matrix.diagonal().min(),
    };
    table.push(vec![
        "summary".into(),
        "summary".into(),
        real(summary.median_abs_err),
        real(bound),
        within.to_string(),
        real(summary.median_baseline_abs_err),
        String::new(),
        String::new(),
        String::new(),
        format!(
            "trials={} failures={} errors={} failure_rate={}",
            summary.trials,
            failures,
            errors,
            real(summary.failure_rate)
        ),
    ]);
    Ok(CoverageOutcome { table, summary })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRow {
    pub n: usize,
    pub trials: usize,
    pub errors: usize,
    pub median_abs_err: f64,
    /// `median|λ̂ - λ|·√n`; error trials count as infinite error.
    pub normalized_error: f64,
    pub r_used: f64,
    pub fisher_at_r: f64,
    pub baseline_normalized_error: f64,
}

#[derive(Debug, Clone)]
pub struct PhaseSpec {
    pub width: f64,
    pub slope: f64,
    pub n_grid: Vec<usize>,
    pub trials_grid: Vec<usize>,
    pub cfg: Config1d,
    pub lambda: f64,
    pub seed: u64,
}

/// Median normalized error of the global estimator across the `n` grid.
///
/// Trials of grid point `j` use streams `(seed, 2³²·j + t)`.
pub fn run_sawtooth_phase(spec: &PhaseSpec, threads: usize) -> Result<(CsvTable, Vec<PhaseRow>)> {
    if spec.n_grid.len() != spec.trials_grid.len() {
        return Err(Error::config("n grid and trial grid lengths differ"));
    }
    let base = Density1d::sawtooth(spec.width, spec.slope)?;
    let truth = base.clone().with_shift(spec.lambda);
    let estimators: Vec<Estimator1d> = spec
        .n_grid
        .iter()
        .map(|&n| Estimator1d::new(&base, n, &spec.cfg))
        .collect::<std::result::Result<_, _>>()?;
    let jobs: Vec<(usize, usize)> = spec
        .trials_grid
        .iter()
        .enumerate()
        .flat_map(|(j, &trials)| (0..trials).map(move |t| (j, t)))
        .collect();
    let results = run_indexed(jobs.len(), threads, |k| {
        let (j, t) = jobs[k];
        let n = spec.n_grid[j];
        let stream = ((j as u64) << 32) | t as u64;
        let xs = truth.sample(n, trial_seed(spec.seed, stream, SAMPLES));
        let baseline = (mean(&xs) - spec.lambda).abs();
        let err = estimators[j]
            .estimate(&xs, trial_seed(spec.seed, stream, NOISE))
            .map(|rep| (rep.lambda_hat - spec.lambda).abs())
            .ok();
        (j, err, baseline)
    })?;

    let mut rows = Vec::new();
    let mut table = CsvTable::new(&[
        "n",
        "trials",
        "errors",
        "median_abs_err",
        "normalized_error",
        "r_used",
        "fisher_at_r",
        "n_used_init",
        "n_used_local",
        "baseline_normalized_error",
    ]);
    for (j, (&n, est)) in spec.n_grid.iter().zip(&estimators).enumerate() {
        let cell: Vec<_> = results.iter().filter(|(jj, _, _)| *jj == j).collect();
        let errs: Vec<f64> = cell.iter().map(|(_, e, _)| e.unwrap_or(f64::INFINITY)).collect();
        let base: Vec<f64> = cell.iter().map(|(_, _, b)| *b).collect();
        let errors = cell.iter().filter(|(_, e, _)| e.is_none()).count();
        let med = median(&errs);
        let root = (n as f64).sqrt();
        let row = PhaseRow {
            n,
            trials: cell.len(),
            errors,
            median_abs_err: med,
            normalized_error: med * root,
            r_used: est.r(),
            fisher_at_r: est.model().fisher(),
            baseline_normalized_error: median(&base) * root,
        };
        table.push(vec![
            n.to_string(),
            row.trials.to_string(),
            errors.to_string(),
            real(row.median_abs_err),
            real(row.normalized_error),
            real(row.r_used),
            real(row.fisher_at_r),
            est.n_init().to_string(),
            (n - est.n_init()).to_string(),
            real(row.baseline_normalized_error),
        ]);
        rows.push(row);
    }
    Ok((table, rows))
}

pub const FAMILIES: [&str; 4] = ["gaussian", "centered-exponential", "scaled-rademacher", "score-vector"];

/// Generator for a named family at dimension `d`; `r` sets the smoothing of the score family.
pub fn generator(family: &str, d: usize, r: f64) -> Result<VectorGenerator> {
    Ok(match family {
        "gaussian" => VectorGenerator::gaussian(DMatrix::identity(d, d))?,
        "centered-exponential" => VectorGenerator::centered_exponential(DVector::from_element(d, 1.0))?,
        "scaled-rademacher" => VectorGenerator::scaled_rademacher(DVector::from_element(d, 1.0))?,
        "score-vector" => {
            let base = DensityHd::iid(Density1d::laplace(0.0, 1.0)?, d)?;
            VectorGenerator::score_vector(SmoothedModelHd::new(base, r)?, DVector::zeros(d))?
        }
        other => {
            return Err(Error::config(format!(
                "unknown generator family '{other}' (expected one of {})",
                FAMILIES.join(", ")
            )))
        }
    })
}

#[derive(Debug, Clone)]
pub struct ConcentrationSpec {
    pub families: Vec<String>,
    pub d_grid: Vec<usize>,
    pub delta_grid: Vec<f64>,
    pub trials: usize,
    pub r: f64,
    pub seed: u64,
}

/// One row per `(family, d, δ)`; each `(family, d)` cell draws once from stream `(seed, cell)`.
pub fn run_concentration(spec: &ConcentrationSpec, threads: usize) -> Result<CsvTable> {
    let cells: Vec<(&str, usize)> = spec
        .families
        .iter()
        .flat_map(|f| spec.d_grid.iter().map(move |&d| (f.as_str(), d)))
        .collect();
    let gens: Vec<VectorGenerator> = cells
        .iter()
        .map(|&(f, d)| generator(f, d, spec.r))
        .collect::<Result<_>>()?;
    let reports = run_indexed(cells.len(), threads, |c| {
        tail_report(&gens[c], &spec.delta_grid, spec.trials, RngSeed::new(spec.seed, c as u64))
    })?;
    let mut t = CsvTable::new(&[
        "family",
        "d",
        "delta",
        "trials",
        "empirical_q",
        "bound_subgamma",
        "bound_gaussian",
        "seed",
    ]);
    for (c, rep) in reports.into_iter().enumerate() {
        let rep = rep?;
        for (i, &delta) in rep.deltas.iter().enumerate() {
            t.push(vec![
                rep.family.clone(),
                rep.dim.to_string(),
                real(delta),
                rep.trials.to_string(),
                real(rep.empirical_quantiles[i]),
                real(rep.subgamma_bounds[i]),
                real(rep.gaussian_bounds[i]),
                format!("{}:{}", spec.seed, c),
            ]);
        }
    }
    Ok(t)
}

fn model_1d(cfg: &ExperimentConfig, e: Experiment) -> Result<Density1d> {
    let text = ExperimentConfig::require(&cfg.model, "model", e)?;
    Ok(ModelSpec::parse(&text)?.univariate()?)
}

/// Dispatches a parsed config to its driver.
pub fn run_experiment(cfg: &ExperimentConfig, threads: usize) -> Result<CsvTable> {
    let e = cfg
        .experiment
        .ok_or_else(|| Error::config("config does not name an experiment"))?;
    let req = |v: &Option<usize>, key: &str| ExperimentConfig::require(v, key, e);
    match e {
        Experiment::Estimate => run_estimate(
            &model_1d(cfg, e)?,
            req(&cfg.n, "n")?,
            &cfg.config_1d(),
            cfg.lambda.unwrap_or(0.0),
            cfg.seed(),
        ),
        Experiment::EstimateHd => {
            let text = ExperimentConfig::require(&cfg.model, "model", e)?;
            let base = ModelSpec::parse(&text)?.product()?;
            run_estimate_hd(&base, req(&cfg.n, "n")?, &cfg.config_hd(), cfg.lambda.unwrap_or(0.0), cfg.seed())
        }
        Experiment::FisherSweep => {
            let grid = ExperimentConfig::require(&cfg.r_grid, "r_grid", e)?;
            run_fisher_sweep(&model_1d(cfg, e)?, &grid)
        }
        Experiment::Coverage => {
            let spec = CoverageSpec {
                base: model_1d(cfg, e)?,
                n: req(&cfg.n, "n")?,
                trials: req(&cfg.trials, "trials")?,
                cfg: cfg.config_1d(),
                lambda: cfg.lambda.unwrap_or(0.0),
                radius_multiplier: cfg.radius_multiplier.unwrap_or(1.3),
                seed: cfg.seed(),
            };
            Ok(run_coverage(&spec, threads)?.table)
        }
        Experiment::CoverageHd => {
            let text = ExperimentConfig::require(&cfg.model, "model", e)?;
            let spec = CoverageHdSpec {
                base: ModelSpec::parse(&text)?.product()?,
                n: req(&cfg.n, "n")?,
                trials: req(&cfg.trials, "trials")?,
                cfg: cfg.config_hd(),
                lambda: cfg.lambda.unwrap_or(0.0),
                seed: cfg.seed(),
            };
            Ok(run_coverage_hd(&spec, threads)?.table)
        }
        Experiment::SawtoothPhase => {
            let n_grid = ExperimentConfig::require(&cfg.n_grid, "n_grid", e)?;
            let trials_grid = match (&cfg.trials_grid, cfg.trials) {
                (Some(ts), _) => ts.clone(),
                (None, Some(t)) => vec![t; n_grid.len()],
                (None, None) => return Err(Error::config("sawtooth-phase requires 'trials' or 'trials_grid'")),
            };
            let spec = PhaseSpec {
                width: cfg.width.unwrap_or(0.05),
                slope: cfg.slope.unwrap_or(4.0),
                n_grid,
                trials_grid,
                cfg: cfg.config_1d(),
                lambda: cfg.lambda.unwrap_or(0.0),
                seed: cfg.seed(),
            };
            Ok(run_sawtooth_phase(&spec, threads)?.0)
        }
        Experiment::Concentration => {
            let spec = ConcentrationSpec {
                families: cfg
                    .families
                    .clone()
                    .unwrap_or_else(|| vec!["gaussian".into(), "centered-exponential".into()]),
                d_grid: cfg.d_grid.clone().unwrap_or_else(|| vec![4, 16, 64]),
                delta_grid: cfg.delta_grid.clone().unwrap_or_else(|| vec![0.1, 0.01]),
                trials: cfg.trials.unwrap_or(100_000),
                r: cfg.r.unwrap_or(0.5),
                seed: cfg.seed(),
            };
            run_concentration(&spec, threads)
        }
    }
}
