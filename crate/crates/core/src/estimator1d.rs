//! One-dimensional smoothed-MLE location estimation.
//!
//! The local estimator takes a single Newton step on the empirical `r`-smoothed
//! score from a rough initial guess. The global estimator builds that guess from
//! a sample quantile on a disjoint prefix of the data, then runs the local step
//! on the remaining samples with the radius schedule
//! `r* = c·(log(2/δ)/n)^{1/8}·IQR`.
//!
//! The shift of the base density is ignored throughout: `λ` is measured relative
//! to the unshifted shape.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{Density1d, QUANTILE_TOL};
use crate::rng::RngSeed;
use crate::smoothing::SmoothedModel1d;
use crate::stats::{ceil_order_statistic, sorted};

#[derive(Debug, Clone, PartialEq)]
pub struct Config1d {
    /// Failure probability in `(0, 0.5]`.
    pub delta: f64,
    /// Constant `c` in `r* = c·(log(2/δ)/n)^{1/8}·IQR`.
    pub r_star_multiplier: f64,
    /// The initialization stage takes the first `⌈(log(2/δ)/n)^e·n⌉` samples.
    pub init_fraction_exponent: f64,
    /// `q = q_multiplier·(log(2/δ)/n)^{2/5}`.
    pub q_multiplier: f64,
    pub alpha_grid_step: f64,
    /// Fixed smoothing radius replacing the schedule.
    pub r_override: Option<f64>,
    /// Minimal sample size is `min_n_constant·log(2/δ)`.
    pub min_n_constant: f64,
}

impl Default for Config1d {
    fn default() -> Self {
        Self {
            delta: 0.1,
            r_star_multiplier: 0.5,
            init_fraction_exponent: 0.1,
            q_multiplier: std::f64::consts::SQRT_2,
            alpha_grid_step: 1e-3,
            r_override: None,
            min_n_constant: 100.0,
        }
    }
}

impl Config1d {
    pub fn with_delta(delta: f64) -> Self {
        Self {
            delta,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta <= 0.5) {
            return Err(Error::Config(format!("delta = {} must lie in (0, 0.5]", self.delta)));
        }
        let positive = [
            ("r_star_multiplier", self.r_star_multiplier),
            ("init_fraction_exponent", self.init_fraction_exponent),
            ("q_multiplier", self.q_multiplier),
            ("alpha_grid_step", self.alpha_grid_step),
            ("min_n_constant", self.min_n_constant),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} = {v} must be positive")));
            }
        }
        if self.alpha_grid_step >= 0.5 {
            return Err(Error::Config(format!("alpha_grid_step = {} must be below 0.5", self.alpha_grid_step)));
        }
        if let Some(r) = self.r_override {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Config(format!("r_override = {r} must be positive")));
            }
        }
        Ok(())
    }

    fn log_term(&self) -> f64 {
        (2.0 / self.delta).ln()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub lambda_hat: f64,
    pub lambda_initial: f64,
    pub r_used: f64,
    pub fisher_at_r: f64,
    /// `√(2·log(2/δ)/(n_used_local·I_r))`.
    pub theoretical_radius: f64,
    pub n_used_local: usize,
    pub n_used_init: usize,
    pub alpha: f64,
    pub q: f64,
}

/// Adds independent `N(0, r²)` noise to every sample, in order, from `seed`.
pub fn perturb(samples: &[f64], r: f64, seed: RngSeed) -> Vec<f64> {
    let mut rng = seed.rng();
    samples
        .iter()
        .map(|&x| {
            let z: f64 = rng.sample(StandardNormal);
            x + r * z
        })
        .collect()
}

/// One Newton step `λ₁ - ŝ(λ₁)/I_r` from `lambda1`, with a prebuilt smoothed model.
pub fn local_mle_1d_with(model: &SmoothedModel1d, samples: &[f64], lambda1: f64, seed: RngSeed) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Config("local estimator needs at least one sample".into()));
    }
    let perturbed = perturb(samples, model.r(), seed);
    let mut sum = 0.0;
    for &x in &perturbed {
        let point = x - lambda1;
        sum += model.score(point).map_err(|e| match e {
            Error::TailUnderflow { density, .. } => Error::Estimator {
                coordinate: 0,
                point,
                reason: format!("smoothed density underflow ({density:e}); the initial estimate is far off"),
            },
            other => other,
        })?;
    }
    let empirical_score = sum / perturbed.len() as f64;
    Ok(lambda1 - empirical_score / model.fisher())
}

pub fn local_mle_1d(base: &Density1d, r: f64, samples: &[f64], lambda1: f64, seed: RngSeed) -> Result<f64> {
    let model = SmoothedModel1d::new(base.unshifted(), r)?;
    local_mle_1d_with(&model, samples, lambda1, seed)
}

/// `α ∈ (q, 1-q)` on the grid `0.5 ± k·step` minimizing the width of `[Q(α-q), Q(α+q)]`.
///
/// Widths within quantile resolution of each other count as ties, which go to
/// the grid point closest to 0.5.
pub fn choose_alpha(base: &Density1d, q: f64, step: f64) -> Result<f64> {
    if !(q > 0.0 && q < 0.5) {
        return Err(Error::Domain(format!("q = {q} must lie in (0, 1/2)")));
    }
    if !(step > 0.0 && step < 0.5) {
        return Err(Error::Domain(format!("alpha grid step = {step} must lie in (0, 1/2)")));
    }
    let shape = base.unshifted();
    let width = |alpha: f64| -> Result<f64> { Ok(shape.quantile(alpha + q)? - shape.quantile(alpha - q)?) };
    let tie = 4.0 * QUANTILE_TOL;
    let mut best = (0.5, width(0.5)?);
    let mut k = 1usize;
    loop {
        let offset = k as f64 * step;
        let lo = 0.5 - offset;
        if lo - q <= 1e-12 {
            break;
        }
        for alpha in [0.5 + offset, lo] {
            let w = width(alpha)?;
            if w < best.1 - tie {
                best = (alpha, w);
            }
        }
        k += 1;
    }
    Ok(best.0)
}

/// Sample `α`-quantile (order statistic `⌈α·m⌉`) minus the base `α`-quantile.
pub fn quantile_initial_estimate(base: &Density1d, samples_init: &[f64], alpha: f64) -> Result<f64> {
    if samples_init.len() < 2 {
        return Err(Error::Config(format!(
            "initial estimate needs at least 2 samples, got {}",
            samples_init.len()
        )));
    }
    let s = sorted(samples_init);
    Ok(ceil_order_statistic(&s, alpha) - base.unshifted().quantile(alpha)?)
}

/// The global estimator with everything that depends only on `(base, n, cfg)` precomputed.
#[derive(Debug, Clone)]
pub struct Estimator1d {
    base: Density1d,
    cfg: Config1d,
    n: usize,
    n_init: usize,
    q: f64,
    alpha: f64,
    model: SmoothedModel1d,
}

impl Estimator1d {
    pub fn new(base: &Density1d, n: usize, cfg: &Config1d) -> Result<Self> {
        cfg.validate()?;
        let base = base.unshifted();
        let log_term = cfg.log_term();
        let nf = n as f64;
        let min_n = minimal_sample_size(cfg);
        if nf < cfg.min_n_constant * log_term {
            return Err(Error::Config(format!(
                "n = {n} is below {} * log(2/delta); need n >= {min_n}",
                cfg.min_n_constant
            )));
        }
        let ratio = log_term / nf;
        let q = cfg.q_multiplier * ratio.powf(0.4);
        if q >= 0.5 {
            return Err(Error::Config(format!("n = {n} gives q = {q} >= 1/2; need n >= {min_n}")));
        }
        let n_init = (ratio.powf(cfg.init_fraction_exponent) * nf).ceil() as usize;
        if n_init < 2 || n_init >= n {
            return Err(Error::Config(format!(
                "n = {n} leaves an empty stage (init {n_init}, local {}); need n >= {min_n}",
                n.saturating_sub(n_init)
            )));
        }
        let alpha = choose_alpha(&base, q, cfg.alpha_grid_step)?;
        let r = match cfg.r_override {
            Some(r) => r,
            None => cfg.r_star_multiplier * ratio.powf(0.125) * base.iqr(),
        };
        let model = SmoothedModel1d::new(base.clone(), r)?;
        model.fisher();
        Ok(Self {
            base,
            cfg: cfg.clone(),
            n,
            n_init,
            q,
            alpha,
            model,
        })
    }

    pub fn n_init(&self) -> usize {
        self.n_init
    }

    pub fn r(&self) -> f64 {
        self.model.r()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn model(&self) -> &SmoothedModel1d {
        &self.model
    }

    /// Samples `[0, n_init)` feed the quantile stage and `[n_init, n)` the Newton step.
    pub fn split<'a>(&self, samples: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        samples.split_at(self.n_init)
    }

    pub fn estimate(&self, samples: &[f64], seed: RngSeed) -> Result<EstimateReport> {
        if samples.len() != self.n {
            return Err(Error::Config(format!(
                "estimator prepared for n = {}, got {} samples",
                self.n,
                samples.len()
            )));
        }
        let (init, local) = self.split(samples);
        let lambda_initial = quantile_initial_estimate(&self.base, init, self.alpha)?;
        let lambda_hat = local_mle_1d_with(&self.model, local, lambda_initial, seed)?;
        let fisher = self.model.fisher();
        Ok(EstimateReport {
            lambda_hat,
            lambda_initial,
            r_used: self.model.r(),
            fisher_at_r: fisher,
            theoretical_radius: (2.0 * self.cfg.log_term() / (local.len() as f64 * fisher)).sqrt(),
            n_used_local: local.len(),
            n_used_init: init.len(),
            alpha: self.alpha,
            q: self.q,
        })
    }
}

/// Smallest `n` accepted by [`Estimator1d::new`] under `cfg`'s guards.
pub fn minimal_sample_size(cfg: &Config1d) -> usize {
    let log_term = cfg.log_term();
    let guard = (cfg.min_n_constant * log_term).ceil();
    // q < 1/2  <=>  n > log(2/δ)·(2·q_multiplier)^{5/2}
    let q_bound = (log_term * (2.0 * cfg.q_multiplier).powf(2.5)).floor() + 1.0;
    let mut n = guard.max(q_bound).max(3.0) as usize;
    loop {
        let nf = n as f64;
        let n_init = ((log_term / nf).powf(cfg.init_fraction_exponent) * nf).ceil() as usize;
        if n_init >= 2 && n_init < n {
            return n;
        }
        n += 1;
    }
}

pub fn global_mle_1d(base: &Density1d, samples: &[f64], cfg: &Config1d, seed: RngSeed) -> Result<EstimateReport> {
    Estimator1d::new(base, samples.len(), cfg)?.estimate(samples, seed)
}
