//! High-dimensional smoothed-MLE location estimation with spherical smoothing `R = r²I`.
//!
//! [`global_mle_hd`] initializes with a geometric median-of-means on a disjoint
//! prefix of the samples, then applies one inverse-Fisher-weighted score step on
//! the rest. Errors are reported in the `M`-norm `‖x‖_M = √(xᵀMx)`; the report
//! carries the high-probability bound
//! `(1+η)·√(Tr T/n) + 5·√(‖T‖·log(4/δ)/n)` with `T = M^{1/2} I_R⁻¹ M^{1/2}`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{check_symmetric_psd, effective_dimension, psd_op_norm, sym_sqrt};
use crate::model::DensityHd;
use crate::rng::RngSeed;
use crate::smoothing::{FisherMatrix, SmoothedModelHd};

pub use crate::linalg::m_norm;

pub const WEISZFELD_TOL: f64 = 1e-10;
pub const WEISZFELD_MAX_ITER: usize = 200;
/// Distance floor in the Weiszfeld weights, used when an iterate hits a data point.
pub const WEISZFELD_PERTURBATION: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigHd {
    pub delta: f64,
    pub r: f64,
    pub eta: f64,
    /// Defaults to `η/10`.
    pub init_fraction: Option<f64>,
    /// Error norm; defaults to the identity.
    pub m: Option<DMatrix<f64>>,
    pub mom_buckets_multiplier: f64,
}

impl Default for ConfigHd {
    fn default() -> Self {
        Self {
            delta: 0.1,
            r: 1.0,
            eta: 0.25,
            init_fraction: None,
            m: None,
            mom_buckets_multiplier: 3.5,
        }
    }
}

impl ConfigHd {
    pub fn init_fraction(&self) -> f64 {
        self.init_fraction.unwrap_or(self.eta / 10.0)
    }

    pub fn m_matrix(&self, d: usize) -> DMatrix<f64> {
        self.m.clone().unwrap_or_else(|| DMatrix::identity(d, d))
    }

    /// Number of median-of-means buckets, `⌈multiplier·log(2/δ)⌉`.
    pub fn buckets(&self) -> usize {
        mom_buckets(self.delta, self.mom_buckets_multiplier)
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if !(self.delta > 0.0 && self.delta <= 0.5) {
            return Err(Error::Config(format!("delta = {} must lie in (0, 0.5]", self.delta)));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::Config(format!("r = {} must be positive", self.r)));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::Config(format!("eta = {} must lie in (0, 1)", self.eta)));
        }
        let f = self.init_fraction();
        if !(f > 0.0 && f < 0.5) {
            return Err(Error::Config(format!("init_fraction = {f} must lie in (0, 0.5)")));
        }
        if !(self.mom_buckets_multiplier > 0.0 && self.mom_buckets_multiplier.is_finite()) {
            return Err(Error::Config(format!(
                "mom_buckets_multiplier = {} must be positive",
                self.mom_buckets_multiplier
            )));
        }
        let m = self.m_matrix(d);
        if m.nrows() != d {
            return Err(Error::Config(format!("M is {}x{}, model dimension is {d}", m.nrows(), m.ncols())));
        }
        check_symmetric_psd(&m, "M")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportHd {
    pub lambda_hat: DVector<f64>,
    pub lambda_initial: DVector<f64>,
    pub m_norm_error_bound: f64,
    pub fisher: FisherMatrix,
    /// `Tr(T)/‖T‖`.
    pub d_eff_t: f64,
    /// `Tr(I_R⁻¹)/‖I_R⁻¹‖`.
    pub d_eff_fisher_inverse: f64,
    pub n_used_local: usize,
    pub n_used_init: usize,
}

pub fn mom_buckets(delta: f64, multiplier: f64) -> usize {
    ((multiplier * (2.0 / delta).ln()).ceil() as usize).max(1)
}

/// Geometric median by Weiszfeld iteration started at the mean.
///
/// Stops when the step is below `1e-10` relative to the iterate, or after 200 iterations.
pub fn geometric_median(points: &[DVector<f64>]) -> DVector<f64> {
    assert!(!points.is_empty());
    let mut y = running_mean(points.iter().map(|p| (p, 1.0)));
    for _ in 0..WEISZFELD_MAX_ITER {
        let weights: Vec<f64> = points
            .iter()
            .map(|p| 1.0 / (p - &y).norm().max(WEISZFELD_PERTURBATION))
            .collect();
        let next = running_mean(points.iter().zip(weights.iter().copied()));
        let step = (&next - &y).norm();
        y = next;
        if step <= WEISZFELD_TOL * y.norm().max(1.0) {
            break;
        }
    }
    y
}

/// Weighted mean by running updates, exact when all points coincide.
fn running_mean<'a>(weighted: impl Iterator<Item = (&'a DVector<f64>, f64)>) -> DVector<f64> {
    let mut total = 0.0;
    let mut mean: Option<DVector<f64>> = None;
    for (p, w) in weighted {
        total += w;
        match mean.as_mut() {
            None => mean = Some(p.clone()),
            Some(m) => m.axpy(w / total, &(p - &*m), 1.0),
        }
    }
    mean.expect("at least one point")
}

/// Geometric median of the means of `k = ⌈multiplier·log(2/δ)⌉` contiguous equal buckets.
///
/// Samples beyond `k·⌊n/k⌋` are dropped.
pub fn geometric_median_of_means(samples: &[DVector<f64>], delta: f64, multiplier: f64) -> Result<DVector<f64>> {
    let k = mom_buckets(delta, multiplier);
    if samples.len() < 2 * k {
        return Err(Error::Config(format!(
            "median-of-means with {k} buckets needs at least {} samples, got {}",
            2 * k,
            samples.len()
        )));
    }
    let size = samples.len() / k;
    let means: Vec<DVector<f64>> = samples
        .chunks_exact(size)
        .take(k)
        .map(|bucket| running_mean(bucket.iter().map(|p| (p, 1.0))))
        .collect();
    Ok(geometric_median(&means))
}

/// Adds independent `N(0, r²I)` noise to every sample, sample-major, from `seed`.
pub fn perturb_hd(samples: &[DVector<f64>], r: f64, seed: RngSeed) -> Vec<DVector<f64>> {
    let mut rng = seed.rng();
    samples
        .iter()
        .map(|x| {
            x.map(|v| {
                let z: f64 = rng.sample(StandardNormal);
                v + r * z
            })
        })
        .collect()
}

/// `λ₁ - mean(I_R⁻¹ s_R(x'_i - λ₁))` with a prebuilt smoothed model.
pub fn local_mle_hd_with(
    model: &SmoothedModelHd,
    samples: &[DVector<f64>],
    lambda1: &DVector<f64>,
    seed: RngSeed,
) -> Result<DVector<f64>> {
    if samples.is_empty() {
        return Err(Error::Config("local estimator needs at least one sample".into()));
    }
    if lambda1.len() != model.dim() {
        return Err(Error::Domain(format!(
            "initial estimate has length {}, model dimension {}",
            lambda1.len(),
            model.dim()
        )));
    }
    let perturbed = perturb_hd(samples, model.r(), seed);
    let mut sum = DVector::zeros(model.dim());
    for x in &perturbed {
        sum += model.score(&(x - lambda1))?;
    }
    let mean_score = sum / perturbed.len() as f64;
    let fisher = model.fisher();
    // the product path is diagonal, so the inverse is entrywise
    let step = fisher.inverse() * mean_score;
    Ok(lambda1 - step)
}

pub fn local_mle_hd(
    base: &DensityHd,
    r: f64,
    samples: &[DVector<f64>],
    lambda1: &DVector<f64>,
    seed: RngSeed,
) -> Result<DVector<f64>> {
    let model = SmoothedModelHd::new(base.unshifted(), r)?;
    local_mle_hd_with(&model, samples, lambda1, seed)
}

fn t_matrix(fisher: &FisherMatrix, m: &DMatrix<f64>) -> DMatrix<f64> {
    let root = sym_sqrt(m);
    &root * fisher.inverse() * &root
}

/// `(1+η)·√(Tr T/n) + 5·√(‖T‖·log(4/δ)/n)`, `T = M^{1/2} I_R⁻¹ M^{1/2}`.
pub fn theoretical_bound_hd(fisher: &FisherMatrix, m: &DMatrix<f64>, n: usize, delta: f64, eta: f64) -> Result<f64> {
    check_symmetric_psd(m, "M")?;
    if m.nrows() != fisher.dim() {
        return Err(Error::Domain(format!("M is {}x{}, Fisher is {}-dimensional", m.nrows(), m.ncols(), fisher.dim())));
    }
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    let t = t_matrix(fisher, m);
    let nf = n as f64;
    Ok((1.0 + eta) * (t.trace().max(0.0) / nf).sqrt() + 5.0 * (psd_op_norm(&t) * (4.0 / delta).ln() / nf).sqrt())
}

/// The global estimator with its smoothed model and stage sizes precomputed.
#[derive(Debug, Clone)]
pub struct EstimatorHd {
    cfg: ConfigHd,
    m: DMatrix<f64>,
    n: usize,
    n_init: usize,
    model: SmoothedModelHd,
}

impl EstimatorHd {
    pub fn new(base: &DensityHd, n: usize, cfg: &ConfigHd) -> Result<Self> {
        let d = base.dim();
        cfg.validate(d)?;
        let base = base.unshifted();
        let sigma_norm = psd_op_norm(&base.covariance());
        if cfg.r * cfg.r > sigma_norm {
            return Err(Error::Config(format!(
                "r^2 = {} exceeds the covariance operator norm {sigma_norm}",
                cfg.r * cfg.r
            )));
        }
        // the median-of-means stage needs two samples per bucket
        let n_init = ((cfg.init_fraction() * n as f64).ceil() as usize).max(2 * cfg.buckets());
        if n_init >= n {
            return Err(Error::Config(format!(
                "n = {n} leaves no samples for the local stage (initialization takes {n_init})"
            )));
        }
        let model = SmoothedModelHd::new(base, cfg.r)?;
        model.fisher();
        Ok(Self {
            m: cfg.m_matrix(d),
            cfg: cfg.clone(),
            n,
            n_init,
            model,
        })
    }

    pub fn n_init(&self) -> usize {
        self.n_init
    }

    pub fn model(&self) -> &SmoothedModelHd {
        &self.model
    }

    pub fn split<'a>(&self, samples: &'a [DVector<f64>]) -> (&'a [DVector<f64>], &'a [DVector<f64>]) {
        samples.split_at(self.n_init)
    }

    pub fn estimate(&self, samples: &[DVector<f64>], seed: RngSeed) -> Result<ReportHd> {
        if samples.len() != self.n {
            return Err(Error::Config(format!(
                "estimator prepared for n = {}, got {} samples",
                self.n,
                samples.len()
            )));
        }
        if let Some(bad) = samples.iter().find(|x| x.len() != self.model.dim()) {
            return Err(Error::Domain(format!(
                "sample has length {}, model dimension {}",
                bad.len(),
                self.model.dim()
            )));
        }
        let (init, local) = self.split(samples);
        let lambda_initial = geometric_median_of_means(init, self.cfg.delta, self.cfg.mom_buckets_multiplier)?;
        let lambda_hat = local_mle_hd_with(&self.model, local, &lambda_initial, seed)?;
        let fisher = self.model.fisher();
        let t = t_matrix(&fisher, &self.m);
        Ok(ReportHd {
            lambda_hat,
            lambda_initial,
            m_norm_error_bound: theoretical_bound_hd(&fisher, &self.m, local.len(), self.cfg.delta, self.cfg.eta)?,
            d_eff_t: effective_dimension(&t),
            d_eff_fisher_inverse: effective_dimension(&fisher.inverse()),
            fisher,
            n_used_local: local.len(),
            n_used_init: init.len(),
        })
    }

    /// `‖λ̂ - λ‖_M` under the configured `M`.
    pub fn error(&self, lambda_hat: &DVector<f64>, lambda: &DVector<f64>) -> Result<f64> {
        m_norm(&(lambda_hat - lambda), &self.m)
    }
}

pub fn global_mle_hd(base: &DensityHd, samples: &[DVector<f64>], cfg: &ConfigHd, seed: RngSeed) -> Result<ReportHd> {
    EstimatorHd::new(base, samples.len(), cfg)?.estimate(samples, seed)
}
