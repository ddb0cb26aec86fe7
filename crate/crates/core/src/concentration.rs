//! Norm concentration for subgamma random vectors.
//!
//! A mean-zero `x ∈ R^d` is `(Σ, C)`-subgamma when `E[e^{λ⟨x,v⟩}] ≤ e^{λ²vᵀΣv/2}`
//! for every `v` and `|λ| ≤ 1/‖Cv‖`. For such vectors
//!
//! ```text
//! Pr[‖x‖ ≥ √TrΣ + t] ≤ 2·exp(-(1/16)·min(t²/‖Σ‖, t/‖C‖, (2t√TrΣ + t²)/‖C‖_F²))
//! ```
//!
//! and, with probability `1 - δ` and `L = log(2/δ)`,
//!
//! ```text
//! ‖x‖ ≤ √TrΣ + 4√(‖Σ‖L) + 16‖C‖L + min(4‖C‖_F√L, 8‖C‖_F²L/√TrΣ).
//! ```
//!
//! `C = 0` encodes the subgaussian case. The Monte Carlo side samples a few
//! families with known `(Σ, C)` claims and compares empirical norm quantiles and
//! moment generating functions against these bounds.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{check_symmetric_psd, op_norm, psd_op_norm, sym_sqrt};
use crate::rng::{RngSeed, StreamRng};
use crate::smoothing::SmoothedModelHd;
use crate::stats::{ceil_order_statistic, mean_and_stderr, sorted};

/// Minimum Monte Carlo size for [`mgf_check`].
pub const MIN_MGF_SAMPLES: usize = 100_000;
/// Standard errors of slack in [`mgf_check`].
pub const MGF_SLACK_SE: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SubgammaSpec {
    pub sigma: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

impl SubgammaSpec {
    pub fn new(sigma: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        check_symmetric_psd(&sigma, "Sigma")?;
        if c.nrows() != sigma.nrows() || c.ncols() != sigma.ncols() {
            return Err(Error::Domain(format!(
                "C is {}x{} but Sigma is {}x{}",
                c.nrows(),
                c.ncols(),
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        if c.iter().any(|v| !v.is_finite()) || sigma.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("Sigma and C must be finite".into()));
        }
        Ok(Self { sigma, c })
    }

    pub fn subgaussian(sigma: DMatrix<f64>) -> Result<Self> {
        let d = sigma.nrows();
        Self::new(sigma, DMatrix::zeros(d, d))
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.sigma.trace().max(0.0)
    }

    pub fn sigma_norm(&self) -> f64 {
        psd_op_norm(&self.sigma)
    }

    pub fn c_norm(&self) -> f64 {
        op_norm(&self.c)
    }

    pub fn c_frobenius(&self) -> f64 {
        self.c.norm()
    }

    pub fn is_subgaussian(&self) -> bool {
        self.c.iter().all(|&v| v == 0.0)
    }
}

/// The exponent `(1/16)·min(...)` of the tail bound; the `C`-terms drop out when `C = 0`.
pub fn tail_exponent(spec: &SubgammaSpec, t: f64) -> f64 {
    let mut m = t * t / spec.sigma_norm();
    if !spec.is_subgaussian() {
        m = m
            .min(t / spec.c_norm())
            .min((2.0 * t * spec.trace().sqrt() + t * t) / spec.c_frobenius().powi(2));
    }
    m / 16.0
}

/// Upper bound on `Pr[‖x‖ ≥ √TrΣ + t]`, capped at 1.
pub fn tail_bound(spec: &SubgammaSpec, t: f64) -> f64 {
    assert!(t >= 0.0, "t must be non-negative");
    (2.0 * (-tail_exponent(spec, t)).exp()).min(1.0)
}

/// The `1 - δ` quantile bound on `‖x‖`.
pub fn norm_bound(spec: &SubgammaSpec, delta: f64) -> f64 {
    assert!(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
    let l = (2.0 / delta).ln();
    let tr = spec.trace();
    let mut b = tr.sqrt() + 4.0 * (spec.sigma_norm() * l).sqrt();
    if !spec.is_subgaussian() {
        let fro = spec.c_frobenius();
        b += 16.0 * spec.c_norm() * l + (4.0 * fro * l.sqrt()).min(8.0 * fro * fro * l / tr.sqrt());
    }
    b
}

/// The Gaussian envelope `√TrΣ + √(2‖Σ‖·log(1/δ))`.
pub fn gaussian_tail(sigma: &DMatrix<f64>, delta: f64) -> f64 {
    assert!(delta > 0.0 && delta <= 1.0, "delta must lie in (0, 1]");
    sigma.trace().max(0.0).sqrt() + (2.0 * psd_op_norm(sigma) * (1.0 / delta).ln()).sqrt()
}

#[derive(Debug, Clone)]
pub enum GeneratorFamily {
    /// `Σ^{1/2} z`, `z ~ N(0, I)`.
    Gaussian { sigma: DMatrix<f64>, root: DMatrix<f64> },
    /// Independent `s_i·(E_i - 1)`, `E_i ~ Exp(1)`.
    CenteredExponential { scale: DVector<f64> },
    /// Independent `±b_i` with equal probability.
    ScaledRademacher { bound: DVector<f64> },
    /// `I_R⁻¹ (s_R(y + ε) - E[s_R(y + ε)])`, `y ~ f_R`.
    ScoreVector {
        model: Box<SmoothedModelHd>,
        eps: DVector<f64>,
        center: DVector<f64>,
        fisher_inv: DVector<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct VectorGenerator {
    family: GeneratorFamily,
    claimed: SubgammaSpec,
}

impl VectorGenerator {
    /// Claimed spec `(Σ, 0)`.
    pub fn gaussian(sigma: DMatrix<f64>) -> Result<Self> {
        let claimed = SubgammaSpec::subgaussian(sigma.clone())?;
        let root = sym_sqrt(&sigma);
        Ok(Self {
            family: GeneratorFamily::Gaussian { sigma, root },
            claimed,
        })
    }

    /// Claimed spec `(2·diag(s²), 2·diag(s))`.
    ///
    /// The centered `Exp(1)` log-MGF `-λ - log(1-λ)` stays below `λ²` for `|λ| ≤ 1/2`.
    pub fn centered_exponential(scale: DVector<f64>) -> Result<Self> {
        if scale.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::Domain("exponential scales must be positive".into()));
        }
        let claimed = SubgammaSpec::new(
            DMatrix::from_diagonal(&scale.map(|s| 2.0 * s * s)),
            DMatrix::from_diagonal(&scale.map(|s| 2.0 * s)),
        )?;
        Ok(Self {
            family: GeneratorFamily::CenteredExponential { scale },
            claimed,
        })
    }

    /// Claimed spec `(diag(b²), 0)` from `cosh(u) ≤ e^{u²/2}`.
    pub fn scaled_rademacher(bound: DVector<f64>) -> Result<Self> {
        if bound.iter().any(|&b| !(b >= 0.0 && b.is_finite())) {
            return Err(Error::Domain("Rademacher bounds must be non-negative".into()));
        }
        let claimed = SubgammaSpec::subgaussian(DMatrix::from_diagonal(&bound.map(|b| b * b)))?;
        Ok(Self {
            family: GeneratorFamily::ScaledRademacher { bound },
            claimed,
        })
    }

    /// Inverse-Fisher-whitened score at offset `ε`, centered by its exact mean.
    ///
    /// Claimed spec: `Σ = I_R⁻¹·(1 + √(εᵀR⁻¹ε)·√(log max_i 1/(r²I_i)))` and
    /// `C = κ·I_R⁻¹/r`, with `κ = 1.6` at `ε = 0` and `κ = 15` otherwise.
    pub fn score_vector(model: SmoothedModelHd, eps: DVector<f64>) -> Result<Self> {
        let d = model.dim();
        if eps.len() != d {
            return Err(Error::Domain(format!("eps has length {}, model dimension {d}", eps.len())));
        }
        let r = model.r();
        let mahalanobis = eps.norm_squared() / (r * r);
        if mahalanobis > 0.25 {
            return Err(Error::Precondition(format!("eps^T R^-1 eps = {mahalanobis} exceeds 1/4")));
        }
        let fisher = DVector::from_iterator(d, (0..d).map(|i| model.coordinate(i).fisher()));
        let fisher_inv = fisher.map(|v| 1.0 / v);
        let center = DVector::from_iterator(
            d,
            (0..d).map(|i| {
                if eps[i] == 0.0 {
                    0.0
                } else {
                    model.coordinate(i).expected_shifted_score(eps[i])
                }
            }),
        );
        let ratio = fisher.iter().map(|&v| 1.0 / (r * r * v)).fold(1.0f64, f64::max);
        let inflation = 1.0 + mahalanobis.sqrt() * ratio.ln().max(0.0).sqrt();
        let kappa = if mahalanobis == 0.0 { 1.6 } else { 15.0 };
        let claimed = SubgammaSpec::new(
            DMatrix::from_diagonal(&(&fisher_inv * inflation)),
            DMatrix::from_diagonal(&(&fisher_inv * (kappa / r))),
        )?;
        Ok(Self {
            family: GeneratorFamily::ScoreVector {
                model: Box::new(model),
                eps,
                center,
                fisher_inv,
            },
            claimed,
        })
    }

    /// Replaces the claimed spec, e.g. to test that a misclaim is caught.
    pub fn with_claim(mut self, claimed: SubgammaSpec) -> Result<Self> {
        if claimed.dim() != self.dim() {
            return Err(Error::Domain(format!(
                "claim has dimension {}, generator {}",
                claimed.dim(),
                self.dim()
            )));
        }
        self.claimed = claimed;
        Ok(self)
    }

    pub fn family(&self) -> &GeneratorFamily {
        &self.family
    }

    pub fn claimed(&self) -> &SubgammaSpec {
        &self.claimed
    }

    pub fn dim(&self) -> usize {
        self.claimed.dim()
    }

    pub fn name(&self) -> &'static str {
        match self.family {
            GeneratorFamily::Gaussian { .. } => "gaussian",
            GeneratorFamily::CenteredExponential { .. } => "centered-exponential",
            GeneratorFamily::ScaledRademacher { .. } => "scaled-rademacher",
            GeneratorFamily::ScoreVector { .. } => "score-vector",
        }
    }

    pub fn sample(&self, rng: &mut StreamRng) -> Result<DVector<f64>> {
        Ok(match &self.family {
            GeneratorFamily::Gaussian { root, .. } => {
                let z = DVector::from_iterator(root.ncols(), (0..root.ncols()).map(|_| rng.sample::<f64, _>(StandardNormal)));
                root * z
            }
            GeneratorFamily::CenteredExponential { scale } => scale.map(|s| s * (rng.sample::<f64, _>(Exp1) - 1.0)),
            GeneratorFamily::ScaledRademacher { bound } => bound.map(|b| if rng.random::<bool>() { b } else { -b }),
            GeneratorFamily::ScoreVector {
                model,
                eps,
                center,
                fisher_inv,
            } => {
                let mut y = model.base().sample_one(rng);
                for v in y.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *v += model.r() * z;
                }
                let s = model.score(&(y + eps))?;
                (s - center).component_mul(fisher_inv)
            }
        })
    }

    /// Exact `E[e^{λ⟨x,v⟩}]` where a closed form exists.
    pub fn exact_mgf(&self, v: &DVector<f64>, lambda: f64) -> Option<f64> {
        match &self.family {
            GeneratorFamily::Gaussian { sigma, .. } => Some((0.5 * lambda * lambda * v.dot(&(sigma * v))).exp()),
            GeneratorFamily::CenteredExponential { scale } => {
                let mut log_mgf = 0.0;
                for (s, vi) in scale.iter().zip(v.iter()) {
                    let u = lambda * s * vi;
                    if u >= 1.0 {
                        return Some(f64::INFINITY);
                    }
                    log_mgf += -u - (-u).ln_1p();
                }
                Some(log_mgf.exp())
            }
            GeneratorFamily::ScaledRademacher { bound } => {
                Some(bound.iter().zip(v.iter()).map(|(b, vi)| (lambda * b * vi).cosh()).product())
            }
            GeneratorFamily::ScoreVector { .. } => None,
        }
    }
}

/// The `n` norms `‖x‖`, sorted ascending.
pub fn sorted_norms(gen: &VectorGenerator, n: usize, seed: RngSeed) -> Result<Vec<f64>> {
    let mut rng = seed.rng();
    let mut norms = Vec::with_capacity(n);
    for _ in 0..n {
        norms.push(gen.sample(&mut rng)?.norm());
    }
    Ok(sorted(&norms))
}

fn min_trials(delta: f64) -> usize {
    ((10.0 / delta) * (1.0 - 4.0 * f64::EPSILON)).ceil() as usize
}

/// Order statistic `⌈(1-δ)·n⌉` of `‖x‖` over `n_trials` draws.
pub fn empirical_norm_quantile(gen: &VectorGenerator, n_trials: usize, delta: f64, seed: RngSeed) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Config(format!("delta = {delta} must lie in (0, 1)")));
    }
    let need = min_trials(delta);
    if n_trials < need {
        return Err(Error::Config(format!(
            "n_trials = {n_trials} is below ceil(10/delta) = {need}"
        )));
    }
    let norms = sorted_norms(gen, n_trials, seed)?;
    Ok(ceil_order_statistic(&norms, 1.0 - delta))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailReport {
    pub family: String,
    pub dim: usize,
    pub deltas: Vec<f64>,
    pub empirical_quantiles: Vec<f64>,
    pub subgamma_bounds: Vec<f64>,
    pub gaussian_bounds: Vec<f64>,
    pub trials: usize,
    pub seed: RngSeed,
}

/// Empirical quantiles and both bounds over a `δ` grid, from a single batch of draws.
pub fn tail_report(gen: &VectorGenerator, deltas: &[f64], n_trials: usize, seed: RngSeed) -> Result<TailReport> {
    if deltas.is_empty() {
        return Err(Error::Config("delta grid is empty".into()));
    }
    for &delta in deltas {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Config(format!("delta = {delta} must lie in (0, 1)")));
        }
        let need = min_trials(delta);
        if n_trials < need {
            return Err(Error::Config(format!(
                "n_trials = {n_trials} is below ceil(10/delta) = {need} for delta = {delta}"
            )));
        }
    }
    let norms = sorted_norms(gen, n_trials, seed)?;
    Ok(TailReport {
        family: gen.name().to_string(),
        dim: gen.dim(),
        deltas: deltas.to_vec(),
        empirical_quantiles: deltas.iter().map(|&d| ceil_order_statistic(&norms, 1.0 - d)).collect(),
        subgamma_bounds: deltas.iter().map(|&d| norm_bound(gen.claimed(), d)).collect(),
        gaussian_bounds: deltas.iter().map(|&d| gaussian_tail(&gen.claimed().sigma, d)).collect(),
        trials: n_trials,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MgfPoint {
    pub lambda: f64,
    pub estimate: f64,
    pub std_error: f64,
    /// `e^{λ²vᵀΣv/2}`.
    pub bound: f64,
}

impl MgfPoint {
    /// `bound - (estimate - 3·se)`; negative means the claim is violated.
    pub fn margin(&self) -> f64 {
        self.bound - (self.estimate - MGF_SLACK_SE * self.std_error)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MgfReport {
    pub points: Vec<MgfPoint>,
    pub pass: bool,
    /// Smallest margin over the grid.
    pub margin: f64,
}

impl MgfReport {
    fn from_points(points: Vec<MgfPoint>) -> Self {
        let margin = points.iter().map(MgfPoint::margin).fold(f64::INFINITY, f64::min);
        Self {
            pass: margin >= 0.0,
            margin,
            points,
        }
    }
}

/// Largest admissible `|λ|`: `1/‖Cv‖`, or `3/√(vᵀΣv)` when `Cv = 0`.
pub fn admissible_lambda(spec: &SubgammaSpec, v: &DVector<f64>) -> f64 {
    let cv = (&spec.c * v).norm();
    if cv > 0.0 {
        1.0 / cv
    } else {
        3.0 / v.dot(&(&spec.sigma * v)).sqrt()
    }
}

fn check_grid(gen: &VectorGenerator, v: &DVector<f64>, grid: &[f64]) -> Result<f64> {
    if v.len() != gen.dim() {
        return Err(Error::Domain(format!("v has length {}, generator dimension {}", v.len(), gen.dim())));
    }
    let limit = admissible_lambda(gen.claimed(), v);
    if let Some(bad) = grid.iter().find(|l| l.abs() > limit * (1.0 + 1e-12)) {
        return Err(Error::Precondition(format!("lambda = {bad} outside the admissible range |lambda| <= {limit}")));
    }
    Ok(v.dot(&(&gen.claimed().sigma * v)))
}

/// Monte Carlo check of the claimed MGF bound along direction `v`, with 3-standard-error slack.
pub fn mgf_check(gen: &VectorGenerator, v: &DVector<f64>, grid: &[f64], n_mc: usize, seed: RngSeed) -> Result<MgfReport> {
    let quad = check_grid(gen, v, grid)?;
    if n_mc < MIN_MGF_SAMPLES {
        return Err(Error::Precondition(format!("n_mc = {n_mc} below {MIN_MGF_SAMPLES}")));
    }
    let mut rng = seed.rng();
    let mut projections = Vec::with_capacity(n_mc);
    for _ in 0..n_mc {
        projections.push(gen.sample(&mut rng)?.dot(v));
    }
    let points = grid
        .iter()
        .map(|&lambda| {
            let values: Vec<f64> = projections.iter().map(|p| (lambda * p).exp()).collect();
            let (estimate, std_error) = mean_and_stderr(&values);
            MgfPoint {
                lambda,
                estimate,
                std_error,
                bound: (0.5 * lambda * lambda * quad).exp(),
            }
        })
        .collect();
    Ok(MgfReport::from_points(points))
}

/// The same comparison against the exact MGF, without Monte Carlo error.
pub fn exact_mgf_check(gen: &VectorGenerator, v: &DVector<f64>, grid: &[f64]) -> Result<MgfReport> {
    let quad = check_grid(gen, v, grid)?;
    let mut points = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let estimate = gen
            .exact_mgf(v, lambda)
            .ok_or_else(|| Error::Precondition(format!("no closed-form MGF for the {} family", gen.name())))?;
        points.push(MgfPoint {
            lambda,
            estimate,
            std_error: 0.0,
            bound: (0.5 * lambda * lambda * quad).exp(),
        });
    }
    Ok(MgfReport::from_points(points))
}
