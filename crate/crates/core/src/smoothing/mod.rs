//! The `r`-smoothed distribution `f_r = f * N(0, r²)` and its score and Fisher information.
//!
//! The score uses the conditional-noise identity: writing the smoothed variable as
//! `x = u + z` with `u ~ f` and `z ~ N(0, r²)`,
//!
//! ```text
//! f_r(x) = ∫ φ_r(x - u) f(u) du,    s_r(x) = -E[z | x] / r² = -∫ (x - u) φ_r(x - u) f(u) du / (r² f_r(x)).
//! ```
//!
//! Both integrals share one panel rule, and the base density never has to be
//! differentiated, so Laplace and sawtooth kinks need no special casing beyond
//! splitting the panels at the breakpoints.
//!
//! Gaussian and Gaussian-mixture bases have closed forms (`f_r` is again a mixture
//! with variances `σ² + r²`), which [`Evaluation::Auto`] uses. [`Evaluation::Quadrature`]
//! forces the numerical path for every base, which is how the closed forms validate it.

mod diagnostics;

pub use diagnostics::{
    check_score_inversion_bias, expected_score_taylor_check, score_moment_check, InversionBias, MomentCheck,
    TaylorCheck,
};

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::symmetrize;
use crate::model::{Density1d, DensityHd, Family};
use crate::quadrature::{for_each_panel, simpson, GaussLegendre};
use crate::rng::RngSeed;
use crate::special::INV_SQRT_2PI;

/// Smoothed densities below this are treated as underflowed.
pub const UNDERFLOW_FLOOR: f64 = 1e-300;

/// Minimum Monte Carlo sample count for the sampled Fisher path.
pub const MIN_FISHER_MC: usize = 1_000;

const MAX_PANEL_NODES: usize = 64;
const NODE_AGREEMENT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    /// Gauss–Legendre nodes per panel; doubled at construction until probe values agree.
    pub nodes: usize,
    /// Half-width of the noise window, in units of `r`.
    pub truncation_sd: f64,
    /// Simpson panels for Fisher-type integrals over the whole line.
    pub fisher_panels: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            nodes: 8,
            truncation_sd: 10.0,
            fisher_panels: 1 << 14,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Evaluation {
    /// Closed forms where available, quadrature otherwise.
    #[default]
    Auto,
    Quadrature,
}

/// A base density paired with a smoothing radius `r`.
#[derive(Debug)]
pub struct SmoothedModel1d {
    base: Density1d,
    r: f64,
    config: QuadratureConfig,
    closed_form: Option<Vec<(f64, f64, f64)>>,
    rule: GaussLegendre,
    breaks: Vec<f64>,
    max_panel: f64,
    fisher: OnceLock<f64>,
}

impl Clone for SmoothedModel1d {
    fn clone(&self) -> Self {
        let fisher = OnceLock::new();
        if let Some(&v) = self.fisher.get() {
            let _ = fisher.set(v);
        }
        Self {
            base: self.base.clone(),
            r: self.r,
            config: self.config,
            closed_form: self.closed_form.clone(),
            rule: self.rule.clone(),
            breaks: self.breaks.clone(),
            max_panel: self.max_panel,
            fisher,
        }
    }
}

impl SmoothedModel1d {
    pub fn new(base: Density1d, r: f64) -> Result<Self> {
        Self::with_config(base, r, QuadratureConfig::default(), Evaluation::Auto)
    }

    /// Forces the quadrature path, also for bases with closed forms.
    pub fn quadrature(base: Density1d, r: f64) -> Result<Self> {
        Self::with_config(base, r, QuadratureConfig::default(), Evaluation::Quadrature)
    }

    pub fn with_config(base: Density1d, r: f64, config: QuadratureConfig, evaluation: Evaluation) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::Config(format!("smoothing radius must be positive, got {r}")));
        }
        if config.nodes < 2 || config.truncation_sd < 4.0 || config.fisher_panels < 16 {
            return Err(Error::Config(format!("invalid quadrature configuration {config:?}")));
        }
        let closed_form = match (evaluation, base.family()) {
            (Evaluation::Auto, Family::Gaussian { mu, sigma }) => Some(vec![(1.0, mu + base.shift(), sigma * sigma + r * r)]),
            (Evaluation::Auto, Family::GaussianMixture(cs)) => Some(
                cs.iter()
                    .map(|c| (c.weight, c.mu + base.shift(), c.sigma * c.sigma + r * r))
                    .collect(),
            ),
            _ => None,
        };
        let breaks = base.breakpoints();
        let max_panel = r.min(base.feature_scale());
        let mut model = Self {
            rule: GaussLegendre::new(config.nodes),
            base,
            r,
            config,
            closed_form,
            breaks,
            max_panel,
            fisher: OnceLock::new(),
        };
        if model.closed_form.is_none() {
            model.calibrate_nodes();
        }
        Ok(model)
    }

    /// Doubles the per-panel node count until probe densities and scores agree.
    fn calibrate_nodes(&mut self) {
        let center = self.base.quantile(0.5).unwrap_or(0.0);
        let spread = self.base.iqr() + self.r;
        let probes: Vec<f64> = [-3.0, -1.0, -0.37, 0.0, 0.21, 1.0, 3.0]
            .iter()
            .map(|k| center + k * spread)
            .collect();
        let evaluate = |m: &Self| -> Vec<(f64, f64)> { probes.iter().map(|&x| m.moments(x)).collect() };
        let mut current = evaluate(self);
        while self.config.nodes < MAX_PANEL_NODES {
            let mut finer = self.clone();
            finer.config.nodes *= 2;
            finer.rule = GaussLegendre::new(finer.config.nodes);
            let next = evaluate(&finer);
            let agree = current.iter().zip(&next).all(|(&(a0, a1), &(b0, b1))| {
                let pdf_ok = (a0 - b0).abs() <= NODE_AGREEMENT * b0.max(1e-3);
                let score_ok = b0 < UNDERFLOW_FLOOR
                    || (a1 / (self.r * self.r * a0) - b1 / (self.r * self.r * b0)).abs() <= NODE_AGREEMENT;
                pdf_ok && score_ok
            });
            if agree {
                break;
            }
            *self = finer;
            current = next;
        }
    }

    pub fn base(&self) -> &Density1d {
        &self.base
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn config(&self) -> QuadratureConfig {
        self.config
    }

    pub fn is_closed_form(&self) -> bool {
        self.closed_form.is_some()
    }

    /// `(∫ φ_r(x-u) f(u) du, ∫ (x-u) φ_r(x-u) f(u) du)` by panel quadrature.
    pub fn moments(&self, x: f64) -> (f64, f64) {
        let r = self.r;
        let half = self.config.truncation_sd * r;
        let (slo, shi) = self.base.support();
        let lo = (x - half).max(slo);
        let hi = (x + half).min(shi);
        let inv2r2 = 0.5 / (r * r);
        let mut m0 = 0.0;
        let mut m1 = 0.0;
        for_each_panel(lo, hi, &self.breaks, self.max_panel, |a, b| {
            for (u, w) in self.rule.mapped(a, b) {
                let z = x - u;
                let kf = w * (-z * z * inv2r2).exp() * self.base.pdf(u);
                m0 += kf;
                m1 += z * kf;
            }
        });
        let norm = INV_SQRT_2PI / r;
        (m0 * norm, m1 * norm)
    }

    /// Log-domain closed form for Gaussian families: `(f_r(x), s_r(x))`.
    fn closed_form_eval(parts: &[(f64, f64, f64)], x: f64) -> (f64, f64) {
        let mut best = f64::NEG_INFINITY;
        let logs: Vec<f64> = parts
            .iter()
            .map(|&(w, m, v)| {
                let l = w.ln() - 0.5 * (2.0 * std::f64::consts::PI * v).ln() - (x - m) * (x - m) / (2.0 * v);
                best = best.max(l);
                l
            })
            .collect();
        let mut total = 0.0;
        let mut slope = 0.0;
        for (&(_, m, v), l) in parts.iter().zip(&logs) {
            let e = (l - best).exp();
            total += e;
            slope += e * (-(x - m) / v);
        }
        (best.exp() * total, slope / total)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match &self.closed_form {
            Some(parts) => Self::closed_form_eval(parts, x).0,
            None => self.moments(x).0,
        }
    }

    /// `(f_r(x), s_r(x))`; the score is `None` where the density underflows on the quadrature path.
    pub fn pdf_and_score(&self, x: f64) -> (f64, Option<f64>) {
        match &self.closed_form {
            Some(parts) => {
                let (p, s) = Self::closed_form_eval(parts, x);
                (p, Some(s))
            }
            None => {
                let (m0, m1) = self.moments(x);
                if m0 < UNDERFLOW_FLOOR {
                    (m0, None)
                } else {
                    (m0, Some(-m1 / (self.r * self.r * m0)))
                }
            }
        }
    }

    pub fn score(&self, x: f64) -> Result<f64> {
        match self.pdf_and_score(x) {
            (_, Some(s)) => Ok(s),
            (density, None) => Err(Error::TailUnderflow { x, density }),
        }
    }

    /// Integration range for whole-line integrals of `f_r`: the bulk of `f` widened by `12r`.
    pub fn integration_domain(&self) -> (f64, f64) {
        let (lo, hi) = self.base.bulk();
        (lo - 12.0 * self.r, hi + 12.0 * self.r)
    }

    fn panels_for(&self, lo: f64, hi: f64) -> usize {
        let resolve = ((hi - lo) / (0.25 * self.r)).ceil() as usize;
        self.config.fisher_panels.max(resolve)
    }

    /// `∫ f_r(x) g(x) dx` over [`Self::integration_domain`].
    pub fn expectation<G: FnMut(f64) -> f64>(&self, mut g: G) -> f64 {
        let (lo, hi) = self.integration_domain();
        simpson(lo, hi, self.panels_for(lo, hi), |x| self.pdf(x) * g(x))
    }

    /// `I_r = ∫ f_r s_r²`, cached.
    pub fn fisher(&self) -> f64 {
        *self.fisher.get_or_init(|| {
            if let Some(parts) = &self.closed_form {
                if let [(_, _, v)] = parts.as_slice() {
                    return 1.0 / v;
                }
            }
            let (lo, hi) = self.integration_domain();
            simpson(lo, hi, self.panels_for(lo, hi), |x| match self.pdf_and_score(x) {
                (p, Some(s)) => p * s * s,
                _ => 0.0,
            })
        })
    }

    /// `E_{x~f_r}[s_r(x + eps)]`.
    pub fn expected_shifted_score(&self, eps: f64) -> f64 {
        let (lo, hi) = self.integration_domain();
        simpson(lo, hi, self.panels_for(lo, hi), |x| {
            let p = self.pdf(x);
            if p < UNDERFLOW_FLOOR {
                return 0.0;
            }
            match self.pdf_and_score(x + eps) {
                (_, Some(s)) => p * s,
                _ => 0.0,
            }
        })
    }

    /// `E_{x~f_r}[s_r(x + eps)²]`.
    pub fn shifted_score_second_moment(&self, eps: f64) -> f64 {
        let (lo, hi) = self.integration_domain();
        simpson(lo, hi, self.panels_for(lo, hi), |x| {
            let p = self.pdf(x);
            if p < UNDERFLOW_FLOOR {
                return 0.0;
            }
            match self.pdf_and_score(x + eps) {
                (_, Some(s)) => p * s * s,
                _ => 0.0,
            }
        })
    }

    /// Draws from `f_r` as `u + r·z`.
    pub fn sample_smoothed(&self, n: usize, seed: RngSeed) -> Vec<f64> {
        let mut rng = seed.rng();
        (0..n)
            .map(|_| {
                let u = self.base.sample_one(&mut rng);
                let z: f64 = rng.sample(StandardNormal);
                u + self.r * z
            })
            .collect()
    }
}

/// A Fisher information matrix together with its Monte Carlo error, if sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix {
    pub matrix: DMatrix<f64>,
    /// Entrywise standard errors; zero on the quadrature path.
    pub std_error: DMatrix<f64>,
    /// Largest standard error relative to the largest entry.
    pub relative_std_error: f64,
}

impl FisherMatrix {
    pub fn exact(matrix: DMatrix<f64>) -> Self {
        let d = matrix.nrows();
        Self {
            matrix: symmetrize(&matrix),
            std_error: DMatrix::zeros(d, d),
            relative_std_error: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_diagonal(&self) -> bool {
        let d = self.dim();
        (0..d).all(|i| (0..d).all(|j| i == j || self.matrix[(i, j)] == 0.0))
    }

    /// `I_R⁻¹`, with eigenvalues floored at `floor` before inversion.
    ///
    /// Diagonal matrices are inverted entrywise.
    pub fn inverse_floored(&self, floor: f64) -> DMatrix<f64> {
        if self.is_diagonal() {
            return DMatrix::from_diagonal(&self.matrix.diagonal().map(|v| 1.0 / v.max(floor)));
        }
        let eig = symmetrize(&self.matrix).symmetric_eigen();
        let inv = eig.eigenvalues.map(|v| 1.0 / v.max(floor));
        &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose()
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.inverse_floored(f64::MIN_POSITIVE)
    }

    /// Smallest eigenvalue of `I_R - (Σ + R)⁻¹`; non-negative up to estimation error.
    pub fn lower_bound_gap(&self, covariance: &DMatrix<f64>, r: f64) -> f64 {
        let d = self.dim();
        let inflated = covariance + DMatrix::identity(d, d) * (r * r);
        let inv = inflated.try_inverse().expect("Σ + r²I is positive definite");
        symmetrize(&(&self.matrix - inv)).symmetric_eigenvalues().min()
    }
}

/// A product base with spherical smoothing `R = r²·I`.
#[derive(Debug, Clone)]
pub struct SmoothedModelHd {
    base: DensityHd,
    r: f64,
    coords: Vec<Arc<SmoothedModel1d>>,
    mc_samples: usize,
}

impl SmoothedModelHd {
    pub fn new(base: DensityHd, r: f64) -> Result<Self> {
        Self::with_config(base, r, QuadratureConfig::default(), Evaluation::Auto)
    }

    pub fn with_config(base: DensityHd, r: f64, config: QuadratureConfig, evaluation: Evaluation) -> Result<Self> {
        let mut coords: Vec<Arc<SmoothedModel1d>> = Vec::with_capacity(base.dim());
        for i in 0..base.dim() {
            let marginal = base.coordinate(i);
            // identical marginals share one engine (and one cached Fisher value)
            let shared = coords.iter().find(|m| m.base() == &marginal).cloned();
            let model = match shared {
                Some(m) => m,
                None => Arc::new(SmoothedModel1d::with_config(marginal, r, config, evaluation)?),
            };
            coords.push(model);
        }
        Ok(Self {
            base,
            r,
            coords,
            mc_samples: 200_000,
        })
    }

    pub fn with_mc_samples(mut self, n: usize) -> Self {
        self.mc_samples = n;
        self
    }

    pub fn base(&self) -> &DensityHd {
        &self.base
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coordinate(&self, i: usize) -> &SmoothedModel1d {
        &self.coords[i]
    }

    pub fn mc_samples(&self) -> usize {
        self.mc_samples
    }

    pub fn pdf(&self, x: &DVector<f64>) -> f64 {
        self.coords.iter().zip(x.iter()).map(|(m, &xi)| m.pdf(xi)).product()
    }

    /// `s_R(x)`, coordinatewise under the product structure.
    pub fn score(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.dim());
        for (i, (m, &xi)) in self.coords.iter().zip(x.iter()).enumerate() {
            out[i] = m.score(xi).map_err(|e| match e {
                Error::TailUnderflow { x, density } => Error::Estimator {
                    coordinate: i,
                    point: x,
                    reason: format!("smoothed density underflow ({density:e})"),
                },
                other => other,
            })?;
        }
        Ok(out)
    }

    /// Quadrature path: `diag(I_{r,1}, ..., I_{r,d})`.
    pub fn fisher(&self) -> FisherMatrix {
        let diag = DVector::from_iterator(self.dim(), self.coords.iter().map(|m| m.fisher()));
        FisherMatrix::exact(DMatrix::from_diagonal(&diag))
    }

    /// Monte Carlo path: mean of `s_R sᵀ_R` over [`Self::mc_samples`] draws of `f_R`.
    pub fn fisher_monte_carlo(&self, seed: RngSeed) -> Result<FisherMatrix> {
        let n = self.mc_samples;
        if n < MIN_FISHER_MC {
            return Err(Error::Config(format!(
                "Monte Carlo Fisher estimate needs at least {MIN_FISHER_MC} samples, got {n}"
            )));
        }
        let d = self.dim();
        let mut sum = DMatrix::<f64>::zeros(d, d);
        let mut sum_sq = DMatrix::<f64>::zeros(d, d);
        for x in self.sample_smoothed(n, seed) {
            let s = self.score(&x)?;
            let outer = &s * s.transpose();
            sum_sq += outer.component_mul(&outer);
            sum += outer;
        }
        let nf = n as f64;
        let mean = &sum / nf;
        let var = (&sum_sq / nf - mean.component_mul(&mean)) * (nf / (nf - 1.0));
        let std_error = var.map(|v| (v.max(0.0) / nf).sqrt());
        let scale = mean.amax();
        let relative_std_error = if scale > 0.0 { std_error.amax() / scale } else { 0.0 };
        Ok(FisherMatrix {
            matrix: symmetrize(&mean),
            std_error,
            relative_std_error,
        })
    }

    /// Draws from `f_R` as `u + r·z`, `z ~ N(0, I)`.
    pub fn sample_smoothed(&self, n: usize, seed: RngSeed) -> Vec<DVector<f64>> {
        let mut rng = seed.rng();
        (0..n)
            .map(|_| {
                let mut u = self.base.sample_one(&mut rng);
                for v in u.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *v += self.r * z;
                }
                u
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_pdf(x: f64, var: f64) -> f64 {
        (-x * x / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
    }

    #[test]
    fn closed_form_gaussian_examples() {
        let m = SmoothedModel1d::new(Density1d::gaussian(0.0, 1.0).unwrap(), 1.0).unwrap();
        assert!(m.is_closed_form());
        // N(0, 2) at the origin
        assert!((m.pdf(0.0) - 0.282_094_791_8).abs() < 1e-10);
        assert!((m.score(1.0).unwrap() + 0.5).abs() < 1e-15);
        let m = SmoothedModel1d::new(Density1d::gaussian(0.0, 1.0).unwrap(), 0.5).unwrap();
        assert!((m.fisher() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn quadrature_matches_gaussian_closed_forms() {
        for &(mu, sigma) in &[(0.0, 1.0), (2.0, 0.4)] {
            for &r in &[0.1, 0.5, 1.0, 2.0] {
                let base = Density1d::gaussian(mu, sigma).unwrap();
                let q = SmoothedModel1d::quadrature(base, r).unwrap();
                let var = sigma * sigma + r * r;
                let sd = var.sqrt();
                for k in -12..=12 {
                    let x = mu + 0.5 * k as f64 * sd;
                    let (p, s) = q.pdf_and_score(x);
                    assert!((p - gaussian_pdf(x - mu, var)).abs() < 1e-8, "pdf r={r} x={x}");
                    assert!((s.unwrap() + (x - mu) / var).abs() < 1e-8, "score r={r} x={x}");
                }
                assert!((q.fisher() - 1.0 / var).abs() < 1e-6, "fisher r={r}");
            }
        }
    }

    #[test]
    fn laplace_score_is_odd() {
        let m = SmoothedModel1d::new(Density1d::laplace(0.0, 1.0).unwrap(), 0.5).unwrap();
        assert!(m.score(0.0).unwrap().abs() < 1e-14);
        let a = m.score(0.8).unwrap();
        let b = m.score(-0.8).unwrap();
        assert!((a + b).abs() < 1e-12);
    }

    #[test]
    fn symmetric_base_gives_symmetric_smoothed_density() {
        let m = SmoothedModel1d::new(Density1d::sawtooth(0.05, 4.0).unwrap().with_shift(1.3), 0.05).unwrap();
        for &x in &[0.1, 0.77, 2.0] {
            assert!((m.pdf(x) - m.pdf(2.6 - x)).abs() < 1e-12);
        }
    }

    #[test]
    fn tail_underflow_is_an_error() {
        let m = SmoothedModel1d::new(Density1d::laplace(0.0, 0.01).unwrap(), 0.01).unwrap();
        assert!(matches!(m.score(50.0), Err(Error::TailUnderflow { .. })));
    }

    #[test]
    fn rejects_bad_radius() {
        let g = Density1d::gaussian(0.0, 1.0).unwrap();
        assert!(SmoothedModel1d::new(g.clone(), 0.0).is_err());
        assert!(SmoothedModel1d::new(g, f64::NAN).is_err());
    }

    #[test]
    fn hd_score_is_coordinatewise() {
        let base = DensityHd::iid(Density1d::gaussian(0.0, 1.0).unwrap(), 8).unwrap();
        let m = SmoothedModelHd::new(base, 1.0).unwrap();
        let s = m.score(&DVector::from_element(8, 1.0)).unwrap();
        assert!(s.iter().all(|&v| (v + 0.5).abs() < 1e-15));
        assert_eq!(m.fisher().matrix, DMatrix::from_diagonal_element(8, 8, 0.5));
    }

    #[test]
    fn fisher_monte_carlo_needs_samples() {
        let base = DensityHd::iid(Density1d::gaussian(0.0, 1.0).unwrap(), 2).unwrap();
        let m = SmoothedModelHd::new(base, 1.0).unwrap().with_mc_samples(999);
        assert!(matches!(m.fisher_monte_carlo(RngSeed::new(1, 0)), Err(Error::Config(_))));
    }

    #[test]
    fn floored_inverse() {
        let f = FisherMatrix::exact(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]));
        let inv = f.inverse();
        assert!((&inv * &f.matrix - DMatrix::identity(2, 2)).amax() < 1e-12);
        let g = FisherMatrix::exact(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-9]));
        assert_eq!(g.inverse_floored(0.25)[(1, 1)], 4.0);
    }
}
