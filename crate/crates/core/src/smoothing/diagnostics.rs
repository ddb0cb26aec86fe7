//! Numerical checks of the analytic score properties the estimators rely on.

use nalgebra::DVector;

use super::{SmoothedModel1d, SmoothedModelHd};
use crate::error::{Error, Result};
use crate::rng::RngSeed;
use crate::stats::mean_and_stderr;

#[derive(Debug, Clone, PartialEq)]
pub struct InversionBias {
    /// `E_{x~f_R}[-I_R⁻¹ s_R(x + ε)] - ε`.
    pub bias: DVector<f64>,
    pub bias_norm: f64,
    /// Quadratic reference `√‖I_R⁻¹‖ · εᵀR⁻¹ε`.
    pub predicted_ceiling: f64,
}

/// Bias of the one-step score inversion at offset `eps`, product-exact by 1-d quadrature.
pub fn check_score_inversion_bias(model: &SmoothedModelHd, eps: &DVector<f64>) -> Result<InversionBias> {
    if eps.len() != model.dim() {
        return Err(Error::Domain(format!("eps has length {}, model dimension {}", eps.len(), model.dim())));
    }
    let r2 = model.r() * model.r();
    let mahalanobis = eps.norm_squared() / r2;
    if mahalanobis > 0.25 {
        return Err(Error::Precondition(format!("eps^T R^-1 eps = {mahalanobis} exceeds 1/4")));
    }
    let mut bias = DVector::zeros(model.dim());
    let mut max_inv = 0.0f64;
    for i in 0..model.dim() {
        let m = model.coordinate(i);
        let fisher = m.fisher();
        max_inv = max_inv.max(1.0 / fisher);
        if eps[i] != 0.0 {
            bias[i] = -m.expected_shifted_score(eps[i]) / fisher - eps[i];
        }
    }
    Ok(InversionBias {
        bias_norm: bias.norm(),
        bias,
        predicted_ceiling: max_inv.sqrt() * mahalanobis,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaylorCheck {
    /// `E_{x~f_r}[s_r(x - ε)]`.
    pub lhs: f64,
    /// `I_r · ε`.
    pub linear: f64,
    pub residual: f64,
    /// `|residual| / (√I_r · ε² / r²)`; zero when `ε = 0`.
    pub ratio: f64,
}

/// Compares the expected shifted score with its linearisation `I_r ε`.
pub fn expected_score_taylor_check(model: &SmoothedModel1d, eps: f64) -> Result<TaylorCheck> {
    let r = model.r();
    if eps.abs() > r / 2.0 {
        return Err(Error::Precondition(format!("|eps| = {} exceeds r/2 = {}", eps.abs(), r / 2.0)));
    }
    let fisher = model.fisher();
    let lhs = model.expected_shifted_score(-eps);
    let linear = fisher * eps;
    let residual = lhs - linear;
    let scale = fisher.sqrt() * eps * eps / (r * r);
    Ok(TaylorCheck {
        lhs,
        linear,
        residual,
        ratio: if scale > 0.0 { residual.abs() / scale } else { 0.0 },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentCheck {
    pub abs_moment: f64,
    pub abs_moment_stderr: f64,
    pub signed_moment: f64,
    pub signed_moment_stderr: f64,
    /// `1.6^{k-2} k^{k/2} vᵀR^{1/2} I_R R^{1/2} v`.
    pub ceiling: f64,
}

impl MomentCheck {
    /// The empirical moment, less `slack` standard errors, stays below the ceiling.
    pub fn within_ceiling(&self, slack: f64) -> bool {
        self.abs_moment - slack * self.abs_moment_stderr <= self.ceiling
    }
}

/// Monte Carlo `k`-th moments of the projected, whitened score `vᵀR^{1/2} s_R(x)`, `x ~ f_R`.
pub fn score_moment_check(
    model: &SmoothedModelHd,
    v: &DVector<f64>,
    k: u32,
    n_mc: usize,
    seed: RngSeed,
) -> Result<MomentCheck> {
    if v.len() != model.dim() {
        return Err(Error::Domain(format!("v has length {}, model dimension {}", v.len(), model.dim())));
    }
    if (v.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::Precondition(format!("v must be a unit vector, |v| = {}", v.norm())));
    }
    if !(3..=8).contains(&k) {
        return Err(Error::Precondition(format!("moment order k = {k} outside 3..=8")));
    }
    if n_mc < 10_000 {
        return Err(Error::Precondition(format!("n_mc = {n_mc} below 10^4")));
    }
    let r = model.r();
    let mut abs_vals = Vec::with_capacity(n_mc);
    let mut signed_vals = Vec::with_capacity(n_mc);
    for x in model.sample_smoothed(n_mc, seed) {
        let s = model.score(&x)?;
        let y = r * v.dot(&s);
        let p = y.powi(k as i32);
        abs_vals.push(p.abs());
        signed_vals.push(p);
    }
    let (abs_moment, abs_moment_stderr) = mean_and_stderr(&abs_vals);
    let (signed_moment, signed_moment_stderr) = mean_and_stderr(&signed_vals);
    let fisher = model.fisher().matrix;
    let quad = r * r * v.dot(&(&fisher * v));
    let kf = k as f64;
    Ok(MomentCheck {
        abs_moment,
        abs_moment_stderr,
        signed_moment,
        signed_moment_stderr,
        ceiling: 1.6f64.powi(k as i32 - 2) * kf.powf(kf / 2.0) * quad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Density1d, DensityHd};

    fn product(base: Density1d, d: usize, r: f64) -> SmoothedModelHd {
        SmoothedModelHd::new(DensityHd::iid(base, d).unwrap(), r).unwrap()
    }

    #[test]
    fn gaussian_inversion_is_unbiased() {
        let m = product(Density1d::gaussian(0.0, 1.0).unwrap(), 3, 1.0);
        let eps = DVector::from_vec(vec![0.2, -0.3, 0.1]);
        let b = check_score_inversion_bias(&m, &eps).unwrap();
        assert!(b.bias_norm < 1e-8, "{}", b.bias_norm);
    }

    #[test]
    fn zero_offset_has_zero_bias() {
        let m = product(Density1d::laplace(0.0, 1.0).unwrap(), 2, 1.0);
        let b = check_score_inversion_bias(&m, &DVector::zeros(2)).unwrap();
        assert_eq!(b.bias_norm, 0.0);
    }

    #[test]
    fn inversion_precondition() {
        let m = product(Density1d::gaussian(0.0, 1.0).unwrap(), 2, 0.5);
        let eps = DVector::from_vec(vec![0.3, 0.0]);
        assert!(matches!(check_score_inversion_bias(&m, &eps), Err(Error::Precondition(_))));
    }

    #[test]
    fn taylor_check_gaussian_and_zero() {
        let g = SmoothedModel1d::new(Density1d::gaussian(0.0, 1.0).unwrap(), 0.7).unwrap();
        for &e in &[-0.3, 0.05, 0.35] {
            assert!(expected_score_taylor_check(&g, e).unwrap().residual.abs() < 1e-8);
        }
        let l = SmoothedModel1d::new(Density1d::laplace(0.0, 1.0).unwrap(), 1.0).unwrap();
        assert!(expected_score_taylor_check(&l, 0.0).unwrap().lhs.abs() < 1e-10);
        assert!(matches!(expected_score_taylor_check(&l, 0.6), Err(Error::Precondition(_))));
    }

    #[test]
    fn moment_check_preconditions() {
        let m = product(Density1d::gaussian(0.0, 1.0).unwrap(), 2, 1.0);
        let e1 = DVector::from_vec(vec![1.0, 0.0]);
        let seed = RngSeed::new(1, 0);
        assert!(score_moment_check(&m, &DVector::from_vec(vec![1.0, 1.0]), 4, 10_000, seed).is_err());
        assert!(score_moment_check(&m, &e1, 2, 10_000, seed).is_err());
        assert!(score_moment_check(&m, &e1, 4, 9_999, seed).is_err());
    }

    #[test]
    fn gaussian_fourth_moment() {
        let m = product(Density1d::gaussian(0.0, 1.0).unwrap(), 2, 1.0);
        let e1 = DVector::from_vec(vec![1.0, 0.0]);
        let c = score_moment_check(&m, &e1, 4, 200_000, RngSeed::new(11, 0)).unwrap();
        assert!((c.ceiling - 20.48).abs() < 1e-12);
        assert!((c.abs_moment - 0.75).abs() < 4.0 * c.abs_moment_stderr, "{c:?}");
        assert!(c.within_ceiling(3.0));
    }
}
