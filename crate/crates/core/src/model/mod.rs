//! Translation families `f^λ(x) = f(x - λ)`.
//!
//! A [`Density1d`] is a validated [`Family`] plus a location shift. A [`DensityHd`]
//! is a product of one-dimensional components with a shift vector. Densities are
//! immutable values, so they can be shared freely between worker threads.

mod sawtooth;
mod spec;

pub use sawtooth::Sawtooth;
pub use spec::ModelSpec;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{RngSeed, StreamRng};
use crate::special::{norm_cdf, norm_pdf, norm_quantile, norm_sf};

/// Bisection tolerance for numerically inverted CDFs.
pub const QUANTILE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Gaussian { mu: f64, sigma: f64 },
    Laplace { mu: f64, b: f64 },
    GaussianMixture(Vec<MixtureComponent>),
    /// Standard normal plus a [`Sawtooth`] perturbation on its central section.
    GaussianSawtooth(Sawtooth),
}

impl Family {
    pub fn gaussian(mu: f64, sigma: f64) -> Result<Self> {
        positive("sigma", sigma)?;
        finite("mu", mu)?;
        Ok(Self::Gaussian { mu, sigma })
    }

    pub fn laplace(mu: f64, b: f64) -> Result<Self> {
        positive("b", b)?;
        finite("mu", mu)?;
        Ok(Self::Laplace { mu, b })
    }

    pub fn mixture(components: Vec<MixtureComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Config("mixture needs at least one component".into()));
        }
        for c in &components {
            positive("mixture weight", c.weight)?;
            positive("mixture sigma", c.sigma)?;
            finite("mixture mu", c.mu)?;
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("mixture weights sum to {total}, expected 1")));
        }
        Ok(Self::GaussianMixture(components))
    }

    pub fn sawtooth(width: f64, slope: f64) -> Result<Self> {
        Ok(Self::GaussianSawtooth(Sawtooth::new(width, slope)?))
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be finite, got {v}")))
    }
}

/// A one-dimensional density with a location shift.
#[derive(Debug, Clone, PartialEq)]
pub struct Density1d {
    family: Family,
    shift: f64,
}

impl Density1d {
    pub fn new(family: Family) -> Self {
        Self { family, shift: 0.0 }
    }

    pub fn gaussian(mu: f64, sigma: f64) -> Result<Self> {
        Family::gaussian(mu, sigma).map(Self::new)
    }

    pub fn laplace(mu: f64, b: f64) -> Result<Self> {
        Family::laplace(mu, b).map(Self::new)
    }

    pub fn mixture(components: &[(f64, f64, f64)]) -> Result<Self> {
        let comps = components
            .iter()
            .map(|&(weight, mu, sigma)| MixtureComponent { weight, mu, sigma })
            .collect();
        Family::mixture(comps).map(Self::new)
    }

    pub fn sawtooth(width: f64, slope: f64) -> Result<Self> {
        Family::sawtooth(width, slope).map(Self::new)
    }

    pub fn with_shift(mut self, shift: f64) -> Self {
        self.shift = shift;
        self
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// The same family with zero shift.
    pub fn unshifted(&self) -> Self {
        Self {
            family: self.family.clone(),
            shift: 0.0,
        }
    }

    /// Whether the smoothed density has a closed form (Gaussian and Gaussian mixtures).
    pub fn is_gaussian_family(&self) -> bool {
        matches!(self.family, Family::Gaussian { .. } | Family::GaussianMixture(_))
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let u = x - self.shift;
        match &self.family {
            Family::Gaussian { mu, sigma } => norm_pdf((u - mu) / sigma) / sigma,
            Family::Laplace { mu, b } => (-(u - mu).abs() / b).exp() / (2.0 * b),
            Family::GaussianMixture(cs) => cs
                .iter()
                .map(|c| c.weight * norm_pdf((u - c.mu) / c.sigma) / c.sigma)
                .sum(),
            Family::GaussianSawtooth(s) => norm_pdf(u) + s.wave(u),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let u = x - self.shift;
        match &self.family {
            Family::Gaussian { mu, sigma } => norm_cdf((u - mu) / sigma),
            Family::Laplace { mu, b } => {
                let z = (u - mu) / b;
                if z < 0.0 {
                    0.5 * z.exp()
                } else {
                    1.0 - 0.5 * (-z).exp()
                }
            }
            Family::GaussianMixture(cs) => cs
                .iter()
                .map(|c| c.weight * norm_cdf((u - c.mu) / c.sigma))
                .sum(),
            Family::GaussianSawtooth(s) => norm_cdf(u) + s.wave_integral(u),
        }
    }

    /// Upper tail `1 - CDF(x)`, computed without cancellation where a closed form allows.
    pub fn sf(&self, x: f64) -> f64 {
        let u = x - self.shift;
        match &self.family {
            Family::Gaussian { mu, sigma } => norm_sf((u - mu) / sigma),
            Family::GaussianMixture(cs) => cs
                .iter()
                .map(|c| c.weight * norm_sf((u - c.mu) / c.sigma))
                .sum(),
            Family::GaussianSawtooth(s) => norm_sf(u) - s.wave_integral(u),
            Family::Laplace { .. } => 1.0 - self.cdf(x),
        }
    }

    /// Smallest `x` with `CDF(x) ≥ p`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("quantile level must lie in (0, 1), got {p}")));
        }
        let q = match &self.family {
            Family::Gaussian { mu, sigma } => mu + sigma * norm_quantile(p),
            Family::Laplace { mu, b } => {
                if p < 0.5 {
                    mu + b * (2.0 * p).ln()
                } else {
                    mu - b * (2.0 * (1.0 - p)).ln()
                }
            }
            _ => return Ok(self.bisect_quantile(p)),
        };
        Ok(q + self.shift)
    }

    fn bisect_quantile(&self, p: f64) -> f64 {
        let (mut lo, mut hi) = self.support();
        for _ in 0..200 {
            if hi - lo <= QUANTILE_TOL {
                break;
            }
            let mid = 0.5 * (lo + hi);
            // compare in the tail that avoids cancellation
            let below = if p <= 0.5 {
                self.cdf(mid) < p
            } else {
                self.sf(mid) > 1.0 - p
            };
            if below {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    pub fn iqr(&self) -> f64 {
        self.quantile(0.75).expect("0.75 is a valid level") - self.quantile(0.25).expect("0.25 is a valid level")
    }

    pub fn mean(&self) -> f64 {
        let m = match &self.family {
            Family::Gaussian { mu, .. } | Family::Laplace { mu, .. } => *mu,
            Family::GaussianMixture(cs) => cs.iter().map(|c| c.weight * c.mu).sum(),
            Family::GaussianSawtooth(_) => 0.0,
        };
        m + self.shift
    }

    pub fn variance(&self) -> f64 {
        match &self.family {
            Family::Gaussian { sigma, .. } => sigma * sigma,
            Family::Laplace { b, .. } => 2.0 * b * b,
            Family::GaussianMixture(cs) => {
                let m: f64 = cs.iter().map(|c| c.weight * c.mu).sum();
                cs.iter()
                    .map(|c| c.weight * (c.sigma * c.sigma + (c.mu - m) * (c.mu - m)))
                    .sum()
            }
            Family::GaussianSawtooth(s) => 1.0 + s.second_moment(),
        }
    }

    /// Points where the density is not differentiable, sorted.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.family {
            Family::Laplace { mu, .. } => vec![mu + self.shift],
            Family::GaussianSawtooth(s) => s.breakpoints().iter().map(|b| b + self.shift).collect(),
            _ => Vec::new(),
        }
    }

    /// Interval outside which the density is zero in double precision or negligible.
    pub fn support(&self) -> (f64, f64) {
        const GAUSS_SD: f64 = 38.5;
        const LAPLACE_SCALES: f64 = 700.0;
        let (lo, hi) = match &self.family {
            Family::Gaussian { mu, sigma } => (mu - GAUSS_SD * sigma, mu + GAUSS_SD * sigma),
            Family::Laplace { mu, b } => (mu - LAPLACE_SCALES * b, mu + LAPLACE_SCALES * b),
            Family::GaussianMixture(cs) => cs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
                (lo.min(c.mu - GAUSS_SD * c.sigma), hi.max(c.mu + GAUSS_SD * c.sigma))
            }),
            Family::GaussianSawtooth(_) => (-GAUSS_SD, GAUSS_SD),
        };
        (lo + self.shift, hi + self.shift)
    }

    /// Interval holding all but a negligible (< 1e-15) fraction of the mass:
    /// 12 standard deviations of the widest Gaussian piece, 36 scales for Laplace.
    pub fn bulk(&self) -> (f64, f64) {
        let (lo, hi) = match &self.family {
            Family::Gaussian { mu, sigma } => (mu - 12.0 * sigma, mu + 12.0 * sigma),
            Family::Laplace { mu, b } => (mu - 36.0 * b, mu + 36.0 * b),
            Family::GaussianMixture(cs) => cs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
                (lo.min(c.mu - 12.0 * c.sigma), hi.max(c.mu + 12.0 * c.sigma))
            }),
            Family::GaussianSawtooth(_) => (-12.0, 12.0),
        };
        (lo + self.shift, hi + self.shift)
    }

    /// Length scale on which the density varies between breakpoints.
    pub fn feature_scale(&self) -> f64 {
        match &self.family {
            Family::Gaussian { sigma, .. } => *sigma,
            Family::Laplace { b, .. } => *b,
            Family::GaussianMixture(cs) => cs.iter().map(|c| c.sigma).fold(f64::INFINITY, f64::min),
            Family::GaussianSawtooth(_) => 1.0,
        }
    }

    /// Centre of symmetry, when the density is symmetric.
    pub fn symmetry_center(&self) -> Option<f64> {
        match &self.family {
            Family::Gaussian { mu, .. } | Family::Laplace { mu, .. } => Some(mu + self.shift),
            Family::GaussianSawtooth(_) => Some(self.shift),
            Family::GaussianMixture(cs) => {
                let m: f64 = cs.iter().map(|c| c.weight * c.mu).sum();
                let mirrored = cs.iter().all(|c| {
                    cs.iter().any(|d| {
                        (d.mu - (2.0 * m - c.mu)).abs() < 1e-12
                            && (d.sigma - c.sigma).abs() < 1e-12
                            && (d.weight - c.weight).abs() < 1e-12
                    })
                });
                mirrored.then_some(m + self.shift)
            }
        }
    }

    pub fn sample_one(&self, rng: &mut StreamRng) -> f64 {
        let u = match &self.family {
            Family::Gaussian { mu, sigma } => {
                let z: f64 = rng.sample(StandardNormal);
                mu + sigma * z
            }
            Family::Laplace { mu, b } => {
                let e: f64 = rng.sample(Exp1);
                if rng.random::<bool>() {
                    mu + b * e
                } else {
                    mu - b * e
                }
            }
            Family::GaussianMixture(cs) => {
                let mut pick: f64 = rng.random();
                let mut chosen = cs[cs.len() - 1];
                for c in cs {
                    if pick < c.weight {
                        chosen = *c;
                        break;
                    }
                    pick -= c.weight;
                }
                let z: f64 = rng.sample(StandardNormal);
                chosen.mu + chosen.sigma * z
            }
            Family::GaussianSawtooth(s) => {
                // Rejection from the standard normal envelope: f/φ ≤ 1 + A/φ(1) on the support.
                let envelope = 1.0 + s.amplitude() / norm_pdf(1.0);
                loop {
                    let z: f64 = rng.sample(StandardNormal);
                    let accept = (norm_pdf(z) + s.wave(z)) / (envelope * norm_pdf(z));
                    if rng.random::<f64>() < accept {
                        break z;
                    }
                }
            }
        };
        u + self.shift
    }

    /// `n` i.i.d. draws, deterministic in `seed`.
    pub fn sample(&self, n: usize, seed: RngSeed) -> Vec<f64> {
        let mut rng = seed.rng();
        (0..n).map(|_| self.sample_one(&mut rng)).collect()
    }
}

/// A product density on `R^d` with a location shift vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityHd {
    components: Vec<Density1d>,
    shift: DVector<f64>,
}

impl DensityHd {
    pub fn new(components: Vec<Density1d>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Config("product density needs dimension d >= 1".into()));
        }
        let d = components.len();
        Ok(Self {
            components,
            shift: DVector::zeros(d),
        })
    }

    pub fn iid(component: Density1d, d: usize) -> Result<Self> {
        Self::new(vec![component; d])
    }

    pub fn with_shift(mut self, shift: DVector<f64>) -> Result<Self> {
        if shift.len() != self.dim() {
            return Err(Error::Config(format!(
                "shift has length {}, density has dimension {}",
                shift.len(),
                self.dim()
            )));
        }
        self.shift = shift;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn shift(&self) -> &DVector<f64> {
        &self.shift
    }

    pub fn components(&self) -> &[Density1d] {
        &self.components
    }

    /// The marginal of coordinate `i`, including the vector shift.
    pub fn coordinate(&self, i: usize) -> Density1d {
        let c = &self.components[i];
        c.clone().with_shift(c.shift() + self.shift[i])
    }

    pub fn unshifted(&self) -> Self {
        Self {
            components: self.components.iter().map(Density1d::unshifted).collect(),
            shift: DVector::zeros(self.dim()),
        }
    }

    pub fn pdf(&self, x: &DVector<f64>) -> f64 {
        (0..self.dim()).map(|i| self.coordinate(i).pdf(x[i])).product()
    }

    pub fn mean(&self) -> DVector<f64> {
        DVector::from_iterator(self.dim(), (0..self.dim()).map(|i| self.coordinate(i).mean()))
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let vars = DVector::from_iterator(self.dim(), self.components.iter().map(Density1d::variance));
        DMatrix::from_diagonal(&vars)
    }

    pub fn sample_one(&self, rng: &mut StreamRng) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            (0..self.dim()).map(|i| self.components[i].sample_one(rng) + self.shift[i]),
        )
    }

    pub fn sample(&self, n: usize, seed: RngSeed) -> Vec<DVector<f64>> {
        let mut rng = seed.rng();
        (0..n).map(|_| self.sample_one(&mut rng)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::simpson;

    fn families() -> Vec<Density1d> {
        vec![
            Density1d::gaussian(0.0, 1.0).unwrap(),
            Density1d::gaussian(1.5, 0.3).unwrap(),
            Density1d::laplace(0.0, 1.0).unwrap(),
            Density1d::mixture(&[(0.9, 0.0, 0.1), (0.1, 5.0, 1.0)]).unwrap(),
            Density1d::mixture(&[(0.5, -1.0, 0.5), (0.5, 1.0, 0.5)]).unwrap(),
            Density1d::sawtooth(0.05, 4.0).unwrap(),
        ]
    }

    #[test]
    fn closed_form_values() {
        let g = Density1d::gaussian(0.0, 1.0).unwrap();
        assert!((g.pdf(0.0) - 0.398_942_280_4).abs() < 1e-10);
        let l = Density1d::laplace(0.0, 1.0).unwrap();
        assert_eq!(l.pdf(0.0), 0.5);
        assert_eq!(g.quantile(0.5).unwrap(), 0.0);
        assert!((l.quantile(0.75).unwrap() - 0.693_147_180_6).abs() < 1e-10);
        assert!((g.iqr() - 1.348_979_500_3).abs() < 1e-9);
        assert!((l.iqr() - 1.386_294_361_1).abs() < 1e-10);
    }

    #[test]
    fn quantile_domain_errors() {
        let g = Density1d::gaussian(0.0, 1.0).unwrap();
        assert!(matches!(g.quantile(0.0), Err(Error::Domain(_))));
        assert!(matches!(g.quantile(1.0), Err(Error::Domain(_))));
        assert!(g.quantile(f64::NAN).is_err());
    }

    #[test]
    fn densities_integrate_to_one() {
        for f in families() {
            let (a, b) = f.bulk();
            let mass = simpson(a, b, 1 << 18, |x| f.pdf(x));
            assert!((mass - 1.0).abs() < 1e-6, "{f:?}: {mass}");
            assert!(f.pdf(f.quantile(0.5).unwrap()) > 0.0);
        }
    }

    #[test]
    fn translation_equivariance_and_iqr_invariance() {
        for f in families() {
            let shifted = f.clone().with_shift(2.75);
            for &x in &[-3.0, -0.4, 0.0, 0.013, 1.7, 6.0] {
                assert_eq!(shifted.pdf(x), f.pdf(x - 2.75));
            }
            assert!((shifted.iqr() - f.iqr()).abs() < 1e-9);
        }
    }

    #[test]
    fn quantile_cdf_round_trip() {
        for f in families() {
            for &p in &[0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99] {
                let q = f.quantile(p).unwrap();
                assert!((f.cdf(q) - p).abs() <= 1e-8, "{f:?} p={p}");
            }
        }
    }

    #[test]
    fn sawtooth_perturbation_preserves_mass() {
        let f = Density1d::sawtooth(0.05, 4.0).unwrap();
        let perturbation = simpson(-1.0, 1.0, 1 << 16, |x| f.pdf(x) - norm_pdf(x));
        assert!(perturbation.abs() < 1e-6);
        for i in 0..2001 {
            let x = -1.0 + i as f64 * 1e-3;
            assert!(f.pdf(x) > 0.0);
        }
    }

    #[test]
    fn covariance_is_diagonal_of_variances() {
        let h = DensityHd::iid(Density1d::laplace(0.0, 1.0).unwrap(), 4).unwrap();
        assert_eq!(h.covariance(), DMatrix::from_diagonal_element(4, 4, 2.0));
        let g = DensityHd::iid(Density1d::gaussian(0.0, 1.0).unwrap(), 8).unwrap();
        assert_eq!(g.covariance(), DMatrix::identity(8, 8));
    }

    #[test]
    fn sampling_is_deterministic() {
        let f = Density1d::sawtooth(0.05, 4.0).unwrap();
        assert_eq!(f.sample(100, RngSeed::new(3, 1)), f.sample(100, RngSeed::new(3, 1)));
        assert_ne!(f.sample(10, RngSeed::new(3, 1)), f.sample(10, RngSeed::new(3, 2)));
    }

    #[test]
    fn symmetry_detection() {
        let fs = families();
        assert_eq!(fs[0].symmetry_center(), Some(0.0));
        assert_eq!(fs[3].symmetry_center(), None);
        assert_eq!(fs[4].symmetry_center(), Some(0.0));
    }
}
