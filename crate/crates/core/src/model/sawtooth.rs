//! The Gaussian+Sawtooth perturbation.
//!
//! The standard normal density plus an even triangular wave `T` with slopes `±Δ` and
//! period `2w`. On `[0, L]` the wave starts at zero, rises to `wΔ/2` at `w/2`, falls to
//! `-wΔ/2` at `3w/2` and returns to zero at `2w`; `L = P·2w` with `P = ⌊1/(2w)⌋` whole
//! periods, so the support `[-L, L]` sits inside `[-1, 1]`. The negative half is the
//! mirror image. Each half integrates to zero, and `wΔ/2 ≤ 0.2 < φ(1)` keeps the
//! density positive.

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

pub const MAX_AMPLITUDE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct Sawtooth {
    width: f64,
    slope: f64,
    half_len: f64,
    breaks: Vec<f64>,
}

impl Sawtooth {
    pub fn new(width: f64, slope: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::Config(format!("sawtooth width must be positive, got {width}")));
        }
        if !(slope >= 0.0 && slope.is_finite()) {
            return Err(Error::Config(format!("sawtooth slope must be non-negative, got {slope}")));
        }
        if width * slope / 2.0 > MAX_AMPLITUDE + 1e-12 {
            return Err(Error::Config(format!(
                "sawtooth amplitude w*delta/2 = {} exceeds {MAX_AMPLITUDE}",
                width * slope / 2.0
            )));
        }
        // Tolerate representation error in 1/(2w) (e.g. w = 0.05).
        let periods = (1.0 / (2.0 * width) + 1e-9).floor();
        if periods < 1.0 {
            return Err(Error::Config(format!(
                "sawtooth width {width} leaves no whole period inside [-1, 1]"
            )));
        }
        let half_len = periods * 2.0 * width;
        let teeth = (2.0 * periods) as usize;
        let mut positive = Vec::with_capacity(teeth + 1);
        for k in 0..teeth {
            positive.push(width * (0.5 + k as f64));
        }
        positive.push(half_len);
        let mut breaks: Vec<f64> = positive.iter().rev().map(|b| -b).collect();
        breaks.push(0.0);
        breaks.extend(positive);
        Ok(Self {
            width,
            slope,
            half_len,
            breaks,
        })
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn amplitude(&self) -> f64 {
        self.width * self.slope / 2.0
    }

    pub fn half_len(&self) -> f64 {
        self.half_len
    }

    /// Kinks of the perturbation, sorted.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breaks
    }

    /// The triangular wave `T(u)`.
    pub fn wave(&self, u: f64) -> f64 {
        let a = u.abs();
        if a >= self.half_len {
            return 0.0;
        }
        let w = self.width;
        let t = a % (2.0 * w);
        let v = if t <= 0.5 * w {
            t
        } else if t <= 1.5 * w {
            w - t
        } else {
            t - 2.0 * w
        };
        self.slope * v
    }

    /// `∫_{-∞}^{x} T(u) du`, exact.
    pub fn wave_integral(&self, x: f64) -> f64 {
        let a = x.abs();
        if a >= self.half_len {
            return 0.0;
        }
        let w = self.width;
        let t = a % (2.0 * w);
        let g = if t <= 0.5 * w {
            0.5 * t * t
        } else if t <= 1.5 * w {
            w * w / 8.0 + w * (t - 0.5 * w) - 0.5 * (t * t - 0.25 * w * w)
        } else {
            0.5 * (2.0 * w - t) * (2.0 * w - t)
        };
        self.slope * g * x.signum()
    }

    /// `∫ u² T(u) du` over the support, by Gauss–Legendre on the linear pieces.
    pub fn second_moment(&self) -> f64 {
        let rule = GaussLegendre::new(4);
        self.breaks
            .windows(2)
            .map(|ab| rule.integrate(ab[0], ab[1], |u| u * u * self.wave(u)))
            .sum()
    }
}
