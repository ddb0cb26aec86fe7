//! WebAssembly bindings for the demo page in `www/`.
//!
//! Curves are returned as flat `Float64Array`s with a fixed stride, so the page
//! can draw them without a serialization layer.

use smoothloc_core::estimator1d::{Config1d, Estimator1d};
use smoothloc_core::stats::mean;
use smoothloc_core::{Density1d, ModelSpec, RngSeed, SmoothedModel1d};
use wasm_bindgen::prelude::*;

const MAX_POINTS: usize = 4096;
const MAX_SAMPLES: usize = 1_000_000;

fn parse(model: &str) -> smoothloc_core::Result<Density1d> {
    ModelSpec::parse(model)?.univariate()
}

fn check_points(points: usize) -> smoothloc_core::Result<()> {
    if (2..=MAX_POINTS).contains(&points) {
        Ok(())
    } else {
        Err(smoothloc_core::Error::Config(format!("points must lie in 2..={MAX_POINTS}")))
    }
}

/// Rows `(x, f(x), f_r(x), s_r(x))` on an even grid over `[lo, hi]`.
pub fn profile(model: &str, r: f64, lo: f64, hi: f64, points: usize) -> smoothloc_core::Result<Vec<f64>> {
    check_points(points)?;
    let base = parse(model)?;
    let smooth = SmoothedModel1d::new(base.clone(), r)?;
    let mut out = Vec::with_capacity(4 * points);
    for i in 0..points {
        let x = lo + (hi - lo) * i as f64 / (points - 1) as f64;
        let (pdf, score) = smooth.pdf_and_score(x);
        out.extend([x, base.pdf(x), pdf, score.unwrap_or(f64::NAN)]);
    }
    Ok(out)
}

/// Rows `(r, I_r, 1/(Var + r²), 1/r²)` on a log grid over `[r_min, r_max]`.
pub fn fisher(model: &str, r_min: f64, r_max: f64, points: usize) -> smoothloc_core::Result<Vec<f64>> {
    check_points(points)?;
    if !(r_min > 0.0 && r_max > r_min) {
        return Err(smoothloc_core::Error::Domain("need 0 < r_min < r_max".into()));
    }
    let base = parse(model)?;
    let var = base.variance();
    let step = (r_max / r_min).ln() / (points - 1) as f64;
    let mut out = Vec::with_capacity(4 * points);
    for i in 0..points {
        let r = r_min * (step * i as f64).exp();
        let m = SmoothedModel1d::new(base.clone(), r)?;
        out.extend([r, m.fisher(), 1.0 / (var + r * r), 1.0 / (r * r)]);
    }
    Ok(out)
}

#[wasm_bindgen]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub lambda_hat: f64,
    pub lambda_initial: f64,
    pub sample_mean: f64,
    pub r: f64,
    pub fisher: f64,
    pub radius: f64,
    pub n_init: usize,
}

/// Draws `n` samples at location `lambda` and runs the global estimator.
pub fn estimate(model: &str, n: usize, lambda: f64, delta: f64, seed: u32) -> smoothloc_core::Result<Estimate> {
    if n > MAX_SAMPLES {
        return Err(smoothloc_core::Error::Config(format!("n must be at most {MAX_SAMPLES}")));
    }
    let base = parse(model)?;
    let est = Estimator1d::new(&base, n, &Config1d::with_delta(delta))?;
    let xs = base.clone().with_shift(lambda).sample(n, RngSeed::new(seed as u64, 0));
    let rep = est.estimate(&xs, RngSeed::new(seed as u64, 1))?;
    Ok(Estimate {
        lambda_hat: rep.lambda_hat,
        lambda_initial: rep.lambda_initial,
        sample_mean: mean(&xs),
        r: rep.r_used,
        fisher: rep.fisher_at_r,
        radius: rep.theoretical_radius,
        n_init: rep.n_used_init,
    })
}

fn js(e: smoothloc_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = smoothedProfile)]
pub fn smoothed_profile(model: &str, r: f64, lo: f64, hi: f64, points: usize) -> Result<Vec<f64>, JsError> {
    profile(model, r, lo, hi, points).map_err(js)
}

#[wasm_bindgen(js_name = fisherCurve)]
pub fn fisher_curve(model: &str, r_min: f64, r_max: f64, points: usize) -> Result<Vec<f64>, JsError> {
    fisher(model, r_min, r_max, points).map_err(js)
}

#[wasm_bindgen(js_name = estimateLocation)]
pub fn estimate_location(model: &str, n: usize, lambda: f64, delta: f64, seed: u32) -> Result<Estimate, JsError> {
    estimate(model, n, lambda, delta, seed).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_profile_is_wider_normal() {
        let rows = profile("gaussian(0,1)", 1.0, -2.0, 2.0, 5).unwrap();
        assert_eq!(rows.len(), 20);
        let (x, pdf, score) = (rows[12], rows[14], rows[15]);
        assert_eq!(x, 1.0);
        let expect = (-0.25f64).exp() / (4.0 * std::f64::consts::PI).sqrt();
        assert!((pdf - expect).abs() < 1e-12);
        assert!((score + 0.5).abs() < 1e-12);
    }

    #[test]
    fn fisher_curve_is_log_spaced_and_sandwiched() {
        let rows = fisher("laplace(0,1)", 0.1, 1.0, 3).unwrap();
        let r: Vec<f64> = rows.chunks(4).map(|c| c[0]).collect();
        assert!((r[1] - 0.1f64.sqrt()).abs() < 1e-12);
        for c in rows.chunks(4) {
            assert!(c[2] <= c[1] && c[1] <= c[3]);
        }
    }

    #[test]
    fn estimate_is_close_and_deterministic() {
        let a = estimate("laplace(0,1)", 5000, 2.0, 0.1, 7).unwrap();
        assert_eq!(a, estimate("laplace(0,1)", 5000, 2.0, 0.1, 7).unwrap());
        assert!((a.lambda_hat - 2.0).abs() < 0.15);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(profile("gaussian(0,1)", 1.0, 0.0, 1.0, 1).is_err());
        assert!(fisher("gaussian(0,1)", 1.0, 0.5, 10).is_err());
        assert!(estimate("product(gaussian(0,1)^2)", 500, 0.0, 0.1, 1).is_err());
    }
}
