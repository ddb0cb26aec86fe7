//! Sample statistics shared by the estimators and the validation code.

/// Order statistic at 1-based index `⌈p·m⌉`, clamped to `[1, m]`, without interpolation.
pub fn ceil_order_statistic(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let m = sorted.len();
    // absorb the rounding of p·m so that e.g. 0.95·10⁵ maps to 95000, not 95001
    let idx = ((p * m as f64 * (1.0 - 4.0 * f64::EPSILON)).ceil() as usize).clamp(1, m);
    sorted[idx - 1]
}

pub fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample mean and the standard error of the mean.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = mean(values);
    if values.len() < 2 {
        return (m, 0.0);
    }
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

pub fn median(values: &[f64]) -> f64 {
    let s = sorted(values);
    let m = s.len();
    if m % 2 == 1 {
        s[m / 2]
    } else {
        0.5 * (s[m / 2 - 1] + s[m / 2])
    }
}

/// Kolmogorov–Smirnov statistic `sup |F_n - F|` of a sample against a CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(values: &[f64], cdf: F) -> f64 {
    let s = sorted(values);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value `√(-ln(α/2)/2) / √n`.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}
