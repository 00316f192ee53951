//! Small statistics helpers for Monte-Carlo reporting.

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959964;

/// Wilson score interval for `k` successes out of `n` trials.
pub fn wilson(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

fn ln_choose(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    (0..k)
        .map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln())
        .sum()
}

/// Upper tail `P(X >= k)` for `X ~ Binomial(n, 1/2)`.
pub fn binomial_half_upper_tail(k: u64, n: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    let ln_half_n = n as f64 * 0.5f64.ln();
    let p: f64 = (k..=n).map(|i| (ln_choose(n, i) + ln_half_n).exp()).sum();
    p.min(1.0)
}

/// Exact one-sided McNemar test on paired binary outcomes.
///
/// `b` counts pairs where only the first condition failed, `c` pairs where
/// only the second failed. Returns the p-value for "first fails more often".
pub fn mcnemar_one_sided(b: u64, c: u64) -> f64 {
    binomial_half_upper_tail(b, b + c)
}

/// Ordinary least-squares slope of `y` on `x`. `None` when `x` is constant.
pub fn ols_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let sxx: f64 = x[..n].iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x[..n]
        .iter()
        .zip(&y[..n])
        .map(|(a, b)| (a - mx) * (b - my))
        .sum();
    Some(sxy / sxx)
}
