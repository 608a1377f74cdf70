use super::SortedSample;
use crate::{Error, Result};
#[allow(unused_imports)]
use num_traits::Float;

/// `D_n = max_i max(|i/n − F(x_i)|, |(i−1)/n − F(x_i)|)`.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &SortedSample, cdf: F) -> f64 {
    let x = sample.values();
    let n = x.len() as f64;
    x.iter().enumerate().fold(0.0, |d, (i, &v)| {
        let f = cdf(v);
        let hi = ((i + 1) as f64 / n - f).abs();
        let lo = (i as f64 / n - f).abs();
        d.max(hi).max(lo)
    })
}

/// Kolmogorov tail `Q(c) = 2 Σ_{j≥1} (−1)^{j−1} exp(−2 j² c²)`.
pub fn kolmogorov_tail(c: f64) -> f64 {
    if c <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=1000 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * c * c).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic critical value `c(α)` with `Q(c) = α`.
pub fn kolmogorov_critical(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain("significance level must lie in (0, 1)"));
    }
    let (mut lo, mut hi) = (0.05, 20.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_tail(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Finite-sample threshold `c(α) / (√n + 0.12 + 0.11/√n)`.
pub fn ks_critical_value(alpha: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("sample size must be positive"));
    }
    let rn = (n as f64).sqrt();
    Ok(kolmogorov_critical(alpha)? / (rn + 0.12 + 0.11 / rn))
}
