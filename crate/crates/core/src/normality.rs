//! Anderson–Darling test of a sample against the standard normal.
//!
//! The null distribution is fully specified (no estimated parameters), so the
//! p-value uses Marsaglia & Marsaglia's (2004) asymptotic approximation plus
//! their finite-sample correction.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AndersonDarling {
    pub statistic: f64,
    pub p_value: f64,
}

/// `A²` and its p-value for `sample` under `N(0, 1)`.
pub fn anderson_darling(sample: &[f64]) -> Result<AndersonDarling> {
    let n = sample.len();
    if n < 2 {
        return Err(domain("Anderson-Darling needs at least two observations"));
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Anderson-Darling sample".into()));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let std = Normal::standard();
    let nf = n as f64;
    let mut s = 0.0;
    for i in 0..n {
        // ln(1 - Φ(z)) = ln Φ(-z), which keeps precision in the upper tail
        let lo = std.cdf(sorted[i]).ln();
        let hi = std.cdf(-sorted[n - 1 - i]).ln();
        s += (2 * i + 1) as f64 * (lo + hi);
    }
    let statistic = -nf - s / nf;
    Ok(AndersonDarling {
        statistic,
        p_value: p_value(statistic, n),
    })
}

/// Limiting distribution function of `A²`.
pub fn asymptotic_cdf(z: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    if z < 2.0 {
        (-1.233_714_1 / z).exp() / z.sqrt()
            * (2.00012
                + (0.247_105 - (0.064_982_1 - (0.034_796_2 - (0.011_672 - 0.001_686_91 * z) * z) * z) * z) * z)
    } else {
        (-(1.0776 - (2.30695 - (0.43424 - (0.082433 - (0.008056 - 0.000_314_6 * z) * z) * z) * z) * z).exp())
            .exp()
    }
}

/// Finite-`n` correction to [`asymptotic_cdf`] at cdf value `x`.
fn error_fix(n: f64, x: f64) -> f64 {
    if x > 0.8 {
        return (-130.2137
            + (745.2337 - (1705.091 - (1950.646 - (1116.360 - 255.7844 * x) * x) * x) * x) * x)
            / n;
    }
    let c = 0.01265 + 0.1757 / n;
    if x < c {
        let t = x / c;
        let t = t.sqrt() * (1.0 - t) * (49.0 * t - 102.0);
        t * (0.0037 / (n * n) + 0.00078 / n + 0.00006)
    } else {
        let t = (x - c) / (0.8 - c);
        let t = -0.000_226_33
            + (6.54034 - (14.6538 - (14.458 - (8.259 - 1.91864 * t) * t) * t) * t) * t;
        t * (0.04213 + 0.01365 / n) / n
    }
}

/// Upper-tail probability of `A²` for a sample of size `n`.
pub fn p_value(statistic: f64, n: usize) -> f64 {
    let x = asymptotic_cdf(statistic);
    let cdf = x + error_fix(n as f64, x);
    (1.0 - cdf).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn asymptotic_critical_values() {
        for (a2, level) in [(1.933, 0.90), (2.492, 0.95), (3.857, 0.99)] {
            assert!((asymptotic_cdf(a2) - level).abs() < 1e-3, "{a2}");
        }
        assert!(p_value(1e-3, 500) > 0.999);
        assert!(p_value(20.0, 500) < 1e-5);
    }

    #[test]
    fn normal_quantiles_are_accepted() {
        let std = Normal::standard();
        let n = 400;
        let sample: Vec<f64> = (0..n)
            .map(|i| std.inverse_cdf((i as f64 + 0.5) / n as f64))
            .collect();
        let ad = anderson_darling(&sample).unwrap();
        assert!(ad.statistic < 0.1);
        assert!(ad.p_value > 0.9);
    }

    #[test]
    fn scaled_sample_is_rejected() {
        let std = Normal::standard();
        let n = 400;
        let sample: Vec<f64> = (0..n)
            .map(|i| 2.0 * std.inverse_cdf((i as f64 + 0.5) / n as f64))
            .collect();
        assert!(anderson_darling(&sample).unwrap().p_value < 1e-3);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(anderson_darling(&[0.1]).is_err());
        assert!(anderson_darling(&[0.1, f64::NAN]).is_err());
    }
}
