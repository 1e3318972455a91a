//! Regularly varying power sequences, stepsize schedules and the running
//! products `Q_n = prod_{j<=n} (1 - beta_j)` built from them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// A positive power sequence `v_n = coefficient * n^power`, `n >= 1`.
///
/// Power sequences belong to the Galambos–Seneta class with index equal to
/// `power`: `n * (1 - v_{n-1} / v_n) -> power`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GsSequence {
    pub coefficient: f64,
    pub power: f64,
}

impl GsSequence {
    pub fn new(coefficient: f64, power: f64) -> Result<Self> {
        if !(coefficient.is_finite() && coefficient > 0.0) {
            return Err(domain(format!("sequence coefficient must be positive, got {coefficient}")));
        }
        if !power.is_finite() {
            return Err(domain("sequence power must be finite"));
        }
        Ok(Self { coefficient, power })
    }

    /// `coefficient / n`, the canonical stepsize shape.
    pub fn harmonic(coefficient: f64) -> Result<Self> {
        Self::new(coefficient, -1.0)
    }

    /// The value at index `n` (1-based).
    pub fn value(&self, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(domain("sequences are indexed from n = 1"));
        }
        Ok(self.at(n))
    }

    /// Unchecked evaluation; `n` must be at least 1.
    #[inline]
    pub(crate) fn at(&self, n: usize) -> f64 {
        debug_assert!(n >= 1);
        if self.power == -1.0 {
            self.coefficient / n as f64
        } else {
            self.coefficient * (n as f64).powf(self.power)
        }
    }

    /// The index of the sequence in the GS class.
    pub fn gs_index(&self) -> f64 {
        self.power
    }

    /// Finite-n version of the defining limit, `n * (1 - v_{n-1} / v_n)`.
    pub fn gs_check(&self, n: usize) -> Result<f64> {
        if n < 2 {
            return Err(domain("GS check needs n >= 2"));
        }
        let nf = n as f64;
        // v_{n-1}/v_n = (1 - 1/n)^power, evaluated without cancellation
        let ratio_m1 = (self.power * (-1.0 / nf).ln_1p()).exp_m1();
        Ok(-nf * ratio_m1)
    }

    /// `lim n * v_n`, which is finite and positive only for harmonic sequences.
    pub fn limit_n_times(&self) -> f64 {
        if self.power == -1.0 {
            self.coefficient
        } else if self.power > -1.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }

    /// `xi = lim (n v_n)^{-1}`.
    pub fn xi(&self) -> f64 {
        1.0 / self.limit_n_times()
    }
}

/// Cumulative table of `prod_{j=1}^{n} (1 - beta_j)` for `n <= n_max`.
///
/// Products are kept as log-magnitudes plus the position of the last zero
/// factor, so `Q_n / Q_k` never divides by a vanishing `Q_k` (which happens
/// whenever `beta_1 = 1`) and never underflows.
#[derive(Debug, Clone)]
pub struct ProductTable {
    log_abs: Vec<f64>,
    last_zero: Vec<usize>,
    negatives: Vec<u32>,
}

impl ProductTable {
    pub fn new(beta: &GsSequence, n_max: usize) -> Self {
        let mut log_abs = Vec::with_capacity(n_max + 1);
        let mut last_zero = Vec::with_capacity(n_max + 1);
        let mut negatives = Vec::with_capacity(n_max + 1);
        log_abs.push(0.0);
        last_zero.push(0);
        negatives.push(0);
        let (mut acc, mut zero, mut neg) = (0.0, 0usize, 0u32);
        for j in 1..=n_max {
            let factor = 1.0 - beta.at(j);
            if factor == 0.0 {
                zero = j;
            } else {
                acc += factor.abs().ln();
                if factor < 0.0 {
                    neg += 1;
                }
            }
            log_abs.push(acc);
            last_zero.push(zero);
            negatives.push(neg);
        }
        Self {
            log_abs,
            last_zero,
            negatives,
        }
    }

    pub fn n_max(&self) -> usize {
        self.log_abs.len() - 1
    }

    /// `prod_{j=k+1}^{n} (1 - beta_j)`; panics when `k > n` or `n > n_max`.
    #[inline]
    pub fn ratio(&self, k: usize, n: usize) -> f64 {
        assert!(k <= n && n <= self.n_max(), "ratio({k}, {n}) outside table");
        if self.last_zero[n] > k {
            return 0.0;
        }
        let magnitude = (self.log_abs[n] - self.log_abs[k]).exp();
        if (self.negatives[n] - self.negatives[k]) % 2 == 1 {
            -magnitude
        } else {
            magnitude
        }
    }

    /// `ratio(k, n)` raised to a real power, computed in log space.
    pub fn ratio_pow(&self, k: usize, n: usize, m: f64) -> f64 {
        let r = self.ratio(k, n);
        if r > 0.0 {
            (m * (self.log_abs[n] - self.log_abs[k])).exp()
        } else {
            r.powf(m)
        }
    }

    /// The stochastic-approximation weights `(Q_n / Q_k) beta_k`, `k = 1..=n`.
    pub fn weights(&self, beta: &GsSequence, n: usize) -> Vec<f64> {
        (1..=n).map(|k| self.ratio(k, n) * beta.at(k)).collect()
    }
}

/// `prod_{j=k+1}^{n} (1 - beta_j)`, i.e. `Q_n / Q_k`; 1 when `k == n`.
pub fn product_ratio(beta: &GsSequence, k: usize, n: usize) -> Result<f64> {
    if k > n {
        return Err(domain(format!("product_ratio needs k <= n, got k = {k}, n = {n}")));
    }
    let mut log_abs = 0.0;
    let mut negative = false;
    for j in (k + 1)..=n {
        let factor = 1.0 - beta.at(j);
        if factor == 0.0 {
            return Ok(0.0);
        }
        log_abs += factor.abs().ln();
        negative ^= factor < 0.0;
    }
    let magnitude = log_abs.exp();
    Ok(if negative { -magnitude } else { magnitude })
}

/// Finite-n value of `v_n Q_n^m sum_{k<=n} Q_k^{-m} beta_k / v_k`, whose
/// limit is `1 / (m - v* xi)` with `v*` the GS index of `v`.
pub fn lemma1_partial(v: &GsSequence, beta: &GsSequence, m: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(domain("lemma1_partial needs n >= 1"));
    }
    let margin = m - v.gs_index() * beta.xi();
    if !(margin > 0.0) {
        return Err(domain(format!(
            "lemma hypothesis m - v* xi > 0 violated: {m} - {} * {} = {margin}",
            v.gs_index(),
            beta.xi()
        )));
    }
    let table = ProductTable::new(beta, n);
    let sum: f64 = (1..=n)
        .map(|k| table.ratio_pow(k, n, m) * beta.at(k) / v.at(k))
        .sum();
    Ok(v.at(n) * sum)
}

/// The limit `1 / (m - v* xi)` approached by [`lemma1_partial`].
pub fn lemma1_limit(v: &GsSequence, beta: &GsSequence, m: f64) -> f64 {
    1.0 / (m - v.gs_index() * beta.xi())
}

/// The five estimator configurations compared throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Estimator {
    /// Nonrecursive Nadaraya–Watson baseline.
    #[serde(rename = "NW")]
    NadarayaWatson,
    /// `(gamma_n, beta_n) = (1/n, 1/n)`
    Recursive1,
    /// `(gamma_n, beta_n) = (1/n, (1-a)/n)`
    Recursive2,
    /// `(gamma_n, beta_n) = ((1-a)/n, 1/n)`
    Recursive3,
    /// `(gamma_n, beta_n) = ((1-a)/n, (1-a)/n)`
    Recursive4,
}

impl Estimator {
    pub const ALL: [Estimator; 5] = [
        Estimator::NadarayaWatson,
        Estimator::Recursive1,
        Estimator::Recursive2,
        Estimator::Recursive3,
        Estimator::Recursive4,
    ];

    pub const RECURSIVE: [Estimator; 4] = [
        Estimator::Recursive1,
        Estimator::Recursive2,
        Estimator::Recursive3,
        Estimator::Recursive4,
    ];

    pub fn is_recursive(self) -> bool {
        self != Estimator::NadarayaWatson
    }

    pub fn label(self) -> &'static str {
        match self {
            Estimator::NadarayaWatson => "NW",
            Estimator::Recursive1 => "Recursive1",
            Estimator::Recursive2 => "Recursive2",
            Estimator::Recursive3 => "Recursive3",
            Estimator::Recursive4 => "Recursive4",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace([' ', '_', '-'], "").as_str() {
            "nw" | "nadarayawatson" | "nadaraya" => Ok(Estimator::NadarayaWatson),
            "1" | "rec1" | "recursive1" => Ok(Estimator::Recursive1),
            "2" | "rec2" | "recursive2" => Ok(Estimator::Recursive2),
            "3" | "rec3" | "recursive3" => Ok(Estimator::Recursive3),
            "4" | "rec4" | "recursive4" => Ok(Estimator::Recursive4),
            other => Err(domain(format!("unknown estimator '{other}'"))),
        }
    }
}

/// Which density stepsize family a configuration uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaFamily {
    /// `gamma_n = 1/n`, minimising the MISE of the density recursion.
    MiseOptimal,
    /// `gamma_n = (1-a)/n`, minimising its variance.
    VarianceOptimal,
}

/// Stepsizes `(gamma_n, beta_n)` and bandwidth exponent `a` of one estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepsizeConfig {
    pub estimator: Estimator,
    /// Density stepsize; `None` for Nadaraya–Watson.
    pub gamma: Option<GsSequence>,
    /// Numerator stepsize; `None` for Nadaraya–Watson.
    pub beta: Option<GsSequence>,
    /// Bandwidth exponent: `h_n` is in GS(-a).
    pub a: f64,
}

/// Bandwidth exponent used by every shipped configuration.
pub const DEFAULT_BANDWIDTH_EXPONENT: f64 = 0.2;

impl StepsizeConfig {
    pub fn new(estimator: Estimator, a: f64) -> Result<Self> {
        if !(a > 0.0 && a < 1.0) {
            return Err(domain(format!("bandwidth exponent a must lie in (0, 1), got {a}")));
        }
        let full = GsSequence::harmonic(1.0)?;
        let damped = GsSequence::harmonic(1.0 - a)?;
        let (gamma, beta) = match estimator {
            Estimator::NadarayaWatson => (None, None),
            Estimator::Recursive1 => (Some(full), Some(full)),
            Estimator::Recursive2 => (Some(full), Some(damped)),
            Estimator::Recursive3 => (Some(damped), Some(full)),
            Estimator::Recursive4 => (Some(damped), Some(damped)),
        };
        Ok(Self {
            estimator,
            gamma,
            beta,
            a,
        })
    }

    /// The shipped configuration, `a = 1/5`.
    pub fn standard(estimator: Estimator) -> Self {
        Self::new(estimator, DEFAULT_BANDWIDTH_EXPONENT).expect("a = 1/5 is valid")
    }

    pub fn gamma_family(&self) -> Option<GammaFamily> {
        self.gamma.map(|g| {
            if (g.coefficient - 1.0).abs() < 1e-12 {
                GammaFamily::MiseOptimal
            } else {
                GammaFamily::VarianceOptimal
            }
        })
    }

    /// `beta_0 = lim n beta_n` (1 for Nadaraya–Watson's uniform weights).
    pub fn beta0(&self) -> f64 {
        self.beta.map_or(1.0, |b| b.limit_n_times())
    }

    /// `xi = lim (n beta_n)^{-1}`.
    pub fn xi(&self) -> f64 {
        1.0 / self.beta0()
    }

    /// The `beta` of `beta_n in GS(-beta)`.
    pub fn beta_index(&self) -> f64 {
        self.beta.map_or(1.0, |b| -b.gs_index())
    }

    /// Checks `beta in (1/2, 1]`, `a in (0, 1)` and
    /// `lim n beta_n > max{2a, (beta - a)/2}` (the stronger of the two
    /// readings of the stepsize condition).
    pub fn check_assumptions(&self) -> Result<()> {
        let beta = self.beta_index();
        if !(beta > 0.5 && beta <= 1.0) {
            return Err(domain(format!("beta index {beta} outside (1/2, 1]")));
        }
        if !(self.a > 0.0 && self.a < 1.0) {
            return Err(domain(format!("a = {} outside (0, 1)", self.a)));
        }
        let bound = (2.0 * self.a).max((beta - self.a) / 2.0).max((self.a - beta) / 2.0);
        if !(self.beta0() > bound) {
            return Err(domain(format!(
                "lim n beta_n = {} must exceed {bound}",
                self.beta0()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn harmonic() -> GsSequence {
        GsSequence::harmonic(1.0).unwrap()
    }

    #[test]
    fn values() {
        assert_eq!(harmonic().value(10).unwrap(), 0.1);
        let damped = GsSequence::harmonic(0.8).unwrap();
        assert!((damped.value(4).unwrap() - 0.2).abs() < 1e-15);
        let h = GsSequence::new(0.61024, -0.2).unwrap();
        assert!((h.value(100).unwrap() - 0.24294).abs() < 1e-5);
        assert!(harmonic().value(0).is_err());
        assert!(GsSequence::new(0.0, -1.0).is_err());
    }

    #[test]
    fn gs_check_converges_to_power() {
        for power in [-1.0, -0.2, -3.0 / 14.0, 0.5] {
            let s = GsSequence::new(2.5, power).unwrap();
            let dev = (s.gs_check(1_000_000).unwrap() - power).abs();
            assert!(dev < 1e-4, "power {power}: deviation {dev}");
        }
    }

    #[test]
    fn product_ratio_examples() {
        let b = harmonic();
        assert!((product_ratio(&b, 3, 6).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(product_ratio(&b, 7, 7).unwrap(), 1.0);
        assert_eq!(product_ratio(&b, 0, 5).unwrap(), 0.0);
        assert!(product_ratio(&b, 5, 4).is_err());
    }

    #[test]
    fn table_matches_direct_product() {
        let b = GsSequence::harmonic(0.8).unwrap();
        let t = ProductTable::new(&b, 50);
        for k in 0..=50 {
            for n in k..=50 {
                let direct = product_ratio(&b, k, n).unwrap();
                assert!((t.ratio(k, n) - direct).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn table_handles_zero_first_factor() {
        let t = ProductTable::new(&harmonic(), 10);
        assert_eq!(t.ratio(0, 10), 0.0);
        assert!((t.ratio(1, 10) - 0.1).abs() < 1e-15);
        let w = t.weights(&harmonic(), 10);
        assert!(w.iter().all(|&x| (x - 0.1).abs() < 1e-15));
    }

    #[test]
    fn no_underflow_at_large_n() {
        let b = GsSequence::harmonic(0.8).unwrap();
        let t = ProductTable::new(&b, 1_000_000);
        let r = t.ratio(999_990, 1_000_000);
        assert!(r > 0.99 && r < 1.0);
        assert!(t.ratio(0, 1_000_000) > 0.0);
    }

    #[test]
    fn lemma1_examples() {
        let one = GsSequence::new(1.0, 0.0).unwrap();
        let b = harmonic();
        assert!((lemma1_partial(&one, &b, 2.0, 1000).unwrap() - 0.5005).abs() < 1e-12);
        for n in [1, 7, 100, 5000] {
            assert!((lemma1_partial(&one, &b, 1.0, n).unwrap() - 1.0).abs() < 1e-12);
        }
        let v = GsSequence::new(1.0, -0.2).unwrap();
        let got = lemma1_partial(&v, &b, 1.0, 100_000).unwrap();
        assert!((got - 5.0 / 6.0).abs() < 0.01 * 5.0 / 6.0);
        assert!((lemma1_limit(&v, &b, 1.0) - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn lemma1_rejects_violated_hypothesis() {
        let v = GsSequence::new(1.0, 2.0).unwrap();
        assert!(lemma1_partial(&v, &harmonic(), 1.0, 10).is_err());
    }

    #[test]
    fn shipped_configurations() {
        let r1 = StepsizeConfig::standard(Estimator::Recursive1);
        assert_eq!(r1.xi(), 1.0);
        assert_eq!(r1.gamma_family(), Some(GammaFamily::MiseOptimal));
        let r4 = StepsizeConfig::standard(Estimator::Recursive4);
        assert!((r4.beta0() - 0.8).abs() < 1e-15);
        assert!((r4.xi() - 1.25).abs() < 1e-12);
        assert_eq!(r4.gamma_family(), Some(GammaFamily::VarianceOptimal));
        let r2 = StepsizeConfig::standard(Estimator::Recursive2);
        assert_eq!(r2.gamma_family(), Some(GammaFamily::MiseOptimal));
        assert!((r2.beta.unwrap().value(4).unwrap() - 0.2).abs() < 1e-15);
        for e in Estimator::ALL {
            StepsizeConfig::standard(e).check_assumptions().unwrap();
        }
        assert!(StepsizeConfig::new(Estimator::Recursive1, 1.0).is_err());
    }

    #[test]
    fn parse_estimators() {
        assert_eq!("nw".parse::<Estimator>().unwrap(), Estimator::NadarayaWatson);
        assert_eq!("Recursive 3".parse::<Estimator>().unwrap(), Estimator::Recursive3);
        assert_eq!("rec4".parse::<Estimator>().unwrap(), Estimator::Recursive4);
        assert!("rec5".parse::<Estimator>().is_err());
    }
}
