//! Semi-recursive kernel regression and the Nadaraya–Watson baseline.
//!
//! The numerator `a_n` and the density `f_n` are Robbins–Monro recursions
//! over a fixed evaluation grid:
//!
//! ```text
//! a_n(x) = (1 - beta_n)  a_{n-1}(x) + beta_n  h_n^{-1} Y_n K((x - X_n) / h_n)
//! f_n(x) = (1 - gamma_n) f_{n-1}(x) + gamma_n h_n^{-1}     K((x - X_n) / h_n)
//! ```
//!
//! starting from `a_0 = f_0 = 0`. The regression estimate is the ratio
//! `a_n / f_n`, with 0 wherever the density estimate vanishes. Each update
//! costs `O(|grid|)` and the estimator never stores past observations.

use crate::error::{domain, Error, Result};
use crate::kernel::KernelSpec;
use crate::seq::{GsSequence, ProductTable, StepsizeConfig};

/// Threshold below which `|f_n(x)|` is treated as zero.
pub const EPS_DENOM: f64 = 1e-30;

/// Paired observations `(X_i, Y_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Dataset {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(domain(format!(
                "x and y lengths differ: {} vs {}",
                xs.len(),
                ys.len()
            )));
        }
        if xs.is_empty() {
            return Err(domain("dataset is empty"));
        }
        if let Some(i) = xs.iter().chain(ys.iter()).position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("observation {}", i % xs.len())));
        }
        Ok(Self { xs, ys })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }

    /// Same observations with every response multiplied by `c`.
    pub fn scale_responses(&self, c: f64) -> Self {
        Self {
            xs: self.xs.clone(),
            ys: self.ys.iter().map(|y| c * y).collect(),
        }
    }
}

#[inline]
fn ratio_or_zero(num: f64, den: f64) -> f64 {
    if den.abs() > EPS_DENOM {
        num / den
    } else {
        0.0
    }
}

/// Streaming state of one semi-recursive estimator on a fixed grid.
#[derive(Debug, Clone)]
pub struct RecursiveState {
    grid: Vec<f64>,
    a_vals: Vec<f64>,
    f_vals: Vec<f64>,
    n: usize,
    config: StepsizeConfig,
    gamma: GsSequence,
    beta: GsSequence,
    bandwidth: GsSequence,
    kernel: KernelSpec,
}

impl RecursiveState {
    pub fn new(
        grid: Vec<f64>,
        config: StepsizeConfig,
        bandwidth: GsSequence,
        kernel: KernelSpec,
    ) -> Result<Self> {
        let (Some(gamma), Some(beta)) = (config.gamma, config.beta) else {
            return Err(domain(format!(
                "{} has no stepsizes; it is not a recursive estimator",
                config.estimator
            )));
        };
        if grid.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("evaluation grid".into()));
        }
        let m = grid.len();
        Ok(Self {
            grid,
            a_vals: vec![0.0; m],
            f_vals: vec![0.0; m],
            n: 0,
            config,
            gamma,
            beta,
            bandwidth,
            kernel,
        })
    }

    /// Consumes one observation. Non-finite input is rejected and leaves the
    /// state untouched.
    pub fn update(&mut self, x_obs: f64, y_obs: f64) -> Result<()> {
        if !(x_obs.is_finite() && y_obs.is_finite()) {
            return Err(Error::NonFinite(format!("observation ({x_obs}, {y_obs})")));
        }
        let n = self.n + 1;
        let h = self.bandwidth.at(n);
        let (gamma, beta) = (self.gamma.at(n), self.beta.at(n));
        let inv_h = 1.0 / h;
        for ((x, a), f) in self
            .grid
            .iter()
            .zip(self.a_vals.iter_mut())
            .zip(self.f_vals.iter_mut())
        {
            let w = inv_h * self.kernel.eval((x - x_obs) * inv_h);
            *a = (1.0 - beta) * *a + beta * y_obs * w;
            *f = (1.0 - gamma) * *f + gamma * w;
        }
        self.n = n;
        Ok(())
    }

    /// Feeds every observation of `data` in order.
    pub fn extend(&mut self, data: &Dataset) -> Result<()> {
        data.iter().try_for_each(|(x, y)| self.update(x, y))
    }

    /// `r_n = a_n / f_n` on the grid, 0 where `|f_n| <= EPS_DENOM`.
    pub fn regression(&self) -> Vec<f64> {
        self.a_vals
            .iter()
            .zip(&self.f_vals)
            .map(|(&a, &f)| ratio_or_zero(a, f))
            .collect()
    }

    /// Replaces the bandwidth sequence for all subsequent updates.
    pub fn set_bandwidth(&mut self, bandwidth: GsSequence) {
        self.bandwidth = bandwidth;
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn numerator(&self) -> &[f64] {
        &self.a_vals
    }

    pub fn density(&self) -> &[f64] {
        &self.f_vals
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn config(&self) -> &StepsizeConfig {
        &self.config
    }

    pub fn bandwidth(&self) -> &GsSequence {
        &self.bandwidth
    }
}

/// Fits a recursive estimator to `data` in one pass and returns `r_n` on `grid`.
pub fn recursive_fit(
    data: &Dataset,
    config: StepsizeConfig,
    bandwidth: GsSequence,
    grid: &[f64],
    kernel: &KernelSpec,
) -> Result<Vec<f64>> {
    let mut state = RecursiveState::new(grid.to_vec(), config, bandwidth, kernel.clone())?;
    state.extend(data)?;
    Ok(state.regression())
}

/// Non-streaming evaluation of `(a_n, f_n)` through the explicit weights
/// `(Q_n / Q_k) beta_k` and `(Pi_n / Pi_k) gamma_k`. `O(n |grid|)`.
pub fn closed_form_fit(
    data: &Dataset,
    config: StepsizeConfig,
    bandwidth: GsSequence,
    grid: &[f64],
    kernel: &KernelSpec,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (Some(gamma), Some(beta)) = (config.gamma, config.beta) else {
        return Err(domain("closed_form_fit needs a recursive configuration"));
    };
    let n = data.len();
    let wa = ProductTable::new(&beta, n).weights(&beta, n);
    let wf = ProductTable::new(&gamma, n).weights(&gamma, n);
    let hs: Vec<f64> = (1..=n).map(|k| bandwidth.at(k)).collect();
    let mut a_vals = vec![0.0; grid.len()];
    let mut f_vals = vec![0.0; grid.len()];
    for (g, &x) in grid.iter().enumerate() {
        let (mut a, mut f) = (0.0, 0.0);
        for (k, (xk, yk)) in data.iter().enumerate() {
            let term = kernel.eval((x - xk) / hs[k]) / hs[k];
            a += wa[k] * yk * term;
            f += wf[k] * term;
        }
        a_vals[g] = a;
        f_vals[g] = f;
    }
    Ok((a_vals, f_vals))
}

/// Nadaraya–Watson fit with a single bandwidth `h`.
pub fn nw_fit(data: &Dataset, h: f64, grid: &[f64], kernel: &KernelSpec) -> Result<Vec<f64>> {
    if !(h.is_finite() && h > 0.0) {
        return Err(domain(format!("bandwidth must be positive, got {h}")));
    }
    if data.is_empty() {
        return Err(domain("dataset is empty"));
    }
    let inv_h = 1.0 / h;
    Ok(grid
        .iter()
        .map(|&x| {
            let (mut num, mut den) = (0.0, 0.0);
            for (xi, yi) in data.iter() {
                let k = kernel.eval((x - xi) * inv_h);
                num += yi * k;
                den += k;
            }
            ratio_or_zero(num, den)
        })
        .collect())
}

/// Batch kernel density estimate with a single bandwidth `h`.
pub fn kde(xs: &[f64], h: f64, grid: &[f64], kernel: &KernelSpec) -> Vec<f64> {
    let norm = 1.0 / (xs.len() as f64 * h);
    grid.iter()
        .map(|&x| norm * xs.iter().map(|&xi| kernel.eval((x - xi) / h)).sum::<f64>())
        .collect()
}

/// `count` equispaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => {
            let step = (hi - lo) / (count - 1) as f64;
            (0..count).map(|i| lo + step * i as f64).collect()
        }
    }
}

/// Default grid for real data: `count` points over `[min X - 3h, max X + 3h]`.
pub fn data_grid(xs: &[f64], h: f64, count: usize) -> Vec<f64> {
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    linspace(lo - 3.0 * h, hi + 3.0 * h, count)
}

/// Default grid for standard-normal designs: 101 points over `[-3, 3]`.
pub fn standard_normal_grid() -> Vec<f64> {
    linspace(-3.0, 3.0, 101)
}
