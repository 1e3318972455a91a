//! Plug-in bandwidth selection.
//!
//! The optimal bandwidth of every configuration is `h_n = C n^{-1/5}` with
//! `C` a closed-form function of five integrals
//!
//! ```text
//! I1 = ∫ (a'')² f          I2 = ∫ a'' f'' r f        I3 = ∫ (f'')² r² f
//! I4 = ∫ E[Y²|X=x] f²      I5 = ∫ r² f²
//! ```
//!
//! Each integral is replaced by a kernel U-statistic. The recursive variants
//! weight observation `k` with the stochastic-approximation weights
//! `(Q_n/Q_k) beta_k` or `(Pi_n/Pi_k) gamma_k` and a pilot bandwidth `b_k`
//! from a GS(-3/14) schedule (curvature terms I1..I3) or a GS(-2/5) schedule
//! (variance terms I4, I5). The nonrecursive variants use uniform weights
//! `1/n` and one pilot bandwidth `b_n`.
//!
//! The double, triple and quadruple sums are never enumerated: for each `i`
//! the inner sums over `j` are accumulated once and the index-exclusion
//! constraints are removed algebraically, so every estimator costs `O(n²)`.

use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::estim::Dataset;
use crate::kernel::KernelSpec;
use crate::seq::{Estimator, GsSequence, ProductTable, StepsizeConfig};

/// Pilot exponent for the curvature functionals I1, I2, I3.
pub const CURVATURE_PILOT_EXPONENT: f64 = 3.0 / 14.0;
/// Pilot exponent for the variance functionals I4, I5.
pub const VARIANCE_PILOT_EXPONENT: f64 = 2.0 / 5.0;
/// Exponent of every plug-in bandwidth, `h_n = C n^{-1/5}`.
pub const BANDWIDTH_POWER: f64 = -0.2;
/// IQR of the standard normal distribution.
const NORMAL_IQR: f64 = 1.349;

/// The five integrals, whether exact or estimated.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize)]
pub struct Functionals {
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub i4: f64,
    pub i5: f64,
}

impl Functionals {
    /// `I4 - I5 = ∫ Var[Y|X=x] f²`.
    pub fn variance_term(&self) -> f64 {
        self.i4 - self.i5
    }

    /// `I1 + I3 - 2 I2 = ∫ (a'' - r f'')² f`.
    pub fn curvature_term(&self) -> f64 {
        self.i1 + self.i3 - 2.0 * self.i2
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            i1: c * self.i1,
            i2: c * self.i2,
            i3: c * self.i3,
            i4: c * self.i4,
            i5: c * self.i5,
        }
    }

    fn all_finite(&self) -> bool {
        [self.i1, self.i2, self.i3, self.i4, self.i5]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// How a set of functional estimates was produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FunctionalMode {
    Recursive(Estimator),
    Nonrecursive,
}

/// Estimated functionals together with the pilot settings behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct PluginFunctionals {
    pub values: Functionals,
    pub curvature_exponent: f64,
    pub variance_exponent: f64,
    /// `min{s, (Q3 - Q1)/1.349}` of the design points.
    pub pilot_scale: f64,
    pub mode: FunctionalMode,
}

/// An optimal-rate bandwidth `h_n = coefficient * n^{-1/5}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthPlan {
    pub coefficient: f64,
    pub estimator: Estimator,
}

impl BandwidthPlan {
    pub const EXPONENT: f64 = BANDWIDTH_POWER;

    pub fn sequence(&self) -> GsSequence {
        GsSequence {
            coefficient: self.coefficient,
            power: BANDWIDTH_POWER,
        }
    }

    pub fn at(&self, n: usize) -> Result<f64> {
        self.sequence().value(n)
    }
}

/// Type-7 (linear interpolation) first and third quartiles.
pub fn quartiles(xs: &[f64]) -> Result<(f64, f64)> {
    if xs.is_empty() {
        return Err(domain("quartiles of an empty sample"));
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let h = (sorted.len() - 1) as f64 * p;
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(sorted.len() - 1);
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    };
    Ok((q(0.25), q(0.75)))
}

/// Sample standard deviation with the `n - 1` divisor.
pub fn sample_sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// `min{s, IQR/1.349}`, ignoring a candidate that is zero.
pub fn pilot_scale(xs: &[f64]) -> Result<f64> {
    let sd = sample_sd(xs);
    let (q1, q3) = quartiles(xs)?;
    let iqr_scale = (q3 - q1) / NORMAL_IQR;
    match (sd > 0.0, iqr_scale > 0.0) {
        (true, true) => Ok(sd.min(iqr_scale)),
        (true, false) => Ok(sd),
        (false, true) => Ok(iqr_scale),
        (false, false) => Err(Error::DegenerateScale { sd, iqr_scale }),
    }
}

/// `b_n = n^{-exponent} * min{s, IQR/1.349}`.
pub fn pilot_bandwidth(xs: &[f64], n: usize, exponent: f64) -> Result<f64> {
    if n == 0 {
        return Err(domain("pilot bandwidth needs n >= 1"));
    }
    Ok((n as f64).powf(-exponent) * pilot_scale(xs)?)
}

/// Per-observation weights and pilot bandwidths feeding the U-statistics.
struct SumInputs<'a> {
    data: &'a Dataset,
    kernel: &'a KernelSpec,
    /// numerator weights, `(Q_n/Q_k) beta_k` or `1/n`
    w_beta: Vec<f64>,
    /// density weights, `(Pi_n/Pi_k) gamma_k` or `1/n`
    w_gamma: Vec<f64>,
    b_curv: Vec<f64>,
    b_var: Vec<f64>,
}

/// Contributions of one outer index `i` to the five sums.
#[derive(Default, Clone, Copy)]
struct RowTerms([f64; 5]);

fn row_terms(inp: &SumInputs<'_>, i: usize, y_total: f64) -> RowTerms {
    let xs = inp.data.xs();
    let ys = inp.data.ys();
    let n = xs.len();
    let xi = xs[i];
    let yi = ys[i];
    // u_j = w^beta_j b_j^-3 K''((X_i-X_j)/b_j) Y_j, p_j = same with w^gamma and no Y
    let (mut u_sum, mut u_sq) = (0.0, 0.0);
    let (mut p_sum, mut p_sq, mut py_sum, mut p_sq_y) = (0.0, 0.0, 0.0, 0.0);
    let mut up_diag = 0.0;
    let (mut var_gamma, mut var_beta) = (0.0, 0.0);
    for j in 0..n {
        let b = inp.b_curv[j];
        let k2 = inp.kernel.second_derivative((xi - xs[j]) / b) / (b * b * b);
        let u = inp.w_beta[j] * k2 * ys[j];
        let p = inp.w_gamma[j] * k2;
        u_sum += u;
        u_sq += u * u;
        p_sum += p;
        p_sq += p * p;
        py_sum += p * ys[j];
        p_sq_y += p * p * ys[j];
        up_diag += u * p;
        if j != i {
            let bv = inp.b_var[j];
            let k0 = inp.kernel.eval((xi - xs[j]) / bv) / bv;
            var_gamma += inp.w_gamma[j] * k0;
            var_beta += inp.w_beta[j] * k0 * ys[j];
        }
    }
    let pairs_jk = p_sum * p_sum - p_sq;
    let triple = y_total * pairs_jk - 2.0 * (py_sum * p_sum - p_sq_y);
    RowTerms([
        u_sum * u_sum - u_sq,
        yi * (u_sum * p_sum - up_diag),
        yi * triple / n as f64,
        yi * yi * var_gamma,
        yi * var_beta,
    ])
}

impl SumInputs<'_> {
    fn evaluate(&self) -> Result<Functionals> {
        let n = self.data.len();
        let y_total: f64 = self.data.ys().iter().sum();
        let rows: Vec<RowTerms> = (0..n)
            .into_par_iter()
            .map(|i| row_terms(self, i, y_total))
            .collect();
        // fixed-order reduction keeps results independent of thread count
        let mut acc = [0.0; 5];
        for r in &rows {
            for (a, v) in acc.iter_mut().zip(r.0) {
                *a += v;
            }
        }
        let nf = n as f64;
        let f = Functionals {
            i1: acc[0] / nf,
            i2: acc[1] / nf,
            i3: acc[2] / nf,
            i4: acc[3] / nf,
            i5: acc[4] / nf,
        };
        if !f.all_finite() {
            return Err(Error::NonFinite(format!("functional estimates {f:?}")));
        }
        Ok(f)
    }
}

fn check_size(data: &Dataset) -> Result<()> {
    if data.len() < 4 {
        return Err(domain(format!(
            "functional estimation needs at least 4 observations, got {}",
            data.len()
        )));
    }
    Ok(())
}

/// Recursive estimates `Î1..Î5` using the stepsizes of `config`.
pub fn estimate_functionals_recursive(
    data: &Dataset,
    config: &StepsizeConfig,
    kernel: &KernelSpec,
) -> Result<PluginFunctionals> {
    check_size(data)?;
    let (Some(gamma), Some(beta)) = (config.gamma, config.beta) else {
        return Err(domain("recursive functionals need a recursive configuration"));
    };
    let n = data.len();
    let scale = pilot_scale(data.xs())?;
    let schedule = |e: f64| -> Vec<f64> { (1..=n).map(|k| scale * (k as f64).powf(-e)).collect() };
    let inputs = SumInputs {
        data,
        kernel,
        w_beta: ProductTable::new(&beta, n).weights(&beta, n),
        w_gamma: ProductTable::new(&gamma, n).weights(&gamma, n),
        b_curv: schedule(CURVATURE_PILOT_EXPONENT),
        b_var: schedule(VARIANCE_PILOT_EXPONENT),
    };
    Ok(PluginFunctionals {
        values: inputs.evaluate()?,
        curvature_exponent: CURVATURE_PILOT_EXPONENT,
        variance_exponent: VARIANCE_PILOT_EXPONENT,
        pilot_scale: scale,
        mode: FunctionalMode::Recursive(config.estimator),
    })
}

/// Recursive estimates with caller-supplied pilot bandwidth schedules.
pub fn estimate_functionals_with_pilots(
    data: &Dataset,
    config: &StepsizeConfig,
    kernel: &KernelSpec,
    curvature_pilot: GsSequence,
    variance_pilot: GsSequence,
) -> Result<Functionals> {
    check_size(data)?;
    let (Some(gamma), Some(beta)) = (config.gamma, config.beta) else {
        return Err(domain("recursive functionals need a recursive configuration"));
    };
    let n = data.len();
    SumInputs {
        data,
        kernel,
        w_beta: ProductTable::new(&beta, n).weights(&beta, n),
        w_gamma: ProductTable::new(&gamma, n).weights(&gamma, n),
        b_curv: (1..=n).map(|k| curvature_pilot.at(k)).collect(),
        b_var: (1..=n).map(|k| variance_pilot.at(k)).collect(),
    }
    .evaluate()
}

/// Nonrecursive estimates `Ĩ1..Ĩ5` with uniform weights and one pilot
/// bandwidth per functional group.
pub fn estimate_functionals_nonrecursive(data: &Dataset, kernel: &KernelSpec) -> Result<PluginFunctionals> {
    check_size(data)?;
    let n = data.len();
    let scale = pilot_scale(data.xs())?;
    let b_curv = (n as f64).powf(-CURVATURE_PILOT_EXPONENT) * scale;
    let b_var = (n as f64).powf(-VARIANCE_PILOT_EXPONENT) * scale;
    let uniform = vec![1.0 / n as f64; n];
    let inputs = SumInputs {
        data,
        kernel,
        w_beta: uniform.clone(),
        w_gamma: uniform,
        b_curv: vec![b_curv; n],
        b_var: vec![b_var; n],
    };
    Ok(PluginFunctionals {
        values: inputs.evaluate()?,
        curvature_exponent: CURVATURE_PILOT_EXPONENT,
        variance_exponent: VARIANCE_PILOT_EXPONENT,
        pilot_scale: scale,
        mode: FunctionalMode::Nonrecursive,
    })
}

/// Functional estimates appropriate for `estimator`: nonrecursive for
/// Nadaraya–Watson, recursive with the estimator's own stepsizes otherwise.
pub fn estimate_functionals(data: &Dataset, estimator: Estimator, a: f64, kernel: &KernelSpec) -> Result<PluginFunctionals> {
    match estimator {
        Estimator::NadarayaWatson => estimate_functionals_nonrecursive(data, kernel),
        e => estimate_functionals_recursive(data, &StepsizeConfig::new(e, a)?, kernel),
    }
}

/// The numerator and denominator combinations and leading constant of the
/// optimal coefficient `C = (c N/D)^{1/5} (R/μ₂²)^{1/5}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientParts {
    pub constant: f64,
    pub numerator: f64,
    pub denominator: f64,
}

pub fn coefficient_parts(estimator: Estimator, f: &Functionals) -> CoefficientParts {
    let (constant, n5, d3, d2) = match estimator {
        Estimator::Recursive1 => (0.3, 1.0, 1.0, 2.0),
        Estimator::Recursive2 => (0.2, 23.0 / 24.0, 25.0 / 36.0, 5.0 / 3.0),
        Estimator::Recursive3 => (0.3, 24.0 / 25.0, 36.0 / 25.0, 12.0 / 5.0),
        Estimator::Recursive4 => (0.2, 1.0, 1.0, 2.0),
        Estimator::NadarayaWatson => (1.0, 1.0, 1.0, 2.0),
    };
    CoefficientParts {
        constant,
        numerator: f.i4 - n5 * f.i5,
        denominator: f.i1 + d3 * f.i3 - d2 * f.i2,
    }
}

/// Closed-form optimal coefficient `C` of `h_n = C n^{-1/5}` for `estimator`
/// given (true or estimated) functionals. Shared by the plug-in selector
/// and the asymptotic calculators.
pub fn bandwidth_coefficient(estimator: Estimator, f: &Functionals, kernel: &KernelSpec) -> Result<f64> {
    let parts = coefficient_parts(estimator, f);
    if !(parts.numerator > 0.0 && parts.denominator > 0.0) {
        return Err(Error::PluginFailure {
            numerator: parts.numerator,
            denominator: parts.denominator,
        });
    }
    let kernel_part = kernel.roughness() / (kernel.mu2() * kernel.mu2());
    Ok((parts.constant * parts.numerator / parts.denominator * kernel_part).powf(0.2))
}

/// Plug-in bandwidth for `config` from estimated functionals.
pub fn plugin_bandwidth(
    functionals: &PluginFunctionals,
    config: &StepsizeConfig,
    kernel: &KernelSpec,
) -> Result<BandwidthPlan> {
    Ok(BandwidthPlan {
        coefficient: bandwidth_coefficient(config.estimator, &functionals.values, kernel)?,
        estimator: config.estimator,
    })
}

/// Result of the full selection pipeline, with fallback bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub plan: BandwidthPlan,
    /// `true` when the plug-in failed and the pilot scale was used instead.
    pub fallback: bool,
    pub functionals: Option<PluginFunctionals>,
}

/// Pilot → functionals → plug-in coefficient. When the plug-in is not
/// defined (non-positive combination) the coefficient falls back to the
/// pilot scale `min{s, IQR/1.349}`.
pub fn select_bandwidth(data: &Dataset, estimator: Estimator, a: f64, kernel: &KernelSpec) -> Result<Selection> {
    let functionals = estimate_functionals(data, estimator, a, kernel)?;
    match bandwidth_coefficient(estimator, &functionals.values, kernel) {
        Ok(coefficient) => Ok(Selection {
            plan: BandwidthPlan {
                coefficient,
                estimator,
            },
            fallback: false,
            functionals: Some(functionals),
        }),
        Err(Error::PluginFailure { .. }) => Ok(Selection {
            plan: BandwidthPlan {
                coefficient: functionals.pilot_scale,
                estimator,
            },
            fallback: true,
            functionals: Some(functionals),
        }),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod naive {
    //! Direct enumeration of the index sums; test oracles only.
    use super::*;

    pub struct Weights {
        pub w_beta: Vec<f64>,
        pub w_gamma: Vec<f64>,
        pub b_curv: Vec<f64>,
        pub b_var: Vec<f64>,
    }

    pub fn functionals(data: &Dataset, k: &KernelSpec, w: &Weights) -> Functionals {
        let (x, y) = (data.xs(), data.ys());
        let n = x.len();
        let nf = n as f64;
        let k2 = |i: usize, j: usize| {
            let b = w.b_curv[j];
            k.second_derivative((x[i] - x[j]) / b) / (b * b * b)
        };
        let mut f = Functionals::default();
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    if j == l {
                        continue;
                    }
                    f.i1 += w.w_beta[j] * w.w_beta[l] * k2(i, j) * k2(i, l) * y[j] * y[l];
                    f.i2 += w.w_gamma[l] * w.w_beta[j] * k2(i, l) * k2(i, j) * y[i] * y[j];
                    for m in 0..n {
                        if m == j || m == l {
                            continue;
                        }
                        f.i3 += w.w_gamma[j] * w.w_gamma[l] * k2(i, j) * k2(i, l) * y[i] * y[m] / nf;
                    }
                }
                if j != i {
                    let bv = w.b_var[j];
                    let k0 = k.eval((x[i] - x[j]) / bv) / bv;
                    f.i4 += w.w_gamma[j] * k0 * y[i] * y[i];
                    f.i5 += w.w_beta[j] * k0 * y[i] * y[j];
                }
            }
        }
        f.scaled(1.0 / nf)
    }
}
