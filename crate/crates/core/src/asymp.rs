//! Closed-form asymptotics: pointwise bias and variance constants, the
//! leading MWISE `E∫(r_n - r)² f³`, optimal bandwidth coefficients and the
//! recursive-to-nonrecursive risk ratios.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{domain, Error, Result};
use crate::kernel::KernelSpec;
use crate::plugin::{bandwidth_coefficient, Functionals};
use crate::quad::{integrate, QuadOptions};
use crate::seq::{Estimator, GammaFamily, StepsizeConfig};

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

const FD_STEP: f64 = 1e-4;

/// Population quantities of a regression model `Y = r(X) + noise`.
#[derive(Clone)]
pub struct ModelTruth {
    pub r: RealFn,
    pub f: RealFn,
    /// `a = r f`
    pub a: RealFn,
    pub a2: RealFn,
    pub f2: RealFn,
    /// `E[Y² | X = x]`
    pub cond_second_moment: RealFn,
    pub sigma: f64,
    /// Integration window for the functionals.
    pub support: (f64, f64),
}

impl std::fmt::Debug for ModelTruth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelTruth")
            .field("sigma", &self.sigma)
            .field("support", &self.support)
            .finish_non_exhaustive()
    }
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

impl ModelTruth {
    /// Additive model with standard normal design and noise sd `sigma`,
    /// given `r` and its first two derivatives.
    pub fn additive_normal_design<R, R1, R2>(r: R, r1: R1, r2: R2, sigma: f64) -> Self
    where
        R: Fn(f64) -> f64 + Send + Sync + Clone + 'static,
        R1: Fn(f64) -> f64 + Send + Sync + 'static,
        R2: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let f = std_normal_pdf;
        // f' = -x f, f'' = (x² - 1) f
        let f2 = |x: f64| (x * x - 1.0) * std_normal_pdf(x);
        let (ra, ra2, rm) = (r.clone(), r.clone(), r.clone());
        let s2 = sigma * sigma;
        Self {
            r: Arc::new(r),
            f: Arc::new(f),
            a: Arc::new(move |x| ra(x) * f(x)),
            a2: Arc::new(move |x| r2(x) * f(x) - 2.0 * x * r1(x) * f(x) + ra2(x) * f2(x)),
            f2: Arc::new(f2),
            cond_second_moment: Arc::new(move |x| {
                let v = rm(x);
                v * v + s2
            }),
            sigma,
            support: (-12.0, 12.0),
        }
    }

    /// `r(x) = cos x`.
    pub fn cosine(sigma: f64) -> Self {
        Self::additive_normal_design(f64::cos, |x: f64| -x.sin(), |x: f64| -x.cos(), sigma)
    }

    /// `r(x) = 1 / (1 + e^x)`.
    pub fn logistic(sigma: f64) -> Self {
        let r = |x: f64| 1.0 / (1.0 + x.exp());
        Self::additive_normal_design(
            r,
            move |x| {
                let v = r(x);
                -v * (1.0 - v)
            },
            move |x| {
                let v = r(x);
                v * (1.0 - v) * (1.0 - 2.0 * v)
            },
            sigma,
        )
    }

    /// A model whose second derivatives are taken by central differences
    /// with step 1e-4 (accurate to roughly 1e-7 for smooth inputs).
    pub fn finite_difference<R, F, M>(r: R, f: F, cond_second_moment: M, sigma: f64, support: (f64, f64)) -> Self
    where
        R: Fn(f64) -> f64 + Send + Sync + 'static,
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        M: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let r: RealFn = Arc::new(r);
        let f: RealFn = Arc::new(f);
        let a: RealFn = {
            let (r, f) = (r.clone(), f.clone());
            Arc::new(move |x| r(x) * f(x))
        };
        let second = |g: RealFn| -> RealFn {
            Arc::new(move |x| (g(x + FD_STEP) - 2.0 * g(x) + g(x - FD_STEP)) / (FD_STEP * FD_STEP))
        };
        Self {
            a2: second(a.clone()),
            f2: second(f.clone()),
            r,
            f,
            a,
            cond_second_moment: Arc::new(cond_second_moment),
            sigma,
            support,
        }
    }
}

fn quad(f: impl Fn(f64) -> f64, support: (f64, f64)) -> Result<f64> {
    let opts = QuadOptions {
        abs_tol: 1e-10,
        max_intervals: 4000,
    };
    integrate(f, support.0, support.1, opts).map(|i| i.value)
}

/// The five integrals of `truth` by adaptive quadrature.
pub fn true_functionals(truth: &ModelTruth) -> Result<Functionals> {
    let t = truth;
    let s = t.support;
    Ok(Functionals {
        i1: quad(|x| (t.a2)(x).powi(2) * (t.f)(x), s)?,
        i2: quad(|x| (t.a2)(x) * (t.f2)(x) * (t.r)(x) * (t.f)(x), s)?,
        i3: quad(|x| (t.f2)(x).powi(2) * (t.r)(x).powi(2) * (t.f)(x), s)?,
        i4: quad(|x| (t.cond_second_moment)(x) * (t.f)(x).powi(2), s)?,
        i5: quad(|x| (t.r)(x).powi(2) * (t.f)(x).powi(2), s)?,
    })
}

/// `∫ (a'' - r f'')² f`, the perfect square equal to `I1 + I3 - 2 I2`.
pub fn curvature_square(truth: &ModelTruth) -> Result<f64> {
    let t = truth;
    quad(
        |x| ((t.a2)(x) - (t.r)(x) * (t.f2)(x)).powi(2) * (t.f)(x),
        t.support,
    )
}

fn check_density(fx: f64) -> Result<()> {
    if !(fx > 0.0) {
        return Err(domain(format!("design density must be positive, got {fx}")));
    }
    Ok(())
}

fn nonzero(v: f64, what: &str) -> Result<f64> {
    if v.abs() < 1e-12 {
        Err(Error::Singular(format!("{what} vanishes")))
    } else {
        Ok(v)
    }
}

struct Regime {
    a: f64,
    xi: f64,
    beta: f64,
    family: GammaFamily,
}

fn regime(config: &StepsizeConfig) -> Option<Regime> {
    config.gamma_family().map(|family| Regime {
        a: config.a,
        xi: config.xi(),
        beta: config.beta_index(),
        family,
    })
}

/// Coefficient of `h_n²` in the bias of `r_n(x)`.
pub fn bias_constant(config: &StepsizeConfig, truth: &ModelTruth, x: f64, kernel: &KernelSpec) -> Result<f64> {
    let fx = (truth.f)(x);
    check_density(fx)?;
    let (a2, r, f2) = ((truth.a2)(x), (truth.r)(x), (truth.f2)(x));
    let mu2 = kernel.mu2();
    let Some(g) = regime(config) else {
        return Ok((a2 - r * f2) / (2.0 * fx) * mu2);
    };
    if !(g.a > 0.0 && g.a <= g.beta / 5.0 + 1e-12) {
        return Err(domain(format!("bias expansion needs a in (0, beta/5], got a = {}", g.a)));
    }
    let numerator_part = a2 / nonzero(1.0 - 2.0 * g.a * g.xi, "1 - 2 a xi")?;
    let density_part = match g.family {
        GammaFamily::MiseOptimal => r * f2 / nonzero(1.0 - 2.0 * g.a, "1 - 2a")?,
        GammaFamily::VarianceOptimal => (1.0 - g.a) * r * f2 / nonzero(1.0 - 3.0 * g.a, "1 - 3a")?,
    };
    Ok((numerator_part - density_part) / (2.0 * fx) * mu2)
}

/// Coefficient of `beta_n / h_n` in the variance of `r_n(x)`
/// (of `1 / (n h_n)` for Nadaraya–Watson).
pub fn variance_constant(config: &StepsizeConfig, truth: &ModelTruth, x: f64, kernel: &KernelSpec) -> Result<f64> {
    let fx = (truth.f)(x);
    check_density(fx)?;
    let (m2, r) = ((truth.cond_second_moment)(x), (truth.r)(x));
    let rk = kernel.roughness();
    let Some(g) = regime(config) else {
        return Ok((m2 - r * r) / fx * rk);
    };
    if !(g.a >= g.beta / 5.0 - 1e-12 && g.a < 1.0) {
        return Err(domain(format!("variance expansion needs a in [beta/5, 1), got a = {}", g.a)));
    }
    let lead = m2 / (nonzero(2.0 - (g.beta - g.a) * g.xi, "2 - (beta - a) xi")? * fx);
    let correction = match g.family {
        GammaFamily::MiseOptimal => 2.0 * g.xi / (1.0 + g.a * g.xi) - g.xi / (1.0 + g.a),
        GammaFamily::VarianceOptimal => (1.0 - g.a) * g.xi,
    };
    Ok((lead - correction * r * r / fx) * rk)
}

/// The variance and squared-bias functional combinations of the MWISE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskCombinations {
    /// multiplies `(beta_n / h_n) R(K)`
    pub variance: f64,
    /// multiplies `(1/4) h_n⁴ μ₂²`
    pub bias: f64,
    /// `lim n beta_n`
    pub beta0: f64,
}

pub fn risk_combinations(config: &StepsizeConfig, f: &Functionals) -> Result<RiskCombinations> {
    let Some(g) = regime(config) else {
        return Ok(RiskCombinations {
            variance: f.variance_term(),
            bias: f.curvature_term(),
            beta0: 1.0,
        });
    };
    let one_2axi = nonzero(1.0 - 2.0 * g.a * g.xi, "1 - 2 a xi")?;
    let lead = f.i4 / nonzero(2.0 - (g.beta - g.a) * g.xi, "2 - (beta - a) xi")?;
    let (variance, bias) = match g.family {
        GammaFamily::MiseOptimal => {
            let one_2a = nonzero(1.0 - 2.0 * g.a, "1 - 2a")?;
            (
                lead - (2.0 * g.xi / (1.0 + g.a * g.xi) - g.xi / (1.0 + g.a)) * f.i5,
                f.i1 / one_2axi.powi(2) + f.i3 / one_2a.powi(2) - 2.0 * f.i2 / (one_2a * one_2axi),
            )
        }
        GammaFamily::VarianceOptimal => {
            let one_3a = nonzero(1.0 - 3.0 * g.a, "1 - 3a")?;
            let c = (1.0 - g.a) / one_3a;
            (
                lead - (1.0 - g.a) * g.xi * f.i5,
                f.i1 / one_2axi.powi(2) + c * c * f.i3 - 2.0 * c * f.i2 / one_2axi,
            )
        }
    };
    Ok(RiskCombinations {
        variance,
        bias,
        beta0: config.beta0(),
    })
}

/// Leading MWISE at sample size `n` with bandwidth `h_n = h_coeff n^{-1/5}`.
///
/// Only the balanced regime `a = beta/5` is supported, where both the
/// variance and the squared bias contribute at rate `n^{-4/5}`.
pub fn mwise(config: &StepsizeConfig, f: &Functionals, kernel: &KernelSpec, n: usize, h_coeff: f64) -> Result<f64> {
    if n == 0 || !(h_coeff > 0.0) {
        return Err(domain("mwise needs n >= 1 and a positive bandwidth coefficient"));
    }
    if config.estimator.is_recursive() && (config.a - config.beta_index() / 5.0).abs() > 1e-12 {
        return Err(domain(format!(
            "mwise is evaluated in the a = beta/5 regime only (a = {}, beta = {})",
            config.a,
            config.beta_index()
        )));
    }
    let c = risk_combinations(config, f)?;
    let nf = n as f64;
    let h = h_coeff * nf.powf(-0.2);
    let beta_n = c.beta0 / nf;
    Ok(beta_n / h * c.variance * kernel.roughness() + 0.25 * c.bias * h.powi(4) * kernel.mu2().powi(2))
}

/// Closed-form minimiser of [`mwise`] over the coefficient; the same formula
/// the plug-in selector applies to estimated functionals.
pub fn optimal_h_coefficient(config: &StepsizeConfig, f: &Functionals, kernel: &KernelSpec) -> Result<f64> {
    bandwidth_coefficient(config.estimator, f, kernel)
}

/// Coefficient of `h_n = C n^{-1/5}` minimising the MWISE for a general
/// `beta_n = beta_0 / n` (with `gamma_n = 1/n` or `(1-a)/n`).
pub fn optimal_h_coefficient_general(config: &StepsizeConfig, f: &Functionals, kernel: &KernelSpec) -> Result<f64> {
    let c = risk_combinations(config, f)?;
    if !(c.variance > 0.0 && c.bias > 0.0) {
        return Err(Error::PluginFailure {
            numerator: c.variance,
            denominator: c.bias,
        });
    }
    Ok((c.beta0 * c.variance * kernel.roughness() / (c.bias * kernel.mu2().powi(2))).powf(0.2))
}

/// `beta_0² (beta_0 - 2/5)^{-6/5}`, the stepsize-dependent factor of the
/// optimal MWISE when `gamma_n = 1/n`; minimised at `beta_0 = 1`.
pub fn beta0_risk_factor(beta0: f64) -> f64 {
    beta0 * beta0 * (beta0 - 0.4).powf(-1.2)
}

/// Risk of an estimator at its optimum relative to Nadaraya–Watson at its
/// optimum, when that ratio does not depend on the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MwiseRatio {
    Ratio(f64),
    NotComparable,
}

pub fn mwise_ratio(estimator: Estimator) -> MwiseRatio {
    match estimator {
        Estimator::NadarayaWatson => MwiseRatio::Ratio(1.0),
        Estimator::Recursive1 => MwiseRatio::Ratio(2f64.powf(-0.8) * (5.0f64 / 3.0).powf(1.2)),
        Estimator::Recursive4 => MwiseRatio::Ratio(5f64.powf(0.2) * 0.8),
        Estimator::Recursive2 | Estimator::Recursive3 => MwiseRatio::NotComparable,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::gaussian_kernel;

    fn phi0() -> f64 {
        std_normal_pdf(0.0)
    }

    #[test]
    fn cosine_truth_consistency() {
        let t = ModelTruth::cosine(0.5);
        for x in [-2.0, -0.3, 0.0, 1.1, 2.7] {
            assert!(((t.a)(x) - (t.r)(x) * (t.f)(x)).abs() < 1e-10);
            assert!(((t.cond_second_moment)(x) - x.cos().powi(2) - 0.25).abs() < 1e-12);
        }
        // a'' of cos(x) phi(x) at 0 is -2 phi(0)
        assert!(((t.a2)(0.0) + 2.0 * phi0()).abs() < 1e-14);
    }

    #[test]
    fn analytic_second_derivatives_match_finite_differences() {
        for t in [ModelTruth::cosine(0.1), ModelTruth::logistic(0.1)] {
            let fd = ModelTruth::finite_difference(
                {
                    let r = t.r.clone();
                    move |x| r(x)
                },
                std_normal_pdf,
                |_| 0.0,
                0.1,
                (-12.0, 12.0),
            );
            for x in [-1.5, -0.2, 0.4, 2.0] {
                assert!(((t.a2)(x) - (fd.a2)(x)).abs() < 1e-6, "a'' at {x}");
                assert!(((t.f2)(x) - (fd.f2)(x)).abs() < 1e-6, "f'' at {x}");
            }
        }
    }

    #[test]
    fn functionals_of_cosine_model() {
        let t = ModelTruth::cosine(0.5);
        let f = true_functionals(&t).unwrap();
        let target = 0.25 / (2.0 * PI.sqrt());
        assert!((f.variance_term() - target).abs() < 1e-9);
        let square = curvature_square(&t).unwrap();
        assert!((f.curvature_term() - square).abs() < 1e-8);
        assert!(square > 0.0);
    }

    #[test]
    fn zero_regression_function() {
        let t = ModelTruth::additive_normal_design(|_| 0.0, |_| 0.0, |_| 0.0, 1.0);
        let f = true_functionals(&t).unwrap();
        assert_eq!((f.i2, f.i3, f.i5), (0.0, 0.0, 0.0));
        assert!((f.i4 - 0.5 / PI.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn bias_constants() {
        let k = gaussian_kernel();
        let flat = ModelTruth::additive_normal_design(|_| 0.0, |_| 0.0, |_| 0.0, 1.0);
        let r1 = StepsizeConfig::standard(Estimator::Recursive1);
        assert_eq!(bias_constant(&r1, &flat, 0.3, &k).unwrap(), 0.0);
        let t = ModelTruth::cosine(0.5);
        let x = 0.7;
        let (fx, a2, r, f2) = ((t.f)(x), (t.a2)(x), (t.r)(x), (t.f2)(x));
        let expect = 5.0 / (6.0 * fx) * (a2 - r * f2) * k.mu2();
        assert!((bias_constant(&r1, &t, x, &k).unwrap() - expect).abs() < 1e-12);
        let nw = StepsizeConfig::standard(Estimator::NadarayaWatson);
        let expect_nw = (a2 - r * f2) / (2.0 * fx) * k.mu2();
        assert!((bias_constant(&nw, &t, x, &k).unwrap() - expect_nw).abs() < 1e-12);
        // at x = 0 for Recursive1: (1/(2 phi))(-2 phi + phi)/0.6 = -5/6
        assert!((bias_constant(&r1, &t, 0.0, &k).unwrap() + 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn variance_constants() {
        let k = gaussian_kernel();
        let r1 = StepsizeConfig::standard(Estimator::Recursive1);
        let t = ModelTruth::cosine(0.5);
        let x = 0.0;
        let expect = 5.0 / 6.0 * 0.25 / phi0() * k.roughness();
        assert!((variance_constant(&r1, &t, x, &k).unwrap() - expect).abs() < 1e-12);
        let nw = StepsizeConfig::standard(Estimator::NadarayaWatson);
        assert!((variance_constant(&nw, &t, x, &k).unwrap() - 0.25 / phi0() * k.roughness()).abs() < 1e-12);
        let silent = ModelTruth::additive_normal_design(|_| 0.0, |_| 0.0, |_| 0.0, 0.0);
        assert_eq!(variance_constant(&r1, &silent, 0.4, &k).unwrap(), 0.0);
    }

    #[test]
    fn density_must_be_positive() {
        let k = gaussian_kernel();
        let t = ModelTruth::finite_difference(|x| x, |_| 0.0, |x| x * x, 0.0, (-1.0, 1.0));
        let r1 = StepsizeConfig::standard(Estimator::Recursive1);
        assert!(bias_constant(&r1, &t, 0.0, &k).is_err());
        assert!(variance_constant(&r1, &t, 0.0, &k).is_err());
    }

    #[test]
    fn singular_constants_are_reported() {
        let k = gaussian_kernel();
        let t = ModelTruth::cosine(0.5);
        let third = StepsizeConfig::new(Estimator::Recursive4, 1.0 / 3.0).unwrap();
        let err = risk_combinations(&third, &true_functionals(&t).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Singular(_)));
        let wide = StepsizeConfig::new(Estimator::Recursive1, 0.5).unwrap();
        assert!(bias_constant(&wide, &t, 0.0, &k).is_err());
    }

    #[test]
    fn shipped_combinations_reduce_to_printed_forms() {
        let f = Functionals {
            i1: 0.9,
            i2: 0.2,
            i3: 0.4,
            i4: 1.3,
            i5: 0.6,
        };
        let k = gaussian_kernel();
        for e in Estimator::ALL {
            let cfg = StepsizeConfig::standard(e);
            let general = optimal_h_coefficient_general(&cfg, &f, &k).unwrap();
            let printed = optimal_h_coefficient(&cfg, &f, &k).unwrap();
            assert!((general - printed).abs() < 1e-12 * printed, "{e}: {general} vs {printed}");
        }
    }

    #[test]
    fn ratio_constants() {
        match mwise_ratio(Estimator::Recursive1) {
            MwiseRatio::Ratio(v) => assert!((v - 1.060_216_363_782_827).abs() < 1e-12),
            _ => panic!(),
        }
        match mwise_ratio(Estimator::Recursive4) {
            MwiseRatio::Ratio(v) => assert!((v - 1.103_783_729_168_972).abs() < 1e-12),
            _ => panic!(),
        }
        assert_eq!(mwise_ratio(Estimator::Recursive2), MwiseRatio::NotComparable);
        assert_eq!(mwise_ratio(Estimator::Recursive3), MwiseRatio::NotComparable);
    }

    #[test]
    fn beta0_factor_minimised_at_one() {
        let grid: Vec<f64> = (1..=36_000).map(|i| 0.4 + i as f64 * 1e-4).collect();
        let best = grid
            .iter()
            .copied()
            .min_by(|a, b| beta0_risk_factor(*a).total_cmp(&beta0_risk_factor(*b)))
            .unwrap();
        assert!((best - 1.0).abs() < 2e-4);
        assert!((beta0_risk_factor(1.0) - (5.0f64 / 3.0).powf(1.2)).abs() < 1e-12);
    }

    #[test]
    fn mwise_examples() {
        let k = gaussian_kernel();
        let zero = Functionals::default();
        let r1 = StepsizeConfig::standard(Estimator::Recursive1);
        assert_eq!(mwise(&r1, &zero, &k, 100, 0.5).unwrap(), 0.0);
        let f = true_functionals(&ModelTruth::cosine(0.5)).unwrap();
        let n = 500;
        let c = optimal_h_coefficient(&r1, &f, &k).unwrap();
        let at_opt = mwise(&r1, &f, &k, n, c).unwrap();
        let closed = 1.25 * 2f64.powf(-0.8) * (5.0f64 / 3.0).powf(1.2)
            * f.variance_term().powf(0.8)
            * f.curvature_term().powf(0.2)
            * k.theta()
            * (n as f64).powf(-0.8);
        assert!((at_opt - closed).abs() < 1e-12 * closed);
        let off = StepsizeConfig::new(Estimator::Recursive1, 0.3).unwrap();
        assert!(mwise(&off, &f, &k, n, c).is_err());
    }
}
