//! Kernels, their second derivatives, and the functionals
//! `R(K) = ∫K²`, `μ_j(K) = ∫u^j K` and `Θ(K) = R(K)^{4/5} μ₂(K)^{2/5}`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{domain, Error, Result};
use crate::quad::{integrate, QuadOptions};

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_677_939_946_059_934_f64;

#[derive(Clone)]
enum Shape {
    Gaussian,
    Custom { eval: RealFn, second: RealFn },
}

/// Which kernel functional to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Functional {
    /// `∫K²`
    Roughness,
    /// `∫u^j K` for `j` in `{0, 1, 2}`
    Moment(u8),
    /// `R^{4/5} μ₂^{2/5}`
    Theta,
}

/// A second-order kernel with cached functionals.
#[derive(Clone)]
pub struct KernelSpec {
    name: String,
    shape: Shape,
    radius: f64,
    r: f64,
    mu2: f64,
    theta: f64,
}

impl fmt::Debug for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelSpec")
            .field("name", &self.name)
            .field("radius", &self.radius)
            .field("r", &self.r)
            .field("mu2", &self.mu2)
            .field("theta", &self.theta)
            .finish()
    }
}

const MOMENT_TOL: f64 = 1e-6;

fn quad_opts() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-9,
        max_intervals: 4000,
    }
}

impl KernelSpec {
    /// The standard normal density, with `K''(u) = (u² - 1) K(u)`.
    pub fn gaussian() -> Self {
        Self::build("gaussian".into(), Shape::Gaussian, 12.0)
            .expect("the Gaussian kernel satisfies the moment conditions")
    }

    /// A user-supplied kernel supported (numerically) on `[-radius, radius]`.
    ///
    /// Construction checks `∫K = 1`, `∫uK = 0` and finite `∫u²K` to 1e-6.
    pub fn custom<F, G>(name: &str, eval: F, second_derivative: G, radius: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(domain(format!("kernel radius must be positive, got {radius}")));
        }
        Self::build(
            name.into(),
            Shape::Custom {
                eval: Arc::new(eval),
                second: Arc::new(second_derivative),
            },
            radius,
        )
    }

    fn build(name: String, shape: Shape, radius: f64) -> Result<Self> {
        let mut k = Self {
            name,
            shape,
            radius,
            r: f64::NAN,
            mu2: f64::NAN,
            theta: f64::NAN,
        };
        let mass = k.moment(0)?;
        if (mass - 1.0).abs() > MOMENT_TOL {
            return Err(domain(format!("kernel '{}' integrates to {mass}, not 1", k.name)));
        }
        let mean = k.moment(1)?;
        if mean.abs() > MOMENT_TOL {
            return Err(domain(format!("kernel '{}' has first moment {mean}, not 0", k.name)));
        }
        let mu2 = k.moment(2)?;
        if !(mu2.is_finite() && mu2 > 0.0) {
            return Err(domain(format!("kernel '{}' has second moment {mu2}", k.name)));
        }
        let r = k.integrate(|u| {
            let v = k.eval(u);
            v * v
        })?;
        k.r = r;
        k.mu2 = mu2;
        k.theta = r.powf(0.8) * mu2.powf(0.4);
        Ok(k)
    }

    fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        integrate(f, -self.radius, self.radius, quad_opts()).map(|i| i.value)
    }

    fn moment(&self, j: u8) -> Result<f64> {
        self.integrate(|u| u.powi(j as i32) * self.eval(u))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Truncation radius used for quadrature.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match &self.shape {
            Shape::Gaussian => FRAC_1_SQRT_2PI * (-0.5 * u * u).exp(),
            Shape::Custom { eval, .. } => eval(u),
        }
    }

    #[inline]
    pub fn second_derivative(&self, u: f64) -> f64 {
        match &self.shape {
            Shape::Gaussian => (u * u - 1.0) * FRAC_1_SQRT_2PI * (-0.5 * u * u).exp(),
            Shape::Custom { second, .. } => second(u),
        }
    }

    /// `R(K) = ∫K²`.
    pub fn roughness(&self) -> f64 {
        self.r
    }

    /// `μ₂(K) = ∫u²K`.
    pub fn mu2(&self) -> f64 {
        self.mu2
    }

    /// `Θ(K) = R(K)^{4/5} μ₂(K)^{2/5}`.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Recomputes a functional by quadrature (cached values are not used,
    /// except that `Θ` is derived from the quadrature `R` and `μ₂`).
    pub fn functional(&self, which: Functional) -> Result<f64> {
        match which {
            Functional::Roughness => self.integrate(|u| {
                let v = self.eval(u);
                v * v
            }),
            Functional::Moment(j) if j <= 2 => self.moment(j),
            Functional::Moment(j) => Err(Error::Domain(format!("moment order {j} not supported"))),
            Functional::Theta => {
                let r = self.functional(Functional::Roughness)?;
                let mu2 = self.functional(Functional::Moment(2))?;
                Ok(r.powf(0.8) * mu2.powf(0.4))
            }
        }
    }

    /// `∫K''` over the truncation window.
    pub fn second_derivative_mass(&self) -> Result<f64> {
        self.integrate(|u| self.second_derivative(u))
    }
}

/// The Gaussian kernel.
pub fn gaussian_kernel() -> KernelSpec {
    KernelSpec::gaussian()
}

/// `R(K)` of the Gaussian kernel in closed form, `1 / (2√π)`.
pub fn gaussian_roughness_exact() -> f64 {
    0.5 / PI.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_values() {
        let k = gaussian_kernel();
        assert!((k.eval(0.0) - 0.398942).abs() < 1e-6);
        assert!((k.eval(0.0) - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
        assert!((k.second_derivative(0.0) + 0.398942).abs() < 1e-6);
        assert!((k.functional(Functional::Moment(0)).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn gaussian_functionals() {
        let k = gaussian_kernel();
        assert!((k.roughness() - 0.282_094_8).abs() < 1e-7);
        assert!((k.roughness() - gaussian_roughness_exact()).abs() < 1e-12);
        assert!((k.mu2() - 1.0).abs() < 1e-10);
        assert!(k.functional(Functional::Moment(1)).unwrap().abs() < 1e-9);
        assert!((k.theta() - gaussian_roughness_exact().powf(0.8)).abs() < 1e-10);
        assert!((k.theta() - k.roughness().powf(0.8) * k.mu2().powf(0.4)).abs() < 1e-15);
        assert!(k.second_derivative_mass().unwrap().abs() < 1e-6);
    }

    #[test]
    fn custom_epanechnikov() {
        let epa = |u: f64| if u.abs() < 1.0 { 0.75 * (1.0 - u * u) } else { 0.0 };
        let second = |u: f64| if u.abs() < 1.0 { -1.5 } else { 0.0 };
        let k = KernelSpec::custom("epanechnikov", epa, second, 1.0).unwrap();
        assert!((k.roughness() - 0.6).abs() < 1e-9);
        assert!((k.mu2() - 0.2).abs() < 1e-9);
        assert!(k.functional(Functional::Moment(1)).unwrap().abs() < 1e-9);
    }

    #[test]
    fn rejects_unnormalised_or_skewed() {
        let twice = |u: f64| 2.0 * FRAC_1_SQRT_2PI * (-0.5 * u * u).exp();
        assert!(KernelSpec::custom("twice", twice, |_| 0.0, 12.0).is_err());
        let shifted = |u: f64| FRAC_1_SQRT_2PI * (-0.5 * (u - 1.0) * (u - 1.0)).exp();
        assert!(KernelSpec::custom("shifted", shifted, |_| 0.0, 14.0).is_err());
        assert!(gaussian_kernel().functional(Functional::Moment(3)).is_err());
    }
}
