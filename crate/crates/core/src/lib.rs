//! Semi-recursive kernel regression with plug-in bandwidth selection.
//!
//! The estimator `r_n = a_n / f_n` updates a Nadaraya–Watson numerator and
//! denominator with separate stepsizes `(beta_n)` and `(gamma_n)`, so each new
//! observation costs `O(grid)` work regardless of `n`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymp;
pub mod error;
pub mod estim;
pub mod kernel;
pub mod normality;
pub mod plugin;
pub mod quad;
pub mod seq;
pub mod sim;

pub use asymp::{ModelTruth, MwiseRatio};
pub use error::{Error, Result};
pub use estim::{Dataset, RecursiveState};
pub use kernel::{gaussian_kernel, KernelSpec};
pub use plugin::{BandwidthPlan, Functionals, Selection};
pub use seq::{Estimator, GammaFamily, GsSequence, StepsizeConfig};
pub use sim::{Model, ResultTable, SimulationConfig};
