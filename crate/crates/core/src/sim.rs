//! Monte-Carlo harness: synthetic data, the replication loop with timing,
//! the pointwise CLT diagnostic and the streaming-cost benchmark.
//!
//! Every replication draws from its own ChaCha8 stream of the master seed,
//! so results do not depend on how replications are scheduled across threads.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::asymp::{bias_constant, optimal_h_coefficient, true_functionals, variance_constant, ModelTruth};
use crate::error::{domain, Error, Result};
use crate::estim::{linspace, nw_fit, recursive_fit, Dataset, RecursiveState};
use crate::kernel::KernelSpec;
use crate::normality::anderson_darling;
use crate::plugin::{select_bandwidth, Selection};
use crate::seq::{Estimator, GsSequence, StepsizeConfig, DEFAULT_BANDWIDTH_EXPONENT};

/// Regression function of the synthetic design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// `r(x) = cos x`
    Cos,
    /// `r(x) = 1 / (1 + e^x)`
    Logistic,
}

impl Model {
    pub const ALL: [Model; 2] = [Model::Cos, Model::Logistic];

    pub fn r(self, x: f64) -> f64 {
        match self {
            Model::Cos => x.cos(),
            Model::Logistic => 1.0 / (1.0 + x.exp()),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Model::Cos => "cos",
            Model::Logistic => "logistic",
        }
    }

    pub fn truth(self, sigma: f64) -> ModelTruth {
        match self {
            Model::Cos => ModelTruth::cosine(sigma),
            Model::Logistic => ModelTruth::logistic(sigma),
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cos" | "cosine" => Ok(Model::Cos),
            "logistic" | "logit" => Ok(Model::Logistic),
            other => Err(domain(format!("unknown model '{other}' (expected cos or logistic)"))),
        }
    }
}

/// Where the MSE compares the fit with the truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Evaluation {
    /// At the sample points `X_1..X_n`.
    SamplePoints,
    /// On `points` equispaced values of `[lo, hi]`.
    Grid { lo: f64, hi: f64, points: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub model: Model,
    pub sigma: f64,
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub estimators: Vec<Estimator>,
    pub evaluation: Evaluation,
    /// Run replications on the rayon pool. Results are identical either way;
    /// only the timings differ.
    pub parallel: bool,
}

pub const DEFAULT_REPLICATIONS: usize = 500;
pub const SIGMA_RANGE: (f64, f64) = (0.1, 2.0);

impl SimulationConfig {
    pub fn new(model: Model, sigma: f64, n: usize) -> Self {
        Self {
            model,
            sigma,
            n,
            replications: DEFAULT_REPLICATIONS,
            seed: 0,
            estimators: Estimator::ALL.to_vec(),
            evaluation: Evaluation::SamplePoints,
            parallel: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= SIGMA_RANGE.0 && self.sigma <= SIGMA_RANGE.1) {
            return Err(domain(format!("sigma must lie in [0.1, 2], got {}", self.sigma)));
        }
        if self.n < 4 {
            return Err(domain(format!("n must be at least 4, got {}", self.n)));
        }
        if self.replications == 0 {
            return Err(domain("replications must be positive"));
        }
        if self.estimators.is_empty() {
            return Err(domain("no estimators selected"));
        }
        for (i, e) in self.estimators.iter().enumerate() {
            if self.estimators[..i].contains(e) {
                return Err(domain(format!("estimator {e} listed twice")));
            }
        }
        if let Evaluation::Grid { lo, hi, points } = self.evaluation {
            if !(lo < hi) || points == 0 {
                return Err(domain("evaluation grid needs lo < hi and at least one point"));
            }
        }
        Ok(())
    }
}

/// One `(model, sigma, n, estimator)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub model: Model,
    pub sigma: f64,
    pub n: usize,
    pub estimator: Estimator,
    /// Mean over replications.
    pub mse: f64,
    /// Wall-clock seconds summed over replications, bandwidth selection included.
    pub cpu_seconds: f64,
    /// Replications where the plug-in was undefined and the pilot scale was used.
    pub fallbacks: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

pub const CSV_HEADER: [&str; 7] = ["model", "sigma", "n", "estimator", "mse", "cpu_seconds", "fallbacks"];

impl ResultTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn extend(&mut self, other: ResultTable) {
        self.rows.extend(other.rows);
    }

    pub fn row(&self, estimator: Estimator) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.estimator == estimator)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.model.name().to_string(),
                r.sigma.to_string(),
                r.n.to_string(),
                r.estimator.label().to_string(),
                format!("{:e}", r.mse),
                format!("{:.6}", r.cpu_seconds),
                r.fallbacks.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::Csv(e.to_string()))
    }
}

fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Standard normal draw by inversion of a uniform on the open unit interval.
fn std_normal(rng: &mut ChaCha8Rng, normal: &Normal) -> f64 {
    let u = ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
    normal.inverse_cdf(u)
}

fn draw(model: Model, sigma: f64, n: usize, rng: &mut ChaCha8Rng) -> Dataset {
    let normal = Normal::standard();
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let x = std_normal(rng, &normal);
        let e = std_normal(rng, &normal);
        xs.push(x);
        ys.push(model.r(x) + sigma * e);
    }
    Dataset::new(xs, ys).expect("draws are finite and paired")
}

/// `X ~ N(0, 1)`, `Y = r(X) + sigma e` with `e ~ N(0, 1)`; deterministic in `seed`.
pub fn generate(model: Model, sigma: f64, n: usize, seed: u64) -> Result<Dataset> {
    generate_stream(model, sigma, n, seed, 0)
}

/// As [`generate`], drawing from substream `stream` of `seed`.
pub fn generate_stream(model: Model, sigma: f64, n: usize, seed: u64, stream: u64) -> Result<Dataset> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(domain(format!("noise sd must be non-negative, got {sigma}")));
    }
    Ok(draw(model, sigma, n, &mut substream(seed, stream)))
}

/// Mean squared difference.
pub fn mse(fitted: &[f64], truth: &[f64]) -> Result<f64> {
    if fitted.len() != truth.len() {
        return Err(domain(format!(
            "length mismatch: {} fitted vs {} true values",
            fitted.len(),
            truth.len()
        )));
    }
    if fitted.is_empty() {
        return Err(domain("mse of an empty vector"));
    }
    let s: f64 = fitted.iter().zip(truth).map(|(f, t)| (f - t) * (f - t)).sum();
    Ok(s / fitted.len() as f64)
}

/// A fitted curve together with the bandwidth selection that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineFit {
    pub selection: Selection,
    pub values: Vec<f64>,
}

/// Pilot → functionals → plug-in bandwidth → fit on `points`.
pub fn fit_pipeline(data: &Dataset, estimator: Estimator, points: &[f64], kernel: &KernelSpec) -> Result<PipelineFit> {
    let selection = select_bandwidth(data, estimator, DEFAULT_BANDWIDTH_EXPONENT, kernel)?;
    let values = fit_with(data, estimator, selection.plan.sequence(), points, kernel)?;
    Ok(PipelineFit { selection, values })
}

/// Fits `estimator` with bandwidth `h_n` from `bandwidth`; Nadaraya–Watson
/// uses the single value at `n = |data|`.
pub fn fit_with(
    data: &Dataset,
    estimator: Estimator,
    bandwidth: GsSequence,
    points: &[f64],
    kernel: &KernelSpec,
) -> Result<Vec<f64>> {
    if estimator.is_recursive() {
        recursive_fit(data, StepsizeConfig::standard(estimator), bandwidth, points, kernel)
    } else {
        nw_fit(data, bandwidth.value(data.len())?, points, kernel)
    }
}

struct CellOutcome {
    mse: f64,
    seconds: f64,
    fallback: bool,
}

fn replicate(config: &SimulationConfig, rep: usize, kernel: &KernelSpec) -> Result<Vec<CellOutcome>> {
    let data = generate_stream(config.model, config.sigma, config.n, config.seed, rep as u64)?;
    let points = match config.evaluation {
        Evaluation::SamplePoints => data.xs().to_vec(),
        Evaluation::Grid { lo, hi, points } => linspace(lo, hi, points),
    };
    let truth: Vec<f64> = points.iter().map(|&x| config.model.r(x)).collect();
    config
        .estimators
        .iter()
        .map(|&e| {
            let start = Instant::now();
            let fit = fit_pipeline(&data, e, &points, kernel)?;
            let seconds = start.elapsed().as_secs_f64();
            Ok(CellOutcome {
                mse: mse(&fit.values, &truth)?,
                seconds,
                fallback: fit.selection.fallback,
            })
        })
        .collect()
}

/// Runs `config.replications` replications and aggregates one row per
/// estimator, in the order of `config.estimators`.
pub fn run_experiment(config: &SimulationConfig, kernel: &KernelSpec) -> Result<ResultTable> {
    config.validate()?;
    let outcomes: Vec<Vec<CellOutcome>> = if config.parallel {
        (0..config.replications)
            .into_par_iter()
            .map(|rep| replicate(config, rep, kernel))
            .collect::<Result<_>>()?
    } else {
        (0..config.replications)
            .map(|rep| replicate(config, rep, kernel))
            .collect::<Result<_>>()?
    };
    let reps = config.replications as f64;
    let rows = config
        .estimators
        .iter()
        .enumerate()
        .map(|(j, &estimator)| {
            // fixed-order reduction keeps the means bit-reproducible
            let mut total = 0.0;
            let mut seconds = 0.0;
            let mut fallbacks = 0;
            for rep in &outcomes {
                total += rep[j].mse;
                seconds += rep[j].seconds;
                fallbacks += usize::from(rep[j].fallback);
            }
            ResultRow {
                model: config.model,
                sigma: config.sigma,
                n: config.n,
                estimator,
                mse: total / reps,
                cpu_seconds: seconds,
                fallbacks,
            }
        })
        .collect();
    Ok(ResultTable { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltConfig {
    pub model: Model,
    pub sigma: f64,
    pub n: usize,
    pub estimator: Estimator,
    pub x_eval: f64,
    pub replications: usize,
    pub seed: u64,
    /// Multiplies the asymptotic variance used for standardisation; 1 for the
    /// real diagnostic, anything else is a deliberately broken control.
    pub variance_scale: f64,
}

impl CltConfig {
    pub fn new(model: Model, sigma: f64, n: usize, estimator: Estimator) -> Self {
        Self {
            model,
            sigma,
            n,
            estimator,
            x_eval: 0.0,
            replications: DEFAULT_REPLICATIONS,
            seed: 0,
            variance_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CltDiagnostic {
    pub statistic: f64,
    pub p_value: f64,
    /// Standardised estimates, one per replication.
    pub z: Vec<f64>,
    pub coefficient: f64,
    pub bias: f64,
    pub variance: f64,
}

/// Standardises `r_n(x)` over independent replications,
/// `z = sqrt(h_n / beta_n) (r_n(x) - r(x) - h_n² B(x)) / sqrt(V(x))`,
/// and tests `z` against `N(0, 1)`.
///
/// The bandwidth is `h_n = C n^{-1/5}` with the MWISE-optimal `C` of the true
/// model, which fixes `lim n h_n⁵ = C⁵`.
pub fn clt_diagnostic(config: &CltConfig, kernel: &KernelSpec) -> Result<CltDiagnostic> {
    if config.replications == 0 {
        return Err(domain("replications must be positive"));
    }
    if config.n == 0 {
        return Err(domain("n must be positive"));
    }
    let steps = StepsizeConfig::standard(config.estimator);
    let truth = config.model.truth(config.sigma);
    let functionals = true_functionals(&truth)?;
    let coefficient = optimal_h_coefficient(&steps, &functionals, kernel)?;
    let bias = bias_constant(&steps, &truth, config.x_eval, kernel)?;
    let variance = config.variance_scale * variance_constant(&steps, &truth, config.x_eval, kernel)?;
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(domain(format!("degenerate variance {variance} at x = {}", config.x_eval)));
    }
    let bandwidth = GsSequence::new(coefficient, -DEFAULT_BANDWIDTH_EXPONENT)?;
    let h = bandwidth.value(config.n)?;
    let beta_n = steps.beta.map_or(Ok(1.0 / config.n as f64), |b| b.value(config.n))?;
    let scale = (h / beta_n).sqrt() / variance.sqrt();
    let centre = (truth.r)(config.x_eval) + h * h * bias;
    let point = [config.x_eval];
    let z = (0..config.replications)
        .into_par_iter()
        .map(|rep| {
            let data = generate_stream(config.model, config.sigma, config.n, config.seed, rep as u64)?;
            let fit = fit_with(&data, config.estimator, bandwidth, &point, kernel)?;
            Ok(scale * (fit[0] - centre))
        })
        .collect::<Result<Vec<f64>>>()?;
    let ad = anderson_darling(&z)?;
    Ok(CltDiagnostic {
        statistic: ad.statistic,
        p_value: ad.p_value,
        z,
        coefficient,
        bias,
        variance,
    })
}

/// Timings of a stream processed online versus refitted after every arrival.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StreamingTiming {
    pub n_stream: usize,
    pub grid_size: usize,
    /// All recursive updates plus one evaluation of `r_n` on the grid.
    pub recursive_seconds: f64,
    /// A Nadaraya–Watson fit on the grid after each arrival.
    pub refit_seconds: f64,
    pub block_size: usize,
    /// Recursive update time of each consecutive block of arrivals.
    pub recursive_blocks: Vec<f64>,
    /// Refit time of each consecutive block of arrivals.
    pub refit_blocks: Vec<f64>,
}

impl StreamingTiming {
    /// Mean time per recursive update over the last blocks relative to the
    /// first ones; close to 1 when the update cost does not grow with `n`.
    pub fn recursive_growth(&self) -> f64 {
        block_growth(&self.recursive_blocks)
    }

    pub fn refit_growth(&self) -> f64 {
        block_growth(&self.refit_blocks)
    }
}

fn block_growth(blocks: &[f64]) -> f64 {
    let k = (blocks.len() / 3).max(1);
    let head: f64 = blocks[..k].iter().sum();
    let tail: f64 = blocks[blocks.len() - k..].iter().sum();
    tail / head
}

const STREAM_BLOCKS: usize = 10;
const RECURSIVE_REPEATS: usize = 5;

fn nw_refit_into(xs: &[f64], ys: &[f64], h: f64, grid: &[f64], kernel: &KernelSpec, out: &mut [f64]) {
    let inv_h = 1.0 / h;
    for (o, &x) in out.iter_mut().zip(grid) {
        let (mut num, mut den) = (0.0, 0.0);
        for (&xi, &yi) in xs.iter().zip(ys) {
            let k = kernel.eval((x - xi) * inv_h);
            num += yi * k;
            den += k;
        }
        *o = if den.abs() > crate::estim::EPS_DENOM { num / den } else { 0.0 };
    }
}

/// Single-threaded cost comparison on one synthetic stream (cos model,
/// `sigma = 0.5`) with `h_n = n^{-1/5}` for both methods.
///
/// The recursive pass is repeated a few times and the fastest repeat is kept
/// per block, which removes most scheduler noise from the per-update profile.
pub fn streaming_benchmark(n_stream: usize, grid_size: usize, kernel: &KernelSpec) -> Result<StreamingTiming> {
    if n_stream < 100 {
        return Err(domain(format!("streaming benchmark needs at least 100 arrivals, got {n_stream}")));
    }
    if grid_size == 0 {
        return Err(domain("grid must be non-empty"));
    }
    let data = generate(Model::Cos, 0.5, n_stream, 0x5eed)?;
    let grid = if grid_size == 1 { vec![0.0] } else { linspace(-3.0, 3.0, grid_size) };
    let bandwidth = GsSequence::new(1.0, -DEFAULT_BANDWIDTH_EXPONENT)?;
    let block_size = n_stream / STREAM_BLOCKS;
    let config = StepsizeConfig::standard(Estimator::Recursive1);

    let mut recursive_blocks = vec![f64::INFINITY; STREAM_BLOCKS];
    let mut recursive_seconds = f64::INFINITY;
    let mut sink = 0.0;
    for _ in 0..RECURSIVE_REPEATS {
        let start = Instant::now();
        let mut state = RecursiveState::new(grid.clone(), config, bandwidth, kernel.clone())?;
        let mut blocks = Vec::with_capacity(STREAM_BLOCKS);
        let mut block_start = Instant::now();
        for (i, (x, y)) in data.iter().enumerate() {
            state.update(x, y)?;
            if (i + 1) % block_size == 0 && blocks.len() < STREAM_BLOCKS {
                blocks.push(block_start.elapsed().as_secs_f64());
                block_start = Instant::now();
            }
        }
        sink += state.regression().iter().sum::<f64>();
        recursive_seconds = recursive_seconds.min(start.elapsed().as_secs_f64());
        for (best, b) in recursive_blocks.iter_mut().zip(blocks) {
            *best = best.min(b);
        }
    }

    let mut out = vec![0.0; grid.len()];
    let mut refit_blocks = Vec::with_capacity(STREAM_BLOCKS);
    let start = Instant::now();
    let mut block_start = Instant::now();
    for k in 1..=n_stream {
        let h = bandwidth.at(k);
        nw_refit_into(&data.xs()[..k], &data.ys()[..k], h, &grid, kernel, &mut out);
        if k % block_size == 0 && refit_blocks.len() < STREAM_BLOCKS {
            refit_blocks.push(block_start.elapsed().as_secs_f64());
            block_start = Instant::now();
        }
    }
    sink += out.iter().sum::<f64>();
    let refit_seconds = start.elapsed().as_secs_f64();
    std::hint::black_box(sink);

    Ok(StreamingTiming {
        n_stream,
        grid_size,
        recursive_seconds,
        refit_seconds,
        block_size,
        recursive_blocks,
        refit_blocks,
    })
}
