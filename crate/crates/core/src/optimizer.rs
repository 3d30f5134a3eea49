//! Coordinate descent over the dual multipliers.
//!
//! Each sweep updates `mu_0, ..., mu_{K-1}` in turn (always using the
//! freshest values). Coordinate `gamma` is set to zero when the error rate
//! under `gamma` alternatives is already at most alpha, and otherwise to the
//! root of `F_gamma(mu_gamma) = alpha`, found by bisection on a sample batch
//! that stays fixed for the whole run. With the batch fixed, `F_gamma` is a
//! non-increasing step function of `mu_gamma`, so the bracket is always
//! valid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::MAX_K;
use crate::densities::AlternativeModel;
use crate::error::{Error, Result};
use crate::estimator::{fwer_estimate, make_batch, proportion_se, LabeledSampleBatch};
use crate::policy::{optimal_l_star, DualVector};
use crate::rng::{derive_seed, SeedPurpose};

/// Number of times the upper bracket may double before giving up.
pub const MAX_DOUBLINGS: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub alpha: f64,
    /// Bisection stops once the bracket is narrower than this.
    pub delta: f64,
    /// Outer loop stops once `||mu_t - mu_{t-1}||_2` drops below this.
    pub epsilon: f64,
    pub t_max: usize,
    /// Initial upper end of the bisection bracket.
    pub u_max: f64,
    pub n_opt: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            alpha: 0.05,
            delta: 1e-4,
            epsilon: 1e-2,
            t_max: 20,
            u_max: 50.0,
            n_opt: 100_000,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn with_alpha(alpha: f64) -> Self {
        OptimizerConfig {
            alpha,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Parameter(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.delta > 0.0 && self.delta <= self.epsilon) {
            return Err(Error::Parameter(format!(
                "need 0 < delta <= epsilon, got delta = {}, epsilon = {}",
                self.delta, self.epsilon
            )));
        }
        if !(self.u_max.is_finite() && self.u_max > 0.0) {
            return Err(Error::Parameter(format!(
                "u_max must be positive, got {}",
                self.u_max
            )));
        }
        if self.t_max == 0 || self.n_opt == 0 {
            return Err(Error::Parameter("t_max and n_opt must be positive".into()));
        }
        Ok(())
    }
}

/// How a coordinate was set in the last sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordinateStatus {
    /// The constraint was slack at zero.
    Zero,
    /// Set to the bisection root.
    Root,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub mu_hat: DualVector,
    pub iterations: usize,
    /// `||mu_t - mu_{t-1}||_2` after each sweep.
    pub trajectory: Vec<f64>,
    pub coordinate_status: Vec<CoordinateStatus>,
    pub converged: bool,
}

/// Bisection on a non-increasing `target` for the point where it crosses
/// `alpha`.
///
/// Returns 0 when `target(0) <= alpha`. Otherwise the bracket `[lo, hi]`
/// with `target(lo) > alpha >= target(hi)` starts at `[0, u_max]` (doubling
/// `hi` up to [`MAX_DOUBLINGS`] times if needed) and is halved until it is
/// narrower than `delta`; the midpoint is returned. The `Err` carries the
/// last upper bound and its value when no bracket exists.
pub fn bisect_root<F>(mut target: F, alpha: f64, delta: f64, u_max: f64) -> Result<f64, (f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let f0 = target(0.0);
    if f0 <= alpha {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut f_lo = f0;
    let mut hi = u_max;
    let mut f_hi = target(hi);
    let mut doublings = 0;
    while f_hi > alpha {
        if doublings == MAX_DOUBLINGS {
            return Err((hi, f_hi));
        }
        debug_assert!(f_hi <= f_lo, "target increased from {f_lo} to {f_hi}");
        lo = hi;
        f_lo = f_hi;
        hi *= 2.0;
        f_hi = target(hi);
        doublings += 1;
    }
    while hi - lo > delta {
        let mid = 0.5 * (lo + hi);
        let f_mid = target(mid);
        debug_assert!(
            f_mid <= f_lo && f_mid >= f_hi,
            "target not monotone: f({lo}) = {f_lo}, f({mid}) = {f_mid}, f({hi}) = {f_hi}"
        );
        if f_mid > alpha {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    debug_assert!(f_lo > alpha && f_hi <= alpha);
    Ok(0.5 * (lo + hi))
}

/// The error rate under configuration `gamma` as a function of `mu_gamma`
/// alone, with the other multipliers folded into a per-sample baseline.
struct CoordinateTarget<'a> {
    batch: &'a LabeledSampleBatch,
    /// `a - sum_{l != gamma} mu_l b[l][.]`, `n * k`.
    base: Vec<f64>,
}

impl<'a> CoordinateTarget<'a> {
    fn new(batch: &'a LabeledSampleBatch, gamma: usize, mu: &DualVector) -> Self {
        let k = batch.k();
        let mut base = vec![0.0; batch.len() * k];
        base.par_chunks_mut(k).enumerate().for_each(|(i, r)| {
            let b = batch.error_weights(i);
            r.fill(batch.power_weight(i));
            for (l, &m) in mu.as_slice().iter().enumerate() {
                if l == gamma || m == 0.0 {
                    continue;
                }
                for (x, &coef) in r.iter_mut().zip(&b[l * k..(l + 1) * k]) {
                    *x -= m * coef;
                }
            }
        });
        CoordinateTarget { batch, base }
    }

    fn eval(&self, gamma: usize, x: f64) -> f64 {
        let k = self.batch.k();
        let hits = self
            .base
            .par_chunks(k)
            .enumerate()
            .filter(|(i, base)| {
                let row = &self.batch.error_weights(*i)[gamma * k..(gamma + 1) * k];
                let mut r = [0.0; MAX_K];
                for ((ri, &bi), &rowi) in r.iter_mut().zip(base.iter()).zip(row) {
                    *ri = bi - x * rowi;
                }
                self.batch.first_null(*i) < optimal_l_star(&r[..k])
            })
            .count();
        hits as f64 / self.batch.len() as f64
    }
}

/// Solves for coordinate `gamma` with the other multipliers held at `mu`,
/// on a batch drawn under `gamma` alternatives.
pub fn bisect_coordinate(
    gamma: usize,
    mu: &DualVector,
    batch: &LabeledSampleBatch,
    cfg: &OptimizerConfig,
) -> Result<f64> {
    if mu.len() != batch.k() {
        return Err(Error::DimensionMismatch {
            expected: batch.k(),
            actual: mu.len(),
        });
    }
    if batch.gamma() != gamma || gamma >= batch.k() {
        return Err(Error::Parameter(format!(
            "coordinate {gamma} needs a batch drawn with {gamma} alternatives, got {}",
            batch.gamma()
        )));
    }
    let target = CoordinateTarget::new(batch, gamma, mu);
    bisect_root(|x| target.eval(gamma, x), cfg.alpha, cfg.delta, cfg.u_max).map_err(
        |(upper, rate)| Error::Bracket {
            gamma,
            upper,
            rate,
            alpha: cfg.alpha,
        },
    )
}

/// Seed of the optimisation batch for coordinate `gamma`.
pub fn optimisation_seed(root: u64, gamma: usize) -> u64 {
    derive_seed(root, SeedPurpose::Optimise, gamma as u64)
}

/// The fixed per-coordinate batches used by [`fit`].
pub fn optimisation_batches(
    model: &AlternativeModel,
    k: usize,
    cfg: &OptimizerConfig,
) -> Result<Vec<LabeledSampleBatch>> {
    (0..k)
        .map(|gamma| make_batch(model, k, gamma, cfg.n_opt, optimisation_seed(cfg.seed, gamma)))
        .collect()
}

/// Runs coordinate descent from `mu = 0`.
pub fn fit(model: &AlternativeModel, k: usize, cfg: &OptimizerConfig) -> Result<FitResult> {
    cfg.validate()?;
    if k < 2 {
        return Err(Error::Parameter(format!("K must be at least 2, got {k}")));
    }
    let batches = optimisation_batches(model, k, cfg)?;
    fit_on_batches(&batches, cfg)
}

/// [`fit`] on caller-supplied batches; `batches[gamma]` must be drawn under
/// `gamma` alternatives.
pub fn fit_on_batches(batches: &[LabeledSampleBatch], cfg: &OptimizerConfig) -> Result<FitResult> {
    cfg.validate()?;
    let k = batches.len();
    let mut mu = DualVector::zeros(k);
    let mut status = vec![CoordinateStatus::Zero; k];
    let mut trajectory = Vec::new();
    let mut converged = false;
    for _ in 0..cfg.t_max {
        let previous = mu.clone();
        for (gamma, batch) in batches.iter().enumerate() {
            let value = bisect_coordinate(gamma, &mu, batch, cfg)?;
            mu.set(gamma, value)?;
            status[gamma] = if value > 0.0 {
                CoordinateStatus::Root
            } else {
                CoordinateStatus::Zero
            };
        }
        let step = mu.distance(&previous);
        trajectory.push(step);
        if step < cfg.epsilon {
            converged = true;
            break;
        }
    }
    Ok(FitResult {
        mu_hat: mu,
        iterations: trajectory.len(),
        trajectory,
        coordinate_status: status,
        converged,
    })
}

/// A fitted policy as stored on disk and read back by `apply`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPolicy {
    #[serde(rename = "K")]
    pub k: usize,
    pub alpha: f64,
    pub model: AlternativeModel,
    pub mu: DualVector,
    pub seed: u64,
    pub config: OptimizerConfig,
    pub converged: bool,
    #[serde(default)]
    pub iterations: usize,
    #[serde(default)]
    pub trajectory: Vec<f64>,
}

impl FittedPolicy {
    pub fn new(model: &AlternativeModel, cfg: &OptimizerConfig, fit: &FitResult) -> Self {
        FittedPolicy {
            k: fit.mu_hat.len(),
            alpha: cfg.alpha,
            model: *model,
            mu: fit.mu_hat.clone(),
            seed: cfg.seed,
            config: *cfg,
            converged: fit.converged,
            iterations: fit.iterations,
            trajectory: fit.trajectory.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let policy: FittedPolicy = serde_json::from_str(s)?;
        if policy.mu.len() != policy.k {
            return Err(Error::Format(format!(
                "policy has K = {} but {} multipliers",
                policy.k,
                policy.mu.len()
            )));
        }
        policy.config.validate()?;
        Ok(policy)
    }
}

/// Successive step ratios over the geometric phase of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub ratios: Vec<f64>,
    /// True when every ratio is below one.
    pub contracting: bool,
}

/// Ratios `||dmu_{t+1}|| / ||dmu_t||` over the leading steps that are still
/// above `noise_floor` (use `sqrt(K) * delta`); the first step at or below
/// the floor closes the phase.
pub fn contraction_diagnostic(trajectory: &[f64], noise_floor: f64) -> Result<ContractionReport> {
    if trajectory.len() < 2 {
        return Err(Error::Parameter(format!(
            "need at least two steps, got {}",
            trajectory.len()
        )));
    }
    let end = trajectory
        .iter()
        .position(|&x| x <= noise_floor)
        .map_or(trajectory.len(), |i| i + 1);
    let ratios: Vec<f64> = trajectory[..end]
        .windows(2)
        .filter(|w| w[0] > 0.0)
        .map(|w| w[1] / w[0])
        .collect();
    let contracting = ratios.iter().all(|&r| r < 1.0);
    Ok(ContractionReport { ratios, contracting })
}

/// Per-coordinate complementary-slackness check on independent batches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlacknessEntry {
    pub gamma: usize,
    pub mu: f64,
    pub fwer: f64,
    pub se: f64,
    /// Allowed deviation from alpha for an active coordinate.
    pub tolerance: f64,
    pub passed: bool,
}

/// Checks each coordinate on a fresh batch of `n_eval` samples: inactive
/// coordinates need `F <= alpha + 3 se`; active ones need
/// `|F - alpha| <= 3 se + |F(mu - delta) - F(mu + delta)|`, the second term
/// being the change in `F` across one bisection tolerance. `se` combines the
/// evaluation and optimisation batch errors.
pub fn slackness_check(
    model: &AlternativeModel,
    mu: &DualVector,
    cfg: &OptimizerConfig,
    n_eval: usize,
    seed: u64,
) -> Result<Vec<SlacknessEntry>> {
    let k = mu.len();
    (0..k)
        .map(|gamma| {
            let batch = make_batch(
                model,
                k,
                gamma,
                n_eval,
                derive_seed(seed, SeedPurpose::Evaluate, gamma as u64),
            )?;
            let est = fwer_estimate(&batch, mu)?;
            let m = mu.get(gamma);
            // mu was tuned to hit alpha on the optimisation batch, so its
            // noise enters the comparison alongside the evaluation noise
            let eval_se = est.se.max(proportion_se(cfg.alpha, n_eval));
            let opt_se = proportion_se(cfg.alpha, cfg.n_opt);
            let three_se = 3.0 * eval_se.hypot(opt_se);
            let (tolerance, passed) = if m == 0.0 {
                (three_se, est.value <= cfg.alpha + three_se)
            } else {
                let mut lower = mu.clone();
                lower.set(gamma, (m - cfg.delta).max(0.0))?;
                let mut upper = mu.clone();
                upper.set(gamma, m + cfg.delta)?;
                let slope = fwer_estimate(&batch, &lower)?.value - fwer_estimate(&batch, &upper)?.value;
                let tol = three_se + slope.abs();
                (tol, (est.value - cfg.alpha).abs() <= tol)
            };
            Ok(SlacknessEntry {
                gamma,
                mu: m,
                fwer: est.value,
                se: est.se,
                tolerance,
                passed,
            })
        })
        .collect()
}
