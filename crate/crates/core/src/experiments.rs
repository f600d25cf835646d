//! Monte Carlo support-recovery experiments.
//!
//! A sweep runs independent seeded trials at each point of a grid of rescaled
//! sample sizes θ, with `n = round(2·θ·s·log(p − s))`, and records how often
//! the estimated row support equals the true one. Trials are seeded by
//! `mix(base_seed, grid_index, trial_index)` and run in parallel on the
//! current rayon pool; the aggregated result does not depend on scheduling.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensembles::{make_coefficients, sample_noise, Coefficients, DesignSampler, EnsembleSpec, Family};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::rng::{mix, tag, GaussianStream};
use crate::solver::{group_lasso, lasso_union_rows, SolveError, SolverConfig};
use crate::theory::SupportSet;

/// How the regularization level is chosen from `(n, p, s)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaRule {
    /// `√(log(p − s)·log(s)/n)`.
    PaperSim,
    /// `√(f(p)·log(p)/n)` with `f(p) = log p`.
    Theorem,
    Fixed(f64),
}

impl fmt::Display for LambdaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LambdaRule::PaperSim => f.write_str("paper_sim"),
            LambdaRule::Theorem => f.write_str("theorem"),
            LambdaRule::Fixed(l) => write!(f, "fixed({l})"),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Joint ℓ1/ℓ2 group Lasso.
    #[default]
    GroupL12,
    /// Union of per-task Lasso supports.
    LassoUnion,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::GroupL12 => "group_l12",
            Method::LassoUnion => "lasso_union",
        })
    }
}

/// `√(f·log p / n)`, the theorem's schedule with `f` supplied directly.
pub fn theorem_lambda(n: f64, p: f64, f: f64) -> f64 {
    (f * p.ln() / n).sqrt()
}

pub fn lambda_from_rule(rule: LambdaRule, n: usize, p: usize, s: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be positive".into()));
    }
    match rule {
        LambdaRule::Fixed(l) => {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::InvalidArgument(format!("fixed lambda must be >= 0, got {l}")));
            }
            Ok(l)
        }
        LambdaRule::PaperSim => {
            if s < 2 || p < s + 2 {
                return Err(Error::DegenerateLogArgument(p.saturating_sub(s) as f64));
            }
            Ok((((p - s) as f64).ln() * (s as f64).ln() / n as f64).sqrt())
        }
        LambdaRule::Theorem => {
            if p < 2 {
                return Err(Error::DegenerateLogArgument(p as f64));
            }
            let p = p as f64;
            Ok(theorem_lambda(n as f64, p, p.ln()))
        }
    }
}

/// `round(2·θ·s·log(p − s))`, at least 1.
pub fn sample_size(theta: f64, p: usize, s: usize) -> Result<usize> {
    if s == 0 || p < s + 2 {
        return Err(Error::DegenerateLogArgument(p.saturating_sub(s) as f64));
    }
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::InvalidArgument(format!("theta must be positive, got {theta}")));
    }
    Ok(((2.0 * theta * s as f64 * ((p - s) as f64).ln()).round() as usize).max(1))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub success: bool,
    pub n: usize,
    pub lambda: f64,
    /// Sweeps summed over all solves of the trial.
    pub iterations: usize,
    /// Some solve failed to converge or errored; such trials never count as successes.
    pub solver_failed: bool,
    pub support_size: usize,
}

/// Pre-computed pieces shared by all trials of one ensemble.
pub struct TrialContext {
    spec: EnsembleSpec,
    sampler: DesignSampler<f64>,
    // fixed coefficients when the support does not depend on the seed
    fixed: Option<Coefficients<f64>>,
}

impl TrialContext {
    pub fn new(spec: &EnsembleSpec) -> Result<Self> {
        spec.validate()?;
        if spec.p < spec.s + 2 {
            return Err(Error::DegenerateLogArgument((spec.p - spec.s) as f64));
        }
        let sampler = DesignSampler::new(&spec.covariance_matrix::<f64>()?)?;
        let fixed = match spec.placement {
            crate::ensembles::Placement::FirstS => Some(make_coefficients(spec, 0)?),
            crate::ensembles::Placement::Random => None,
        };
        Ok(Self {
            spec: spec.clone(),
            sampler,
            fixed,
        })
    }

    pub fn spec(&self) -> &EnsembleSpec {
        &self.spec
    }

    /// Runs one trial at sample size `n`.
    pub fn run(&self, n: usize, rule: LambdaRule, method: Method, seed: u64) -> Result<TrialOutcome> {
        let spec = &self.spec;
        let lambda = lambda_from_rule(rule, n, spec.p, spec.s)?;
        let coefs = match &self.fixed {
            Some(c) => c.clone(),
            None => make_coefficients(spec, seed)?,
        };
        let x = self.sampler.sample(n, seed);
        let w = sample_noise(n, spec.k, spec.sigma, seed);
        let y = x.matmul(&coefs.b)?.try_add(&w)?;
        let cfg = SolverConfig::new(lambda);
        let (estimate, iterations, failed) = match method {
            Method::GroupL12 => match group_lasso(&x, &y, &cfg) {
                Ok(sol) => (Some(sol.support), sol.iterations, false),
                Err(SolveError::NotConverged(sol)) => (None, sol.iterations, true),
                Err(SolveError::Core(e)) => return Err(e),
            },
            Method::LassoUnion => match lasso_union_rows(&x, &y, &cfg) {
                Ok(support) => (Some(support), 0, false),
                Err(SolveError::NotConverged(sol)) => (None, sol.iterations, true),
                Err(SolveError::Core(e)) => return Err(e),
            },
        };
        let support_size = estimate.as_ref().map_or(0, SupportSet::len);
        Ok(TrialOutcome {
            success: estimate.as_ref() == Some(&coefs.support),
            n,
            lambda,
            iterations,
            solver_failed: failed,
            support_size,
        })
    }
}

/// Single trial at rescaled sample size `theta`.
pub fn run_trial(spec: &EnsembleSpec, theta: f64, rule: LambdaRule, method: Method, seed: u64) -> Result<TrialOutcome> {
    let n = sample_size(theta, spec.p, spec.s)?;
    TrialContext::new(spec)?.run(n, rule, method, seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub ensemble: EnsembleSpec,
    pub theta_grid: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
    pub lambda_rule: LambdaRule,
    pub method: Method,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.ensemble.validate()?;
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be >= 1".into()));
        }
        if self.theta_grid.is_empty() {
            return Err(Error::InvalidArgument("theta grid must be nonempty".into()));
        }
        if self.theta_grid.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::InvalidArgument("theta grid values must be positive".into()));
        }
        if self.theta_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("theta grid must be strictly increasing".into()));
        }
        if let LambdaRule::Fixed(l) = self.lambda_rule {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::InvalidArgument(format!("fixed lambda must be > 0, got {l}")));
            }
        }
        sample_size(self.theta_grid[0], self.ensemble.p, self.ensemble.s)?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub theta: f64,
    pub n: usize,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub solver_failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub theta50: Option<f64>,
    pub spec: SweepSpec,
}

/// Seed of trial `trial` at grid point `grid_index`.
pub fn trial_seed(base_seed: u64, grid_index: usize, trial: usize) -> u64 {
    mix(base_seed, grid_index as u64, trial as u64)
}

/// Success-probability curve over the θ grid.
pub fn sweep_theta(spec: &SweepSpec) -> Result<SweepResult> {
    sweep_theta_with(spec, |_| {})
}

/// Like [`sweep_theta`], calling `progress` after each finished grid point.
pub fn sweep_theta_with(spec: &SweepSpec, mut progress: impl FnMut(&SweepPoint)) -> Result<SweepResult> {
    spec.validate()?;
    let ctx = TrialContext::new(&spec.ensemble)?;
    let mut points = Vec::with_capacity(spec.theta_grid.len());
    for (g, &theta) in spec.theta_grid.iter().enumerate() {
        let n = sample_size(theta, spec.ensemble.p, spec.ensemble.s)?;
        let outcomes = (0..spec.trials)
            .into_par_iter()
            .map(|t| ctx.run(n, spec.lambda_rule, spec.method, trial_seed(spec.base_seed, g, t)))
            .collect::<Result<Vec<_>>>()?;
        let successes = outcomes.iter().filter(|o| o.success).count();
        let point = SweepPoint {
            theta,
            n,
            trials: spec.trials,
            successes,
            success_rate: successes as f64 / spec.trials as f64,
            solver_failures: outcomes.iter().filter(|o| o.solver_failed).count(),
        };
        progress(&point);
        points.push(point);
    }
    let curve: Vec<(f64, f64, f64)> = points
        .iter()
        .map(|pt| (pt.theta, pt.success_rate, pt.trials as f64))
        .collect();
    Ok(SweepResult {
        theta50: theta50_weighted(&curve).ok(),
        points,
        spec: spec.clone(),
    })
}

/// Non-decreasing least-squares fit to `values` with positive `weights`
/// (pool-adjacent-violators).
pub fn isotonic_increasing(values: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), weights.len());
    // blocks of (mean, weight, length)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w, 1));
        while blocks.len() > 1 {
            let (m2, w2, l2) = blocks[blocks.len() - 1];
            let (m1, w1, l1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.truncate(blocks.len() - 2);
            blocks.push(((m1 * w1 + m2 * w2) / (w1 + w2), w1 + w2, l1 + l2));
        }
    }
    blocks
        .into_iter()
        .flat_map(|(m, _, l)| std::iter::repeat_n(m, l))
        .collect()
}

/// θ at which the monotonized success curve first reaches 0.5.
pub fn estimate_theta50(result: &SweepResult) -> Result<f64> {
    let curve: Vec<(f64, f64, f64)> = result
        .points
        .iter()
        .map(|pt| (pt.theta, pt.success_rate, pt.trials as f64))
        .collect();
    theta50_weighted(&curve)
}

/// [`estimate_theta50`] on bare `(θ, success_rate)` pairs with equal weights.
pub fn theta50_from_points(points: &[(f64, f64)]) -> Result<f64> {
    let curve: Vec<(f64, f64, f64)> = points.iter().map(|&(t, r)| (t, r, 1.0)).collect();
    theta50_weighted(&curve)
}

fn theta50_weighted(curve: &[(f64, f64, f64)]) -> Result<f64> {
    if curve.is_empty() {
        return Err(Error::NoCrossing);
    }
    let rates: Vec<f64> = curve.iter().map(|c| c.1).collect();
    let weights: Vec<f64> = curve.iter().map(|c| c.2).collect();
    let mono = isotonic_increasing(&rates, &weights);
    if mono[0] > 0.5 {
        return Err(Error::NoCrossing);
    }
    let i = mono.iter().position(|&r| r >= 0.5).ok_or(Error::NoCrossing)?;
    if i == 0 {
        return Ok(curve[0].0);
    }
    let (t0, t1) = (curve[i - 1].0, curve[i].0);
    let (r0, r1) = (mono[i - 1], mono[i]);
    Ok(t0 + (0.5 - r0) / (r1 - r0) * (t1 - t0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theta50Row {
    pub alpha: f64,
    pub cos_alpha: f64,
    pub theta50_group: Option<f64>,
    pub theta50_lasso: Option<f64>,
}

/// θ50 of the `b1_alpha` family over a grid of angles, for the group method and
/// optionally for the per-task Lasso union.
///
/// `template` supplies everything but the family; each angle reuses the same
/// seeds so the two methods see identical problem instances.
pub fn theta50_scan(template: &SweepSpec, alphas: &[f64], with_lasso: bool) -> Result<Vec<Theta50Row>> {
    alphas
        .iter()
        .map(|&alpha| {
            let mut spec = template.clone();
            spec.ensemble.family = Family::B1Alpha { alpha };
            spec.ensemble.k = 2;
            spec.method = Method::GroupL12;
            let group = sweep_theta(&spec)?.theta50;
            let lasso = if with_lasso {
                spec.method = Method::LassoUnion;
                sweep_theta(&spec)?.theta50
            } else {
                None
            };
            Ok(Theta50Row {
                alpha,
                cos_alpha: alpha.cos(),
                theta50_group: group,
                theta50_lasso: lasso,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chi2TailReport {
    pub m: usize,
    pub d: usize,
    pub t: f64,
    pub trials: usize,
    pub exceedances: usize,
    pub empirical_rate: f64,
    pub bound: f64,
    pub ok: bool,
}

/// `m·exp(−t(1 − 2√(d/t)))`, a bound on `P[max of m χ²_d variates ≥ 2t]`.
pub fn chi2_max_tail_bound(m: usize, d: usize, t: f64) -> f64 {
    m as f64 * (-t * (1.0 - 2.0 * (d as f64 / t).sqrt())).exp()
}

/// Simulates the maximum of `m` independent `χ²_d` variates and compares the
/// frequency of `max ≥ 2t` with [`chi2_max_tail_bound`].
pub fn chi2_tail_check(m: usize, d: usize, t: f64, trials: usize, seed: u64) -> Result<Chi2TailReport> {
    if m == 0 || d == 0 || trials == 0 {
        return Err(Error::InvalidArgument("m, d and trials must be positive".into()));
    }
    if !(t > d as f64) {
        return Err(Error::InvalidArgument(format!("need t > d, got t = {t}, d = {d}")));
    }
    let exceedances = (0..trials)
        .into_par_iter()
        .filter(|&trial| {
            let mut g = GaussianStream::new(seed, tag::CHI2, trial as u64);
            (0..m).any(|_| {
                let z: f64 = (0..d).map(|_| g.normal().powi(2)).sum();
                z >= 2.0 * t
            })
        })
        .count();
    let bound = chi2_max_tail_bound(m, d, t);
    let empirical_rate = exceedances as f64 / trials as f64;
    let ok = empirical_rate <= bound.min(1.0) + 3.0 * (bound / trials as f64).sqrt() + 0.01;
    Ok(Chi2TailReport {
        m,
        d,
        t,
        trials,
        exceedances,
        empirical_rate,
        bound,
        ok,
    })
}

/// Coefficients with the design `X`, noise `W` and responses `Y` of one trial.
pub type Instance = (Coefficients<f64>, DenseMatrix<f64>, DenseMatrix<f64>, DenseMatrix<f64>);

/// Draws one problem instance for the trial seed used by sweeps.
pub fn draw_instance(ctx: &TrialContext, n: usize, seed: u64) -> Result<Instance> {
    let spec = ctx.spec();
    let coefs = match &ctx.fixed {
        Some(c) => c.clone(),
        None => make_coefficients(spec, seed)?,
    };
    let x = ctx.sampler.sample(n, seed);
    let w = sample_noise(n, spec.k, spec.sigma, seed);
    let y = x.matmul(&coefs.b)?.try_add(&w)?;
    Ok((coefs, x, w, y))
}
