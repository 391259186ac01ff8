//! Sweeping the preference parameter over a grid and choosing one value.
//!
//! A [`LambdaPath`] records, for each `lambda` on a [`LambdaGrid`], the
//! maximizing rule together with its objective value, target value and
//! per-group unfairness. Two ways of picking `lambda` are offered: the
//! budget rule [`select_lambda_budget`], which takes the largest `lambda`
//! whose loss in the target relative to `lambda = 0` stays within
//! `beta (1 - c_n)` with `c_n = sqrt(ln(n) / n)`, and inspection of the
//! interpolated value function [`interpolate_value`].

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{fit_plugin, IpwEvaluator, PropensityModel, TrainingSample};
use crate::functionals::{SimilarityMeasure, TargetFunctional};
use crate::objective::{evaluate_rule, CondCdfArray, CovariateSpace, DecisionRule, RuleEvaluation};
use crate::optimizer::{maximize, OptimizerConfig};

const GRID_TOLERANCE: f64 = 1e-12;

/// Increasing preference parameters in `[0, 1]` starting at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LambdaGrid {
    values: Vec<f64>,
}

impl LambdaGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        match values.first() {
            Some(&first) if first == 0.0 => {}
            _ => return Err(Error::InvalidGrid("the grid must start at 0".into())),
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidGrid("values must lie in [0, 1]".into()));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid("values must be strictly increasing".into()));
        }
        Ok(Self { values })
    }

    /// `{0, 1/m, ..., 1}`.
    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidGrid("m must be at least 1".into()));
        }
        Ok(Self { values: (0..=m).map(|i| i as f64 / m as f64).collect() })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `m` when the grid is `{0, 1/m, ..., 1}`.
    pub fn uniform_m(&self) -> Option<usize> {
        let m = self.values.len().checked_sub(1).filter(|&m| m > 0)?;
        self.values.iter().enumerate().all(|(i, &v)| (v - i as f64 / m as f64).abs() <= GRID_TOLERANCE).then_some(m)
    }

    pub fn position(&self, lambda: f64) -> Option<usize> {
        self.values.iter().position(|&v| (v - lambda).abs() <= GRID_TOLERANCE)
    }
}

impl TryFrom<Vec<f64>> for LambdaGrid {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<LambdaGrid> for Vec<f64> {
    fn from(grid: LambdaGrid) -> Self {
        grid.values
    }
}

/// Which empirical objective a sweep maximizes.
#[derive(Debug, Clone, PartialEq)]
pub enum Estimator {
    /// Plug-in conditional cdfs from [`fit_plugin`].
    Plugin,
    /// Inverse propensity weighting with known propensities.
    Ipw(PropensityModel),
    /// Inverse propensity weighting with cell-frequency propensities.
    IpwEstimated,
}

/// A fitted objective that can be evaluated at any rule.
#[derive(Debug, Clone)]
pub enum FittedObjective {
    Plugin(CondCdfArray),
    Ipw(IpwEvaluator),
}

impl FittedObjective {
    pub fn space(&self) -> &Arc<CovariateSpace> {
        match self {
            Self::Plugin(arr) => arr.space(),
            Self::Ipw(ev) => ev.space(),
        }
    }

    pub fn fit(sample: &TrainingSample, estimator: &Estimator) -> Result<Self> {
        Ok(match estimator {
            Estimator::Plugin => Self::Plugin(fit_plugin(sample)),
            Estimator::Ipw(prop) => Self::Ipw(IpwEvaluator::new(sample, prop)?),
            Estimator::IpwEstimated => Self::Ipw(IpwEvaluator::new(sample, &PropensityModel::estimate(sample))?),
        })
    }

    pub fn evaluate(
        &self,
        rule: &DecisionRule,
        lambda: f64,
        t: &TargetFunctional,
        s: &SimilarityMeasure,
    ) -> Result<RuleEvaluation> {
        match self {
            Self::Plugin(arr) => evaluate_rule(rule, arr, lambda, t, s),
            Self::Ipw(ev) => ev.evaluate(rule, lambda, t, s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathEntry {
    pub lambda: f64,
    pub rule: DecisionRule,
    pub obj_value: f64,
    pub target_value: f64,
    /// Per group level; `None` for groups without mass.
    pub unfairness: Vec<Option<f64>>,
    pub max_unfairness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaPath {
    pub grid: LambdaGrid,
    pub entries: Vec<PathEntry>,
    /// Training sample size.
    pub n: usize,
}

impl LambdaPath {
    pub fn entry(&self, lambda: f64) -> Result<&PathEntry> {
        self.grid.position(lambda).map(|i| &self.entries[i]).ok_or(Error::LambdaNotOnGrid(lambda))
    }

    pub fn target_values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.target_value).collect()
    }

    pub fn obj_values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.obj_value).collect()
    }
}

/// Seed for stream `index` of a run seeded with `seed` (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Maximizes the penalized objective of `fitted` at every grid point.
///
/// Grid point `j` is optimized with seed `derive_seed(cfg.seed, j)`, so the
/// path does not depend on thread scheduling. `n` is the size of the sample
/// behind `fitted`.
pub fn sweep_fitted(
    fitted: &FittedObjective,
    n: usize,
    grid: &LambdaGrid,
    t: &TargetFunctional,
    s: &SimilarityMeasure,
    cfg: &OptimizerConfig,
) -> Result<LambdaPath> {
    cfg.validate()?;
    let space = fitted.space();
    let entries = grid
        .values()
        .par_iter()
        .enumerate()
        .map(|(j, &lambda)| {
            let cfg = OptimizerConfig { seed: derive_seed(cfg.seed, j as u64), ..cfg.clone() };
            let obj = |r: &DecisionRule| fitted.evaluate(r, lambda, t, s).map_or(f64::NAN, |e| e.objective);
            let best = maximize(obj, space, &cfg)?;
            let eval = fitted.evaluate(&best.rule, lambda, t, s)?;
            Ok(PathEntry {
                lambda,
                rule: best.rule,
                obj_value: eval.objective,
                target_value: eval.target,
                unfairness: eval.unfairness,
                max_unfairness: eval.max_unfairness,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LambdaPath { grid: grid.clone(), entries, n })
}

/// Fits `estimator` on `sample` and maximizes the resulting objective at
/// every grid point. Diagnostics are in-sample.
pub fn sweep(
    sample: &TrainingSample,
    grid: &LambdaGrid,
    t: &TargetFunctional,
    s: &SimilarityMeasure,
    cfg: &OptimizerConfig,
    estimator: &Estimator,
) -> Result<LambdaPath> {
    cfg.validate()?;
    let fitted = FittedObjective::fit(sample, estimator)?;
    sweep_fitted(&fitted, sample.len(), grid, t, s, cfg)
}

/// Re-evaluates every rule of `path` against another fitted objective (for
/// instance a held-out sample or a known array).
pub fn reevaluate(
    path: &LambdaPath,
    fitted: &FittedObjective,
    t: &TargetFunctional,
    s: &SimilarityMeasure,
) -> Result<Vec<RuleEvaluation>> {
    path.entries.iter().map(|e| fitted.evaluate(&e.rule, e.lambda, t, s)).collect()
}

/// Loss in the target from penalizing with `lambda` instead of 0:
/// `target(0) - target(lambda)`. May be negative.
pub fn delta_n(path: &LambdaPath, lambda: f64) -> Result<f64> {
    let at = path.entry(lambda)?;
    Ok(path.entries[0].target_value - at.target_value)
}

/// Outcome of the budget rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetSelection {
    pub beta: f64,
    pub c_n: f64,
    /// `beta (1 - c_n)`.
    pub threshold: f64,
    pub chosen_lambda: f64,
    pub chosen_index: usize,
    /// `(lambda, delta_n(lambda))` for every grid point.
    pub deltas: Vec<(f64, f64)>,
}

/// Slack `sqrt(ln(n) / n)`.
pub fn slack(n: usize) -> f64 {
    let n = n as f64;
    (n.ln() / n).sqrt()
}

/// Budget rule on raw target values along a grid (the first grid point must
/// be `lambda = 0`).
pub fn select_budget_from_targets(lambdas: &[f64], targets: &[f64], n: usize, beta: f64) -> Result<BudgetSelection> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::InvalidBudget(beta));
    }
    if n < 2 {
        return Err(Error::InvalidConfig(format!("budget selection needs n >= 2, got {n}")));
    }
    if lambdas.len() != targets.len() || lambdas.first() != Some(&0.0) {
        return Err(Error::InvalidGrid("targets must cover a grid starting at 0".into()));
    }
    let c_n = slack(n);
    let threshold = beta * (1.0 - c_n);
    let deltas: Vec<(f64, f64)> = lambdas
        .iter()
        .zip(targets)
        .enumerate()
        .map(|(i, (&l, &t))| (l, if i == 0 { 0.0 } else { targets[0] - t }))
        .collect();
    let chosen_index = if c_n >= 1.0 { 0 } else { deltas.iter().rposition(|&(_, d)| d <= threshold).unwrap_or(0) };
    Ok(BudgetSelection { beta, c_n, threshold, chosen_lambda: lambdas[chosen_index], chosen_index, deltas })
}

/// Largest grid `lambda` whose loss `delta_n` is at most `beta (1 - c_n)`.
pub fn select_lambda_budget(path: &LambdaPath, beta: f64) -> Result<BudgetSelection> {
    select_budget_from_targets(path.grid.values(), &path.target_values(), path.n, beta)
}

/// Largest `lambda` with `deltas[lambda] <= beta`, the selection one would make
/// knowing the true losses.
pub fn oracle_lambda(lambdas: &[f64], deltas: &[f64], beta: f64) -> Option<f64> {
    lambdas.iter().zip(deltas).filter(|(_, &d)| d <= beta).map(|(&l, _)| l).last()
}

/// Piecewise-linear interpolation of the optimal objective values at
/// `lambda`, defined on the uniform grid `{0, 1/m, ..., 1}` only.
pub fn interpolate_value(path: &LambdaPath, lambda: f64) -> Result<f64> {
    let m = path.grid.uniform_m().ok_or(Error::NonUniformGrid)?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidLambda(lambda));
    }
    let values = path.obj_values();
    let nearest = (lambda * m as f64).round() as usize;
    if (lambda - nearest as f64 / m as f64).abs() <= GRID_TOLERANCE {
        return Ok(values[nearest]);
    }
    let i = ((lambda * m as f64).floor() as usize).min(m - 1);
    let left = i as f64 / m as f64;
    let slope = (values[i + 1] - values[i]) * m as f64;
    Ok(values[i] + slope * (lambda - left))
}

/// Generic piecewise-linear interpolation through `(xs, ys)`, `xs` strictly
/// increasing; constant extrapolation outside the range.
pub fn interpolate_linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    assert_eq!(xs.len(), ys.len());
    assert!(!xs.is_empty());
    if x <= xs[0] {
        return ys[0];
    }
    let k = xs.partition_point(|&v| v <= x);
    if k >= xs.len() {
        return ys[ys.len() - 1];
    }
    let (x0, x1, y0, y1) = (xs[k - 1], xs[k], ys[k - 1], ys[k]);
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}
