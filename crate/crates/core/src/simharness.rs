//! Monte Carlo replications on the closed-form example.
//!
//! For every sample size, assignment mechanism and replication a training
//! sample is drawn with [`toy_sample`], the plug-in objective (Gini welfare
//! and KS distance) is maximized at every grid `lambda`, and the fitted rule
//! is scored against the true objective.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{SimilarityMeasure, TargetFunctional};
use crate::optimizer::OptimizerConfig;
use crate::oracle::{toy_max_value, toy_objective, toy_sample, toy_target, Mechanism, ToyParams};
use crate::selection::{derive_seed, select_budget_from_targets, sweep, Estimator, LambdaGrid};

/// Negative regrets down to this size are rounding noise and reported as 0.
pub const REGRET_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub sample_sizes: Vec<usize>,
    pub mechanisms: Vec<Mechanism>,
    pub grid: LambdaGrid,
    pub replications: usize,
    pub p: f64,
    pub seed: u64,
    pub optimizer: OptimizerConfig,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be at least 1".into()));
        }
        if self.sample_sizes.is_empty() || self.sample_sizes.contains(&0) {
            return Err(Error::InvalidConfig("sample sizes must be positive".into()));
        }
        if self.mechanisms.is_empty() {
            return Err(Error::InvalidConfig("at least one mechanism is required".into()));
        }
        ToyParams::new(self.p, 0.0)?;
        self.optimizer.validate()
    }
}

/// One replication at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRow {
    pub n: usize,
    pub mechanism: Mechanism,
    pub lambda: f64,
    pub replication: usize,
    /// Fitted probability of treatment 1.
    pub delta_hat: f64,
    /// Maximized plug-in objective.
    pub emp_value: f64,
    /// Plug-in target at the fitted rule.
    pub emp_target: f64,
    pub regret: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub sd: f64,
    pub median: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let k = values.len() as f64;
        let mean = values.iter().sum::<f64>() / k;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 1 { sorted[mid] } else { 0.5 * (sorted[mid - 1] + sorted[mid]) };
        Self { mean, sd, median }
    }
}

/// Summaries over replications for one `(n, mechanism, lambda)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimAggregate {
    pub n: usize,
    pub mechanism: Mechanism,
    pub lambda: f64,
    pub replications: usize,
    pub delta_hat: Summary,
    pub emp_value: Summary,
    pub regret: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub config: SimConfig,
    /// Ordered by sample size, mechanism, lambda and replication, following
    /// the order of the configuration.
    pub rows: Vec<SimRow>,
    pub aggregates: Vec<SimAggregate>,
}

impl SimResult {
    /// Rows of one cell in replication order.
    pub fn cell(&self, n: usize, mechanism: Mechanism, lambda: f64) -> Vec<&SimRow> {
        self.rows.iter().filter(|r| r.n == n && r.mechanism == mechanism && r.lambda == lambda).collect()
    }

    pub fn aggregate(&self, n: usize, mechanism: Mechanism, lambda: f64) -> Option<&SimAggregate> {
        self.aggregates.iter().find(|a| a.n == n && a.mechanism == mechanism && a.lambda == lambda)
    }

    /// Rows of one replication in grid order.
    pub fn replication(&self, n: usize, mechanism: Mechanism, replication: usize) -> Vec<&SimRow> {
        self.rows.iter().filter(|r| r.n == n && r.mechanism == mechanism && r.replication == replication).collect()
    }
}

/// `max_delta Omega(delta) - Omega(delta_hat)` for the closed-form example.
pub fn regret_toy(delta_hat: f64, lambda: f64, p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&delta_hat) {
        return Err(Error::InvalidConfig(format!("delta must lie in [0, 1], got {delta_hat}")));
    }
    let params = ToyParams::new(p, lambda)?;
    let r = toy_max_value(params) - toy_objective(delta_hat, params);
    Ok(if (-REGRET_GUARD..0.0).contains(&r) { 0.0 } else { r })
}

/// Seed of the sample drawn for one replication.
pub fn replication_seed(seed: u64, size_index: usize, mechanism_index: usize, replication: usize) -> u64 {
    derive_seed(derive_seed(derive_seed(seed, size_index as u64), mechanism_index as u64), replication as u64)
}

fn run_replication(cfg: &SimConfig, si: usize, mi: usize, rep: usize) -> Result<Vec<SimRow>> {
    let (n, mechanism) = (cfg.sample_sizes[si], cfg.mechanisms[mi]);
    let seed = replication_seed(cfg.seed, si, mi, rep);
    let sample = toy_sample(n, cfg.p, mechanism, seed)?;
    let opt = OptimizerConfig { seed: derive_seed(seed, u64::MAX), ..cfg.optimizer.clone() };
    let path =
        sweep(&sample, &cfg.grid, &TargetFunctional::GiniWelfare, &SimilarityMeasure::Ks, &opt, &Estimator::Plugin)?;
    path.entries
        .iter()
        .map(|e| {
            let delta_hat = e.rule.prob(0, 0);
            Ok(SimRow {
                n,
                mechanism,
                lambda: e.lambda,
                replication: rep,
                delta_hat,
                emp_value: e.obj_value,
                emp_target: e.target_value,
                regret: regret_toy(delta_hat, e.lambda, cfg.p)?,
            })
        })
        .collect()
}

/// Runs every replication; the result depends only on `cfg`.
pub fn run_simulation(cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    let (ns, nm, reps) = (cfg.sample_sizes.len(), cfg.mechanisms.len(), cfg.replications);
    let jobs: Vec<(usize, usize, usize)> =
        (0..ns).flat_map(|si| (0..nm).flat_map(move |mi| (0..reps).map(move |r| (si, mi, r)))).collect();
    let per_replication =
        jobs.par_iter().map(|&(si, mi, r)| run_replication(cfg, si, mi, r)).collect::<Result<Vec<_>>>()?;

    let nl = cfg.grid.len();
    let mut rows = Vec::with_capacity(jobs.len() * nl);
    let mut aggregates = Vec::with_capacity(ns * nm * nl);
    for si in 0..ns {
        for mi in 0..nm {
            let block = &per_replication[(si * nm + mi) * reps..(si * nm + mi + 1) * reps];
            for l in 0..nl {
                let cell: Vec<&SimRow> = block.iter().map(|rep_rows| &rep_rows[l]).collect();
                let pick = |f: fn(&SimRow) -> f64| Summary::of(&cell.iter().map(|r| f(r)).collect::<Vec<_>>());
                aggregates.push(SimAggregate {
                    n: cfg.sample_sizes[si],
                    mechanism: cfg.mechanisms[mi],
                    lambda: cfg.grid.values()[l],
                    replications: reps,
                    delta_hat: pick(|r| r.delta_hat),
                    emp_value: pick(|r| r.emp_value),
                    regret: pick(|r| r.regret),
                });
                rows.extend(cell.into_iter().cloned());
            }
        }
    }
    Ok(SimResult { config: cfg.clone(), rows, aggregates })
}

/// Budget selection in one replication, scored with the true target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    pub replication: usize,
    pub chosen_lambda: f64,
    /// `T(fitted rule at 0) - T(fitted rule at chosen lambda)` under the
    /// true distributions.
    pub true_delta: f64,
}

/// Applies the budget rule to each replication of one `(n, mechanism)` pair.
pub fn budget_outcomes(result: &SimResult, n: usize, mechanism: Mechanism, beta: f64) -> Result<Vec<SelectionOutcome>> {
    let p = result.config.p;
    (0..result.config.replications)
        .map(|rep| {
            let rows = result.replication(n, mechanism, rep);
            if rows.is_empty() {
                return Err(Error::InvalidConfig(format!("no replication for n = {n}, mechanism {mechanism}")));
            }
            let lambdas: Vec<f64> = rows.iter().map(|r| r.lambda).collect();
            let targets: Vec<f64> = rows.iter().map(|r| r.emp_target).collect();
            let sel = select_budget_from_targets(&lambdas, &targets, n, beta)?;
            let chosen = rows[sel.chosen_index];
            Ok(SelectionOutcome {
                replication: rep,
                chosen_lambda: sel.chosen_lambda,
                true_delta: toy_target(rows[0].delta_hat, p) - toy_target(chosen.delta_hat, p),
            })
        })
        .collect()
}

/// Loss of the true maximizer at each grid point relative to `lambda = 0`
/// (the smallest maximizer is used at the threshold).
pub fn true_deltas(grid: &LambdaGrid, p: f64) -> Result<Vec<f64>> {
    let base = toy_target(0.0, p);
    grid.values()
        .iter()
        .map(|&l| {
            let argmax = crate::oracle::toy_argmax(ToyParams::new(p, l)?);
            Ok(base - toy_target(argmax[0], p))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{toy_argmax, toy_threshold};

    fn small_config(reps: usize, seed: u64) -> SimConfig {
        SimConfig {
            sample_sizes: vec![100, 400],
            mechanisms: vec![Mechanism::A1, Mechanism::A2],
            grid: LambdaGrid::uniform(4).unwrap(),
            replications: reps,
            p: 0.75,
            seed,
            optimizer: OptimizerConfig::default(),
        }
    }

    #[test]
    fn regret_examples() {
        for lambda in [0.0, 0.3, 1.0] {
            let params = ToyParams::new(0.75, lambda).unwrap();
            for d in toy_argmax(params) {
                assert!(regret_toy(d, lambda, 0.75).unwrap().abs() < 1e-10);
            }
        }
        let params = ToyParams::new(0.75, 0.0).unwrap();
        let expected = toy_max_value(params) - toy_objective(0.5, params);
        assert_eq!(regret_toy(0.5, 0.0, 0.75).unwrap(), expected);
        let c = toy_threshold(0.75);
        for d in [0.0, 0.5] {
            assert!(regret_toy(d, c, 0.75).unwrap().abs() < 1e-10);
        }
        assert!(regret_toy(1.2, 0.0, 0.75).is_err());
    }

    #[test]
    fn regret_is_continuous() {
        let h = 1e-4;
        for lambda in [0.0, 0.2, 0.7] {
            let mut prev = regret_toy(0.0, lambda, 0.75).unwrap();
            for i in 1..=10_000 {
                let r = regret_toy(i as f64 * h, lambda, 0.75).unwrap();
                assert!((r - prev).abs() < 1e-4, "jump at {}", i as f64 * h);
                prev = r;
            }
        }
    }

    #[test]
    fn summary_statistics() {
        let s = Summary::of(&[1.0, 2.0, 3.0, 10.0]);
        assert_eq!(s.mean, 4.0);
        assert_eq!(s.median, 2.5);
        assert!((s.sd - (50.0_f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(Summary::of(&[5.0]), Summary { mean: 5.0, sd: 0.0, median: 5.0 });
    }

    #[test]
    fn simulation_shape_and_determinism() {
        let cfg = small_config(2, 9);
        let a = run_simulation(&cfg).unwrap();
        assert_eq!(a.rows.len(), 2 * 2 * 2 * 5);
        assert_eq!(a.aggregates.len(), 2 * 2 * 5);
        assert!(a.rows.iter().all(|r| r.regret >= -REGRET_GUARD));
        assert_eq!(a.cell(100, Mechanism::A2, 0.25).len(), 2);
        assert_eq!(a, run_simulation(&cfg).unwrap());
        assert_ne!(a.rows, run_simulation(&small_config(2, 10)).unwrap().rows);
    }

    #[test]
    fn config_validation() {
        let mut cfg = small_config(0, 1);
        assert!(run_simulation(&cfg).is_err());
        cfg.replications = 1;
        cfg.sample_sizes = vec![0];
        assert!(run_simulation(&cfg).is_err());
        cfg.sample_sizes = vec![10];
        cfg.p = 0.4;
        assert!(run_simulation(&cfg).is_err());
    }

    #[test]
    fn selection_outcomes() {
        let cfg = SimConfig { sample_sizes: vec![400], mechanisms: vec![Mechanism::A1], ..small_config(3, 4) };
        let result = run_simulation(&cfg).unwrap();
        let outcomes = budget_outcomes(&result, 400, Mechanism::A1, 10.0).unwrap();
        assert_eq!(outcomes.len(), 3);
        assert!(outcomes.iter().all(|o| o.chosen_lambda == 1.0));
        assert!(budget_outcomes(&result, 100, Mechanism::A1, 1.0).is_err());
        let deltas = true_deltas(&cfg.grid, 0.75).unwrap();
        assert_eq!(deltas[0], 0.0);
        assert!(deltas[4] > 0.04);
    }
}
