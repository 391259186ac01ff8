//! Derivative-free maximization over decision rules.
//!
//! Every row of a rule lives on the probability simplex. Rows are mapped to
//! `k - 1` unconstrained coordinates through the softmax with the last logit
//! pinned at zero, and a Nelder-Mead search runs in that space, so every
//! probe handed to the objective is a valid rule. Low-dimensional problems
//! are searched jointly; above [`JOINT_DIMENSION_LIMIT`] coordinates the
//! search cycles over one covariate row at a time.
//!
//! The softmax never reaches a face of the simplex, so the final rule is
//! polished by zeroing probabilities below [`SNAP_THRESHOLD`] whenever that
//! does not lower the objective.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{CovariateSpace, DecisionRule};

/// Largest `(k - 1) * |x|` searched in one joint simplex.
pub const JOINT_DIMENSION_LIMIT: usize = 40;

/// Probabilities below this are candidates for snapping to zero.
pub const SNAP_THRESHOLD: f64 = 1e-3;

const INITIAL_STEP: f64 = 0.5;
const REFLECTION: f64 = 1.0;
const EXPANSION: f64 = 2.0;
const CONTRACTION: f64 = 0.5;
const SHRINK: f64 = 0.5;
const MAX_SWEEPS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Independent searches; the best result wins.
    pub restarts: usize,
    /// Random rules drawn per restart; the best one seeds the search.
    pub candidate_starts: usize,
    /// Nelder-Mead iterations per covariate row.
    pub max_iters: usize,
    /// Stop once the objective spread over the simplex is at most this.
    pub ftol: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { restarts: 1, candidate_starts: 50, max_iters: 500, ftol: 1e-8, seed: 0 }
    }
}

impl OptimizerConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.candidate_starts == 0 || self.max_iters == 0 {
            return Err(Error::InvalidConfig("restarts, candidate_starts and max_iters must be positive".into()));
        }
        if !(self.ftol.is_finite() && self.ftol > 0.0) {
            return Err(Error::InvalidConfig(format!("ftol must be positive, got {}", self.ftol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub rule: DecisionRule,
    pub value: f64,
    pub evaluations: usize,
    /// Whether the internal tolerance was met; says nothing about global
    /// optimality.
    pub converged: bool,
}

/// RNG for restart `index` of a search seeded with `seed`.
pub fn restart_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Rule with every row drawn uniformly from the simplex (normalized
/// exponential spacings, i.e. Dirichlet(1, ..., 1)).
pub fn random_rule<R: Rng + ?Sized>(space: &Arc<CovariateSpace>, rng: &mut R) -> DecisionRule {
    let k = space.k();
    let mut probs = Vec::with_capacity(space.nx() * k);
    for _ in 0..space.nx() {
        let draws: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let total: f64 = draws.iter().sum();
        let mut acc = 0.0;
        for e in &draws[..k - 1] {
            let p = e / total;
            acc += p;
            probs.push(p);
        }
        probs.push((1.0 - acc).max(0.0));
    }
    DecisionRule::from_flat(space.clone(), probs).expect("rows are on the simplex")
}

/// Maximizes `obj` over all decision rules on `space`.
///
/// `obj` must be safe to call from several threads; restarts run in
/// parallel but the result does not depend on scheduling.
pub fn maximize<F>(obj: F, space: &Arc<CovariateSpace>, cfg: &OptimizerConfig) -> Result<OptimResult>
where
    F: Fn(&DecisionRule) -> f64 + Sync,
{
    cfg.validate()?;
    let runs: Vec<Result<OptimResult>> = (0..cfg.restarts as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = restart_rng(cfg.seed, r);
            run_restart(&obj, space, cfg, &mut rng)
        })
        .collect();
    let mut best: Option<OptimResult> = None;
    let mut evaluations = 0;
    for run in runs {
        let run = run?;
        evaluations += run.evaluations;
        // strict comparison keeps the lowest restart index on ties
        if best.as_ref().is_none_or(|b| run.value > b.value) {
            best = Some(run);
        }
    }
    let mut best = best.expect("at least one restart");
    best.evaluations = evaluations;
    Ok(best)
}

struct Counted<'a, F> {
    obj: &'a F,
    space: &'a Arc<CovariateSpace>,
    evaluations: usize,
}

impl<F: Fn(&DecisionRule) -> f64> Counted<'_, F> {
    fn rule(&mut self, rule: &DecisionRule) -> Result<f64> {
        self.evaluations += 1;
        let v = (self.obj)(rule);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteObjective(v))
        }
    }

    fn logits(&mut self, logits: &[f64]) -> Result<f64> {
        let rule = decode(self.space, logits);
        self.rule(&rule)
    }
}

fn run_restart<F>(
    obj: &F,
    space: &Arc<CovariateSpace>,
    cfg: &OptimizerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<OptimResult>
where
    F: Fn(&DecisionRule) -> f64,
{
    let mut eval = Counted { obj, space, evaluations: 0 };
    let mut start = random_rule(space, rng);
    let mut start_value = eval.rule(&start)?;
    for _ in 1..cfg.candidate_starts {
        let candidate = random_rule(space, rng);
        let v = eval.rule(&candidate)?;
        if v > start_value {
            start = candidate;
            start_value = v;
        }
    }

    let mut logits = encode(&start);
    let dim = logits.len();
    let k1 = space.k() - 1;
    let mut value = start_value;
    let converged;
    if dim <= JOINT_DIMENSION_LIMIT {
        // rebuild the simplex around the best point until that stops helping
        let nm = NelderMead { max_iters: cfg.max_iters * space.nx(), ftol: cfg.ftol };
        let mut rounds = 0;
        loop {
            let out = nm.maximize(|u| eval.logits(u), &logits, value)?;
            let gain = out.value - value;
            if out.value >= value {
                logits = out.x;
                value = out.value;
            }
            rounds += 1;
            if gain <= cfg.ftol || rounds >= MAX_SWEEPS {
                converged = out.converged && gain <= cfg.ftol;
                break;
            }
        }
    } else {
        let nm = NelderMead { max_iters: cfg.max_iters, ftol: cfg.ftol };
        let mut sweeps = 0;
        loop {
            let before = value;
            let mut all_converged = true;
            for x in 0..space.nx() {
                let block = x * k1..(x + 1) * k1;
                let init: Vec<f64> = logits[block.clone()].to_vec();
                let mut scratch = logits.clone();
                let out = nm.maximize(
                    |u| {
                        scratch[block.clone()].copy_from_slice(u);
                        eval.logits(&scratch)
                    },
                    &init,
                    value,
                )?;
                if out.value >= value {
                    logits[block].copy_from_slice(&out.x);
                    value = out.value;
                }
                all_converged &= out.converged;
            }
            sweeps += 1;
            if value - before <= cfg.ftol {
                converged = all_converged;
                break;
            }
            if sweeps >= MAX_SWEEPS {
                converged = false;
                break;
            }
        }
    }

    let mut rule = decode(space, &logits);
    let mut value_at_rule = eval.rule(&rule)?;
    if value_at_rule < start_value {
        rule = start;
        value_at_rule = start_value;
    }
    let (rule, value) = snap_to_faces(&mut eval, rule, value_at_rule)?;
    let evaluations = eval.evaluations;
    Ok(OptimResult { rule, value, evaluations, converged })
}

/// Tries zeroing small probabilities, all rows at once and then row by row,
/// keeping each change that does not decrease the objective.
fn snap_to_faces<F>(eval: &mut Counted<'_, F>, rule: DecisionRule, value: f64) -> Result<(DecisionRule, f64)>
where
    F: Fn(&DecisionRule) -> f64,
{
    let space = rule.space().clone();
    let k = space.k();
    let snap_row = |row: &[f64]| -> Option<Vec<f64>> {
        if !row.iter().any(|&p| p > 0.0 && p < SNAP_THRESHOLD) {
            return None;
        }
        let kept: Vec<f64> = row.iter().map(|&p| if p < SNAP_THRESHOLD { 0.0 } else { p }).collect();
        let total: f64 = kept.iter().sum();
        (total > 0.0).then(|| kept.iter().map(|p| p / total).collect())
    };

    let mut best = rule;
    let mut best_value = value;
    let mut all = best.as_flat().to_vec();
    let mut touched = 0;
    for x in 0..space.nx() {
        if let Some(row) = snap_row(best.row(x)) {
            all[x * k..(x + 1) * k].copy_from_slice(&row);
            touched += 1;
        }
    }
    if touched == 0 {
        return Ok((best, best_value));
    }
    let candidate = DecisionRule::from_flat(space.clone(), all)?;
    let v = eval.rule(&candidate)?;
    if v >= best_value {
        return Ok((candidate, v));
    }
    if touched > 1 {
        for x in 0..space.nx() {
            if let Some(row) = snap_row(best.row(x)) {
                let mut flat = best.as_flat().to_vec();
                flat[x * k..(x + 1) * k].copy_from_slice(&row);
                let candidate = DecisionRule::from_flat(space.clone(), flat)?;
                let v = eval.rule(&candidate)?;
                if v >= best_value {
                    best = candidate;
                    best_value = v;
                }
            }
        }
    }
    Ok((best, best_value))
}

/// Softmax logits with the last coordinate of each row pinned at 0.
fn encode(rule: &DecisionRule) -> Vec<f64> {
    const FLOOR: f64 = 1e-300;
    let k = rule.space().k();
    let mut out = Vec::with_capacity(rule.space().nx() * (k - 1));
    for row in rule.rows() {
        let last = row[k - 1].max(FLOOR);
        out.extend(row[..k - 1].iter().map(|p| (p.max(FLOOR) / last).ln()));
    }
    out
}

fn decode(space: &Arc<CovariateSpace>, logits: &[f64]) -> DecisionRule {
    let k = space.k();
    let mut probs = Vec::with_capacity(space.nx() * k);
    for chunk in logits.chunks(k - 1) {
        let max = chunk.iter().copied().fold(0.0f64, f64::max);
        let exps: Vec<f64> = chunk.iter().map(|u| (u - max).exp()).chain(std::iter::once((-max).exp())).collect();
        let total: f64 = exps.iter().sum();
        probs.extend(exps.iter().map(|e| e / total));
    }
    DecisionRule::from_flat(space.clone(), probs).expect("softmax rows are on the simplex")
}

struct NelderMead {
    max_iters: usize,
    ftol: f64,
}

struct NmOutcome {
    x: Vec<f64>,
    value: f64,
    converged: bool,
}

impl NelderMead {
    /// Maximizes `f` starting from `x0` (with known value `f0`).
    fn maximize(&self, mut f: impl FnMut(&[f64]) -> Result<f64>, x0: &[f64], f0: f64) -> Result<NmOutcome> {
        let n = x0.len();
        // minimize the negated objective
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        simplex.push((x0.to_vec(), -f0));
        for i in 0..n {
            let mut x = x0.to_vec();
            x[i] += INITIAL_STEP;
            let v = -f(&x)?;
            simplex.push((x, v));
        }
        let mut converged = false;
        for _ in 0..self.max_iters {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            if simplex[n].1 - simplex[0].1 <= self.ftol {
                converged = true;
                break;
            }
            let mut centroid = vec![0.0; n];
            for (x, _) in &simplex[..n] {
                for (c, xi) in centroid.iter_mut().zip(x) {
                    *c += xi / n as f64;
                }
            }
            let along = |t: f64, from: &[f64]| -> Vec<f64> {
                centroid.iter().zip(from).map(|(c, w)| c + t * (c - w)).collect()
            };
            let worst = simplex[n].0.clone();
            let reflected = along(REFLECTION, &worst);
            let fr = -f(&reflected)?;
            if fr < simplex[0].1 {
                let expanded = along(EXPANSION, &worst);
                let fe = -f(&expanded)?;
                simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
                continue;
            }
            if fr < simplex[n - 1].1 {
                simplex[n] = (reflected, fr);
                continue;
            }
            let (contracted, fc, accept) = if fr < simplex[n].1 {
                let xc = along(CONTRACTION * REFLECTION, &worst);
                let fc = -f(&xc)?;
                let ok = fc <= fr;
                (xc, fc, ok)
            } else {
                let xc = along(-CONTRACTION, &worst);
                let fc = -f(&xc)?;
                let ok = fc < simplex[n].1;
                (xc, fc, ok)
            };
            if accept {
                simplex[n] = (contracted, fc);
                continue;
            }
            let best = simplex[0].0.clone();
            for vertex in simplex.iter_mut().skip(1) {
                let x: Vec<f64> = best.iter().zip(&vertex.0).map(|(b, v)| b + SHRINK * (v - b)).collect();
                let v = -f(&x)?;
                *vertex = (x, v);
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (x, v) = simplex.swap_remove(0);
        Ok(NmOutcome { x, value: -v, converged })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::d1;

    fn space(nx: usize, k: usize) -> Arc<CovariateSpace> {
        let xs = (0..nx).map(|i| format!("x{i}")).collect();
        Arc::new(CovariateSpace::new(xs, vec!["z".into()], k).unwrap())
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::default().validate().is_ok());
        let bad = OptimizerConfig { ftol: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = OptimizerConfig { restarts: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn recovers_interior_target() {
        let sp = space(2, 3);
        let target = DecisionRule::new(sp.clone(), vec![vec![0.2, 0.5, 0.3], vec![0.6, 0.1, 0.3]]).unwrap();
        let res = maximize(|r| -d1(r, &target).unwrap(), &sp, &OptimizerConfig::with_seed(4)).unwrap();
        assert!(d1(&res.rule, &target).unwrap() <= 1e-3, "{:?}", res.rule);
    }

    #[test]
    fn reaches_vertices_exactly() {
        let sp = space(1, 2);
        let res = maximize(|r| -r.prob(0, 0), &sp, &OptimizerConfig::with_seed(1)).unwrap();
        assert_eq!(res.rule.row(0), &[0.0, 1.0]);
        assert_eq!(res.value, 0.0);
    }

    #[test]
    fn value_matches_rule() {
        let sp = space(3, 2);
        let f = |r: &DecisionRule| -> f64 { r.rows().map(|row| row[0] * (1.0 - row[0])).sum() };
        let res = maximize(f, &sp, &OptimizerConfig::with_seed(9)).unwrap();
        assert_eq!(res.value, f(&res.rule));
        assert!((res.value - 0.75).abs() < 1e-6);
    }

    #[test]
    fn non_finite_objective_is_reported() {
        let sp = space(1, 2);
        let err = maximize(|_| f64::NAN, &sp, &OptimizerConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NonFiniteObjective(_)));
    }

    #[test]
    fn seeded_random_rules_repeat() {
        let sp = space(4, 3);
        let a = random_rule(&sp, &mut restart_rng(7, 0));
        let b = random_rule(&sp, &mut restart_rng(7, 0));
        assert_eq!(a, b);
        let c = random_rule(&sp, &mut restart_rng(7, 1));
        assert_ne!(a, c);
        for row in a.rows() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-15);
        }
    }

    #[test]
    fn block_mode_handles_many_rows() {
        // (k - 1) * |x| = 45 exceeds the joint limit
        let sp = space(45, 2);
        let targets: Vec<f64> = (0..45).map(|x| 0.1 + 0.8 * x as f64 / 44.0).collect();
        let f = |r: &DecisionRule| -> f64 { r.rows().zip(&targets).map(|(row, t)| -(row[0] - t).powi(2)).sum() };
        let cfg = OptimizerConfig { candidate_starts: 5, ..OptimizerConfig::with_seed(2) };
        let res = maximize(f, &sp, &cfg).unwrap();
        assert!(res.value > -1e-6, "value {}", res.value);
    }
}
