//! Decision rules, the outcome distributions they imply, and the
//! fairness-penalized objective
//!
//! ```text
//! omega(rule) = (1 - lambda) * T(<rule, F>) - lambda * max_z S(<rule, F>_z, <rule, F>)
//! ```
//!
//! where `<rule, F>` is the population cdf obtained by rolling out `rule` and
//! `<rule, F>_z` the cdf within protected group `z`.
//!
//! All cell cdfs of a [`CondCdfArray`] are indexed against one merged sorted
//! grid of atom locations. Implied cdfs are then dense mass vectors on that
//! grid, so a mixture costs one scatter-add over the atoms and sup-distances
//! are a single cumulative scan.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::distributions::{StepCdf, SupportInterval, MASS_TOLERANCE};
use crate::error::{Error, Result};
use crate::functionals::{SimilarityMeasure, TargetFunctional};

/// Finite covariate levels `x`, protected-group levels `z` and the number of
/// treatments `k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CovariateSpace {
    x_levels: Vec<String>,
    z_levels: Vec<String>,
    k: usize,
}

impl CovariateSpace {
    pub fn new(x_levels: Vec<String>, z_levels: Vec<String>, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidSpace(format!("need at least two treatments, got {k}")));
        }
        for (name, levels) in [("x", &x_levels), ("z", &z_levels)] {
            if levels.is_empty() {
                return Err(Error::InvalidSpace(format!("no {name} levels")));
            }
            let mut sorted: Vec<&String> = levels.iter().collect();
            sorted.sort();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidSpace(format!("duplicate {name} level")));
            }
        }
        Ok(Self { x_levels, z_levels, k })
    }

    pub fn x_levels(&self) -> &[String] {
        &self.x_levels
    }

    pub fn z_levels(&self) -> &[String] {
        &self.z_levels
    }

    pub fn nx(&self) -> usize {
        self.x_levels.len()
    }

    pub fn nz(&self) -> usize {
        self.z_levels.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn x_index(&self, label: &str) -> Option<usize> {
        self.x_levels.iter().position(|l| l == label)
    }

    pub fn z_index(&self, label: &str) -> Option<usize> {
        self.z_levels.iter().position(|l| l == label)
    }

    /// Flat index of cell `(treatment, x, z)`, treatments 0-based.
    pub fn cell(&self, treatment: usize, x: usize, z: usize) -> usize {
        (treatment * self.nx() + x) * self.nz() + z
    }

    pub fn n_cells(&self) -> usize {
        self.k * self.nx() * self.nz()
    }
}

/// Randomized treatment assignment: one probability vector over the `k`
/// treatments per covariate level.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRule {
    space: Arc<CovariateSpace>,
    probs: Vec<f64>,
}

impl DecisionRule {
    pub fn new(space: Arc<CovariateSpace>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != space.nx() || rows.iter().any(|r| r.len() != space.k()) {
            return Err(Error::SpaceMismatch);
        }
        Self::from_flat(space, rows.into_iter().flatten().collect())
    }

    /// Row-major `|x| * k` probabilities.
    pub fn from_flat(space: Arc<CovariateSpace>, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != space.nx() * space.k() {
            return Err(Error::SpaceMismatch);
        }
        for (row, chunk) in probs.chunks(space.k()).enumerate() {
            let sum: f64 = chunk.iter().sum();
            if chunk.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (sum - 1.0).abs() > MASS_TOLERANCE {
                return Err(Error::InvalidSimplex { row });
            }
        }
        Ok(Self { space, probs })
    }

    /// Uniform randomization over all treatments at every `x`.
    pub fn uniform(space: Arc<CovariateSpace>) -> Self {
        let k = space.k();
        let probs = vec![1.0 / k as f64; space.nx() * k];
        Self { space, probs }
    }

    /// Deterministic rule assigning `treatments[x]` (0-based) at each `x`.
    pub fn deterministic(space: Arc<CovariateSpace>, treatments: &[usize]) -> Result<Self> {
        if treatments.len() != space.nx() || treatments.iter().any(|&t| t >= space.k()) {
            return Err(Error::SpaceMismatch);
        }
        let k = space.k();
        let mut probs = vec![0.0; space.nx() * k];
        for (x, &t) in treatments.iter().enumerate() {
            probs[x * k + t] = 1.0;
        }
        Ok(Self { space, probs })
    }

    pub fn space(&self) -> &Arc<CovariateSpace> {
        &self.space
    }

    pub fn prob(&self, x: usize, treatment: usize) -> f64 {
        self.probs[x * self.space.k() + treatment]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        let k = self.space.k();
        &self.probs[x * k..(x + 1) * k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.probs.chunks(self.space.k())
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.probs
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    fn same_space(&self, other: &Arc<CovariateSpace>) -> bool {
        Arc::ptr_eq(&self.space, other) || *self.space == **other
    }
}

/// `d1(r1, r2) = sum_x ||r1(x) - r2(x)||_1`.
pub fn d1(r1: &DecisionRule, r2: &DecisionRule) -> Result<f64> {
    if !r1.same_space(&r2.space) {
        return Err(Error::SpaceMismatch);
    }
    Ok(r1.probs.iter().zip(&r2.probs).map(|(a, b)| (a - b).abs()).sum())
}

/// Smallest `d1` distance from `rule` to any element of `set`.
pub fn d1_to_set(rule: &DecisionRule, set: &[DecisionRule]) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    set.iter().map(|r| d1(rule, r)).try_fold(f64::INFINITY, |acc, d| d.map(|d| acc.min(d)))
}

/// Conditional outcome cdfs `F^i(.|x, z)` for every treatment and cell,
/// together with the joint covariate mass `p(x, z)`.
#[derive(Debug, Clone)]
pub struct CondCdfArray {
    space: Arc<CovariateSpace>,
    support: SupportInterval,
    cells: Vec<StepCdf>,
    pxz: Vec<f64>,
    grid: Vec<f64>,
    grid_index: Vec<Vec<usize>>,
}

impl CondCdfArray {
    /// `cells` is indexed by [`CovariateSpace::cell`], `pxz` row-major over
    /// `(x, z)`. `pxz` must sum to one within `1e-9` and is renormalized.
    pub fn new(space: Arc<CovariateSpace>, cells: Vec<StepCdf>, pxz: Vec<f64>) -> Result<Self> {
        if cells.len() != space.n_cells() {
            return Err(Error::InvalidArray(format!("expected {} cell cdfs, got {}", space.n_cells(), cells.len())));
        }
        if pxz.len() != space.nx() * space.nz() {
            return Err(Error::InvalidArray(format!(
                "expected {} covariate masses, got {}",
                space.nx() * space.nz(),
                pxz.len()
            )));
        }
        let support = cells[0].support();
        if cells.iter().any(|c| c.support() != support) {
            return Err(Error::SupportMismatch);
        }
        if pxz.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidArray("negative or non-finite covariate mass".into()));
        }
        let total: f64 = pxz.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::WeightMismatch { sum: total });
        }
        let pxz = pxz.into_iter().map(|p| p / total).collect();

        let mut grid: Vec<f64> = cells.iter().flat_map(|c| c.points().iter().copied()).collect();
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        let grid_index =
            cells.iter().map(|c| c.points().iter().map(|p| grid.partition_point(|g| g < p)).collect()).collect();
        Ok(Self { space, support, cells, pxz, grid, grid_index })
    }

    pub fn space(&self) -> &Arc<CovariateSpace> {
        &self.space
    }

    pub fn support(&self) -> SupportInterval {
        self.support
    }

    /// `F^i(.|x, z)` with 0-based treatment index.
    pub fn cdf(&self, treatment: usize, x: usize, z: usize) -> &StepCdf {
        &self.cells[self.space.cell(treatment, x, z)]
    }

    pub fn cells(&self) -> &[StepCdf] {
        &self.cells
    }

    pub fn pxz(&self, x: usize, z: usize) -> f64 {
        self.pxz[x * self.space.nz() + z]
    }

    pub fn pxz_table(&self) -> &[f64] {
        &self.pxz
    }

    pub fn p_x(&self, x: usize) -> f64 {
        (0..self.space.nz()).map(|z| self.pxz(x, z)).sum()
    }

    pub fn p_z(&self, z: usize) -> f64 {
        (0..self.space.nx()).map(|x| self.pxz(x, z)).sum()
    }

    /// `p(x | z)`, zero when group `z` has no mass.
    pub fn p_x_given_z(&self, x: usize, z: usize) -> f64 {
        let pz = self.p_z(z);
        if pz > 0.0 {
            self.pxz(x, z) / pz
        } else {
            0.0
        }
    }

    /// Merged sorted atom locations of all cells.
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    fn check_rule(&self, rule: &DecisionRule) -> Result<()> {
        if rule.same_space(&self.space) {
            Ok(())
        } else {
            Err(Error::SpaceMismatch)
        }
    }

    /// Dense implied cdfs on [`grid`](Self::grid).
    pub fn implied_dense(&self, rule: &DecisionRule) -> Result<ImpliedCdfs> {
        self.check_rule(rule)?;
        let space = &self.space;
        let n = self.grid.len();
        let mut groups = vec![vec![0.0; n]; space.nz()];
        for z in 0..space.nz() {
            let group = &mut groups[z];
            for x in 0..space.nx() {
                let pxz = self.pxz(x, z);
                if pxz == 0.0 {
                    continue;
                }
                for i in 0..space.k() {
                    let w = rule.prob(x, i) * pxz;
                    if w == 0.0 {
                        continue;
                    }
                    let c = space.cell(i, x, z);
                    for (&g, &m) in self.grid_index[c].iter().zip(self.cells[c].masses()) {
                        group[g] += w * m;
                    }
                }
            }
        }
        let mut population = vec![0.0; n];
        let mut group_mass = Vec::with_capacity(space.nz());
        for (z, group) in groups.iter_mut().enumerate() {
            for (p, g) in population.iter_mut().zip(group.iter()) {
                *p += g;
            }
            let pz = self.p_z(z);
            group_mass.push(pz);
            if pz > 0.0 {
                group.iter_mut().for_each(|g| *g /= pz);
            }
        }
        Ok(ImpliedCdfs { population, groups, group_mass })
    }

    fn to_step_cdf(&self, masses: &[f64]) -> StepCdf {
        let (points, masses): (Vec<f64>, Vec<f64>) =
            self.grid.iter().zip(masses).filter(|(_, &m)| m > 0.0).map(|(&p, &m)| (p, m)).unzip();
        StepCdf::from_sorted_parts(self.support, points, masses)
    }
}

/// Population and per-group implied cdfs as mass vectors on an array grid.
#[derive(Debug, Clone)]
pub struct ImpliedCdfs {
    pub population: Vec<f64>,
    /// Per `z`; all zeros when the group has no mass.
    pub groups: Vec<Vec<f64>>,
    pub group_mass: Vec<f64>,
}

/// Population cdf `<rule, F> = sum_{x,z,i} rule_i(x) p(x, z) F^i(.|x, z)`.
pub fn implied_cdf(rule: &DecisionRule, arr: &CondCdfArray) -> Result<StepCdf> {
    let dense = arr.implied_dense(rule)?;
    Ok(arr.to_step_cdf(&dense.population))
}

/// Group cdf `<rule, F>_z = sum_{x,i} rule_i(x) p(x | z) F^i(.|x, z)`.
pub fn implied_cdf_group(rule: &DecisionRule, arr: &CondCdfArray, z: &str) -> Result<StepCdf> {
    let zi = arr.space.z_index(z).ok_or_else(|| Error::UnknownGroup(z.to_string()))?;
    if arr.p_z(zi) <= 0.0 {
        return Err(Error::ZeroGroupMass(z.to_string()));
    }
    let dense = arr.implied_dense(rule)?;
    Ok(arr.to_step_cdf(&dense.groups[zi]))
}

/// Target value, per-group unfairness and penalized objective of one rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleEvaluation {
    pub objective: f64,
    pub target: f64,
    /// `S(<rule, F>_z, <rule, F>)` per group; `None` for empty groups.
    pub unfairness: Vec<Option<f64>>,
    pub max_unfairness: f64,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if (0.0..=1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(Error::InvalidLambda(lambda))
    }
}

/// Assembles the penalized objective from dense implied cdfs.
pub fn evaluate_implied(
    grid: &[f64],
    implied: &ImpliedCdfs,
    lambda: f64,
    t: &TargetFunctional,
    s: &SimilarityMeasure,
) -> RuleEvaluation {
    let target = t.evaluate_atoms(grid, &implied.population);
    let unfairness: Vec<Option<f64>> = implied
        .groups
        .iter()
        .zip(&implied.group_mass)
        .map(|(g, &mass)| (mass > 0.0).then(|| s.evaluate_aligned(grid, g, &implied.population)))
        .collect();
    let max_unfairness = unfairness.iter().flatten().copied().fold(0.0, f64::max);
    let objective = (1.0 - lambda) * target - lambda * max_unfairness;
    RuleEvaluation { objective, target, unfairness, max_unfairness }
}

/// Full diagnostics of `rule` under the penalized objective.
pub fn evaluate_rule(
    rule: &DecisionRule,
    arr: &CondCdfArray,
    lambda: f64,
    t: &TargetFunctional,
    s: &SimilarityMeasure,
) -> Result<RuleEvaluation> {
    check_lambda(lambda)?;
    let implied = arr.implied_dense(rule)?;
    Ok(evaluate_implied(arr.grid(), &implied, lambda, t, s))
}

/// Penalized objective. Groups with zero mass are left out of the max.
pub fn omega(
    rule: &DecisionRule,
    arr: &CondCdfArray,
    lambda: f64,
    t: &TargetFunctional,
    s: &SimilarityMeasure,
) -> Result<f64> {
    evaluate_rule(rule, arr, lambda, t, s).map(|e| e.objective)
}
