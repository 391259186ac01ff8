//! Estimating the conditional-cdf array from a training sample, and
//! inverse-propensity-weighted estimates of implied cdfs.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::distributions::{project_mab, MonotoneStep, StepCdf, SupportInterval, MASS_TOLERANCE};
use crate::error::{Error, Result};
use crate::functionals::{SimilarityMeasure, TargetFunctional};
use crate::objective::{evaluate_implied, CondCdfArray, CovariateSpace, DecisionRule, ImpliedCdfs, RuleEvaluation};

/// One observation: outcome, covariate level, group level and treatment, the
/// latter three as 0-based indices into the sample's [`CovariateSpace`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub y: f64,
    pub x: usize,
    pub z: usize,
    pub d: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    space: Arc<CovariateSpace>,
    support: SupportInterval,
    records: Vec<TrainingRecord>,
}

impl TrainingSample {
    pub fn new(space: Arc<CovariateSpace>, support: SupportInterval, records: Vec<TrainingRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptySample);
        }
        for (index, r) in records.iter().enumerate() {
            let reason = if !support.contains(r.y) {
                format!("outcome {} outside [{}, {}]", r.y, support.a(), support.b())
            } else if r.x >= space.nx() {
                format!("x index {} out of range", r.x)
            } else if r.z >= space.nz() {
                format!("z index {} out of range", r.z)
            } else if r.d >= space.k() {
                format!("treatment {} out of range 1..={}", r.d + 1, space.k())
            } else {
                continue;
            };
            return Err(Error::InvalidRecord { index, reason });
        }
        Ok(Self { space, support, records })
    }

    pub fn space(&self) -> &Arc<CovariateSpace> {
        &self.space
    }

    pub fn support(&self) -> SupportInterval {
        self.support
    }

    pub fn records(&self) -> &[TrainingRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Record counts per cell, indexed by [`CovariateSpace::cell`].
    pub fn cell_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.space.n_cells()];
        for r in &self.records {
            counts[self.space.cell(r.d, r.x, r.z)] += 1;
        }
        counts
    }

    /// Record counts per `(x, z)`, row-major.
    pub fn xz_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.space.nx() * self.space.nz()];
        for r in &self.records {
            counts[r.x * self.space.nz() + r.z] += 1;
        }
        counts
    }
}

/// Plug-in array: empirical cdf of the outcomes in each `(treatment, x, z)`
/// cell, a point mass at `b` for empty cells, and relative frequencies for
/// `p(x, z)`.
pub fn fit_plugin(sample: &TrainingSample) -> CondCdfArray {
    let space = sample.space();
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); space.n_cells()];
    for r in sample.records() {
        buckets[space.cell(r.d, r.x, r.z)].push(r.y);
    }
    let support = sample.support();
    let cells = buckets
        .iter()
        .map(|ys| {
            if ys.is_empty() { StepCdf::point_mass(support.b(), support) } else { StepCdf::from_samples(ys, support) }
                .expect("records validated against the support")
        })
        .collect();
    let n = sample.len() as f64;
    let pxz = sample.xz_counts().into_iter().map(|c| c as f64 / n).collect();
    CondCdfArray::new(space.clone(), cells, pxz).expect("plug-in array is valid by construction")
}

/// Relative frequency of each `z` level.
pub fn empirical_pz(sample: &TrainingSample) -> Vec<f64> {
    let mut counts = vec![0usize; sample.space().nz()];
    for r in sample.records() {
        counts[r.z] += 1;
    }
    let n = sample.len() as f64;
    counts.into_iter().map(|c| c as f64 / n).collect()
}

/// Treatment probabilities `e_i(x, z)` and group masses `p_Z(z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityModel {
    /// Indexed by [`CovariateSpace::cell`].
    e: Vec<f64>,
    pz: Vec<f64>,
    /// Whether the model came from cell frequencies of a sample.
    estimated: bool,
}

impl PropensityModel {
    /// `e` indexed by [`CovariateSpace::cell`]; `sum_i e_i(x, z) = 1` for
    /// every `(x, z)` and `sum_z p_Z(z) = 1`.
    pub fn new(space: &CovariateSpace, e: Vec<f64>, pz: Vec<f64>) -> Result<Self> {
        if e.len() != space.n_cells() || pz.len() != space.nz() {
            return Err(Error::InvalidPropensity("table sizes do not match the covariate space".into()));
        }
        if e.iter().chain(&pz).any(|v| !(v.is_finite() && (0.0..=1.0).contains(v))) {
            return Err(Error::InvalidPropensity("probabilities must lie in [0, 1]".into()));
        }
        for x in 0..space.nx() {
            for z in 0..space.nz() {
                let sum: f64 = (0..space.k()).map(|i| e[space.cell(i, x, z)]).sum();
                if (sum - 1.0).abs() > MASS_TOLERANCE {
                    return Err(Error::InvalidPropensity(format!(
                        "treatment probabilities at x={}, z={} sum to {sum}",
                        space.x_levels()[x],
                        space.z_levels()[z]
                    )));
                }
            }
        }
        let total: f64 = pz.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidPropensity(format!("group masses sum to {total}")));
        }
        Ok(Self { e, pz, estimated: false })
    }

    /// Propensities that depend on `z` only, the same at every `x`:
    /// `by_group[z][i] = P(D = i | Z = z)`.
    pub fn from_group_assignment(space: &CovariateSpace, by_group: &[Vec<f64>], pz: Vec<f64>) -> Result<Self> {
        if by_group.len() != space.nz() || by_group.iter().any(|row| row.len() != space.k()) {
            return Err(Error::InvalidPropensity("table sizes do not match the covariate space".into()));
        }
        let mut e = vec![0.0; space.n_cells()];
        for i in 0..space.k() {
            for x in 0..space.nx() {
                for z in 0..space.nz() {
                    e[space.cell(i, x, z)] = by_group[z][i];
                }
            }
        }
        Self::new(space, e, pz)
    }

    /// Cell-frequency estimates `e_i(x, z) = |cell(i, x, z)| / |{x, z}|` and
    /// the empirical group masses. Unobserved `(x, z)` get zero propensity.
    pub fn estimate(sample: &TrainingSample) -> Self {
        let space = sample.space();
        let cells = sample.cell_counts();
        let xz = sample.xz_counts();
        let mut e = vec![0.0; space.n_cells()];
        for i in 0..space.k() {
            for x in 0..space.nx() {
                for z in 0..space.nz() {
                    let denom = xz[x * space.nz() + z];
                    if denom > 0 {
                        let c = space.cell(i, x, z);
                        e[c] = cells[c] as f64 / denom as f64;
                    }
                }
            }
        }
        Self { e, pz: empirical_pz(sample), estimated: true }
    }

    pub fn e(&self, space: &CovariateSpace, treatment: usize, x: usize, z: usize) -> f64 {
        self.e[space.cell(treatment, x, z)]
    }

    pub fn pz(&self, z: usize) -> f64 {
        self.pz[z]
    }

    fn zero_error(&self, space: &CovariateSpace, r: &TrainingRecord) -> Error {
        let (treatment, x, z) = (r.d + 1, space.x_levels()[r.x].clone(), space.z_levels()[r.z].clone());
        if self.estimated {
            Error::ZeroEstimatedPropensity { treatment, x, z }
        } else {
            Error::ZeroPropensity { treatment, x, z }
        }
    }

    /// `1 / (e_d(x, z) p_Z(z))` for one record.
    fn inverse_weight(&self, space: &CovariateSpace, r: &TrainingRecord) -> Result<f64> {
        let denom = self.e(space, r.d, r.x, r.z) * self.pz[r.z];
        if denom > 0.0 {
            Ok(1.0 / denom)
        } else {
            Err(self.zero_error(space, r))
        }
    }
}

fn check_prop_space(sample: &TrainingSample, prop: &PropensityModel) -> Result<()> {
    if prop.e.len() == sample.space().n_cells() && prop.pz.len() == sample.space().nz() {
        Ok(())
    } else {
        Err(Error::SpaceMismatch)
    }
}

fn check_rule(sample: &TrainingSample, rule: &DecisionRule) -> Result<()> {
    if **rule.space() == **sample.space() {
        Ok(())
    } else {
        Err(Error::SpaceMismatch)
    }
}

/// Inverse-propensity-weighted estimate of the group cdf before projection:
/// an increment `rule_d(x) / (n e_d(x, z) p_Z(z))` at the outcome of every
/// record in group `z`. Its value at `c` is unbiased for `<rule, F>_z(c)`.
pub fn ipw_group_raw(
    sample: &TrainingSample,
    rule: &DecisionRule,
    z: &str,
    prop: &PropensityModel,
) -> Result<MonotoneStep> {
    check_rule(sample, rule)?;
    check_prop_space(sample, prop)?;
    let space = sample.space();
    let zi = space.z_index(z).ok_or_else(|| Error::UnknownGroup(z.to_string()))?;
    let n = sample.len() as f64;
    let mut atoms = Vec::new();
    for r in sample.records().iter().filter(|r| r.z == zi) {
        let w = prop.inverse_weight(space, r)?;
        atoms.push((r.y, rule.prob(r.x, r.d) * w / n));
    }
    MonotoneStep::new(sample.support(), atoms)
}

/// Projected inverse-propensity-weighted group cdf.
pub fn ipw_group_cdf(sample: &TrainingSample, rule: &DecisionRule, z: &str, prop: &PropensityModel) -> Result<StepCdf> {
    ipw_group_raw(sample, rule, z, prop).map(|g| project_mab(&g))
}

/// Reusable evaluator of inverse-propensity-weighted objectives for one
/// sample and propensity model.
///
/// Outcomes are sorted once into a grid that always ends with `b`; each rule
/// then costs one pass over the records plus one pass over the grid per group.
#[derive(Debug, Clone)]
pub struct IpwEvaluator {
    space: Arc<CovariateSpace>,
    grid: Vec<f64>,
    record_slot: Vec<usize>,
    records: Vec<TrainingRecord>,
    inverse_weights: Vec<f64>,
    pz: Vec<f64>,
    n: f64,
}

impl IpwEvaluator {
    pub fn new(sample: &TrainingSample, prop: &PropensityModel) -> Result<Self> {
        check_prop_space(sample, prop)?;
        let space = sample.space();
        let inverse_weights =
            sample.records().iter().map(|r| prop.inverse_weight(space, r)).collect::<Result<Vec<_>>>()?;
        let b = sample.support().b();
        let mut grid: Vec<f64> = sample.records().iter().map(|r| r.y).collect();
        grid.push(b);
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        let record_slot = sample.records().iter().map(|r| grid.partition_point(|g| *g < r.y)).collect();
        Ok(Self {
            space: space.clone(),
            grid,
            record_slot,
            records: sample.records().to_vec(),
            inverse_weights,
            pz: prop.pz.clone(),
            n: sample.len() as f64,
        })
    }

    /// Projected group estimates and their `p_Z`-weighted population mixture.
    pub fn implied(&self, rule: &DecisionRule) -> Result<ImpliedCdfs> {
        if **rule.space() != *self.space {
            return Err(Error::SpaceMismatch);
        }
        let len = self.grid.len();
        let mut groups = vec![vec![0.0; len]; self.space.nz()];
        for ((r, &slot), &w) in self.records.iter().zip(&self.record_slot).zip(&self.inverse_weights) {
            groups[r.z][slot] += rule.prob(r.x, r.d) * w / self.n;
        }
        for group in &mut groups {
            project_dense(group);
        }
        let mut population = vec![0.0; len];
        for (group, &pz) in groups.iter().zip(&self.pz) {
            if pz > 0.0 {
                for (p, g) in population.iter_mut().zip(group) {
                    *p += pz * g;
                }
            }
        }
        Ok(ImpliedCdfs { population, groups, group_mass: self.pz.clone() })
    }

    pub fn evaluate(
        &self,
        rule: &DecisionRule,
        lambda: f64,
        t: &TargetFunctional,
        s: &SimilarityMeasure,
    ) -> Result<RuleEvaluation> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidLambda(lambda));
        }
        let implied = self.implied(rule)?;
        Ok(evaluate_implied(&self.grid, &implied, lambda, t, s))
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn space(&self) -> &Arc<CovariateSpace> {
        &self.space
    }
}

/// In-place projection of increments on a grid whose last point is `b`.
fn project_dense(increments: &mut [f64]) {
    let last = increments.len() - 1;
    let mut cum = 0.0;
    for (idx, inc) in increments.iter_mut().enumerate() {
        if idx == last {
            *inc = 1.0 - cum;
            break;
        }
        let take = inc.min(1.0 - cum).max(0.0);
        *inc = take;
        cum += take;
    }
}

/// Penalized objective with projected inverse-propensity-weighted cdfs in
/// place of the true implied cdfs.
pub fn ipw_objective(
    sample: &TrainingSample,
    rule: &DecisionRule,
    lambda: f64,
    t: &TargetFunctional,
    s: &SimilarityMeasure,
    prop: &PropensityModel,
) -> Result<f64> {
    check_rule(sample, rule)?;
    IpwEvaluator::new(sample, prop)?.evaluate(rule, lambda, t, s).map(|e| e.objective)
}

/// [`ipw_objective`] with cell-frequency propensities and empirical group
/// masses estimated from the sample itself.
pub fn ipw_objective_estimated(
    sample: &TrainingSample,
    rule: &DecisionRule,
    lambda: f64,
    t: &TargetFunctional,
    s: &SimilarityMeasure,
) -> Result<f64> {
    ipw_objective(sample, rule, lambda, t, s, &PropensityModel::estimate(sample))
}
