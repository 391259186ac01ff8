//! Two-group, two-treatment example with a closed-form objective.
//!
//! There is a single covariate level, groups `z = 0` (share `p > 1/2`) and
//! `z = 1`, and two treatments with outcome cdfs
//!
//! ```text
//! F^1(.|0,0) = F^2(.|0,1) = G(y) = sqrt(y)
//! F^2(.|0,0) = F^1(.|0,1) = H(y) = y^2
//! ```
//!
//! on `[0, 1]`. With Gini welfare (halved) as target and the KS distance as
//! similarity measure, a rule is the probability `delta` of treatment 1 and
//! the penalized objective, its maximizer and the optimal value are explicit.
//! Treatment 2 is better for the majority, treatment 1 for the minority, and
//! the maximizer jumps from `delta = 0` to `delta = 1/2` when `lambda` crosses
//! the threshold [`toy_threshold`].

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{StepCdf, SupportInterval};
use crate::error::{Error, Result};
use crate::estimation::{PropensityModel, TrainingRecord, TrainingSample};
use crate::objective::{CondCdfArray, CovariateSpace, DecisionRule};

/// `sup_y |G(y) - H(y)| = max_t t (1 - t^3) = 3 / (4 * 2^(2/3))`.
pub fn penalty_constant() -> f64 {
    3.0 / (4.0 * 2f64.powf(2.0 / 3.0))
}

/// Problem parameters: majority share `p` and preference parameter `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyParams {
    pub p: f64,
    pub lambda: f64,
}

impl ToyParams {
    pub fn new(p: f64, lambda: f64) -> Result<Self> {
        check_p(p)?;
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidLambda(lambda));
        }
        Ok(Self { p, lambda })
    }
}

fn check_p(p: f64) -> Result<()> {
    if p > 0.5 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("majority share must lie in (1/2, 1), got {p}")))
    }
}

pub fn toy_cdf_g(y: f64) -> f64 {
    y.clamp(0.0, 1.0).sqrt()
}

pub fn toy_cdf_h(y: f64) -> f64 {
    y.clamp(0.0, 1.0).powi(2)
}

/// Group cdf `<delta>_z(y)`: `delta G + (1 - delta) H` for `z = 0` and
/// `delta H + (1 - delta) G` for `z = 1`.
pub fn toy_group_cdf(delta: f64, z: usize, y: f64) -> f64 {
    let (g, h) = (toy_cdf_g(y), toy_cdf_h(y));
    if z == 0 {
        delta * g + (1.0 - delta) * h
    } else {
        delta * h + (1.0 - delta) * g
    }
}

/// Population cdf `p <delta>_0 + (1 - p) <delta>_1`.
pub fn toy_population_cdf(delta: f64, p: f64, y: f64) -> f64 {
    p * toy_group_cdf(delta, 0, y) + (1.0 - p) * toy_group_cdf(delta, 1, y)
}

/// Gini welfare (halved) of the population cdf under `delta`.
pub fn toy_target(delta: f64, p: f64) -> f64 {
    let q = 1.0 - 2.0 * p;
    (50.0 * delta + 27.0 * delta * delta * q * q - 2.0 * delta * p * (54.0 * p + 23.0) + p * (27.0 * p + 50.0) + 35.0)
        / 420.0
}

/// Largest KS distance between a group cdf and the population cdf.
pub fn toy_penalty(delta: f64, p: f64) -> f64 {
    p * penalty_constant() * (2.0 * delta - 1.0).abs()
}

/// Penalized objective at the rule `(delta, 1 - delta)`.
pub fn toy_objective(delta: f64, params: ToyParams) -> f64 {
    let ToyParams { p, lambda } = params;
    (1.0 - lambda) * toy_target(delta, p) - lambda * toy_penalty(delta, p)
}

/// Preference parameter `c(p)` at which the maximizer switches from 0 to 1/2.
pub fn toy_threshold(p: f64) -> f64 {
    let cbrt2 = 2f64.cbrt();
    1.0 - 630.0 * cbrt2 * p / (2.0 * p * (54.0 * p + 315.0 * cbrt2 + 100.0) - 127.0)
}

/// Absolute tolerance for treating `lambda` as equal to the threshold.
pub const THRESHOLD_TOLERANCE: f64 = 1e-12;

/// Maximizers of [`toy_objective`] over `delta` in `[0, 1]`.
pub fn toy_argmax(params: ToyParams) -> Vec<f64> {
    let c = toy_threshold(params.p);
    if (params.lambda - c).abs() <= THRESHOLD_TOLERANCE {
        vec![0.0, 0.5]
    } else if params.lambda < c {
        vec![0.0]
    } else {
        vec![0.5]
    }
}

/// `max_delta toy_objective(delta, params)`.
pub fn toy_max_value(params: ToyParams) -> f64 {
    let ToyParams { p, lambda } = params;
    if lambda <= toy_threshold(p) {
        (p * (-5.0 * (20.0 + 63.0 * 2f64.cbrt()) * lambda - 54.0 * (lambda - 1.0) * p + 100.0) - 70.0 * (lambda - 1.0))
            / 840.0
    } else {
        89.0 / 560.0 * (1.0 - lambda)
    }
}

/// Treatment-assignment mechanism of the simulated training data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mechanism {
    /// `P(D = 1 | Z = 0) = 1/4`, `P(D = 1 | Z = 1) = 3/4`: each group more
    /// often receives its better treatment.
    A1,
    /// `P(D = 1 | Z = 0) = 3/4`, `P(D = 1 | Z = 1) = 1/4`.
    A2,
}

impl Mechanism {
    /// `P(D = 1 | Z = z)`.
    pub fn treat_one_prob(&self, z: usize) -> f64 {
        match (self, z) {
            (Self::A1, 0) | (Self::A2, 1) => 0.25,
            _ => 0.75,
        }
    }
}

impl std::fmt::Display for Mechanism {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::A1 => write!(f, "A1"),
            Self::A2 => write!(f, "A2"),
        }
    }
}

impl std::str::FromStr for Mechanism {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A1" => Ok(Self::A1),
            "A2" => Ok(Self::A2),
            _ => Err(format!("unknown mechanism {s:?}")),
        }
    }
}

/// One covariate level `"0"`, groups `"0"` and `"1"`, two treatments.
pub fn toy_space() -> Arc<CovariateSpace> {
    Arc::new(CovariateSpace::new(vec!["0".into()], vec!["0".into(), "1".into()], 2).expect("valid toy space"))
}

/// Rule `(delta, 1 - delta)` on [`toy_space`] (or any one-level, two-treatment
/// space).
pub fn toy_rule(space: &Arc<CovariateSpace>, delta: f64) -> Result<DecisionRule> {
    DecisionRule::new(space.clone(), vec![vec![delta, 1.0 - delta]])
}

/// Whether cell `(treatment, z)` has outcome cdf `G` (otherwise `H`).
fn cell_is_g(treatment: usize, z: usize) -> bool {
    treatment == z
}

/// `n` i.i.d. records: `Z = 0` with probability `p`, treatment per
/// `mechanism`, outcomes by inverse transform (`U^2` for `G`, `sqrt(U)` for
/// `H`).
pub fn toy_sample(n: usize, p: f64, mechanism: Mechanism, seed: u64) -> Result<TrainingSample> {
    check_p(p)?;
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = (0..n)
        .map(|_| {
            let z = usize::from(rng.random::<f64>() >= p);
            let d = usize::from(rng.random::<f64>() >= mechanism.treat_one_prob(z));
            let u: f64 = rng.random();
            let y = if cell_is_g(d, z) { u * u } else { u.sqrt() };
            TrainingRecord { y, x: 0, z, d }
        })
        .collect();
    TrainingSample::new(toy_space(), SupportInterval::unit(), records)
}

/// True propensities of the simulated data.
pub fn toy_propensity(p: f64, mechanism: Mechanism) -> Result<PropensityModel> {
    check_p(p)?;
    let by_group: Vec<Vec<f64>> = (0..2)
        .map(|z| {
            let one = mechanism.treat_one_prob(z);
            vec![one, 1.0 - one]
        })
        .collect();
    PropensityModel::from_group_assignment(&toy_space(), &by_group, vec![p, 1.0 - p])
}

/// `cdf` discretized on `grid_points` equally spaced points `j / grid_points`,
/// `j = 1..=grid_points`, each carrying the cdf increment over the cell to its
/// left.
pub fn discretize(cdf: impl Fn(f64) -> f64, grid_points: usize) -> StepCdf {
    let m = grid_points as f64;
    let atoms = (1..=grid_points).map(|j| {
        let (lo, hi) = ((j - 1) as f64 / m, j as f64 / m);
        (hi, cdf(hi) - cdf(lo))
    });
    StepCdf::from_atoms(SupportInterval::unit(), atoms).expect("increments of a cdf on [0, 1]")
}

/// The example's conditional-cdf array with `G` and `H` discretized by
/// [`discretize`].
pub fn toy_cond_array(p: f64, grid_points: usize) -> Result<CondCdfArray> {
    check_p(p)?;
    if grid_points < 2 {
        return Err(Error::InvalidConfig("need at least two grid points".into()));
    }
    let g = discretize(toy_cdf_g, grid_points);
    let h = discretize(toy_cdf_h, grid_points);
    let space = toy_space();
    let mut cells = Vec::with_capacity(space.n_cells());
    for treatment in 0..2 {
        for z in 0..2 {
            debug_assert_eq!(cells.len(), space.cell(treatment, 0, z));
            cells.push(if cell_is_g(treatment, z) { g.clone() } else { h.clone() });
        }
    }
    CondCdfArray::new(space, cells, vec![p, 1.0 - p])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::ks_distance;
    use crate::functionals::gini_welfare;

    const P: f64 = 0.75;

    fn params(lambda: f64) -> ToyParams {
        ToyParams::new(P, lambda).unwrap()
    }

    #[test]
    fn cdf_values() {
        assert_eq!(toy_cdf_g(0.25), 0.5);
        assert_eq!(toy_cdf_h(0.5), 0.25);
        assert_eq!((toy_cdf_g(1.0), toy_cdf_h(1.0)), (1.0, 1.0));
        assert_eq!((toy_cdf_g(0.0), toy_cdf_h(0.0)), (0.0, 0.0));
        assert_eq!(toy_cdf_g(-1.0), 0.0);
    }

    #[test]
    fn penalty_constant_is_the_maximum() {
        // golden-section search on t (1 - t^3)
        let f = |t: f64| t * (1.0 - t.powi(3));
        let (mut lo, mut hi) = (0.0, 1.0);
        let r = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let (a, b) = (hi - r * (hi - lo), lo + r * (hi - lo));
            if f(a) < f(b) {
                lo = a;
            } else {
                hi = b;
            }
        }
        assert!((f(0.5 * (lo + hi)) - penalty_constant()).abs() < 1e-14);
        assert!((0.5 * (lo + hi) - 4f64.powf(-1.0 / 3.0)).abs() < 1e-7);
    }

    #[test]
    fn objective_examples() {
        assert_eq!(toy_objective(0.5, params(1.0)), 0.0);
        assert!((toy_objective(0.5, params(0.0)) - 89.0 / 560.0).abs() < 1e-15);
        let at_zero = toy_penalty(0.0, P);
        assert!((at_zero - P * 3.0 / (4.0 * 2f64.powf(2.0 / 3.0))).abs() < 1e-15);
    }

    #[test]
    fn target_matches_moment_formulas() {
        for delta in [0.0, 0.3, 0.5, 1.0] {
            let mu = (delta + (1.0 - 2.0 * delta) * P + 1.0) / 3.0;
            let sigma = (delta * (20.0 - 27.0 * delta) - 27.0 * (1.0 - 2.0 * delta).powi(2) * P * P
                + 2.0 * (delta * (54.0 * delta - 47.0) + 10.0) * P
                + 35.0)
                / 210.0;
            assert!((toy_target(delta, P) - (mu - sigma) / 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn threshold_values() {
        let c = toy_threshold(P);
        assert!((c - 0.123).abs() < 1e-3, "c(3/4) = {c}");
        for i in 0..50 {
            let p = 0.5 + (i as f64 + 0.5) / 100.0;
            let c = toy_threshold(p);
            assert!(c > 0.0 && c < 1.0, "c({p}) = {c}");
        }
        let at = params(c);
        assert!((toy_objective(0.0, at) - toy_objective(0.5, at)).abs() < 1e-10);
    }

    #[test]
    fn argmax_branches() {
        let c = toy_threshold(P);
        assert_eq!(toy_argmax(params(0.0)), vec![0.0]);
        assert_eq!(toy_argmax(params(1.0)), vec![0.5]);
        assert_eq!(toy_argmax(params(c)), vec![0.0, 0.5]);
        assert_eq!(toy_argmax(params(c + 1e-6)), vec![0.5]);
    }

    #[test]
    fn max_value_matches_grid_search() {
        assert_eq!(toy_max_value(params(1.0)), 0.0);
        let c = toy_threshold(P);
        let left = toy_max_value(params(c));
        let right = 89.0 / 560.0 * (1.0 - c);
        assert!((left - right).abs() < 1e-10);
        for i in 0..=20 {
            let pr = params(i as f64 / 20.0);
            let brute = (0..=10_000).map(|j| toy_objective(j as f64 * 1e-4, pr)).fold(f64::MIN, f64::max);
            assert!((brute - toy_max_value(pr)).abs() < 1e-6, "lambda {}", pr.lambda);
        }
    }

    #[test]
    fn sampler_frequencies() {
        let sample = toy_sample(100_000, P, Mechanism::A1, 17).unwrap();
        let n = sample.len() as f64;
        let z0: Vec<_> = sample.records().iter().filter(|r| r.z == 0).collect();
        assert!((z0.len() as f64 / n - 0.75).abs() < 0.01);
        let treated = z0.iter().filter(|r| r.d == 0).count() as f64 / z0.len() as f64;
        assert!((treated - 0.25).abs() < 0.01);

        let ys: Vec<f64> = z0.iter().filter(|r| r.d == 0).map(|r| r.y).collect();
        let emp = StepCdf::from_samples(&ys, SupportInterval::unit()).unwrap();
        let mut sup = 0.0f64;
        let mut prev = 0.0;
        for (y, m) in emp.atoms() {
            let now = prev + m;
            sup = sup.max((now - toy_cdf_g(y)).abs()).max((prev - toy_cdf_g(y)).abs());
            prev = now;
        }
        assert!(sup < 0.02, "sup distance {sup}");
    }

    #[test]
    fn sampler_is_seeded() {
        let a = toy_sample(50, P, Mechanism::A2, 3).unwrap();
        let b = toy_sample(50, P, Mechanism::A2, 3).unwrap();
        assert_eq!(a, b);
        assert!(toy_sample(0, P, Mechanism::A2, 3).is_err());
        assert!(toy_sample(10, 0.4, Mechanism::A2, 3).is_err());
    }

    #[test]
    fn discretized_array() {
        let arr = toy_cond_array(P, 2000).unwrap();
        assert!((arr.pxz_table().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let g = arr.cdf(0, 0, 0);
        assert!((gini_welfare(g) - 1.0 / 12.0).abs() < 0.002);
        let h = arr.cdf(1, 0, 0);
        assert!((gini_welfare(h) - 4.0 / 15.0).abs() < 0.002);
        assert!((ks_distance(g, h).unwrap() - penalty_constant()).abs() < 0.002);
        assert_eq!(arr.cdf(0, 0, 1), h);
        assert_eq!(arr.cdf(1, 0, 1), g);
    }
}
