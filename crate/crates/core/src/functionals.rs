//! Target functionals and similarity measures on outcome distributions.
//!
//! Everything here works on a `(points, masses)` view of a distribution so the
//! same code serves [`StepCdf`] and the dense aligned-grid vectors used by the
//! objective evaluator. Zero masses are allowed in that view; points must be
//! nondecreasing.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distributions::{self, StepCdf, SupportInterval};
use crate::error::{Error, Result};

/// `sum_i x_i m_i`.
pub fn mean_atoms(points: &[f64], masses: &[f64]) -> f64 {
    points.iter().zip(masses).map(|(x, m)| x * m).sum()
}

/// Half the mean absolute difference, `1/2 sum_i sum_j m_i m_j |x_i - x_j|`,
/// through prefix sums over sorted points.
pub fn mad_half_atoms(points: &[f64], masses: &[f64]) -> f64 {
    let mut below_mass = 0.0;
    let mut below_moment = 0.0;
    let mut acc = 0.0;
    for (&x, &m) in points.iter().zip(masses) {
        if m == 0.0 {
            continue;
        }
        acc += m * (x * below_mass - below_moment);
        below_mass += m;
        below_moment += m * x;
    }
    acc
}

/// Gini welfare normalized by two: `(mean - mad_half) / 2`.
pub fn gini_welfare_atoms(points: &[f64], masses: &[f64]) -> f64 {
    0.5 * (mean_atoms(points, masses) - mad_half_atoms(points, masses))
}

/// Generalized inverse `inf { y : F(y) >= tau }`.
pub fn quantile_atoms(points: &[f64], masses: &[f64], tau: f64) -> f64 {
    let mut cum = 0.0;
    for (&x, &m) in points.iter().zip(masses) {
        cum += m;
        if m > 0.0 && cum >= tau {
            return x;
        }
    }
    // rounding left the running sum a hair below tau: last positive atom
    points.iter().zip(masses).rev().find(|(_, &m)| m > 0.0).map(|(&x, _)| x).unwrap_or(f64::NAN)
}

pub fn mean(f: &StepCdf) -> f64 {
    mean_atoms(f.points(), f.masses())
}

pub fn mad_half(f: &StepCdf) -> f64 {
    mad_half_atoms(f.points(), f.masses())
}

pub fn gini_welfare(f: &StepCdf) -> f64 {
    gini_welfare_atoms(f.points(), f.masses())
}

pub fn quantile(f: &StepCdf, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(quantile_atoms(f.points(), f.masses(), tau))
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidTau(tau))
    }
}

/// Real-valued functional `T` of an outcome distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetFunctional {
    GiniWelfare,
    Mean,
    Quantile { tau: f64 },
}

impl TargetFunctional {
    pub fn quantile(tau: f64) -> Result<Self> {
        check_tau(tau)?;
        Ok(Self::Quantile { tau })
    }

    pub fn evaluate(&self, f: &StepCdf) -> f64 {
        self.evaluate_atoms(f.points(), f.masses())
    }

    pub fn evaluate_atoms(&self, points: &[f64], masses: &[f64]) -> f64 {
        match *self {
            Self::GiniWelfare => gini_welfare_atoms(points, masses),
            Self::Mean => mean_atoms(points, masses),
            Self::Quantile { tau } => quantile_atoms(points, masses, tau),
        }
    }

    /// Constant `L` with `|T(F) - T(G)| <= L ||F - G||_inf` for cdfs on
    /// `support`, or `None` when no such bound holds.
    ///
    /// Both the mean and the halved Gini welfare have `L = b - a`, so they
    /// are 1-Lipschitz on `[0, 1]`. Quantiles jump under sup-norm
    /// perturbations at flat stretches of `F`.
    pub fn lipschitz_constant(&self, support: SupportInterval) -> Option<f64> {
        match self {
            Self::GiniWelfare | Self::Mean => Some(support.width()),
            Self::Quantile { .. } => None,
        }
    }
}

impl fmt::Display for TargetFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::GiniWelfare => write!(f, "gini"),
            Self::Mean => write!(f, "mean"),
            Self::Quantile { tau } => write!(f, "quantile:{tau}"),
        }
    }
}

impl FromStr for TargetFunctional {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gini" | "gini_welfare" | "gini-welfare" => Ok(Self::GiniWelfare),
            "mean" => Ok(Self::Mean),
            other => {
                let tau = other
                    .strip_prefix("quantile:")
                    .or_else(|| other.strip_prefix("quantile="))
                    .ok_or_else(|| format!("unknown target functional {s:?}"))?;
                let tau: f64 = tau.parse().map_err(|_| format!("bad quantile level in {s:?}"))?;
                Self::quantile(tau).map_err(|e| e.to_string())
            }
        }
    }
}

/// Dissimilarity `S(F, G) >= 0` between a group cdf `F` and the population
/// cdf `G`, zero when `F = G`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityMeasure {
    Ks,
    OneSidedKs,
    AbsTargetDiff(TargetFunctional),
}

impl SimilarityMeasure {
    pub fn evaluate(&self, f: &StepCdf, g: &StepCdf) -> Result<f64> {
        match self {
            Self::Ks => distributions::ks_distance(f, g),
            Self::OneSidedKs => distributions::one_sided_ks(f, g),
            Self::AbsTargetDiff(t) => {
                if f.support() != g.support() {
                    return Err(Error::SupportMismatch);
                }
                Ok((t.evaluate(f) - t.evaluate(g)).abs())
            }
        }
    }

    /// Same as [`evaluate`](Self::evaluate) for two mass vectors on one
    /// shared sorted grid.
    pub fn evaluate_aligned(&self, points: &[f64], f: &[f64], g: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), g.len());
        match self {
            Self::Ks | Self::OneSidedKs => {
                let one_sided = matches!(self, Self::OneSidedKs);
                let (mut cf, mut cg, mut sup) = (0.0, 0.0, 0.0f64);
                for (mf, mg) in f.iter().zip(g) {
                    cf += mf;
                    cg += mg;
                    let d = cf - cg;
                    sup = sup.max(if one_sided { d } else { d.abs() });
                }
                sup
            }
            Self::AbsTargetDiff(t) => (t.evaluate_atoms(points, f) - t.evaluate_atoms(points, g)).abs(),
        }
    }
}

impl fmt::Display for SimilarityMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Ks => write!(f, "ks"),
            Self::OneSidedKs => write!(f, "ks1"),
            Self::AbsTargetDiff(t) => write!(f, "absdiff:{t}"),
        }
    }
}

impl FromStr for SimilarityMeasure {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "ks" => Ok(Self::Ks),
            "ks1" | "one_sided_ks" | "one-sided-ks" => Ok(Self::OneSidedKs),
            other => other
                .strip_prefix("absdiff:")
                .ok_or_else(|| format!("unknown similarity measure {s:?}"))
                .and_then(|inner| inner.parse().map(Self::AbsTargetDiff)),
        }
    }
}

/// Convenience dispatch matching [`SimilarityMeasure::evaluate`].
pub fn similarity(s: &SimilarityMeasure, f: &StepCdf, g: &StepCdf) -> Result<f64> {
    s.evaluate(f, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit() -> SupportInterval {
        SupportInterval::unit()
    }

    fn two_point() -> StepCdf {
        StepCdf::from_atoms(unit(), [(0.0, 0.5), (1.0, 0.5)]).unwrap()
    }

    fn naive_mad_half(f: &StepCdf) -> f64 {
        let mut acc = 0.0;
        for (x, m) in f.atoms() {
            for (y, n) in f.atoms() {
                acc += m * n * (x - y).abs();
            }
        }
        0.5 * acc
    }

    #[test]
    fn mean_examples() {
        assert_eq!(mean(&StepCdf::point_mass(0.7, unit()).unwrap()), 0.7);
        assert_eq!(mean(&two_point()), 0.5);
    }

    #[test]
    fn mad_half_examples() {
        assert_eq!(mad_half(&StepCdf::point_mass(0.3, unit()).unwrap()), 0.0);
        assert_eq!(mad_half(&two_point()), 0.25);
        assert_eq!(naive_mad_half(&two_point()), 0.25);
    }

    #[test]
    fn mad_half_matches_naive_double_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for size in [1usize, 2, 7, 50, 200] {
            let raw: Vec<(f64, f64)> = (0..size).map(|_| (rng.random(), rng.random::<f64>() + 1e-3)).collect();
            let total: f64 = raw.iter().map(|a| a.1).sum();
            let f = StepCdf::from_atoms(unit(), raw.into_iter().map(|(p, m)| (p, m / total))).unwrap();
            assert!((mad_half(&f) - naive_mad_half(&f)).abs() < 1e-12);
        }
    }

    #[test]
    fn sample_moments_of_sqrt_cdf() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let values: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>().powi(2)).collect();
        let f = StepCdf::from_samples(&values, unit()).unwrap();
        assert!((mean(&f) - 1.0 / 3.0).abs() < 0.01);
        assert!((mad_half(&f) - 1.0 / 6.0).abs() < 0.01);
        assert!((gini_welfare(&f) - 1.0 / 12.0).abs() < 0.01);
    }

    #[test]
    fn gini_of_point_mass_at_one() {
        assert_eq!(gini_welfare(&StepCdf::point_mass(1.0, unit()).unwrap()), 0.5);
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(quantile(&StepCdf::point_mass(0.4, unit()).unwrap(), 0.5).unwrap(), 0.4);
        assert_eq!(quantile(&two_point(), 0.5).unwrap(), 0.0);
        let f = StepCdf::from_atoms(unit(), [(0.0, 0.25), (0.5, 0.25), (1.0, 0.5)]).unwrap();
        assert_eq!(quantile(&f, 0.6).unwrap(), 1.0);
        assert_eq!(quantile(&f, 0.0), Err(Error::InvalidTau(0.0)));
        assert!(TargetFunctional::quantile(1.0).is_err());
    }

    #[test]
    fn similarity_examples() {
        let f = two_point();
        for s in [
            SimilarityMeasure::Ks,
            SimilarityMeasure::OneSidedKs,
            SimilarityMeasure::AbsTargetDiff(TargetFunctional::GiniWelfare),
        ] {
            assert_eq!(similarity(&s, &f, &f).unwrap(), 0.0);
        }
        let a = StepCdf::point_mass(0.0, unit()).unwrap();
        let b = StepCdf::point_mass(1.0, unit()).unwrap();
        assert_eq!(similarity(&SimilarityMeasure::Ks, &a, &b).unwrap(), 1.0);
    }

    #[test]
    fn aligned_matches_step_cdf_path() {
        let grid = [0.1, 0.2, 0.5, 0.9];
        let f = [0.1, 0.0, 0.6, 0.3];
        let g = [0.0, 0.5, 0.25, 0.25];
        let fc = StepCdf::from_atoms(unit(), grid.iter().copied().zip(f)).unwrap();
        let gc = StepCdf::from_atoms(unit(), grid.iter().copied().zip(g)).unwrap();
        for s in [
            SimilarityMeasure::Ks,
            SimilarityMeasure::OneSidedKs,
            SimilarityMeasure::AbsTargetDiff(TargetFunctional::Mean),
        ] {
            let direct = s.evaluate(&fc, &gc).unwrap();
            assert!((s.evaluate_aligned(&grid, &f, &g) - direct).abs() < 1e-15, "{s}");
        }
    }

    #[test]
    fn names_roundtrip() {
        for t in [TargetFunctional::GiniWelfare, TargetFunctional::Mean, TargetFunctional::Quantile { tau: 0.25 }] {
            assert_eq!(t.to_string().parse::<TargetFunctional>().unwrap(), t);
        }
        for s in [
            SimilarityMeasure::Ks,
            SimilarityMeasure::OneSidedKs,
            SimilarityMeasure::AbsTargetDiff(TargetFunctional::GiniWelfare),
        ] {
            assert_eq!(s.to_string().parse::<SimilarityMeasure>().unwrap(), s);
        }
        assert!("median".parse::<TargetFunctional>().is_err());
    }
}
