//! Weighted-atom cumulative distribution functions on a bounded interval.
//!
//! [`StepCdf`] is the single distribution representation used throughout the
//! crate: empirical cdfs, fitted conditional cdfs, mixtures implied by a
//! decision rule and projected inverse-propensity estimates are all finite
//! lists of atoms. Atoms at identical points are coalesced on construction, so
//! two cdfs describing the same distribution have identical atom lists.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass of user supplied atoms or mixture weights.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Closed interval `[a, b]` with `a < b` on which every outcome cdf lives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportInterval {
    a: f64,
    b: f64,
}

impl SupportInterval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidSupport { a, b });
        }
        Ok(Self { a, b })
    }

    /// The unit interval `[0, 1]`.
    pub fn unit() -> Self {
        Self { a: 0.0, b: 1.0 }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn width(&self) -> f64 {
        self.b - self.a
    }

    pub fn contains(&self, y: f64) -> bool {
        y >= self.a && y <= self.b
    }

    fn check(&self, y: f64) -> Result<()> {
        if self.contains(y) {
            Ok(())
        } else {
            Err(Error::OutOfSupport { value: y, a: self.a, b: self.b })
        }
    }
}

/// A distribution with finitely many atoms in `[a, b]`.
///
/// Points are strictly increasing, masses are strictly positive and sum to
/// one. Evaluation is right-continuous.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepCdf {
    support: SupportInterval,
    points: Vec<f64>,
    masses: Vec<f64>,
    #[serde(skip)]
    cumulative: Vec<f64>,
}

impl StepCdf {
    /// Builds a cdf from arbitrary `(point, mass)` pairs.
    ///
    /// Pairs are sorted, coalesced at equal points and zero masses dropped.
    /// The total mass must be one within [`MASS_TOLERANCE`]; it is then
    /// renormalized to one.
    pub fn from_atoms<I>(support: SupportInterval, atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let mut raw: Vec<(f64, f64)> = Vec::new();
        for (point, mass) in atoms {
            if !point.is_finite() || !mass.is_finite() {
                return Err(Error::InvalidAtoms(format!("non-finite atom ({point}, {mass})")));
            }
            support.check(point)?;
            if mass < 0.0 {
                return Err(Error::InvalidAtoms(format!("negative mass {mass} at {point}")));
            }
            raw.push((point, mass));
        }
        raw.sort_by(|l, r| l.0.total_cmp(&r.0));
        let (points, masses) = coalesce(raw);
        let total: f64 = masses.iter().sum();
        if points.is_empty() || (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::WeightMismatch { sum: total });
        }
        Ok(Self::from_sorted_parts(support, points, masses))
    }

    /// Trusted constructor: points strictly increasing, masses positive with
    /// a positive sum. Masses are renormalized.
    pub(crate) fn from_sorted_parts(support: SupportInterval, points: Vec<f64>, mut masses: Vec<f64>) -> Self {
        debug_assert!(!points.is_empty());
        debug_assert!(points.windows(2).all(|w| w[0] < w[1]));
        let total: f64 = masses.iter().sum();
        if total != 1.0 {
            masses.iter_mut().for_each(|m| *m /= total);
        }
        let mut cumulative = Vec::with_capacity(masses.len());
        let mut acc = 0.0;
        for m in &masses {
            acc += m;
            cumulative.push(acc.min(1.0));
        }
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        Self { support, points, masses, cumulative }
    }

    /// Empirical cdf of `values`.
    pub fn from_samples(values: &[f64], support: SupportInterval) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        let mut sorted = values.to_vec();
        for &v in &sorted {
            if v.is_nan() {
                return Err(Error::OutOfSupport { value: v, a: support.a, b: support.b });
            }
            support.check(v)?;
        }
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mut points = Vec::new();
        let mut masses = Vec::new();
        let mut i = 0;
        while i < sorted.len() {
            let mut j = i + 1;
            while j < sorted.len() && sorted[j] == sorted[i] {
                j += 1;
            }
            points.push(sorted[i]);
            masses.push((j - i) as f64 / n);
            i = j;
        }
        Ok(Self::from_sorted_parts(support, points, masses))
    }

    /// Unit mass at `point`.
    pub fn point_mass(point: f64, support: SupportInterval) -> Result<Self> {
        support.check(point)?;
        Ok(Self::from_sorted_parts(support, vec![point], vec![1.0]))
    }

    /// Weighted mixture `sum_k w_k F_k` of cdfs sharing one support.
    pub fn mixture(components: &[(&StepCdf, f64)]) -> Result<Self> {
        let Some((first, _)) = components.first() else {
            return Err(Error::WeightMismatch { sum: 0.0 });
        };
        let support = first.support;
        let mut sum = 0.0;
        for (cdf, w) in components {
            if cdf.support != support {
                return Err(Error::SupportMismatch);
            }
            if !(w.is_finite() && *w >= 0.0) {
                return Err(Error::WeightMismatch { sum: *w });
            }
            sum += w;
        }
        if (sum - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::WeightMismatch { sum });
        }
        let mut raw: Vec<(f64, f64)> = components
            .iter()
            .filter(|(_, w)| *w > 0.0)
            .flat_map(|(cdf, w)| cdf.atoms().map(move |(p, m)| (p, m * w)))
            .collect();
        raw.sort_by(|l, r| l.0.total_cmp(&r.0));
        let (points, masses) = coalesce(raw);
        Ok(Self::from_sorted_parts(support, points, masses))
    }

    pub fn support(&self) -> SupportInterval {
        self.support
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.iter().copied().zip(self.masses.iter().copied())
    }

    /// `F(y)`: total mass at points `<= y`.
    pub fn eval(&self, y: f64) -> f64 {
        if y >= self.support.b {
            return 1.0;
        }
        let k = self.points.partition_point(|&p| p <= y);
        if k == 0 {
            0.0
        } else {
            self.cumulative[k - 1]
        }
    }

    /// Sup-norm distance `||F - G||_inf`.
    pub fn ks_distance(&self, other: &StepCdf) -> Result<f64> {
        ks_distance(self, other)
    }
}

impl<'de> Deserialize<'de> for StepCdf {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        #[derive(Deserialize)]
        struct Raw {
            support: SupportInterval,
            points: Vec<f64>,
            masses: Vec<f64>,
        }
        let raw = Raw::deserialize(deserializer)?;
        if raw.points.len() != raw.masses.len() {
            return Err(serde::de::Error::custom("points and masses differ in length"));
        }
        let support = SupportInterval::new(raw.support.a, raw.support.b).map_err(serde::de::Error::custom)?;
        StepCdf::from_atoms(support, raw.points.into_iter().zip(raw.masses)).map_err(serde::de::Error::custom)
    }
}

/// Merges adjacent equal points of a sorted list and drops zero masses.
fn coalesce(sorted: Vec<(f64, f64)>) -> (Vec<f64>, Vec<f64>) {
    let mut points: Vec<f64> = Vec::with_capacity(sorted.len());
    let mut masses: Vec<f64> = Vec::with_capacity(sorted.len());
    for (p, m) in sorted {
        if m == 0.0 {
            continue;
        }
        match points.last() {
            Some(&last) if last == p => *masses.last_mut().unwrap() += m,
            _ => {
                points.push(p);
                masses.push(m);
            }
        }
    }
    (points, masses)
}

/// Walks the merged breakpoints of two cdfs, feeding `F(t) - G(t)` at every
/// breakpoint `t` to `visit`. Left limits coincide with the value at the
/// previous breakpoint (or 0 below the first), so this covers the sup exactly.
fn walk_differences(f: &StepCdf, g: &StepCdf, mut visit: impl FnMut(f64)) {
    let (mut i, mut j) = (0, 0);
    let (mut cf, mut cg) = (0.0, 0.0);
    while i < f.points.len() || j < g.points.len() {
        let pf = f.points.get(i).copied().unwrap_or(f64::INFINITY);
        let pg = g.points.get(j).copied().unwrap_or(f64::INFINITY);
        let t = pf.min(pg);
        if pf == t {
            cf = f.cumulative[i];
            i += 1;
        }
        if pg == t {
            cg = g.cumulative[j];
            j += 1;
        }
        visit(cf - cg);
    }
}

/// Exact `sup_y |F(y) - G(y)|`.
pub fn ks_distance(f: &StepCdf, g: &StepCdf) -> Result<f64> {
    if f.support != g.support {
        return Err(Error::SupportMismatch);
    }
    let mut sup = 0.0f64;
    walk_differences(f, g, |d| sup = sup.max(d.abs()));
    Ok(sup)
}

/// Exact `sup_y max(F(y) - G(y), 0)`.
pub fn one_sided_ks(f: &StepCdf, g: &StepCdf) -> Result<f64> {
    if f.support != g.support {
        return Err(Error::SupportMismatch);
    }
    let mut sup = 0.0f64;
    walk_differences(f, g, |d| sup = sup.max(d));
    Ok(sup)
}

/// Nondecreasing, nonnegative right-continuous step function on `[a, b]`
/// that need not reach one (or may exceed it).
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneStep {
    support: SupportInterval,
    points: Vec<f64>,
    increments: Vec<f64>,
}

impl MonotoneStep {
    pub fn new<I>(support: SupportInterval, atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let mut raw = Vec::new();
        for (point, inc) in atoms {
            if !point.is_finite() || !inc.is_finite() || inc < 0.0 {
                return Err(Error::InvalidAtoms(format!("bad increment ({point}, {inc})")));
            }
            support.check(point)?;
            raw.push((point, inc));
        }
        raw.sort_by(|l, r| l.0.total_cmp(&r.0));
        let (points, increments) = coalesce(raw);
        Ok(Self { support, points, increments })
    }

    pub fn support(&self) -> SupportInterval {
        self.support
    }

    pub fn total(&self) -> f64 {
        self.increments.iter().sum()
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.iter().copied().zip(self.increments.iter().copied())
    }

    pub fn eval(&self, y: f64) -> f64 {
        self.atoms().take_while(|(p, _)| *p <= y).map(|(_, m)| m).sum()
    }

    /// Projection onto cdfs on `[a, b]`: `0` below `a`, `min(G, 1)` on
    /// `[a, b)` and `1` from `b` on.
    ///
    /// Mass above one is truncated; any mass missing at `b` becomes an atom
    /// at `b`.
    pub fn project(&self) -> StepCdf {
        project_mab(self)
    }
}

/// See [`MonotoneStep::project`].
pub fn project_mab(g: &MonotoneStep) -> StepCdf {
    let support = g.support;
    let mut points = Vec::with_capacity(g.points.len() + 1);
    let mut masses = Vec::with_capacity(g.points.len() + 1);
    let mut cum = 0.0;
    for (p, inc) in g.atoms() {
        if p >= support.b {
            break;
        }
        let take = inc.min(1.0 - cum);
        if take > 0.0 {
            points.push(p);
            masses.push(take);
            cum += take;
        }
        if cum >= 1.0 {
            break;
        }
    }
    if cum < 1.0 {
        points.push(support.b);
        masses.push(1.0 - cum);
    }
    StepCdf::from_sorted_parts(support, points, masses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit() -> SupportInterval {
        SupportInterval::unit()
    }

    fn random_cdf(rng: &mut ChaCha8Rng, atoms: usize) -> StepCdf {
        let raw: Vec<(f64, f64)> = (0..atoms).map(|_| (rng.random::<f64>(), rng.random::<f64>() + 0.01)).collect();
        let total: f64 = raw.iter().map(|a| a.1).sum();
        StepCdf::from_atoms(unit(), raw.into_iter().map(|(p, m)| (p, m / total))).unwrap()
    }

    #[test]
    fn support_rejects_degenerate_interval() {
        assert!(SupportInterval::new(1.0, 1.0).is_err());
        assert!(SupportInterval::new(0.0, f64::NAN).is_err());
    }

    #[test]
    fn samples_single_point() {
        let f = StepCdf::from_samples(&[0.5], unit()).unwrap();
        assert_eq!(f.points(), &[0.5]);
        assert_eq!(f.masses(), &[1.0]);
    }

    #[test]
    fn samples_are_coalesced() {
        let f = StepCdf::from_samples(&[1.0, 0.0, 1.0, 0.0], unit()).unwrap();
        assert_eq!(f.points(), &[0.0, 1.0]);
        assert_eq!(f.masses(), &[0.5, 0.5]);
    }

    #[test]
    fn samples_errors() {
        assert_eq!(StepCdf::from_samples(&[], unit()), Err(Error::EmptySample));
        assert!(matches!(StepCdf::from_samples(&[0.2, 1.5], unit()), Err(Error::OutOfSupport { .. })));
    }

    #[test]
    fn squared_uniform_sample_matches_sqrt_cdf() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let values: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>().powi(2)).collect();
        let f = StepCdf::from_samples(&values, unit()).unwrap();
        // sup |F_n - G| is attained at an atom or its left limit
        let mut sup = 0.0f64;
        let mut prev = 0.0;
        for (&p, &c) in f.points().iter().zip(&f.cumulative) {
            let g = p.sqrt();
            sup = sup.max((c - g).abs()).max((prev - g).abs());
            prev = c;
        }
        assert!(sup < 0.01, "sup distance {sup}");
    }

    #[test]
    fn point_mass_endpoints() {
        let s = unit();
        let at_b = StepCdf::point_mass(1.0, s).unwrap();
        assert_eq!(at_b.eval(0.999), 0.0);
        assert_eq!(at_b.eval(1.0), 1.0);
        let at_a = StepCdf::point_mass(0.0, s).unwrap();
        assert_eq!(at_a.eval(0.0), 1.0);
        assert_eq!(at_a.eval(0.4), 1.0);
        let mid = StepCdf::point_mass(0.3, s).unwrap();
        assert_eq!(mid.eval(0.2999), 0.0);
        assert_eq!(mid.eval(0.3), 1.0);
        assert!(StepCdf::point_mass(1.1, s).is_err());
    }

    #[test]
    fn eval_basics() {
        let f = StepCdf::point_mass(0.5, unit()).unwrap();
        assert_eq!(f.eval(0.5), 1.0);
        let g = StepCdf::from_atoms(unit(), [(0.0, 0.5), (1.0, 0.5)]).unwrap();
        assert_eq!(g.eval(0.3), 0.5);
        assert_eq!(g.eval(-1e-12), 0.0);
        assert_eq!(g.eval(-5.0), 0.0);
    }

    #[test]
    fn mixture_identity_and_two_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_cdf(&mut rng, 4);
        assert_eq!(StepCdf::mixture(&[(&f, 1.0)]).unwrap(), f);

        let p0 = StepCdf::point_mass(0.0, unit()).unwrap();
        let p1 = StepCdf::point_mass(1.0, unit()).unwrap();
        let m = StepCdf::mixture(&[(&p0, 0.5), (&p1, 0.5)]).unwrap();
        assert_eq!(m.points(), &[0.0, 1.0]);
        assert_eq!(m.masses(), &[0.5, 0.5]);
    }

    #[test]
    fn mixture_matches_double_sum() {
        let f = StepCdf::from_atoms(unit(), [(0.1, 0.2), (0.4, 0.3), (0.9, 0.5)]).unwrap();
        let g = StepCdf::from_atoms(unit(), [(0.1, 0.6), (0.5, 0.1), (0.9, 0.3)]).unwrap();
        let m = StepCdf::mixture(&[(&f, 0.25), (&g, 0.75)]).unwrap();
        // direct double sum over atoms, coalesced by hand
        let expected =
            [(0.1, 0.25 * 0.2 + 0.75 * 0.6), (0.4, 0.25 * 0.3), (0.5, 0.75 * 0.1), (0.9, 0.25 * 0.5 + 0.75 * 0.3)];
        assert_eq!(m.len(), expected.len());
        for ((p, q), (ep, eq)) in m.atoms().zip(expected) {
            assert_eq!(p, ep);
            assert!((q - eq).abs() < 1e-15);
        }
    }

    #[test]
    fn mixture_errors() {
        let f = StepCdf::point_mass(0.2, unit()).unwrap();
        let g = StepCdf::point_mass(0.2, SupportInterval::new(0.0, 2.0).unwrap()).unwrap();
        assert!(matches!(StepCdf::mixture(&[(&f, 0.7)]), Err(Error::WeightMismatch { .. })));
        assert_eq!(StepCdf::mixture(&[(&f, 0.5), (&g, 0.5)]), Err(Error::SupportMismatch));
    }

    #[test]
    fn ks_basics() {
        let a = StepCdf::point_mass(0.0, unit()).unwrap();
        let b = StepCdf::point_mass(1.0, unit()).unwrap();
        assert_eq!(ks_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(ks_distance(&a, &b).unwrap(), 1.0);
        // a <= b pointwise fails; b <= a everywhere so one-sided(b, a) = 0
        assert_eq!(one_sided_ks(&b, &a).unwrap(), 0.0);
        assert_eq!(one_sided_ks(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn ks_matches_dense_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let f = random_cdf(&mut rng, 5);
            let g = random_cdf(&mut rng, 5);
            let mut grid: Vec<f64> = f.points().iter().chain(g.points()).copied().collect();
            grid.sort_by(f64::total_cmp);
            let mids: Vec<f64> = grid.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
            grid.extend(mids);
            grid.push(-0.5);
            grid.push(1.5);
            let brute = grid.iter().map(|&y| (f.eval(y) - g.eval(y)).abs()).fold(0.0, f64::max);
            assert!((ks_distance(&f, &g).unwrap() - brute).abs() < 1e-12);
            let both = one_sided_ks(&f, &g).unwrap().max(one_sided_ks(&g, &f).unwrap());
            assert!((both - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn project_is_identity_on_cdfs() {
        let s = unit();
        let g = MonotoneStep::new(s, [(0.2, 0.3), (0.6, 0.7)]).unwrap();
        let f = project_mab(&g);
        assert_eq!(f, StepCdf::from_atoms(s, [(0.2, 0.3), (0.6, 0.7)]).unwrap());
    }

    #[test]
    fn project_zero_function_gives_mass_at_b() {
        let s = SupportInterval::new(-1.0, 2.0).unwrap();
        let g = MonotoneStep::new(s, []).unwrap();
        assert_eq!(project_mab(&g), StepCdf::point_mass(2.0, s).unwrap());
    }

    #[test]
    fn project_truncates_excess_mass() {
        let s = unit();
        let g = MonotoneStep::new(s, [(0.1, 0.5), (0.3, 0.7), (0.8, 0.2)]).unwrap();
        let f = project_mab(&g);
        for y in [0.0, 0.1, 0.2, 0.3, 0.5, 0.8, 0.9, 1.0] {
            assert!((f.eval(y) - g.eval(y).min(1.0)).abs() < 1e-15, "y={y}");
        }
        assert_eq!(f.points(), &[0.1, 0.3]);
    }

    #[test]
    fn project_large_jump() {
        let s = unit();
        let g = MonotoneStep::new(s, [(0.5, 4.0)]).unwrap();
        let f = project_mab(&g);
        assert_eq!(f.eval(0.49), 0.0);
        assert_eq!(f.eval(0.5), 1.0);
    }

    #[test]
    fn serde_roundtrip_validates() {
        let f = StepCdf::from_atoms(unit(), [(0.25, 0.5), (0.75, 0.5)]).unwrap();
        let text = serde_json::to_string(&f).unwrap();
        let back: StepCdf = serde_json::from_str(&text).unwrap();
        assert_eq!(back, f);
        let bad = r#"{"support":{"a":0.0,"b":1.0},"points":[0.5],"masses":[0.4]}"#;
        assert!(serde_json::from_str::<StepCdf>(bad).is_err());
    }
}
