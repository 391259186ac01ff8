use fairpol::functionals::{SimilarityMeasure, TargetFunctional};
use fairpol::objective::omega;
use fairpol::optimizer::OptimizerConfig;
use fairpol::oracle::{
    toy_argmax, toy_cond_array, toy_max_value, toy_objective, toy_rule, toy_space, toy_threshold, ToyParams,
};
use fairpol::selection::{
    interpolate_linear, interpolate_value, oracle_lambda, select_budget_from_targets, slack, sweep_fitted,
    FittedObjective, LambdaGrid, LambdaPath, PathEntry,
};
use proptest::prelude::*;

const P: f64 = 0.75;

fn params(lambda: f64) -> ToyParams {
    ToyParams::new(P, lambda).unwrap()
}

#[test]
fn discretized_objective_matches_closed_form() {
    let arr = toy_cond_array(P, 2000).unwrap();
    let (t, s) = (TargetFunctional::GiniWelfare, SimilarityMeasure::Ks);
    let mut worst: f64 = 0.0;
    for i in 0..=20 {
        let delta = i as f64 / 20.0;
        let rule = toy_rule(arr.space(), delta).unwrap();
        for lambda in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let gap = (omega(&rule, &arr, lambda, &t, &s).unwrap() - toy_objective(delta, params(lambda))).abs();
            worst = worst.max(gap);
        }
    }
    assert!(worst < 0.01, "{worst}");
}

#[test]
fn value_function_is_convex_with_a_kink_at_the_threshold() {
    let lambdas: Vec<f64> = (0..100).map(|i| i as f64 / 99.0).collect();
    let v: Vec<f64> = lambdas.iter().map(|&l| toy_max_value(params(l))).collect();
    for w in v.windows(3) {
        assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-12);
    }
    let c = toy_threshold(P);
    let h = 1e-6;
    let left = (toy_max_value(params(c)) - toy_max_value(params(c - h))) / h;
    let right = (toy_max_value(params(c + h)) - toy_max_value(params(c))) / h;
    assert!(right - left > 0.1, "slopes {left} and {right}");
}

#[test]
fn argmax_is_a_singleton_away_from_the_threshold() {
    let c = toy_threshold(P);
    for i in 0..=1000 {
        let lambda = i as f64 / 1000.0;
        assert_eq!(toy_argmax(params(lambda)).len(), 1);
    }
    assert_eq!(toy_argmax(params(c)), vec![0.0, 0.5]);
    for lambda in [0.0, 0.05, 0.1, 0.2, 0.6, 1.0] {
        let best = (0..=10_000)
            .map(|i| i as f64 / 10_000.0)
            .map(|d| toy_objective(d, params(lambda)))
            .fold(f64::MIN, f64::max);
        for d in toy_argmax(params(lambda)) {
            assert!((toy_objective(d, params(lambda)) - best).abs() < 1e-9);
        }
    }
}

fn toy_path(m: usize) -> LambdaPath {
    let arr = toy_cond_array(P, 2000).unwrap();
    let fitted = FittedObjective::Plugin(arr);
    let grid = LambdaGrid::uniform(m).unwrap();
    sweep_fitted(
        &fitted,
        2000,
        &grid,
        &TargetFunctional::GiniWelfare,
        &SimilarityMeasure::Ks,
        &OptimizerConfig::with_seed(1),
    )
    .unwrap()
}

#[test]
fn sweep_on_the_discretized_array_recovers_the_phase_transition() {
    let path = toy_path(20);
    let c = toy_threshold(P);
    for e in &path.entries {
        let delta = e.rule.prob(0, 0);
        if e.lambda <= c - 0.02 {
            assert!(delta.abs() < 0.01, "lambda {}: {delta}", e.lambda);
        } else if e.lambda >= c + 0.02 {
            assert!((delta - 0.5).abs() < 0.01, "lambda {}: {delta}", e.lambda);
        }
        assert!((e.obj_value - toy_max_value(params(e.lambda))).abs() < 0.01);
    }
    assert!(path.entries[0].max_unfairness > path.entries[20].max_unfairness);
}

#[test]
fn interpolated_value_function_tracks_the_closed_form() {
    let path = toy_path(49);
    let worst = (0..200)
        .map(|j| (j as f64 + 0.37) / 200.0)
        .map(|l| (interpolate_value(&path, l).unwrap() - toy_max_value(params(l))).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 0.05, "{worst}");
}

fn synthetic_path(values: &[f64]) -> LambdaPath {
    let m = values.len() - 1;
    let space = toy_space();
    let entries = values
        .iter()
        .enumerate()
        .map(|(i, &v)| PathEntry {
            lambda: i as f64 / m as f64,
            rule: toy_rule(&space, 0.0).unwrap(),
            obj_value: v,
            target_value: v,
            unfairness: vec![Some(0.0), Some(0.0)],
            max_unfairness: 0.0,
        })
        .collect();
    LambdaPath { grid: LambdaGrid::uniform(m).unwrap(), entries, n: 100 }
}

proptest! {
    #[test]
    fn budget_rule_never_overshoots_the_oracle(
        truth in prop::collection::vec(0.0..0.2f64, 1..30),
        noise in prop::collection::vec(-0.999..0.999f64, 30),
        beta in 0.001..0.2f64,
        n in 2..100_000usize,
    ) {
        let mut deltas = vec![0.0];
        deltas.extend(truth);
        let lambdas: Vec<f64> = (0..deltas.len()).map(|i| i as f64 / (deltas.len() - 1).max(1) as f64).collect();
        let slack_bound = beta * slack(n);
        let estimated: Vec<f64> = deltas.iter().zip(&noise).enumerate().map(|(i, (d, e))| if i == 0 { 0.0 } else { d + e * slack_bound }).collect();
        let targets: Vec<f64> = estimated.iter().map(|d| 1.0 - d).collect();
        let sel = select_budget_from_targets(&lambdas, &targets, n, beta).unwrap();
        prop_assert!(sel.deltas[sel.chosen_index].1 <= sel.threshold);
        prop_assert_eq!(sel.deltas[0].1, 0.0);
        let oracle = oracle_lambda(&lambdas, &deltas, beta).unwrap();
        prop_assert!(sel.chosen_lambda <= oracle, "chosen {} oracle {oracle}", sel.chosen_lambda);
    }

    #[test]
    fn interpolation_preserves_convexity(slopes in prop::collection::vec(-1.0..1.0f64, 1..12), start in -1.0..1.0f64) {
        let mut slopes = slopes;
        slopes.sort_by(f64::total_cmp);
        let m = slopes.len();
        let mut values = vec![start];
        for s in &slopes {
            values.push(values.last().unwrap() + s / m as f64);
        }
        let path = synthetic_path(&values);
        let xs: Vec<f64> = (0..=400).map(|i| i as f64 / 400.0).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| interpolate_value(&path, x).unwrap()).collect();
        for w in ys.windows(3) {
            prop_assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-12);
        }
        for (i, &v) in values.iter().enumerate() {
            prop_assert_eq!(interpolate_value(&path, i as f64 / m as f64).unwrap(), v);
        }
        for i in 0..m {
            let seg: Vec<f64> = (0..=10).map(|j| interpolate_value(&path, (i as f64 + j as f64 / 10.0) / m as f64).unwrap()).collect();
            let up = seg.windows(2).all(|w| w[1] >= w[0] - 1e-15);
            let down = seg.windows(2).all(|w| w[1] <= w[0] + 1e-15);
            prop_assert!(up || down);
        }
        let grid: Vec<f64> = (0..=m).map(|i| i as f64 / m as f64).collect();
        for &x in &xs {
            prop_assert!((interpolate_linear(&grid, &values, x) - interpolate_value(&path, x).unwrap()).abs() < 1e-12);
        }
    }
}
