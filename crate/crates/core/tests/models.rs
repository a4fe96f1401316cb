use bwpipe::evaluation::compute_metrics;
use bwpipe::models::{fit_bart, fit_gbr, fit_linear, BartConfig, DecisionTree, GbrParams, Node, Regressor};
use bwpipe::rng;
use bwpipe::Matrix;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

mod common;

fn dataset(seed: u64, n: usize, p: usize) -> (Matrix, Vec<f64>) {
    let mut r = rng::rng(seed);
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| r.random_range(-2.0..2.0)).collect()).collect();
    let w: Vec<f64> = (0..p).map(|_| r.random_range(-3.0..3.0)).collect();
    let y = x
        .iter()
        .map(|row| {
            let lin: f64 = row.iter().zip(&w).map(|(a, b)| a * b).sum();
            let z: f64 = StandardNormal.sample(&mut r);
            lin + (row[0] * 2.0).sin() * 2.0 + 0.5 * z
        })
        .collect();
    (Matrix::from_rows(&x).unwrap(), y)
}

/// Independent subgradient check on the standardized problem.
fn kkt_gap(x: &Matrix, y: &[f64], l1: f64, l2: f64) -> f64 {
    let m = fit_linear(x, y, l1, l2).unwrap();
    let n = x.n_rows();
    let pred: Vec<f64> = (0..n).map(|i| m.predict_row(x.row(i))).collect();
    let r: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
    let mut worst: f64 = 0.0;
    for j in 0..x.n_cols() {
        let col = x.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        let g: f64 = col.iter().zip(&r).map(|(v, e)| (v - mean) / sd * e).sum();
        let b = m.coefficients[j];
        let gap = if b == 0.0 {
            (g.abs() - l1).max(0.0)
        } else {
            (g - l2 * b - l1 * b.signum()).abs()
        };
        worst = worst.max(gap);
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gbr_training_loss_never_increases(
        seed in 0u64..10_000,
        n in 20usize..120,
        p in 1usize..6,
        depth in 1usize..5,
        lr in 0.01f64..=1.0,
    ) {
        let (x, y) = dataset(seed, n, p);
        let params = GbrParams { n_iterations: 40, max_depth: depth, learning_rate: lr, min_leaf: 2, subsample_fraction: 1.0, seed };
        let m = fit_gbr(&x, &y, &params).unwrap();
        prop_assert_eq!(m.training_loss.len(), 41);
        for w in m.training_loss.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn lasso_subgradient_optimality(
        seed in 0u64..10_000,
        n in 10usize..60,
        p in 1usize..12,
        l1 in 0.0f64..40.0,
        l2 in prop_oneof![Just(0.0), 0.0f64..5.0],
    ) {
        let (x, y) = dataset(seed, n, p);
        let gap = kkt_gap(&x, &y, l1, l2);
        prop_assert!(gap <= 1e-6, "kkt gap {gap}");
    }

    #[test]
    fn soft_threshold_on_orthonormal_design(seed in 0u64..10_000, lambda in 0.0f64..3.0) {
        // columns: centred, orthogonal, each with unit population variance
        let mut r = rng::rng(seed);
        let n = 8;
        let h: [[f64; 8]; 3] = [
            [1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0],
            [1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0],
            [1.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0, -1.0],
        ];
        let x = Matrix::from_columns(&h.iter().map(|c| c.to_vec()).collect::<Vec<_>>()).unwrap();
        let y: Vec<f64> = (0..n).map(|_| r.random_range(-5.0..5.0)).collect();
        let m = fit_linear(&x, &y, lambda * n as f64, 0.0).unwrap();
        for j in 0..3 {
            let ols: f64 = (0..n).map(|i| h[j][i] * y[i]).sum::<f64>() / n as f64;
            let st = ols.signum() * (ols.abs() - lambda).max(0.0);
            prop_assert!((m.coefficients[j] - st).abs() <= 1e-8, "{} vs {}", m.coefficients[j], st);
        }
    }
}

#[test]
fn huge_l1_leaves_the_mean() {
    let (x, y) = dataset(3, 40, 4);
    let m = fit_linear(&x, &y, 1e9, 0.0).unwrap();
    assert!(m.coefficients.iter().all(|&b| b == 0.0));
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    assert!((m.predict_row(x.row(0)) - mean).abs() < 1e-12);
}

fn walk(tree: &DecisionTree, x: &[f64]) -> f64 {
    let mut node = &tree.nodes[0];
    loop {
        match node {
            Node::Leaf { value, .. } => return *value,
            Node::Split { feature, threshold, left, right, .. } => {
                node = if x[*feature] > *threshold { &tree.nodes[*right] } else { &tree.nodes[*left] };
            }
        }
    }
}

#[test]
fn tree_prediction_matches_traversal() {
    let mut r = rng::rng(11);
    for _ in 0..1000 {
        let t = common::random_tree(&mut r, 5, 4);
        let x: Vec<f64> = (0..5).map(|_| r.random_range(-1.0..1.0)).collect();
        assert_eq!(t.predict_row(&x), walk(&t, &x));
    }
}

fn linear_data(n: usize, seed: u64) -> (Matrix, Vec<f64>, Vec<f64>) {
    let mut r = rng::rng(seed);
    let xs: Vec<f64> = (0..n).map(|_| r.random_range(0.0..1.0)).collect();
    let f: Vec<f64> = xs.iter().map(|v| 2.0 * v).collect();
    let y = f
        .iter()
        .map(|v| {
            let z: f64 = StandardNormal.sample(&mut r);
            v + 0.1 * z
        })
        .collect();
    (Matrix::from_columns(&[xs]).unwrap(), y, f)
}

#[test]
fn bart_linear_benchmark() {
    let (x, y, _) = linear_data(500, 1);
    let (xt, yt, ft) = linear_data(500, 2);
    let config = BartConfig { seed: 5, ..BartConfig::default() };
    let post = fit_bart(&x, &y, &config).unwrap();
    assert_eq!(post.draws.len(), (1200 - 200) / 1);
    assert!(post.draws.iter().all(|d| d.trees.len() == 100));
    assert!(post.sigma_draws.iter().all(|&s| s > 0.0));
    let pred = post.predict_with_uncertainty(&xt).unwrap();
    let r2 = compute_metrics(&yt, &pred.mean).unwrap().r2.unwrap();
    assert!(r2 >= 0.95, "r2 {r2}");
    let covered = ft
        .iter()
        .enumerate()
        .filter(|(i, f)| pred.lower[*i] <= **f && **f <= pred.upper[*i])
        .count();
    let cov = covered as f64 / ft.len() as f64;
    eprintln!("bart linear: r2 {r2:.4}, coverage {cov:.3}");
    assert!(cov >= 0.85, "coverage {cov}");
}

#[test]
fn bart_draw_order_does_not_matter() {
    let (x, y, _) = linear_data(120, 4);
    let config = BartConfig { n_trees: 20, n_iterations: 300, burn_in: 100, seed: 9, ..BartConfig::default() };
    let mut post = fit_bart(&x, &y, &config).unwrap();
    let before = post.predict(&x).unwrap();
    post.draws.reverse();
    let after = post.predict(&x).unwrap();
    for (a, b) in before.iter().zip(&after) {
        assert!((a - b).abs() <= 1e-9);
    }
}

#[test]
fn fits_are_seed_reproducible() {
    let (x, y) = dataset(21, 80, 3);
    let p = GbrParams { subsample_fraction: 0.6, seed: 4, ..GbrParams::default() };
    assert_eq!(fit_gbr(&x, &y, &p).unwrap(), fit_gbr(&x, &y, &p).unwrap());
    let c = BartConfig { n_trees: 10, n_iterations: 120, burn_in: 20, n_chains: 2, seed: 4, ..BartConfig::default() };
    assert_eq!(fit_bart(&x, &y, &c).unwrap(), fit_bart(&x, &y, &c).unwrap());
}
