mod common;

use bwpipe::explain::{
    bart_shap, pdp, permutation_importance, shap_importance, tree_shap, tree_shap_row, GridSpec, PermutationMetric,
};
use bwpipe::matrix::Matrix;
use bwpipe::models::{fit_bart, fit_gbr, BartConfig, DecisionTree, FittedModel, GbrParams, Node, Regressor, TreeEnsemble};
use bwpipe::rng;
use rand::Rng;

#[test]
fn tree_shap_matches_enumeration() {
    let mut r = rng::rng(11);
    for _ in 0..100 {
        let p = r.random_range(1..=5);
        let tree = common::random_tree(&mut r, p, 3);
        for _ in 0..5 {
            let x: Vec<f64> = (0..p).map(|_| r.random_range(0.0..1.0)).collect();
            let mut phi = vec![0.0; p];
            tree_shap_row(&tree, &x, &mut phi);
            let oracle = common::brute_force_shapley(&tree, &x, p);
            for j in 0..p {
                assert!((phi[j] - oracle[j]).abs() < 1e-9, "{phi:?} vs {oracle:?}");
            }
        }
    }
}

#[test]
fn duplicated_feature_in_symmetric_tree_gets_equal_share() {
    // f = 1 if x0 > .5 and x1 > .5, covers symmetric
    let t = DecisionTree {
        nodes: vec![
            Node::Split { feature: 0, threshold: 0.5, left: 1, right: 2, cover: 100.0, gain: 1.0 },
            Node::Leaf { value: 0.0, cover: 50.0 },
            Node::Split { feature: 1, threshold: 0.5, left: 3, right: 4, cover: 50.0, gain: 1.0 },
            Node::Leaf { value: 0.0, cover: 25.0 },
            Node::Leaf { value: 1.0, cover: 25.0 },
        ],
    };
    let e = TreeEnsemble { base_prediction: 0.0, learning_rate: 1.0, trees: vec![t], n_features: 3, training_loss: vec![] };
    let x = Matrix::from_rows(&[vec![1.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
    let s = tree_shap(&e, &x).unwrap();
    assert!((s.values.get(0, 0) - s.values.get(0, 1)).abs() < 1e-12);
    assert_eq!(s.values.get(0, 2), 0.0);
    let names = vec!["a".into(), "b".into(), "c".into()];
    let imp = shap_importance(&s, &names).unwrap();
    assert_eq!(imp.score_of("c"), Some(0.0));
    assert!((imp.score_of("a").unwrap() - 50.0).abs() < 1e-9);
}

fn sample(n: usize, p: usize, seed: u64) -> (Matrix, Vec<f64>) {
    let mut r = rng::rng(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
    let y = rows.iter().map(|v| 3.0 * v[0] + (4.0 * v[1]).sin() + r.random_range(-0.1..0.1)).collect();
    (Matrix::from_rows(&rows).unwrap(), y)
}

#[test]
fn local_accuracy_and_dummy_on_fitted_models() {
    let (x, y) = sample(300, 4, 3);
    let gbr = fit_gbr(&x, &y, &GbrParams { n_iterations: 80, max_depth: 4, ..GbrParams::default() }).unwrap();
    let s = tree_shap(&gbr, &x).unwrap();
    let pred = gbr.predict(&x).unwrap();
    let used: Vec<usize> = gbr.split_counts();
    for i in 0..x.n_rows() {
        assert!((s.row_sum(i) - pred[i]).abs() < 1e-6);
        for (j, &c) in used.iter().enumerate() {
            if c == 0 {
                assert_eq!(s.values.get(i, j), 0.0);
            }
        }
    }
    let cfg = BartConfig { n_trees: 20, n_iterations: 150, burn_in: 50, thin: 5, ..BartConfig::default() };
    let b = fit_bart(&x, &y, &cfg).unwrap();
    let sb = bart_shap(&b, &x).unwrap();
    for i in 0..x.n_rows() {
        assert!((sb.row_sum(i) - b.predict_row(x.row(i))).abs() < 1e-6);
    }
}

#[test]
fn bart_pdp_is_mean_of_draw_curves() {
    let (x, y) = sample(200, 3, 4);
    let cfg = BartConfig { n_trees: 20, n_iterations: 120, burn_in: 20, thin: 10, ..BartConfig::default() };
    let b = fit_bart(&x, &y, &cfg).unwrap();
    let curve = pdp(&FittedModel::Bart(b.clone()), &x, 1, "x1", &GridSpec::Points(7)).unwrap();
    let mut manual = vec![0.0; 7];
    for d in &b.draws {
        let c = pdp(&FittedModel::Gbr(d.clone()), &x, 1, "x1", &GridSpec::Explicit(curve.grid.clone())).unwrap();
        for (m, v) in manual.iter_mut().zip(&c.mean_prediction) {
            *m += v / b.draws.len() as f64;
        }
    }
    for (a, m) in curve.mean_prediction.iter().zip(&manual) {
        assert!((a - m).abs() < 1e-9);
    }
    let (lo, hi) = curve.band.unwrap();
    assert!(lo.iter().zip(&hi).all(|(l, h)| l <= h));
}

#[test]
fn permutation_favours_the_driving_feature() {
    let (x, _) = sample(300, 3, 5);
    let y: Vec<f64> = (0..300).map(|i| x.get(i, 0).powi(2)).collect();
    let m = fit_gbr(&x, &y, &GbrParams::default()).unwrap();
    let names = vec!["x1".into(), "x2".into(), "x3".into()];
    let r = permutation_importance(&m, &x, &y, &names, PermutationMetric::R2, 5, 1).unwrap();
    assert_eq!(r.top(1), vec!["x1".to_string()]);
    assert!(r.score_of("x1").unwrap() > 10.0 * r.score_of("x2").unwrap().abs());
}
