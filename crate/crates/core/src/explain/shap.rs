//! Path-dependent TreeSHAP.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::{BartPosterior, DecisionTree, FittedModel, Node, TreeEnsemble};
use crate::selection::SelectorRanking;

/// Attributions per row and feature. Local accuracy:
/// `base_value + Σ_j values[i][j] = prediction(row i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapMatrix {
    pub base_value: f64,
    pub values: Matrix,
    pub model_id: String,
}

impl ShapMatrix {
    pub fn row_sum(&self, i: usize) -> f64 {
        self.base_value + self.values.row(i).iter().sum::<f64>()
    }

    pub fn write_csv<W: std::io::Write>(&self, names: &[String], w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        let mut header: Vec<&str> = vec!["row", "base_value"];
        header.extend(names.iter().map(String::as_str));
        w.write_record(&header)?;
        for i in 0..self.values.n_rows() {
            let mut rec = vec![i.to_string(), self.base_value.to_string()];
            rec.extend(self.values.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<shap csv>", e))
    }
}

#[derive(Debug, Clone, Copy)]
struct PathElem {
    feature: usize,
    zero: f64,
    one: f64,
    weight: f64,
}

const ROOT: usize = usize::MAX;

fn extend(path: &mut Vec<PathElem>, zero: f64, one: f64, feature: usize) {
    let d = path.len();
    path.push(PathElem {
        feature,
        zero,
        one,
        weight: if d == 0 { 1.0 } else { 0.0 },
    });
    let df = (d + 1) as f64;
    for i in (0..d).rev() {
        path[i + 1].weight += one * path[i].weight * (i + 1) as f64 / df;
        path[i].weight = zero * path[i].weight * (d - i) as f64 / df;
    }
}

fn unwind(path: &mut Vec<PathElem>, k: usize) {
    let d = path.len() - 1;
    let PathElem { one, zero, .. } = path[k];
    let df = (d + 1) as f64;
    let mut next = path[d].weight;
    for i in (0..d).rev() {
        if one != 0.0 {
            let tmp = path[i].weight;
            path[i].weight = next * df / ((i + 1) as f64 * one);
            next = tmp - path[i].weight * zero * (d - i) as f64 / df;
        } else {
            path[i].weight = path[i].weight * df / (zero * (d - i) as f64);
        }
    }
    for i in k..d {
        path[i].feature = path[i + 1].feature;
        path[i].zero = path[i + 1].zero;
        path[i].one = path[i + 1].one;
    }
    path.pop();
}

fn unwound_sum(path: &[PathElem], k: usize) -> f64 {
    let d = path.len() - 1;
    let PathElem { one, zero, .. } = path[k];
    let df = (d + 1) as f64;
    let mut next = path[d].weight;
    let mut total = 0.0;
    for i in (0..d).rev() {
        if one != 0.0 {
            let tmp = next * df / ((i + 1) as f64 * one);
            total += tmp;
            next = path[i].weight - tmp * zero * (d - i) as f64 / df;
        } else if zero != 0.0 {
            total += path[i].weight / zero * df / (d - i) as f64;
        }
    }
    total
}

fn recurse(tree: &DecisionTree, row: &[f64], phi: &mut [f64], node: usize, mut path: Vec<PathElem>, zero: f64, one: f64, feature: usize) {
    extend(&mut path, zero, one, feature);
    match &tree.nodes[node] {
        Node::Leaf { value, .. } => {
            for k in 1..path.len() {
                let w = unwound_sum(&path, k);
                let e = path[k];
                phi[e.feature] += w * (e.one - e.zero) * value;
            }
        }
        Node::Split {
            feature: split,
            threshold,
            left,
            right,
            cover,
            ..
        } => {
            let (hot, cold) = if row[*split] <= *threshold {
                (*left, *right)
            } else {
                (*right, *left)
            };
            let (mut iz, mut io) = (1.0, 1.0);
            if let Some(k) = (1..path.len()).find(|&k| path[k].feature == *split) {
                iz = path[k].zero;
                io = path[k].one;
                unwind(&mut path, k);
            }
            let hc = tree.nodes[hot].cover() / cover;
            let cc = tree.nodes[cold].cover() / cover;
            recurse(tree, row, phi, hot, path.clone(), iz * hc, io, *split);
            recurse(tree, row, phi, cold, path, iz * cc, 0.0, *split);
        }
    }
}

fn check_cover(tree: &DecisionTree) -> Result<()> {
    for (i, n) in tree.nodes.iter().enumerate() {
        if let Node::Split { cover, .. } = n {
            if !(*cover > 0.0) {
                return Err(Error::MissingCover { node: i });
            }
        }
    }
    Ok(())
}

/// Attributions of one tree for one row, added into `phi`.
pub fn tree_shap_row(tree: &DecisionTree, row: &[f64], phi: &mut [f64]) {
    if tree.nodes.len() > 1 {
        recurse(tree, row, phi, 0, Vec::with_capacity(8), 1.0, 1.0, ROOT);
    }
}

fn ensemble_rows(ensemble: &TreeEnsemble, x: &Matrix) -> Vec<Vec<f64>> {
    let p = ensemble.n_features;
    (0..x.n_rows())
        .into_par_iter()
        .map(|i| {
            let mut phi = vec![0.0; p];
            for t in &ensemble.trees {
                tree_shap_row(t, x.row(i), &mut phi);
            }
            phi.iter_mut().for_each(|v| *v *= ensemble.learning_rate);
            phi
        })
        .collect()
}

fn ensemble_base(ensemble: &TreeEnsemble) -> Result<f64> {
    let mut s = 0.0;
    for t in &ensemble.trees {
        check_cover(t)?;
        s += t.expected_value()?;
    }
    Ok(ensemble.base_prediction + ensemble.learning_rate * s)
}

fn check_width(n_features: usize, x: &Matrix) -> Result<()> {
    if x.n_cols() != n_features {
        return Err(Error::DimensionMismatch {
            expected: n_features,
            got: x.n_cols(),
        });
    }
    Ok(())
}

/// Exact TreeSHAP for a boosted ensemble, scaled by its learning rate.
pub fn tree_shap(ensemble: &TreeEnsemble, x: &Matrix) -> Result<ShapMatrix> {
    check_width(ensemble.n_features, x)?;
    let base_value = ensemble_base(ensemble)?;
    let rows = ensemble_rows(ensemble, x);
    Ok(ShapMatrix {
        base_value,
        values: Matrix::from_rows(&rows).unwrap_or_else(|_| Matrix::zeros(x.n_rows(), ensemble.n_features)),
        model_id: "gbr".into(),
    })
}

/// Mean of the per-draw TreeSHAP matrices.
pub fn bart_shap(posterior: &BartPosterior, x: &Matrix) -> Result<ShapMatrix> {
    check_width(posterior.n_features, x)?;
    let m = posterior.draws.len();
    if m == 0 {
        return Err(Error::Degenerate("posterior has no draws".into()));
    }
    let p = posterior.n_features;
    let mut base = 0.0;
    for d in &posterior.draws {
        base += ensemble_base(d)?;
    }
    let rows: Vec<Vec<f64>> = (0..x.n_rows())
        .into_par_iter()
        .map(|i| {
            let mut total = vec![0.0; p];
            for d in &posterior.draws {
                let mut phi = vec![0.0; p];
                for t in &d.trees {
                    tree_shap_row(t, x.row(i), &mut phi);
                }
                for (a, v) in total.iter_mut().zip(&phi) {
                    *a += v * d.learning_rate;
                }
            }
            total.iter_mut().for_each(|v| *v /= m as f64);
            total
        })
        .collect();
    Ok(ShapMatrix {
        base_value: base / m as f64,
        values: Matrix::from_rows(&rows).unwrap_or_else(|_| Matrix::zeros(x.n_rows(), p)),
        model_id: "bart".into(),
    })
}

/// Exact linear attributions `β_j (x_j − mean_j)` with the training means as
/// the baseline.
fn linear_shap(model: &crate::models::LinearModel, x: &Matrix) -> Result<ShapMatrix> {
    check_width(model.n_features(), x)?;
    let rows: Vec<Vec<f64>> = (0..x.n_rows())
        .map(|i| {
            model
                .coefficients
                .iter()
                .zip(&model.standardization)
                .zip(x.row(i))
                .map(|((b, s), v)| if s.sd > 0.0 { b * (v - s.mean) / s.sd } else { 0.0 })
                .collect()
        })
        .collect();
    Ok(ShapMatrix {
        base_value: model.intercept,
        values: Matrix::from_rows(&rows).unwrap_or_else(|_| Matrix::zeros(x.n_rows(), model.n_features())),
        model_id: "linear".into(),
    })
}

pub fn model_shap(model: &FittedModel, x: &Matrix) -> Result<ShapMatrix> {
    match model {
        FittedModel::Gbr(e) => tree_shap(e, x),
        FittedModel::Bart(b) => bart_shap(b, x),
        FittedModel::Linear(l) => linear_shap(l, x),
    }
}

/// Mean |attribution| per feature as a percentage of the total.
pub fn shap_importance(shap: &ShapMatrix, names: &[String]) -> Result<SelectorRanking> {
    let n = shap.values.n_rows();
    let p = shap.values.n_cols();
    if n == 0 {
        return Err(Error::Degenerate("empty SHAP matrix".into()));
    }
    if names.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: names.len(),
        });
    }
    let mut mean_abs = vec![0.0; p];
    for i in 0..n {
        for (m, v) in mean_abs.iter_mut().zip(shap.values.row(i)) {
            *m += v.abs();
        }
    }
    let total: f64 = mean_abs.iter().sum();
    let scores: Vec<f64> = mean_abs
        .iter()
        .map(|m| if total > 0.0 { 100.0 * m / total } else { 0.0 })
        .collect();
    Ok(SelectorRanking::from_scores("shap", names, &scores))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stump() -> DecisionTree {
        DecisionTree {
            nodes: vec![
                Node::Split {
                    feature: 1,
                    threshold: 0.5,
                    left: 1,
                    right: 2,
                    cover: 10.0,
                    gain: 1.0,
                },
                Node::Leaf { value: 2.0, cover: 4.0 },
                Node::Leaf { value: 7.0, cover: 6.0 },
            ],
        }
    }

    #[test]
    fn stump_attribution() {
        let mut phi = vec![0.0; 3];
        tree_shap_row(&stump(), &[0.0, 0.0, 0.0], &mut phi);
        // E = 0.4*2 + 0.6*7 = 5; prediction 2
        assert!((phi[1] + 3.0).abs() < 1e-12);
        assert_eq!((phi[0], phi[2]), (0.0, 0.0));
    }

    #[test]
    fn leaf_only_tree_has_zero_attributions() {
        let e = TreeEnsemble {
            base_prediction: 1.0,
            learning_rate: 0.5,
            trees: vec![DecisionTree::leaf(4.0, 10.0)],
            n_features: 2,
            training_loss: vec![],
        };
        let s = tree_shap(&e, &Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap()).unwrap();
        assert_eq!(s.base_value, 3.0);
        assert_eq!(s.values.row(0), &[0.0, 0.0]);
    }

    #[test]
    fn missing_cover_is_an_error() {
        let mut t = stump();
        if let Node::Split { cover, .. } = &mut t.nodes[0] {
            *cover = 0.0;
        }
        let e = TreeEnsemble {
            base_prediction: 0.0,
            learning_rate: 1.0,
            trees: vec![t],
            n_features: 3,
            training_loss: vec![],
        };
        let x = Matrix::from_rows(&[vec![0.0; 3]]).unwrap();
        assert!(matches!(tree_shap(&e, &x), Err(Error::MissingCover { node: 0 })));
    }
}
