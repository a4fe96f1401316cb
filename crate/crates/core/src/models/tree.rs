use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tree node. Splits send `x[feature] <= threshold` left. `cover` is the
/// number of training rows that reached the node when the tree was fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        cover: f64,
        gain: f64,
    },
    Leaf {
        value: f64,
        cover: f64,
    },
}

impl Node {
    pub fn cover(&self) -> f64 {
        match self {
            Node::Split { cover, .. } | Node::Leaf { cover, .. } => *cover,
        }
    }
}

/// Binary regression tree stored as a node array; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn leaf(value: f64, cover: f64) -> Self {
        DecisionTree {
            nodes: vec![Node::Leaf { value, cover }],
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value, .. } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    i = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &DecisionTree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Split features in node order.
    pub fn split_features(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { feature, .. } => Some(*feature),
            Node::Leaf { .. } => None,
        })
    }

    /// Cover-weighted mean leaf value.
    pub fn expected_value(&self) -> Result<f64> {
        fn go(t: &DecisionTree, i: usize) -> Result<f64> {
            match &t.nodes[i] {
                Node::Leaf { value, .. } => Ok(*value),
                Node::Split {
                    left, right, cover, ..
                } => {
                    if !(*cover > 0.0) {
                        return Err(Error::MissingCover { node: i });
                    }
                    let wl = t.nodes[*left].cover() / cover;
                    let wr = t.nodes[*right].cover() / cover;
                    Ok(wl * go(t, *left)? + wr * go(t, *right)?)
                }
            }
        }
        go(self, 0)
    }

    /// Structural check: every split has two in-range children and no node is
    /// reachable twice.
    pub fn validate(&self) -> Result<()> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if i >= self.nodes.len() || seen[i] {
                return Err(Error::InvalidParam(format!("malformed tree at node {i}")));
            }
            seen[i] = true;
            match &self.nodes[i] {
                Node::Leaf { value, .. } => {
                    if !value.is_finite() {
                        return Err(Error::NonFinite(format!("leaf {i}")));
                    }
                }
                Node::Split { left, right, .. } => {
                    stack.push(*left);
                    stack.push(*right);
                }
            }
        }
        Ok(())
    }
}

/// Additive tree model:
/// `prediction(x) = base_prediction + learning_rate * sum_j tree_j(x)`.
/// BART draws use `base_prediction = 0` and `learning_rate = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub base_prediction: f64,
    pub learning_rate: f64,
    pub trees: Vec<DecisionTree>,
    pub n_features: usize,
    /// Training MSE before the first tree and after each iteration.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub training_loss: Vec<f64>,
}

impl TreeEnsemble {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let s: f64 = self.trees.iter().map(|t| t.predict_row(row)).sum();
        self.base_prediction + self.learning_rate * s
    }

    /// Total split gain per feature.
    pub fn feature_gain(&self) -> Vec<f64> {
        let mut g = vec![0.0; self.n_features];
        for t in &self.trees {
            for n in &t.nodes {
                if let Node::Split { feature, gain, .. } = n {
                    g[*feature] += gain;
                }
            }
        }
        g
    }

    pub fn split_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_features];
        for t in &self.trees {
            for f in t.split_features() {
                c[f] += 1;
            }
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stump() -> DecisionTree {
        DecisionTree {
            nodes: vec![
                Node::Split {
                    feature: 0,
                    threshold: 0.5,
                    left: 1,
                    right: 2,
                    cover: 4.0,
                    gain: 1.0,
                },
                Node::Leaf { value: -1.0, cover: 1.0 },
                Node::Leaf { value: 3.0, cover: 3.0 },
            ],
        }
    }

    #[test]
    fn routing_and_expectation() {
        let t = stump();
        assert_eq!(t.predict_row(&[0.5]), -1.0);
        assert_eq!(t.predict_row(&[0.6]), 3.0);
        assert_eq!(t.expected_value().unwrap(), 2.0);
        assert_eq!(t.depth(), 1);
        t.validate().unwrap();
    }

    #[test]
    fn empty_ensemble_predicts_base() {
        let e = TreeEnsemble {
            base_prediction: 7.5,
            learning_rate: 0.1,
            trees: vec![],
            n_features: 3,
            training_loss: vec![],
        };
        assert_eq!(e.predict_row(&[1.0, 2.0, 3.0]), 7.5);
    }

    #[test]
    fn cyclic_tree_rejected() {
        let mut t = stump();
        if let Node::Split { right, .. } = &mut t.nodes[0] {
            *right = 0;
        }
        assert!(t.validate().is_err());
    }
}
