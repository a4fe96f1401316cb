#![allow(dead_code)]

use bwpipe::models::{DecisionTree, Node};
use rand::Rng;

/// Random binary tree with consistent integer covers.
pub fn random_tree<R: Rng>(r: &mut R, n_features: usize, max_depth: usize) -> DecisionTree {
    fn grow<R: Rng>(r: &mut R, nodes: &mut Vec<Node>, p: usize, depth: usize, max_depth: usize, cover: u32) -> usize {
        let idx = nodes.len();
        let split = depth < max_depth && cover >= 2 && (depth == 0 || r.random_bool(0.7));
        if !split {
            nodes.push(Node::Leaf {
                value: r.random_range(-5.0..5.0),
                cover: f64::from(cover),
            });
            return idx;
        }
        nodes.push(Node::Leaf { value: 0.0, cover: 0.0 });
        let lc = r.random_range(1..cover);
        let feature = r.random_range(0..p);
        let threshold = f64::from(r.random_range(0..10u8)) / 10.0 + 0.05;
        let left = grow(r, nodes, p, depth + 1, max_depth, lc);
        let right = grow(r, nodes, p, depth + 1, max_depth, cover - lc);
        nodes[idx] = Node::Split {
            feature,
            threshold,
            left,
            right,
            cover: f64::from(cover),
            gain: 1.0,
        };
        idx
    }
    let mut nodes = Vec::new();
    let cover = r.random_range(20..200);
    grow(r, &mut nodes, n_features, 0, max_depth, cover);
    DecisionTree { nodes }
}

/// E[f(x) | x_S] where features outside S are averaged by training cover.
pub fn cond_expectation(tree: &DecisionTree, node: usize, x: &[f64], in_s: &[bool]) -> f64 {
    match &tree.nodes[node] {
        Node::Leaf { value, .. } => *value,
        Node::Split {
            feature,
            threshold,
            left,
            right,
            cover,
            ..
        } => {
            if in_s[*feature] {
                let next = if x[*feature] <= *threshold { *left } else { *right };
                cond_expectation(tree, next, x, in_s)
            } else {
                (tree.nodes[*left].cover() * cond_expectation(tree, *left, x, in_s)
                    + tree.nodes[*right].cover() * cond_expectation(tree, *right, x, in_s))
                    / cover
            }
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|v| v as f64).product()
}

/// Shapley values by enumerating every coalition.
pub fn brute_force_shapley(tree: &DecisionTree, x: &[f64], n_features: usize) -> Vec<f64> {
    let m = n_features;
    let mut phi = vec![0.0; m];
    for mask in 0u32..(1 << m) {
        let in_s: Vec<bool> = (0..m).map(|j| mask & (1 << j) != 0).collect();
        let s = in_s.iter().filter(|b| **b).count();
        let v_s = cond_expectation(tree, 0, x, &in_s);
        for j in 0..m {
            if in_s[j] {
                continue;
            }
            let mut with = in_s.clone();
            with[j] = true;
            let w = factorial(s) * factorial(m - s - 1) / factorial(m);
            phi[j] += w * (cond_expectation(tree, 0, x, &with) - v_s);
        }
    }
    phi
}
