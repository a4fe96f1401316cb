//! Bayesian additive regression trees fit by backfitting Metropolis-within-Gibbs.
//!
//! The response is rescaled to [-0.5, 0.5]. Each iteration visits every tree:
//! the tree structure takes one grow / prune / change Metropolis-Hastings step
//! against the partial residual (leaf means integrated out under their
//! conjugate normal prior), then the leaf means are drawn from their normal
//! full conditionals. The noise variance is drawn last from its scaled
//! inverse-chi-squared full conditional.
//!
//! Split rules come from a fixed per-feature grid of cutpoints (midpoints of
//! sorted unique training values, thinned to at most `numcut`). A rule is
//! available at a node only when both children would receive rows.

use rand::Rng as _;
use rayon::prelude::*;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared as ChiSq, ContinuousCDF};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::linalg::ridge_fit;
use crate::models::tree::{DecisionTree, Node, TreeEnsemble};
use crate::rng::{self, Rng};
use crate::selection::ranking::SelectorRanking;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BartConfig {
    pub n_trees: usize,
    pub n_iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Tree prior: P(split at depth d) = alpha * (1 + d)^(-beta).
    pub alpha: f64,
    pub beta: f64,
    /// Leaf prior scale: sd(mu) = 0.5 / (k * sqrt(n_trees)).
    pub k: f64,
    pub nu: f64,
    pub q: f64,
    pub numcut: usize,
    pub p_grow: f64,
    pub p_prune: f64,
    /// Independent chains whose draws are pooled.
    pub n_chains: usize,
    pub seed: u64,
}

impl Default for BartConfig {
    fn default() -> Self {
        BartConfig {
            n_trees: 100,
            n_iterations: 1200,
            burn_in: 200,
            thin: 1,
            alpha: 0.95,
            beta: 2.0,
            k: 2.0,
            nu: 3.0,
            q: 0.9,
            numcut: 100,
            p_grow: 0.4,
            p_prune: 0.4,
            n_chains: 1,
            seed: 0,
        }
    }
}

impl BartConfig {
    pub fn draws_per_chain(&self) -> usize {
        self.n_iterations.saturating_sub(self.burn_in) / self.thin.max(1)
    }

    pub fn n_draws(&self) -> usize {
        self.draws_per_chain() * self.n_chains
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParam(m.to_string()));
        if self.n_trees == 0 {
            return bad("n_trees must be positive");
        }
        if self.n_chains == 0 {
            return bad("n_chains must be positive");
        }
        if self.thin == 0 {
            return bad("thin must be positive");
        }
        if self.n_draws() == 0 {
            return bad("no posterior draws retained after burn-in");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) || self.beta < 0.0 {
            return bad("tree prior needs alpha in (0,1) and beta >= 0");
        }
        if !(self.k > 0.0 && self.nu > 0.0 && self.q > 0.0 && self.q < 1.0) {
            return bad("k, nu must be positive and q in (0,1)");
        }
        if self.numcut == 0 {
            return bad("numcut must be positive");
        }
        let pc = 1.0 - self.p_grow - self.p_prune;
        if !(self.p_grow > 0.0 && self.p_prune > 0.0 && pc >= -1e-12) {
            return bad("move probabilities must be positive and sum to at most 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BartPosterior {
    /// Retained draws on the original response scale; each draw predicts
    /// `sum_j tree_j(x)`.
    pub draws: Vec<TreeEnsemble>,
    pub sigma_draws: Vec<f64>,
    pub config: BartConfig,
    pub n_features: usize,
    /// Metropolis-Hastings acceptance rate over all tree moves.
    pub acceptance_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BartPrediction {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    /// Central 90% posterior interval of f(x).
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BartPosterior {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let s: f64 = self.draws.iter().map(|d| d.predict_row(row)).sum();
        s / self.draws.len() as f64
    }

    /// Per-draw predictions, `[draw][row]`.
    pub fn draw_predictions(&self, x: &Matrix) -> Vec<Vec<f64>> {
        self.draws
            .iter()
            .map(|d| (0..x.n_rows()).map(|i| d.predict_row(x.row(i))).collect())
            .collect()
    }

    pub fn predict_with_uncertainty(&self, x: &Matrix) -> Result<BartPrediction> {
        if x.n_cols() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.n_cols(),
            });
        }
        let per_draw = self.draw_predictions(x);
        let n = x.n_rows();
        let mut out = BartPrediction {
            mean: Vec::with_capacity(n),
            sd: Vec::with_capacity(n),
            lower: Vec::with_capacity(n),
            upper: Vec::with_capacity(n),
        };
        let mut col = vec![0.0; per_draw.len()];
        for i in 0..n {
            for (d, p) in per_draw.iter().enumerate() {
                col[d] = p[i];
            }
            out.mean.push(stats::mean(&col));
            out.sd.push(stats::sd_sample(&col));
            col.sort_by(f64::total_cmp);
            out.lower.push(stats::quantile_sorted(&col, 0.05));
            out.upper.push(stats::quantile_sorted(&col, 0.95));
        }
        Ok(out)
    }
}

/// Fraction of split rules using each feature, averaged over draws that
/// contain at least one split.
pub fn variable_inclusion(posterior: &BartPosterior, names: &[String]) -> Result<SelectorRanking> {
    if posterior.draws.is_empty() {
        return Err(Error::InvalidParam("posterior has no draws".into()));
    }
    if names.len() != posterior.n_features {
        return Err(Error::DimensionMismatch {
            expected: posterior.n_features,
            got: names.len(),
        });
    }
    let mut score = vec![0.0; posterior.n_features];
    let mut used = 0usize;
    for d in &posterior.draws {
        let counts = d.split_counts();
        let total: usize = counts.iter().sum();
        if total == 0 {
            continue;
        }
        used += 1;
        for (s, c) in score.iter_mut().zip(counts) {
            *s += c as f64 / total as f64;
        }
    }
    if used > 0 {
        score.iter_mut().for_each(|s| *s /= used as f64);
    }
    Ok(SelectorRanking::from_scores("bart_inclusion", names, &score))
}

// ---------------------------------------------------------------------------
// sampler internals

#[derive(Clone, Copy)]
struct Avail {
    feature: u32,
    lo: u32,
    hi: u32,
}

#[derive(Clone)]
struct SNode {
    parent: Option<usize>,
    children: Option<(usize, usize)>,
    feature: usize,
    cut: usize,
    depth: usize,
    rows: Vec<u32>,
    avail: Vec<Avail>,
    mu: f64,
    alive: bool,
}

impl SNode {
    fn growable(&self) -> bool {
        !self.avail.is_empty()
    }
}

#[derive(Clone)]
struct STree {
    nodes: Vec<SNode>,
    free: Vec<usize>,
}

struct Data {
    cols: Vec<Vec<f64>>,
    cuts: Vec<Vec<f64>>,
}

impl Data {
    fn available(&self, rows: &[u32]) -> Vec<Avail> {
        let mut out = Vec::new();
        if rows.len() < 2 {
            return out;
        }
        for (f, col) in self.cols.iter().enumerate() {
            let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in rows {
                let v = col[i as usize];
                min = min.min(v);
                max = max.max(v);
            }
            if min >= max {
                continue;
            }
            let cuts = &self.cuts[f];
            let lo = cuts.partition_point(|&c| c < min);
            let hi = cuts.partition_point(|&c| c < max);
            if hi > lo {
                out.push(Avail {
                    feature: f as u32,
                    lo: lo as u32,
                    hi: hi as u32,
                });
            }
        }
        out
    }

    fn partition(&self, rows: &[u32], feature: usize, cut: usize) -> (Vec<u32>, Vec<u32>) {
        let c = self.cuts[feature][cut];
        let col = &self.cols[feature];
        rows.iter().partition(|&&i| col[i as usize] <= c)
    }
}

fn cutpoints(col: &[f64], numcut: usize) -> Vec<f64> {
    let mut u = col.to_vec();
    u.sort_by(f64::total_cmp);
    u.dedup();
    let mids: Vec<f64> = u.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    if mids.len() <= numcut {
        return mids;
    }
    let mut out: Vec<f64> = (0..numcut)
        .map(|i| {
            let pos = ((i as f64 + 0.5) * mids.len() as f64 / numcut as f64).floor() as usize;
            mids[pos.min(mids.len() - 1)]
        })
        .collect();
    out.dedup();
    out
}

#[derive(Clone, Copy)]
struct Hyper {
    alpha: f64,
    beta: f64,
    tau2: f64,
    p_grow: f64,
    p_prune: f64,
}

impl Hyper {
    fn p_split(&self, node: &SNode) -> f64 {
        if node.growable() {
            self.alpha * (1.0 + node.depth as f64).powf(-self.beta)
        } else {
            0.0
        }
    }

    fn p_split_at(&self, depth: usize, growable: bool) -> f64 {
        if growable {
            self.alpha * (1.0 + depth as f64).powf(-self.beta)
        } else {
            0.0
        }
    }

    /// Log marginal likelihood of a leaf with residual sum `s` over `n` rows,
    /// dropping terms that cancel in every acceptance ratio.
    fn leaf_loglik(&self, n: usize, s: f64, sigma2: f64) -> f64 {
        let nt = n as f64 * self.tau2;
        0.5 * (sigma2 / (sigma2 + nt)).ln() + self.tau2 * s * s / (2.0 * sigma2 * (sigma2 + nt))
    }
}

impl STree {
    fn new(n_rows: usize, data: &Data, mu: f64) -> Self {
        let rows: Vec<u32> = (0..n_rows as u32).collect();
        let avail = data.available(&rows);
        STree {
            nodes: vec![SNode {
                parent: None,
                children: None,
                feature: 0,
                cut: 0,
                depth: 0,
                rows,
                avail,
                mu,
                alive: true,
            }],
            free: Vec::new(),
        }
    }

    fn alloc(&mut self, node: SNode) -> usize {
        if let Some(i) = self.free.pop() {
            self.nodes[i] = node;
            i
        } else {
            self.nodes.push(node);
            self.nodes.len() - 1
        }
    }

    fn release(&mut self, i: usize) {
        self.nodes[i].alive = false;
        self.nodes[i].rows = Vec::new();
        self.nodes[i].avail = Vec::new();
        self.free.push(i);
    }

    fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.alive && n.children.is_none())
            .map(|(i, _)| i)
    }

    fn is_leaf(&self, i: usize) -> bool {
        self.nodes[i].children.is_none()
    }

    /// Internal nodes whose children are both leaves.
    fn nog_nodes(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.alive)
            .filter_map(|(i, n)| match n.children {
                Some((l, r)) if self.is_leaf(l) && self.is_leaf(r) => Some(i),
                _ => None,
            })
            .collect()
    }

    fn is_root_leaf(&self) -> bool {
        self.nodes[0].children.is_none()
    }

    fn to_decision_tree(&self, cuts: &[Vec<f64>], scale: f64, offset: f64) -> DecisionTree {
        fn emit(t: &STree, i: usize, cuts: &[Vec<f64>], scale: f64, offset: f64, out: &mut Vec<Node>) -> (usize, usize) {
            let n = &t.nodes[i];
            match n.children {
                None => {
                    out.push(Node::Leaf {
                        value: n.mu * scale + offset,
                        cover: n.rows.len() as f64,
                    });
                    (out.len() - 1, n.rows.len())
                }
                Some((l, r)) => {
                    let me = out.len();
                    out.push(Node::Leaf { value: 0.0, cover: 0.0 });
                    let (li, lc) = emit(t, l, cuts, scale, offset, out);
                    let (ri, rc) = emit(t, r, cuts, scale, offset, out);
                    out[me] = Node::Split {
                        feature: n.feature,
                        threshold: cuts[n.feature][n.cut],
                        left: li,
                        right: ri,
                        cover: (lc + rc) as f64,
                        gain: 0.0,
                    };
                    (me, lc + rc)
                }
            }
        }
        let mut out = Vec::new();
        emit(self, 0, cuts, scale, offset, &mut out);
        DecisionTree { nodes: out }
    }
}

fn sum_rows(resid: &[f64], rows: &[u32]) -> f64 {
    rows.iter().map(|&i| resid[i as usize]).sum()
}

struct Chain<'a> {
    data: &'a Data,
    hyper: Hyper,
    sigma2: f64,
    accepted: u64,
    proposed: u64,
}

impl Chain<'_> {
    fn pick<T: Copy>(rng: &mut Rng, xs: &[T]) -> T {
        xs[rng.random_range(0..xs.len())]
    }

    fn draw_rule(rng: &mut Rng, avail: &[Avail]) -> (usize, usize) {
        let a = Self::pick(rng, avail);
        let cut = rng.random_range(a.lo..a.hi) as usize;
        (a.feature as usize, cut)
    }

    /// One structural MH step on `tree` against residual `resid`.
    fn step(&mut self, tree: &mut STree, resid: &[f64], rng: &mut Rng) {
        let h = &self.hyper;
        let u: f64 = rng.random();
        let root_only = tree.is_root_leaf();
        if root_only || u < h.p_grow {
            self.grow(tree, resid, rng, root_only);
        } else if u < h.p_grow + h.p_prune {
            self.prune(tree, resid, rng);
        } else {
            self.change(tree, resid, rng);
        }
    }

    fn grow(&mut self, tree: &mut STree, resid: &[f64], rng: &mut Rng, root_only: bool) {
        let growable: Vec<usize> = tree.leaves().filter(|&i| tree.nodes[i].growable()).collect();
        if growable.is_empty() {
            return;
        }
        self.proposed += 1;
        let h = &self.hyper;
        let leaf = Self::pick(rng, &growable);
        let (feature, cut) = Self::draw_rule(rng, &tree.nodes[leaf].avail);
        let node = &tree.nodes[leaf];
        let (lrows, rrows) = self.data.partition(&node.rows, feature, cut);
        let lavail = self.data.available(&lrows);
        let ravail = self.data.available(&rrows);
        let d = node.depth;

        let sl = sum_rows(resid, &lrows);
        let sr = sum_rows(resid, &rrows);
        let lik = h.leaf_loglik(lrows.len(), sl, self.sigma2) + h.leaf_loglik(rrows.len(), sr, self.sigma2)
            - h.leaf_loglik(node.rows.len(), sl + sr, self.sigma2);

        let parent_was_nog = match node.parent {
            Some(p) => {
                let (a, b) = tree.nodes[p].children.expect("parent has children");
                let sib = if a == leaf { b } else { a };
                tree.is_leaf(sib)
            }
            None => false,
        };
        let nog_after = tree.nog_nodes().len() + 1 - usize::from(parent_was_nog);
        let p_grow_here = if root_only { 1.0 } else { h.p_grow };
        let ps = h.p_split(node);
        let psl = h.p_split_at(d + 1, !lavail.is_empty());
        let psr = h.p_split_at(d + 1, !ravail.is_empty());
        let log_r = (h.p_prune / nog_after as f64).ln() - (p_grow_here / growable.len() as f64).ln()
            + lik
            + ps.ln()
            + (1.0 - psl).ln()
            + (1.0 - psr).ln()
            - (1.0 - ps).ln();
        if rng.random::<f64>().ln() < log_r {
            self.accepted += 1;
            let mk = |rows: Vec<u32>, avail: Vec<Avail>| SNode {
                parent: Some(leaf),
                children: None,
                feature: 0,
                cut: 0,
                depth: d + 1,
                rows,
                avail,
                mu: 0.0,
                alive: true,
            };
            let l = tree.alloc(mk(lrows, lavail));
            let r = tree.alloc(mk(rrows, ravail));
            let n = &mut tree.nodes[leaf];
            n.children = Some((l, r));
            n.feature = feature;
            n.cut = cut;
            n.rows = Vec::new();
        }
    }

    fn merged_rows(tree: &STree, l: usize, r: usize) -> Vec<u32> {
        let (a, b) = (&tree.nodes[l].rows, &tree.nodes[r].rows);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            if a[i] < b[j] {
                out.push(a[i]);
                i += 1;
            } else {
                out.push(b[j]);
                j += 1;
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        out
    }

    fn prune(&mut self, tree: &mut STree, resid: &[f64], rng: &mut Rng) {
        let nogs = tree.nog_nodes();
        if nogs.is_empty() {
            return;
        }
        self.proposed += 1;
        let h = &self.hyper;
        let eta = Self::pick(rng, &nogs);
        let (l, r) = tree.nodes[eta].children.expect("nog node has children");
        let (ln, rn) = (&tree.nodes[l], &tree.nodes[r]);
        let sl = sum_rows(resid, &ln.rows);
        let sr = sum_rows(resid, &rn.rows);
        let lik = h.leaf_loglik(ln.rows.len() + rn.rows.len(), sl + sr, self.sigma2)
            - h.leaf_loglik(ln.rows.len(), sl, self.sigma2)
            - h.leaf_loglik(rn.rows.len(), sr, self.sigma2);
        let growable_now = tree.leaves().filter(|&i| tree.nodes[i].growable()).count();
        let growable_after =
            growable_now + 1 - usize::from(ln.growable()) - usize::from(rn.growable());
        let pruned_to_root = eta == 0;
        let p_grow_after = if pruned_to_root { 1.0 } else { h.p_grow };
        let ps = h.p_split(&tree.nodes[eta]);
        let psl = h.p_split(ln);
        let psr = h.p_split(rn);
        let log_r = (p_grow_after / growable_after as f64).ln() - (h.p_prune / nogs.len() as f64).ln()
            + lik
            + (1.0 - ps).ln()
            - ps.ln()
            - (1.0 - psl).ln()
            - (1.0 - psr).ln();
        if rng.random::<f64>().ln() < log_r {
            self.accepted += 1;
            let rows = Self::merged_rows(tree, l, r);
            tree.release(l);
            tree.release(r);
            let n = &mut tree.nodes[eta];
            n.children = None;
            n.rows = rows;
        }
    }

    fn change(&mut self, tree: &mut STree, resid: &[f64], rng: &mut Rng) {
        let nogs = tree.nog_nodes();
        if nogs.is_empty() {
            return;
        }
        self.proposed += 1;
        let h = &self.hyper;
        let eta = Self::pick(rng, &nogs);
        let (l, r) = tree.nodes[eta].children.expect("nog node has children");
        let (feature, cut) = Self::draw_rule(rng, &tree.nodes[eta].avail);
        let rows = Self::merged_rows(tree, l, r);
        let (lrows, rrows) = self.data.partition(&rows, feature, cut);
        let lavail = self.data.available(&lrows);
        let ravail = self.data.available(&rrows);
        let (ln, rn) = (&tree.nodes[l], &tree.nodes[r]);
        let s = |rows: &[u32]| sum_rows(resid, rows);
        let lik_new = h.leaf_loglik(lrows.len(), s(&lrows), self.sigma2)
            + h.leaf_loglik(rrows.len(), s(&rrows), self.sigma2);
        let lik_old = h.leaf_loglik(ln.rows.len(), s(&ln.rows), self.sigma2)
            + h.leaf_loglik(rn.rows.len(), s(&rn.rows), self.sigma2);
        let d = tree.nodes[eta].depth;
        let prior_new = (1.0 - h.p_split_at(d + 1, !lavail.is_empty())).ln()
            + (1.0 - h.p_split_at(d + 1, !ravail.is_empty())).ln();
        let prior_old = (1.0 - h.p_split(ln)).ln() + (1.0 - h.p_split(rn)).ln();
        let log_r = lik_new - lik_old + prior_new - prior_old;
        if rng.random::<f64>().ln() < log_r {
            self.accepted += 1;
            tree.nodes[l].rows = lrows;
            tree.nodes[l].avail = lavail;
            tree.nodes[r].rows = rrows;
            tree.nodes[r].avail = ravail;
            tree.nodes[eta].feature = feature;
            tree.nodes[eta].cut = cut;
        }
    }

    fn draw_leaves(&self, tree: &mut STree, resid: &[f64], rng: &mut Rng) {
        let leaves: Vec<usize> = tree.leaves().collect();
        for i in leaves {
            let n = &tree.nodes[i];
            let s = sum_rows(resid, &n.rows);
            let post_var = 1.0 / (1.0 / self.hyper.tau2 + n.rows.len() as f64 / self.sigma2);
            let post_mean = post_var * s / self.sigma2;
            let z: f64 = StandardNormal.sample(rng);
            tree.nodes[i].mu = post_mean + post_var.sqrt() * z;
        }
    }
}

fn sigma_hat(cols: &[Vec<f64>], y: &[f64]) -> f64 {
    let n = y.len();
    let p = cols.len();
    if n > p + 1 {
        let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        let rows: Vec<usize> = (0..n).collect();
        let (b0, b) = ridge_fit(&refs, y, &rows, 1e-8);
        let sse: f64 = (0..n)
            .map(|i| {
                let f = b0 + (0..p).map(|j| b[j] * cols[j][i]).sum::<f64>();
                (y[i] - f).powi(2)
            })
            .sum();
        (sse / (n - p - 1) as f64).sqrt()
    } else {
        stats::sd_sample(y)
    }
}

/// Runs `n_chains` independent chains (in parallel) and pools their draws in
/// chain order. Deterministic for a fixed `config.seed`; a single chain uses
/// the seed directly, several use seeds derived from it.
pub fn fit_bart(x: &Matrix, y: &[f64], config: &BartConfig) -> Result<BartPosterior> {
    config.validate()?;
    let n = x.n_rows();
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if n < 10 {
        return Err(Error::InvalidParam(format!("BART needs at least 10 rows, got {n}")));
    }
    if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("BART inputs".into()));
    }
    let m = config.n_trees;
    let ymin = y.iter().copied().fold(f64::INFINITY, f64::min);
    let ymax = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let center = 0.5 * (ymin + ymax);
    let scale = ymax - ymin;

    if !(scale > 1e-12 * center.abs().max(1.0)) {
        // constant response: every draw is the constant, noise at its floor
        let tree = DecisionTree::leaf(center / m as f64, n as f64);
        let draw = TreeEnsemble {
            base_prediction: 0.0,
            learning_rate: 1.0,
            trees: vec![tree; m],
            n_features: x.n_cols(),
            training_loss: Vec::new(),
        };
        let floor = f64::EPSILON * center.abs().max(1.0);
        return Ok(BartPosterior {
            draws: vec![draw; config.n_draws()],
            sigma_draws: vec![floor; config.n_draws()],
            config: *config,
            n_features: x.n_cols(),
            acceptance_rate: 0.0,
        });
    }

    let yt: Vec<f64> = y.iter().map(|v| (v - center) / scale).collect();
    let cols = x.columns();
    let cuts: Vec<Vec<f64>> = cols.iter().map(|c| cutpoints(c, config.numcut)).collect();
    let data = Data { cols, cuts };

    let sigma_hat = sigma_hat(&data.cols, &yt).max(1e-6);
    let chi = ChiSq::new(config.nu).map_err(|e| Error::InvalidParam(e.to_string()))?;
    let lambda = sigma_hat * sigma_hat * chi.inverse_cdf(1.0 - config.q) / config.nu;
    let tau = 0.5 / (config.k * (m as f64).sqrt());

    let hyper = Hyper {
        alpha: config.alpha,
        beta: config.beta,
        tau2: tau * tau,
        p_grow: config.p_grow,
        p_prune: config.p_prune,
    };
    let setup = ChainSetup {
        data: &data,
        yt: &yt,
        lambda,
        sigma2: sigma_hat * sigma_hat,
        center,
        scale,
        n_features: x.n_cols(),
    };
    let seeds: Vec<u64> = if config.n_chains == 1 {
        vec![config.seed]
    } else {
        (0..config.n_chains as u64).map(|c| rng::derive(config.seed, c)).collect()
    };
    let chains: Vec<ChainOutput> = seeds
        .par_iter()
        .map(|&s| run_chain(&setup, &hyper, config, s))
        .collect::<Result<_>>()?;
    let mut out = BartPosterior {
        draws: Vec::with_capacity(config.n_draws()),
        sigma_draws: Vec::with_capacity(config.n_draws()),
        config: *config,
        n_features: x.n_cols(),
        acceptance_rate: 0.0,
    };
    let (mut acc, mut prop) = (0u64, 0u64);
    for c in chains {
        out.draws.extend(c.draws);
        out.sigma_draws.extend(c.sigma_draws);
        acc += c.accepted;
        prop += c.proposed;
    }
    if prop > 0 {
        out.acceptance_rate = acc as f64 / prop as f64;
    }
    Ok(out)
}

struct ChainSetup<'a> {
    data: &'a Data,
    yt: &'a [f64],
    lambda: f64,
    sigma2: f64,
    center: f64,
    scale: f64,
    n_features: usize,
}

struct ChainOutput {
    draws: Vec<TreeEnsemble>,
    sigma_draws: Vec<f64>,
    accepted: u64,
    proposed: u64,
}

fn run_chain(setup: &ChainSetup, hyper: &Hyper, config: &BartConfig, seed: u64) -> Result<ChainOutput> {
    let (data, yt) = (setup.data, setup.yt);
    let n = yt.len();
    let m = config.n_trees;
    let mut rng = rng::rng(seed);
    let mut chain = Chain {
        data,
        hyper: *hyper,
        sigma2: setup.sigma2,
        accepted: 0,
        proposed: 0,
    };

    let mu0 = stats::mean(yt) / m as f64;
    let template = STree::new(n, data, mu0);
    let mut trees = vec![template; m];
    let mut fit = vec![mu0 * m as f64; n];
    let mut resid = vec![0.0; n];
    let chi_post = ChiSquared::new(config.nu + n as f64).map_err(|e| Error::InvalidParam(e.to_string()))?;

    let per_chain = config.draws_per_chain();
    let mut draws = Vec::with_capacity(per_chain);
    let mut sigma_draws = Vec::with_capacity(per_chain);
    let offset = setup.center / m as f64;
    for it in 0..config.n_iterations {
        for tree in trees.iter_mut() {
            for leaf in tree.leaves().collect::<Vec<_>>() {
                let mu = tree.nodes[leaf].mu;
                for &i in &tree.nodes[leaf].rows {
                    let i = i as usize;
                    resid[i] = yt[i] - fit[i] + mu;
                }
            }
            chain.step(tree, &resid, &mut rng);
            chain.draw_leaves(tree, &resid, &mut rng);
            for leaf in tree.leaves().collect::<Vec<_>>() {
                let mu = tree.nodes[leaf].mu;
                for &i in &tree.nodes[leaf].rows {
                    let i = i as usize;
                    fit[i] = yt[i] - resid[i] + mu;
                }
            }
        }
        let ssr: f64 = (0..n).map(|i| (yt[i] - fit[i]).powi(2)).sum();
        let c: f64 = chi_post.sample(&mut rng);
        chain.sigma2 = (config.nu * setup.lambda + ssr) / c;

        if it >= config.burn_in && (it - config.burn_in + 1) % config.thin == 0 {
            draws.push(TreeEnsemble {
                base_prediction: 0.0,
                learning_rate: 1.0,
                trees: trees
                    .iter()
                    .map(|t| t.to_decision_tree(&data.cuts, setup.scale, offset))
                    .collect(),
                n_features: setup.n_features,
                training_loss: Vec::new(),
            });
            sigma_draws.push(chain.sigma2.sqrt() * setup.scale);
        }
    }
    Ok(ChainOutput {
        draws,
        sigma_draws,
        accepted: chain.accepted,
        proposed: chain.proposed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutpoints_are_midpoints_and_thinned() {
        assert_eq!(cutpoints(&[3.0, 1.0, 2.0, 2.0], 10), vec![1.5, 2.5]);
        let many: Vec<f64> = (0..1000).map(f64::from).collect();
        let c = cutpoints(&many, 100);
        assert_eq!(c.len(), 100);
        assert!(c.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn refuses_tiny_samples() {
        let x = Matrix::from_rows(&(0..9).map(|i| vec![i as f64]).collect::<Vec<_>>()).unwrap();
        let y: Vec<f64> = (0..9).map(f64::from).collect();
        assert!(fit_bart(&x, &y, &BartConfig::default()).is_err());
    }

    #[test]
    fn constant_response() {
        let x = Matrix::from_rows(&(0..20).map(|i| vec![i as f64]).collect::<Vec<_>>()).unwrap();
        let y = vec![3.25; 20];
        let cfg = BartConfig {
            n_trees: 10,
            n_iterations: 50,
            burn_in: 10,
            ..BartConfig::default()
        };
        let post = fit_bart(&x, &y, &cfg).unwrap();
        assert_eq!(post.draws.len(), 40);
        for i in 0..20 {
            assert!((post.predict_row(x.row(i)) - 3.25).abs() < 1e-6);
        }
        assert!(post.sigma_draws.iter().all(|s| *s > 0.0 && *s < 1e-9));
    }

    #[test]
    fn draw_count_and_tree_count() {
        let x = Matrix::from_rows(&(0..30).map(|i| vec![i as f64, (i % 7) as f64]).collect::<Vec<_>>()).unwrap();
        let y: Vec<f64> = (0..30).map(|i| (i as f64).sqrt()).collect();
        let cfg = BartConfig {
            n_trees: 7,
            n_iterations: 60,
            burn_in: 20,
            thin: 4,
            ..BartConfig::default()
        };
        let post = fit_bart(&x, &y, &cfg).unwrap();
        assert_eq!(post.draws.len(), 10);
        assert_eq!(post.sigma_draws.len(), 10);
        assert!(post.draws.iter().all(|d| d.trees.len() == 7));
        for d in &post.draws {
            for t in &d.trees {
                t.validate().unwrap();
                assert!(t.nodes.iter().all(|n| n.cover() >= 1.0));
            }
        }
        assert!(post.sigma_draws.iter().all(|s| *s > 0.0));

        let multi = fit_bart(&x, &y, &BartConfig { n_chains: 3, ..cfg }).unwrap();
        assert_eq!(multi.draws.len(), 30);
        let again = fit_bart(&x, &y, &BartConfig { n_chains: 3, ..cfg }).unwrap();
        assert_eq!(multi, again);
    }
}
