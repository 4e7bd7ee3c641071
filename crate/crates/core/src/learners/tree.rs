//! C4.5-style decision tree over binary word-presence features.
//!
//! Splits test whether a word is present. Among splits whose information
//! gain is at least the average gain of the admissible candidates, the one
//! with the highest gain ratio wins. Optional pessimistic-error pruning
//! replaces subtrees by leaves.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{normalize_in_place, Dataset};
use crate::textprep::FeatureVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    /// Minimum total example weight in each branch of a split.
    pub min_leaf: f64,
    /// 0 means unlimited.
    pub max_depth: usize,
    pub prune: bool,
    pub confidence: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            min_leaf: 2.0,
            max_depth: 0,
            prune: false,
            confidence: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        dist: Vec<f64>,
    },
    Split {
        feature: usize,
        dist: Vec<f64>,
        absent: Box<Node>,
        present: Box<Node>,
    },
}

impl Node {
    fn dist(&self) -> &[f64] {
        match self {
            Node::Leaf { dist } | Node::Split { dist, .. } => dist,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { absent, present, .. } => 1 + absent.depth().max(present.depth()),
        }
    }

    pub fn leaves(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Split { absent, present, .. } => absent.leaves() + present.leaves(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub root: Node,
}

fn entropy(dist: &[f64]) -> f64 {
    let total: f64 = dist.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    dist.iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| {
            let p = w / total;
            -p * p.log2()
        })
        .sum()
}

struct Candidate {
    gain: f64,
    ratio: f64,
}

/// Gain and gain ratio of splitting `dist` into `present` and its complement.
fn evaluate_split(dist: &[f64], present: &[f64]) -> Option<Candidate> {
    let absent: Vec<f64> = dist
        .iter()
        .zip(present)
        .map(|(d, p)| (d - p).max(0.0))
        .collect();
    let w_total: f64 = dist.iter().sum();
    let w_present: f64 = present.iter().sum();
    let w_absent: f64 = absent.iter().sum();
    if w_total <= 0.0 {
        return None;
    }
    let gain = entropy(dist)
        - (w_present / w_total) * entropy(present)
        - (w_absent / w_total) * entropy(&absent);
    let split_info = entropy(&[w_present, w_absent]);
    if split_info <= 0.0 {
        return Some(Candidate { gain, ratio: 0.0 });
    }
    Some(Candidate {
        gain,
        ratio: gain / split_info,
    })
}

/// Information gain over split information, in bits, of splitting `labels`
/// by a binary feature. Zero split information yields 0.
pub fn gain_ratio(feature_column: &[bool], labels: &[usize]) -> f64 {
    assert_eq!(feature_column.len(), labels.len(), "column and labels differ in length");
    let n_classes = labels.iter().max().map_or(1, |m| m + 1);
    let mut dist = vec![0.0; n_classes];
    let mut present = vec![0.0; n_classes];
    for (&f, &y) in feature_column.iter().zip(labels) {
        dist[y] += 1.0;
        if f {
            present[y] += 1.0;
        }
    }
    evaluate_split(&dist, &present).map_or(0.0, |c| c.ratio.max(0.0))
}

const MIN_GAIN: f64 = 1e-10;

impl DecisionTree {
    /// Fits on examples with positive `weights`; a weight acts as a
    /// multiplicity (bootstrap counts, boosting weights).
    pub fn fit(data: &Dataset, weights: &[f64], params: &TreeParams) -> Self {
        assert_eq!(weights.len(), data.len());
        let idx: Vec<usize> = (0..data.len()).filter(|&i| weights[i] > 0.0).collect();
        let mut root = grow(data, weights, &idx, params, 0);
        if params.prune {
            prune(&mut root, params.confidence);
        }
        Self { root }
    }

    fn leaf(&self, x: &FeatureVector) -> &[f64] {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { dist } => return dist,
                Node::Split {
                    feature,
                    absent,
                    present,
                    ..
                } => {
                    node = if x.contains(*feature) { present } else { absent };
                }
            }
        }
    }

    pub fn scores(&self, x: &FeatureVector) -> Vec<f64> {
        let mut s = self.leaf(x).to_vec();
        normalize_in_place(&mut s);
        s
    }
}

fn class_dist(data: &Dataset, weights: &[f64], idx: &[usize]) -> Vec<f64> {
    let mut dist = vec![0.0; data.n_classes()];
    for &i in idx {
        dist[data.labels()[i]] += weights[i];
    }
    dist
}

fn grow(data: &Dataset, weights: &[f64], idx: &[usize], params: &TreeParams, depth: usize) -> Node {
    let dist = class_dist(data, weights, idx);
    let total: f64 = dist.iter().sum();
    let pure = dist.iter().filter(|&&w| w > 0.0).count() <= 1;
    if pure || total < 2.0 * params.min_leaf || (params.max_depth > 0 && depth >= params.max_depth) {
        return Node::Leaf { dist };
    }

    // weighted class distribution among examples containing each feature
    let mut present: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for &i in idx {
        let y = data.labels()[i];
        for &(f, _) in &data.vectors()[i].entries {
            present.entry(f).or_insert_with(|| vec![0.0; dist.len()])[y] += weights[i];
        }
    }

    let mut candidates = Vec::new();
    for (&f, p) in &present {
        let w_present: f64 = p.iter().sum();
        if w_present < params.min_leaf || total - w_present < params.min_leaf {
            continue;
        }
        if let Some(c) = evaluate_split(&dist, p) {
            if c.gain > MIN_GAIN {
                candidates.push((f, c));
            }
        }
    }
    if candidates.is_empty() {
        return Node::Leaf { dist };
    }
    let avg_gain = candidates.iter().map(|(_, c)| c.gain).sum::<f64>() / candidates.len() as f64;
    let mut best: Option<&(usize, Candidate)> = None;
    for cand in &candidates {
        if cand.1.gain + 1e-12 < avg_gain {
            continue;
        }
        if best.is_none_or(|b| cand.1.ratio > b.1.ratio) {
            best = Some(cand);
        }
    }
    let feature = best.expect("the max-gain candidate clears the average").0;

    let (with, without): (Vec<usize>, Vec<usize>) =
        idx.iter().partition(|&&i| data.vectors()[i].contains(feature));
    let present_child = grow(data, weights, &with, params, depth + 1);
    let absent_child = grow(data, weights, &without, params, depth + 1);
    Node::Split {
        feature,
        dist,
        absent: Box::new(absent_child),
        present: Box::new(present_child),
    }
}

fn leaf_errors(dist: &[f64]) -> (f64, f64) {
    let n: f64 = dist.iter().sum();
    let best = dist.iter().copied().fold(0.0, f64::max);
    (n, n - best)
}

fn estimated_errors(node: &Node, cf: f64) -> f64 {
    match node {
        Node::Leaf { dist } => {
            let (n, e) = leaf_errors(dist);
            e + added_errors(n, e, cf)
        }
        Node::Split { absent, present, .. } => {
            estimated_errors(absent, cf) + estimated_errors(present, cf)
        }
    }
}

/// Bottom-up subtree replacement by pessimistic error estimate.
fn prune(node: &mut Node, cf: f64) {
    if let Node::Split { absent, present, .. } = node {
        prune(absent, cf);
        prune(present, cf);
    } else {
        return;
    }
    let subtree = estimated_errors(node, cf);
    let (n, e) = leaf_errors(node.dist());
    let as_leaf = e + added_errors(n, e, cf);
    if as_leaf <= subtree + 0.1 {
        *node = Node::Leaf {
            dist: node.dist().to_vec(),
        };
    }
}

/// Extra errors implied by the upper confidence bound of the binomial error
/// rate: `n · U_cf(e, n) − e`.
fn added_errors(n: f64, e: f64, cf: f64) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    if e < 1.0 {
        let base = n * (1.0 - cf.powf(1.0 / n));
        if e == 0.0 {
            return base;
        }
        return base + e * (added_errors(n, 1.0, cf) - base);
    }
    if e + 0.5 >= n {
        return (n - e).max(0.0);
    }
    let z = normal_quantile(1.0 - cf);
    let f = (e + 0.5) / n;
    let r = (f + z * z / (2.0 * n) + z * (f / n - f * f / n + z * z / (4.0 * n * n)).sqrt())
        / (1.0 + z * z / n);
    r * n - e
}

/// Inverse standard normal CDF (Acklam's rational approximation, |ε| < 1.2e-9).
fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383_577_518_672_69e2,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    let low = 0.02425;
    if p < low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -normal_quantile(1.0 - p)
    }
}
