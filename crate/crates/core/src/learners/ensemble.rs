//! Bagging and AdaBoost.M1 over decision trees.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, normalize_in_place, Dataset, DecisionTree, TreeParams};
use crate::rng::SeedStream;
use crate::textprep::FeatureVector;

/// Vote weight given to a member with zero weighted error: `ln(1e10)`.
pub const PERFECT_VOTE_WEIGHT: f64 = 23.025850929940457;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bagging {
    pub members: Vec<DecisionTree>,
}

impl Bagging {
    /// `rounds` trees, each on a bootstrap sample of size `n` drawn from the
    /// stream `seed / bagging / round-i`. With `bootstrap == false` every
    /// member sees the full sample.
    pub fn fit(data: &Dataset, rounds: usize, bootstrap: bool, params: &TreeParams, seed: u64) -> Self {
        let stream = SeedStream::new(seed).split("bagging");
        let n = data.len();
        let members = (0..rounds)
            .map(|round| {
                let weights = if bootstrap {
                    let mut rng = stream.rng(&format!("round-{round}"));
                    let mut w = vec![0.0; n];
                    for _ in 0..n {
                        w[rng.random_range(0..n)] += 1.0;
                    }
                    w
                } else {
                    vec![1.0; n]
                };
                DecisionTree::fit(data, &weights, params)
            })
            .collect();
        Self { members }
    }

    /// Mean of the members' class distributions.
    pub fn scores(&self, x: &FeatureVector) -> Vec<f64> {
        let mut acc: Vec<f64> = Vec::new();
        for m in &self.members {
            let s = m.scores(x);
            if acc.is_empty() {
                acc = vec![0.0; s.len()];
            }
            acc.iter_mut().zip(s).for_each(|(a, v)| *a += v);
        }
        normalize_in_place(&mut acc);
        acc
    }
}

/// Outcome of one AdaBoost.M1 reweighting step.
#[derive(Debug, Clone, PartialEq)]
pub enum BoostRound {
    Continue {
        beta: f64,
        vote_weight: f64,
        weights: Vec<f64>,
    },
    /// Zero weighted error: keep the member with a capped vote and stop.
    Perfect { vote_weight: f64 },
    /// Weighted error at or above one half: discard and stop.
    Stop { error: f64 },
}

/// One AdaBoost.M1 step: `ε` is the weighted error, `β = ε/(1−ε)`, correct
/// examples are scaled by `β` and the weights renormalized.
pub fn boost_round(weights: &[f64], predictions: &[usize], labels: &[usize]) -> BoostRound {
    let error: f64 = weights
        .iter()
        .zip(predictions.iter().zip(labels))
        .filter(|(_, (p, y))| p != y)
        .map(|(w, _)| w)
        .sum();
    if error >= 0.5 {
        return BoostRound::Stop { error };
    }
    if error <= 0.0 {
        return BoostRound::Perfect {
            vote_weight: PERFECT_VOTE_WEIGHT,
        };
    }
    let beta = error / (1.0 - error);
    let mut updated: Vec<f64> = weights
        .iter()
        .zip(predictions.iter().zip(labels))
        .map(|(&w, (p, y))| if p == y { w * beta } else { w })
        .collect();
    normalize_in_place(&mut updated);
    BoostRound::Continue {
        beta,
        vote_weight: (1.0 / beta).ln(),
        weights: updated,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoost {
    pub members: Vec<(DecisionTree, f64)>,
    pub n_classes: usize,
}

impl AdaBoost {
    pub fn fit(data: &Dataset, rounds: usize, params: &TreeParams) -> Self {
        let n = data.len();
        let mut weights = vec![1.0 / n as f64; n];
        let mut members = Vec::new();
        for _ in 0..rounds {
            // trees see weights scaled to sum n so `min_leaf` keeps its meaning
            let scaled: Vec<f64> = weights.iter().map(|w| w * n as f64).collect();
            let tree = DecisionTree::fit(data, &scaled, params);
            let preds: Vec<usize> = data.vectors().iter().map(|x| argmax(&tree.scores(x))).collect();
            match boost_round(&weights, &preds, data.labels()) {
                BoostRound::Continue {
                    vote_weight,
                    weights: next,
                    ..
                } => {
                    members.push((tree, vote_weight));
                    weights = next;
                }
                BoostRound::Perfect { vote_weight } => {
                    members.push((tree, vote_weight));
                    break;
                }
                BoostRound::Stop { .. } => {
                    if members.is_empty() {
                        members.push((tree, 1.0));
                    }
                    break;
                }
            }
        }
        Self {
            members,
            n_classes: data.n_classes(),
        }
    }

    /// Normalized weighted votes.
    pub fn scores(&self, x: &FeatureVector) -> Vec<f64> {
        let mut votes = vec![0.0; self.n_classes];
        for (tree, w) in &self.members {
            votes[argmax(&tree.scores(x))] += w;
        }
        normalize_in_place(&mut votes);
        votes
    }
}
