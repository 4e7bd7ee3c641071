//! Classifier suite with a uniform train / predict contract.
//!
//! | algorithm      | model                                          |
//! |----------------|------------------------------------------------|
//! | `mnb`          | multinomial naive Bayes, Laplace smoothing     |
//! | `bernoulli_nb` | Bernoulli naive Bayes over word presence       |
//! | `tree`         | gain-ratio decision tree on word presence      |
//! | `smo`          | linear SVM trained by SMO, one-vs-rest         |
//! | `bagging`      | bootstrap-aggregated trees                     |
//! | `adaboost`     | AdaBoost.M1 over depth-limited trees           |

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textprep::FeatureVector;

pub mod ensemble;
pub mod nb;
pub mod smo;
pub mod tree;

pub use ensemble::{boost_round, AdaBoost, Bagging, BoostRound};
pub use nb::{BernoulliNb, MultinomialNb};
pub use smo::{LinearSvm, OneVsRestSvm, SmoParams};
pub use tree::{gain_ratio, DecisionTree, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Mnb,
    BernoulliNb,
    Tree,
    Smo,
    Bagging,
    #[serde(rename = "adaboost", alias = "ada_boost")]
    AdaBoost,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Tree,
        Algorithm::Mnb,
        Algorithm::BernoulliNb,
        Algorithm::Smo,
        Algorithm::Bagging,
        Algorithm::AdaBoost,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Mnb => "mnb",
            Algorithm::BernoulliNb => "bernoulli_nb",
            Algorithm::Tree => "tree",
            Algorithm::Smo => "smo",
            Algorithm::Bagging => "bagging",
            Algorithm::AdaBoost => "adaboost",
        }
    }

    /// Allowed hyperparameters and their defaults.
    pub fn defaults(self) -> &'static [(&'static str, f64)] {
        match self {
            Algorithm::Mnb | Algorithm::BernoulliNb => &[("alpha", 1.0)],
            Algorithm::Tree => &[
                ("min_leaf", 2.0),
                ("max_depth", 0.0),
                ("prune", 0.0),
                ("confidence", 0.25),
            ],
            Algorithm::Smo => &[("c", 1.0), ("tol", 1e-3), ("max_passes", 10_000.0)],
            Algorithm::Bagging => &[
                ("rounds", 10.0),
                ("bootstrap", 1.0),
                ("min_leaf", 2.0),
                ("max_depth", 0.0),
                ("prune", 0.0),
                ("confidence", 0.25),
            ],
            Algorithm::AdaBoost => &[("rounds", 10.0), ("max_depth", 1.0), ("min_leaf", 1.0)],
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "mnb" | "multinomial_nb" => Ok(Algorithm::Mnb),
            "bernoulli_nb" | "bnb" | "bayes_net" | "bayesnet" => Ok(Algorithm::BernoulliNb),
            "tree" | "j48" | "c45" => Ok(Algorithm::Tree),
            "smo" | "svm" => Ok(Algorithm::Smo),
            "bagging" => Ok(Algorithm::Bagging),
            "adaboost" | "adaboost_m1" => Ok(Algorithm::AdaBoost),
            other => Err(Error::invalid(format!("unknown algorithm `{other}`"))),
        }
    }
}

/// Algorithm choice, explicit hyperparameter overrides and the random seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct LearnerSpec {
    algorithm: Algorithm,
    hyperparameters: BTreeMap<String, f64>,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct RawSpec {
    algorithm: Algorithm,
    #[serde(default)]
    hyperparameters: BTreeMap<String, f64>,
    #[serde(default)]
    seed: u64,
}

impl TryFrom<RawSpec> for LearnerSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        LearnerSpec::new(raw.algorithm, raw.hyperparameters, raw.seed)
    }
}

impl From<LearnerSpec> for RawSpec {
    fn from(s: LearnerSpec) -> Self {
        RawSpec {
            algorithm: s.algorithm,
            hyperparameters: s.hyperparameters,
            seed: s.seed,
        }
    }
}

impl LearnerSpec {
    pub fn new(algorithm: Algorithm, hyperparameters: BTreeMap<String, f64>, seed: u64) -> Result<Self> {
        let allowed = algorithm.defaults();
        for (key, value) in &hyperparameters {
            if !allowed.iter().any(|(k, _)| k == key) {
                return Err(Error::UnknownHyperparameter {
                    algorithm: algorithm.to_string(),
                    key: key.clone(),
                });
            }
            if !value.is_finite() {
                return Err(Error::invalid(format!("hyperparameter `{key}` must be finite")));
            }
        }
        let spec = Self {
            algorithm,
            hyperparameters,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_defaults(algorithm: Algorithm, seed: u64) -> Self {
        Self {
            algorithm,
            hyperparameters: BTreeMap::new(),
            seed,
        }
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn hyperparameters(&self) -> &BTreeMap<String, f64> {
        &self.hyperparameters
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Explicit value or the algorithm default.
    pub fn param(&self, key: &str) -> f64 {
        self.hyperparameters.get(key).copied().unwrap_or_else(|| {
            self.algorithm
                .defaults()
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .unwrap_or_else(|| panic!("{key} is not a {} hyperparameter", self.algorithm))
        })
    }

    fn validate(&self) -> Result<()> {
        let positive = |key: &str| -> Result<()> {
            if self.param(key) > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("`{key}` must be positive")))
            }
        };
        match self.algorithm {
            Algorithm::Mnb | Algorithm::BernoulliNb => positive("alpha"),
            Algorithm::Tree => {
                positive("min_leaf")?;
                self.check_confidence()
            }
            Algorithm::Bagging => {
                positive("min_leaf")?;
                positive("rounds")?;
                self.check_confidence()
            }
            Algorithm::Smo => {
                positive("c")?;
                positive("tol")?;
                positive("max_passes")
            }
            Algorithm::AdaBoost => {
                positive("rounds")?;
                positive("min_leaf")
            }
        }
    }

    fn check_confidence(&self) -> Result<()> {
        let cf = self.param("confidence");
        if cf > 0.0 && cf <= 0.5 {
            Ok(())
        } else {
            Err(Error::invalid("`confidence` must lie in (0, 0.5]"))
        }
    }

    pub(crate) fn tree_params(&self) -> TreeParams {
        TreeParams {
            min_leaf: self.param("min_leaf"),
            max_depth: self.param("max_depth").max(0.0) as usize,
            prune: self
                .hyperparameters
                .get("prune")
                .map(|&p| p != 0.0)
                .unwrap_or(false),
            confidence: if self.algorithm == Algorithm::AdaBoost {
                0.25
            } else {
                self.param("confidence")
            },
        }
    }
}

/// Vectorized training examples.
#[derive(Debug, Clone)]
pub struct Dataset {
    vectors: Vec<FeatureVector>,
    labels: Vec<usize>,
    class_names: Vec<String>,
    vocab_size: usize,
}

impl Dataset {
    pub fn new(
        vectors: Vec<FeatureVector>,
        labels: Vec<usize>,
        class_names: Vec<String>,
        vocab_size: usize,
    ) -> Result<Self> {
        if vectors.len() != labels.len() {
            return Err(Error::invalid(format!(
                "{} vectors but {} labels",
                vectors.len(),
                labels.len()
            )));
        }
        if class_names.len() < 2 {
            return Err(Error::invalid("a dataset needs at least two classes"));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::invalid(format!("label {bad} out of range")));
        }
        if let Some(v) = vectors
            .iter()
            .find(|v| v.entries.last().is_some_and(|&(i, _)| i >= vocab_size))
        {
            return Err(Error::invalid(format!(
                "feature index {} exceeds vocabulary size {vocab_size}",
                v.entries.last().unwrap().0
            )));
        }
        Ok(Self {
            vectors,
            labels,
            class_names,
            vocab_size,
        })
    }

    pub fn vectors(&self) -> &[FeatureVector] {
        &self.vectors
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    fn check_classes(&self, context: &str) -> Result<()> {
        let missing: Vec<String> = self
            .class_counts()
            .iter()
            .zip(&self.class_names)
            .filter(|(c, _)| **c == 0)
            .map(|(_, n)| n.clone())
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::EmptyClass {
                context: context.to_string(),
                classes: missing,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    Mnb(MultinomialNb),
    BernoulliNb(BernoulliNb),
    Tree(DecisionTree),
    Smo(OneVsRestSvm),
    Bagging(Bagging),
    AdaBoost(AdaBoost),
}

/// A fitted, immutable classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: LearnerSpec,
    pub class_names: Vec<String>,
    pub vocab_size: usize,
    pub params: ModelParams,
}

pub fn train(spec: &LearnerSpec, data: &Dataset) -> Result<TrainedModel> {
    data.check_classes(&format!("training {}", spec.algorithm))?;
    let params = match spec.algorithm {
        Algorithm::Mnb => ModelParams::Mnb(MultinomialNb::fit(data, spec.param("alpha"))),
        Algorithm::BernoulliNb => {
            ModelParams::BernoulliNb(BernoulliNb::fit(data, spec.param("alpha")))
        }
        Algorithm::Tree => {
            let weights = vec![1.0; data.len()];
            ModelParams::Tree(DecisionTree::fit(data, &weights, &spec.tree_params()))
        }
        Algorithm::Smo => ModelParams::Smo(OneVsRestSvm::fit(
            data,
            &SmoParams {
                c: spec.param("c"),
                tol: spec.param("tol"),
                max_passes: spec.param("max_passes") as usize,
            },
        )?),
        Algorithm::Bagging => ModelParams::Bagging(Bagging::fit(
            data,
            spec.param("rounds") as usize,
            spec.param("bootstrap") != 0.0,
            &spec.tree_params(),
            spec.seed,
        )),
        Algorithm::AdaBoost => ModelParams::AdaBoost(AdaBoost::fit(
            data,
            spec.param("rounds") as usize,
            &spec.tree_params(),
        )),
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        class_names: data.class_names.clone(),
        vocab_size: data.vocab_size,
        params,
    })
}

impl TrainedModel {
    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Per-class scores in `[0, 1]` summing to 1. For the naive Bayes models
    /// these are posterior probabilities.
    pub fn predict_scores(&self, x: &FeatureVector) -> Vec<f64> {
        match &self.params {
            ModelParams::Mnb(m) => m.scores(x),
            ModelParams::BernoulliNb(m) => m.scores(x),
            ModelParams::Tree(m) => m.scores(x),
            ModelParams::Smo(m) => m.scores(x),
            ModelParams::Bagging(m) => m.scores(x),
            ModelParams::AdaBoost(m) => m.scores(x),
        }
    }

    pub fn predict(&self, x: &FeatureVector) -> usize {
        argmax(&self.predict_scores(x))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in logits.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in logits.iter_mut() {
        *v /= sum;
    }
}

pub(crate) fn normalize_in_place(v: &mut [f64]) {
    let sum: f64 = v.iter().sum();
    if sum > 0.0 {
        for x in v.iter_mut() {
            *x /= sum;
        }
    } else {
        let u = 1.0 / v.len() as f64;
        v.iter_mut().for_each(|x| *x = u);
    }
}
