//! Two-stage classification: a relevance gate followed by a disease-category
//! classifier that only sees tweets the gate lets through.

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotatedTweet, CategoryLabel, Corpus, RelevanceLabel, TweetRecord};
use crate::error::{Error, Result};
use crate::learners::{self, argmax, Dataset, LearnerSpec, TrainedModel};
use crate::textprep::{build_vocabulary, vectorize, NormalizerConfig, Vocabulary};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Names of the five cascade outcomes, in outcome-index order.
pub const OUTCOME_NAMES: [&str; 5] = [
    "notrelevant",
    "symptoms",
    "treatment",
    "transmission",
    "prevention",
];

/// Outcome index: 0 for not relevant, `1 + category` otherwise.
pub fn outcome_index(relevance: RelevanceLabel, category: Option<CategoryLabel>) -> Option<usize> {
    match (relevance, category) {
        (RelevanceLabel::NotRelevant, _) => Some(0),
        (RelevanceLabel::Relevant, Some(c)) => Some(1 + c.index()),
        (RelevanceLabel::Relevant, None) => None,
    }
}

pub fn outcome_names() -> Vec<String> {
    OUTCOME_NAMES.iter().map(|s| s.to_string()).collect()
}

/// A learner with the vocabulary it was trained over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageModel {
    pub vocabulary: Vocabulary,
    pub vocabulary_fingerprint: String,
    pub model: TrainedModel,
}

impl StageModel {
    /// Builds the vocabulary from `docs` and trains `spec` on them.
    pub fn train(
        docs: &[Vec<String>],
        labels: &[usize],
        class_names: Vec<String>,
        spec: &LearnerSpec,
    ) -> Result<Self> {
        let vocabulary = build_vocabulary(docs);
        let vectors = docs.iter().map(|d| vectorize(d, &vocabulary)).collect();
        let data = Dataset::new(vectors, labels.to_vec(), class_names, vocabulary.len())?;
        let model = learners::train(spec, &data)?;
        Ok(Self {
            vocabulary_fingerprint: vocabulary.fingerprint(),
            vocabulary,
            model,
        })
    }

    pub fn scores(&self, tokens: &[String]) -> Vec<f64> {
        self.model
            .predict_scores(&vectorize(tokens, &self.vocabulary))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeModel {
    pub format_version: u32,
    pub normalizer: NormalizerConfig,
    pub normalizer_fingerprint: String,
    /// Classes `[relevant, notrelevant]`.
    pub relevance: StageModel,
    /// Classes `[symptoms, treatment, transmission, prevention]`.
    pub category: StageModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeVerdict {
    pub tweet_id: String,
    pub relevance: RelevanceLabel,
    pub category: Option<CategoryLabel>,
    pub relevance_scores: Vec<f64>,
    /// Present exactly when the gate said relevant.
    pub category_scores: Option<Vec<f64>>,
}

impl CascadeVerdict {
    pub fn outcome(&self) -> usize {
        outcome_index(self.relevance, self.category).expect("verdict invariant")
    }
}

fn stage_error(stage: &str, e: Error) -> Error {
    match e {
        Error::EmptyClass { classes, .. } => Error::EmptyClass {
            context: stage.to_string(),
            classes,
        },
        other => other,
    }
}

/// Trains the relevance gate on every annotated tweet and the category
/// classifier on relevant tweets that carry a category.
pub fn train_cascade(
    annotated: &[AnnotatedTweet],
    relevance_spec: &LearnerSpec,
    category_spec: &LearnerSpec,
    normalizer: &NormalizerConfig,
) -> Result<CascadeModel> {
    let docs: Vec<Vec<String>> = annotated
        .iter()
        .map(|a| normalizer.tokens(&a.tweet.text))
        .collect();
    let labels: Vec<usize> = annotated.iter().map(|a| a.relevance.index()).collect();
    check_present(&labels, &RelevanceLabel::class_names(), "stage 1 (relevance)")?;
    let relevance = StageModel::train(&docs, &labels, RelevanceLabel::class_names(), relevance_spec)
        .map_err(|e| stage_error("stage 1 (relevance)", e))?;

    let (cat_docs, cat_labels): (Vec<Vec<String>>, Vec<usize>) = annotated
        .iter()
        .zip(docs)
        .filter_map(|(a, d)| match (a.relevance, a.category) {
            (RelevanceLabel::Relevant, Some(c)) => Some((d, c.index())),
            _ => None,
        })
        .unzip();
    check_present(&cat_labels, &CategoryLabel::class_names(), "stage 2 (category)")?;
    let category = StageModel::train(
        &cat_docs,
        &cat_labels,
        CategoryLabel::class_names(),
        category_spec,
    )
    .map_err(|e| stage_error("stage 2 (category)", e))?;

    Ok(CascadeModel {
        format_version: MODEL_FORMAT_VERSION,
        normalizer_fingerprint: normalizer.fingerprint(),
        normalizer: normalizer.clone(),
        relevance,
        category,
    })
}

fn check_present(labels: &[usize], names: &[String], stage: &str) -> Result<()> {
    let missing: Vec<String> = names
        .iter()
        .enumerate()
        .filter(|(i, _)| !labels.contains(i))
        .map(|(_, n)| n.clone())
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::EmptyClass {
            context: stage.to_string(),
            classes: missing,
        })
    }
}

impl CascadeModel {
    pub fn classify(&self, tweet: &TweetRecord) -> CascadeVerdict {
        let tokens = self.normalizer.tokens(&tweet.text);
        let relevance_scores = self.relevance.scores(&tokens);
        let relevance = RelevanceLabel::from_index(argmax(&relevance_scores)).expect("two classes");
        let (category, category_scores) = match relevance {
            RelevanceLabel::NotRelevant => (None, None),
            RelevanceLabel::Relevant => {
                let s = self.category.scores(&tokens);
                (CategoryLabel::from_index(argmax(&s)), Some(s))
            }
        };
        CascadeVerdict {
            tweet_id: tweet.id.clone(),
            relevance,
            category,
            relevance_scores,
            category_scores,
        }
    }

    /// Five-outcome scores for ranking metrics: `P(not relevant)` and
    /// `P(relevant) · P(category)`. Unlike `classify`, this always runs
    /// stage 2.
    pub fn outcome_scores(&self, text: &str) -> Vec<f64> {
        let tokens = self.normalizer.tokens(text);
        let rel = self.relevance.scores(&tokens);
        let cat = self.category.scores(&tokens);
        let p_rel = rel[RelevanceLabel::Relevant.index()];
        let mut out = Vec::with_capacity(5);
        out.push(rel[RelevanceLabel::NotRelevant.index()]);
        out.extend(cat.iter().map(|c| p_rel * c));
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self)?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: CascadeModel = serde_json::from_str(&text)?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported model format version {}",
                model.format_version
            )));
        }
        if model.relevance.model.class_names != RelevanceLabel::class_names()
            || model.category.model.class_names != CategoryLabel::class_names()
        {
            return Err(Error::invalid("cascade stages have unexpected classes"));
        }
        Ok(model)
    }
}

/// Tweet counts per cascade outcome.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryDistribution {
    pub notrelevant: u64,
    pub symptoms: u64,
    pub treatment: u64,
    pub transmission: u64,
    pub prevention: u64,
}

impl CategoryDistribution {
    pub fn from_verdicts(verdicts: &[CascadeVerdict]) -> Self {
        let mut counts = [0u64; 5];
        for v in verdicts {
            counts[v.outcome()] += 1;
        }
        Self::from_counts(counts)
    }

    pub fn from_counts(c: [u64; 5]) -> Self {
        Self {
            notrelevant: c[0],
            symptoms: c[1],
            treatment: c[2],
            transmission: c[3],
            prevention: c[4],
        }
    }

    pub fn counts(&self) -> [u64; 5] {
        [
            self.notrelevant,
            self.symptoms,
            self.treatment,
            self.transmission,
            self.prevention,
        ]
    }

    pub fn total(&self) -> u64 {
        self.counts().iter().sum()
    }

    pub fn get(&self, category: CategoryLabel) -> u64 {
        self.counts()[1 + category.index()]
    }
}

/// Classifies every tweet; verdicts come back in corpus order.
pub fn classify_corpus(model: &CascadeModel, corpus: &Corpus) -> (Vec<CascadeVerdict>, CategoryDistribution) {
    let verdicts: Vec<CascadeVerdict> = corpus
        .records()
        .par_iter()
        .map(|t| model.classify(t))
        .collect();
    let dist = CategoryDistribution::from_verdicts(&verdicts);
    (verdicts, dist)
}

/// Writes verdicts as CSV: `tweet_id, relevance, category,
/// stage1_score_relevant, stage2_<category>...` (stage-2 cells empty when gated out).
pub fn write_verdicts_csv<W: Write>(verdicts: &[CascadeVerdict], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        "tweet_id".to_string(),
        "relevance".into(),
        "category".into(),
        "stage1_score_relevant".into(),
    ];
    header.extend(CategoryLabel::ALL.iter().map(|c| format!("stage2_{c}")));
    w.write_record(&header)?;
    for v in verdicts {
        let mut row = vec![
            v.tweet_id.clone(),
            v.relevance.to_string(),
            v.category.map(|c| c.to_string()).unwrap_or_default(),
            v.relevance_scores[RelevanceLabel::Relevant.index()].to_string(),
        ];
        match &v.category_scores {
            Some(s) => row.extend(s.iter().map(f64::to_string)),
            None => row.extend(std::iter::repeat_n(String::new(), 4)),
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("verdicts", e))?;
    Ok(())
}

/// Reads the CSV written by [`write_verdicts_csv`] back into verdicts.
pub fn read_verdicts_csv<R: std::io::Read>(reader: R) -> Result<Vec<CascadeVerdict>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad score `{s}` in verdicts")))
        };
        let relevance: RelevanceLabel = field(1).parse()?;
        let category = match field(2) {
            "" => None,
            c => Some(c.parse::<CategoryLabel>()?),
        };
        let p_rel = parse(field(3))?;
        let mut relevance_scores = vec![0.0; 2];
        relevance_scores[RelevanceLabel::Relevant.index()] = p_rel;
        relevance_scores[RelevanceLabel::NotRelevant.index()] = 1.0 - p_rel;
        let category_scores = if field(4).is_empty() {
            None
        } else {
            Some((4..8).map(|i| parse(field(i))).collect::<Result<Vec<_>>>()?)
        };
        if outcome_index(relevance, category).is_none() || category.is_some() != category_scores.is_some() {
            return Err(Error::invalid(format!("inconsistent verdict for `{}`", field(0))));
        }
        out.push(CascadeVerdict {
            tweet_id: field(0).to_string(),
            relevance,
            category,
            relevance_scores,
            category_scores,
        });
    }
    Ok(out)
}
