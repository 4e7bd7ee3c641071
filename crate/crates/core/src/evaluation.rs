//! Cross-validation, confusion matrices, support-weighted precision / recall /
//! F, rank-based AUC and holdout error analysis.
//!
//! Metrics are computed from the pooled confusion matrix: every example is
//! predicted exactly once across the folds and the counts are summed. The
//! mean of per-fold metrics is reported alongside for comparison.

use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::{outcome_index, outcome_names, train_cascade, CascadeModel, StageModel};
use crate::corpus::{AnnotatedTweet, CategoryLabel, RelevanceLabel};
use crate::error::{Error, Result};
use crate::learners::{argmax, LearnerSpec};
use crate::rng::SeedStream;
use crate::textprep::NormalizerConfig;

pub const LIBRARY_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Assignment of examples to `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub seed: u64,
    pub stratified: bool,
}

impl FoldPlan {
    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.assignments[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.assignments[i] != fold).collect()
    }
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::invalid("k must be at least 2"));
    }
    if k > n {
        return Err(Error::invalid(format!("k = {k} exceeds the {n} examples")));
    }
    Ok(())
}

/// Stratified k-fold plan: each class is shuffled, the classes are laid end
/// to end and positions are dealt round-robin. Fold sizes and per-class
/// counts per fold then differ by at most one.
pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64) -> Result<FoldPlan> {
    check_k(labels.len(), k)?;
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut rng = SeedStream::new(seed).rng("stratified-kfold");
    let mut order = Vec::with_capacity(labels.len());
    for c in 0..n_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        members.shuffle(&mut rng);
        order.extend(members);
    }
    let mut assignments = vec![0; labels.len()];
    for (pos, &i) in order.iter().enumerate() {
        assignments[i] = pos % k;
    }
    Ok(FoldPlan {
        k,
        assignments,
        seed,
        stratified: true,
    })
}

/// Plain shuffled k-fold plan.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    check_k(n, k)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut SeedStream::new(seed).rng("kfold"));
    let mut assignments = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        assignments[i] = pos % k;
    }
    Ok(FoldPlan {
        k,
        assignments,
        seed,
        stratified: false,
    })
}

/// Stratified train/holdout split. Each class contributes
/// `round(fraction · size)` examples to the holdout. Returns sorted
/// `(train, holdout)` index lists.
pub fn holdout_split(labels: &[usize], fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::invalid("holdout fraction must be in [0, 1)"));
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut rng = SeedStream::new(seed).rng("holdout");
    let mut holdout = Vec::new();
    for c in 0..n_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        members.shuffle(&mut rng);
        let take = (fraction * members.len() as f64).round() as usize;
        holdout.extend_from_slice(&members[..take]);
    }
    holdout.sort_unstable();
    let train = (0..labels.len()).filter(|i| holdout.binary_search(i).is_err()).collect();
    Ok((train, holdout))
}

/// Rows are actual classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub class_names: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(class_names: Vec<String>) -> Self {
        let c = class_names.len();
        Self {
            class_names,
            counts: vec![vec![0; c]; c],
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>, class_names: Vec<String>) -> Result<Self> {
        let c = class_names.len();
        if counts.len() != c || counts.iter().any(|r| r.len() != c) {
            return Err(Error::invalid("confusion matrix must be square and match class names"));
        }
        Ok(Self {
            class_names,
            counts,
        })
    }

    /// Builds a matrix laid out with predictions in rows and actual classes
    /// in columns, as some published tables are.
    pub fn from_predicted_rows(counts: Vec<Vec<u64>>, class_names: Vec<String>) -> Result<Self> {
        Ok(Self::from_counts(counts, class_names)?.transposed())
    }

    pub fn from_predictions(actual: &[usize], predicted: &[usize], class_names: Vec<String>) -> Self {
        let mut cm = Self::new(class_names);
        for (&a, &p) in actual.iter().zip(predicted) {
            cm.add(a, p);
        }
        cm
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn add(&mut self, actual: usize, predicted: usize) {
        self.counts[actual][predicted] += 1;
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (r, o) in self.counts.iter_mut().zip(&other.counts) {
            for (a, b) in r.iter_mut().zip(o) {
                *a += b;
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    pub fn col_sum(&self, j: usize) -> u64 {
        self.counts.iter().map(|r| r[j]).sum()
    }

    pub fn transposed(&self) -> Self {
        let c = self.n_classes();
        let counts = (0..c).map(|i| (0..c).map(|j| self.counts[j][i]).collect()).collect();
        Self {
            class_names: self.class_names.clone(),
            counts,
        }
    }

    /// Reorders classes: new class `i` is old class `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let counts = perm
            .iter()
            .map(|&i| perm.iter().map(|&j| self.counts[i][j]).collect())
            .collect();
        Self {
            class_names: perm.iter().map(|&i| self.class_names[i].clone()).collect(),
            counts,
        }
    }

    /// CSV with a header row and a leading column of class names.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["actual\\predicted".to_string()];
        header.extend(self.class_names.iter().cloned());
        w.write_record(&header)?;
        for (name, row) in self.class_names.iter().zip(&self.counts) {
            let mut rec = vec![name.clone()];
            rec.extend(row.iter().map(u64::to_string));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("confusion matrix", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub name: String,
    pub support: u64,
    pub predicted: u64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub tp_rate: f64,
    pub fp_rate: f64,
    /// Class never predicted: precision reported as 0.
    pub precision_undefined: bool,
    /// Class absent from the actual labels: recall reported as 0.
    pub recall_undefined: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedMetrics {
    pub tp_rate: f64,
    pub fp_rate: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub total: u64,
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    /// Averages weighted by actual-class support.
    pub weighted: WeightedMetrics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_class_auc: Option<Vec<Option<f64>>>,
    pub flags: Vec<String>,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

/// Per-class and support-weighted metrics of a confusion matrix. The AUC
/// fields are left empty.
pub fn weighted_metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::invalid("confusion matrix is empty"));
    }
    let mut flags = Vec::new();
    let mut per_class = Vec::with_capacity(cm.n_classes());
    let mut weighted = WeightedMetrics {
        tp_rate: 0.0,
        fp_rate: 0.0,
        precision: 0.0,
        recall: 0.0,
        f_measure: 0.0,
    };
    for (c, name) in cm.class_names.iter().enumerate() {
        let tp = cm.counts[c][c];
        let support = cm.row_sum(c);
        let predicted = cm.col_sum(c);
        let fp = predicted - tp;
        let negatives = total - support;
        let (precision, p_undef) = ratio(tp, predicted);
        let (recall, r_undef) = ratio(tp, support);
        let (fp_rate, _) = ratio(fp, negatives);
        if p_undef {
            flags.push(format!("precision of `{name}` undefined (never predicted); reported as 0"));
        }
        if r_undef {
            flags.push(format!("recall of `{name}` undefined (no actual examples); reported as 0"));
        }
        let f = harmonic(precision, recall);
        let w = support as f64 / total as f64;
        weighted.tp_rate += w * recall;
        weighted.fp_rate += w * fp_rate;
        weighted.precision += w * precision;
        weighted.recall += w * recall;
        weighted.f_measure += w * f;
        per_class.push(ClassMetrics {
            name: name.clone(),
            support,
            predicted,
            precision,
            recall,
            f_measure: f,
            tp_rate: recall,
            fp_rate,
            precision_undefined: p_undef,
            recall_undefined: r_undef,
        });
    }
    Ok(MetricsReport {
        total,
        accuracy: cm.trace() as f64 / total as f64,
        per_class,
        weighted,
        auc: None,
        per_class_auc: None,
        flags,
    })
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half (Mann–Whitney U with mid-ranks).
pub fn auc_binary(scores: &[f64], positive: &[bool]) -> Result<f64> {
    if scores.len() != positive.len() {
        return Err(Error::invalid("scores and labels differ in length"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("NaN score"));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::invalid("AUC needs both positive and negative examples"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end share their mean
        let mid_rank = (start + 1 + end) as f64 / 2.0;
        let pos_in_group = order[start..end].iter().filter(|&&i| positive[i]).count();
        rank_sum_pos += mid_rank * pos_in_group as f64;
        start = end;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// One-vs-rest AUC per class, averaged with class-support weights. Classes
/// without examples get `None` and zero weight.
pub fn auc_weighted(scores: &[Vec<f64>], labels: &[usize]) -> Result<(f64, Vec<Option<f64>>)> {
    if scores.len() != labels.len() {
        return Err(Error::invalid("scores and labels differ in length"));
    }
    let n_classes = scores.first().map_or(0, Vec::len);
    let mut support = vec![0usize; n_classes];
    for &l in labels {
        if l >= n_classes {
            return Err(Error::invalid(format!("label {l} out of range")));
        }
        support[l] += 1;
    }
    if support.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::invalid("AUC needs at least two classes present"));
    }
    let mut per_class = Vec::with_capacity(n_classes);
    let mut acc = 0.0;
    for c in 0..n_classes {
        if support[c] == 0 {
            per_class.push(None);
            continue;
        }
        let col: Vec<f64> = scores.iter().map(|s| s[c]).collect();
        let pos: Vec<bool> = labels.iter().map(|&l| l == c).collect();
        let auc = auc_binary(&col, &pos)?;
        acc += auc * support[c] as f64;
        per_class.push(Some(auc));
    }
    Ok((acc / labels.len() as f64, per_class))
}

/// Token sequences with class labels; vocabularies are built per fold.
#[derive(Debug, Clone)]
pub struct LabeledDocs {
    pub docs: Vec<Vec<String>>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
}

impl LabeledDocs {
    pub fn new(docs: Vec<Vec<String>>, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        if docs.len() != labels.len() {
            return Err(Error::invalid("docs and labels differ in length"));
        }
        if labels.iter().any(|&l| l >= class_names.len()) {
            return Err(Error::invalid("label out of range"));
        }
        Ok(Self {
            docs,
            labels,
            class_names,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Relevance-stage view of annotated tweets.
    pub fn relevance(annotated: &[AnnotatedTweet], normalizer: &NormalizerConfig) -> Result<Self> {
        Self::new(
            annotated.iter().map(|a| normalizer.tokens(&a.tweet.text)).collect(),
            annotated.iter().map(|a| a.relevance.index()).collect(),
            RelevanceLabel::class_names(),
        )
    }

    /// Category-stage view: relevant tweets that carry a category.
    pub fn category(annotated: &[AnnotatedTweet], normalizer: &NormalizerConfig) -> Result<Self> {
        let (docs, labels) = annotated
            .iter()
            .filter(|a| a.relevance == RelevanceLabel::Relevant)
            .filter_map(|a| a.category.map(|c| (normalizer.tokens(&a.tweet.text), c.index())))
            .unzip();
        Self::new(docs, labels, CategoryLabel::class_names())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub library_version: String,
    pub learner: String,
    pub k: usize,
    pub seed: u64,
    pub stratified: bool,
    pub confusion: ConfusionMatrix,
    /// Metrics of the pooled matrix; AUC over pooled scores.
    pub metrics: MetricsReport,
    /// Mean of the per-fold weighted metrics.
    pub fold_mean: FoldSummary,
}

struct FoldOutput {
    fold: usize,
    indices: Vec<usize>,
    predicted: Vec<usize>,
    scores: Vec<Vec<f64>>,
}

fn pool(
    folds: Vec<FoldOutput>,
    labels: &[usize],
    class_names: Vec<String>,
    learner: String,
    plan: &FoldPlan,
) -> Result<CvReport> {
    let n = labels.len();
    let mut predicted = vec![usize::MAX; n];
    let mut scores = vec![Vec::new(); n];
    let mut fold_metrics = Vec::new();
    for f in folds {
        let actual: Vec<usize> = f.indices.iter().map(|&i| labels[i]).collect();
        let cm = ConfusionMatrix::from_predictions(&actual, &f.predicted, class_names.clone());
        if let Ok(mut m) = weighted_metrics(&cm) {
            m.auc = auc_weighted(&f.scores, &actual).ok().map(|(a, _)| a);
            fold_metrics.push(m);
        }
        for ((i, p), s) in f.indices.into_iter().zip(f.predicted).zip(f.scores) {
            debug_assert_eq!(predicted[i], usize::MAX, "example {i} predicted twice (fold {})", f.fold);
            predicted[i] = p;
            scores[i] = s;
        }
    }
    if predicted.contains(&usize::MAX) {
        return Err(Error::invalid("fold plan does not cover every example"));
    }
    let confusion = ConfusionMatrix::from_predictions(labels, &predicted, class_names);
    let mut metrics = weighted_metrics(&confusion)?;
    if let Ok((auc, per_class)) = auc_weighted(&scores, labels) {
        metrics.auc = Some(auc);
        metrics.per_class_auc = Some(per_class);
    }
    let m = fold_metrics.len().max(1) as f64;
    let aucs: Vec<f64> = fold_metrics.iter().filter_map(|r| r.auc).collect();
    let fold_mean = FoldSummary {
        precision: fold_metrics.iter().map(|r| r.weighted.precision).sum::<f64>() / m,
        recall: fold_metrics.iter().map(|r| r.weighted.recall).sum::<f64>() / m,
        f_measure: fold_metrics.iter().map(|r| r.weighted.f_measure).sum::<f64>() / m,
        auc: (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64),
    };
    Ok(CvReport {
        library_version: LIBRARY_VERSION.to_string(),
        learner,
        k: plan.k,
        seed: plan.seed,
        stratified: plan.stratified,
        confusion,
        metrics,
        fold_mean,
    })
}

fn fold_seed(spec: &LearnerSpec, fold: usize) -> LearnerSpec {
    let seed = SeedStream::new(spec.seed()).split(&format!("fold-{fold}")).seed();
    spec.clone().with_seed(seed)
}

fn pick<T: Clone>(items: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| items[i].clone()).collect()
}

/// k-fold cross-validation of one learner. Each fold builds its vocabulary
/// and model from the other `k − 1` folds only.
pub fn cross_validate(spec: &LearnerSpec, data: &LabeledDocs, plan: &FoldPlan) -> Result<CvReport> {
    if plan.len() != data.len() {
        return Err(Error::invalid("fold plan and data differ in length"));
    }
    let folds = (0..plan.k)
        .into_par_iter()
        .map(|fold| -> Result<FoldOutput> {
            let train_idx = plan.train_indices(fold);
            let test_idx = plan.test_indices(fold);
            let stage = StageModel::train(
                &pick(&data.docs, &train_idx),
                &pick(&data.labels, &train_idx),
                data.class_names.clone(),
                &fold_seed(spec, fold),
            )
            .map_err(|e| Error::Fold {
                fold,
                source: Box::new(e),
            })?;
            let scores: Vec<Vec<f64>> = test_idx.iter().map(|&i| stage.scores(&data.docs[i])).collect();
            Ok(FoldOutput {
                fold,
                predicted: scores.iter().map(|s| argmax(s)).collect(),
                indices: test_idx,
                scores,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    pool(
        folds,
        &data.labels,
        data.class_names.clone(),
        spec.algorithm().to_string(),
        plan,
    )
}

/// Cross-validates the full cascade over the five outcomes (not relevant
/// plus four categories). Relevant tweets without a category are skipped.
pub fn cross_validate_cascade(
    annotated: &[AnnotatedTweet],
    relevance_spec: &LearnerSpec,
    category_spec: &LearnerSpec,
    normalizer: &NormalizerConfig,
    k: usize,
    seed: u64,
) -> Result<CvReport> {
    let eligible: Vec<&AnnotatedTweet> = annotated
        .iter()
        .filter(|a| outcome_index(a.relevance, a.category).is_some())
        .collect();
    let labels: Vec<usize> = eligible
        .iter()
        .map(|a| outcome_index(a.relevance, a.category).unwrap())
        .collect();
    let plan = stratified_kfold(&labels, k, seed)?;
    let folds = (0..k)
        .into_par_iter()
        .map(|fold| -> Result<FoldOutput> {
            let train: Vec<AnnotatedTweet> = plan
                .train_indices(fold)
                .into_iter()
                .map(|i| eligible[i].clone())
                .collect();
            let model = train_cascade(
                &train,
                &fold_seed(relevance_spec, fold),
                &fold_seed(category_spec, fold),
                normalizer,
            )
            .map_err(|e| Error::Fold {
                fold,
                source: Box::new(e),
            })?;
            let test_idx = plan.test_indices(fold);
            let predicted = test_idx
                .iter()
                .map(|&i| model.classify(&eligible[i].tweet).outcome())
                .collect();
            let scores = test_idx
                .iter()
                .map(|&i| model.outcome_scores(&eligible[i].tweet.text))
                .collect();
            Ok(FoldOutput {
                fold,
                indices: test_idx,
                predicted,
                scores,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let learner = format!("cascade({}, {})", relevance_spec.algorithm(), category_spec.algorithm());
    pool(folds, &labels, outcome_names(), learner, &plan)
}

/// A published figure that disagrees with the value recomputed from counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub class: String,
    pub metric: String,
    pub published: f64,
    pub computed: f64,
}

/// Per-class values reported alongside a confusion matrix elsewhere.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PublishedMetrics {
    pub precision: Option<Vec<f64>>,
    pub recall: Option<Vec<f64>>,
    pub f_measure: Option<Vec<f64>>,
}

/// Lists every published per-class value further than `tol` from the value
/// recomputed from the matrix. Nothing is corrected.
pub fn compare_with_published(
    report: &MetricsReport,
    published: &PublishedMetrics,
    tol: f64,
) -> Vec<Discrepancy> {
    let mut out = Vec::new();
    let mut check = |metric: &str, values: &Option<Vec<f64>>, get: fn(&ClassMetrics) -> f64| {
        if let Some(values) = values {
            for (cm, &p) in report.per_class.iter().zip(values) {
                let c = get(cm);
                if (c - p).abs() > tol {
                    out.push(Discrepancy {
                        class: cm.name.clone(),
                        metric: metric.to_string(),
                        published: p,
                        computed: c,
                    });
                }
            }
        }
    };
    check("precision", &published.precision, |m| m.precision);
    check("recall", &published.recall, |m| m.recall);
    check("f_measure", &published.f_measure, |m| m.f_measure);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorAnalysis {
    pub library_version: String,
    pub holdout_size: usize,
    /// Caller's assertion that the holdout was not used for training.
    pub disjoint_from_training: bool,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricsReport,
    /// Metrics of the positive class for binary problems.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub positive_class: Option<ClassMetrics>,
    pub discrepancies: Vec<Discrepancy>,
}

impl ErrorAnalysis {
    pub fn from_confusion(
        confusion: ConfusionMatrix,
        positive: Option<usize>,
        disjoint_from_training: bool,
    ) -> Result<Self> {
        let metrics = weighted_metrics(&confusion)?;
        let positive_class = positive.map(|p| metrics.per_class[p].clone());
        Ok(Self {
            library_version: LIBRARY_VERSION.to_string(),
            holdout_size: confusion.total() as usize,
            disjoint_from_training,
            confusion,
            metrics,
            positive_class,
            discrepancies: Vec::new(),
        })
    }

    /// Records differences against published per-class figures.
    pub fn flag_published(&mut self, published: &PublishedMetrics, tol: f64) {
        self.discrepancies = compare_with_published(&self.metrics, published, tol);
    }
}

/// Error analysis of predictions on a holdout set.
pub fn error_analysis(
    actual: &[usize],
    predicted: &[usize],
    class_names: Vec<String>,
    positive: Option<usize>,
    disjoint_from_training: bool,
) -> Result<ErrorAnalysis> {
    if actual.is_empty() {
        return Err(Error::invalid("holdout is empty"));
    }
    if actual.len() != predicted.len() {
        return Err(Error::invalid("actual and predicted differ in length"));
    }
    let cm = ConfusionMatrix::from_predictions(actual, predicted, class_names);
    ErrorAnalysis::from_confusion(cm, positive, disjoint_from_training)
}

/// Stage-level error analysis of any trained stage on labeled documents.
pub fn stage_error_analysis(
    stage: &StageModel,
    holdout: &LabeledDocs,
    positive: Option<usize>,
    disjoint_from_training: bool,
) -> Result<ErrorAnalysis> {
    let predicted: Vec<usize> = holdout.docs.iter().map(|d| argmax(&stage.scores(d))).collect();
    error_analysis(
        &holdout.labels,
        &predicted,
        holdout.class_names.clone(),
        positive,
        disjoint_from_training,
    )
}

/// Holdout analysis of a cascade: the relevance gate on every tweet, the
/// category stage on relevant tweets carrying a category, and the end-to-end
/// five-outcome matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeErrorAnalysis {
    pub relevance: ErrorAnalysis,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub category: Option<ErrorAnalysis>,
    pub end_to_end: Option<ErrorAnalysis>,
}

pub fn cascade_error_analysis(
    model: &CascadeModel,
    holdout: &[AnnotatedTweet],
    disjoint_from_training: bool,
) -> Result<CascadeErrorAnalysis> {
    if holdout.is_empty() {
        return Err(Error::invalid("holdout is empty"));
    }
    let rel_docs = LabeledDocs::relevance(holdout, &model.normalizer)?;
    let relevance = stage_error_analysis(
        &model.relevance,
        &rel_docs,
        Some(RelevanceLabel::Relevant.index()),
        disjoint_from_training,
    )?;
    let cat_docs = LabeledDocs::category(holdout, &model.normalizer)?;
    let category = if cat_docs.is_empty() {
        None
    } else {
        Some(stage_error_analysis(&model.category, &cat_docs, None, disjoint_from_training)?)
    };
    let (actual, predicted): (Vec<usize>, Vec<usize>) = holdout
        .iter()
        .filter_map(|a| {
            outcome_index(a.relevance, a.category).map(|o| (o, model.classify(&a.tweet).outcome()))
        })
        .unzip();
    let end_to_end = if actual.is_empty() {
        None
    } else {
        Some(error_analysis(&actual, &predicted, outcome_names(), None, disjoint_from_training)?)
    };
    Ok(CascadeErrorAnalysis {
        relevance,
        category,
        end_to_end,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    /// Counts concordant pairs directly.
    fn pair_oracle(scores: &[f64], positive: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if positive[i] && !positive[j] {
                    den += 1.0;
                    if scores[i] > scores[j] {
                        num += 1.0;
                    } else if scores[i] == scores[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    #[test]
    fn kfold_singletons() {
        let plan = stratified_kfold(&[0, 1, 0, 1, 0, 1, 0, 1, 0, 1], 10, 3).unwrap();
        assert_eq!(plan.fold_sizes(), vec![1; 10]);
    }

    #[test]
    fn stratification_sixty_forty() {
        let labels: Vec<usize> = (0..100).map(|i| usize::from(i >= 60)).collect();
        let plan = stratified_kfold(&labels, 10, 99).unwrap();
        for f in 0..10 {
            let idx = plan.test_indices(f);
            let ones = idx.iter().filter(|&&i| labels[i] == 1).count();
            assert_eq!(idx.len() - ones, 6);
            assert_eq!(ones, 4);
        }
        assert_eq!(plan, stratified_kfold(&labels, 10, 99).unwrap());
        assert_ne!(plan, stratified_kfold(&labels, 10, 100).unwrap());
    }

    #[test]
    fn kfold_errors() {
        assert!(stratified_kfold(&[0, 1, 0], 4, 0).is_err());
        assert!(stratified_kfold(&[0, 1, 0], 1, 0).is_err());
        assert!(kfold(3, 4, 0).is_err());
    }

    #[test]
    fn small_classes_are_spread() {
        let labels = [0, 0, 0, 0, 0, 0, 0, 1, 1, 2];
        let plan = stratified_kfold(&labels, 5, 1).unwrap();
        for c in 0..3 {
            let per_fold: Vec<usize> = (0..5)
                .map(|f| plan.test_indices(f).iter().filter(|&&i| labels[i] == c).count())
                .collect();
            assert!(per_fold.iter().max().unwrap() - per_fold.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn holdout_is_stratified_and_disjoint() {
        let labels: Vec<usize> = (0..50).map(|i| usize::from(i >= 30)).collect();
        let (train, hold) = holdout_split(&labels, 0.2, 5).unwrap();
        assert_eq!(hold.len(), 10);
        assert_eq!(hold.iter().filter(|&&i| labels[i] == 1).count(), 4);
        assert_eq!(train.len() + hold.len(), 50);
        assert!(train.iter().all(|i| !hold.contains(i)));
        assert!(holdout_split(&labels, 1.0, 5).is_err());
        assert!(holdout_split(&labels, 0.0, 5).unwrap().1.is_empty());
    }

    #[test]
    fn identity_matrix_is_perfect() {
        let cm = ConfusionMatrix::from_counts(vec![vec![5, 0], vec![0, 5]], names(2)).unwrap();
        let m = weighted_metrics(&cm).unwrap();
        assert_eq!(m.weighted.precision, 1.0);
        assert_eq!(m.weighted.recall, 1.0);
        assert_eq!(m.weighted.f_measure, 1.0);
        assert_eq!(m.weighted.fp_rate, 0.0);
    }

    #[test]
    fn zero_denominators_are_flagged() {
        let cm = ConfusionMatrix::from_counts(vec![vec![3, 0], vec![2, 0]], names(2)).unwrap();
        let m = weighted_metrics(&cm).unwrap();
        assert!(m.per_class[1].precision_undefined);
        assert_eq!(m.per_class[1].precision, 0.0);
        assert!(!m.flags.is_empty());
        let empty = ConfusionMatrix::new(names(2));
        assert!(weighted_metrics(&empty).is_err());
    }

    #[test]
    fn majority_predictor_on_balanced_holdout() {
        let actual: Vec<usize> = (0..40).map(|i| i % 4).collect();
        let predicted = vec![0; 40];
        let ea = error_analysis(&actual, &predicted, names(4), None, true).unwrap();
        assert_eq!(ea.metrics.accuracy, 0.25);
        assert!(error_analysis(&[], &[], names(4), None, true).is_err());
    }

    #[test]
    fn auc_hand_case() {
        let auc = auc_binary(&[0.9, 0.4, 0.6, 0.2], &[true, true, false, false]).unwrap();
        assert_eq!(auc, 0.75);
        assert_eq!(auc_binary(&[0.9, 0.8, 0.1], &[true, true, false]).unwrap(), 1.0);
        assert_eq!(auc_binary(&[0.3; 6], &[true, false, true, false, true, false]).unwrap(), 0.5);
        assert!(auc_binary(&[0.1, 0.2], &[true, true]).is_err());
    }

    #[test]
    fn weighted_auc_cases() {
        let scores = vec![vec![0.3, 0.7], vec![0.6, 0.4], vec![0.4, 0.6], vec![0.8, 0.2]];
        let labels = [1, 1, 0, 0];
        let (w, _) = auc_weighted(&scores, &labels).unwrap();
        let col: Vec<f64> = scores.iter().map(|s| s[1]).collect();
        let b = auc_binary(&col, &[true, true, false, false]).unwrap();
        assert!((w - b).abs() < 1e-15);

        let perfect = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        assert_eq!(auc_weighted(&perfect, &[0, 1, 2]).unwrap().0, 1.0);
        assert!(auc_weighted(&perfect, &[1, 1, 1]).is_err());
    }

    #[test]
    fn csv_export_has_headers() {
        let cm = ConfusionMatrix::from_counts(vec![vec![1, 2], vec![3, 4]], vec!["a".into(), "b".into()])
            .unwrap();
        let mut buf = Vec::new();
        cm.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "actual\\predicted,a,b\na,1,2\nb,3,4\n"
        );
    }

    proptest! {
        #[test]
        fn auc_matches_pair_oracle(
            data in proptest::collection::vec((0u8..20, any::<bool>()), 2..60)
        ) {
            let scores: Vec<f64> = data.iter().map(|(s, _)| *s as f64 / 7.0).collect();
            let pos: Vec<bool> = data.iter().map(|(_, p)| *p).collect();
            if pos.iter().any(|&p| p) && pos.iter().any(|&p| !p) {
                let auc = auc_binary(&scores, &pos).unwrap();
                prop_assert!((auc - pair_oracle(&scores, &pos)).abs() < 1e-12);
                // strictly monotone transform
                let warped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 2.0).collect();
                prop_assert_eq!(auc_binary(&warped, &pos).unwrap(), auc);
            }
        }

        #[test]
        fn weighted_recall_is_accuracy(
            counts in proptest::collection::vec(proptest::collection::vec(0u64..50, 3), 3)
        ) {
            let cm = ConfusionMatrix::from_counts(counts, names(3)).unwrap();
            if cm.total() > 0 {
                let m = weighted_metrics(&cm).unwrap();
                prop_assert!((m.weighted.recall - m.accuracy).abs() < 1e-12);
                for c in &m.per_class {
                    for v in [c.precision, c.recall, c.f_measure, c.fp_rate] {
                        prop_assert!((0.0..=1.0).contains(&v));
                    }
                }
                let p = cm.permuted(&[2, 0, 1]);
                let mp = weighted_metrics(&p).unwrap();
                prop_assert!((m.weighted.precision - mp.weighted.precision).abs() < 1e-12);
                prop_assert!((m.weighted.f_measure - mp.weighted.f_measure).abs() < 1e-12);
                prop_assert!((m.weighted.fp_rate - mp.weighted.fp_rate).abs() < 1e-12);
            }
        }

        #[test]
        fn stratified_plan_invariants(
            labels in proptest::collection::vec(0usize..4, 10..80),
            k in 2usize..10,
            seed in any::<u64>(),
        ) {
            let plan = stratified_kfold(&labels, k, seed).unwrap();
            let sizes = plan.fold_sizes();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            for c in 0..4 {
                let per: Vec<usize> = (0..k)
                    .map(|f| plan.test_indices(f).iter().filter(|&&i| labels[i] == c).count())
                    .collect();
                prop_assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1);
            }
        }
    }
}
