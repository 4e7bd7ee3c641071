//! Latent Dirichlet allocation by collapsed Gibbs sampling, top-word tables
//! and an intertopic distance map (Jensen–Shannon divergence embedded in two
//! dimensions with classical multidimensional scaling).

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cascade::CascadeVerdict;
use crate::corpus::{CategoryLabel, Corpus};
use crate::error::{Error, Result};
use crate::rng::SeedStream;
use crate::textprep::{build_vocabulary, NormalizerConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LdaConfig {
    pub k: usize,
    /// Document-topic prior; `None` means `50 / k`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    /// Every `thin`-th sweep after burn-in contributes to the estimate.
    pub thin: usize,
    pub seed: u64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        Self {
            k: 5,
            alpha: None,
            beta: 0.01,
            iterations: 1000,
            burn_in: 500,
            thin: 10,
            seed: 0,
        }
    }
}

impl LdaConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            ..Self::default()
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.k as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("LDA needs k >= 1"));
        }
        if self.alpha() <= 0.0 || !self.alpha().is_finite() {
            return Err(Error::invalid("LDA alpha must be positive"));
        }
        if self.beta <= 0.0 || !self.beta.is_finite() {
            return Err(Error::invalid("LDA beta must be positive"));
        }
        if self.iterations <= self.burn_in {
            return Err(Error::invalid("LDA iterations must exceed burn_in"));
        }
        if self.thin == 0 {
            return Err(Error::invalid("LDA thin must be at least 1"));
        }
        Ok(())
    }

    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    fn is_sample_sweep(&self, sweep: usize) -> bool {
        sweep > self.burn_in && (sweep - self.burn_in) % self.thin == 0
    }
}

/// Collapsed Gibbs state over integer-coded documents.
pub struct LdaSampler {
    docs: Vec<Vec<usize>>,
    z: Vec<Vec<usize>>,
    k: usize,
    v: usize,
    alpha: f64,
    beta: f64,
    /// `word_topic[w * k + t]`
    word_topic: Vec<u32>,
    topic_total: Vec<u32>,
    /// `doc_topic[d * k + t]`
    doc_topic: Vec<u32>,
    rng: ChaCha8Rng,
    probs: Vec<f64>,
}

impl LdaSampler {
    pub fn new(docs: Vec<Vec<usize>>, v: usize, config: &LdaConfig) -> Result<Self> {
        config.validate()?;
        let k = config.k;
        let mut rng = SeedStream::new(config.seed).rng("lda-init");
        let mut word_topic = vec![0u32; v * k];
        let mut topic_total = vec![0u32; k];
        let mut doc_topic = vec![0u32; docs.len() * k];
        let mut z = Vec::with_capacity(docs.len());
        for (d, doc) in docs.iter().enumerate() {
            let mut zd = Vec::with_capacity(doc.len());
            for &w in doc {
                if w >= v {
                    return Err(Error::invalid(format!("word id {w} outside vocabulary of {v}")));
                }
                let t = rng.random_range(0..k);
                word_topic[w * k + t] += 1;
                topic_total[t] += 1;
                doc_topic[d * k + t] += 1;
                zd.push(t);
            }
            z.push(zd);
        }
        Ok(Self {
            docs,
            z,
            k,
            v,
            alpha: config.alpha(),
            beta: config.beta,
            word_topic,
            topic_total,
            doc_topic,
            rng: SeedStream::new(config.seed).rng("lda-sweeps"),
            probs: vec![0.0; k],
        })
    }

    /// One full pass resampling every token's topic.
    pub fn sweep(&mut self) {
        let k = self.k;
        let v_beta = self.v as f64 * self.beta;
        for d in 0..self.docs.len() {
            for i in 0..self.docs[d].len() {
                let w = self.docs[d][i];
                let old = self.z[d][i];
                self.word_topic[w * k + old] -= 1;
                self.topic_total[old] -= 1;
                self.doc_topic[d * k + old] -= 1;

                let mut acc = 0.0;
                for t in 0..k {
                    let p = (f64::from(self.word_topic[w * k + t]) + self.beta)
                        / (f64::from(self.topic_total[t]) + v_beta)
                        * (f64::from(self.doc_topic[d * k + t]) + self.alpha);
                    acc += p;
                    self.probs[t] = acc;
                }
                let u = self.rng.random::<f64>() * acc;
                let new = self.probs.iter().position(|&c| u < c).unwrap_or(k - 1);

                self.word_topic[w * k + new] += 1;
                self.topic_total[new] += 1;
                self.doc_topic[d * k + new] += 1;
                self.z[d][i] = new;
            }
        }
    }

    pub fn total_tokens(&self) -> usize {
        self.docs.iter().map(Vec::len).sum()
    }

    /// Sum of all topic-word assignment counts.
    pub fn assigned_tokens(&self) -> u64 {
        self.word_topic.iter().map(|&c| u64::from(c)).sum()
    }

    pub fn phi(&self) -> Vec<Vec<f64>> {
        let v_beta = self.v as f64 * self.beta;
        (0..self.k)
            .map(|t| {
                let den = f64::from(self.topic_total[t]) + v_beta;
                (0..self.v)
                    .map(|w| (f64::from(self.word_topic[w * self.k + t]) + self.beta) / den)
                    .collect()
            })
            .collect()
    }

    pub fn theta(&self) -> Vec<Vec<f64>> {
        let k_alpha = self.k as f64 * self.alpha;
        (0..self.docs.len())
            .map(|d| {
                let den = self.docs[d].len() as f64 + k_alpha;
                (0..self.k)
                    .map(|t| (f64::from(self.doc_topic[d * self.k + t]) + self.alpha) / den)
                    .collect()
            })
            .collect()
    }

    pub fn topic_word_counts(&self) -> Vec<Vec<u32>> {
        (0..self.k)
            .map(|t| (0..self.v).map(|w| self.word_topic[w * self.k + t]).collect())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub vocabulary: Vec<String>,
    /// K × V topic-word probabilities.
    pub phi: Vec<Vec<f64>>,
    /// D × K document-topic probabilities.
    pub theta: Vec<Vec<f64>>,
    /// Final-sweep assignment counts, K × V.
    pub topic_word_counts: Vec<Vec<u32>>,
    pub doc_lengths: Vec<usize>,
    pub samples: usize,
    pub config: LdaConfig,
    pub config_fingerprint: String,
}

impl TopicModel {
    pub fn k(&self) -> usize {
        self.phi.len()
    }

    /// Share of corpus tokens attributed to each topic.
    pub fn prevalence(&self) -> Vec<f64> {
        let total: usize = self.doc_lengths.iter().sum();
        let mut out = vec![0.0; self.k()];
        if total == 0 {
            return out;
        }
        for (row, &len) in self.theta.iter().zip(&self.doc_lengths) {
            for (o, p) in out.iter_mut().zip(row) {
                *o += p * len as f64;
            }
        }
        out.iter_mut().for_each(|o| *o /= total as f64);
        out
    }
}

fn add_into(acc: &mut [Vec<f64>], x: &[Vec<f64>]) {
    for (a, r) in acc.iter_mut().zip(x) {
        for (ai, xi) in a.iter_mut().zip(r) {
            *ai += xi;
        }
    }
}

fn normalize_rows(rows: &mut [Vec<f64>]) {
    for r in rows {
        let s: f64 = r.iter().sum();
        r.iter_mut().for_each(|x| *x /= s);
    }
}

/// Fits LDA to token sequences. The estimate averages phi and theta over
/// the sampled post-burn-in sweeps.
pub fn fit_lda(docs: &[Vec<String>], config: &LdaConfig) -> Result<TopicModel> {
    fit_lda_observed(docs, config, |_| {})
}

/// Like [`fit_lda`], calling `observe` after every sweep.
pub fn fit_lda_observed<F>(docs: &[Vec<String>], config: &LdaConfig, mut observe: F) -> Result<TopicModel>
where
    F: FnMut(&LdaSampler),
{
    config.validate()?;
    if docs.iter().all(Vec::is_empty) {
        return Err(Error::invalid("LDA needs at least one non-empty document"));
    }
    let vocab = build_vocabulary(docs);
    if config.k > vocab.len() {
        warn!("LDA with {} topics over only {} distinct words", config.k, vocab.len());
    }
    let coded: Vec<Vec<usize>> = docs
        .iter()
        .map(|d| d.iter().map(|t| vocab.index_of(t).expect("token indexed")).collect())
        .collect();
    let mut sampler = LdaSampler::new(coded, vocab.len(), config)?;
    let mut phi = vec![vec![0.0; vocab.len()]; config.k];
    let mut theta = vec![vec![0.0; config.k]; docs.len()];
    let mut samples = 0;
    for sweep in 1..=config.iterations {
        sampler.sweep();
        observe(&sampler);
        if config.is_sample_sweep(sweep) {
            add_into(&mut phi, &sampler.phi());
            add_into(&mut theta, &sampler.theta());
            samples += 1;
        }
    }
    if samples == 0 {
        phi = sampler.phi();
        theta = sampler.theta();
        samples = 1;
    }
    normalize_rows(&mut phi);
    normalize_rows(&mut theta);
    Ok(TopicModel {
        vocabulary: vocab.tokens().to_vec(),
        phi,
        theta,
        topic_word_counts: sampler.topic_word_counts(),
        doc_lengths: docs.iter().map(Vec::len).collect(),
        samples,
        config: config.clone(),
        config_fingerprint: config.fingerprint(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordWeight {
    pub word: String,
    pub probability: f64,
}

/// The `n` most probable words of a topic, ties broken alphabetically.
pub fn top_words(model: &TopicModel, topic: usize, n: usize) -> Result<Vec<WordWeight>> {
    let row = model
        .phi
        .get(topic)
        .ok_or_else(|| Error::invalid(format!("topic {topic} out of range (k = {})", model.k())))?;
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| {
        row[b]
            .total_cmp(&row[a])
            .then_with(|| model.vocabulary[a].cmp(&model.vocabulary[b]))
    });
    Ok(order
        .into_iter()
        .take(n)
        .map(|i| WordWeight {
            word: model.vocabulary[i].clone(),
            probability: row[i],
        })
        .collect())
}

/// Jensen–Shannon divergence in nats, within `[0, ln 2]`.
pub fn jensen_shannon(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let m = 0.5 * (a + b);
        if a > 0.0 {
            acc += 0.5 * a * (a / m).ln();
        }
        if b > 0.0 {
            acc += 0.5 * b * (b / m).ln();
        }
    }
    acc.clamp(0.0, std::f64::consts::LN_2)
}

/// Classical (Torgerson) scaling of a distance matrix into `dims`
/// dimensions. Returns the coordinates and Kruskal's stress.
pub fn classical_mds(distances: &[Vec<f64>], dims: usize) -> (Vec<Vec<f64>>, f64) {
    let n = distances.len();
    let d2 = DMatrix::from_fn(n, n, |i, j| distances[i][j] * distances[i][j]);
    let j = DMatrix::<f64>::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64);
    let b = -0.5 * &j * d2 * &j;
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| eig.eigenvalues[c].total_cmp(&eig.eigenvalues[a]));
    let mut coords = vec![vec![0.0; dims]; n];
    for (dim, &e) in order.iter().take(dims).enumerate() {
        let lambda = eig.eigenvalues[e].max(0.0);
        let vec = eig.eigenvectors.column(e);
        // fix the sign so the largest-magnitude component is positive
        let pivot = (0..n)
            .max_by(|&a, &c| vec[a].abs().total_cmp(&vec[c].abs()))
            .unwrap_or(0);
        let sign = if vec[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            coords[i][dim] = sign * vec[i] * lambda.sqrt();
        }
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for a in 0..n {
        for c in (a + 1)..n {
            let fitted: f64 = coords[a]
                .iter()
                .zip(&coords[c])
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            num += (distances[a][c] - fitted).powi(2);
            den += distances[a][c].powi(2);
        }
    }
    let stress = if den > 0.0 { (num / den).sqrt() } else { 0.0 };
    (coords, stress)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntertopicMap {
    pub distances: Vec<Vec<f64>>,
    pub coords: Vec<[f64; 2]>,
    pub prevalence: Vec<f64>,
    pub stress: f64,
}

pub fn intertopic_map(model: &TopicModel) -> Result<IntertopicMap> {
    let k = model.k();
    if k < 2 {
        return Err(Error::invalid("intertopic map needs at least 2 topics"));
    }
    let mut distances = vec![vec![0.0; k]; k];
    for a in 0..k {
        for b in (a + 1)..k {
            let d = jensen_shannon(&model.phi[a], &model.phi[b]);
            distances[a][b] = d;
            distances[b][a] = d;
        }
    }
    let (coords, stress) = classical_mds(&distances, 2);
    Ok(IntertopicMap {
        coords: coords.into_iter().map(|c| [c[0], c[1]]).collect(),
        distances,
        prevalence: model.prevalence(),
        stress,
    })
}

impl IntertopicMap {
    /// `topic_id,x,y,prevalence,d0..d{k-1}`
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let k = self.coords.len();
        let mut header: Vec<String> = ["topic_id", "x", "y", "prevalence"].map(String::from).to_vec();
        header.extend((0..k).map(|j| format!("d{j}")));
        w.write_record(&header)?;
        for t in 0..k {
            let mut rec = vec![
                t.to_string(),
                self.coords[t][0].to_string(),
                self.coords[t][1].to_string(),
                self.prevalence[t].to_string(),
            ];
            rec.extend(self.distances[t].iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("intertopic map", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicSummary {
    pub topic: usize,
    pub prevalence: f64,
    pub top_words: Vec<WordWeight>,
    /// Tweets with the highest theta for this topic.
    pub exemplars: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryTopics {
    pub category: CategoryLabel,
    pub documents: usize,
    #[serde(skip)]
    pub doc_ids: Vec<String>,
    #[serde(skip)]
    pub model: Option<TopicModel>,
    pub topics: Vec<TopicSummary>,
}

/// Ids of the `n` documents with the highest theta for `topic`, ties going
/// to the earlier document.
pub fn exemplars(model: &TopicModel, ids: &[String], topic: usize, n: usize) -> Vec<String> {
    let mut order: Vec<usize> = (0..model.theta.len()).collect();
    order.sort_by(|&a, &b| model.theta[b][topic].total_cmp(&model.theta[a][topic]).then(a.cmp(&b)));
    order.into_iter().take(n).map(|d| ids[d].clone()).collect()
}

pub fn summarize_topics(model: &TopicModel, ids: &[String], n_words: usize, n_exemplars: usize) -> Vec<TopicSummary> {
    let prevalence = model.prevalence();
    (0..model.k())
        .map(|t| TopicSummary {
            topic: t,
            prevalence: prevalence[t],
            top_words: top_words(model, t, n_words).expect("topic in range"),
            exemplars: exemplars(model, ids, t, n_exemplars),
        })
        .collect()
}

/// Fits one model per predicted category on that category's tweets.
/// Categories without any non-empty tweet are skipped with a warning.
pub fn per_category_topics(
    verdicts: &[CascadeVerdict],
    corpus: &Corpus,
    normalizer: &NormalizerConfig,
    config: &LdaConfig,
    n_words: usize,
) -> Result<BTreeMap<CategoryLabel, CategoryTopics>> {
    let texts: HashMap<&str, &str> = corpus.iter().map(|r| (r.id.as_str(), r.text.as_str())).collect();
    let mut subsets: BTreeMap<CategoryLabel, (Vec<String>, Vec<Vec<String>>)> = BTreeMap::new();
    for v in verdicts {
        let Some(cat) = v.category else { continue };
        let text = texts
            .get(v.tweet_id.as_str())
            .ok_or_else(|| Error::UnknownId(v.tweet_id.clone()))?;
        let tokens = normalizer.tokens(text);
        if tokens.is_empty() {
            continue;
        }
        let entry = subsets.entry(cat).or_default();
        entry.0.push(v.tweet_id.clone());
        entry.1.push(tokens);
    }
    for cat in CategoryLabel::ALL {
        if !subsets.contains_key(&cat) {
            warn!("no tweets classified as {cat}; skipping its topic model");
        }
    }
    let root = SeedStream::new(config.seed);
    subsets
        .into_par_iter()
        .map(|(cat, (ids, docs))| {
            let cfg = LdaConfig {
                seed: root.split(cat.as_str()).seed(),
                ..config.clone()
            };
            let model = fit_lda(&docs, &cfg)?;
            let topics = summarize_topics(&model, &ids, n_words, 3);
            Ok((
                cat,
                CategoryTopics {
                    category: cat,
                    documents: docs.len(),
                    doc_ids: ids,
                    model: Some(model),
                    topics,
                },
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{RelevanceLabel, TweetRecord};
    use proptest::prelude::*;

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn quick(k: usize, seed: u64) -> LdaConfig {
        LdaConfig {
            iterations: 60,
            burn_in: 30,
            thin: 5,
            ..LdaConfig::new(k, seed)
        }
    }

    #[test]
    fn single_topic_closed_form() {
        let docs = vec![words("zika zika fever"), words("zika rash"), words("fever")];
        let cfg = quick(1, 4);
        let m = fit_lda(&docs, &cfg).unwrap();
        let total = 6.0;
        let v = 3.0;
        for (w, count) in [("zika", 3.0), ("fever", 2.0), ("rash", 1.0)] {
            let i = m.vocabulary.iter().position(|x| x == w).unwrap();
            let expected = (count + cfg.beta) / (total + v * cfg.beta);
            assert!((m.phi[0][i] - expected).abs() < 1e-9);
        }
        assert_eq!(top_words(&m, 0, 1).unwrap()[0].word, "zika");
    }

    #[test]
    fn rows_normalized_and_deterministic() {
        let docs = vec![words("a b c d"), words("c d e"), words("e f a"), vec![]];
        let m = fit_lda(&docs, &quick(3, 9)).unwrap();
        for row in m.phi.iter().chain(&m.theta) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&x| x > 0.0));
        }
        let again = fit_lda(&docs, &quick(3, 9)).unwrap();
        assert_eq!(serde_json::to_string(&m).unwrap(), serde_json::to_string(&again).unwrap());
    }

    #[test]
    fn errors_and_edge_cases() {
        assert!(fit_lda(&[vec![], vec![]], &quick(2, 0)).is_err());
        assert!(fit_lda(&[words("a")], &LdaConfig { burn_in: 60, ..quick(2, 0) }).is_err());
        let m = fit_lda(&[words("a b")], &quick(5, 0)).unwrap();
        assert_eq!(m.k(), 5);
        assert!(top_words(&m, 0, 0).unwrap().is_empty());
        assert_eq!(top_words(&m, 0, 10).unwrap().len(), 2);
        assert!(top_words(&m, 5, 1).is_err());
    }

    #[test]
    fn equal_probability_words_sort_alphabetically() {
        let m = fit_lda(&[words("pear apple")], &quick(1, 0)).unwrap();
        let top: Vec<String> = top_words(&m, 0, 2).unwrap().into_iter().map(|w| w.word).collect();
        assert_eq!(top, ["apple", "pear"]);
    }

    #[test]
    fn conservation_every_sweep() {
        let docs = vec![words("a b c a"), words("b c d"), words("d d a")];
        let mut checks = 0;
        fit_lda_observed(&docs, &quick(2, 1), |s| {
            assert_eq!(s.assigned_tokens(), s.total_tokens() as u64);
            checks += 1;
        })
        .unwrap();
        assert_eq!(checks, 60);
    }

    #[test]
    fn jsd_extremes() {
        assert!((jensen_shannon(&[1.0, 0.0], &[0.0, 1.0]) - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(jensen_shannon(&[0.3, 0.7], &[0.3, 0.7]), 0.0);
    }

    #[test]
    fn mds_reproduces_planar_triangle() {
        let d = vec![vec![0.0, 3.0, 4.0], vec![3.0, 0.0, 5.0], vec![4.0, 5.0, 0.0]];
        let (coords, stress) = classical_mds(&d, 2);
        assert!(stress < 1e-9);
        for a in 0..3 {
            for b in 0..3 {
                let fitted = ((coords[a][0] - coords[b][0]).powi(2) + (coords[a][1] - coords[b][1]).powi(2)).sqrt();
                assert!((fitted - d[a][b]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn identical_topics_coincide() {
        let model = TopicModel {
            vocabulary: words("a b c"),
            phi: vec![vec![0.2, 0.3, 0.5], vec![0.2, 0.3, 0.5], vec![0.9, 0.05, 0.05]],
            theta: vec![vec![0.4, 0.3, 0.3]],
            topic_word_counts: vec![vec![0; 3]; 3],
            doc_lengths: vec![3],
            samples: 1,
            config: LdaConfig::new(3, 0),
            config_fingerprint: String::new(),
        };
        let map = intertopic_map(&model).unwrap();
        assert_eq!(map.distances[0][1], 0.0);
        assert!((map.coords[0][0] - map.coords[1][0]).abs() < 1e-9);
        assert!((map.coords[0][1] - map.coords[1][1]).abs() < 1e-9);
        let single = TopicModel {
            phi: vec![vec![1.0 / 3.0; 3]],
            ..model
        };
        assert!(intertopic_map(&single).is_err());
    }

    #[test]
    fn only_symptoms_gives_one_model() {
        let corpus = Corpus::new(
            vec![
                TweetRecord::new("1", "zika fever rash"),
                TweetRecord::new("2", "fever headache zika"),
                TweetRecord::new("3", "football tonight"),
            ],
            "t",
        )
        .unwrap();
        let verdict = |id: &str, cat: Option<CategoryLabel>| CascadeVerdict {
            tweet_id: id.into(),
            relevance: if cat.is_some() { RelevanceLabel::Relevant } else { RelevanceLabel::NotRelevant },
            category: cat,
            relevance_scores: vec![0.5, 0.5],
            category_scores: cat.map(|_| vec![0.25; 4]),
        };
        let verdicts = vec![
            verdict("1", Some(CategoryLabel::Symptoms)),
            verdict("2", Some(CategoryLabel::Symptoms)),
            verdict("3", None),
        ];
        let out = per_category_topics(&verdicts, &corpus, &NormalizerConfig::default(), &quick(2, 3), 5).unwrap();
        assert_eq!(out.keys().copied().collect::<Vec<_>>(), [CategoryLabel::Symptoms]);
        let ct = &out[&CategoryLabel::Symptoms];
        let model = ct.model.as_ref().unwrap();
        for s in &ct.topics {
            let best = ct.doc_ids.iter().position(|id| id == &s.exemplars[0]).unwrap();
            let max = model.theta.iter().map(|r| r[s.topic]).fold(f64::MIN, f64::max);
            assert_eq!(model.theta[best][s.topic], max);
        }
    }

    fn distribution(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.0f64..1.0, n).prop_map(|mut v| {
            v[0] += 1e-3;
            let s: f64 = v.iter().sum();
            v.iter_mut().for_each(|x| *x /= s);
            v
        })
    }

    proptest! {
        #[test]
        fn jsd_properties((p, q) in (2usize..8).prop_flat_map(|n| (distribution(n), distribution(n)))) {
            let a = jensen_shannon(&p, &q);
            let b = jensen_shannon(&q, &p);
            prop_assert!((a - b).abs() < 1e-15);
            prop_assert!((0.0..=std::f64::consts::LN_2).contains(&a));
            prop_assert!(jensen_shannon(&p, &p).abs() < 1e-15);
        }
    }
}
