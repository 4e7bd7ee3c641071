//! Naive Bayes over unigram features.

use serde::{Deserialize, Serialize};

use super::{softmax_in_place, Dataset};
use crate::textprep::FeatureVector;

/// Multinomial naive Bayes with additive smoothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultinomialNb {
    pub log_priors: Vec<f64>,
    /// `feature_log_prob[c][w] = ln((N_cw + α) / (N_c + αV))`
    pub feature_log_prob: Vec<Vec<f64>>,
}

impl MultinomialNb {
    pub fn fit(data: &Dataset, alpha: f64) -> Self {
        let c = data.n_classes();
        let v = data.vocab_size();
        let mut word_counts = vec![vec![0f64; v]; c];
        let mut doc_counts = vec![0f64; c];
        for (x, &y) in data.vectors().iter().zip(data.labels()) {
            doc_counts[y] += 1.0;
            for &(i, n) in &x.entries {
                word_counts[y][i] += f64::from(n);
            }
        }
        let n = data.len() as f64;
        let log_priors = doc_counts.iter().map(|d| (d / n).ln()).collect();
        let feature_log_prob = word_counts
            .into_iter()
            .map(|row| {
                let total: f64 = row.iter().sum();
                let denom = (total + alpha * v as f64).ln();
                row.into_iter().map(|w| (w + alpha).ln() - denom).collect()
            })
            .collect();
        Self {
            log_priors,
            feature_log_prob,
        }
    }

    pub fn log_joint(&self, x: &FeatureVector) -> Vec<f64> {
        self.log_priors
            .iter()
            .zip(&self.feature_log_prob)
            .map(|(prior, row)| {
                prior
                    + x.entries
                        .iter()
                        .map(|&(i, n)| f64::from(n) * row[i])
                        .sum::<f64>()
            })
            .collect()
    }

    pub fn scores(&self, x: &FeatureVector) -> Vec<f64> {
        let mut s = self.log_joint(x);
        softmax_in_place(&mut s);
        s
    }
}

/// Bernoulli naive Bayes over word presence; absent words contribute
/// `ln(1 - p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernoulliNb {
    pub log_priors: Vec<f64>,
    pub log_present: Vec<Vec<f64>>,
    pub log_absent: Vec<Vec<f64>>,
    absent_total: Vec<f64>,
}

impl BernoulliNb {
    pub fn fit(data: &Dataset, alpha: f64) -> Self {
        let c = data.n_classes();
        let v = data.vocab_size();
        let mut doc_freq = vec![vec![0f64; v]; c];
        let mut doc_counts = vec![0f64; c];
        for (x, &y) in data.vectors().iter().zip(data.labels()) {
            doc_counts[y] += 1.0;
            for &(i, _) in &x.entries {
                doc_freq[y][i] += 1.0;
            }
        }
        let n = data.len() as f64;
        let log_priors = doc_counts.iter().map(|d| (d / n).ln()).collect();
        let mut log_present = Vec::with_capacity(c);
        let mut log_absent = Vec::with_capacity(c);
        for (row, nc) in doc_freq.into_iter().zip(&doc_counts) {
            let p: Vec<f64> = row
                .into_iter()
                .map(|df| (df + alpha) / (nc + 2.0 * alpha))
                .collect();
            log_present.push(p.iter().map(|p| p.ln()).collect::<Vec<_>>());
            log_absent.push(p.iter().map(|p| (1.0 - p).ln()).collect::<Vec<_>>());
        }
        let absent_total = log_absent.iter().map(|r| r.iter().sum()).collect();
        Self {
            log_priors,
            log_present,
            log_absent,
            absent_total,
        }
    }

    pub fn scores(&self, x: &FeatureVector) -> Vec<f64> {
        let mut s: Vec<f64> = (0..self.log_priors.len())
            .map(|c| {
                let mut ll = self.log_priors[c] + self.absent_total[c];
                for &(i, _) in &x.entries {
                    ll += self.log_present[c][i] - self.log_absent[c][i];
                }
                ll
            })
            .collect();
        softmax_in_place(&mut s);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_doc() -> Dataset {
        // vocab: a=0, b=1; "a a" -> c1, "b" -> c2
        Dataset::new(
            vec![
                FeatureVector::from_counts([(0, 2)]),
                FeatureVector::from_counts([(1, 1)]),
            ],
            vec![0, 1],
            vec!["c1".into(), "c2".into()],
            2,
        )
        .unwrap()
    }

    #[test]
    fn mnb_smoothed_table_matches_hand_computation() {
        let m = MultinomialNb::fit(&two_doc(), 1.0);
        let p = |c: usize, w: usize| m.feature_log_prob[c][w].exp();
        assert!((p(0, 0) - 0.75).abs() < 1e-15);
        assert!((p(0, 1) - 0.25).abs() < 1e-15);
        assert!((p(1, 0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((p(1, 1) - 2.0 / 3.0).abs() < 1e-15);
        for row in &m.feature_log_prob {
            let s: f64 = row.iter().map(|l| l.exp()).sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn mnb_posterior_for_single_a() {
        let m = MultinomialNb::fit(&two_doc(), 1.0);
        let s = m.scores(&FeatureVector::from_counts([(0, 1)]));
        let expected = 0.5 * 0.75 / (0.5 * 0.75 + 0.5 / 3.0);
        assert!((s[0] - expected).abs() < 1e-12);
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_vector_falls_back_to_priors() {
        let mut vectors = vec![FeatureVector::from_counts([(0, 1)]); 7];
        vectors.extend(vec![FeatureVector::from_counts([(1, 1)]); 3]);
        let labels = [vec![0; 7], vec![1; 3]].concat();
        let data = Dataset::new(vectors, labels, vec!["x".into(), "y".into()], 2).unwrap();
        let s = MultinomialNb::fit(&data, 1.0).scores(&FeatureVector::default());
        assert!((s[0] - 0.7).abs() < 1e-12);
        assert!((s[1] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn bernoulli_uses_absence() {
        let b = BernoulliNb::fit(&two_doc(), 1.0);
        let s = b.scores(&FeatureVector::from_counts([(0, 1)]));
        // P(a|c1)=2/3, P(b|c1)=1/3 ; P(a|c2)=1/3, P(b|c2)=2/3
        let l1 = 0.5 * (2.0 / 3.0) * (1.0 - 1.0 / 3.0);
        let l2 = 0.5 * (1.0 / 3.0) * (1.0 - 2.0 / 3.0);
        assert!((s[0] - l1 / (l1 + l2)).abs() < 1e-12);
    }
}
