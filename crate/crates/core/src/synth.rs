//! Seeded synthetic tweet corpora with gold labels and rater counts, for
//! demos and end-to-end tests. Each outcome draws its content words from a
//! private vocabulary, so the classes are separable by construction.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agreement::RatingsMatrix;
use crate::cascade::{outcome_index, outcome_names};
use crate::corpus::{AnnotatedTweet, CategoryLabel, Corpus, RelevanceLabel, TweetRecord};
use crate::error::Result;
use crate::rng::SeedStream;

/// Content words per outcome, in outcome order.
pub const THEMES: [&[&str]; 5] = [
    &[
        "football", "match", "album", "song", "concert", "phone", "release", "movie", "pizza",
        "traffic", "weather", "game", "striker", "goal", "fashion", "party",
    ],
    &[
        "fever", "rash", "headache", "joint", "conjunctivitis", "microcephaly", "symptoms",
        "itchy", "fatigue", "aches", "muscle", "eyes", "mild", "babies", "defects", "sick",
    ],
    &[
        "vaccine", "treatment", "drug", "cure", "trial", "antiviral", "doctors", "hospital",
        "rest", "fluids", "medicine", "therapy", "clinical", "research", "breakthrough", "recover",
    ],
    &[
        "mosquito", "bites", "sexual", "spread", "transmitted", "travel", "aedes", "blood",
        "pregnant", "mother", "partner", "infected", "carriers", "outbreak", "cases", "local",
    ],
    &[
        "repellent", "nets", "condoms", "prevent", "protect", "spray", "standing", "water",
        "sleeves", "screens", "avoid", "insecticide", "safe", "drain", "cover", "precautions",
    ],
];

const FILLER: [&str; 8] = ["today", "news", "via", "new", "read", "latest", "update", "week"];

const FIRST_NAMES: [&str; 14] = [
    "Mary", "James", "Maria", "John", "Ana", "Carlos", "Sarah", "David", "Alex", "Priya", "Kwame",
    "Lena", "CDC", "Health",
];

const SURNAMES: [&str; 6] = ["Smith", "Silva", "Jones", "Newsroom", "Garcia", "Okafor"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    /// Tweets in the corpus.
    pub tweets: usize,
    /// Leading tweets that carry gold labels.
    pub annotated: usize,
    /// Relative frequency of each outcome.
    pub outcome_weights: [f64; 5],
    /// Share of relevant annotated tweets left without a category.
    pub relevance_only_share: f64,
    pub words_per_tweet: usize,
    pub rating_items: usize,
    pub raters: usize,
    /// Probability a rater departs from the gold outcome.
    pub rater_noise: f64,
    /// Share of tweets that miss the `zika` keyword.
    pub off_keyword_share: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 2016,
            tweets: 800,
            annotated: 500,
            outcome_weights: [0.2, 0.25, 0.15, 0.2, 0.2],
            relevance_only_share: 0.0,
            words_per_tweet: 5,
            rating_items: 100,
            raters: 3,
            rater_noise: 0.1,
            off_keyword_share: 0.05,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub corpus: Corpus,
    pub annotations: Vec<AnnotatedTweet>,
    /// Five-way rater counts over the first `rating_items` annotated tweets.
    pub ratings: RatingsMatrix,
    /// Gold outcome of every corpus tweet.
    pub outcomes: Vec<usize>,
}

fn pick_outcome(rng: &mut ChaCha8Rng, weights: &[f64; 5]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    4
}

fn tweet_text(rng: &mut ChaCha8Rng, outcome: usize, cfg: &SynthConfig) -> String {
    let mut words: Vec<&str> = THEMES[outcome]
        .choose_multiple(rng, cfg.words_per_tweet)
        .copied()
        .collect();
    if rng.random_bool(0.5) {
        words.push(FILLER.choose(rng).unwrap());
    }
    if rng.random::<f64>() >= cfg.off_keyword_share {
        words.push(if rng.random_bool(0.3) { "#Zika" } else { "zika" });
    }
    words.shuffle(rng);
    let mut text = words.join(" ");
    if rng.random_bool(0.4) {
        text = format!("RT @user{}: {text}", rng.random_range(1..500));
    }
    if rng.random_bool(0.85) {
        let slug: String = (0..8).map(|_| rng.sample(rand::distr::Alphanumeric) as char).collect();
        text.push_str(&format!(" https://t.co/{slug}"));
    }
    text
}

fn outcome_labels(outcome: usize) -> (RelevanceLabel, Option<CategoryLabel>) {
    match outcome {
        0 => (RelevanceLabel::NotRelevant, None),
        o => (RelevanceLabel::Relevant, CategoryLabel::from_index(o - 1)),
    }
}

pub fn generate(cfg: &SynthConfig) -> Result<SyntheticData> {
    let stream = SeedStream::new(cfg.seed);
    let mut rng = stream.rng("tweets");
    let mut records = Vec::with_capacity(cfg.tweets);
    let mut outcomes = Vec::with_capacity(cfg.tweets);
    for i in 0..cfg.tweets {
        let outcome = pick_outcome(&mut rng, &cfg.outcome_weights);
        let text = tweet_text(&mut rng, outcome, cfg);
        let author = format!(
            "{} {}",
            FIRST_NAMES.choose(&mut rng).unwrap(),
            SURNAMES.choose(&mut rng).unwrap()
        );
        let mut rec = TweetRecord::new(format!("tw{:05}", i + 1), text).with_author(author);
        rec.created_at = Some(format!("2016-{:02}-{:02}", 2 + i % 6, 1 + i % 28));
        records.push(rec);
        outcomes.push(outcome);
    }

    let mut label_rng = stream.rng("relevance-only");
    let annotations = records
        .iter()
        .zip(&outcomes)
        .take(cfg.annotated)
        .map(|(rec, &o)| {
            let (rel, mut cat) = outcome_labels(o);
            if cat.is_some() && label_rng.random::<f64>() < cfg.relevance_only_share {
                cat = None;
            }
            AnnotatedTweet::new(rec.clone(), rel, cat)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rater_rng = stream.rng("raters");
    let items = cfg.rating_items.min(annotations.len()).max(2);
    let counts = annotations
        .iter()
        .cycle()
        .take(items)
        .map(|a| {
            let gold = outcome_index(a.relevance, a.category).unwrap_or(0);
            let mut row = vec![0u32; 5];
            for _ in 0..cfg.raters {
                let label = if rater_rng.random::<f64>() < cfg.rater_noise {
                    rater_rng.random_range(0..5)
                } else {
                    gold
                };
                row[label] += 1;
            }
            row
        })
        .collect();
    let ratings = RatingsMatrix::with_names(counts, outcome_names())?;

    Ok(SyntheticData {
        corpus: Corpus::new(records, "synthetic")?,
        annotations,
        ratings,
        outcomes,
    })
}

impl SyntheticData {
    /// Ratings in the CSV layout `agreement::load_ratings` reads.
    pub fn write_ratings_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["item_id".to_string()];
        header.extend(self.ratings.category_names().iter().cloned());
        w.write_record(&header)?;
        for (i, row) in self.ratings.counts().iter().enumerate() {
            let mut rec = vec![self.annotations[i % self.annotations.len()].tweet.id.clone()];
            rec.extend(row.iter().map(u32::to_string));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| crate::Error::io("ratings", e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_consistent() {
        let cfg = SynthConfig {
            tweets: 60,
            annotated: 40,
            rating_items: 10,
            ..SynthConfig::default()
        };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.corpus, b.corpus);
        assert_eq!(a.annotations.len(), 40);
        assert_eq!(a.ratings.items(), 10);
        assert_eq!(a.ratings.raters(), 3);
        for (ann, &o) in a.annotations.iter().zip(&a.outcomes) {
            assert_eq!(outcome_index(ann.relevance, ann.category), Some(o));
        }
        let other = generate(&SynthConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a.corpus, other.corpus);
    }

    #[test]
    fn themes_are_disjoint() {
        for i in 0..5 {
            for j in (i + 1)..5 {
                assert!(THEMES[i].iter().all(|w| !THEMES[j].contains(w)));
            }
        }
    }
}
