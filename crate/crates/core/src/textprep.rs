//! Tweet normalization, tokenization and unigram vectorization.
//!
//! The normalization chain runs in a fixed order:
//!
//! 1. URLs (`http://`, `https://`, `www.`, bare `t.co/` links)
//! 2. retweet markers of the form `RT @user:`
//! 3. remaining `@handles`
//! 4. non-ASCII characters
//! 5. lowercasing
//! 6. digits
//! 7. punctuation; `#` is stripped and the hashtag body kept or dropped per config
//! 8. whitespace runs collapse to one space, ends trimmed
//! 9. leading `rt` tokens
//!
//! The result always matches `[a-z ]*` and the chain is idempotent.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

static URL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)(?:https?://|www\.)\S*|\bt\.co/\S*").unwrap());
static RT_HANDLE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\bRT\s*@[A-Za-z0-9_]+:?").unwrap());
static HANDLE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"@[A-Za-z0-9_]+").unwrap());
static LEADING_RT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*RT\b").unwrap());
static HASHTAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"#[a-z_]*").unwrap());

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizerConfig {
    pub stopwords: BTreeSet<String>,
    #[serde(default = "yes")]
    pub drop_single_chars: bool,
    #[serde(default = "yes")]
    pub keep_hashtag_body: bool,
}

fn yes() -> bool {
    true
}

impl Default for NormalizerConfig {
    fn default() -> Self {
        Self {
            stopwords: parse_stopwords(DEFAULT_STOPWORDS),
            drop_single_chars: true,
            keep_hashtag_body: true,
        }
    }
}

impl NormalizerConfig {
    pub fn with_stopwords<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            stopwords: words.into_iter().map(|w| w.as_ref().to_lowercase()).collect(),
            ..Self::default()
        }
    }

    /// Replaces the stopword list with the contents of a stopword file.
    pub fn load_stopwords(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.stopwords = parse_stopwords(&text);
        Ok(())
    }

    /// Stable hash of the configuration.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }

    /// `tokenize(normalize(raw))`.
    pub fn tokens(&self, raw: &str) -> Vec<String> {
        tokenize(&normalize(raw, self), self)
    }
}

/// Parses a stopword file: one token per line, `#` starts a comment.
pub fn parse_stopwords(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn has_url(raw: &str) -> bool {
    URL.is_match(raw)
}

pub fn is_retweet(raw: &str) -> bool {
    LEADING_RT.is_match(raw) || RT_HANDLE.is_match(raw)
}

pub fn normalize(raw: &str, config: &NormalizerConfig) -> String {
    let s = URL.replace_all(raw, " ");
    let s = RT_HANDLE.replace_all(&s, " ");
    let s = HANDLE.replace_all(&s, " ");

    let s: String = s
        .chars()
        .filter(char::is_ascii)
        .map(|c| c.to_ascii_lowercase())
        .filter(|c| !c.is_ascii_digit())
        .collect();

    let s = if config.keep_hashtag_body {
        s.replace('#', "")
    } else {
        HASHTAG.replace_all(&s, " ").into_owned()
    };

    let s: String = s
        .chars()
        .filter(|&c| c != '\'')
        .map(|c| if c.is_ascii_lowercase() { c } else { ' ' })
        .collect();

    let mut tokens: Vec<&str> = s.split_whitespace().collect();
    let leading_rt = tokens.iter().take_while(|t| **t == "rt").count();
    tokens.drain(..leading_rt);
    tokens.join(" ")
}

pub fn tokenize(cleaned: &str, config: &NormalizerConfig) -> Vec<String> {
    cleaned
        .split_whitespace()
        .filter(|t| !(config.drop_single_chars && t.chars().count() == 1))
        .filter(|t| !config.stopwords.contains(*t))
        .map(str::to_string)
        .collect()
}

/// Frozen token → index mapping. Serializes as a JSON array of tokens in
/// index order.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.tokens == other.tokens
    }
}

impl From<Vec<String>> for Vocabulary {
    fn from(tokens: Vec<String>) -> Self {
        let mut vocab = Vocabulary::default();
        for t in tokens {
            vocab.insert(&t);
        }
        vocab
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

impl Vocabulary {
    fn insert(&mut self, token: &str) {
        if !self.index.contains_key(token) {
            self.index.insert(token.to_string(), self.tokens.len());
            self.tokens.push(token.to_string());
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.tokens {
            h.update(t.as_bytes());
            h.update([0u8]);
        }
        hex::encode(h.finalize())
    }
}

/// Indexes tokens in order of first appearance.
pub fn build_vocabulary<D, T>(docs: D) -> Vocabulary
where
    D: IntoIterator<Item = T>,
    T: AsRef<[String]>,
{
    let mut vocab = Vocabulary::default();
    for doc in docs {
        for token in doc.as_ref() {
            vocab.insert(token);
        }
    }
    vocab
}

/// Sparse unigram counts over a vocabulary.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// `(index, count)` pairs, indices strictly increasing, counts ≥ 1.
    pub entries: Vec<(usize, u32)>,
    /// Sum of in-vocabulary counts.
    pub total_tokens: u32,
    /// Tokens dropped because they were out of vocabulary.
    pub oov_count: u32,
}

impl FeatureVector {
    /// Builds a vector from `(index, count)` pairs in any order; zero counts
    /// are dropped and repeated indices merged.
    pub fn from_counts<I: IntoIterator<Item = (usize, u32)>>(pairs: I) -> Self {
        let mut entries: Vec<(usize, u32)> = pairs.into_iter().filter(|&(_, c)| c > 0).collect();
        entries.sort_unstable_by_key(|&(i, _)| i);
        let mut merged: Vec<(usize, u32)> = Vec::with_capacity(entries.len());
        for (i, c) in entries {
            match merged.last_mut() {
                Some((j, acc)) if *j == i => *acc += c,
                _ => merged.push((i, c)),
            }
        }
        let total_tokens = merged.iter().map(|&(_, c)| c).sum();
        Self {
            entries: merged,
            total_tokens,
            oov_count: 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn count(&self, index: usize) -> u32 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map(|pos| self.entries[pos].1)
            .unwrap_or(0)
    }

    pub fn contains(&self, index: usize) -> bool {
        self.count(index) > 0
    }

    /// Same support with every count multiplied by `k`.
    pub fn scaled(&self, k: u32) -> Self {
        FeatureVector::from_counts(self.entries.iter().map(|&(i, c)| (i, c * k)))
    }
}

pub fn vectorize<T: AsRef<str>>(tokens: &[T], vocab: &Vocabulary) -> FeatureVector {
    let mut oov = 0u32;
    let mut pairs = Vec::with_capacity(tokens.len());
    for t in tokens {
        match vocab.index_of(t.as_ref()) {
            Some(i) => pairs.push((i, 1)),
            None => oov += 1,
        }
    }
    let mut fv = FeatureVector::from_counts(pairs);
    fv.oov_count = oov;
    fv
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> NormalizerConfig {
        NormalizerConfig::default()
    }

    fn toks(s: &[&str]) -> Vec<String> {
        s.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize("", &cfg()), "");
        assert_eq!(
            normalize("RT @CDCgov: #Zika update http://t.co/abc 2016!!", &cfg()),
            "zika update"
        );
        assert_eq!(normalize("Zika2016 é bad", &cfg()), "zika bad");
    }

    #[test]
    fn normalize_rules() {
        let c = cfg();
        assert_eq!(normalize("see www.cdc.gov/zika now", &c), "see now");
        assert_eq!(normalize("t.co/xyz zika", &c), "zika");
        assert_eq!(normalize("@user1 First case", &c), "first case");
        assert_eq!(normalize("RT zika news", &c), "zika news");
        assert_eq!(normalize("rt rt zika", &c), "zika");
        // interior rt stays
        assert_eq!(normalize("great rt news", &c), "great rt news");
        assert_eq!(normalize("news RT @who: spread", &c), "news spread");
        assert_eq!(normalize("Can't stop\tZIKA\n", &c), "cant stop zika");
        assert_eq!(normalize("zika/dengue", &c), "zika dengue");

        let drop = NormalizerConfig {
            keep_hashtag_body: false,
            ..cfg()
        };
        assert_eq!(normalize("#Zika update #CDC2016", &drop), "update");
    }

    #[test]
    fn tokenize_examples() {
        let c = NormalizerConfig::with_stopwords(["is"]);
        assert_eq!(tokenize("zika is bad", &c), toks(&["zika", "bad"]));
        assert_eq!(tokenize("a b zika", &c), toks(&["zika"]));
        assert!(tokenize("", &c).is_empty());
        let keep = NormalizerConfig {
            drop_single_chars: false,
            ..NormalizerConfig::with_stopwords(Vec::<String>::new())
        };
        assert_eq!(tokenize("a zika", &keep), toks(&["a", "zika"]));
    }

    #[test]
    fn default_stopwords_cover_examples() {
        let c = cfg();
        assert!(c.stopwords.contains("and"));
        assert!(c.stopwords.contains("so"));
        assert!(c.stopwords.len() >= 100);
        assert!(c.stopwords.iter().all(|w| *w == w.to_lowercase()));
    }

    #[test]
    fn stopword_file_parsing() {
        let words = parse_stopwords("# header\nAnd\n so # trailing\n\n");
        assert_eq!(words.into_iter().collect::<Vec<_>>(), ["and", "so"]);
    }

    #[test]
    fn vocabulary_first_appearance() {
        let v = build_vocabulary(&[toks(&["zika", "bad"]), toks(&["bad", "virus"])]);
        assert_eq!(v.len(), 3);
        assert_eq!(v.index_of("zika"), Some(0));
        assert_eq!(v.index_of("bad"), Some(1));
        assert_eq!(v.index_of("virus"), Some(2));

        assert!(build_vocabulary(Vec::<Vec<String>>::new()).is_empty());
        assert_eq!(build_vocabulary(&[toks(&["zika"]), toks(&["zika"])]).len(), 1);
    }

    #[test]
    fn vocabulary_serializes_as_token_array() {
        let v = build_vocabulary(&[toks(&["zika", "bad"])]);
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(json, r#"["zika","bad"]"#);
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(back.index_of("bad"), Some(1));
    }

    #[test]
    fn vectorize_examples() {
        let v = build_vocabulary(&[toks(&["zika", "bad"]), toks(&["bad", "virus"])]);
        let fv = vectorize(&toks(&["zika", "zika", "bad"]), &v);
        assert_eq!(fv.entries, vec![(0, 2), (1, 1)]);
        assert_eq!(fv.total_tokens, 3);

        let empty = vectorize::<String>(&[], &v);
        assert!(empty.is_empty());
        assert_eq!(empty.total_tokens, 0);

        let oov = vectorize(&toks(&["unknown"]), &v);
        assert!(oov.is_empty());
        assert_eq!(oov.oov_count, 1);
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(raw in "\\PC{0,60}") {
            let c = cfg();
            let once = normalize(&raw, &c);
            prop_assert_eq!(normalize(&once, &c), once.clone());
        }

        #[test]
        fn normalize_idempotent_on_tweet_like_input(
            raw in "(RT |rt |@[a-z]{1,5}:? |#[A-Za-z0-9]{1,6} |https?://[a-z./]{1,8} |[A-Za-z0-9!?.,']{1,7} |é |  ){0,12}"
        ) {
            for keep in [true, false] {
                let c = NormalizerConfig { keep_hashtag_body: keep, ..cfg() };
                let once = normalize(&raw, &c);
                prop_assert_eq!(normalize(&once, &c), once.clone());
                prop_assert!(once.bytes().all(|b| b.is_ascii_lowercase() || b == b' '));
                prop_assert!(!once.contains("  "));
                prop_assert_eq!(once.trim(), once.as_str());
            }
        }

        #[test]
        fn vectorize_respects_vocab(
            train in proptest::collection::vec(proptest::collection::vec("[a-e]{1,2}", 0..6), 0..6),
            doc in proptest::collection::vec("[a-g]{1,2}", 0..12),
        ) {
            let vocab = build_vocabulary(&train);
            let fv = vectorize(&doc, &vocab);
            prop_assert!(fv.entries.iter().all(|&(i, c)| i < vocab.len() && c >= 1));
            prop_assert!(fv.entries.windows(2).all(|w| w[0].0 < w[1].0));
            prop_assert_eq!(fv.total_tokens as usize, doc.len() - fv.oov_count as usize);
            // deterministic construction
            prop_assert_eq!(
                serde_json::to_string(&vocab).unwrap(),
                serde_json::to_string(&build_vocabulary(&train)).unwrap()
            );
        }
    }
}
