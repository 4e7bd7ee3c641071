//! Dataset profiling: lexicon polarity, first-name gender inference through a
//! genderize-compatible service, and the polarity × gender distribution.

use std::collections::{BTreeSet, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Mutex, RwLock};
use std::time::Duration;

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use url::Url;

use crate::cascade::{CascadeVerdict, CategoryDistribution};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::textprep::{has_url, is_retweet, NormalizerConfig};

pub const GENDER_URL_ENV: &str = "EPIMINE_GENDER_URL";
pub const GENDER_KEY_ENV: &str = "EPIMINE_GENDER_KEY";
pub const API_KEY_HEADER: &str = "X-API-Key";

const BUNDLED_LEXICON: &str = include_str!("../data/polarity_en.txt");
const BUNDLED_GENDER_FIXTURE: &str = include_str!("../data/gender_fixture.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
    Neutral,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PolarityLexicon {
    positive: BTreeSet<String>,
    negative: BTreeSet<String>,
}

impl PolarityLexicon {
    pub fn new<I, J, S, T>(positive: I, negative: J) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        J: IntoIterator<Item = T>,
        S: AsRef<str>,
        T: AsRef<str>,
    {
        let positive: BTreeSet<String> = positive.into_iter().map(|w| w.as_ref().to_lowercase()).collect();
        let negative: BTreeSet<String> = negative.into_iter().map(|w| w.as_ref().to_lowercase()).collect();
        if let Some(w) = positive.intersection(&negative).next() {
            return Err(Error::invalid(format!("`{w}` is both positive and negative")));
        }
        Ok(Self { positive, negative })
    }

    /// Lines of `word positive|negative`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(word), Some(tag), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Malformed {
                    location: format!("lexicon line {}", n + 1),
                    reason: "expected `word polarity`".into(),
                });
            };
            match tag.to_ascii_lowercase().as_str() {
                "positive" => pos.push(word),
                "negative" => neg.push(word),
                other => {
                    return Err(Error::Malformed {
                        location: format!("lexicon line {}", n + 1),
                        reason: format!("unknown polarity `{other}`"),
                    })
                }
            }
        }
        Self::new(pos, neg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_LEXICON).expect("bundled lexicon parses")
    }

    pub fn positive(&self) -> &BTreeSet<String> {
        &self.positive
    }

    pub fn negative(&self) -> &BTreeSet<String> {
        &self.negative
    }
}

/// Sign of positive hits minus negative hits.
pub fn polarity<T: AsRef<str>>(tokens: &[T], lexicon: &PolarityLexicon) -> Polarity {
    let score: i64 = tokens
        .iter()
        .map(|t| {
            let t = t.as_ref();
            i64::from(lexicon.positive.contains(t)) - i64::from(lexicon.negative.contains(t))
        })
        .sum();
    match score.signum() {
        1 => Polarity::Positive,
        -1 => Polarity::Negative,
        _ => Polarity::Neutral,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenderSource {
    Live,
    Cache,
    Fixture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenderResult {
    pub gender: Gender,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probability: Option<f64>,
    /// Absent when no lookup was made.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<GenderSource>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl GenderResult {
    pub fn unknown(source: Option<GenderSource>, note: Option<String>) -> Self {
        Self {
            gender: Gender::Unknown,
            probability: None,
            source,
            note,
        }
    }

    fn from_response(r: &GenderResponse, source: GenderSource) -> Self {
        let gender = match r.gender.as_deref() {
            Some("male") => Gender::Male,
            Some("female") => Gender::Female,
            _ => return Self::unknown(Some(source), None),
        };
        Self {
            gender,
            probability: r.probability,
            source: Some(source),
            note: None,
        }
    }
}

/// Wire format of a genderize-compatible response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenderResponse {
    pub name: String,
    pub gender: Option<String>,
    #[serde(default)]
    pub probability: Option<f64>,
    #[serde(default)]
    pub count: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiveSettings {
    pub base_url: String,
    #[serde(default, skip_serializing)]
    pub api_key: Option<String>,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub initial_backoff_ms: u64,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

fn default_retries() -> u32 {
    3
}

fn default_backoff_ms() -> u64 {
    500
}

fn default_timeout_ms() -> u64 {
    10_000
}

impl LiveSettings {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            api_key: None,
            max_retries: default_retries(),
            initial_backoff_ms: default_backoff_ms(),
            timeout_ms: default_timeout_ms(),
        }
    }

    /// Reads the base URL and optional key from the environment.
    pub fn from_env() -> Option<Self> {
        let base = std::env::var(GENDER_URL_ENV).ok()?;
        Some(Self {
            api_key: std::env::var(GENDER_KEY_ENV).ok(),
            ..Self::new(base)
        })
    }
}

enum Backend {
    Fixture(HashMap<String, GenderResponse>),
    Live {
        settings: LiveSettings,
        base: Url,
        http: reqwest::blocking::Client,
    },
}

/// Gender lookups with a shared read-mostly cache. Network requests are
/// serialized; cache reads are concurrent.
pub struct GenderClient {
    backend: Backend,
    cache: RwLock<HashMap<String, GenderResponse>>,
    cache_file: Option<Mutex<File>>,
    network: Mutex<()>,
    requests: AtomicU64,
}

impl GenderClient {
    pub fn fixture(map: HashMap<String, GenderResponse>) -> Self {
        let map = map.into_iter().map(|(k, v)| (k.to_lowercase(), v)).collect();
        Self::with_backend(Backend::Fixture(map))
    }

    /// Fixture file: JSON object mapping name to response object.
    pub fn fixture_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::fixture(serde_json::from_str(&text)?))
    }

    pub fn bundled_fixture() -> Self {
        Self::fixture(serde_json::from_str(BUNDLED_GENDER_FIXTURE).expect("bundled fixture parses"))
    }

    pub fn live(settings: LiveSettings) -> Result<Self> {
        let base = Url::parse(&settings.base_url)
            .map_err(|e| Error::invalid(format!("gender base URL `{}`: {e}", settings.base_url)))?;
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(settings.timeout_ms))
            .build()
            .map_err(|e| Error::invalid(format!("HTTP client: {e}")))?;
        Ok(Self::with_backend(Backend::Live { settings, base, http }))
    }

    fn with_backend(backend: Backend) -> Self {
        Self {
            backend,
            cache: RwLock::new(HashMap::new()),
            cache_file: None,
            network: Mutex::new(()),
            requests: AtomicU64::new(0),
        }
    }

    /// Loads prior responses from an append-only JSON-lines file and appends
    /// new live responses to it.
    pub fn with_cache_file(mut self, path: PathBuf) -> Result<Self> {
        if path.exists() {
            let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
            let mut cache = self.cache.write().expect("cache lock");
            for (n, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| Error::io(&path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let r: GenderResponse = serde_json::from_str(&line).map_err(|e| Error::Malformed {
                    location: format!("{}:{}", path.display(), n + 1),
                    reason: e.to_string(),
                })?;
                cache.insert(r.name.to_lowercase(), r);
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        self.cache_file = Some(Mutex::new(file));
        Ok(self)
    }

    /// HTTP requests attempted so far.
    pub fn requests(&self) -> u64 {
        self.requests.load(Ordering::SeqCst)
    }

    pub fn is_live(&self) -> bool {
        matches!(self.backend, Backend::Live { .. })
    }

    /// Looks up a single lowercase first name.
    pub fn lookup(&self, name: &str) -> GenderResult {
        let (settings, base, http) = match &self.backend {
            Backend::Fixture(map) => {
                return map.get(name).map_or_else(
                    || GenderResult::unknown(Some(GenderSource::Fixture), None),
                    |r| GenderResult::from_response(r, GenderSource::Fixture),
                )
            }
            Backend::Live { settings, base, http } => (settings, base, http),
        };
        if let Some(r) = self.cached(name) {
            return GenderResult::from_response(&r, GenderSource::Cache);
        }
        let _guard = self.network.lock().expect("network lock");
        // another worker may have fetched it while we waited
        if let Some(r) = self.cached(name) {
            return GenderResult::from_response(&r, GenderSource::Cache);
        }
        match self.fetch(name, settings, base, http) {
            Ok(r) => {
                let result = GenderResult::from_response(&r, GenderSource::Live);
                self.remember(name, r);
                result
            }
            Err(note) => {
                warn!("gender lookup for `{name}` failed: {note}");
                GenderResult::unknown(Some(GenderSource::Live), Some(note))
            }
        }
    }

    fn cached(&self, name: &str) -> Option<GenderResponse> {
        self.cache.read().expect("cache lock").get(name).cloned()
    }

    fn remember(&self, name: &str, r: GenderResponse) {
        if let Some(file) = &self.cache_file {
            let mut f = file.lock().expect("cache file lock");
            let line = serde_json::to_string(&GenderResponse {
                name: name.to_string(),
                ..r.clone()
            })
            .expect("response serializes");
            if let Err(e) = writeln!(f, "{line}") {
                warn!("could not append to gender cache: {e}");
            }
        }
        self.cache.write().expect("cache lock").insert(name.to_string(), r);
    }

    fn fetch(
        &self,
        name: &str,
        settings: &LiveSettings,
        base: &Url,
        http: &reqwest::blocking::Client,
    ) -> std::result::Result<GenderResponse, String> {
        let mut url = base.clone();
        url.query_pairs_mut().clear().append_pair("name", name);
        let mut backoff = Duration::from_millis(settings.initial_backoff_ms);
        for attempt in 0..=settings.max_retries {
            self.requests.fetch_add(1, Ordering::SeqCst);
            let mut req = http.get(url.clone());
            if let Some(key) = &settings.api_key {
                req = req.header(API_KEY_HEADER, key);
            }
            let resp = req.send().map_err(|e| format!("request error: {e}"))?;
            let status = resp.status();
            if status.as_u16() == 429 {
                if attempt == settings.max_retries {
                    break;
                }
                debug!("rate limited on `{name}`, backing off {backoff:?}");
                std::thread::sleep(backoff);
                backoff *= 2;
                continue;
            }
            if !status.is_success() {
                return Err(format!("HTTP {status}"));
            }
            let body = resp.text().map_err(|e| format!("reading body: {e}"))?;
            return serde_json::from_str(&body).map_err(|e| format!("malformed response: {e}"));
        }
        Err(format!("rate limited after {} attempts", settings.max_retries + 1))
    }
}

/// Queries the lowercase first whitespace-delimited token of a display name.
pub fn infer_gender(author_name: Option<&str>, client: &GenderClient) -> GenderResult {
    match author_name.and_then(|n| n.split_whitespace().next()) {
        Some(first) => client.lookup(&first.to_lowercase()),
        None => GenderResult::unknown(None, Some("no author name".into())),
    }
}

const POLARITY_ROWS: [&str; 4] = ["positive", "negative", "neutral", "unscored"];
const GENDER_COLS: [&str; 3] = ["male", "female", "unknown"];

fn polarity_row(p: Option<Polarity>) -> usize {
    match p {
        Some(Polarity::Positive) => 0,
        Some(Polarity::Negative) => 1,
        Some(Polarity::Neutral) => 2,
        None => 3,
    }
}

fn gender_col(g: Gender) -> usize {
    match g {
        Gender::Male => 0,
        Gender::Female => 1,
        Gender::Unknown => 2,
    }
}

fn percent(count: u64, total: u64) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * count as f64 / total as f64
    }
}

/// Integer counts only; every percentage is derived on demand.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DistributionReport {
    /// `cells[polarity][gender]` with polarity rows positive, negative,
    /// neutral, unscored and gender columns male, female, unknown.
    pub cells: [[u64; 3]; 4],
    pub total: u64,
    pub retweets: u64,
    pub urls: u64,
    pub categories: Option<CategoryDistribution>,
}

impl DistributionReport {
    pub fn polarity_count(&self, row: usize) -> u64 {
        self.cells[row].iter().sum()
    }

    pub fn gender_count(&self, col: usize) -> u64 {
        self.cells.iter().map(|r| r[col]).sum()
    }

    pub fn count(&self, polarity: Option<Polarity>, gender: Gender) -> u64 {
        self.cells[polarity_row(polarity)][gender_col(gender)]
    }

    /// Share of all tweets in a polarity row.
    pub fn polarity_percent(&self, polarity: Option<Polarity>) -> f64 {
        percent(self.polarity_count(polarity_row(polarity)), self.total)
    }

    /// Share of a gender column's tweets in a polarity row.
    pub fn cell_percent(&self, polarity: Option<Polarity>, gender: Gender) -> f64 {
        let col = gender_col(gender);
        percent(self.cells[polarity_row(polarity)][col], self.gender_count(col))
    }

    pub fn gender_percent(&self, gender: Gender) -> f64 {
        percent(self.gender_count(gender_col(gender)), self.total)
    }

    pub fn retweet_percent(&self) -> f64 {
        percent(self.retweets, self.total)
    }

    pub fn url_percent(&self) -> f64 {
        percent(self.urls, self.total)
    }
}

#[derive(Serialize)]
struct Cell {
    count: u64,
    percent: f64,
}

#[derive(Serialize)]
struct Row {
    polarity: &'static str,
    all: Cell,
    male: Cell,
    female: Cell,
    unknown: Cell,
}

#[derive(Serialize)]
struct ReportView<'a> {
    total: u64,
    rows: Vec<Row>,
    gender_totals: [Cell; 3],
    retweets: Cell,
    urls: Cell,
    #[serde(skip_serializing_if = "Option::is_none")]
    categories: Option<&'a CategoryDistribution>,
}

impl Serialize for DistributionReport {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let col = |r: usize, c: usize| Cell {
            count: self.cells[r][c],
            percent: percent(self.cells[r][c], self.gender_count(c)),
        };
        let rows = (0..4)
            .map(|r| Row {
                polarity: POLARITY_ROWS[r],
                all: Cell {
                    count: self.polarity_count(r),
                    percent: percent(self.polarity_count(r), self.total),
                },
                male: col(r, 0),
                female: col(r, 1),
                unknown: col(r, 2),
            })
            .collect();
        let gender_totals = [0, 1, 2].map(|c| Cell {
            count: self.gender_count(c),
            percent: percent(self.gender_count(c), self.total),
        });
        debug_assert_eq!(GENDER_COLS.len(), gender_totals.len());
        ReportView {
            total: self.total,
            rows,
            gender_totals,
            retweets: Cell {
                count: self.retweets,
                percent: self.retweet_percent(),
            },
            urls: Cell {
                count: self.urls,
                percent: self.url_percent(),
            },
            categories: self.categories.as_ref(),
        }
        .serialize(s)
    }
}

/// Builds the polarity × gender table. Inputs must list the corpus ids in
/// corpus order; a `None` polarity lands in the unscored row.
pub fn distribution_report(
    corpus: &Corpus,
    polarities: &[(String, Option<Polarity>)],
    genders: &[(String, GenderResult)],
    verdicts: Option<&[CascadeVerdict]>,
) -> Result<DistributionReport> {
    let aligned = |ids: &mut dyn Iterator<Item = &String>, what: &str| -> Result<()> {
        let mut n = 0;
        for (rec, id) in corpus.iter().zip(ids) {
            if &rec.id != id {
                return Err(Error::invalid(format!(
                    "{what} misaligned: expected id `{}`, found `{id}`",
                    rec.id
                )));
            }
            n += 1;
        }
        if n != corpus.len() {
            return Err(Error::invalid(format!("{what} misaligned: length differs from corpus")));
        }
        Ok(())
    };
    if polarities.len() != corpus.len() || genders.len() != corpus.len() {
        return Err(Error::invalid("profile inputs misaligned: length differs from corpus"));
    }
    aligned(&mut polarities.iter().map(|(id, _)| id), "polarity results")?;
    aligned(&mut genders.iter().map(|(id, _)| id), "gender results")?;
    if let Some(v) = verdicts {
        if v.len() != corpus.len() {
            return Err(Error::invalid("verdicts misaligned: length differs from corpus"));
        }
        aligned(&mut v.iter().map(|x| &x.tweet_id), "verdicts")?;
    }

    let mut report = DistributionReport {
        total: corpus.len() as u64,
        categories: verdicts.map(CategoryDistribution::from_verdicts),
        ..Default::default()
    };
    for ((rec, (_, p)), (_, g)) in corpus.iter().zip(polarities).zip(genders) {
        report.cells[polarity_row(*p)][gender_col(g.gender)] += 1;
        report.retweets += u64::from(is_retweet(&rec.text));
        report.urls += u64::from(has_url(&rec.text));
    }
    Ok(report)
}

pub type ProfileInputs = (Vec<(String, Option<Polarity>)>, Vec<(String, GenderResult)>);

/// Scores every tweet's polarity and author gender, in corpus order.
pub fn profile_corpus(
    corpus: &Corpus,
    normalizer: &NormalizerConfig,
    lexicon: &PolarityLexicon,
    client: &GenderClient,
) -> ProfileInputs {
    let polarities = corpus
        .records()
        .par_iter()
        .map(|r| (r.id.clone(), Some(polarity(&normalizer.tokens(&r.text), lexicon))))
        .collect();
    let genders = corpus
        .records()
        .par_iter()
        .map(|r| (r.id.clone(), infer_gender(r.author_name.as_deref(), client)))
        .collect();
    (polarities, genders)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TweetRecord;

    fn lex() -> PolarityLexicon {
        PolarityLexicon::new(["good", "safe", "hope"], ["bad", "fear", "death"]).unwrap()
    }

    #[test]
    fn polarity_rules() {
        assert_eq!(polarity(&["good", "safe", "zika"], &lex()), Polarity::Positive);
        assert_eq!(polarity::<&str>(&[], &lex()), Polarity::Neutral);
        assert_eq!(polarity(&["good", "hope", "bad", "fear"], &lex()), Polarity::Neutral);
        assert_eq!(polarity(&["death"], &lex()), Polarity::Negative);
    }

    #[test]
    fn lexicon_validation() {
        assert!(PolarityLexicon::new(["good"], ["Good"]).is_err());
        assert!(PolarityLexicon::parse("good positive\nbad sideways\n").is_err());
        let l = PolarityLexicon::parse("# c\nGood positive\n\nbad negative # note\n").unwrap();
        assert!(l.positive().contains("good"));
        let b = PolarityLexicon::bundled();
        assert!(b.positive().is_disjoint(b.negative()));
    }

    #[test]
    fn fixture_lookups() {
        let client = GenderClient::bundled_fixture();
        let r = infer_gender(Some("Mary Smith"), &client);
        assert_eq!(r.gender, Gender::Female);
        assert_eq!(r.probability, Some(0.99));
        assert_eq!(r.source, Some(GenderSource::Fixture));
        let r = infer_gender(Some(""), &client);
        assert_eq!(r.gender, Gender::Unknown);
        assert_eq!(r.probability, None);
        let r = infer_gender(Some("CDC Newsroom"), &client);
        assert_eq!(r.gender, Gender::Unknown);
        assert_eq!(r.probability, None);
        assert_eq!(infer_gender(None, &client).gender, Gender::Unknown);
        assert_eq!(client.requests(), 0);
    }

    fn fixture_corpus() -> Corpus {
        let recs = (0..10)
            .map(|i| {
                let text = if i < 4 {
                    format!("zika news {i} https://t.co/x{i}")
                } else if i < 7 {
                    format!("RT @who: zika fear {i}")
                } else {
                    format!("good hope {i}")
                };
                TweetRecord::new(format!("t{i}"), text)
            })
            .collect();
        Corpus::new(recs, "fixture").unwrap()
    }

    #[test]
    fn url_and_retweet_shares() {
        let corpus = fixture_corpus();
        let client = GenderClient::bundled_fixture();
        let (p, g) = profile_corpus(&corpus, &NormalizerConfig::default(), &lex(), &client);
        let report = distribution_report(&corpus, &p, &g, None).unwrap();
        assert_eq!(report.url_percent(), 40.0);
        assert_eq!(report.retweet_percent(), 30.0);
        assert_eq!(report.gender_percent(Gender::Unknown), 100.0);
        let rows: u64 = (0..3).map(|r| report.polarity_count(r)).sum();
        assert_eq!(rows, 10);
        assert_eq!(report.count(Some(Polarity::Positive), Gender::Unknown), 3);
        assert_eq!(report.count(Some(Polarity::Negative), Gender::Unknown), 3);
    }

    #[test]
    fn empty_corpus_is_all_zero() {
        let corpus = Corpus::default();
        let report = distribution_report(&corpus, &[], &[], None).unwrap();
        assert_eq!(report, DistributionReport::default());
        assert_eq!(report.url_percent(), 0.0);
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["rows"][0]["all"]["percent"], 0.0);
    }

    #[test]
    fn misalignment_is_fatal() {
        let corpus = fixture_corpus();
        let client = GenderClient::bundled_fixture();
        let (mut p, g) = profile_corpus(&corpus, &NormalizerConfig::default(), &lex(), &client);
        p.swap(0, 1);
        assert!(distribution_report(&corpus, &p, &g, None).is_err());
        assert!(distribution_report(&corpus, &p[1..], &g, None).is_err());
    }
}
