//! Run configuration and the staged pipeline that writes the report bundle.
//!
//! Stages run in a fixed order. A stage that fails marks the bundle partial
//! and skips the stages that consume its artifacts; everything else still
//! runs. The manifest records the config, input hashes, seeds, per-stage
//! status and output hashes. Wall-clock timings appear only under the
//! manifest's `timings_ms` key.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::agreement::{kappa_report, load_ratings};
use crate::cascade::{
    classify_corpus, outcome_index, read_verdicts_csv, train_cascade, write_verdicts_csv, CascadeModel,
    CascadeVerdict,
};
use crate::corpus::{keyword_filter, load_annotations, load_corpus, AnnotatedTweet, Corpus, CorpusFormat};
use crate::error::{Error, Result};
use crate::evaluation::{
    cascade_error_analysis, cross_validate, cross_validate_cascade, holdout_split, stratified_kfold,
    CvReport, LabeledDocs, LIBRARY_VERSION,
};
use crate::learners::{Algorithm, LearnerSpec};
use crate::profile::{
    distribution_report, profile_corpus, GenderClient, LiveSettings, PolarityLexicon, GENDER_KEY_ENV,
};
use crate::textprep::NormalizerConfig;
use crate::topics::{intertopic_map, per_category_topics, LdaConfig};

pub const CASCADE_FILE: &str = "cascade.json";
pub const VERDICTS_FILE: &str = "verdicts.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Agreement,
    Train,
    Evaluate,
    Classify,
    Topics,
    Profile,
}

impl Stage {
    /// Execution order.
    pub const ALL: [Stage; 6] = [
        Stage::Agreement,
        Stage::Train,
        Stage::Evaluate,
        Stage::Classify,
        Stage::Topics,
        Stage::Profile,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Agreement => "agreement",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Classify => "classify",
            Stage::Topics => "topics",
            Stage::Profile => "profile",
        }
    }

    /// Upstream stage and the artifact it leaves in the output directory.
    pub fn requires(self) -> Option<(Stage, &'static str)> {
        match self {
            Stage::Evaluate | Stage::Classify => Some((Stage::Train, CASCADE_FILE)),
            Stage::Topics | Stage::Profile => Some((Stage::Classify, VERDICTS_FILE)),
            Stage::Agreement | Stage::Train => None,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown stage `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalizerSettings {
    /// Replaces the bundled stopword list.
    pub stopwords_file: Option<PathBuf>,
    pub drop_single_chars: bool,
    pub keep_hashtag_body: bool,
}

impl Default for NormalizerSettings {
    fn default() -> Self {
        Self {
            stopwords_file: None,
            drop_single_chars: true,
            keep_hashtag_body: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvSettings {
    pub k: usize,
    pub seed: u64,
    /// Share of annotations held out from training for error analysis.
    pub holdout_fraction: f64,
}

impl Default for CvSettings {
    fn default() -> Self {
        Self {
            k: 10,
            seed: 1,
            holdout_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenderMode {
    #[default]
    Fixture,
    Live,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenderSettings {
    pub mode: GenderMode,
    /// Replaces the bundled fixture in fixture mode.
    pub fixture: Option<PathBuf>,
    /// Live endpoint; falls back to the environment when absent.
    pub live: Option<LiveSettings>,
    pub cache_file: Option<PathBuf>,
}

fn default_corpus_format() -> CorpusFormat {
    CorpusFormat::Jsonl
}

fn default_learner() -> LearnerSpec {
    LearnerSpec::with_defaults(Algorithm::Mnb, 1)
}

fn default_compare() -> Vec<Algorithm> {
    Algorithm::ALL.to_vec()
}

fn default_top_words() -> usize {
    10
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: Vec<PathBuf>,
    #[serde(default = "default_corpus_format")]
    pub corpus_format: CorpusFormat,
    #[serde(default)]
    pub strict: bool,
    #[serde(default)]
    pub annotations: Option<PathBuf>,
    #[serde(default)]
    pub ratings: Option<PathBuf>,
    /// Applied before classification; empty keeps every tweet.
    #[serde(default)]
    pub keywords: Vec<String>,
    #[serde(default)]
    pub normalizer: NormalizerSettings,
    #[serde(default = "default_learner")]
    pub relevance_learner: LearnerSpec,
    #[serde(default = "default_learner")]
    pub category_learner: LearnerSpec,
    /// Algorithms cross-validated per stage by `evaluate`.
    #[serde(default = "default_compare")]
    pub compare_learners: Vec<Algorithm>,
    #[serde(default)]
    pub cv: CvSettings,
    #[serde(default)]
    pub lda: LdaConfig,
    #[serde(default = "default_top_words")]
    pub top_words: usize,
    #[serde(default)]
    pub lexicon: Option<PathBuf>,
    #[serde(default)]
    pub gender: GenderSettings,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

/// A parsed configuration with paths resolved against its directory.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    /// The configuration as written, after overrides.
    pub raw: Value,
    pub base_dir: PathBuf,
}

/// Sets `dotted.key` in a JSON object. The value is parsed as JSON and
/// taken as a string when that fails.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| Error::invalid(format!("override `{assignment}` is not key=value")))?;
    let value: Value = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(Error::invalid(format!("override key `{key}` has an empty segment")));
        }
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::invalid(format!("override `{key}`: `{part}` is not inside an object")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("split yields at least one segment")
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl LoadedConfig {
    pub fn from_value(mut raw: Value, base_dir: PathBuf, overrides: &[String]) -> Result<Self> {
        for o in overrides {
            apply_override(&mut raw, o)?;
        }
        let mut config: RunConfig =
            serde_json::from_value(raw.clone()).map_err(|e| Error::invalid(format!("config: {e}")))?;
        let base = base_dir.as_path();
        config.corpus.iter_mut().for_each(|p| resolve(base, p));
        for p in [
            config.annotations.as_mut(),
            config.ratings.as_mut(),
            config.normalizer.stopwords_file.as_mut(),
            config.lexicon.as_mut(),
            config.gender.fixture.as_mut(),
            config.gender.cache_file.as_mut(),
        ]
        .into_iter()
        .flatten()
        {
            resolve(base, p);
        }
        resolve(base, &mut config.output_dir);
        Ok(Self { config, raw, base_dir })
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let raw: Value = serde_json::from_str(&text).map_err(|e| Error::invalid(format!("config: {e}")))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_value(raw, base, overrides)
    }

    /// sha256 of the canonical (key-sorted) configuration JSON.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(&self.raw).expect("json")))
    }

    fn display_path(&self, p: &Path) -> String {
        p.strip_prefix(&self.base_dir).unwrap_or(p).display().to_string()
    }

    /// Every input file the configuration references.
    pub fn input_files(&self) -> Vec<PathBuf> {
        let c = &self.config;
        let mut files = c.corpus.clone();
        files.extend(
            [
                &c.annotations,
                &c.ratings,
                &c.normalizer.stopwords_file,
                &c.lexicon,
                &c.gender.fixture,
            ]
            .into_iter()
            .flatten()
            .cloned(),
        );
        files
    }

    pub fn validate(&self, stages: &[Stage]) -> Result<()> {
        let c = &self.config;
        if c.corpus.is_empty() {
            return Err(Error::invalid("config: at least one corpus file is required"));
        }
        for f in self.input_files() {
            if !f.is_file() {
                return Err(Error::invalid(format!("config: input file {} does not exist", f.display())));
            }
        }
        if c.cv.k < 2 {
            return Err(Error::invalid("config: cv.k must be at least 2"));
        }
        if !(0.0..1.0).contains(&c.cv.holdout_fraction) {
            return Err(Error::invalid("config: cv.holdout_fraction must be in [0, 1)"));
        }
        c.lda.validate()?;
        let needs = |s: Stage| stages.contains(&s);
        if needs(Stage::Agreement) && c.ratings.is_none() {
            return Err(Error::invalid("config: the agreement stage needs `ratings`"));
        }
        if (needs(Stage::Train) || needs(Stage::Evaluate)) && c.annotations.is_none() {
            return Err(Error::invalid("config: training and evaluation need `annotations`"));
        }
        Ok(())
    }
}

/// Fails when a requested stage needs an artifact that neither an earlier
/// requested stage nor a previous run provides.
pub fn check_dependencies(stages: &[Stage], out_dir: &Path) -> Result<()> {
    for &s in stages {
        if let Some((dep, artifact)) = s.requires() {
            if !stages.contains(&dep) && !out_dir.join(artifact).is_file() {
                return Err(Error::Dependency {
                    stage: s.to_string(),
                    requires: dep.to_string(),
                    reason: format!("{artifact} not found in {}", out_dir.display()),
                });
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Ok,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageReport {
    pub stage: Stage,
    pub status: StageStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<String>,
    pub outputs: Vec<String>,
    /// Human-readable lines for standard output.
    #[serde(skip)]
    pub summary: Vec<String>,
    #[serde(skip)]
    pub elapsed_ms: u128,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub complete: bool,
    pub stages: Vec<StageReport>,
    pub out_dir: PathBuf,
}

#[derive(Serialize)]
struct FileHash {
    path: String,
    sha256: String,
    bytes: u64,
}

fn hash_file(path: &Path) -> Result<(String, u64)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok((hex::encode(Sha256::digest(&bytes)), bytes.len() as u64))
}

#[derive(Serialize)]
struct Seeds {
    cv: u64,
    relevance_learner: u64,
    category_learner: u64,
    lda: u64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    library_version: &'static str,
    config_hash: String,
    config: &'a Value,
    inputs: Vec<FileHash>,
    seeds: Seeds,
    complete: bool,
    stages: &'a [StageReport],
    outputs: Vec<FileHash>,
    timings_ms: BTreeMap<String, u128>,
}

struct Ctx<'a> {
    cfg: &'a LoadedConfig,
    out: PathBuf,
    normalizer: NormalizerConfig,
    outputs: Vec<String>,
    summary: Vec<String>,
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

impl Ctx<'_> {
    fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        write_json(&self.out.join(name), value)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.out.join(name);
        let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
        self.outputs.push(name.to_string());
        Ok(BufWriter::new(f))
    }

    fn say(&mut self, line: String) {
        self.summary.push(line);
    }

    fn full_corpus(&self) -> Result<Corpus> {
        let c = &self.cfg.config;
        let parts = c
            .corpus
            .iter()
            .map(|p| load_corpus(p, c.corpus_format, c.strict).map(|l| l.corpus))
            .collect::<Result<Vec<_>>>()?;
        Corpus::concat(parts)
    }

    /// The corpus after the keyword filter.
    fn working_corpus(&self) -> Result<Corpus> {
        let corpus = self.full_corpus()?;
        if self.cfg.config.keywords.is_empty() {
            Ok(corpus)
        } else {
            keyword_filter(&corpus, &self.cfg.config.keywords)
        }
    }

    fn annotations(&self) -> Result<Vec<AnnotatedTweet>> {
        let path = self.cfg.config.annotations.as_ref().expect("validated");
        load_annotations(path, &self.full_corpus()?)
    }

    /// Training and holdout portions of the annotations.
    fn split(&self) -> Result<(Vec<AnnotatedTweet>, Vec<AnnotatedTweet>)> {
        let annotated = self.annotations()?;
        let keys: Vec<usize> = annotated
            .iter()
            .map(|a| outcome_index(a.relevance, a.category).unwrap_or(5))
            .collect();
        let cv = &self.cfg.config.cv;
        let (train, hold) = holdout_split(&keys, cv.holdout_fraction, cv.seed)?;
        let pick = |idx: Vec<usize>| idx.into_iter().map(|i| annotated[i].clone()).collect();
        Ok((pick(train), pick(hold)))
    }

    fn verdicts(&self) -> Result<Vec<CascadeVerdict>> {
        let path = self.out.join(VERDICTS_FILE);
        read_verdicts_csv(File::open(&path).map_err(|e| Error::io(&path, e))?)
    }

    fn spec_for(base: &LearnerSpec, algorithm: Algorithm) -> LearnerSpec {
        if base.algorithm() == algorithm {
            base.clone()
        } else {
            LearnerSpec::with_defaults(algorithm, base.seed())
        }
    }
}

#[derive(Serialize)]
struct StageCv<'a> {
    stage: &'a str,
    examples: usize,
    reports: Vec<CvReport>,
}

fn check_pooled(report: &CvReport, n: usize) -> Result<()> {
    if report.confusion.total() as usize != n {
        return Err(Error::invalid(format!(
            "{}: pooled matrix holds {} predictions for {n} examples",
            report.learner,
            report.confusion.total()
        )));
    }
    Ok(())
}

fn cv_line(stage: &str, r: &CvReport) -> String {
    let m = &r.metrics;
    let auc = m.auc.map_or("   n/a".to_string(), |a| format!("{a:.3}"));
    format!(
        "{stage:<9} {:<28} P {:.3}  R {:.3}  F {:.3}  AUC {auc}",
        r.learner, m.weighted.precision, m.weighted.recall, m.weighted.f_measure
    )
}

fn stage_agreement(ctx: &mut Ctx) -> Result<()> {
    let path = ctx.cfg.config.ratings.clone().expect("validated");
    let m = load_ratings(&path)?;
    let report = kappa_report(&m, &ctx.cfg.display_path(&path))?;
    ctx.say(format!(
        "Fleiss kappa {:.3} over {} items, {} raters",
        report.kappa, report.items, report.raters
    ));
    ctx.json("agreement.json", &report)
}

fn stage_train(ctx: &mut Ctx) -> Result<()> {
    let (train, hold) = ctx.split()?;
    let c = &ctx.cfg.config;
    let model = train_cascade(&train, &c.relevance_learner, &c.category_learner, &ctx.normalizer)?;
    model.save(&ctx.out.join(CASCADE_FILE))?;
    ctx.outputs.push(CASCADE_FILE.to_string());
    ctx.say(format!(
        "trained cascade ({} / {}) on {} tweets, {} held out",
        c.relevance_learner.algorithm(),
        c.category_learner.algorithm(),
        train.len(),
        hold.len()
    ));
    Ok(())
}

fn stage_evaluate(ctx: &mut Ctx) -> Result<()> {
    let (train, hold) = ctx.split()?;
    let c = ctx.cfg.config.clone();
    for (name, docs, base) in [
        ("relevance", LabeledDocs::relevance(&train, &ctx.normalizer)?, &c.relevance_learner),
        ("category", LabeledDocs::category(&train, &ctx.normalizer)?, &c.category_learner),
    ] {
        let plan = stratified_kfold(&docs.labels, c.cv.k, c.cv.seed)?;
        let mut reports = Vec::new();
        for &algo in &c.compare_learners {
            let r = cross_validate(&Ctx::spec_for(base, algo), &docs, &plan)?;
            check_pooled(&r, docs.len())?;
            ctx.say(cv_line(name, &r));
            reports.push(r);
        }
        ctx.json(
            &format!("cv_{name}.json"),
            &StageCv {
                stage: name,
                examples: docs.len(),
                reports,
            },
        )?;
    }

    let cascade = cross_validate_cascade(
        &train,
        &c.relevance_learner,
        &c.category_learner,
        &ctx.normalizer,
        c.cv.k,
        c.cv.seed,
    )?;
    ctx.say(cv_line("cascade", &cascade));
    let mut w = ctx.create("cv_cascade_confusion.csv")?;
    cascade.confusion.write_csv(&mut w)?;
    drop(w);
    ctx.json("cv_cascade.json", &cascade)?;

    if hold.is_empty() {
        ctx.say("no holdout configured; error analysis skipped".into());
        return Ok(());
    }
    let model = CascadeModel::load(&ctx.out.join(CASCADE_FILE))?;
    let analysis = cascade_error_analysis(&model, &hold, true)?;
    if let Some(pos) = &analysis.relevance.positive_class {
        ctx.say(format!(
            "holdout of {}: relevant P {:.3} R {:.3} F {:.3}",
            hold.len(),
            pos.precision,
            pos.recall,
            pos.f_measure
        ));
    }
    ctx.json("error_analysis.json", &analysis)
}

fn stage_classify(ctx: &mut Ctx) -> Result<()> {
    let model = CascadeModel::load(&ctx.out.join(CASCADE_FILE))?;
    let corpus = ctx.working_corpus()?;
    let (verdicts, dist) = classify_corpus(&model, &corpus);
    let mut w = ctx.create(VERDICTS_FILE)?;
    write_verdicts_csv(&verdicts, &mut w)?;
    drop(w);
    ctx.say(format!(
        "classified {} tweets: {} not relevant, {} symptoms, {} treatment, {} transmission, {} prevention",
        dist.total(),
        dist.notrelevant,
        dist.symptoms,
        dist.treatment,
        dist.transmission,
        dist.prevention
    ));
    ctx.json("category_distribution.json", &dist)
}

#[derive(Serialize)]
struct TopicsReport<'a> {
    library_version: &'static str,
    lda: &'a LdaConfig,
    categories: BTreeMap<String, crate::topics::CategoryTopics>,
}

fn stage_topics(ctx: &mut Ctx) -> Result<()> {
    let verdicts = ctx.verdicts()?;
    let corpus = ctx.working_corpus()?;
    let c = ctx.cfg.config.clone();
    let by_cat = per_category_topics(&verdicts, &corpus, &ctx.normalizer, &c.lda, c.top_words)?;
    for (cat, t) in &by_cat {
        let model = t.model.as_ref().expect("fitted model");
        for row in &model.phi {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!("{cat}: topic-word row sums to {s}")));
            }
        }
        if model.k() >= 2 {
            let map = intertopic_map(model)?;
            let mut w = ctx.create(&format!("intertopic_{cat}.csv"))?;
            map.write_csv(&mut w)?;
        }
        let words: Vec<&str> = t.topics[0].top_words.iter().take(5).map(|w| w.word.as_str()).collect();
        ctx.say(format!("{cat}: {} tweets, topic 0: {}", t.documents, words.join(", ")));
    }
    let categories = by_cat.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    ctx.json(
        "topics.json",
        &TopicsReport {
            library_version: LIBRARY_VERSION,
            lda: &c.lda,
            categories,
        },
    )
}

fn gender_client(cfg: &RunConfig) -> Result<GenderClient> {
    let g = &cfg.gender;
    let client = match g.mode {
        GenderMode::Fixture => match &g.fixture {
            Some(p) => GenderClient::fixture_file(p)?,
            None => GenderClient::bundled_fixture(),
        },
        GenderMode::Live => {
            let mut settings = g.live.clone().or_else(LiveSettings::from_env).ok_or_else(|| {
                Error::invalid("live gender mode needs `gender.live.base_url` or the environment variable")
            })?;
            if settings.api_key.is_none() {
                settings.api_key = std::env::var(GENDER_KEY_ENV).ok();
            }
            GenderClient::live(settings)?
        }
    };
    match &g.cache_file {
        Some(p) if g.mode == GenderMode::Live => client.with_cache_file(p.clone()),
        _ => Ok(client),
    }
}

fn stage_profile(ctx: &mut Ctx) -> Result<()> {
    let verdicts = ctx.verdicts()?;
    let corpus = ctx.working_corpus()?;
    let c = &ctx.cfg.config;
    let lexicon = match &c.lexicon {
        Some(p) => PolarityLexicon::load(p)?,
        None => PolarityLexicon::bundled(),
    };
    let client = gender_client(c)?;
    let (pol, gen) = profile_corpus(&corpus, &ctx.normalizer, &lexicon, &client);
    let report = distribution_report(&corpus, &pol, &gen, Some(&verdicts))?;
    let scored: u64 = (0..4).map(|r| report.polarity_count(r)).sum();
    let gendered: u64 = (0..3).map(|g| report.gender_count(g)).sum();
    if scored != report.total || gendered != report.total {
        return Err(Error::invalid("profile counts do not cover the corpus"));
    }
    ctx.say(format!(
        "profiled {} tweets: {:.1}% retweets, {:.1}% with URLs, {} gender requests",
        report.total,
        report.retweet_percent(),
        report.url_percent(),
        client.requests()
    ));
    ctx.json("profile.json", &report)
}

fn normalizer(settings: &NormalizerSettings) -> Result<NormalizerConfig> {
    let mut n = NormalizerConfig {
        drop_single_chars: settings.drop_single_chars,
        keep_hashtag_body: settings.keep_hashtag_body,
        ..NormalizerConfig::default()
    };
    if let Some(p) = &settings.stopwords_file {
        n.load_stopwords(p)?;
    }
    Ok(n)
}

/// Runs `stages` (in pipeline order) and writes the bundle plus manifest.
/// Configuration and dependency problems fail before any work is done.
pub fn run(cfg: &LoadedConfig, stages: &[Stage], out_dir: Option<&Path>) -> Result<RunOutcome> {
    let out = out_dir.map_or_else(|| cfg.config.output_dir.clone(), Path::to_path_buf);
    let mut ordered: Vec<Stage> = Stage::ALL.into_iter().filter(|s| stages.contains(s)).collect();
    ordered.dedup();
    cfg.validate(&ordered)?;
    check_dependencies(&ordered, &out)?;
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;

    let normalizer = normalizer(&cfg.config.normalizer)?;
    let mut reports: Vec<StageReport> = Vec::new();
    let mut timings = BTreeMap::new();
    for stage in ordered {
        let upstream_failed = stage
            .requires()
            .and_then(|(dep, _)| reports.iter().find(|r| r.stage == dep))
            .filter(|r| r.status != StageStatus::Ok);
        if let Some(dep) = upstream_failed {
            reports.push(StageReport {
                stage,
                status: StageStatus::Skipped,
                diagnostics: Some(format!("upstream stage `{}` did not complete", dep.stage)),
                outputs: Vec::new(),
                summary: Vec::new(),
                elapsed_ms: 0,
            });
            continue;
        }
        let mut ctx = Ctx {
            cfg,
            out: out.clone(),
            normalizer: normalizer.clone(),
            outputs: Vec::new(),
            summary: Vec::new(),
        };
        info!("running stage {stage}");
        let start = Instant::now();
        let result = match stage {
            Stage::Agreement => stage_agreement(&mut ctx),
            Stage::Train => stage_train(&mut ctx),
            Stage::Evaluate => stage_evaluate(&mut ctx),
            Stage::Classify => stage_classify(&mut ctx),
            Stage::Topics => stage_topics(&mut ctx),
            Stage::Profile => stage_profile(&mut ctx),
        };
        let elapsed_ms = start.elapsed().as_millis();
        timings.insert(stage.to_string(), elapsed_ms);
        let (status, diagnostics) = match result {
            Ok(()) => (StageStatus::Ok, None),
            Err(e) => {
                log::error!("stage {stage} failed: {e}");
                (StageStatus::Failed, Some(e.to_string()))
            }
        };
        reports.push(StageReport {
            stage,
            status,
            diagnostics,
            outputs: ctx.outputs,
            summary: ctx.summary,
            elapsed_ms,
        });
    }

    let complete = reports.iter().all(|r| r.status == StageStatus::Ok);
    let inputs = cfg
        .input_files()
        .iter()
        .map(|p| {
            let (sha256, bytes) = hash_file(p)?;
            Ok(FileHash {
                path: cfg.display_path(p),
                sha256,
                bytes,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut output_names: Vec<&String> = reports.iter().flat_map(|r| &r.outputs).collect();
    output_names.sort();
    let outputs = output_names
        .into_iter()
        .map(|name| {
            let (sha256, bytes) = hash_file(&out.join(name))?;
            Ok(FileHash {
                path: name.clone(),
                sha256,
                bytes,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let c = &cfg.config;
    let manifest = Manifest {
        library_version: LIBRARY_VERSION,
        config_hash: cfg.hash(),
        config: &cfg.raw,
        inputs,
        seeds: Seeds {
            cv: c.cv.seed,
            relevance_learner: c.relevance_learner.seed(),
            category_learner: c.category_learner.seed(),
            lda: c.lda.seed,
        },
        complete,
        stages: &reports,
        outputs,
        timings_ms: timings,
    };
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    Ok(RunOutcome {
        complete,
        stages: reports,
        out_dir: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn overrides_set_nested_values() {
        let mut v = json!({"cv": {"k": 10}, "keywords": ["zika"]});
        apply_override(&mut v, "cv.k=5").unwrap();
        apply_override(&mut v, "lda.alpha=0.5").unwrap();
        apply_override(&mut v, "relevance_learner.algorithm=smo").unwrap();
        assert_eq!(v["cv"]["k"], 5);
        assert_eq!(v["lda"]["alpha"], 0.5);
        assert_eq!(v["relevance_learner"]["algorithm"], "smo");
        assert!(apply_override(&mut v, "novalue").is_err());
        assert!(apply_override(&mut v, "keywords.x=1").is_err());
    }

    #[test]
    fn paths_resolve_against_config_dir() {
        let raw = json!({"corpus": ["c.jsonl", "/abs/d.jsonl"], "annotations": "a.csv"});
        let cfg = LoadedConfig::from_value(raw, PathBuf::from("/data/run"), &[]).unwrap();
        assert_eq!(cfg.config.corpus[0], PathBuf::from("/data/run/c.jsonl"));
        assert_eq!(cfg.config.corpus[1], PathBuf::from("/abs/d.jsonl"));
        assert_eq!(cfg.config.output_dir, PathBuf::from("/data/run/out"));
        assert_eq!(cfg.display_path(&cfg.config.corpus[0]), "c.jsonl");
    }

    #[test]
    fn unknown_fields_rejected() {
        let raw = json!({"corpus": ["c.jsonl"], "corpos": 1});
        assert!(LoadedConfig::from_value(raw, PathBuf::new(), &[]).is_err());
    }

    #[test]
    fn dependency_rules() {
        let dir = tempfile::tempdir().unwrap();
        let err = check_dependencies(&[Stage::Topics], dir.path()).unwrap_err();
        assert!(matches!(err, Error::Dependency { .. }));
        check_dependencies(&[Stage::Classify, Stage::Topics, Stage::Train], dir.path()).unwrap();
        fs::write(dir.path().join(VERDICTS_FILE), "").unwrap();
        check_dependencies(&[Stage::Profile], dir.path()).unwrap();
        assert!(check_dependencies(&[Stage::Evaluate], dir.path()).is_err());
    }

    #[test]
    fn stage_names_roundtrip() {
        for s in Stage::ALL {
            assert_eq!(s.as_str().parse::<Stage>().unwrap(), s);
        }
        assert!("lda".parse::<Stage>().is_err());
    }
}
