//! Tweet corpora, gold annotations and the label taxonomy.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single raw tweet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<String>,
}

impl TweetRecord {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            author_name: None,
            created_at: None,
        }
    }

    pub fn with_author(mut self, name: impl Into<String>) -> Self {
        self.author_name = Some(name.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelevanceLabel {
    Relevant,
    NotRelevant,
}

impl RelevanceLabel {
    /// Class order used by the relevance stage.
    pub const ALL: [RelevanceLabel; 2] = [RelevanceLabel::Relevant, RelevanceLabel::NotRelevant];

    pub fn as_str(self) -> &'static str {
        match self {
            RelevanceLabel::Relevant => "relevant",
            RelevanceLabel::NotRelevant => "notrelevant",
        }
    }

    pub fn index(self) -> usize {
        match self {
            RelevanceLabel::Relevant => 0,
            RelevanceLabel::NotRelevant => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn class_names() -> Vec<String> {
        Self::ALL.iter().map(|l| l.as_str().to_string()).collect()
    }
}

impl fmt::Display for RelevanceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RelevanceLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "relevant" => Ok(RelevanceLabel::Relevant),
            "notrelevant" => Ok(RelevanceLabel::NotRelevant),
            other => Err(Error::UnknownLabel(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CategoryLabel {
    Symptoms,
    Treatment,
    Transmission,
    Prevention,
}

impl CategoryLabel {
    pub const ALL: [CategoryLabel; 4] = [
        CategoryLabel::Symptoms,
        CategoryLabel::Treatment,
        CategoryLabel::Transmission,
        CategoryLabel::Prevention,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CategoryLabel::Symptoms => "symptoms",
            CategoryLabel::Treatment => "treatment",
            CategoryLabel::Transmission => "transmission",
            CategoryLabel::Prevention => "prevention",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn class_names() -> Vec<String> {
        Self::ALL.iter().map(|l| l.as_str().to_string()).collect()
    }
}

impl fmt::Display for CategoryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CategoryLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "symptoms" => Ok(CategoryLabel::Symptoms),
            "treatment" => Ok(CategoryLabel::Treatment),
            "transmission" => Ok(CategoryLabel::Transmission),
            "prevention" => Ok(CategoryLabel::Prevention),
            other => Err(Error::UnknownLabel(other.to_string())),
        }
    }
}

/// A tweet with its gold labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedTweet {
    pub tweet: TweetRecord,
    pub relevance: RelevanceLabel,
    pub category: Option<CategoryLabel>,
    /// Relevant, but the annotators gave no category.
    #[serde(default)]
    pub relevance_only: bool,
}

impl AnnotatedTweet {
    pub fn new(
        tweet: TweetRecord,
        relevance: RelevanceLabel,
        category: Option<CategoryLabel>,
    ) -> Result<Self> {
        if category.is_some() && relevance == RelevanceLabel::NotRelevant {
            return Err(Error::TaxonomyViolation {
                id: tweet.id.clone(),
                category: category.map(|c| c.to_string()).unwrap_or_default(),
            });
        }
        let relevance_only = relevance == RelevanceLabel::Relevant && category.is_none();
        Ok(Self {
            tweet,
            relevance,
            category,
            relevance_only,
        })
    }
}

/// An ordered, id-unique collection of tweets.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Corpus {
    records: Vec<TweetRecord>,
    pub source: String,
}

impl Corpus {
    pub fn new(records: Vec<TweetRecord>, source: impl Into<String>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if r.id.is_empty() {
                return Err(Error::invalid("tweet id must be non-empty"));
            }
            if !seen.insert(r.id.as_str()) {
                return Err(Error::DuplicateId(r.id.clone()));
            }
        }
        Ok(Self {
            records,
            source: source.into(),
        })
    }

    pub fn records(&self) -> &[TweetRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, TweetRecord> {
        self.records.iter()
    }

    pub fn get(&self, id: &str) -> Option<&TweetRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    /// Writes the corpus as JSONL, one record per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")
                .map_err(|e| Error::io(self.source.clone(), e))?;
        }
        Ok(())
    }

    /// Concatenates corpora, rejecting ids that repeat across inputs.
    pub fn concat(parts: Vec<Corpus>) -> Result<Corpus> {
        let source = parts
            .iter()
            .map(|c| c.source.as_str())
            .collect::<Vec<_>>()
            .join("+");
        let records = parts.into_iter().flat_map(|c| c.records).collect();
        Corpus::new(records, source)
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a TweetRecord;
    type IntoIter = std::slice::Iter<'a, TweetRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(CorpusFormat::Jsonl),
            "csv" => Ok(CorpusFormat::Csv),
            other => Err(Error::invalid(format!("unknown corpus format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    pub corpus: Corpus,
    /// Malformed records that were skipped.
    pub skipped: usize,
}

/// Loads a corpus file. Malformed records are skipped and counted unless
/// `strict` is set, in which case the first one is fatal.
pub fn load_corpus(path: &Path, format: CorpusFormat, strict: bool) -> Result<LoadedCorpus> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let source = path.display().to_string();
    let (records, skipped) = match format {
        CorpusFormat::Jsonl => read_jsonl(BufReader::new(file), &source, strict)?,
        CorpusFormat::Csv => read_csv(file, &source, strict)?,
    };
    if skipped > 0 {
        log::warn!("{source}: skipped {skipped} malformed record(s)");
    }
    Ok(LoadedCorpus {
        corpus: Corpus::new(records, source)?,
        skipped,
    })
}

fn read_jsonl<R: BufRead>(
    reader: R,
    source: &str,
    strict: bool,
) -> Result<(Vec<TweetRecord>, usize)> {
    let mut records = Vec::new();
    let mut skipped = 0;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(source, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<TweetRecord>(&line) {
            Ok(r) if !r.id.is_empty() => records.push(r),
            Ok(_) => {
                if strict {
                    return Err(Error::Malformed {
                        location: format!("{source}:{}", lineno + 1),
                        reason: "empty id".into(),
                    });
                }
                skipped += 1;
            }
            Err(e) => {
                if strict {
                    return Err(Error::Malformed {
                        location: format!("{source}:{}", lineno + 1),
                        reason: e.to_string(),
                    });
                }
                skipped += 1;
            }
        }
    }
    Ok((records, skipped))
}

fn read_csv<R: std::io::Read>(
    reader: R,
    source: &str,
    strict: bool,
) -> Result<(Vec<TweetRecord>, usize)> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let mut records = Vec::new();
    let mut skipped = 0;
    for (i, row) in rdr.deserialize::<TweetRecord>().enumerate() {
        match row {
            Ok(mut r) if !r.id.is_empty() => {
                r.author_name = r.author_name.filter(|s| !s.is_empty());
                r.created_at = r.created_at.filter(|s| !s.is_empty());
                records.push(r)
            }
            other => {
                if strict {
                    let reason = match other {
                        Err(e) => e.to_string(),
                        Ok(_) => "empty id".into(),
                    };
                    return Err(Error::Malformed {
                        location: format!("{source}: row {}", i + 1),
                        reason,
                    });
                }
                skipped += 1;
            }
        }
    }
    Ok((records, skipped))
}

#[derive(Debug, Deserialize)]
struct AnnotationRow {
    tweet_id: String,
    relevance: String,
    #[serde(default)]
    category: Option<String>,
}

/// Joins an annotation CSV (`tweet_id,relevance,category`) to `corpus`.
/// Annotation files are always strict.
pub fn load_annotations(path: &Path, corpus: &Corpus) -> Result<Vec<AnnotatedTweet>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_annotations(file, corpus)
}

pub fn read_annotations<R: std::io::Read>(reader: R, corpus: &Corpus) -> Result<Vec<AnnotatedTweet>> {
    let index: HashMap<&str, &TweetRecord> =
        corpus.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for row in rdr.deserialize::<AnnotationRow>() {
        let row = row?;
        let tweet = index
            .get(row.tweet_id.as_str())
            .ok_or_else(|| Error::UnknownId(row.tweet_id.clone()))?;
        if !seen.insert(row.tweet_id.clone()) {
            return Err(Error::DuplicateId(row.tweet_id));
        }
        let relevance: RelevanceLabel = row.relevance.parse()?;
        let category = match row.category.as_deref().map(str::trim) {
            None | Some("") => None,
            Some(c) => Some(c.parse::<CategoryLabel>()?),
        };
        out.push(AnnotatedTweet::new((*tweet).clone(), relevance, category)?);
    }
    Ok(out)
}

/// Writes annotations in the CSV layout `load_annotations` reads.
pub fn write_annotations<W: Write>(annotated: &[AnnotatedTweet], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["tweet_id", "relevance", "category"])?;
    for a in annotated {
        let cat = a.category.map(|c| c.as_str()).unwrap_or("");
        w.write_record([a.tweet.id.as_str(), a.relevance.as_str(), cat])?;
    }
    w.flush().map_err(|e| Error::io("annotations", e))?;
    Ok(())
}

/// Keeps tweets whose lowercased text contains any keyword as a substring.
pub fn keyword_filter(corpus: &Corpus, keywords: &[String]) -> Result<Corpus> {
    if keywords.is_empty() {
        return Err(Error::invalid("keyword list must be non-empty"));
    }
    let needles: Vec<String> = keywords.iter().map(|k| k.to_lowercase()).collect();
    let records = corpus
        .iter()
        .filter(|r| {
            let text = r.text.to_lowercase();
            needles.iter().any(|k| text.contains(k.as_str()))
        })
        .cloned()
        .collect();
    Ok(Corpus {
        records,
        source: corpus.source.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn corpus(texts: &[(&str, &str)]) -> Corpus {
        Corpus::new(
            texts.iter().map(|(i, t)| TweetRecord::new(*i, *t)).collect(),
            "test",
        )
        .unwrap()
    }

    #[test]
    fn empty_file_loads_empty_corpus() {
        let f = write_tmp("");
        let loaded = load_corpus(f.path(), CorpusFormat::Jsonl, false).unwrap();
        assert!(loaded.corpus.is_empty());
        assert_eq!(loaded.skipped, 0);
    }

    #[test]
    fn jsonl_preserves_file_order() {
        let f = write_tmp(
            r#"{"id":"t1","text":"zika one"}
{"id":"t2","text":"zika two","author_name":"Mary Smith"}
{"id":"t3","text":"three","created_at":"2016-02-24T10:00:00Z"}
"#,
        );
        let loaded = load_corpus(f.path(), CorpusFormat::Jsonl, false).unwrap();
        let ids: Vec<_> = loaded.corpus.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["t1", "t2", "t3"]);
        assert_eq!(
            loaded.corpus.records()[1].author_name.as_deref(),
            Some("Mary Smith")
        );
    }

    #[test]
    fn truncated_line_is_skipped_and_counted() {
        let f = write_tmp(
            r#"{"id":"t1","text":"a"}
{"id":"t2","text":"b"}
{"id":"t3","te
{"id":"t4","text":"d"}
"#,
        );
        let loaded = load_corpus(f.path(), CorpusFormat::Jsonl, false).unwrap();
        assert_eq!(loaded.corpus.len(), 3);
        assert_eq!(loaded.skipped, 1);

        let err = load_corpus(f.path(), CorpusFormat::Jsonl, true).unwrap_err();
        assert!(matches!(err, Error::Malformed { .. }));
    }

    #[test]
    fn duplicate_id_is_fatal() {
        let f = write_tmp("{\"id\":\"t1\",\"text\":\"a\"}\n{\"id\":\"t1\",\"text\":\"b\"}\n");
        match load_corpus(f.path(), CorpusFormat::Jsonl, false) {
            Err(Error::DuplicateId(id)) => assert_eq!(id, "t1"),
            other => panic!("expected duplicate id, got {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_fatal() {
        let err = load_corpus(Path::new("/nonexistent/x.jsonl"), CorpusFormat::Jsonl, false);
        assert!(matches!(err, Err(Error::Io { .. })));
    }

    #[test]
    fn csv_corpus() {
        let f = write_tmp("id,text,author_name,created_at\nt1,\"hello, zika\",,\nt2,bye,Bob,\n");
        let loaded = load_corpus(f.path(), CorpusFormat::Csv, false).unwrap();
        assert_eq!(loaded.corpus.len(), 2);
        assert_eq!(loaded.corpus.records()[0].text, "hello, zika");
        assert_eq!(loaded.corpus.records()[0].author_name, None);
        assert_eq!(loaded.corpus.records()[1].author_name.as_deref(), Some("Bob"));
    }

    #[test]
    fn annotations_map_labels() {
        let c = corpus(&[("t1", "a"), ("t2", "b"), ("t3", "c"), ("t4", "d")]);
        let rows = "tweet_id,relevance,category\nt1,Relevant,SYMPTOMS\nt2,notrelevant,\nt4,relevant,\n";
        let ann = read_annotations(rows.as_bytes(), &c).unwrap();
        assert_eq!(ann[0].relevance, RelevanceLabel::Relevant);
        assert_eq!(ann[0].category, Some(CategoryLabel::Symptoms));
        assert_eq!(ann[1].relevance, RelevanceLabel::NotRelevant);
        assert_eq!(ann[1].category, None);
        assert!(!ann[1].relevance_only);
        assert!(ann[2].relevance_only);
    }

    #[test]
    fn annotation_errors() {
        let c = corpus(&[("t1", "a"), ("t3", "c")]);
        let bad = "tweet_id,relevance,category\nt3,notrelevant,treatment\n";
        assert!(matches!(
            read_annotations(bad.as_bytes(), &c),
            Err(Error::TaxonomyViolation { .. })
        ));
        let missing = "tweet_id,relevance,category\nt9,relevant,\n";
        match read_annotations(missing.as_bytes(), &c) {
            Err(Error::UnknownId(id)) => assert_eq!(id, "t9"),
            other => panic!("{other:?}"),
        }
        let unknown = "tweet_id,relevance,category\nt1,maybe,\n";
        assert!(matches!(
            read_annotations(unknown.as_bytes(), &c),
            Err(Error::UnknownLabel(_))
        ));
        let unknown_cat = "tweet_id,relevance,category\nt1,relevant,vaccines\n";
        assert!(matches!(
            read_annotations(unknown_cat.as_bytes(), &c),
            Err(Error::UnknownLabel(_))
        ));
    }

    #[test]
    fn keyword_filter_cases() {
        let c = corpus(&[
            ("1", "ZIKA virus spreads"),
            ("2", "nothing here"),
            ("3", "zika virus in brazil"),
            ("4", "zika"),
            ("5", "the Zika Virus again"),
        ]);
        let none = keyword_filter(&c, &["ebola".into()]).unwrap();
        assert!(none.is_empty());

        let hits = keyword_filter(&c, &["zika".into()]).unwrap();
        assert_eq!(hits.len(), 4);
        assert_eq!(hits.records()[0].id, "1");

        let c5 = corpus(&[
            ("1", "mosquito season"),
            ("2", "new zika virus case"),
            ("3", "zika"),
            ("4", "Zika Virus confirmed"),
            ("5", "virus zika"),
        ]);
        let two = keyword_filter(&c5, &["zika virus".into()]).unwrap();
        let ids: Vec<_> = two.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["2", "4"]);

        assert!(keyword_filter(&c, &[]).is_err());
    }

    #[test]
    fn jsonl_roundtrip() {
        let mut c = corpus(&[("a", "héllo \"zika\"\n"), ("b", "")]);
        c.records[0].author_name = Some("Ana".into());
        let mut buf = Vec::new();
        c.write_jsonl(&mut buf).unwrap();
        let f = write_tmp(std::str::from_utf8(&buf).unwrap());
        let back = load_corpus(f.path(), CorpusFormat::Jsonl, true).unwrap().corpus;
        assert_eq!(back.records(), c.records());
    }
}
