//! Annotated abstracts: ingestion, adjudication and text preparation.

mod phrases;
mod preprocess;
mod split;
mod vocab;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use phrases::{apply_phrases, detect_bigrams, detect_bigrams_in, PhraseTable};
pub use preprocess::{preprocess, PosFilter, PosLexicon, PreprocessConfig, Preprocessor};
pub use split::{stratified_split, stratified_split_indices};
pub use vocab::{build_vocabulary, Vocabulary};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: duplicate document id {id:?} (first seen on line {first})")]
    DuplicateId { id: String, line: usize, first: usize },
    #[error("documents missing an annotation: {}", .ids.join(", "))]
    MissingAnnotation { ids: Vec<String> },
    #[error("documents without a consensus label: {}", .ids.join(", "))]
    Unlabeled { ids: Vec<String> },
    #[error("cannot stratify: label {label} has {count} document(s), need at least {needed}")]
    Stratification {
        label: TopicLabel,
        count: usize,
        needed: usize,
    },
    #[error("invalid preprocessing configuration: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("vocabulary is empty (min_freq = {min_freq})")]
    EmptyVocabulary { min_freq: u64 },
}

/// The four topic labels. No other value is representable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopicLabel {
    Characterization,
    Modeling,
    Processing,
    Synthesis,
}

impl TopicLabel {
    pub const ALL: [TopicLabel; 4] = [
        TopicLabel::Characterization,
        TopicLabel::Modeling,
        TopicLabel::Processing,
        TopicLabel::Synthesis,
    ];
    pub const COUNT: usize = 4;

    /// Position in [`TopicLabel::ALL`]; class index used by classifiers.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<TopicLabel> {
        Self::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TopicLabel::Characterization => "characterization",
            TopicLabel::Modeling => "modeling",
            TopicLabel::Processing => "processing",
            TopicLabel::Synthesis => "synthesis",
        }
    }
}

impl fmt::Display for TopicLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TopicLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TopicLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| format!("unknown topic label {s:?}"))
    }
}

/// One abstract with its two independent annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_a: Option<TopicLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_b: Option<TopicLabel>,
    /// Consensus label, set by [`adjudicate`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<TopicLabel>,
    /// Preprocessed (and possibly phrased) tokens.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tokens: Vec<String>,
}

impl Document {
    pub fn new(id: impl Into<String>, title: impl Into<String>, abstract_text: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            title: title.into(),
            abstract_text: abstract_text.into(),
            label_a: None,
            label_b: None,
            label: None,
            tokens: Vec::new(),
        }
    }

    /// Tokenized document with a consensus label; convenient for fixtures.
    pub fn labeled(id: impl Into<String>, label: TopicLabel, tokens: &[&str]) -> Self {
        let mut doc = Document::new(id, "", tokens.join(" "));
        doc.label_a = Some(label);
        doc.label_b = Some(label);
        doc.label = Some(label);
        doc.tokens = tokens.iter().map(|t| t.to_string()).collect();
        doc
    }

    /// Title and abstract, the text that gets preprocessed.
    pub fn full_text(&self) -> String {
        if self.title.is_empty() {
            self.abstract_text.clone()
        } else {
            format!("{}. {}", self.title, self.abstract_text)
        }
    }
}

/// Ordered collection of documents with unique ids.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    documents: Vec<Document>,
}

impl Corpus {
    /// Builds a corpus, rejecting empty or duplicate ids.
    pub fn new(documents: Vec<Document>) -> Result<Self, CorpusError> {
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for (i, doc) in documents.iter().enumerate() {
            if doc.id.is_empty() {
                return Err(CorpusError::Parse {
                    line: i + 1,
                    message: "empty document id".into(),
                });
            }
            if let Some(first) = seen.insert(doc.id.as_str(), i + 1) {
                return Err(CorpusError::DuplicateId {
                    id: doc.id.clone(),
                    line: i + 1,
                    first,
                });
            }
        }
        Ok(Corpus { documents })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn documents_mut(&mut self) -> &mut [Document] {
        &mut self.documents
    }

    pub fn into_documents(self) -> Vec<Document> {
        self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Document> {
        self.documents.iter()
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.id == id)
    }

    /// Sub-corpus at the given positions, in the given order.
    pub fn select(&self, indices: &[usize]) -> Corpus {
        Corpus {
            documents: indices.iter().map(|&i| self.documents[i].clone()).collect(),
        }
    }

    /// Consensus labels in corpus order.
    pub fn labels(&self) -> Result<Vec<TopicLabel>, CorpusError> {
        let missing: Vec<String> = self
            .documents
            .iter()
            .filter(|d| d.label.is_none())
            .map(|d| d.id.clone())
            .collect();
        if !missing.is_empty() {
            return Err(CorpusError::Unlabeled { ids: missing });
        }
        Ok(self.documents.iter().map(|d| d.label.unwrap()).collect())
    }

    /// Document count per consensus label.
    pub fn label_counts(&self) -> BTreeMap<TopicLabel, usize> {
        let mut counts = BTreeMap::new();
        for label in self.documents.iter().filter_map(|d| d.label) {
            *counts.entry(label).or_insert(0) += 1;
        }
        counts
    }

    /// Token sequences in corpus order.
    pub fn token_lists(&self) -> Vec<&[String]> {
        self.documents.iter().map(|d| d.tokens.as_slice()).collect()
    }

    /// Preprocesses title + abstract of every document in place.
    pub fn tokenize(&mut self, preprocessor: &Preprocessor) {
        for doc in &mut self.documents {
            doc.tokens = preprocessor.apply(&doc.full_text());
        }
    }

    /// Merges detected phrases in every document's tokens.
    pub fn apply_phrases(&mut self, table: &PhraseTable) {
        for doc in &mut self.documents {
            let tokens = std::mem::take(&mut doc.tokens);
            doc.tokens = apply_phrases(&tokens, table);
        }
    }

    /// Stable fingerprint of ids, labels and tokens.
    pub fn fingerprint(&self) -> String {
        crate::fingerprint::of_json(&self.documents)
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a Document;
    type IntoIter = std::slice::Iter<'a, Document>;

    fn into_iter(self) -> Self::IntoIter {
        self.documents.iter()
    }
}

#[derive(Deserialize)]
struct Record {
    id: String,
    #[serde(default)]
    title: String,
    #[serde(rename = "abstract")]
    abstract_text: String,
    #[serde(default)]
    label_a: Option<String>,
    #[serde(default)]
    label_b: Option<String>,
}

fn parse_label(raw: Option<String>, line: usize) -> Result<Option<TopicLabel>, CorpusError> {
    match raw {
        None => Ok(None),
        Some(s) if s.is_empty() => Ok(None),
        Some(s) => s
            .parse()
            .map(Some)
            .map_err(|message| CorpusError::Parse { line, message }),
    }
}

/// Parses a line-delimited JSON corpus from any reader.
///
/// Blank lines are skipped. Line numbers in errors are 1-based.
pub fn parse_corpus<R: BufRead>(reader: R) -> Result<Corpus, CorpusError> {
    let mut documents = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if record.id.is_empty() {
            return Err(CorpusError::Parse {
                line: line_no,
                message: "empty document id".into(),
            });
        }
        if let Some(&first) = seen.get(&record.id) {
            return Err(CorpusError::DuplicateId {
                id: record.id,
                line: line_no,
                first,
            });
        }
        seen.insert(record.id.clone(), line_no);
        let mut doc = Document::new(record.id, record.title, record.abstract_text);
        doc.label_a = parse_label(record.label_a, line_no)?;
        doc.label_b = parse_label(record.label_b, line_no)?;
        documents.push(doc);
    }
    Ok(Corpus { documents })
}

/// Reads a corpus file: one JSON object per line with fields `id`, `title`,
/// `abstract`, and optional `label_a` / `label_b`.
pub fn ingest(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_corpus(BufReader::new(file))
}

/// Keeps the documents both annotators labelled identically and records that
/// label as the consensus. Every document must carry both annotations.
pub fn adjudicate(corpus: &Corpus) -> Result<Corpus, CorpusError> {
    let missing: Vec<String> = corpus
        .iter()
        .filter(|d| d.label_a.is_none() || d.label_b.is_none())
        .map(|d| d.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(CorpusError::MissingAnnotation { ids: missing });
    }
    let documents = corpus
        .iter()
        .filter(|d| d.label_a == d.label_b)
        .map(|d| {
            let mut doc = d.clone();
            doc.label = d.label_a;
            doc
        })
        .collect();
    Ok(Corpus { documents })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(id: &str, a: &str, b: &str) -> String {
        format!(r#"{{"id":"{id}","title":"t {id}","abstract":"text","label_a":"{a}","label_b":"{b}"}}"#)
    }

    #[test]
    fn ingest_three_lines() {
        let text = [
            line("a1", "modeling", "modeling"),
            line("a2", "synthesis", "processing"),
            line("a3", "characterization", "characterization"),
        ]
        .join("\n");
        let corpus = parse_corpus(text.as_bytes()).unwrap();
        assert_eq!(corpus.len(), 3);
        assert_eq!(corpus.documents()[1].label_b, Some(TopicLabel::Processing));
        assert_eq!(corpus.documents()[2].id, "a3");
    }

    #[test]
    fn duplicate_id_cites_second_line() {
        let text = [
            line("a0", "modeling", "modeling"),
            line("a1", "modeling", "modeling"),
            line("a2", "modeling", "modeling"),
            line("a3", "modeling", "modeling"),
            line("a1", "modeling", "modeling"),
        ]
        .join("\n");
        match parse_corpus(text.as_bytes()) {
            Err(CorpusError::DuplicateId { id, line, first }) => {
                assert_eq!(id, "a1");
                assert_eq!(line, 5);
                assert_eq!(first, 2);
            }
            other => panic!("expected duplicate error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_line_is_named() {
        let text = format!("{}\n{{not json\n", line("a", "modeling", "modeling"));
        match parse_corpus(text.as_bytes()) {
            Err(CorpusError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let bad_label = r#"{"id":"x","abstract":"y","label_a":"Modeling"}"#;
        assert!(matches!(
            parse_corpus(bad_label.as_bytes()),
            Err(CorpusError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn adjudication_drops_planted_disagreements() {
        use TopicLabel::*;
        let pairs = [
            (Modeling, Modeling),
            (Modeling, Synthesis),
            (Processing, Processing),
            (Characterization, Characterization),
            (Synthesis, Processing),
            (Synthesis, Synthesis),
            (Characterization, Modeling),
            (Processing, Processing),
            (Modeling, Modeling),
            (Processing, Characterization),
        ];
        let docs = pairs
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| {
                let mut d = Document::new(format!("d{i}"), "", "x");
                d.label_a = Some(a);
                d.label_b = Some(b);
                d
            })
            .collect();
        let corpus = Corpus::new(docs).unwrap();
        let kept = adjudicate(&corpus).unwrap();
        assert_eq!(kept.len(), 6);
        let ids: Vec<_> = kept.iter().map(|d| d.id.as_str()).collect();
        assert_eq!(ids, ["d0", "d2", "d3", "d5", "d7", "d8"]);
        assert!(kept.iter().all(|d| d.label == d.label_a));
        assert_eq!(adjudicate(&kept).unwrap(), kept);
    }

    #[test]
    fn adjudication_requires_both_annotations() {
        let mut d = Document::new("lonely", "", "x");
        d.label_a = Some(TopicLabel::Modeling);
        let corpus = Corpus::new(vec![d]).unwrap();
        match adjudicate(&corpus) {
            Err(CorpusError::MissingAnnotation { ids }) => assert_eq!(ids, ["lonely"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn labels_round_trip_through_strings() {
        for label in TopicLabel::ALL {
            assert_eq!(label.as_str().parse::<TopicLabel>().unwrap(), label);
            assert_eq!(TopicLabel::from_index(label.index()), Some(label));
        }
        assert!("Characterization".parse::<TopicLabel>().is_err());
    }
}
