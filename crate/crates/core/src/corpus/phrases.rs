use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError};

/// Adjacent token pairs promoted to single phrase tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "PhraseTableRepr", from = "PhraseTableRepr")]
pub struct PhraseTable {
    entries: BTreeMap<(String, String), f64>,
    min_count: u64,
    threshold: f64,
}

#[derive(Serialize, Deserialize)]
struct PhraseTableRepr {
    min_count: u64,
    threshold: f64,
    entries: Vec<(String, String, f64)>,
}

impl From<PhraseTable> for PhraseTableRepr {
    fn from(t: PhraseTable) -> Self {
        PhraseTableRepr {
            min_count: t.min_count,
            threshold: t.threshold,
            entries: t.entries.into_iter().map(|((a, b), s)| (a, b, s)).collect(),
        }
    }
}

impl From<PhraseTableRepr> for PhraseTable {
    fn from(r: PhraseTableRepr) -> Self {
        PhraseTable {
            min_count: r.min_count,
            threshold: r.threshold,
            entries: r.entries.into_iter().map(|(a, b, s)| ((a, b), s)).collect(),
        }
    }
}

impl PhraseTable {
    pub fn empty() -> Self {
        PhraseTable {
            entries: BTreeMap::new(),
            min_count: 1,
            threshold: f64::INFINITY,
        }
    }

    /// Table with explicit entries; scores are not checked.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        PhraseTable {
            entries: pairs
                .into_iter()
                .map(|(a, b)| ((a.to_string(), b.to_string()), f64::INFINITY))
                .collect(),
            min_count: 1,
            threshold: 0.0,
        }
    }

    pub fn contains(&self, a: &str, b: &str) -> bool {
        // BTreeMap<(String, String), _> cannot be probed with borrowed halves
        self.score(a, b).is_some()
    }

    pub fn score(&self, a: &str, b: &str) -> Option<f64> {
        self.entries
            .range((a.to_string(), b.to_string())..)
            .next()
            .filter(|((x, y), _)| x == a && y == b)
            .map(|(_, s)| *s)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str, f64)> {
        self.entries.iter().map(|((a, b), s)| (a.as_str(), b.as_str(), *s))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

/// Scores every adjacent pair of the corpus as
/// `(count(ab) - min_count) * V / (count(a) * count(b))`, with `V` the number
/// of distinct tokens, and keeps pairs with `count(ab) >= min_count` and
/// score at or above `threshold`.
pub fn detect_bigrams(corpus: &Corpus, min_count: u64, threshold: f64) -> Result<PhraseTable, CorpusError> {
    detect_bigrams_in(&corpus.token_lists(), min_count, threshold)
}

/// [`detect_bigrams`] over raw token sequences.
pub fn detect_bigrams_in<S: AsRef<[String]>>(
    documents: &[S],
    min_count: u64,
    threshold: f64,
) -> Result<PhraseTable, CorpusError> {
    if min_count < 1 {
        return Err(CorpusError::InvalidArgument("min_count must be >= 1".into()));
    }
    if !(threshold > 0.0) {
        return Err(CorpusError::InvalidArgument("threshold must be > 0".into()));
    }
    let mut unigrams: HashMap<&str, u64> = HashMap::new();
    let mut bigrams: HashMap<(&str, &str), u64> = HashMap::new();
    for doc in documents {
        let tokens = doc.as_ref();
        for t in tokens {
            *unigrams.entry(t.as_str()).or_insert(0) += 1;
        }
        for pair in tokens.windows(2) {
            *bigrams.entry((pair[0].as_str(), pair[1].as_str())).or_insert(0) += 1;
        }
    }
    let vocab_size = unigrams.len() as f64;
    let mut entries = BTreeMap::new();
    for ((a, b), count) in bigrams {
        if count < min_count {
            continue;
        }
        let score = (count - min_count) as f64 * vocab_size / (unigrams[a] as f64 * unigrams[b] as f64);
        if score >= threshold {
            entries.insert((a.to_string(), b.to_string()), score);
        }
    }
    Ok(PhraseTable {
        entries,
        min_count,
        threshold,
    })
}

/// Greedy left-to-right merge of table pairs into `a_b` tokens. A merged
/// token is never merged again.
pub fn apply_phrases(tokens: &[String], table: &PhraseTable) -> Vec<String> {
    if table.is_empty() {
        return tokens.to_vec();
    }
    let mut out = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        if i + 1 < tokens.len() && table.contains(&tokens[i], &tokens[i + 1]) {
            out.push(format!("{}_{}", tokens[i], tokens[i + 1]));
            i += 2;
        } else {
            out.push(tokens[i].clone());
            i += 1;
        }
    }
    out
}
