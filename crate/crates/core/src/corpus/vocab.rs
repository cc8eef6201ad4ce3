use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError};

/// Token ↔ index mapping with corpus frequencies.
///
/// Indices are contiguous from 0 in descending frequency, ties broken
/// lexicographically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "VocabRepr", try_from = "VocabRepr")]
pub struct Vocabulary {
    tokens: Vec<String>,
    frequencies: Vec<u64>,
    index: HashMap<String, usize>,
    min_freq: u64,
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    min_freq: u64,
    tokens: Vec<String>,
    frequencies: Vec<u64>,
}

impl From<Vocabulary> for VocabRepr {
    fn from(v: Vocabulary) -> Self {
        VocabRepr {
            min_freq: v.min_freq,
            tokens: v.tokens,
            frequencies: v.frequencies,
        }
    }
}

impl TryFrom<VocabRepr> for Vocabulary {
    type Error = String;

    fn try_from(r: VocabRepr) -> Result<Self, Self::Error> {
        if r.tokens.len() != r.frequencies.len() {
            return Err("vocabulary tokens and frequencies differ in length".into());
        }
        let index: HashMap<String, usize> = r.tokens.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
        if index.len() != r.tokens.len() {
            return Err("vocabulary contains duplicate tokens".into());
        }
        Ok(Vocabulary {
            tokens: r.tokens,
            frequencies: r.frequencies,
            index,
            min_freq: r.min_freq,
        })
    }
}

impl Vocabulary {
    /// Counts tokens over any set of token sequences.
    pub fn from_token_lists<S: AsRef<[String]>>(documents: &[S], min_freq: u64) -> Result<Self, CorpusError> {
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for doc in documents {
            for t in doc.as_ref() {
                *counts.entry(t.as_str()).or_insert(0) += 1;
            }
        }
        let mut kept: Vec<(&str, u64)> = counts.into_iter().filter(|&(_, c)| c >= min_freq).collect();
        if kept.is_empty() {
            return Err(CorpusError::EmptyVocabulary { min_freq });
        }
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let tokens: Vec<String> = kept.iter().map(|(t, _)| t.to_string()).collect();
        let frequencies = kept.iter().map(|&(_, c)| c).collect();
        let index = tokens.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
        Ok(Vocabulary {
            tokens,
            frequencies,
            index,
            min_freq,
        })
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

    pub fn frequency(&self, index: usize) -> u64 {
        self.frequencies[index]
    }

    pub fn frequencies(&self) -> &[u64] {
        &self.frequencies
    }

    pub fn min_freq(&self) -> u64 {
        self.min_freq
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// Indices of the in-vocabulary tokens, in order; unknown tokens skipped.
    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().filter_map(|t| self.index_of(t)).collect()
    }

    /// Fingerprint of the token order; stored alongside trained models.
    pub fn hash(&self) -> String {
        crate::fingerprint::of_json(&self.tokens)
    }
}

/// Indexes every token that occurs at least `min_freq` times in the corpus.
pub fn build_vocabulary(corpus: &Corpus, min_freq: u64) -> Result<Vocabulary, CorpusError> {
    Vocabulary::from_token_lists(&corpus.token_lists(), min_freq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, TopicLabel};

    fn corpus(texts: &[&str]) -> Corpus {
        Corpus::new(
            texts
                .iter()
                .enumerate()
                .map(|(i, t)| Document::labeled(format!("d{i}"), TopicLabel::Modeling, &t.split(' ').collect::<Vec<_>>()))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn frequency_then_lexicographic_order() {
        let c = corpus(&["a a b", "a c"]);
        let v = build_vocabulary(&c, 1).unwrap();
        assert_eq!(v.tokens(), ["a", "b", "c"]);
        assert_eq!(v.index_of("a"), Some(0));
        assert_eq!(v.index_of("c"), Some(2));
        assert_eq!(v.frequencies(), [3, 1, 1]);

        let v = build_vocabulary(&c, 2).unwrap();
        assert_eq!(v.tokens(), ["a"]);
        assert!(matches!(build_vocabulary(&c, 4), Err(CorpusError::EmptyVocabulary { .. })));
    }

    #[test]
    fn serde_round_trip_keeps_index() {
        let v = build_vocabulary(&corpus(&["x y y z z z"]), 1).unwrap();
        let back: Vocabulary = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.index_of("z"), Some(0));
        assert_eq!(back.encode(&["y".into(), "q".into(), "z".into()]), [1, 0]);
    }
}
