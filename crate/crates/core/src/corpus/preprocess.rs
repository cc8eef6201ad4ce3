use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CorpusError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PosFilter {
    Off,
    #[default]
    Lexicon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub lowercase: bool,
    pub strip_punctuation: bool,
    pub pos_filter: PosFilter,
    pub pos_lexicon_path: Option<PathBuf>,
    pub min_token_length: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            lowercase: true,
            strip_punctuation: true,
            pos_filter: PosFilter::Lexicon,
            pos_lexicon_path: None,
            min_token_length: 2,
        }
    }
}

impl PreprocessConfig {
    /// Lowercasing and punctuation stripping only.
    pub fn without_pos_filter() -> Self {
        PreprocessConfig {
            pos_filter: PosFilter::Off,
            ..Default::default()
        }
    }

    pub fn with_lexicon(path: impl Into<PathBuf>) -> Self {
        PreprocessConfig {
            pos_lexicon_path: Some(path.into()),
            ..Default::default()
        }
    }
}

/// Word → part-of-speech tag table.
///
/// File format: one `token<TAB>tag` pair per line, `#` starts a comment
/// line. Tags `NOUN`, `PROPN`, `VERB` and Penn-style `NN*` / `VB*` count as
/// nouns and verbs; every other tag marks a token the filter drops.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PosLexicon {
    tags: HashMap<String, String>,
}

impl PosLexicon {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| {
            CorpusError::Config(format!("cannot read POS lexicon {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CorpusError> {
        let mut tags = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            match (parts.next(), parts.next()) {
                (Some(word), Some(tag)) if !word.is_empty() && !tag.trim().is_empty() => {
                    tags.insert(word.to_lowercase(), tag.trim().to_string());
                }
                _ => {
                    return Err(CorpusError::Config(format!(
                        "POS lexicon line {}: expected `token<TAB>tag`",
                        i + 1
                    )))
                }
            }
        }
        Ok(PosLexicon { tags })
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        PosLexicon {
            tags: pairs
                .into_iter()
                .map(|(w, t)| (w.to_lowercase(), t.to_string()))
                .collect(),
        }
    }

    pub fn tag(&self, token: &str) -> Option<&str> {
        self.tags.get(token).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    /// Untagged tokens are kept: unknown scientific terms and chemical
    /// names must survive the filter.
    pub fn keeps(&self, token: &str) -> bool {
        match self.tag(token) {
            None => true,
            Some(tag) => is_noun_or_verb(tag),
        }
    }
}

fn is_noun_or_verb(tag: &str) -> bool {
    let upper = tag.to_ascii_uppercase();
    matches!(upper.as_str(), "NOUN" | "PROPN" | "VERB") || upper.starts_with("NN") || upper.starts_with("VB")
}

/// A [`PreprocessConfig`] with its lexicon loaded.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    config: PreprocessConfig,
    lexicon: Option<PosLexicon>,
}

impl Preprocessor {
    pub fn new(config: PreprocessConfig) -> Result<Self, CorpusError> {
        let lexicon = match config.pos_filter {
            PosFilter::Off => None,
            PosFilter::Lexicon => {
                let path = config.pos_lexicon_path.as_ref().ok_or_else(|| {
                    CorpusError::Config("pos_filter = lexicon requires pos_lexicon_path".into())
                })?;
                Some(PosLexicon::load(path)?)
            }
        };
        Ok(Preprocessor { config, lexicon })
    }

    /// Uses an in-memory lexicon instead of `pos_lexicon_path`.
    pub fn with_lexicon(config: PreprocessConfig, lexicon: PosLexicon) -> Self {
        Preprocessor {
            lexicon: match config.pos_filter {
                PosFilter::Off => None,
                PosFilter::Lexicon => Some(lexicon),
            },
            config,
        }
    }

    pub fn config(&self) -> &PreprocessConfig {
        &self.config
    }

    pub fn apply(&self, text: &str) -> Vec<String> {
        let text = if self.config.lowercase {
            text.to_lowercase()
        } else {
            text.to_string()
        };
        // some letters (e.g. mathematical script capitals) have no lowercase
        // mapping; they act as separators so the output stays lowercase
        let lowercase = self.config.lowercase;
        let strip = self.config.strip_punctuation;
        let split = text.split(move |c: char| {
            c.is_whitespace() || (strip && !c.is_alphanumeric()) || (lowercase && c.is_uppercase())
        });
        split
            .filter(|t| !t.is_empty())
            .filter(|t| t.chars().count() >= self.config.min_token_length)
            .filter(|t| t.chars().any(char::is_alphanumeric))
            .filter(|t| match &self.lexicon {
                Some(lex) => lex.keeps(&t.to_lowercase()),
                None => true,
            })
            .map(str::to_string)
            .collect()
    }
}

/// Tokenizes `text`: lowercase, split on anything that is not alphanumeric,
/// drop short tokens, and keep only nouns and verbs when a lexicon filter is
/// configured.
///
/// Loads the lexicon on every call; build a [`Preprocessor`] once when
/// processing a whole corpus.
pub fn preprocess(text: &str, config: &PreprocessConfig) -> Result<Vec<String>, CorpusError> {
    Ok(Preprocessor::new(config.clone())?.apply(text))
}
