//! Experiment configuration, read from TOML.
//!
//! Every field has a default, so an empty file is a valid config that runs
//! the LDA backend on the bundled corpus. The top-level `seed` drives every
//! random choice in a run; the `seed` fields of the nested sections are
//! overwritten with it.
//!
//! ```toml
//! backend = "word2vec"
//! seed = 7
//!
//! [forest]
//! criteria = ["gini"]
//! max_depths = [8, "none"]
//! n_estimators = [100]
//!
//! [lime]
//! n_samples = 500
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use topicbench::corpus::PreprocessConfig;
use topicbench::ctxembed::PoolingConfig;
use topicbench::forest::{Criterion, FeatureSubset, ForestParams};
use topicbench::lda::LdaConfig;
use topicbench::lime::LimeConfig;
use topicbench::word2vec::W2vConfig;
use topicbench::Backend;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub corpus: PathBuf,
    pub backend: Backend,
    pub seed: u64,
    /// Share of each class that goes to training.
    pub split_fraction: f64,
    pub cv_folds: usize,
    /// Fit the embedding on the whole corpus before splitting, as the
    /// original study did, instead of on the training half only.
    pub paper_faithful: bool,
    pub vocab_min_freq: u64,
    pub preprocess: PreprocessConfig,
    pub phrases: PhraseSettings,
    pub lda: LdaConfig,
    pub word2vec: W2vConfig,
    pub contextual: ContextualConfig,
    pub forest: ForestGrid,
    pub lime: LimeConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            corpus: PathBuf::from("data/energetics_abstracts.jsonl"),
            backend: Backend::Lda,
            seed: 0,
            split_fraction: 0.67,
            cv_folds: 3,
            paper_faithful: false,
            vocab_min_freq: 2,
            preprocess: PreprocessConfig::with_lexicon("data/pos_lexicon.tsv"),
            phrases: PhraseSettings::default(),
            lda: LdaConfig::default(),
            word2vec: W2vConfig::default(),
            contextual: ContextualConfig::default(),
            forest: ForestGrid::default(),
            lime: LimeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhraseSettings {
    pub min_count: u64,
    pub threshold: f64,
}

impl Default for PhraseSettings {
    fn default() -> Self {
        PhraseSettings {
            min_count: 5,
            threshold: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContextualConfig {
    pub provider: ProviderConfig,
    pub pooling: PoolingConfig,
    /// Documents fetched concurrently.
    pub in_flight: usize,
}

impl Default for ContextualConfig {
    fn default() -> Self {
        ContextualConfig {
            provider: ProviderConfig::Stub {
                layers: 12,
                dim: 768,
            },
            pooling: PoolingConfig::default(),
            in_flight: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProviderConfig {
    Stub { layers: usize, dim: usize },
    File { dir: PathBuf, layers: usize, dim: usize },
    Http { url: String, layers: usize, dim: usize },
}

/// Depth limit in a grid: an integer, or `"none"` for unlimited.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DepthRepr", into = "DepthRepr")]
pub struct MaxDepth(pub Option<usize>);

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum DepthRepr {
    Limit(usize),
    Word(String),
}

impl TryFrom<DepthRepr> for MaxDepth {
    type Error = String;

    fn try_from(r: DepthRepr) -> Result<Self, String> {
        match r {
            DepthRepr::Limit(0) => Err("max depth must be >= 1".into()),
            DepthRepr::Limit(n) => Ok(MaxDepth(Some(n))),
            DepthRepr::Word(w) if w == "none" => Ok(MaxDepth(None)),
            DepthRepr::Word(w) => Err(format!("max depth must be an integer or \"none\", got {w:?}")),
        }
    }
}

impl From<MaxDepth> for DepthRepr {
    fn from(d: MaxDepth) -> Self {
        match d.0 {
            Some(n) => DepthRepr::Limit(n),
            None => DepthRepr::Word("none".into()),
        }
    }
}

/// Cartesian grid of forest candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestGrid {
    pub criteria: Vec<Criterion>,
    pub max_depths: Vec<MaxDepth>,
    pub n_estimators: Vec<usize>,
    pub min_samples_leaf: usize,
    pub features_per_split: FeatureSubset,
    pub bootstrap: bool,
}

impl Default for ForestGrid {
    fn default() -> Self {
        ForestGrid {
            criteria: vec![Criterion::Gini, Criterion::Entropy],
            max_depths: vec![MaxDepth(Some(8)), MaxDepth(Some(16)), MaxDepth(None)],
            n_estimators: vec![100, 300, 500],
            min_samples_leaf: 1,
            features_per_split: FeatureSubset::Sqrt,
            bootstrap: true,
        }
    }
}

impl ForestGrid {
    /// Candidates in criterion, depth, size order.
    pub fn candidates(&self, seed: u64) -> Vec<ForestParams> {
        let mut out = Vec::new();
        for &criterion in &self.criteria {
            for depth in &self.max_depths {
                for &n_estimators in &self.n_estimators {
                    out.push(ForestParams {
                        n_estimators,
                        criterion,
                        max_depth: depth.0,
                        min_samples_leaf: self.min_samples_leaf,
                        features_per_split: self.features_per_split,
                        bootstrap: self.bootstrap,
                        seed,
                    });
                }
            }
        }
        out
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: PathBuf::from("<config>"),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Copy with every nested seed set from the top-level one.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.lda.seed = self.seed;
        c.word2vec.seed = self.seed;
        c.lime.seed = self.seed;
        c
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return bad(format!("split_fraction must be in (0, 1), got {}", self.split_fraction));
        }
        if self.cv_folds < 2 {
            return bad("cv_folds must be >= 2".into());
        }
        if self.vocab_min_freq < 1 {
            return bad("vocab_min_freq must be >= 1".into());
        }
        if self.phrases.min_count < 1 || !(self.phrases.threshold > 0.0) {
            return bad("phrases need min_count >= 1 and threshold > 0".into());
        }
        if self.forest.criteria.is_empty() || self.forest.max_depths.is_empty() || self.forest.n_estimators.is_empty() {
            return bad("forest grid has an empty axis".into());
        }
        if self.forest.n_estimators.contains(&0) {
            return bad("forest n_estimators must be >= 1".into());
        }
        if self.contextual.in_flight < 1 {
            return bad("contextual.in_flight must be >= 1".into());
        }
        self.lda.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.word2vec.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.lime.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    /// Referenced input paths must exist when a run starts.
    pub fn check_paths(&self) -> Result<(), ConfigError> {
        let mut paths = vec![self.corpus.clone()];
        paths.extend(self.preprocess.pos_lexicon_path.clone());
        if let (Backend::Contextual, ProviderConfig::File { dir, .. }) = (self.backend, &self.contextual.provider) {
            paths.push(dir.clone());
        }
        for p in paths {
            if !p.exists() {
                return Err(ConfigError::Invalid(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn fingerprint(&self) -> String {
        topicbench::fingerprint::of_json(&self.resolved())
    }
}
