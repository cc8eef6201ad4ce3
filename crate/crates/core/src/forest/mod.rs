//! Random forest classifier over document embeddings, with stratified
//! k-fold cross-validation, grid search and evaluation metrics.
//!
//! Class probabilities are soft votes: the mean over trees of each tree's
//! normalised leaf class counts.

mod cv;
mod metrics;
mod tree;

use std::path::Path;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::TopicLabel;
use crate::embedding::{Backend, EmbeddingMatrix};

pub use cv::{cross_validate, default_grid, grid_search, stratified_kfold, CvReport, GridSearchResult};
pub use metrics::{evaluate, evaluate_labels, ClassMetrics, EvalReport};
pub use tree::{DecisionTree, Node};

#[derive(Debug, Error)]
pub enum ForestError {
    #[error("invalid forest parameters: {0}")]
    Params(String),
    #[error("invalid training data: {0}")]
    Data(String),
    #[error("feature vector has {got} values, model expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("cannot build {k} folds: class {label} has only {count} member(s)")]
    Stratification { label: String, count: usize, k: usize },
    #[error("unknown class index {0}")]
    UnknownLabel(usize),
    #[error("{0}")]
    Evaluation(String),
    #[error("model file: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    #[default]
    Gini,
    Entropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSubset {
    /// ⌊√d⌋ features considered per split.
    #[default]
    Sqrt,
    All,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub criterion: Criterion,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub features_per_split: FeatureSubset,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_estimators: 300,
            criterion: Criterion::Gini,
            max_depth: None,
            min_samples_leaf: 1,
            features_per_split: FeatureSubset::Sqrt,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<(), ForestError> {
        if self.n_estimators < 1 {
            return Err(ForestError::Params("n_estimators must be >= 1".into()));
        }
        if self.max_depth == Some(0) {
            return Err(ForestError::Params("max_depth must be >= 1 when set".into()));
        }
        if self.min_samples_leaf < 1 {
            return Err(ForestError::Params("min_samples_leaf must be >= 1".into()));
        }
        Ok(())
    }
}

/// Where a model's training data came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingFingerprint {
    pub backend: Backend,
    /// Hash of the training matrix and labels.
    pub data_hash: String,
    /// Hash of the corpus the embeddings were computed from, when known.
    pub corpus_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    trees: Vec<DecisionTree>,
    classes: Vec<TopicLabel>,
    n_features: usize,
    params: ForestParams,
    fingerprint: TrainingFingerprint,
}

/// Trains a forest on `x` (one row per document) and labels `y`.
///
/// Trees are grown in parallel; tree `i` draws from its own seeded stream,
/// so the result does not depend on the thread count.
pub fn fit_forest(x: &EmbeddingMatrix, y: &[TopicLabel], params: &ForestParams) -> Result<ForestModel, ForestError> {
    params.validate()?;
    if x.rows() != y.len() {
        return Err(ForestError::Data(format!("{} rows but {} labels", x.rows(), y.len())));
    }
    if y.len() < 2 {
        return Err(ForestError::Data("need at least 2 samples".into()));
    }
    let mut distinct = y.to_vec();
    distinct.sort();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(ForestError::Data("need at least 2 distinct labels".into()));
    }
    if x.cols() == 0 {
        return Err(ForestError::Data("feature matrix has no columns".into()));
    }
    if !x.all_finite() {
        return Err(ForestError::Data("non-finite feature value".into()));
    }

    let classes: Vec<usize> = y.iter().map(|l| l.index()).collect();
    let samples = tree::Samples {
        x: x.as_slice(),
        n_features: x.cols(),
        y: &classes,
    };
    let grow = tree::GrowParams {
        criterion: params.criterion,
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        features: params.features_per_split,
        n_classes: TopicLabel::COUNT,
    };
    let n = y.len();
    let trees: Vec<DecisionTree> = (0..params.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = crate::rng::substream(params.seed, t as u64);
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            DecisionTree::grow(&samples, rows, &grow, &mut rng)
        })
        .collect();

    Ok(ForestModel {
        trees,
        classes: TopicLabel::ALL.to_vec(),
        n_features: x.cols(),
        params: params.clone(),
        fingerprint: TrainingFingerprint {
            backend: x.backend(),
            data_hash: crate::fingerprint::of_json(&(x.as_slice(), y)),
            corpus_hash: None,
        },
    })
}

impl ForestModel {
    /// Assembles a model from prebuilt trees over 4-class leaves.
    pub fn from_trees(trees: Vec<DecisionTree>, n_features: usize, params: ForestParams) -> Self {
        ForestModel {
            trees,
            classes: TopicLabel::ALL.to_vec(),
            n_features,
            params,
            fingerprint: TrainingFingerprint {
                backend: Backend::Lda,
                data_hash: String::new(),
                corpus_hash: None,
            },
        }
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn classes(&self) -> &[TopicLabel] {
        &self.classes
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn fingerprint(&self) -> &TrainingFingerprint {
        &self.fingerprint
    }

    pub fn set_corpus_hash(&mut self, hash: impl Into<String>) {
        self.fingerprint.corpus_hash = Some(hash.into());
    }

    /// Mean over trees of the normalised leaf class counts.
    pub fn predict_proba(&self, x: &[f64]) -> Result<[f64; 4], ForestError> {
        if x.len() != self.n_features {
            return Err(ForestError::Dimension {
                expected: self.n_features,
                got: x.len(),
            });
        }
        let mut out = [0.0; 4];
        for tree in &self.trees {
            let counts = tree.leaf_counts(x);
            let total: u32 = counts.iter().sum();
            for (o, &c) in out.iter_mut().zip(counts) {
                *o += c as f64 / total as f64;
            }
        }
        let n = self.trees.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
        Ok(out)
    }

    /// Class with the highest soft vote; ties go to the lower class index.
    pub fn predict(&self, x: &[f64]) -> Result<TopicLabel, ForestError> {
        let p = self.predict_proba(x)?;
        Ok(self.classes[argmax(&p)])
    }

    pub fn predict_matrix(&self, x: &EmbeddingMatrix) -> Result<Vec<TopicLabel>, ForestError> {
        x.iter_rows().map(|row| self.predict(row)).collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ForestError> {
        let json = serde_json::to_vec(self).map_err(|e| ForestError::Io(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| ForestError::Io(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ForestError> {
        let bytes = std::fs::read(path).map_err(|e| ForestError::Io(e.to_string()))?;
        serde_json::from_slice(&bytes).map_err(|e| ForestError::Io(e.to_string()))
    }
}

pub(crate) fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}
