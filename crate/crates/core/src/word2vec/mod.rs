//! Word vectors by skip-gram (or CBOW) with negative sampling, mean-pooled
//! into document embeddings.

pub mod objective;

use std::io::{self, Write};
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::container::{Container, ContainerError, Matrix};
use crate::corpus::{Corpus, Vocabulary};
use crate::embedding::{Backend, EmbeddingMatrix};
use objective::{dot, pair_coefficient};

const CONTAINER_KIND: &str = "word2vec";

#[derive(Debug, Error)]
pub enum W2vError {
    #[error("invalid word2vec configuration: {0}")]
    Config(String),
    #[error("cannot train on an empty corpus")]
    EmptyCorpus,
    #[error("document has no in-vocabulary tokens")]
    NoKnownTokens,
    #[error("documents without in-vocabulary tokens: {}", .ids.join(", "))]
    EmptyDocuments { ids: Vec<String> },
    #[error("model container: {0}")]
    Container(#[from] ContainerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TrainingMode {
    #[default]
    Skipgram,
    Cbow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct W2vConfig {
    pub dim: usize,
    /// Maximum distance between center and context word.
    pub window: usize,
    /// Noise words per observed pair.
    pub negatives: usize,
    pub epochs: usize,
    pub initial_lr: f64,
    pub min_lr: f64,
    pub mode: TrainingMode,
    /// Frequent-word subsampling threshold; 0 disables subsampling.
    pub subsample_t: f64,
    pub seed: u64,
}

impl Default for W2vConfig {
    fn default() -> Self {
        W2vConfig {
            dim: 200,
            window: 5,
            negatives: 5,
            epochs: 15,
            initial_lr: 0.025,
            min_lr: 1e-4,
            mode: TrainingMode::Skipgram,
            subsample_t: 1e-3,
            seed: 0,
        }
    }
}

impl W2vConfig {
    pub fn validate(&self) -> Result<(), W2vError> {
        let fail = |m: &str| Err(W2vError::Config(m.into()));
        if self.dim < 1 {
            return fail("dim must be >= 1");
        }
        if self.negatives < 1 {
            return fail("negatives must be >= 1");
        }
        if self.window < 1 {
            return fail("window must be >= 1");
        }
        if self.epochs < 1 {
            return fail("epochs must be >= 1");
        }
        if !(self.min_lr > 0.0 && self.min_lr <= self.initial_lr) {
            return fail("need 0 < min_lr <= initial_lr");
        }
        if !(self.subsample_t >= 0.0) {
            return fail("subsample_t must be >= 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct W2vModel {
    config: W2vConfig,
    vocabulary: Vocabulary,
    /// V×dim input ("hidden layer") weights; these are the word vectors.
    input: Vec<f64>,
    /// V×dim output weights.
    output: Vec<f64>,
}

struct Trainer<'a> {
    config: &'a W2vConfig,
    dim: usize,
    input: Vec<f64>,
    output: Vec<f64>,
    noise: WeightedIndex<f64>,
    rng: crate::rng::Rng,
    hidden: Vec<f64>,
    error: Vec<f64>,
}

impl Trainer<'_> {
    /// One SGD step on the observed pair (`input_row`, `target`) plus
    /// negatives, where the input side is the vector in `self.hidden`.
    /// Accumulates dL/d(hidden) into `self.error` and updates output rows.
    fn negative_sampling(&mut self, target: usize, lr: f64) {
        let dim = self.dim;
        self.error.iter_mut().for_each(|e| *e = 0.0);
        for n in 0..=self.config.negatives {
            let (row, label) = if n == 0 {
                (target, 1.0)
            } else {
                let w = self.noise.sample(&mut self.rng);
                if w == target {
                    continue;
                }
                (w, 0.0)
            };
            let u = &mut self.output[row * dim..(row + 1) * dim];
            let g = pair_coefficient(dot(u, &self.hidden), label);
            for ((e, u_j), h_j) in self.error.iter_mut().zip(u.iter_mut()).zip(&self.hidden) {
                *e += g * *u_j;
                *u_j -= lr * g * h_j;
            }
        }
    }

    fn skipgram(&mut self, center: usize, context: usize, lr: f64) {
        let dim = self.dim;
        self.hidden.copy_from_slice(&self.input[center * dim..(center + 1) * dim]);
        self.negative_sampling(context, lr);
        let v = &mut self.input[center * dim..(center + 1) * dim];
        for (v_j, e) in v.iter_mut().zip(&self.error) {
            *v_j -= lr * e;
        }
    }

    fn cbow(&mut self, center: usize, contexts: &[usize], lr: f64) {
        let dim = self.dim;
        let scale = 1.0 / contexts.len() as f64;
        self.hidden.iter_mut().for_each(|h| *h = 0.0);
        for &c in contexts {
            for (h, v) in self.hidden.iter_mut().zip(&self.input[c * dim..(c + 1) * dim]) {
                *h += v * scale;
            }
        }
        self.negative_sampling(center, lr);
        for &c in contexts {
            for (v_j, e) in self.input[c * dim..(c + 1) * dim].iter_mut().zip(&self.error) {
                *v_j -= lr * e * scale;
            }
        }
    }
}

/// Trains word vectors on the corpus tokens. Sequential and deterministic
/// for a given seed.
pub fn fit_word2vec(corpus: &Corpus, vocab: &Vocabulary, config: &W2vConfig) -> Result<W2vModel, W2vError> {
    config.validate()?;
    let docs: Vec<Vec<usize>> = corpus
        .iter()
        .map(|d| vocab.encode(&d.tokens))
        .filter(|d| !d.is_empty())
        .collect();
    if docs.is_empty() {
        return Err(W2vError::EmptyCorpus);
    }
    let dim = config.dim;
    let v_n = vocab.len();
    let mut rng = crate::rng::seeded(config.seed);
    let half = 0.5 / dim as f64;
    let input: Vec<f64> = (0..v_n * dim).map(|_| rng.random_range(-half..half)).collect();
    let output = vec![0.0; v_n * dim];
    let noise_weights: Vec<f64> = vocab.frequencies().iter().map(|&f| (f as f64).powf(0.75)).collect();
    let noise = WeightedIndex::new(&noise_weights).expect("vocabulary frequencies are positive");

    let total_words: u64 = vocab.frequencies().iter().sum();
    let keep_prob: Vec<f64> = vocab
        .frequencies()
        .iter()
        .map(|&f| {
            if config.subsample_t <= 0.0 {
                1.0
            } else {
                let ratio = config.subsample_t * total_words as f64 / f as f64;
                ((1.0 / ratio).sqrt() + 1.0) * ratio
            }
        })
        .collect();

    let mut trainer = Trainer {
        config,
        dim,
        input,
        output,
        noise,
        rng,
        hidden: vec![0.0; dim],
        error: vec![0.0; dim],
    };

    let corpus_words: usize = docs.iter().map(Vec::len).sum();
    let schedule = (config.epochs * corpus_words) as f64;
    let mut processed = 0usize;
    let mut contexts = Vec::with_capacity(2 * config.window);
    for _ in 0..config.epochs {
        for doc in &docs {
            let kept: Vec<usize> = doc
                .iter()
                .copied()
                .filter(|&w| keep_prob[w] >= 1.0 || trainer.rng.random::<f64>() < keep_prob[w])
                .collect();
            for (pos, &center) in kept.iter().enumerate() {
                let progress = (processed + pos) as f64 / schedule;
                let lr = (config.initial_lr - (config.initial_lr - config.min_lr) * progress).max(config.min_lr);
                let reach = trainer.rng.random_range(1..=config.window);
                let lo = pos.saturating_sub(reach);
                let hi = (pos + reach).min(kept.len() - 1);
                match config.mode {
                    TrainingMode::Skipgram => {
                        for ctx in lo..=hi {
                            if ctx != pos {
                                trainer.skipgram(center, kept[ctx], lr);
                            }
                        }
                    }
                    TrainingMode::Cbow => {
                        contexts.clear();
                        contexts.extend((lo..=hi).filter(|&c| c != pos).map(|c| kept[c]));
                        if !contexts.is_empty() {
                            trainer.cbow(center, &contexts, lr);
                        }
                    }
                }
            }
            processed += doc.len();
        }
    }

    Ok(W2vModel {
        config: config.clone(),
        vocabulary: vocab.clone(),
        input: trainer.input,
        output: trainer.output,
    })
}

impl W2vModel {
    pub fn config(&self) -> &W2vConfig {
        &self.config
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    /// Input vector of `token`, or `None` when it is out of vocabulary.
    pub fn word_vector(&self, token: &str) -> Option<&[f64]> {
        let i = self.vocabulary.index_of(token)?;
        Some(&self.input[i * self.dim()..(i + 1) * self.dim()])
    }

    pub fn output_vector(&self, token: &str) -> Option<&[f64]> {
        let i = self.vocabulary.index_of(token)?;
        Some(&self.output[i * self.dim()..(i + 1) * self.dim()])
    }

    /// Mean of the word vectors of the in-vocabulary tokens; unknown tokens
    /// are skipped.
    pub fn doc_embedding(&self, tokens: &[String]) -> Result<Vec<f64>, W2vError> {
        let mut sum = vec![0.0; self.dim()];
        let mut n = 0usize;
        for v in tokens.iter().filter_map(|t| self.word_vector(t)) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
            n += 1;
        }
        if n == 0 {
            return Err(W2vError::NoKnownTokens);
        }
        sum.iter_mut().for_each(|s| *s /= n as f64);
        Ok(sum)
    }

    /// N×dim matrix of [`doc_embedding`](Self::doc_embedding) rows in corpus order.
    pub fn doc_embedding_matrix(&self, corpus: &Corpus) -> Result<EmbeddingMatrix, W2vError> {
        let mut rows = Vec::with_capacity(corpus.len());
        let mut failed = Vec::new();
        for doc in corpus {
            match self.doc_embedding(&doc.tokens) {
                Ok(row) => rows.push(row),
                Err(_) => failed.push(doc.id.clone()),
            }
        }
        if !failed.is_empty() {
            return Err(W2vError::EmptyDocuments { ids: failed });
        }
        let mut m = EmbeddingMatrix::from_rows(Backend::Word2vec, rows);
        if corpus.is_empty() {
            m = EmbeddingMatrix::from_flat(Backend::Word2vec, 0, self.dim(), Vec::new());
        }
        Ok(m)
    }

    /// Plain-text dump: one `token v1 v2 ...` line per vocabulary entry.
    pub fn export_text<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (i, token) in self.vocabulary.tokens().iter().enumerate() {
            write!(w, "{token}")?;
            for v in &self.input[i * self.dim()..(i + 1) * self.dim()] {
                write!(w, " {v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), W2vError> {
        self.to_container().save(path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, W2vError> {
        Self::from_container(Container::load_kind(path, CONTAINER_KIND)?)
    }

    pub fn to_container(&self) -> Container {
        let v = self.vocabulary.len();
        Container {
            kind: CONTAINER_KIND.into(),
            header: serde_json::json!({
                "vocabulary_size": v,
                "dim": self.dim(),
                "config": self.config,
                "vocabulary_hash": self.vocabulary.hash(),
                "vocabulary": self.vocabulary,
            }),
            matrices: vec![
                Matrix::new(v, self.dim(), self.input.clone()),
                Matrix::new(v, self.dim(), self.output.clone()),
            ],
        }
    }

    pub fn from_container(c: Container) -> Result<Self, W2vError> {
        c.expect_kind(CONTAINER_KIND)?;
        let malformed = |m: String| W2vError::Container(ContainerError::Malformed(m));
        let field = |name: &str| c.header.get(name).cloned().ok_or_else(|| malformed(format!("missing {name}")));
        let config: W2vConfig = serde_json::from_value(field("config")?).map_err(|e| malformed(e.to_string()))?;
        let vocabulary: Vocabulary = serde_json::from_value(field("vocabulary")?).map_err(|e| malformed(e.to_string()))?;
        let hash: String = serde_json::from_value(field("vocabulary_hash")?).map_err(|e| malformed(e.to_string()))?;
        if hash != vocabulary.hash() {
            return Err(malformed("vocabulary hash mismatch".into()));
        }
        let [input, output]: [Matrix; 2] = c
            .matrices
            .try_into()
            .map_err(|_| malformed("expected two matrices".into()))?;
        for m in [&input, &output] {
            if m.rows != vocabulary.len() || m.cols != config.dim {
                return Err(malformed("matrix shape does not match header".into()));
            }
        }
        Ok(W2vModel {
            config,
            vocabulary,
            input: input.data,
            output: output.data,
        })
    }

    pub fn all_finite(&self) -> bool {
        self.input.iter().chain(&self.output).all(|v| v.is_finite())
    }
}
