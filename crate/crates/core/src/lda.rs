//! Latent Dirichlet allocation by collapsed Gibbs sampling.
//!
//! Documents are embedded as their posterior-mean topic proportions: an N×K
//! matrix whose rows lie on the probability simplex. Held-out documents are
//! embedded by fold-in sampling against the fixed topic–word distributions
//! ([`LdaModel::infer_topics`]).

use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::container::{Container, ContainerError, Matrix};
use crate::corpus::{Corpus, Vocabulary};
use crate::embedding::{Backend, EmbeddingMatrix};

const CONTAINER_KIND: &str = "lda";

#[derive(Debug, Error)]
pub enum LdaError {
    #[error("invalid LDA configuration: {0}")]
    Config(String),
    #[error("documents without in-vocabulary tokens: {}", .ids.join(", "))]
    EmptyDocuments { ids: Vec<String> },
    #[error("no in-vocabulary tokens to infer topics from")]
    NoKnownTokens,
    #[error("topic {topic} out of range (model has {topics} topics)")]
    TopicOutOfRange { topic: usize, topics: usize },
    #[error("model container: {0}")]
    Container(#[from] ContainerError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LdaConfig {
    /// Number of topics, K.
    pub topics: usize,
    /// Symmetric document–topic prior; `None` means 50 / K.
    pub alpha: Option<f64>,
    /// Symmetric topic–word prior.
    pub beta: f64,
    /// Gibbs sweeps over the whole corpus.
    pub iterations: usize,
    /// Sweeps discarded before posterior averaging starts.
    pub burn_in: usize,
    /// Sweeps used when folding in a held-out document.
    pub inference_iterations: usize,
    /// Log-likelihood is recorded after initialisation and every this many sweeps.
    pub log_likelihood_every: usize,
    pub seed: u64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig {
            topics: 100,
            alpha: None,
            beta: 0.01,
            iterations: 1000,
            burn_in: 800,
            inference_iterations: 50,
            log_likelihood_every: 50,
            seed: 0,
        }
    }
}

impl LdaConfig {
    pub fn with_topics(topics: usize) -> Self {
        LdaConfig {
            topics,
            ..Default::default()
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.topics as f64)
    }

    pub fn validate(&self) -> Result<(), LdaError> {
        let fail = |m: &str| Err(LdaError::Config(m.into()));
        if self.topics < 1 {
            return fail("topics must be >= 1");
        }
        if !(self.alpha() > 0.0) {
            return fail("alpha must be > 0");
        }
        if !(self.beta > 0.0) {
            return fail("beta must be > 0");
        }
        if self.iterations < 1 {
            return fail("iterations must be >= 1");
        }
        if self.burn_in >= self.iterations {
            return fail("burn_in must be < iterations");
        }
        if self.inference_iterations < 1 {
            return fail("inference_iterations must be >= 1");
        }
        if self.log_likelihood_every < 1 {
            return fail("log_likelihood_every must be >= 1");
        }
        Ok(())
    }
}

/// Trained topic model.
#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel {
    config: LdaConfig,
    vocabulary: Vocabulary,
    doc_ids: Vec<String>,
    /// K×V, row-major.
    topic_word: Vec<f64>,
    /// N×K, row-major.
    doc_topic: Vec<f64>,
    log_likelihood: Vec<(usize, f64)>,
}

/// Count state of one collapsed Gibbs chain.
struct Chain {
    topics: usize,
    vocab: usize,
    alpha: f64,
    beta: f64,
    docs: Vec<Vec<usize>>,
    assignments: Vec<Vec<usize>>,
    doc_topic: Vec<u32>,
    word_topic: Vec<u32>,
    topic_total: Vec<u32>,
}

impl Chain {
    fn new(docs: Vec<Vec<usize>>, topics: usize, vocab: usize, alpha: f64, beta: f64, rng: &mut crate::rng::Rng) -> Self {
        let mut chain = Chain {
            topics,
            vocab,
            alpha,
            beta,
            assignments: Vec::with_capacity(docs.len()),
            doc_topic: vec![0; docs.len() * topics],
            word_topic: vec![0; vocab * topics],
            topic_total: vec![0; topics],
            docs: Vec::new(),
        };
        for (d, doc) in docs.iter().enumerate() {
            let z: Vec<usize> = doc.iter().map(|_| rng.random_range(0..topics)).collect();
            for (&w, &k) in doc.iter().zip(&z) {
                chain.doc_topic[d * topics + k] += 1;
                chain.word_topic[w * topics + k] += 1;
                chain.topic_total[k] += 1;
            }
            chain.assignments.push(z);
        }
        chain.docs = docs;
        chain
    }

    fn sweep(&mut self, rng: &mut crate::rng::Rng, weights: &mut [f64]) {
        let k_n = self.topics;
        let v_beta = self.vocab as f64 * self.beta;
        for d in 0..self.docs.len() {
            for i in 0..self.docs[d].len() {
                let w = self.docs[d][i];
                let old = self.assignments[d][i];
                self.doc_topic[d * k_n + old] -= 1;
                self.word_topic[w * k_n + old] -= 1;
                self.topic_total[old] -= 1;

                let dt = &self.doc_topic[d * k_n..(d + 1) * k_n];
                let wt = &self.word_topic[w * k_n..(w + 1) * k_n];
                let mut total = 0.0;
                for k in 0..k_n {
                    total += (dt[k] as f64 + self.alpha) * (wt[k] as f64 + self.beta)
                        / (self.topic_total[k] as f64 + v_beta);
                    weights[k] = total;
                }
                let new = sample_cumulative(weights, total, rng);

                self.assignments[d][i] = new;
                self.doc_topic[d * k_n + new] += 1;
                self.word_topic[w * k_n + new] += 1;
                self.topic_total[new] += 1;
            }
        }
    }

    /// log p(w | z) with the multinomials integrated out.
    fn log_likelihood(&self) -> f64 {
        let v = self.vocab as f64;
        let mut ll = self.topics as f64 * (ln_gamma(v * self.beta) - v * ln_gamma(self.beta));
        for k in 0..self.topics {
            for w in 0..self.vocab {
                let c = self.word_topic[w * self.topics + k];
                if c > 0 {
                    ll += ln_gamma(c as f64 + self.beta) - ln_gamma(self.beta);
                }
            }
            ll -= ln_gamma(self.topic_total[k] as f64 + v * self.beta) - ln_gamma(v * self.beta);
        }
        ll
    }
}

/// Index of the first cumulative weight exceeding a uniform draw in [0, total).
fn sample_cumulative(cumulative: &[f64], total: f64, rng: &mut crate::rng::Rng) -> usize {
    let u = rng.random::<f64>() * total;
    cumulative
        .iter()
        .position(|&c| u < c)
        .unwrap_or(cumulative.len() - 1)
}

fn normalize_rows(data: &mut [f64], cols: usize) {
    for row in data.chunks_exact_mut(cols) {
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
    }
}

/// Fits LDA on the tokenized corpus.
///
/// Documents are swept in id order regardless of corpus order, so permuting
/// the corpus permutes the rows of the result and nothing else.
pub fn fit_lda(corpus: &Corpus, vocab: &Vocabulary, config: &LdaConfig) -> Result<LdaModel, LdaError> {
    config.validate()?;
    let encoded: Vec<Vec<usize>> = corpus.iter().map(|d| vocab.encode(&d.tokens)).collect();
    let empty: Vec<String> = corpus
        .iter()
        .zip(&encoded)
        .filter(|(_, e)| e.is_empty())
        .map(|(d, _)| d.id.clone())
        .collect();
    if !empty.is_empty() {
        return Err(LdaError::EmptyDocuments { ids: empty });
    }

    let n = corpus.len();
    let k_n = config.topics;
    let v_n = vocab.len();
    let alpha = config.alpha();
    let beta = config.beta;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| corpus.documents()[a].id.cmp(&corpus.documents()[b].id));
    let canonical: Vec<Vec<usize>> = order.iter().map(|&i| encoded[i].clone()).collect();

    let mut rng = crate::rng::seeded(config.seed);
    let mut chain = Chain::new(canonical, k_n, v_n, alpha, beta, &mut rng);
    let mut weights = vec![0.0; k_n];
    let mut trace = vec![(0, chain.log_likelihood())];

    let mut theta_sum = vec![0.0; n * k_n];
    let mut phi_sum = vec![0.0; k_n * v_n];
    let mut samples = 0usize;
    let v_beta = v_n as f64 * beta;
    let k_alpha = k_n as f64 * alpha;

    for it in 1..=config.iterations {
        chain.sweep(&mut rng, &mut weights);
        if it % config.log_likelihood_every == 0 {
            trace.push((it, chain.log_likelihood()));
        }
        if it > config.burn_in {
            samples += 1;
            for d in 0..n {
                let len = chain.docs[d].len() as f64;
                for k in 0..k_n {
                    theta_sum[d * k_n + k] += (chain.doc_topic[d * k_n + k] as f64 + alpha) / (len + k_alpha);
                }
            }
            for k in 0..k_n {
                let denom = chain.topic_total[k] as f64 + v_beta;
                for w in 0..v_n {
                    phi_sum[k * v_n + w] += (chain.word_topic[w * k_n + k] as f64 + beta) / denom;
                }
            }
        }
    }

    let scale = samples as f64;
    theta_sum.iter_mut().for_each(|v| *v /= scale);
    phi_sum.iter_mut().for_each(|v| *v /= scale);
    normalize_rows(&mut theta_sum, k_n);
    normalize_rows(&mut phi_sum, v_n);

    // back to corpus order
    let mut doc_topic = vec![0.0; n * k_n];
    for (canon, &orig) in order.iter().enumerate() {
        doc_topic[orig * k_n..(orig + 1) * k_n].copy_from_slice(&theta_sum[canon * k_n..(canon + 1) * k_n]);
    }

    Ok(LdaModel {
        config: config.clone(),
        vocabulary: vocab.clone(),
        doc_ids: corpus.iter().map(|d| d.id.clone()).collect(),
        topic_word: phi_sum,
        doc_topic,
        log_likelihood: trace,
    })
}

impl LdaModel {
    pub fn config(&self) -> &LdaConfig {
        &self.config
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn topics(&self) -> usize {
        self.config.topics
    }

    pub fn documents(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn topic_word_row(&self, topic: usize) -> &[f64] {
        let v = self.vocabulary.len();
        &self.topic_word[topic * v..(topic + 1) * v]
    }

    pub fn doc_topic_row(&self, doc: usize) -> &[f64] {
        let k = self.topics();
        &self.doc_topic[doc * k..(doc + 1) * k]
    }

    /// (sweep, log p(w|z)) pairs recorded during training.
    pub fn log_likelihood_trace(&self) -> &[(usize, f64)] {
        &self.log_likelihood
    }

    /// The N×K document–topic matrix.
    pub fn doc_embeddings(&self) -> EmbeddingMatrix {
        EmbeddingMatrix::from_flat(Backend::Lda, self.documents(), self.topics(), self.doc_topic.clone())
    }

    /// Topic proportions of an unseen document by fold-in Gibbs sampling
    /// with the topic–word distributions held fixed. The first half of the
    /// sweeps is discarded; the rest are averaged.
    pub fn infer_topics(&self, tokens: &[String], iterations: usize, seed: u64) -> Result<Vec<f64>, LdaError> {
        let words = self.vocabulary.encode(tokens);
        if words.is_empty() {
            return Err(LdaError::NoKnownTokens);
        }
        let iterations = iterations.max(1);
        let burn_in = iterations / 2;
        let k_n = self.topics();
        let v_n = self.vocabulary.len();
        let alpha = self.config.alpha();
        let mut rng = crate::rng::seeded(seed);

        let mut z: Vec<usize> = words.iter().map(|_| rng.random_range(0..k_n)).collect();
        let mut counts = vec![0u32; k_n];
        for &k in &z {
            counts[k] += 1;
        }
        let mut weights = vec![0.0; k_n];
        let mut theta = vec![0.0; k_n];
        let len_alpha = words.len() as f64 + k_n as f64 * alpha;
        for it in 0..iterations {
            for (i, &w) in words.iter().enumerate() {
                counts[z[i]] -= 1;
                let mut total = 0.0;
                for k in 0..k_n {
                    total += (counts[k] as f64 + alpha) * self.topic_word[k * v_n + w];
                    weights[k] = total;
                }
                let new = sample_cumulative(&weights, total, &mut rng);
                z[i] = new;
                counts[new] += 1;
            }
            if it >= burn_in {
                for k in 0..k_n {
                    theta[k] += (counts[k] as f64 + alpha) / len_alpha;
                }
            }
        }
        let s: f64 = theta.iter().sum();
        theta.iter_mut().for_each(|v| *v /= s);
        Ok(theta)
    }

    /// The `n` most probable tokens of `topic`, descending, ties by token.
    pub fn top_words(&self, topic: usize, n: usize) -> Result<Vec<(String, f64)>, LdaError> {
        if topic >= self.topics() {
            return Err(LdaError::TopicOutOfRange {
                topic,
                topics: self.topics(),
            });
        }
        let row = self.topic_word_row(topic);
        let mut ranked: Vec<(usize, f64)> = row.iter().copied().enumerate().collect();
        let tokens = self.vocabulary.tokens();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| tokens[a.0].cmp(&tokens[b.0])));
        Ok(ranked
            .into_iter()
            .take(n)
            .map(|(w, p)| (tokens[w].clone(), p))
            .collect())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LdaError> {
        self.to_container().save(path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LdaError> {
        Self::from_container(Container::load_kind(path, CONTAINER_KIND)?)
    }

    pub fn to_container(&self) -> Container {
        Container {
            kind: CONTAINER_KIND.into(),
            header: serde_json::json!({
                "config": self.config,
                "vocabulary_hash": self.vocabulary.hash(),
                "vocabulary": self.vocabulary,
                "doc_ids": self.doc_ids,
                "log_likelihood": self.log_likelihood,
            }),
            matrices: vec![
                Matrix::new(self.topics(), self.vocabulary.len(), self.topic_word.clone()),
                Matrix::new(self.documents(), self.topics(), self.doc_topic.clone()),
            ],
        }
    }

    pub fn from_container(c: Container) -> Result<Self, LdaError> {
        c.expect_kind(CONTAINER_KIND)?;
        let malformed = |m: String| LdaError::Container(ContainerError::Malformed(m));
        let field = |name: &str| c.header.get(name).cloned().ok_or_else(|| malformed(format!("missing {name}")));
        let config: LdaConfig = serde_json::from_value(field("config")?).map_err(|e| malformed(e.to_string()))?;
        let vocabulary: Vocabulary = serde_json::from_value(field("vocabulary")?).map_err(|e| malformed(e.to_string()))?;
        let hash: String = serde_json::from_value(field("vocabulary_hash")?).map_err(|e| malformed(e.to_string()))?;
        if hash != vocabulary.hash() {
            return Err(malformed("vocabulary hash mismatch".into()));
        }
        let doc_ids: Vec<String> = serde_json::from_value(field("doc_ids")?).map_err(|e| malformed(e.to_string()))?;
        let log_likelihood = serde_json::from_value(field("log_likelihood")?).map_err(|e| malformed(e.to_string()))?;
        let [topic_word, doc_topic]: [Matrix; 2] = c
            .matrices
            .try_into()
            .map_err(|_| malformed("expected two matrices".into()))?;
        if topic_word.rows != config.topics
            || topic_word.cols != vocabulary.len()
            || doc_topic.rows != doc_ids.len()
            || doc_topic.cols != config.topics
        {
            return Err(malformed("matrix shapes do not match header".into()));
        }
        Ok(LdaModel {
            config,
            vocabulary,
            doc_ids,
            topic_word: topic_word.data,
            doc_topic: doc_topic.data,
            log_likelihood,
        })
    }
}
