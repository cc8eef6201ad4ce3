//! Document embeddings pooled from layer-wise contextual token vectors.
//!
//! The transformer itself lives behind [`EmbeddingProvider`]; this module
//! only fetches its per-layer token vectors and pools them: each token's
//! vector is the sum of the last `L` layers, and the document vector is the
//! mean over tokens.

mod file;
mod pool;
mod stub;

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::Corpus;
use crate::embedding::{Backend, EmbeddingMatrix};

pub use file::{read_record, write_record, FileProvider, RECORD_EXTENSION, RECORD_VERSION};
pub use pool::{pool, pool_masked, token_vectors, LayerStrategy, PoolingConfig, TokenStrategy, TokenVectors};
pub use stub::StubProvider;

/// Longest token sequence a provider is asked to embed.
pub const MAX_TOKENS: usize = 512;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProviderError {
    #[error("provider unreachable: {0}")]
    Transport(String),
    #[error("provider protocol violation: {0}")]
    Protocol(String),
    #[error("provider has no embeddings for document {0:?}")]
    NotFound(String),
    #[error("provider error {code}: {message}")]
    Remote { code: String, message: String },
}

#[derive(Debug, Error)]
pub enum CtxError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("cannot pool an embedding with zero tokens")]
    NoTokens,
    #[error("pooling needs {needed} layers, provider returned {available}")]
    NotEnoughLayers { needed: usize, available: usize },
    #[error("invalid pooling configuration: {0}")]
    Config(String),
    #[error("{} document(s) failed: {}", .failures.len(), .failures.iter().map(|(id, e)| format!("{id}: {e}")).collect::<Vec<_>>().join("; "))]
    Documents { failures: Vec<(String, String)> },
}

/// Token vectors of every layer for one document.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerwiseTokenEmbeddings {
    pub layers: usize,
    pub tokens: usize,
    pub dim: usize,
    /// `layers × tokens × dim`, layer-major.
    pub values: Vec<f32>,
    pub token_strings: Vec<String>,
}

impl LayerwiseTokenEmbeddings {
    pub fn zeros(layers: usize, token_strings: Vec<String>, dim: usize) -> Self {
        LayerwiseTokenEmbeddings {
            layers,
            tokens: token_strings.len(),
            dim,
            values: vec![0.0; layers * token_strings.len() * dim],
            token_strings,
        }
    }

    pub fn vector(&self, layer: usize, token: usize) -> &[f32] {
        let start = (layer * self.tokens + token) * self.dim;
        &self.values[start..start + self.dim]
    }

    pub fn vector_mut(&mut self, layer: usize, token: usize) -> &mut [f32] {
        let start = (layer * self.tokens + token) * self.dim;
        &mut self.values[start..start + self.dim]
    }

    /// Checks shape consistency and finiteness.
    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.token_strings.len() != self.tokens {
            return Err(ProviderError::Protocol(format!(
                "{} token strings for {} tokens",
                self.token_strings.len(),
                self.tokens
            )));
        }
        if self.values.len() != self.layers * self.tokens * self.dim {
            return Err(ProviderError::Protocol(format!(
                "{} values for shape {}×{}×{}",
                self.values.len(),
                self.layers,
                self.tokens,
                self.dim
            )));
        }
        if !self.values.iter().all(|v| v.is_finite()) {
            return Err(ProviderError::Protocol("non-finite embedding value".into()));
        }
        Ok(())
    }

    /// Keeps the first `n` tokens.
    pub fn truncate(&mut self, n: usize) {
        if n >= self.tokens {
            return;
        }
        let mut values = Vec::with_capacity(self.layers * n * self.dim);
        for layer in 0..self.layers {
            let start = layer * self.tokens * self.dim;
            values.extend_from_slice(&self.values[start..start + n * self.dim]);
        }
        self.values = values;
        self.tokens = n;
        self.token_strings.truncate(n);
    }
}

/// Source of layer-wise contextual token vectors.
pub trait EmbeddingProvider: Send + Sync {
    /// Layer count the provider promises to return.
    fn layers(&self) -> usize;
    /// Vector width the provider promises to return.
    fn dim(&self) -> usize;
    /// Raw provider call; use [`fetch_token_embeddings`] for the checked form.
    fn embed(&self, doc_id: &str, tokens: &[String]) -> Result<LayerwiseTokenEmbeddings, ProviderError>;
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for &P {
    fn layers(&self) -> usize {
        (**self).layers()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn embed(&self, doc_id: &str, tokens: &[String]) -> Result<LayerwiseTokenEmbeddings, ProviderError> {
        (**self).embed(doc_id, tokens)
    }
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for Box<P> {
    fn layers(&self) -> usize {
        (**self).layers()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn embed(&self, doc_id: &str, tokens: &[String]) -> Result<LayerwiseTokenEmbeddings, ProviderError> {
        (**self).embed(doc_id, tokens)
    }
}

/// Fetches and validates one document's layer-wise vectors.
///
/// Inputs longer than [`MAX_TOKENS`] are truncated with a warning, as are
/// provider responses that come back longer (sub-word splitting). A response
/// whose layer count or width differs from what the provider declared is a
/// protocol error.
pub fn fetch_token_embeddings<P: EmbeddingProvider + ?Sized>(
    provider: &P,
    doc_id: &str,
    tokens: &[String],
) -> Result<LayerwiseTokenEmbeddings, ProviderError> {
    let tokens = if tokens.len() > MAX_TOKENS {
        log::warn!(
            "document {doc_id}: {} tokens, truncating to {MAX_TOKENS}",
            tokens.len()
        );
        &tokens[..MAX_TOKENS]
    } else {
        tokens
    };
    let mut emb = provider.embed(doc_id, tokens)?;
    if emb.dim != provider.dim() {
        return Err(ProviderError::Protocol(format!(
            "provider declared dim {} but returned {}",
            provider.dim(),
            emb.dim
        )));
    }
    if emb.layers != provider.layers() {
        return Err(ProviderError::Protocol(format!(
            "provider declared {} layers but returned {}",
            provider.layers(),
            emb.layers
        )));
    }
    emb.validate()?;
    if emb.tokens > MAX_TOKENS {
        log::warn!(
            "document {doc_id}: provider returned {} tokens, truncating to {MAX_TOKENS}",
            emb.tokens
        );
        emb.truncate(MAX_TOKENS);
    }
    Ok(emb)
}

/// Output width of [`pool`] for a provider of width `dim`.
pub fn pooled_dim(dim: usize, config: &PoolingConfig) -> usize {
    match config.layer_strategy {
        LayerStrategy::ConcatLast4 => 4 * dim,
        _ => dim,
    }
}

/// N×D matrix of pooled document vectors in corpus order.
///
/// Documents are fetched concurrently, at most `in_flight` at a time. Every
/// failing document is reported; no partial matrix is returned.
pub fn ctx_doc_matrix<P: EmbeddingProvider + ?Sized>(
    provider: &P,
    corpus: &Corpus,
    config: &PoolingConfig,
    in_flight: usize,
) -> Result<EmbeddingMatrix, CtxError> {
    let fetch_one = |doc: &crate::corpus::Document| -> Result<Vec<f64>, String> {
        let emb = fetch_token_embeddings(provider, &doc.id, &doc.tokens).map_err(|e| e.to_string())?;
        pool(&emb, config).map_err(|e| e.to_string())
    };
    let pool_threads = rayon::ThreadPoolBuilder::new()
        .num_threads(in_flight.max(1))
        .build()
        .map_err(|e| CtxError::Config(e.to_string()))?;
    let results: Vec<Result<Vec<f64>, String>> =
        pool_threads.install(|| corpus.documents().par_iter().map(fetch_one).collect());

    let mut rows = Vec::with_capacity(corpus.len());
    let mut failures = Vec::new();
    for (doc, r) in corpus.iter().zip(results) {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => failures.push((doc.id.clone(), e)),
        }
    }
    if !failures.is_empty() {
        return Err(CtxError::Documents { failures });
    }
    let cols = pooled_dim(provider.dim(), config);
    Ok(EmbeddingMatrix::from_flat(
        Backend::Contextual,
        rows.len(),
        cols,
        rows.into_iter().flatten().collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, TopicLabel};

    struct Lying;

    impl EmbeddingProvider for Lying {
        fn layers(&self) -> usize {
            12
        }
        fn dim(&self) -> usize {
            768
        }
        fn embed(&self, _: &str, tokens: &[String]) -> Result<LayerwiseTokenEmbeddings, ProviderError> {
            Ok(LayerwiseTokenEmbeddings::zeros(12, tokens.to_vec(), 100))
        }
    }

    struct Flaky;

    impl EmbeddingProvider for Flaky {
        fn layers(&self) -> usize {
            1
        }
        fn dim(&self) -> usize {
            2
        }
        fn embed(&self, id: &str, tokens: &[String]) -> Result<LayerwiseTokenEmbeddings, ProviderError> {
            if id.starts_with("bad") {
                Err(ProviderError::Transport("connection refused".into()))
            } else {
                Ok(LayerwiseTokenEmbeddings::zeros(1, tokens.to_vec(), 2))
            }
        }
    }

    fn words(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("w{i}")).collect()
    }

    #[test]
    fn declared_dim_mismatch_is_protocol_error() {
        let err = fetch_token_embeddings(&Lying, "d", &words(3)).unwrap_err();
        assert!(matches!(err, ProviderError::Protocol(_)), "{err}");
    }

    #[test]
    fn long_documents_are_truncated() {
        let stub = StubProvider::new(2, 4);
        let emb = fetch_token_embeddings(&stub, "d", &words(600)).unwrap();
        assert_eq!(emb.tokens, MAX_TOKENS);
        assert_eq!(emb.token_strings.len(), MAX_TOKENS);
        assert_eq!(emb.values.len(), 2 * MAX_TOKENS * 4);
    }

    #[test]
    fn truncate_keeps_layer_layout() {
        let stub = StubProvider::new(3, 2);
        let full = stub.embed("d", &words(5)).unwrap();
        let mut cut = full.clone();
        cut.truncate(2);
        for layer in 0..3 {
            for t in 0..2 {
                assert_eq!(cut.vector(layer, t), full.vector(layer, t));
            }
        }
    }

    #[test]
    fn matrix_shape_order_and_failures() {
        let stub = StubProvider::default();
        let docs: Vec<Document> = (0..5)
            .map(|i| Document::labeled(format!("d{i}"), TopicLabel::Modeling, &["bond", "ring", "energy"][..=(i % 3)]))
            .collect();
        let corpus = Corpus::new(docs).unwrap();
        let cfg = PoolingConfig::default();
        let m = ctx_doc_matrix(&stub, &corpus, &cfg, 3).unwrap();
        assert_eq!(m.shape(), (5, 768));
        assert_eq!(m.backend(), Backend::Contextual);
        for (i, doc) in corpus.iter().enumerate() {
            let emb = fetch_token_embeddings(&stub, &doc.id, &doc.tokens).unwrap();
            assert_eq!(m.row(i), pool(&emb, &cfg).unwrap().as_slice());
        }
        assert_eq!(m, ctx_doc_matrix(&stub, &corpus, &cfg, 1).unwrap());

        let corpus = Corpus::new(vec![
            Document::labeled("ok", TopicLabel::Modeling, &["a"]),
            Document::labeled("bad1", TopicLabel::Modeling, &["a"]),
            Document::labeled("bad2", TopicLabel::Modeling, &["a"]),
        ])
        .unwrap();
        let cfg = PoolingConfig {
            last_layers: 1,
            ..Default::default()
        };
        match ctx_doc_matrix(&Flaky, &corpus, &cfg, 2) {
            Err(CtxError::Documents { failures }) => {
                let ids: Vec<_> = failures.iter().map(|f| f.0.as_str()).collect();
                assert_eq!(ids, ["bad1", "bad2"]);
            }
            other => panic!("{other:?}"),
        }
    }
}
