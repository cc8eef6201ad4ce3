use std::path::Path;

use super::{write_record, EmbeddingProvider, LayerwiseTokenEmbeddings, ProviderError};
use crate::corpus::Corpus;

/// Offline provider whose vectors are a fixed hash of
/// (token, layer, position).
///
/// Each value is a token-and-layer component in [-1, 1) plus a smaller
/// position-dependent component, rounded to `f32`. Identical inputs always
/// produce bit-identical tensors, on any machine.
#[derive(Debug, Clone, PartialEq)]
pub struct StubProvider {
    layers: usize,
    dim: usize,
    position_weight: f64,
}

impl Default for StubProvider {
    /// 12 layers of width 768, the shape of a base-size encoder.
    fn default() -> Self {
        StubProvider::new(12, 768)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform in [-1, 1) from the top 53 bits.
fn unit(state: &mut u64) -> f64 {
    (splitmix(state) >> 11) as f64 * (2.0 / (1u64 << 53) as f64) - 1.0
}

impl StubProvider {
    pub fn new(layers: usize, dim: usize) -> Self {
        StubProvider {
            layers,
            dim,
            position_weight: 0.1,
        }
    }

    pub fn with_position_weight(mut self, weight: f64) -> Self {
        self.position_weight = weight;
        self
    }

    /// Vector of `token` at `layer` and `position`.
    pub fn token_vector(&self, token: &str, layer: usize, position: usize) -> Vec<f32> {
        let token_hash = fnv1a(token.as_bytes());
        let mut base = token_hash ^ (layer as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        let mut pos = base ^ (position as u64 + 1).wrapping_mul(0xd1b5_4a32_d192_ed03);
        (0..self.dim)
            .map(|_| (unit(&mut base) + self.position_weight * unit(&mut pos)) as f32)
            .collect()
    }

    /// Writes one file-binding record per document into `dir`.
    pub fn export_dir(&self, corpus: &Corpus, dir: impl AsRef<Path>) -> std::io::Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        for doc in corpus {
            let tokens = if doc.tokens.len() > super::MAX_TOKENS {
                &doc.tokens[..super::MAX_TOKENS]
            } else {
                &doc.tokens[..]
            };
            let emb = self.embed(&doc.id, tokens).expect("stub provider is infallible");
            write_record(dir, &doc.id, &emb)?;
        }
        Ok(())
    }
}

impl EmbeddingProvider for StubProvider {
    fn layers(&self) -> usize {
        self.layers
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, _doc_id: &str, tokens: &[String]) -> Result<LayerwiseTokenEmbeddings, ProviderError> {
        let mut emb = LayerwiseTokenEmbeddings::zeros(self.layers, tokens.to_vec(), self.dim);
        for layer in 0..self.layers {
            for (pos, token) in tokens.iter().enumerate() {
                emb.vector_mut(layer, pos).copy_from_slice(&self.token_vector(token, layer, pos));
            }
        }
        Ok(emb)
    }
}
