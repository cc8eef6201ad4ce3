use serde::{Deserialize, Serialize};

use super::{CtxError, LayerwiseTokenEmbeddings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LayerStrategy {
    /// Element-wise sum of the last `L` layers.
    #[default]
    SumLastL,
    /// Concatenation of the last four layers (4·dim wide).
    ConcatLast4,
    /// The final layer only.
    LastOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TokenStrategy {
    #[default]
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoolingConfig {
    pub layer_strategy: LayerStrategy,
    /// `L` for [`LayerStrategy::SumLastL`].
    pub last_layers: usize,
    pub token_strategy: TokenStrategy,
}

impl Default for PoolingConfig {
    fn default() -> Self {
        PoolingConfig {
            layer_strategy: LayerStrategy::SumLastL,
            last_layers: 12,
            token_strategy: TokenStrategy::Mean,
        }
    }
}

/// Pools all tokens of `emb` into one document vector.
pub fn pool(emb: &LayerwiseTokenEmbeddings, config: &PoolingConfig) -> Result<Vec<f64>, CtxError> {
    pool_masked(emb, config, |_| true)
}

/// Pools only the tokens for which `keep(token_index)` holds.
pub fn pool_masked(
    emb: &LayerwiseTokenEmbeddings,
    config: &PoolingConfig,
    keep: impl Fn(usize) -> bool,
) -> Result<Vec<f64>, CtxError> {
    token_vectors(emb, config)?.mean(keep)
}

/// Per-token vectors after the layer step of pooling, before the token step.
///
/// `pool_masked(emb, cfg, keep)` equals `token_vectors(emb, cfg)?.mean(keep)`
/// bit for bit, so callers that pool many token subsets of one document can
/// do the layer step once.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenVectors {
    width: usize,
    /// `tokens × width`, token-major.
    values: Vec<f64>,
    token_strategy: TokenStrategy,
}

pub fn token_vectors(emb: &LayerwiseTokenEmbeddings, config: &PoolingConfig) -> Result<TokenVectors, CtxError> {
    let layers: Vec<usize> = match config.layer_strategy {
        LayerStrategy::SumLastL => {
            if config.last_layers == 0 {
                return Err(CtxError::Config("last_layers must be >= 1".into()));
            }
            if config.last_layers > emb.layers {
                return Err(CtxError::NotEnoughLayers {
                    needed: config.last_layers,
                    available: emb.layers,
                });
            }
            (emb.layers - config.last_layers..emb.layers).collect()
        }
        LayerStrategy::ConcatLast4 => {
            if emb.layers < 4 {
                return Err(CtxError::NotEnoughLayers {
                    needed: 4,
                    available: emb.layers,
                });
            }
            (emb.layers - 4..emb.layers).collect()
        }
        LayerStrategy::LastOnly => {
            if emb.layers == 0 {
                return Err(CtxError::NotEnoughLayers { needed: 1, available: 0 });
            }
            vec![emb.layers - 1]
        }
    };
    let dim = emb.dim;
    let width = match config.layer_strategy {
        LayerStrategy::ConcatLast4 => 4 * dim,
        _ => dim,
    };
    let mut values = vec![0.0; emb.tokens * width];
    for t in 0..emb.tokens {
        let row = &mut values[t * width..(t + 1) * width];
        for (slot, &layer) in layers.iter().enumerate() {
            let offset = match config.layer_strategy {
                LayerStrategy::ConcatLast4 => slot * dim,
                _ => 0,
            };
            for (o, &v) in row[offset..offset + dim].iter_mut().zip(emb.vector(layer, t)) {
                *o += v as f64;
            }
        }
    }
    Ok(TokenVectors {
        width,
        values,
        token_strategy: config.token_strategy,
    })
}

impl TokenVectors {
    pub fn tokens(&self) -> usize {
        self.values.len() / self.width.max(1)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Token step of pooling over the tokens where `keep` holds.
    pub fn mean(&self, keep: impl Fn(usize) -> bool) -> Result<Vec<f64>, CtxError> {
        let mut out = vec![0.0; self.width];
        let mut count = 0usize;
        for t in (0..self.tokens()).filter(|&t| keep(t)) {
            count += 1;
            for (o, &v) in out.iter_mut().zip(&self.values[t * self.width..(t + 1) * self.width]) {
                *o += v;
            }
        }
        if count == 0 {
            return Err(CtxError::NoTokens);
        }
        match self.token_strategy {
            TokenStrategy::Mean => out.iter_mut().for_each(|o| *o /= count as f64),
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn tensor(layers: usize, rows: Vec<Vec<f32>>) -> LayerwiseTokenEmbeddings {
        let dim = rows[0].len();
        let tokens = rows.len() / layers;
        LayerwiseTokenEmbeddings {
            layers,
            tokens,
            dim,
            values: rows.into_iter().flatten().collect(),
            token_strings: (0..tokens).map(|i| format!("t{i}")).collect(),
        }
    }

    fn sum_last(l: usize) -> PoolingConfig {
        PoolingConfig {
            last_layers: l,
            ..Default::default()
        }
    }

    #[test]
    fn hand_cases() {
        let one = tensor(1, vec![vec![1.0, 2.0, 3.0]]);
        assert_eq!(pool(&one, &sum_last(1)).unwrap(), [1.0, 2.0, 3.0]);
        let two = tensor(2, vec![vec![1.0, 1.0], vec![2.0, 3.0]]);
        assert_eq!(pool(&two, &sum_last(2)).unwrap(), [3.0, 4.0]);
        assert_eq!(
            pool(&two, &PoolingConfig { layer_strategy: LayerStrategy::LastOnly, ..Default::default() }).unwrap(),
            [2.0, 3.0]
        );
    }

    #[test]
    fn concat_last_four() {
        let rows: Vec<Vec<f32>> = (0..5).map(|l| vec![l as f32, 10.0 * l as f32]).collect();
        let t = tensor(5, rows);
        let cfg = PoolingConfig { layer_strategy: LayerStrategy::ConcatLast4, ..Default::default() };
        assert_eq!(pool(&t, &cfg).unwrap(), [1.0, 10.0, 2.0, 20.0, 3.0, 30.0, 4.0, 40.0]);
    }

    #[test]
    fn errors() {
        let empty = LayerwiseTokenEmbeddings::zeros(2, vec![], 3);
        assert!(matches!(pool(&empty, &sum_last(1)), Err(CtxError::NoTokens)));
        let t = tensor(2, vec![vec![1.0], vec![2.0]]);
        assert!(matches!(pool(&t, &sum_last(3)), Err(CtxError::NotEnoughLayers { .. })));
        assert!(matches!(pool_masked(&t, &sum_last(1), |_| false), Err(CtxError::NoTokens)));
    }

    /// Triple loop straight from the definition.
    fn brute_force(emb: &LayerwiseTokenEmbeddings, last: usize) -> Vec<f64> {
        let mut out = vec![0.0; emb.dim];
        for d in 0..emb.dim {
            let mut total = 0.0;
            for t in 0..emb.tokens {
                let mut token_sum = 0.0;
                for l in emb.layers - last..emb.layers {
                    token_sum += emb.values[l * emb.tokens * emb.dim + t * emb.dim + d] as f64;
                }
                total += token_sum;
            }
            out[d] = total / emb.tokens as f64;
        }
        out
    }

    fn random(layers: usize, tokens: usize, dim: usize, seed: u64) -> LayerwiseTokenEmbeddings {
        let mut rng = crate::rng::seeded(seed);
        LayerwiseTokenEmbeddings {
            layers,
            tokens,
            dim,
            values: (0..layers * tokens * dim).map(|_| rng.random_range(-1.0f32..1.0)).collect(),
            token_strings: (0..tokens).map(|i| format!("t{i}")).collect(),
        }
    }

    #[test]
    fn random_12x5x8_matches_brute_force() {
        let emb = random(12, 5, 8, 42);
        let got = pool(&emb, &sum_last(12)).unwrap();
        let want = brute_force(&emb, 12);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-12);
        }
    }

    proptest! {
        #[test]
        fn equals_triple_loop(layers in 1usize..6, tokens in 1usize..7, dim in 1usize..6, seed in any::<u64>(), pick in 0usize..6) {
            let emb = random(layers, tokens, dim, seed);
            let last = 1 + pick % layers;
            let got = pool(&emb, &sum_last(last)).unwrap();
            for (g, w) in got.iter().zip(brute_force(&emb, last)) {
                prop_assert!((g - w).abs() <= 1e-12);
            }
        }

        #[test]
        fn mean_is_token_permutation_invariant(tokens in 1usize..8, seed in any::<u64>()) {
            let emb = random(3, tokens, 4, seed);
            let mut reversed = emb.clone();
            for l in 0..3 {
                for t in 0..tokens {
                    reversed.vector_mut(l, t).copy_from_slice(emb.vector(l, tokens - 1 - t));
                }
            }
            let a = pool(&emb, &sum_last(2)).unwrap();
            let b = pool(&reversed, &sum_last(2)).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }
    }
}
