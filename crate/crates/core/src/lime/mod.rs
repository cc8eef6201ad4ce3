//! LIME for text: perturb a document's distinct tokens, query the black-box
//! pipeline on each perturbed document, and fit a locally weighted linear
//! surrogate per class.
//!
//! ```
//! use topicbench::lime::{explain_tokens, LimeConfig, PipelineError};
//!
//! let tokens: Vec<String> = ["bond", "ring", "opene"].iter().map(|s| s.to_string()).collect();
//! // class 0 gains 0.1 whenever "bond" is present
//! let pipeline = |t: &[String]| -> Result<[f64; 4], PipelineError> {
//!     let b = if t.iter().any(|x| x == "bond") { 0.1 } else { 0.0 };
//!     Ok([0.25 + b, 0.25 - b, 0.25, 0.25])
//! };
//! let config = LimeConfig { n_samples: 500, surrogate_l2: 1e-6, ..LimeConfig::default() };
//! let e = explain_tokens(&pipeline, "doc-1", &tokens, &config).unwrap();
//! assert_eq!(e.contributions[0].weights[0].token, "bond");
//! assert!((e.contributions[0].weights[0].weight - 0.1).abs() < 1e-6);
//! ```

mod surrogate;

use rand::seq::index::sample;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Document, TopicLabel};

pub use surrogate::{fit_surrogate, Surrogate};

#[derive(Debug, Error)]
pub enum LimeError {
    #[error("invalid LIME config: {0}")]
    Config(String),
    #[error("document {0} has no tokens to explain")]
    NoTokens(String),
    #[error("{samples} samples cannot fit a surrogate that needs {needed}")]
    TooFewSamples { samples: usize, needed: usize },
    #[error("surrogate normal equations are singular")]
    Singular,
    #[error("pipeline failed on mask {mask}: {source}")]
    Pipeline {
        mask: String,
        #[source]
        source: PipelineError,
    },
}

#[derive(Debug, Clone, Error)]
#[error("{0}")]
pub struct PipelineError(pub String);

/// A black box from a token sequence to class probabilities.
pub trait Pipeline: Sync {
    fn predict(&self, tokens: &[String]) -> Result<[f64; 4], PipelineError>;

    /// Probabilities for the document with the positions where `keep` is
    /// false removed. Override when the pipeline can reuse per-position work.
    fn predict_masked(&self, tokens: &[String], keep: &[bool]) -> Result<[f64; 4], PipelineError> {
        let kept: Vec<String> = tokens.iter().zip(keep).filter(|(_, &k)| k).map(|(t, _)| t.clone()).collect();
        self.predict(&kept)
    }
}

impl<F> Pipeline for F
where
    F: Fn(&[String]) -> Result<[f64; 4], PipelineError> + Sync,
{
    fn predict(&self, tokens: &[String]) -> Result<[f64; 4], PipelineError> {
        self(tokens)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LimeConfig {
    pub n_samples: usize,
    /// Defaults to 0.75·√d for d distinct tokens.
    pub kernel_width: Option<f64>,
    pub surrogate_l2: f64,
    pub top_k: usize,
    pub seed: u64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        LimeConfig {
            n_samples: 2000,
            kernel_width: None,
            surrogate_l2: 1.0,
            top_k: 6,
            seed: 0,
        }
    }
}

impl LimeConfig {
    pub fn validate(&self) -> Result<(), LimeError> {
        if self.n_samples < 10 {
            return Err(LimeError::Config("n_samples must be >= 10".into()));
        }
        if self.top_k < 1 {
            return Err(LimeError::Config("top_k must be >= 1".into()));
        }
        if let Some(w) = self.kernel_width {
            if !(w > 0.0 && w.is_finite()) {
                return Err(LimeError::Config("kernel_width must be > 0".into()));
            }
        }
        if !(self.surrogate_l2 >= 0.0) {
            return Err(LimeError::Config("surrogate_l2 must be >= 0".into()));
        }
        Ok(())
    }

    pub fn width_for(&self, distinct_tokens: usize) -> f64 {
        self.kernel_width.unwrap_or(0.75 * (distinct_tokens as f64).sqrt())
    }

    pub fn fingerprint(&self) -> String {
        crate::fingerprint::of_json(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenWeight {
    pub token: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassContributions {
    pub class: TopicLabel,
    pub intercept: f64,
    /// At most `top_k` entries, by |weight| descending.
    pub weights: Vec<TokenWeight>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub document_id: String,
    /// Pipeline output on the unmodified document, in label order.
    pub class_probabilities: [f64; 4],
    pub predicted: TopicLabel,
    /// One entry per class, in label order.
    pub contributions: Vec<ClassContributions>,
    pub config_fingerprint: String,
}

impl Explanation {
    pub fn probability(&self, label: TopicLabel) -> f64 {
        self.class_probabilities[label.index()]
    }

    pub fn contributions_for(&self, label: TopicLabel) -> &[TokenWeight] {
        &self.contributions[label.index()].weights
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("explanation serializes")
    }
}

/// Binary masks over `d` features. The first is all ones; each later mask
/// switches off a uniformly drawn number of features in `1..=d`, chosen
/// uniformly among subsets of that size.
pub fn perturb(d: usize, n_samples: usize, seed: u64) -> Vec<Vec<bool>> {
    let mut rng = crate::rng::seeded(seed);
    let mut masks = Vec::with_capacity(n_samples);
    if n_samples == 0 || d == 0 {
        return masks;
    }
    masks.push(vec![true; d]);
    for _ in 1..n_samples {
        let off = rng.random_range(1..=d);
        let mut mask = vec![true; d];
        for j in sample(&mut rng, d, off) {
            mask[j] = false;
        }
        masks.push(mask);
    }
    masks
}

/// exp(−D²/width²), D the cosine distance from `mask` to the all-ones vector.
pub fn kernel_weight(mask: &[bool], width: f64) -> f64 {
    let on = mask.iter().filter(|&&m| m).count();
    let distance = if on == 0 {
        1.0
    } else {
        1.0 - (on as f64 / mask.len() as f64).sqrt()
    };
    (-(distance * distance) / (width * width)).exp()
}

/// Distinct tokens in order of first appearance.
pub fn distinct_tokens(tokens: &[String]) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    tokens.iter().filter(|t| seen.insert(t.as_str())).cloned().collect()
}

pub fn explain<P: Pipeline + ?Sized>(pipeline: &P, document: &Document, config: &LimeConfig) -> Result<Explanation, LimeError> {
    explain_tokens(pipeline, &document.id, &document.tokens, config)
}

pub fn explain_tokens<P: Pipeline + ?Sized>(
    pipeline: &P,
    document_id: &str,
    tokens: &[String],
    config: &LimeConfig,
) -> Result<Explanation, LimeError> {
    config.validate()?;
    let features = distinct_tokens(tokens);
    let d = features.len();
    if d == 0 {
        return Err(LimeError::NoTokens(document_id.to_string()));
    }
    let feature_of: Vec<usize> = {
        let index: std::collections::HashMap<&str, usize> = features.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
        tokens.iter().map(|t| index[t.as_str()]).collect()
    };
    let masks = perturb(d, config.n_samples, config.seed);
    let probs: Vec<[f64; 4]> = masks
        .par_iter()
        .map(|mask| {
            let keep: Vec<bool> = feature_of.iter().map(|&f| mask[f]).collect();
            pipeline.predict_masked(tokens, &keep).map_err(|source| LimeError::Pipeline {
                mask: mask.iter().map(|&m| if m { '1' } else { '0' }).collect(),
                source,
            })
        })
        .collect::<Result<_, _>>()?;
    let width = config.width_for(d);
    let weights: Vec<f64> = masks.iter().map(|m| kernel_weight(m, width)).collect();
    let surrogate = fit_surrogate(&masks, &probs, &weights, config.surrogate_l2)?;

    let class_probabilities = probs[0];
    let contributions = TopicLabel::ALL
        .iter()
        .map(|&class| {
            let c = class.index();
            let mut ranked: Vec<TokenWeight> = features
                .iter()
                .zip(&surrogate.coef[c])
                .map(|(t, &w)| TokenWeight { token: t.clone(), weight: w })
                .collect();
            ranked.sort_by(|a, b| b.weight.abs().total_cmp(&a.weight.abs()).then_with(|| a.token.cmp(&b.token)));
            ranked.truncate(config.top_k);
            ClassContributions {
                class,
                intercept: surrogate.intercept[c],
                weights: ranked,
            }
        })
        .collect();
    Ok(Explanation {
        document_id: document_id.to_string(),
        class_probabilities,
        predicted: TopicLabel::ALL[crate::forest::argmax(&class_probabilities)],
        contributions,
        config_fingerprint: config.fingerprint(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn first_mask_is_document() {
        for seed in 0..5 {
            let m = perturb(7, 20, seed);
            assert_eq!(m.len(), 20);
            assert!(m[0].iter().all(|&b| b));
            assert!(m[1..].iter().all(|mask| mask.iter().any(|&b| !b)));
        }
    }

    #[test]
    fn single_token_space() {
        assert_eq!(perturb(1, 3, 9), vec![vec![true], vec![false], vec![false]]);
    }

    #[test]
    fn deactivation_counts_uniform() {
        let m = perturb(3, 10_001, 5);
        let mut counts = [0usize; 4];
        for mask in &m[1..] {
            counts[mask.iter().filter(|&&b| !b).count()] += 1;
        }
        assert_eq!(counts[0], 0);
        for &c in &counts[1..] {
            assert!((c as f64 / 10_000.0 - 1.0 / 3.0).abs() < 0.02, "{counts:?}");
        }
    }

    #[test]
    fn kernel_hand_values() {
        assert_eq!(kernel_weight(&[true, true, true], 0.5), 1.0);
        let d = 1.0 - 1.0 / 2f64.sqrt();
        let w = 0.8;
        assert!((kernel_weight(&[true, false], w) - (-(d * d) / (w * w)).exp()).abs() < 1e-15);
        assert!((kernel_weight(&[false, false], 1.0) - (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn kernel_decreases_with_zeroed_bits() {
        for d in 1..=10 {
            for bits in 0u32..(1 << d) {
                let mask: Vec<bool> = (0..d).map(|j| bits & (1 << j) != 0).collect();
                for j in (0..d).filter(|&j| mask[j]) {
                    let mut fewer = mask.clone();
                    fewer[j] = false;
                    let width = 0.75 * (d as f64).sqrt();
                    assert!(kernel_weight(&fewer, width) < kernel_weight(&mask, width));
                }
            }
        }
    }

    #[test]
    fn constant_pipeline_has_zero_contributions() {
        let pipeline = |_: &[String]| Ok([0.1, 0.2, 0.3, 0.4]);
        let e = explain_tokens(&pipeline, "d", &toks(&["a", "b", "c", "a"]), &LimeConfig { n_samples: 100, ..Default::default() }).unwrap();
        assert_eq!(e.class_probabilities, [0.1, 0.2, 0.3, 0.4]);
        assert_eq!(e.predicted, TopicLabel::Synthesis);
        for c in &e.contributions {
            assert_eq!(c.weights.len(), 3);
            assert!(c.weights.iter().all(|w| w.weight.abs() < 1e-12));
        }
    }

    #[test]
    fn probabilities_come_from_unmodified_document() {
        let pipeline = |t: &[String]| {
            let n = t.len() as f64;
            Ok([n / 10.0, 1.0 - n / 10.0, 0.0, 0.0])
        };
        let e = explain_tokens(&pipeline, "d", &toks(&["x", "y", "x", "z"]), &LimeConfig { n_samples: 50, ..Default::default() }).unwrap();
        assert_eq!(e.class_probabilities, [0.4, 0.6, 0.0, 0.0]);
    }

    #[test]
    fn pipeline_failure_names_mask() {
        let pipeline = |t: &[String]| if t.len() < 2 { Err(PipelineError("too short".into())) } else { Ok([0.25; 4]) };
        match explain_tokens(&pipeline, "d", &toks(&["a", "b"]), &LimeConfig { n_samples: 20, ..Default::default() }) {
            Err(LimeError::Pipeline { mask, .. }) => assert!(mask.contains('0')),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn deterministic_and_sorted() {
        let coef = [0.05, -0.08, 0.02, 0.08, -0.01];
        let words = toks(&["p", "q", "r", "s", "t"]);
        let pipeline = |t: &[String]| {
            let s: f64 = words.iter().zip(coef).filter(|(w, _)| t.contains(w)).map(|(_, c)| c).sum();
            Ok([0.4 + s, 0.4 - s, 0.1, 0.1])
        };
        let cfg = LimeConfig { n_samples: 300, top_k: 4, seed: 3, ..Default::default() };
        let a = explain_tokens(&pipeline, "d", &words, &cfg).unwrap();
        assert_eq!(a, explain_tokens(&pipeline, "d", &words, &cfg).unwrap());
        let w = &a.contributions[0].weights;
        assert_eq!(w.len(), 4);
        assert!(w.windows(2).all(|p| p[0].weight.abs() >= p[1].weight.abs()));
        // q and s have equal |coef|; ties in |weight| would break by token
        assert!(w[..2].iter().all(|x| x.token == "q" || x.token == "s"));
    }

    #[test]
    fn figure_layout_round_trips() {
        let e = Explanation {
            document_id: "em0042".into(),
            class_probabilities: [0.21, 0.42, 0.17, 0.20],
            predicted: TopicLabel::Modeling,
            contributions: TopicLabel::ALL
                .iter()
                .map(|&class| ClassContributions {
                    class,
                    intercept: 0.25,
                    weights: if class == TopicLabel::Modeling {
                        vec![TokenWeight { token: "bond".into(), weight: 0.03 }, TokenWeight { token: "ring_opene".into(), weight: -0.01 }]
                    } else {
                        vec![]
                    },
                })
                .collect(),
            config_fingerprint: LimeConfig::default().fingerprint(),
        };
        let line = e.to_json_line();
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v["class_probabilities"][1], 0.42);
        assert_eq!(v["contributions"][1]["class"], "modeling");
        assert_eq!(v["contributions"][1]["weights"][0]["token"], "bond");
        assert_eq!(v["contributions"][1]["weights"][0]["weight"], 0.03);
        let back: Explanation = serde_json::from_str(&line).unwrap();
        assert_eq!(back, e);
        assert_eq!(back.probability(TopicLabel::Modeling), 0.42);
    }

    #[test]
    fn config_validation() {
        assert!(LimeConfig { n_samples: 9, ..Default::default() }.validate().is_err());
        assert!(LimeConfig { top_k: 0, ..Default::default() }.validate().is_err());
        assert!(LimeConfig { kernel_width: Some(0.0), ..Default::default() }.validate().is_err());
        assert_eq!(LimeConfig::default().width_for(16), 3.0);
    }
}
