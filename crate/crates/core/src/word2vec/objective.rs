//! Skip-gram negative-sampling objective for one (center, context,
//! negatives) triple:
//!
//! ```text
//! L = -ln σ(u_o · v_c) - Σ_i ln σ(-u_i · v_c)
//! ```
//!
//! `v_c` is the center word's input vector, `u_o` the context word's output
//! vector and `u_i` the output vectors of the sampled noise words.

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// ln σ(x) without overflow for large |x|.
fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// dL/d(u·v) for a pair with label 1 (observed) or 0 (noise).
#[inline]
pub fn pair_coefficient(score: f64, label: f64) -> f64 {
    sigmoid(score) - label
}

pub fn sgns_loss(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> f64 {
    -log_sigmoid(dot(context, center)) - negatives.iter().map(|u| log_sigmoid(-dot(u, center))).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgnsGradients {
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

/// Analytic gradients of [`sgns_loss`].
pub fn sgns_gradients(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> SgnsGradients {
    let dim = center.len();
    let mut grad_center = vec![0.0; dim];
    let g = pair_coefficient(dot(context, center), 1.0);
    let grad_context: Vec<f64> = center.iter().map(|v| g * v).collect();
    for (gc, u) in grad_center.iter_mut().zip(context) {
        *gc += g * u;
    }
    let mut grad_negatives = Vec::with_capacity(negatives.len());
    for u in negatives {
        let g = pair_coefficient(dot(u, center), 0.0);
        grad_negatives.push(center.iter().map(|v| g * v).collect());
        for (gc, x) in grad_center.iter_mut().zip(u.iter()) {
            *gc += g * x;
        }
    }
    SgnsGradients {
        center: grad_center,
        context: grad_context,
        negatives: grad_negatives,
    }
}
