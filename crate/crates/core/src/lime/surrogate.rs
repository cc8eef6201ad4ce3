//! Weighted ridge regression with an unpenalised intercept, solved through
//! the normal equations
//!
//!   (Xᵀ W X + λ P) β = Xᵀ W y,   X = [1 | masks],  P = diag(0, 1, …, 1).

use super::LimeError;

#[derive(Debug, Clone, PartialEq)]
pub struct Surrogate {
    /// Intercept per class.
    pub intercept: [f64; 4],
    /// `coef[c][j]`: weight of token `j` for class `c`.
    pub coef: [Vec<f64>; 4],
}

/// Builds the normal-equation system `(A, B)` shared by all four classes;
/// `B` holds one right-hand side per class.
pub(crate) fn normal_equations(masks: &[Vec<bool>], targets: &[[f64; 4]], weights: &[f64], l2: f64) -> (Vec<f64>, Vec<[f64; 4]>) {
    let p = masks[0].len() + 1;
    let mut a = vec![0.0; p * p];
    let mut b = vec![[0.0; 4]; p];
    let mut active = Vec::with_capacity(p);
    for ((mask, y), &w) in masks.iter().zip(targets).zip(weights) {
        active.clear();
        active.push(0);
        active.extend(mask.iter().enumerate().filter(|(_, &m)| m).map(|(j, _)| j + 1));
        for &r in &active {
            for &c in &active {
                a[r * p + c] += w;
            }
            for k in 0..4 {
                b[r][k] += w * y[k];
            }
        }
    }
    for j in 1..p {
        a[j * p + j] += l2;
    }
    (a, b)
}

/// Fits one surrogate per class. Needs at least `d + 1` samples for `d`
/// tokens and strictly positive weights.
pub fn fit_surrogate(masks: &[Vec<bool>], targets: &[[f64; 4]], weights: &[f64], l2: f64) -> Result<Surrogate, LimeError> {
    let d = masks.first().map(|m| m.len()).ok_or(LimeError::TooFewSamples { samples: 0, needed: 1 })?;
    if masks.len() < d + 1 {
        return Err(LimeError::TooFewSamples {
            samples: masks.len(),
            needed: d + 1,
        });
    }
    if targets.len() != masks.len() || weights.len() != masks.len() {
        return Err(LimeError::Config("masks, targets and weights differ in length".into()));
    }
    if masks.iter().any(|m| m.len() != d) {
        return Err(LimeError::Config("masks differ in length".into()));
    }
    if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
        return Err(LimeError::Config("sample weights must be positive".into()));
    }
    if !(l2 >= 0.0) {
        return Err(LimeError::Config("l2 must be >= 0".into()));
    }
    let (a, b) = normal_equations(masks, targets, weights, l2);
    let p = d + 1;
    let l = cholesky(&a, p).ok_or(LimeError::Singular)?;
    let mut intercept = [0.0; 4];
    let mut coef: [Vec<f64>; 4] = Default::default();
    for k in 0..4 {
        let rhs: Vec<f64> = b.iter().map(|row| row[k]).collect();
        let beta = cholesky_solve(&l, p, &rhs);
        intercept[k] = beta[0];
        coef[k] = beta[1..].to_vec();
    }
    Ok(Surrogate { intercept, coef })
}

/// Lower-triangular `L` with `L Lᵀ = A`, or `None` if `A` is not positive
/// definite.
fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum();
            if i == j {
                let v = a[i * n + i] - s;
                if !(v > 0.0) {
                    return None;
                }
                l[i * n + i] = v.sqrt();
            } else {
                l[i * n + j] = (a[i * n + j] - s) / l[j * n + j];
            }
        }
    }
    Some(l)
}

fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k * n + i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i * n + i];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::Rng as _;

    fn random_system(seed: u64, n: usize, d: usize) -> (Vec<Vec<bool>>, Vec<[f64; 4]>, Vec<f64>) {
        let mut rng = crate::rng::seeded(seed);
        let masks: Vec<Vec<bool>> = (0..n).map(|_| (0..d).map(|_| rng.random_bool(0.5)).collect()).collect();
        let targets: Vec<[f64; 4]> = (0..n).map(|_| std::array::from_fn(|_| rng.random::<f64>())).collect();
        let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        (masks, targets, weights)
    }

    // dense weighted least squares written out with nalgebra
    fn oracle(masks: &[Vec<bool>], y: &[[f64; 4]], w: &[f64], l2: f64, class: usize) -> DVector<f64> {
        let n = masks.len();
        let p = masks[0].len() + 1;
        let x = DMatrix::from_fn(n, p, |i, j| if j == 0 || masks[i][j - 1] { 1.0 } else { 0.0 });
        let wm = DMatrix::from_diagonal(&DVector::from_column_slice(w));
        let mut pen = DMatrix::<f64>::identity(p, p) * l2;
        pen[(0, 0)] = 0.0;
        let yv = DVector::from_fn(n, |i, _| y[i][class]);
        let lhs = x.transpose() * &wm * &x + pen;
        let rhs = x.transpose() * &wm * yv;
        lhs.lu().solve(&rhs).unwrap()
    }

    #[test]
    fn matches_independent_solver() {
        for seed in 0..10 {
            let (m, y, w) = random_system(seed, 20, 5);
            let s = fit_surrogate(&m, &y, &w, 0.7).unwrap();
            for c in 0..4 {
                let beta = oracle(&m, &y, &w, 0.7, c);
                assert!((beta[0] - s.intercept[c]).abs() < 1e-8);
                for j in 0..5 {
                    assert!((beta[j + 1] - s.coef[c][j]).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn constant_target_gives_zero_weights() {
        let (m, _, w) = random_system(3, 40, 6);
        let y = vec![[0.1, 0.2, 0.3, 0.4]; 40];
        let s = fit_surrogate(&m, &y, &w, 1.0).unwrap();
        for c in 0..4 {
            assert!((s.intercept[c] - y[0][c]).abs() < 1e-12);
            assert!(s.coef[c].iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn planted_linear_target() {
        let (m, _, w) = random_system(8, 200, 4);
        let y: Vec<[f64; 4]> = m.iter().map(|mask| {
            let v = 0.1 + 0.2 * mask[0] as u8 as f64;
            [v, 0.5, 0.5 - v, 0.0]
        }).collect();
        let s = fit_surrogate(&m, &y, &w, 1e-8).unwrap();
        assert!((s.coef[0][0] - 0.2).abs() < 1e-3);
        assert!(s.coef[0][1..].iter().all(|v| v.abs() < 1e-3));
        assert!((s.coef[2][0] + 0.2).abs() < 1e-3);
    }

    #[test]
    fn too_few_samples() {
        let (m, y, w) = random_system(1, 5, 5);
        assert!(matches!(fit_surrogate(&m, &y, &w, 1.0), Err(LimeError::TooFewSamples { samples: 5, needed: 6 })));
    }

    #[test]
    fn normal_equation_residual() {
        for seed in 0..20 {
            let (m, y, w) = random_system(100 + seed, 60, 12);
            let s = fit_surrogate(&m, &y, &w, 1.0).unwrap();
            let (a, b) = normal_equations(&m, &y, &w, 1.0);
            let p = 13;
            for c in 0..4 {
                let beta: Vec<f64> = std::iter::once(s.intercept[c]).chain(s.coef[c].iter().copied()).collect();
                for r in 0..p {
                    let lhs: f64 = (0..p).map(|k| a[r * p + k] * beta[k]).sum();
                    assert!((lhs - b[r][c]).abs() < 1e-8);
                }
            }
        }
    }
}
