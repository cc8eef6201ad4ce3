use std::cmp::Ordering;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{evaluate_labels, fit_forest, Criterion, ForestError, ForestParams};
use crate::corpus::TopicLabel;
use crate::embedding::EmbeddingMatrix;

/// Splits `0..y.len()` into `k` folds, each class spread as evenly as possible.
///
/// Each class is shuffled, the classes are laid end to end in label order and
/// the result is dealt round-robin, so both fold sizes and per-class counts
/// differ by at most one.
pub fn stratified_kfold(y: &[TopicLabel], k: usize, seed: u64) -> Result<Vec<Vec<usize>>, ForestError> {
    if k < 2 {
        return Err(ForestError::Params("k must be >= 2".into()));
    }
    let mut rng = crate::rng::seeded(seed);
    let mut order = Vec::with_capacity(y.len());
    for label in TopicLabel::ALL {
        let mut members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == label).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < k {
            return Err(ForestError::Stratification {
                label: label.to_string(),
                count: members.len(),
                k,
            });
        }
        members.shuffle(&mut rng);
        order.extend(members);
    }
    let mut folds = vec![Vec::new(); k];
    for (n, i) in order.into_iter().enumerate() {
        folds[n % k].push(i);
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub fold_f1: Vec<f64>,
    pub fold_accuracy: Vec<f64>,
    pub mean_f1: f64,
    pub mean_accuracy: f64,
}

/// Stratified k-fold estimate of macro-F1 and accuracy for one parameter set.
///
/// Fold `i` trains with seed `params.seed + i`.
pub fn cross_validate(
    x: &EmbeddingMatrix,
    y: &[TopicLabel],
    params: &ForestParams,
    k: usize,
    seed: u64,
) -> Result<CvReport, ForestError> {
    if x.rows() != y.len() {
        return Err(ForestError::Data(format!("{} rows but {} labels", x.rows(), y.len())));
    }
    let folds = stratified_kfold(y, k, seed)?;
    let mut fold_f1 = Vec::with_capacity(k);
    let mut fold_accuracy = Vec::with_capacity(k);
    for (i, held_out) in folds.iter().enumerate() {
        let train: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        let mut train_sorted = train;
        train_sorted.sort_unstable();
        let train_y: Vec<TopicLabel> = train_sorted.iter().map(|&r| y[r]).collect();
        let fold_params = ForestParams {
            seed: params.seed.wrapping_add(i as u64),
            ..params.clone()
        };
        let model = fit_forest(&x.select_rows(&train_sorted), &train_y, &fold_params)?;
        let truth: Vec<TopicLabel> = held_out.iter().map(|&r| y[r]).collect();
        let pred = model.predict_matrix(&x.select_rows(held_out))?;
        let report = evaluate_labels(&truth, &pred)?;
        fold_f1.push(report.f1);
        fold_accuracy.push(report.accuracy);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(CvReport {
        mean_f1: mean(&fold_f1),
        mean_accuracy: mean(&fold_accuracy),
        fold_f1,
        fold_accuracy,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best: ForestParams,
    pub best_index: usize,
    /// Mean cross-validated macro-F1 per candidate, in grid order.
    pub mean_f1: Vec<f64>,
}

/// criterion {gini, entropy} × max_depth {8, 16, none} × n_estimators {100, 300, 500}.
pub fn default_grid(seed: u64) -> Vec<ForestParams> {
    let mut grid = Vec::new();
    for criterion in [Criterion::Gini, Criterion::Entropy] {
        for max_depth in [Some(8), Some(16), None] {
            for n_estimators in [100, 300, 500] {
                grid.push(ForestParams {
                    n_estimators,
                    criterion,
                    max_depth,
                    seed,
                    ..Default::default()
                });
            }
        }
    }
    grid
}

/// Picks the candidate with the highest mean k-fold macro-F1. All candidates
/// see the same folds. Ties go to fewer estimators, then shallower trees, then
/// gini, then grid order.
pub fn grid_search(
    x: &EmbeddingMatrix,
    y: &[TopicLabel],
    grid: &[ForestParams],
    k: usize,
    seed: u64,
) -> Result<GridSearchResult, ForestError> {
    if grid.is_empty() {
        return Err(ForestError::Params("empty grid".into()));
    }
    let mut mean_f1 = Vec::with_capacity(grid.len());
    for (i, params) in grid.iter().enumerate() {
        let report = cross_validate(x, y, params, k, seed)?;
        log::debug!("grid candidate {i}: {params:?} mean f1 {:.4}", report.mean_f1);
        mean_f1.push(report.mean_f1);
    }
    let best_index = (0..grid.len())
        .min_by(|&a, &b| rank(&grid[a], mean_f1[a], &grid[b], mean_f1[b]).then(a.cmp(&b)))
        .expect("nonempty grid");
    Ok(GridSearchResult {
        best: grid[best_index].clone(),
        best_index,
        mean_f1,
    })
}

fn rank(a: &ForestParams, fa: f64, b: &ForestParams, fb: f64) -> Ordering {
    fb.total_cmp(&fa)
        .then(a.n_estimators.cmp(&b.n_estimators))
        .then(depth_key(a).cmp(&depth_key(b)))
        .then(a.criterion.cmp(&b.criterion))
}

fn depth_key(p: &ForestParams) -> usize {
    p.max_depth.unwrap_or(usize::MAX)
}
