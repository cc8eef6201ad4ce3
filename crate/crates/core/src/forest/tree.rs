//! Axis-aligned CART classification trees.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Criterion, FeatureSubset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        /// Samples with `x[feature] <= threshold` go left.
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        /// Training samples (with bootstrap multiplicity) per class.
        counts: Vec<u32>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

pub(crate) struct GrowParams {
    pub criterion: Criterion,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub features: FeatureSubset,
    pub n_classes: usize,
}

/// Training view: row-major features plus class indices.
pub(crate) struct Samples<'a> {
    pub x: &'a [f64],
    pub n_features: usize,
    pub y: &'a [usize],
}

impl Samples<'_> {
    fn value(&self, row: usize, feature: usize) -> f64 {
        self.x[row * self.n_features + feature]
    }
}

fn impurity(criterion: Criterion, counts: &[u32], total: u32) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    match criterion {
        Criterion::Gini => 1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>(),
        Criterion::Entropy => -counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                p * p.log2()
            })
            .sum::<f64>(),
    }
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl DecisionTree {
    /// Grows a tree on `rows` (indices into `data`, repeats allowed).
    pub(crate) fn grow(data: &Samples<'_>, rows: Vec<usize>, params: &GrowParams, rng: &mut crate::rng::Rng) -> Self {
        let mut tree = DecisionTree { nodes: Vec::new() };
        tree.grow_node(data, rows, 0, params, rng);
        tree
    }

    /// Hand-built tree; used by tests and fixtures.
    pub fn from_nodes(nodes: Vec<Node>) -> Self {
        DecisionTree { nodes }
    }

    /// Single-leaf tree with the given class counts.
    pub fn leaf(counts: Vec<u32>) -> Self {
        DecisionTree {
            nodes: vec![Node::Leaf { counts }],
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    fn class_counts(data: &Samples<'_>, rows: &[usize], n_classes: usize) -> Vec<u32> {
        let mut counts = vec![0u32; n_classes];
        for &r in rows {
            counts[data.y[r]] += 1;
        }
        counts
    }

    fn grow_node(
        &mut self,
        data: &Samples<'_>,
        rows: Vec<usize>,
        depth: usize,
        params: &GrowParams,
        rng: &mut crate::rng::Rng,
    ) -> usize {
        let counts = Self::class_counts(data, &rows, params.n_classes);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { counts: counts.clone() });

        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_reached = params.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_reached || rows.len() < 2 * params.min_samples_leaf {
            return id;
        }
        let Some(best) = self.find_split(data, &rows, &counts, params, rng) else {
            return id;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&r| data.value(r, best.feature) <= best.threshold);
        let left = self.grow_node(data, left_rows, depth + 1, params, rng);
        let right = self.grow_node(data, right_rows, depth + 1, params, rng);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    /// Best split over a random feature subset. When none of the drawn
    /// features admits a valid split, the remaining features are tried in
    /// random order until one does.
    fn find_split(
        &self,
        data: &Samples<'_>,
        rows: &[usize],
        parent_counts: &[u32],
        params: &GrowParams,
        rng: &mut crate::rng::Rng,
    ) -> Option<BestSplit> {
        let d = data.n_features;
        let mut features: Vec<usize> = (0..d).collect();
        features.shuffle(rng);
        let wanted = match params.features {
            FeatureSubset::All => d,
            FeatureSubset::Sqrt => ((d as f64).sqrt().floor() as usize).max(1),
        };
        let total = rows.len() as u32;
        let mut best: Option<BestSplit> = None;
        let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(rows.len());
        let mut left = vec![0u32; params.n_classes];
        let mut right = vec![0u32; params.n_classes];
        for (visited, &feature) in features.iter().enumerate() {
            if visited >= wanted && best.is_some() {
                break;
            }
            pairs.clear();
            pairs.extend(rows.iter().map(|&r| (data.value(r, feature), data.y[r])));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            left.iter_mut().for_each(|c| *c = 0);
            right.copy_from_slice(parent_counts);
            for i in 0..pairs.len() - 1 {
                let class = pairs[i].1;
                left[class] += 1;
                right[class] -= 1;
                let (lo, hi) = (pairs[i].0, pairs[i + 1].0);
                if lo == hi {
                    continue;
                }
                let n_left = (i + 1) as u32;
                let n_right = total - n_left;
                if (n_left as usize) < params.min_samples_leaf || (n_right as usize) < params.min_samples_leaf {
                    continue;
                }
                let score = (n_left as f64 * impurity(params.criterion, &left, n_left)
                    + n_right as f64 * impurity(params.criterion, &right, n_right))
                    / total as f64;
                if best.as_ref().is_none_or(|b| score < b.score) {
                    let mid = lo + (hi - lo) / 2.0;
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some(BestSplit { feature, threshold, score });
                }
            }
        }
        best
    }

    /// Leaf class counts reached by `x`.
    pub fn leaf_counts(&self, x: &[f64]) -> &[u32] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { counts } => return counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Normalised leaf class distribution for `x`.
    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let counts = self.leaf_counts(x);
        let total: u32 = counts.iter().sum();
        counts.iter().map(|&c| c as f64 / total as f64).collect()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaves(&self) -> impl Iterator<Item = &[u32]> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { counts } => Some(counts.as_slice()),
            _ => None,
        })
    }
}
