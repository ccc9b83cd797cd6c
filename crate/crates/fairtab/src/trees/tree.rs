//! A single regression tree and its exact greedy fitter.

use crate::trees::XMatrix;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
        leaf_id: usize,
    },
}

/// Nodes stored in a flat arena, root at index 0. Leaves are numbered in
/// depth-first construction order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
    pub leaf_count: usize,
    /// Sorted feature indices appearing in splits.
    pub used_features: Vec<usize>,
}

impl Tree {
    pub fn single_leaf(value: f64) -> Tree {
        Tree {
            nodes: vec![Node::Leaf { value, leaf_id: 0 }],
            leaf_count: 1,
            used_features: Vec::new(),
        }
    }

    /// Leaf ordinal and leaf value reached by `x`; rows with `x < threshold`
    /// go left.
    pub fn leaf_of(&self, x: &[f64]) -> (usize, f64) {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if x[*feature] < *threshold { *left } else { *right };
                }
                Node::Leaf { value, leaf_id } => return (*leaf_id, *value),
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.leaf_of(x).1
    }

    /// Leaf values indexed by leaf ordinal (the tree's `q` vector).
    pub fn leaf_values(&self) -> Vec<f64> {
        let mut q = vec![0.0; self.leaf_count];
        for node in &self.nodes {
            if let Node::Leaf { value, leaf_id } = node {
                q[*leaf_id] = *value;
            }
        }
        q
    }
}

/// Internal fitting knobs; the public wrappers pin `lambda` per model kind.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TreeFitConfig {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub lambda: f64,
    /// Features considered per split; `None` means all.
    pub features_per_split: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Best positive-gain split over the candidate features, or `None` when the
/// node cannot improve. Gain is the second-order objective reduction
/// `½[T_L²/(H_L+λ) + T_R²/(H_R+λ) − T²/(H+λ)]` over targets T (negative
/// gradients) and hessians H. First strictly-better candidate wins, so ties
/// resolve to the lowest feature index and then the lowest threshold.
pub(crate) fn best_split(
    x: XMatrix,
    rows: &[u32],
    targets: &[f64],
    hessians: &[f64],
    features: &[usize],
    cfg: &TreeFitConfig,
) -> Option<SplitChoice> {
    let mut total_t = 0.0;
    let mut total_h = 0.0;
    for &r in rows {
        total_t += targets[r as usize];
        total_h += hessians[r as usize];
    }
    let parent_score = total_t * total_t / (total_h + cfg.lambda);

    let mut best: Option<SplitChoice> = None;
    let mut sorted: Vec<(f64, u32)> = Vec::with_capacity(rows.len());
    for &f in features {
        sorted.clear();
        sorted.extend(rows.iter().map(|&r| (x.at(r as usize, f), r)));
        sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite feature values"));

        let mut left_t = 0.0;
        let mut left_h = 0.0;
        for i in 0..sorted.len() {
            if i > 0 && sorted[i].0 > sorted[i - 1].0 {
                let n_left = i;
                let n_right = sorted.len() - i;
                if n_left >= cfg.min_samples_leaf && n_right >= cfg.min_samples_leaf {
                    let right_t = total_t - left_t;
                    let right_h = total_h - left_h;
                    let gain = 0.5
                        * (left_t * left_t / (left_h + cfg.lambda)
                            + right_t * right_t / (right_h + cfg.lambda)
                            - parent_score);
                    if gain > 0.0 && best.map_or(true, |b| gain > b.gain) {
                        best = Some(SplitChoice {
                            feature: f,
                            threshold: 0.5 * (sorted[i - 1].0 + sorted[i].0),
                            gain,
                        });
                    }
                }
            }
            let r = sorted[i].1 as usize;
            left_t += targets[r];
            left_h += hessians[r];
        }
    }
    best
}

struct Fitter<'a> {
    x: XMatrix<'a>,
    targets: &'a [f64],
    hessians: &'a [f64],
    cfg: TreeFitConfig,
    nodes: Vec<Node>,
    leaf_count: usize,
    used: BTreeSet<usize>,
    feature_pool: Vec<usize>,
}

impl<'a> Fitter<'a> {
    fn leaf_value(&self, rows: &[u32]) -> f64 {
        let mut t = 0.0;
        let mut h = 0.0;
        for &r in rows {
            t += self.targets[r as usize];
            h += self.hessians[r as usize];
        }
        t / (h + self.cfg.lambda)
    }

    fn push_leaf(&mut self, rows: &[u32]) -> usize {
        let value = self.leaf_value(rows);
        let leaf_id = self.leaf_count;
        self.leaf_count += 1;
        self.nodes.push(Node::Leaf { value, leaf_id });
        self.nodes.len() - 1
    }

    fn grow(&mut self, rows: Vec<u32>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        if depth >= self.cfg.max_depth || rows.len() < 2 * self.cfg.min_samples_leaf {
            return self.push_leaf(&rows);
        }
        let candidates: Vec<usize> = match self.cfg.features_per_split {
            Some(k) if k < self.x.cols => {
                let mut pool = std::mem::take(&mut self.feature_pool);
                let (chosen, _) = pool.partial_shuffle(rng, k);
                let mut chosen: Vec<usize> = chosen.to_vec();
                chosen.sort_unstable();
                self.feature_pool = pool;
                chosen
            }
            _ => (0..self.x.cols).collect(),
        };
        let split = best_split(self.x, &rows, self.targets, self.hessians, &candidates, &self.cfg);
        let Some(split) = split else {
            return self.push_leaf(&rows);
        };

        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = rows
            .iter()
            .partition(|&&r| self.x.at(r as usize, split.feature) < split.threshold);

        self.used.insert(split.feature);
        let placeholder = self.nodes.len();
        self.nodes.push(Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: usize::MAX,
            right: usize::MAX,
        });
        let left = self.grow(left_rows, depth + 1, rng);
        let right = self.grow(right_rows, depth + 1, rng);
        if let Node::Split {
            left: l, right: r, ..
        } = &mut self.nodes[placeholder]
        {
            *l = left;
            *r = right;
        }
        placeholder
    }
}

/// Fit one tree on (target, hessian) statistics over the given rows.
pub(crate) fn fit_tree_impl(
    x: XMatrix,
    rows: Vec<u32>,
    targets: &[f64],
    hessians: &[f64],
    cfg: TreeFitConfig,
    rng: &mut ChaCha8Rng,
) -> Tree {
    let mut fitter = Fitter {
        x,
        targets,
        hessians,
        cfg,
        nodes: Vec::new(),
        leaf_count: 0,
        used: BTreeSet::new(),
        feature_pool: (0..x.cols).collect(),
    };
    fitter.grow(rows, 0, rng);
    Tree {
        nodes: fitter.nodes,
        leaf_count: fitter.leaf_count,
        used_features: fitter.used.into_iter().collect(),
    }
}
