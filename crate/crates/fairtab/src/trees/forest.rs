//! Bagged random forest baseline: bootstrap rows, √D features per split,
//! class-probability leaves.

use crate::error::{Error, Result};
use crate::rng;
use crate::trees::tree::{fit_tree_impl, Tree, TreeFitConfig};
use crate::trees::XMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RfParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub seed: u64,
}

impl Default for RfParams {
    fn default() -> Self {
        RfParams {
            n_trees: 100,
            max_depth: 12,
            min_samples_leaf: 5,
            seed: 0,
        }
    }
}

/// Classification forest; each leaf stores the positive-class proportion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfModel {
    pub trees: Vec<Tree>,
    pub n_trees: usize,
    pub n_features: usize,
    pub seed: u64,
}

/// With λ=0 and unit hessians, the second-order split objective reduces to
/// variance reduction, which coincides with the Gini gain on binary targets;
/// leaf values are then exact class proportions.
pub fn fit_random_forest(x: XMatrix, y: &[u8], params: &RfParams) -> Result<RfModel> {
    if params.n_trees == 0 {
        return Err(Error::Config("n_trees must be at least 1".into()));
    }
    if y.len() != x.rows {
        return Err(Error::Shape("labels must match row count".into()));
    }
    let n_pos = y.iter().filter(|&&v| v == 1).count();
    if n_pos == 0 || n_pos == y.len() {
        return Err(Error::Config(
            "labels contain a single class; forest needs both".into(),
        ));
    }
    let targets: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let hessians = vec![1.0; y.len()];
    let k = ((x.cols as f64).sqrt().round() as usize).clamp(1, x.cols);
    let cfg = TreeFitConfig {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        lambda: 0.0,
        features_per_split: if k < x.cols { Some(k) } else { None },
    };
    let mut stream = rng::stream(params.seed, "forest");
    let mut trees = Vec::with_capacity(params.n_trees);
    for _ in 0..params.n_trees {
        let rows: Vec<u32> = (0..x.rows)
            .map(|_| stream.gen_range(0..x.rows as u32))
            .collect();
        trees.push(fit_tree_impl(x, rows, &targets, &hessians, cfg, &mut stream));
    }
    Ok(RfModel {
        trees,
        n_trees: params.n_trees,
        n_features: x.cols,
        seed: params.seed,
    })
}

/// Mean leaf class-probability over trees.
pub fn rf_predict_proba(model: &RfModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.n_features {
        return Err(Error::Shape(format!(
            "row of width {} fed to a forest of {} features",
            x.len(),
            model.n_features
        )));
    }
    let sum: f64 = model.trees.iter().map(|t| t.predict(x)).sum();
    Ok(sum / model.trees.len() as f64)
}
