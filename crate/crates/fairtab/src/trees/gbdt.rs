//! Gradient-boosted trees with logistic loss, second-order splits, and
//! shrinkage. The fitted ensemble doubles as the distillation teacher and
//! the GBDT baseline.

use crate::error::{Error, Result};
use crate::nn::sigmoid;
use crate::rng;
use crate::trees::tree::{fit_tree_impl, Tree, TreeFitConfig};
use crate::trees::XMatrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbdtParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub learning_rate: f64,
    /// Fraction of features considered per split; 1.0 disables subsampling.
    pub feature_fraction: f64,
    pub seed: u64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            n_trees: 100,
            max_depth: 6,
            min_samples_leaf: 20,
            learning_rate: 0.1,
            feature_fraction: 1.0,
            seed: 0,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Config("n_trees must be at least 1".into()));
        }
        if self.max_depth == 0 {
            return Err(Error::Config("max_depth must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Config("learning_rate must lie in (0, 1]".into()));
        }
        if !(self.feature_fraction > 0.0 && self.feature_fraction <= 1.0) {
            return Err(Error::Config("feature_fraction must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Fixed second-order regularizer, shared by every boosted tree.
const LAMBDA: f64 = 1.0;

/// Boosted ensemble: `margin(x) = base_score + η·Σ tree_t(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub trees: Vec<Tree>,
    pub learning_rate: f64,
    /// Log-odds of the training positive rate.
    pub base_score: f64,
    pub n_features: usize,
    /// Training logistic loss after each boosting stage.
    pub train_loss: Vec<f64>,
}

/// Fit one regression tree on residual targets (negative gradients) and
/// hessians, leaf value `Σt/(Σh+λ)` with λ=1.
pub fn fit_tree(x: XMatrix, targets: &[f64], hessians: &[f64], params: &GbdtParams) -> Result<Tree> {
    params.validate()?;
    if targets.len() != x.rows || hessians.len() != x.rows {
        return Err(Error::Shape("targets/hessians must match row count".into()));
    }
    let cfg = TreeFitConfig {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        lambda: LAMBDA,
        features_per_split: fraction_to_count(params.feature_fraction, x.cols),
    };
    let mut stream = rng::stream(params.seed, "tree");
    Ok(fit_tree_impl(
        x,
        (0..x.rows as u32).collect(),
        targets,
        hessians,
        cfg,
        &mut stream,
    ))
}

fn fraction_to_count(fraction: f64, n_cols: usize) -> Option<usize> {
    if fraction >= 1.0 {
        None
    } else {
        Some(((fraction * n_cols as f64).ceil() as usize).clamp(1, n_cols))
    }
}

/// Stagewise logistic boosting: per stage `t = y − p`, `h = p(1−p)`.
pub fn fit_gbdt(x: XMatrix, y: &[u8], params: &GbdtParams) -> Result<GbdtModel> {
    params.validate()?;
    if y.len() != x.rows {
        return Err(Error::Shape("labels must match row count".into()));
    }
    let n_pos = y.iter().filter(|&&v| v == 1).count();
    if n_pos == 0 || n_pos == y.len() {
        return Err(Error::Config(
            "labels contain a single class; boosting needs both".into(),
        ));
    }
    let p_bar = n_pos as f64 / y.len() as f64;
    let base_score = (p_bar / (1.0 - p_bar)).ln();

    let cfg = TreeFitConfig {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        lambda: LAMBDA,
        features_per_split: fraction_to_count(params.feature_fraction, x.cols),
    };
    let mut stream = rng::stream(params.seed, "gbdt");
    let n = x.rows;
    let mut margins = vec![base_score; n];
    let mut targets = vec![0.0; n];
    let mut hessians = vec![0.0; n];
    let mut trees = Vec::with_capacity(params.n_trees);
    let mut train_loss = Vec::with_capacity(params.n_trees);

    for _ in 0..params.n_trees {
        for i in 0..n {
            let p = sigmoid(margins[i]);
            targets[i] = f64::from(y[i]) - p;
            hessians[i] = p * (1.0 - p);
        }
        let tree = fit_tree_impl(
            x,
            (0..n as u32).collect(),
            &targets,
            &hessians,
            cfg,
            &mut stream,
        );
        for (i, m) in margins.iter_mut().enumerate() {
            *m += params.learning_rate * tree.predict(x.row(i));
        }
        trees.push(tree);
        let loss: f64 = margins
            .iter()
            .zip(y)
            .map(|(&m, &yi)| crate::nn::cross_entropy(sigmoid(m), yi))
            .sum::<f64>()
            / n as f64;
        train_loss.push(loss);
    }

    Ok(GbdtModel {
        trees,
        learning_rate: params.learning_rate,
        base_score,
        n_features: x.cols,
        train_loss,
    })
}

/// Raw additive margin for one row.
pub fn predict_margin(model: &GbdtModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.n_features {
        return Err(Error::Shape(format!(
            "row of width {} fed to a model of {} features",
            x.len(),
            model.n_features
        )));
    }
    let sum: f64 = model.trees.iter().map(|t| t.predict(x)).sum();
    Ok(model.base_score + model.learning_rate * sum)
}

pub fn predict_proba(model: &GbdtModel, x: &[f64]) -> Result<f64> {
    predict_margin(model, x).map(sigmoid)
}

/// Per-tree leaf ordinal reached by `x`.
pub fn leaf_indices(model: &GbdtModel, x: &[f64]) -> Result<Vec<u32>> {
    if x.len() != model.n_features {
        return Err(Error::Shape(format!(
            "row of width {} fed to a model of {} features",
            x.len(),
            model.n_features
        )));
    }
    Ok(model
        .trees
        .iter()
        .map(|t| t.leaf_of(x).0 as u32)
        .collect())
}

/// Sorted union of `used_features` over a subset of trees (the index set 𝕀).
pub fn used_feature_indices(trees: &[Tree]) -> Vec<usize> {
    let set: BTreeSet<usize> = trees
        .iter()
        .flat_map(|t| t.used_features.iter().copied())
        .collect();
    set.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::roc_auc;
    use crate::trees::tree::Node;
    use rand::Rng;

    /// Linearly separable 2-D cloud with a little jitter.
    fn separable(n: usize, seed: u64) -> (Vec<f64>, Vec<u8>) {
        let mut rng = rng::stream(seed, "separable");
        let mut x = Vec::with_capacity(n * 2);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let a = rng::normal(&mut rng);
            let b = rng::normal(&mut rng);
            x.push(a);
            x.push(b);
            y.push(u8::from(a + b > 0.0));
        }
        (x, y)
    }

    #[test]
    fn separable_data_reaches_high_auc() {
        let (x, y) = separable(200, 3);
        let params = GbdtParams {
            n_trees: 50,
            max_depth: 3,
            min_samples_leaf: 2,
            ..GbdtParams::default()
        };
        let model = fit_gbdt(XMatrix::new(&x[..150 * 2], 150, 2), &y[..150], &params).unwrap();
        let scores: Vec<f64> = (150..200)
            .map(|i| predict_proba(&model, &x[i * 2..(i + 1) * 2]).unwrap())
            .collect();
        let auc = roc_auc(&scores, &y[150..]).unwrap();
        assert!(auc >= 0.95, "held-out auc {auc}");
    }

    #[test]
    fn rejects_zero_trees_and_single_class() {
        let x = vec![0.0, 1.0];
        let params = GbdtParams {
            n_trees: 0,
            ..GbdtParams::default()
        };
        assert!(matches!(
            fit_gbdt(XMatrix::new(&x, 2, 1), &[0, 1], &params),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            fit_gbdt(XMatrix::new(&x, 2, 1), &[1, 1], &GbdtParams::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn base_score_zero_single_leaf_gives_half() {
        let model = GbdtModel {
            trees: vec![Tree::single_leaf(0.0)],
            learning_rate: 0.1,
            base_score: 0.0,
            n_features: 2,
            train_loss: vec![],
        };
        assert_eq!(predict_proba(&model, &[5.0, -3.0]).unwrap(), 0.5);
        assert!(predict_proba(&model, &[5.0]).is_err());
    }

    #[test]
    fn margin_matches_per_tree_traversal() {
        let (x, y) = separable(120, 9);
        let params = GbdtParams {
            n_trees: 20,
            max_depth: 3,
            min_samples_leaf: 2,
            ..GbdtParams::default()
        };
        let model = fit_gbdt(XMatrix::new(&x, 120, 2), &y, &params).unwrap();
        let mut rng = rng::stream(1, "probe");
        for _ in 0..20 {
            let row = [rng::normal(&mut rng), rng::normal(&mut rng)];
            let mut expected = model.base_score;
            for t in &model.trees {
                expected += model.learning_rate * t.predict(&row);
            }
            let got = predict_margin(&model, &row).unwrap();
            assert!((got - expected).abs() < 1e-12);
            // consistency with leaf_indices: margin from q[leaf] agrees
            let ids = leaf_indices(&model, &row).unwrap();
            let from_leaves: f64 = model.base_score
                + model.learning_rate
                    * model
                        .trees
                        .iter()
                        .zip(&ids)
                        .map(|(t, &id)| t.leaf_values()[id as usize])
                        .sum::<f64>();
            assert!((got - from_leaves).abs() < 1e-12);
            for (t, &id) in model.trees.iter().zip(&ids) {
                assert!((id as usize) < t.leaf_count);
            }
        }
        let _ = rng.gen::<u32>();
    }

    #[test]
    fn adding_all_positive_tree_increases_margin() {
        let (x, y) = separable(60, 5);
        let params = GbdtParams {
            n_trees: 5,
            max_depth: 2,
            min_samples_leaf: 2,
            ..GbdtParams::default()
        };
        let mut model = fit_gbdt(XMatrix::new(&x, 60, 2), &y, &params).unwrap();
        let row = [0.3, -0.2];
        let before = predict_margin(&model, &row).unwrap();
        model.trees.push(Tree::single_leaf(0.7));
        let after = predict_margin(&model, &row).unwrap();
        assert!(after > before);
        assert!((after - before - 0.1 * 0.7).abs() < 1e-12);
    }

    #[test]
    fn training_loss_is_non_increasing() {
        let (x, y) = separable(150, 21);
        let params = GbdtParams {
            n_trees: 40,
            max_depth: 3,
            min_samples_leaf: 5,
            ..GbdtParams::default()
        };
        let model = fit_gbdt(XMatrix::new(&x, 150, 2), &y, &params).unwrap();
        for w in model.train_loss.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "loss went up: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn leaf_indices_depth_one_tree() {
        let data = vec![0.0, 1.0, 2.0, 3.0];
        let x = XMatrix::new(&data, 4, 1);
        let params = GbdtParams {
            n_trees: 1,
            max_depth: 1,
            min_samples_leaf: 1,
            ..GbdtParams::default()
        };
        let tree = fit_tree(x, &[-1.0, -1.0, 1.0, 1.0], &[1.0; 4], &params).unwrap();
        let model = GbdtModel {
            trees: vec![tree],
            learning_rate: 1.0,
            base_score: 0.0,
            n_features: 1,
            train_loss: vec![],
        };
        assert_eq!(leaf_indices(&model, &[0.0]).unwrap(), vec![0]);
        assert_eq!(leaf_indices(&model, &[3.0]).unwrap(), vec![1]);
        assert_eq!(
            leaf_indices(&model, &[0.4]).unwrap(),
            leaf_indices(&model, &[0.4]).unwrap()
        );
    }

    #[test]
    fn used_features_union() {
        let mk = |features: &[usize]| {
            let mut nodes = vec![];
            let mut idx = 0;
            for &f in features {
                nodes.push(Node::Split {
                    feature: f,
                    threshold: 0.0,
                    left: idx + 1,
                    right: idx + 2,
                });
                idx += 1;
            }
            Tree {
                nodes,
                leaf_count: 0,
                used_features: features.to_vec(),
            }
        };
        let t1 = mk(&[3, 7]);
        assert_eq!(used_feature_indices(&[t1.clone()]), vec![3, 7]);
        let t2 = mk(&[1]);
        let t3 = mk(&[1, 2]);
        assert_eq!(used_feature_indices(&[t2, t3]), vec![1, 2]);
        assert_eq!(
            used_feature_indices(&[Tree::single_leaf(0.5)]),
            Vec::<usize>::new()
        );
    }

    #[test]
    fn model_json_round_trip_is_exact() {
        let (x, y) = separable(80, 2);
        let params = GbdtParams {
            n_trees: 10,
            max_depth: 4,
            min_samples_leaf: 2,
            ..GbdtParams::default()
        };
        let model = fit_gbdt(XMatrix::new(&x, 80, 2), &y, &params).unwrap();
        let json = serde_json::to_string(&model).unwrap();
        let back: GbdtModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, model);
    }
}
