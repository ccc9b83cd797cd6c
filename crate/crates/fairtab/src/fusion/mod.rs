//! Sparse/dense fusion and the two-step debiased training pipeline.
//!
//! Step one distills the boosted teacher into per-group dense students with
//! an optional fairness penalty (weight `alpha_kg`); step two trains the
//! fused model end-to-end with its own penalty (weight `alpha`). Setting
//! either weight to zero reproduces the corresponding ablation exactly.

mod catnn;
mod model;
mod train;

pub use catnn::{CatCache, CatNN};
pub use model::{FusionCache, FusionModel};
pub use train::{train_end_to_end, TrainData, TrainLog};

use crate::dataio::{
    build_feature_views, fit_vocabs, impute_missing, kfold_split, Cohort, FeatureViews,
    Standardizer,
};
use crate::distill::{
    distill_dense_net, fit_leaf_embedding, prepare_distillation, DistillLog, DistillParams,
};
use crate::error::{Error, Result};
use crate::metrics::{encode_groups, evaluate_folds, FairnessReport};
use crate::rng;
use crate::trees::{fit_gbdt, GbdtModel, GbdtParams, XMatrix};
use serde::{Deserialize, Serialize};
use std::cell::RefCell;
use std::collections::BTreeMap;

/// Pipeline hyperparameters. Defaults follow the training protocol of the
/// evaluation setup: 10 epochs, learning rate 0.001, batch 256, 5 folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Step-two fairness weight.
    pub alpha: f64,
    /// Step-one (distillation) fairness weight.
    pub alpha_kg: f64,
    /// Majority-group override; `None` picks the largest training-split group.
    pub maj: Option<String>,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Sensitive attribute the fairness terms and the report run on.
    pub sensitive: String,
    pub folds: usize,
    /// Binarization threshold for DPD/EOD.
    pub threshold: f64,
    /// Keep the dense path fixed during step two.
    pub freeze_dense: bool,
    pub no_standardize: bool,
    /// Sigmoid-squash the dense margin before the step-one fairness term.
    pub squash_step1: bool,
    /// AdamW decay for end-to-end training.
    pub weight_decay: f64,
    pub n_groups: usize,
    pub d_leaf: usize,
    pub embed_dim: usize,
    pub student_hidden: Vec<usize>,
    pub deep_hidden: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 0.0,
            alpha_kg: 0.0,
            maj: None,
            epochs: 10,
            lr: 0.001,
            batch_size: 256,
            seed: 0,
            sensitive: "group".into(),
            folds: 5,
            threshold: 0.5,
            freeze_dense: false,
            no_standardize: false,
            squash_step1: false,
            weight_decay: 0.01,
            n_groups: 5,
            d_leaf: 20,
            embed_dim: 8,
            student_hidden: vec![64, 32],
            deep_hidden: vec![64, 32],
        }
    }
}

impl TrainConfig {
    fn distill_params(&self, fold: usize) -> DistillParams {
        DistillParams {
            n_groups: self.n_groups,
            d_leaf: self.d_leaf,
            hidden: self.student_hidden.clone(),
            epochs: self.epochs,
            lr: self.lr,
            batch_size: self.batch_size,
            raw_onehot_targets: false,
            squash_step1: self.squash_step1,
            seed: rng::derive(self.seed, &format!("fold{fold}/distill")),
        }
    }
}

/// Everything fitted on one fold's training split.
pub struct FoldFit {
    pub model: FusionModel,
    pub teacher: GbdtModel,
    pub views: FeatureViews,
    pub standardizer: Standardizer,
    pub maj_label: String,
    pub distill_log: DistillLog,
    pub train_log: TrainLog,
}

impl FoldFit {
    /// Fused probabilities for arbitrary cohort rows.
    pub fn score_rows(&self, rows: &[usize]) -> Result<Vec<f64>> {
        rows.iter()
            .map(|&r| {
                let mut dense = self.views.dense_row(r).to_vec();
                self.standardizer.transform_row(&mut dense);
                self.model.fuse_predict(&dense, self.views.sparse_row(r))
            })
            .collect()
    }

    /// Teacher probabilities on the raw dense view.
    pub fn score_teacher(&self, rows: &[usize]) -> Result<Vec<f64>> {
        rows.iter()
            .map(|&r| crate::trees::predict_proba(&self.teacher, self.views.dense_row(r)))
            .collect()
    }
}

/// Largest group among the training rows, or the configured override.
pub fn majority_label(
    cohort: &Cohort,
    train: &[usize],
    sensitive: &str,
    override_label: Option<&str>,
) -> Result<String> {
    let col = cohort.sensitive_column(sensitive)?;
    if let Some(label) = override_label {
        if !col.values.iter().any(|v| v == label) {
            return Err(Error::Config(format!(
                "majority group `{label}` not present in attribute `{sensitive}`"
            )));
        }
        return Ok(label.to_string());
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for &r in train {
        *counts.entry(col.values[r].as_str()).or_insert(0) += 1;
    }
    let (label, _) = counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(a.0)))
        .ok_or_else(|| Error::Data("empty training split".into()))?;
    Ok(label.to_string())
}

/// Fit one fold: vocabularies and standardizer on the training split, the
/// boosted teacher on raw dense rows, leaf embeddings and fair distillation,
/// then fair end-to-end training. Streams are named so that runs differing
/// only in `alpha`/`alpha_kg` share teachers, initializations, and batch
/// orders exactly.
pub fn fit_fold(
    cohort: &Cohort,
    train: &[usize],
    fold: usize,
    config: &TrainConfig,
    gbdt: &GbdtParams,
    cached_teacher: Option<GbdtModel>,
) -> Result<FoldFit> {
    let vocabs = fit_vocabs(cohort, train)?;
    let views = build_feature_views(cohort, &vocabs)?;
    let standardizer = if config.no_standardize {
        Standardizer::identity(views.d_cols)
    } else {
        Standardizer::fit(&views, train)
    };

    // teacher on raw dense values
    let n_train = train.len();
    let d = views.d_cols;
    let mut x_raw = Vec::with_capacity(n_train * d);
    for &r in train {
        x_raw.extend_from_slice(views.dense_row(r));
    }
    let y_train: Vec<u8> = train.iter().map(|&r| cohort.labels[r]).collect();
    let teacher = match cached_teacher {
        Some(t) => t,
        None => {
            let params = GbdtParams {
                seed: rng::derive(config.seed, &format!("fold{fold}/teacher")),
                ..*gbdt
            };
            fit_gbdt(XMatrix::new(&x_raw, n_train, d), &y_train, &params)?
        }
    };

    let maj_label = majority_label(cohort, train, &config.sensitive, config.maj.as_deref())?;
    let sens_col = cohort.sensitive_column(&config.sensitive)?;
    let maj_mask: Vec<bool> = train
        .iter()
        .map(|&r| sens_col.values[r] == maj_label)
        .collect();

    // step one: group, embed, distill
    let distill_params = config.distill_params(fold);
    let n_groups = config.n_groups.min(teacher.trees.len());
    let distillation = prepare_distillation(&teacher, &x_raw, n_train, n_groups)?;
    let mut embeddings = Vec::with_capacity(n_groups);
    for (g, group) in distillation.groups.iter().enumerate() {
        let mut stream = rng::stream(distill_params.seed, &format!("leafemb{g}"));
        let params_g = if distill_params.d_leaf >= group.leaf_dim {
            // degenerate small group: keep the embedding strictly narrower
            DistillParams {
                d_leaf: group.leaf_dim.saturating_sub(1).max(1),
                ..distill_params.clone()
            }
        } else {
            distill_params.clone()
        };
        embeddings.push(fit_leaf_embedding(
            group,
            &distillation.leaf_slots[g],
            &distillation.group_margins[g],
            &params_g,
            &mut stream,
        )?);
    }

    let x_std = standardizer.gather(&views, train);
    let (distilled, distill_log) = distill_dense_net(
        &distillation,
        &embeddings,
        &x_std,
        n_train,
        d,
        &maj_mask,
        config.alpha_kg,
        &distill_params,
    )?;

    // step two: end-to-end over the fused model
    let vocab_sizes: Vec<usize> = views.vocabs.iter().map(|v| v.len()).collect();
    let catnn = CatNN::init(
        &vocab_sizes,
        config.embed_dim,
        &config.deep_hidden,
        &mut rng::stream(config.seed, &format!("fold{fold}/catnn")),
    )?;
    let mut model = FusionModel::new(catnn, distilled);

    let codes: Vec<u32> = train
        .iter()
        .flat_map(|&r| views.sparse_row(r).iter().copied())
        .collect();
    let data = TrainData {
        x_std: &x_std,
        codes: &codes,
        labels: &y_train,
        maj_mask: &maj_mask,
        n_rows: n_train,
        d_cols: d,
        s_cols: views.s_cols,
    };
    let mut shuffle = rng::stream(
        rng::derive(config.seed, &format!("fold{fold}/e2e")),
        "shuffle",
    );
    let train_log = train_end_to_end(&mut model, &data, config, &mut shuffle)?;

    Ok(FoldFit {
        model,
        teacher,
        views,
        standardizer,
        maj_label,
        distill_log,
        train_log,
    })
}

/// Output of the full cross-validated pipeline.
pub struct PipelineOutput {
    /// The model fitted on fold 0's training split.
    pub model: FoldFit,
    pub report: FairnessReport,
}

/// The complete two-step protocol: preprocess, fit the teacher, distill with
/// `alpha_kg`, train end-to-end with `alpha`, and evaluate per fold. The
/// `alpha_kg = 0` and `alpha = 0` settings are exactly the single-step
/// ablations.
pub fn two_step_train(
    cohort: &Cohort,
    config: &TrainConfig,
    gbdt: &GbdtParams,
) -> Result<PipelineOutput> {
    cohort.validate()?;
    let cohort = impute_missing(cohort);
    let n = cohort.n_rows();
    let plan = kfold_split(n, config.folds, rng::derive(config.seed, "folds"))?;
    let sens_col = cohort.sensitive_column(&config.sensitive)?;
    let (group_ids, _) = encode_groups(&sens_col.values);

    let first_fit: RefCell<Option<FoldFit>> = RefCell::new(None);
    let report = evaluate_folds(
        &config.sensitive,
        &cohort.labels,
        &group_ids,
        &plan,
        config.threshold,
        |fold, train, test| {
            let fit = fit_fold(&cohort, train, fold, config, gbdt, None)?;
            let scores = fit.score_rows(test)?;
            if fold == 0 {
                *first_fit.borrow_mut() = Some(fit);
            }
            Ok(scores)
        },
    )?;
    let model = first_fit
        .into_inner()
        .ok_or_else(|| Error::State("no fold was fitted".into()))?;
    Ok(PipelineOutput { model, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{synth_generate, GroupSpec, SynthConfig};

    fn biased_config(n: usize, seed: u64) -> SynthConfig {
        SynthConfig {
            n_rows: n,
            n_numeric: 4,
            n_categorical: 2,
            group_spec: vec![
                GroupSpec {
                    label: "A".into(),
                    proportion: 0.6,
                    base_rate_shift: 1.0,
                },
                GroupSpec {
                    label: "B".into(),
                    proportion: 0.4,
                    base_rate_shift: -1.0,
                },
            ],
            label_noise: 0.05,
            signal_weights: vec![0.8, 0.8, 0.6, 0.6, 0.3, 0.3],
            seed,
            cat_cardinality: 4,
            n_proxy: 2,
            proxy_strength: 1.0,
            sensitive_name: "group".into(),
        }
    }

    fn small_pipeline_config(alpha: f64, alpha_kg: f64) -> (TrainConfig, GbdtParams) {
        let config = TrainConfig {
            alpha,
            alpha_kg,
            folds: 3,
            epochs: 3,
            n_groups: 3,
            d_leaf: 4,
            student_hidden: vec![16, 8],
            deep_hidden: vec![8],
            seed: 11,
            ..TrainConfig::default()
        };
        let gbdt = GbdtParams {
            n_trees: 15,
            max_depth: 3,
            min_samples_leaf: 5,
            ..GbdtParams::default()
        };
        (config, gbdt)
    }

    #[test]
    fn undebiased_pipeline_logs_zero_fairness_terms() {
        let cohort = synth_generate(&biased_config(400, 3)).unwrap();
        let (config, gbdt) = small_pipeline_config(0.0, 0.0);
        let out = two_step_train(&cohort, &config, &gbdt).unwrap();
        assert!(out
            .model
            .train_log
            .epoch_fairness
            .iter()
            .all(|&f| f == 0.0));
        assert!(out
            .model
            .distill_log
            .groups
            .iter()
            .all(|g| g.epoch_fairness.iter().all(|&f| f == 0.0)));
        assert_eq!(out.report.folds.len(), 3);
    }

    #[test]
    fn pipeline_is_deterministic() {
        let cohort = synth_generate(&biased_config(300, 5)).unwrap();
        let (config, gbdt) = small_pipeline_config(0.5, 0.5);
        let a = two_step_train(&cohort, &config, &gbdt).unwrap();
        let b = two_step_train(&cohort, &config, &gbdt).unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(a.model.model, b.model.model);
    }

    #[test]
    fn cached_teacher_reproduces_uncached_fit() {
        let cohort = synth_generate(&biased_config(300, 7)).unwrap();
        let cohort = impute_missing(&cohort);
        let (config, gbdt) = small_pipeline_config(0.0, 0.0);
        let plan = kfold_split(cohort.n_rows(), 3, rng::derive(config.seed, "folds")).unwrap();
        let train = plan.train_rows(1);
        let fresh = fit_fold(&cohort, &train, 1, &config, &gbdt, None).unwrap();
        let cached = fit_fold(
            &cohort,
            &train,
            1,
            &config,
            &gbdt,
            Some(fresh.teacher.clone()),
        )
        .unwrap();
        assert_eq!(fresh.model, cached.model);
        assert_eq!(fresh.teacher, cached.teacher);
    }

    #[test]
    fn majority_label_prefers_largest_group() {
        let cohort = synth_generate(&biased_config(200, 9)).unwrap();
        let rows: Vec<usize> = (0..cohort.n_rows()).collect();
        let label = majority_label(&cohort, &rows, "group", None).unwrap();
        assert_eq!(label, "A"); // 60% proportion
        let forced = majority_label(&cohort, &rows, "group", Some("B")).unwrap();
        assert_eq!(forced, "B");
        assert!(majority_label(&cohort, &rows, "group", Some("Z")).is_err());
    }
}
