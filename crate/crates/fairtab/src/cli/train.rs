//! `fairtab train`: cross-validated training of one model with a fairness
//! report, optional parallelism over folds, and serialized artifacts.

use crate::baselines::{fit_logistic, fit_meld_classifier, LogisticModel};
use crate::cli::config::{ExperimentConfig, ModelKind};
use crate::cli::manifest::Manifest;
use crate::cli::TrainFlags;
use crate::dataio::{
    build_feature_views, fit_vocabs, impute_missing, kfold_split, Cohort, FoldPlan, Standardizer,
    Vocab,
};
use crate::error::{Error, Result};
use crate::fusion::{fit_fold, FoldFit, FusionModel};
use crate::metrics::{
    binarize, dpd, encode_groups, eod, roc_auc, FairnessReport, FoldMetrics,
};
use crate::persist;
use crate::rng;
use crate::trees::{
    fit_gbdt, fit_random_forest, predict_proba, rf_predict_proba, GbdtModel, GbdtParams, RfModel,
    XMatrix,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// The JSON payload written by `train` and aggregated by `report`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub model: String,
    pub sensitive: String,
    pub seed: u64,
    pub folds: usize,
    pub threshold: f64,
    pub alpha: f64,
    pub alpha_kg: f64,
    pub config_hash: String,
    /// Mean positive-prediction rate per group over held-out folds.
    pub group_rates: Vec<(String, f64)>,
    pub report: FairnessReport,
}

pub const REPORT_FORMAT: &str = "fairtab-report";

/// Fit/score every fold (in parallel when `jobs > 1`), compute AUC/DPD/EOD
/// per fold, and keep fold 0's artifact. Results are aggregated in fold
/// order, so the report is identical for any worker count.
pub fn run_folds<A, F>(
    attribute: &str,
    labels: &[u8],
    group_ids: &[usize],
    group_names: &[String],
    plan: &FoldPlan,
    threshold: f64,
    jobs: usize,
    fit: F,
) -> Result<(FairnessReport, Vec<(String, f64)>, A)>
where
    A: Send,
    F: Fn(usize, &[usize], &[usize]) -> Result<(Vec<f64>, A)> + Sync,
{
    let run_one = |fold: usize| -> Result<(Vec<f64>, Vec<usize>, A)> {
        let train = plan.train_rows(fold);
        let test = plan.test_rows(fold);
        let (scores, artifact) = fit(fold, &train, &test)?;
        if scores.len() != test.len() {
            return Err(Error::Shape("scorer returned wrong row count".into()));
        }
        Ok((scores, test, artifact))
    };

    let mut fold_outputs: Vec<(Vec<f64>, Vec<usize>, A)> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
        pool.install(|| (0..plan.k).into_par_iter().map(run_one).collect::<Result<Vec<_>>>())?
    } else {
        (0..plan.k).map(run_one).collect::<Result<Vec<_>>>()?
    };

    let mut folds = Vec::with_capacity(plan.k);
    let mut warnings = Vec::new();
    let mut rate_sum = vec![0.0; group_names.len()];
    let mut rate_folds = vec![0usize; group_names.len()];
    for (fold, (scores, test, _)) in fold_outputs.iter().enumerate() {
        let test_labels: Vec<u8> = test.iter().map(|&i| labels[i]).collect();
        let test_groups: Vec<usize> = test.iter().map(|&i| group_ids[i]).collect();
        let auc = roc_auc(scores, &test_labels)?;
        let preds = binarize(scores, threshold);
        let dpd_v = dpd(&preds, &test_groups)?;
        let eod_d = eod(&preds, &test_labels, &test_groups)?;
        for g in &eod_d.tpr_excluded {
            warnings.push(format!(
                "fold {fold}: group {} lacks positives, excluded from TPR spread",
                group_names[*g]
            ));
        }
        for g in &eod_d.fpr_excluded {
            warnings.push(format!(
                "fold {fold}: group {} lacks negatives, excluded from FPR spread",
                group_names[*g]
            ));
        }
        folds.push(FoldMetrics {
            auc,
            dpd: dpd_v,
            eod: eod_d.value,
        });
        for g in 0..group_names.len() {
            let members: Vec<usize> = (0..preds.len()).filter(|&i| test_groups[i] == g).collect();
            if !members.is_empty() {
                rate_sum[g] += members.iter().map(|&i| f64::from(preds[i])).sum::<f64>()
                    / members.len() as f64;
                rate_folds[g] += 1;
            }
        }
    }
    let report = FairnessReport::aggregate(attribute, threshold, folds, warnings);
    let group_rates: Vec<(String, f64)> = group_names
        .iter()
        .enumerate()
        .map(|(g, name)| {
            let rate = if rate_folds[g] > 0 {
                rate_sum[g] / rate_folds[g] as f64
            } else {
                0.0
            };
            (name.clone(), rate)
        })
        .collect();
    let artifact = fold_outputs.swap_remove(0).2;
    Ok((report, group_rates, artifact))
}

/// Per-fold preprocessing shared by the linear and tree baselines.
struct FoldViews {
    views: crate::dataio::FeatureViews,
    standardizer: Standardizer,
}

fn prepare_views(cohort: &Cohort, train: &[usize], standardize: bool) -> Result<FoldViews> {
    let vocabs = fit_vocabs(cohort, train)?;
    let views = build_feature_views(cohort, &vocabs)?;
    let standardizer = if standardize {
        Standardizer::fit(&views, train)
    } else {
        Standardizer::identity(views.d_cols)
    };
    Ok(FoldViews {
        views,
        standardizer,
    })
}

/// Design matrix for logistic models: standardized dense ‖ one-hot sparse.
fn design_row(fv: &FoldViews, row: usize) -> Vec<f64> {
    let mut dense = fv.views.dense_row(row).to_vec();
    fv.standardizer.transform_row(&mut dense);
    dense.extend(fv.views.onehot_row(row));
    dense
}

/// One serializable artifact per model family.
pub enum TrainedArtifact {
    Linear(LogisticModel),
    Forest(RfModel),
    Boosted(GbdtModel),
    Fused(Box<FoldFit>),
}

/// Serialized companion for a fused model: everything needed to score new
/// rows plus the hash of the teacher it was distilled from.
#[derive(Serialize, Deserialize)]
pub struct FusionBundle {
    pub config_hash: String,
    pub teacher_hash: String,
    pub maj_label: String,
    pub vocabs: Vec<Vocab>,
    pub standardizer: Standardizer,
    pub model: FusionModel,
}

pub fn train_run(config: &ExperimentConfig) -> Result<(RunReport, TrainedArtifact)> {
    let cohort = impute_missing(&config.load_cohort()?);
    cohort.validate()?;
    let n = cohort.n_rows();
    let train_cfg = &config.train;
    let plan = kfold_split(n, train_cfg.folds, rng::derive(train_cfg.seed, "folds"))?;
    let sens_col = cohort.sensitive_column(&train_cfg.sensitive)?;
    let (group_ids, group_names) = encode_groups(&sens_col.values);
    let labels = cohort.labels.clone();
    let standardize = !train_cfg.no_standardize;

    let (report, group_rates, artifact) = match config.model {
        ModelKind::Meld => {
            let Some((_, score_col)) = &cohort.score else {
                return Err(Error::Config(
                    "the meld baseline needs a score column in the schema".into(),
                ));
            };
            let scores_full: Vec<f64> = score_col.iter().map(|v| v.unwrap_or(0.0)).collect();
            let (report, rates, model) = run_folds(
                &train_cfg.sensitive,
                &labels,
                &group_ids,
                &group_names,
                &plan,
                train_cfg.threshold,
                config.jobs,
                |_fold, train, test| {
                    let train_scores: Vec<f64> = train.iter().map(|&r| scores_full[r]).collect();
                    let train_labels: Vec<u8> = train.iter().map(|&r| labels[r]).collect();
                    let (model, warning) =
                        fit_meld_classifier(&train_scores, &train_labels, &config.logistic)?;
                    if let Some(w) = warning {
                        eprintln!("warning: {w}");
                    }
                    let scores = test
                        .iter()
                        .map(|&r| model.predict(&[scores_full[r]]))
                        .collect::<Result<Vec<f64>>>()?;
                    Ok((scores, model))
                },
            )?;
            (report, rates, TrainedArtifact::Linear(model))
        }
        ModelKind::Logistic => {
            let (report, rates, model) = run_folds(
                &train_cfg.sensitive,
                &labels,
                &group_ids,
                &group_names,
                &plan,
                train_cfg.threshold,
                config.jobs,
                |_fold, train, test| {
                    let fv = prepare_views(&cohort, train, standardize)?;
                    let width = fv.views.d_cols + fv.views.onehot_dim;
                    let mut x = Vec::with_capacity(train.len() * width);
                    for &r in train {
                        x.extend(design_row(&fv, r));
                    }
                    let train_labels: Vec<u8> = train.iter().map(|&r| labels[r]).collect();
                    let model = fit_logistic(
                        XMatrix::new(&x, train.len(), width),
                        &train_labels,
                        &config.logistic,
                    )?;
                    let scores = test
                        .iter()
                        .map(|&r| model.predict(&design_row(&fv, r)))
                        .collect::<Result<Vec<f64>>>()?;
                    Ok((scores, model))
                },
            )?;
            (report, rates, TrainedArtifact::Linear(model))
        }
        ModelKind::Rf => {
            let (report, rates, model) = run_folds(
                &train_cfg.sensitive,
                &labels,
                &group_ids,
                &group_names,
                &plan,
                train_cfg.threshold,
                config.jobs,
                |fold, train, test| {
                    let fv = prepare_views(&cohort, train, false)?;
                    let mut x = Vec::with_capacity(train.len() * fv.views.d_cols);
                    for &r in train {
                        x.extend_from_slice(fv.views.dense_row(r));
                    }
                    let train_labels: Vec<u8> = train.iter().map(|&r| labels[r]).collect();
                    let params = crate::trees::RfParams {
                        seed: rng::derive(train_cfg.seed, &format!("fold{fold}/rf")),
                        ..config.rf
                    };
                    let model = fit_random_forest(
                        XMatrix::new(&x, train.len(), fv.views.d_cols),
                        &train_labels,
                        &params,
                    )?;
                    let scores = test
                        .iter()
                        .map(|&r| rf_predict_proba(&model, fv.views.dense_row(r)))
                        .collect::<Result<Vec<f64>>>()?;
                    Ok((scores, model))
                },
            )?;
            (report, rates, TrainedArtifact::Forest(model))
        }
        ModelKind::Gbdt => {
            let (report, rates, model) = run_folds(
                &train_cfg.sensitive,
                &labels,
                &group_ids,
                &group_names,
                &plan,
                train_cfg.threshold,
                config.jobs,
                |fold, train, test| {
                    let fv = prepare_views(&cohort, train, false)?;
                    let mut x = Vec::with_capacity(train.len() * fv.views.d_cols);
                    for &r in train {
                        x.extend_from_slice(fv.views.dense_row(r));
                    }
                    let train_labels: Vec<u8> = train.iter().map(|&r| labels[r]).collect();
                    let params = GbdtParams {
                        seed: rng::derive(train_cfg.seed, &format!("fold{fold}/teacher")),
                        ..config.gbdt
                    };
                    let model = fit_gbdt(
                        XMatrix::new(&x, train.len(), fv.views.d_cols),
                        &train_labels,
                        &params,
                    )?;
                    let scores = test
                        .iter()
                        .map(|&r| predict_proba(&model, fv.views.dense_row(r)))
                        .collect::<Result<Vec<f64>>>()?;
                    Ok((scores, model))
                },
            )?;
            (report, rates, TrainedArtifact::Boosted(model))
        }
        ModelKind::Fair => {
            let (report, rates, fit) = run_folds(
                &train_cfg.sensitive,
                &labels,
                &group_ids,
                &group_names,
                &plan,
                train_cfg.threshold,
                config.jobs,
                |fold, train, test| {
                    let fit = fit_fold(&cohort, train, fold, train_cfg, &config.gbdt, None)?;
                    let scores = fit.score_rows(test)?;
                    Ok((scores, Box::new(fit)))
                },
            )?;
            (report, rates, TrainedArtifact::Fused(fit))
        }
    };

    let run = RunReport {
        command: "train".into(),
        model: config.model.name().into(),
        sensitive: train_cfg.sensitive.clone(),
        seed: train_cfg.seed,
        folds: train_cfg.folds,
        threshold: train_cfg.threshold,
        alpha: train_cfg.alpha,
        alpha_kg: train_cfg.alpha_kg,
        config_hash: persist::hash_value(config)?,
        group_rates,
        report,
    };
    Ok((run, artifact))
}

pub fn write_report_csv(path: &Path, rows: &[&RunReport]) -> Result<()> {
    let mut text =
        String::from("model,attribute,auc_mean,auc_std,dpd_mean,dpd_std,eod_mean,eod_std\n");
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.model,
            r.sensitive,
            r.report.mean.auc,
            r.report.std.auc,
            r.report.mean.dpd,
            r.report.std.dpd,
            r.report.mean.eod,
            r.report.std.eod
        ));
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Serialize the fold-0 artifact; returns the written model files.
pub fn save_artifact(
    out: &Path,
    config_hash: &str,
    artifact: &TrainedArtifact,
) -> Result<Vec<std::path::PathBuf>> {
    let mut written = Vec::new();
    match artifact {
        TrainedArtifact::Linear(m) => {
            let path = out.join("model.json");
            persist::save_json(&path, "fairtab-logistic", 1, m)?;
            written.push(path);
        }
        TrainedArtifact::Forest(m) => {
            let path = out.join("model.json");
            persist::save_json(&path, "fairtab-rf", 1, m)?;
            written.push(path);
        }
        TrainedArtifact::Boosted(m) => {
            let path = out.join("model.json");
            persist::save_json(&path, "fairtab-gbdt", 1, m)?;
            written.push(path);
        }
        TrainedArtifact::Fused(fit) => {
            let teacher_path = out.join("teacher.json");
            persist::save_json(&teacher_path, "fairtab-gbdt", 1, &fit.teacher)?;
            let bundle = FusionBundle {
                config_hash: config_hash.to_string(),
                teacher_hash: persist::hash_file(&teacher_path)?,
                maj_label: fit.maj_label.clone(),
                vocabs: fit.views.vocabs.clone(),
                standardizer: fit.standardizer.clone(),
                model: fit.model.clone(),
            };
            let path = out.join("model.json");
            persist::save_json(&path, "fairtab-fusion", 1, &bundle)?;
            written.push(teacher_path);
            written.push(path);
        }
    }
    Ok(written)
}

pub fn cmd_train(flags: &TrainFlags) -> Result<()> {
    let mut config = match &flags.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    config.apply_flags(flags)?;

    let (run, artifact) = train_run(&config)?;

    let out = &flags.out;
    std::fs::create_dir_all(out)?;
    let report_path = out.join("report.json");
    persist::save_json(&report_path, REPORT_FORMAT, 1, &run)?;
    let csv_path = out.join("report.csv");
    write_report_csv(&csv_path, &[&run])?;
    let model_files = save_artifact(out, &run.config_hash, &artifact)?;

    let mut manifest = Manifest::new("train", run.seed, run.config_hash.clone());
    if let Some(cfg) = &flags.config {
        manifest.record_input(cfg)?;
    }
    if let Some(dataset) = &config.dataset {
        manifest.record_input(dataset)?;
    }
    manifest.record_output(&report_path)?;
    manifest.record_output(&csv_path)?;
    for f in &model_files {
        manifest.record_output(f)?;
    }
    manifest.write(out)?;

    println!(
        "train[{}]: auc {:.3}±{:.3} dpd {:.3}±{:.3} eod {:.3}±{:.3}",
        run.model,
        run.report.mean.auc,
        run.report.std.auc,
        run.report.mean.dpd,
        run.report.std.dpd,
        run.report.mean.eod,
        run.report.std.eod
    );
    Ok(())
}
