//! `fairtab ablate`: the four-way debiasing comparison with shared teachers
//! and folds.

use crate::cli::config::ExperimentConfig;
use crate::cli::manifest::Manifest;
use crate::cli::train::{save_artifact, write_report_csv, RunReport, TrainedArtifact, REPORT_FORMAT};
use crate::cli::TrainFlags;
use crate::dataio::{impute_missing, kfold_split};
use crate::error::{Error, Result};
use crate::fusion::{fit_fold, FoldFit, TrainConfig};
use crate::metrics::{binarize, dpd, encode_groups, eod, roc_auc, FairnessReport, FoldMetrics};
use crate::persist;
use crate::rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// The four configurations of the ablation, in presentation order.
const ROWS: [(&str, bool, bool); 4] = [
    ("full", true, true),
    ("wo_first_step", false, true),
    ("wo_second_step", true, false),
    ("undebiased", false, false),
];

#[derive(Debug, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<RunReport>,
    /// Content hash of each fold's shared teacher, in fold order.
    pub teacher_hashes: Vec<String>,
}

pub fn cmd_ablate(flags: &TrainFlags) -> Result<()> {
    let mut config = match &flags.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    config.apply_flags(flags)?;
    if config.train.alpha <= 0.0 || config.train.alpha_kg <= 0.0 {
        return Err(Error::Config(
            "ablation needs positive alpha and alpha-kg for the debiased rows".into(),
        ));
    }

    let cohort = impute_missing(&config.load_cohort()?);
    cohort.validate()?;
    let train_cfg = &config.train;
    let plan = kfold_split(
        cohort.n_rows(),
        train_cfg.folds,
        rng::derive(train_cfg.seed, "folds"),
    )?;
    let sens_col = cohort.sensitive_column(&train_cfg.sensitive)?;
    let (group_ids, _names) = encode_groups(&sens_col.values);
    let labels = cohort.labels.clone();

    // per fold: one shared teacher, four (distill + end-to-end) passes
    struct FoldResult {
        metrics: Vec<FoldMetrics>, // one per ablation row
        teacher_hash: String,
        fold0_full: Option<Box<FoldFit>>,
    }
    let run_one = |fold: usize| -> Result<FoldResult> {
        let train = plan.train_rows(fold);
        let test = plan.test_rows(fold);
        let test_labels: Vec<u8> = test.iter().map(|&i| labels[i]).collect();
        let test_groups: Vec<usize> = test.iter().map(|&i| group_ids[i]).collect();
        let mut teacher = None;
        let mut metrics = Vec::with_capacity(ROWS.len());
        let mut fold0_full = None;
        let mut teacher_hash = String::new();
        for (name, use_first, use_second) in ROWS {
            let row_cfg = TrainConfig {
                alpha_kg: if use_first { train_cfg.alpha_kg } else { 0.0 },
                alpha: if use_second { train_cfg.alpha } else { 0.0 },
                ..train_cfg.clone()
            };
            let fit = fit_fold(&cohort, &train, fold, &row_cfg, &config.gbdt, teacher.clone())?;
            if teacher.is_none() {
                teacher_hash = persist::hash_value(&fit.teacher)?;
                teacher = Some(fit.teacher.clone());
            }
            let scores = fit.score_rows(&test)?;
            let auc = roc_auc(&scores, &test_labels)?;
            let preds = binarize(&scores, train_cfg.threshold);
            let dpd_v = dpd(&preds, &test_groups)?;
            let eod_v = eod(&preds, &test_labels, &test_groups)?.value;
            metrics.push(FoldMetrics {
                auc,
                dpd: dpd_v,
                eod: eod_v,
            });
            if fold == 0 && name == "full" {
                fold0_full = Some(Box::new(fit));
            }
        }
        Ok(FoldResult {
            metrics,
            teacher_hash,
            fold0_full,
        })
    };

    let fold_results: Vec<FoldResult> = if config.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
        pool.install(|| (0..plan.k).into_par_iter().map(run_one).collect::<Result<Vec<_>>>())?
    } else {
        (0..plan.k).map(run_one).collect::<Result<Vec<_>>>()?
    };

    let config_hash = persist::hash_value(&config)?;
    let mut rows = Vec::with_capacity(ROWS.len());
    for (i, (name, use_first, use_second)) in ROWS.iter().enumerate() {
        let folds: Vec<FoldMetrics> = fold_results.iter().map(|f| f.metrics[i]).collect();
        let report = FairnessReport::aggregate(&train_cfg.sensitive, train_cfg.threshold, folds, vec![]);
        rows.push(RunReport {
            command: "ablate".into(),
            model: format!("fair/{name}"),
            sensitive: train_cfg.sensitive.clone(),
            seed: train_cfg.seed,
            folds: train_cfg.folds,
            threshold: train_cfg.threshold,
            alpha: if *use_second { train_cfg.alpha } else { 0.0 },
            alpha_kg: if *use_first { train_cfg.alpha_kg } else { 0.0 },
            config_hash: config_hash.clone(),
            group_rates: vec![],
            report,
        });
    }

    let out = &flags.out;
    std::fs::create_dir_all(out)?;
    let ablation = AblationReport {
        rows,
        teacher_hashes: fold_results.iter().map(|f| f.teacher_hash.clone()).collect(),
    };
    let json_path = out.join("ablation.json");
    persist::save_json(&json_path, REPORT_FORMAT, 1, &ablation.rows)?;
    let hashes_path = out.join("teachers.json");
    std::fs::write(
        &hashes_path,
        serde_json::to_string_pretty(&ablation.teacher_hashes)?,
    )?;
    let csv_path = out.join("ablation.csv");
    write_report_csv(&csv_path, &ablation.rows.iter().collect::<Vec<_>>())?;

    let mut model_files = Vec::new();
    if let Some(fit) = fold_results.into_iter().next().and_then(|f| f.fold0_full) {
        model_files = save_artifact(out, &config_hash, &TrainedArtifact::Fused(fit))?;
    }

    let mut manifest = Manifest::new("ablate", train_cfg.seed, config_hash);
    if let Some(cfg) = &flags.config {
        manifest.record_input(cfg)?;
    }
    if let Some(dataset) = &config.dataset {
        manifest.record_input(dataset)?;
    }
    manifest.record_output(&json_path)?;
    manifest.record_output(&csv_path)?;
    manifest.record_output(&hashes_path)?;
    for f in &model_files {
        manifest.record_output(f)?;
    }
    manifest.write(out)?;

    for row in &ablation.rows {
        println!(
            "ablate[{}]: auc {:.3} dpd {:.3} eod {:.3}",
            row.model, row.report.mean.auc, row.report.mean.dpd, row.report.mean.eod
        );
    }
    Ok(())
}
