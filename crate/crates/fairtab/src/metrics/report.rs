//! Cross-validated fairness reporting.

use crate::dataio::FoldPlan;
use crate::error::Result;
use crate::metrics::{binarize, dpd, eod, roc_auc};
use serde::{Deserialize, Serialize};

/// AUC / DPD / EOD triple for one fold (or an aggregate of folds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub auc: f64,
    pub dpd: f64,
    pub eod: f64,
}

/// Per-fold metrics for one sensitive attribute with mean and population
/// standard deviation across folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub attribute: String,
    pub threshold: f64,
    pub folds: Vec<FoldMetrics>,
    pub mean: FoldMetrics,
    pub std: FoldMetrics,
    pub warnings: Vec<String>,
}

impl FairnessReport {
    pub fn aggregate(
        attribute: &str,
        threshold: f64,
        folds: Vec<FoldMetrics>,
        warnings: Vec<String>,
    ) -> FairnessReport {
        let k = folds.len().max(1) as f64;
        let mean = FoldMetrics {
            auc: folds.iter().map(|f| f.auc).sum::<f64>() / k,
            dpd: folds.iter().map(|f| f.dpd).sum::<f64>() / k,
            eod: folds.iter().map(|f| f.eod).sum::<f64>() / k,
        };
        let var = |sel: fn(&FoldMetrics) -> f64, m: f64| {
            folds.iter().map(|f| (sel(f) - m) * (sel(f) - m)).sum::<f64>() / k
        };
        let std = FoldMetrics {
            auc: var(|f| f.auc, mean.auc).sqrt(),
            dpd: var(|f| f.dpd, mean.dpd).sqrt(),
            eod: var(|f| f.eod, mean.eod).sqrt(),
        };
        FairnessReport {
            attribute: attribute.to_string(),
            threshold,
            folds,
            mean,
            std,
            warnings,
        }
    }
}

/// Map group label strings to dense ids in first-appearance order.
pub fn encode_groups(values: &[String]) -> (Vec<usize>, Vec<String>) {
    let mut names: Vec<String> = Vec::new();
    let mut ids = Vec::with_capacity(values.len());
    for v in values {
        match names.iter().position(|n| n == v) {
            Some(i) => ids.push(i),
            None => {
                ids.push(names.len());
                names.push(v.clone());
            }
        }
    }
    (ids, names)
}

/// Train on each fold's complement and score its held-out rows, aggregating
/// AUC/DPD/EOD. `fit_score(fold, train_rows, test_rows)` returns scores for
/// the test rows in order.
pub fn evaluate_folds<F>(
    attribute: &str,
    labels: &[u8],
    groups: &[usize],
    plan: &FoldPlan,
    threshold: f64,
    fit_score: F,
) -> Result<FairnessReport>
where
    F: Fn(usize, &[usize], &[usize]) -> Result<Vec<f64>>,
{
    let mut folds = Vec::with_capacity(plan.k);
    let mut warnings = Vec::new();
    for fold in 0..plan.k {
        let train = plan.train_rows(fold);
        let test = plan.test_rows(fold);
        let scores = fit_score(fold, &train, &test)?;
        let test_labels: Vec<u8> = test.iter().map(|&i| labels[i]).collect();
        let test_groups: Vec<usize> = test.iter().map(|&i| groups[i]).collect();
        let auc = roc_auc(&scores, &test_labels)?;
        let preds = binarize(&scores, threshold);
        let dpd_v = dpd(&preds, &test_groups)?;
        let eod_d = eod(&preds, &test_labels, &test_groups)?;
        for g in &eod_d.tpr_excluded {
            warnings.push(format!("fold {fold}: group {g} lacks positives, excluded from TPR spread"));
        }
        for g in &eod_d.fpr_excluded {
            warnings.push(format!("fold {fold}: group {g} lacks negatives, excluded from FPR spread"));
        }
        folds.push(FoldMetrics {
            auc,
            dpd: dpd_v,
            eod: eod_d.value,
        });
    }
    Ok(FairnessReport::aggregate(attribute, threshold, folds, warnings))
}
