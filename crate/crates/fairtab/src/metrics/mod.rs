//! Evaluation and audit quantities: ROC AUC, demographic parity difference,
//! equalized odds difference, the trainable fairness penalty, subgroup
//! receiving/failure rates, Pearson correlation, and the cross-validated
//! fairness report.

mod auc;
mod parity;
mod rates;
mod report;

pub use auc::roc_auc;
pub use parity::{binarize, dpd, eod, fairness_loss, fairness_loss_with_grad, EodDetail};
pub use rates::{cohort_rates, pearson, CohortRates, SubgroupCounts, SubgroupRates};
pub use report::{evaluate_folds, encode_groups, FairnessReport, FoldMetrics};

use crate::error::{Error, Result};

/// Scores, labels, and group ids bundled for joint metric evaluation.
#[derive(Debug, Clone)]
pub struct GroupedPredictions {
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
    pub groups: Vec<usize>,
    pub threshold: f64,
}

impl GroupedPredictions {
    pub fn new(scores: Vec<f64>, labels: Vec<u8>, groups: Vec<usize>) -> Result<Self> {
        if scores.len() != labels.len() || scores.len() != groups.len() {
            return Err(Error::Shape(format!(
                "scores/labels/groups lengths differ: {}/{}/{}",
                scores.len(),
                labels.len(),
                groups.len()
            )));
        }
        Ok(GroupedPredictions {
            scores,
            labels,
            groups,
            threshold: 0.5,
        })
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    /// AUC, DPD and EOD in one pass; EOD warnings are folded into the detail.
    pub fn metrics(&self) -> Result<(f64, f64, EodDetail)> {
        let auc = roc_auc(&self.scores, &self.labels)?;
        let preds = binarize(&self.scores, self.threshold);
        let dpd = dpd(&preds, &self.groups)?;
        let eod = eod(&preds, &self.labels, &self.groups)?;
        Ok((auc, dpd, eod))
    }
}
