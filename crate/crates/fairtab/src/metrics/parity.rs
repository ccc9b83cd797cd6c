//! Group fairness metrics and the differentiable fairness penalty.

use crate::error::{Error, Result};
use std::collections::BTreeMap;

/// Threshold scores into binary predictions: 1 iff `score >= threshold`.
pub fn binarize(scores: &[f64], threshold: f64) -> Vec<u8> {
    scores.iter().map(|&s| u8::from(s >= threshold)).collect()
}

/// Demographic parity difference: max − min of P(ŷ=1 | group).
pub fn dpd(preds: &[u8], groups: &[usize]) -> Result<f64> {
    if preds.len() != groups.len() {
        return Err(Error::Shape("preds/groups length mismatch".into()));
    }
    let mut counts: BTreeMap<usize, (u64, u64)> = BTreeMap::new();
    for (&p, &g) in preds.iter().zip(groups) {
        let e = counts.entry(g).or_insert((0, 0));
        e.0 += u64::from(p == 1);
        e.1 += 1;
    }
    if counts.len() < 2 {
        return Err(Error::UndefinedMetric(
            "demographic parity needs at least 2 groups".into(),
        ));
    }
    let rates: Vec<f64> = counts
        .values()
        .map(|&(pos, total)| pos as f64 / total as f64)
        .collect();
    let max = rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = rates.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(max - min)
}

/// Outcome of an equalized-odds evaluation. Groups lacking positives (or
/// negatives) are excluded from the corresponding rate's spread with a
/// warning instead of failing the whole evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EodDetail {
    pub value: f64,
    /// Groups excluded from the TPR spread (no positive labels).
    pub tpr_excluded: Vec<usize>,
    /// Groups excluded from the FPR spread (no negative labels).
    pub fpr_excluded: Vec<usize>,
}

/// Equalized odds difference: the larger of the across-group TPR spread and
/// FPR spread.
pub fn eod(preds: &[u8], labels: &[u8], groups: &[usize]) -> Result<EodDetail> {
    if preds.len() != labels.len() || preds.len() != groups.len() {
        return Err(Error::Shape("preds/labels/groups length mismatch".into()));
    }
    // per group: (tp, fn, fp, tn)
    let mut counts: BTreeMap<usize, (u64, u64, u64, u64)> = BTreeMap::new();
    for ((&p, &y), &g) in preds.iter().zip(labels).zip(groups) {
        let e = counts.entry(g).or_insert((0, 0, 0, 0));
        match (p, y) {
            (1, 1) => e.0 += 1,
            (0, 1) => e.1 += 1,
            (1, 0) => e.2 += 1,
            (0, 0) => e.3 += 1,
            _ => return Err(Error::Data("predictions and labels must be 0/1".into())),
        }
    }

    let mut tprs = Vec::new();
    let mut fprs = Vec::new();
    let mut tpr_excluded = Vec::new();
    let mut fpr_excluded = Vec::new();
    for (&g, &(tp, fneg, fp, tn)) in &counts {
        if tp + fneg > 0 {
            tprs.push(tp as f64 / (tp + fneg) as f64);
        } else {
            tpr_excluded.push(g);
        }
        if fp + tn > 0 {
            fprs.push(fp as f64 / (fp + tn) as f64);
        } else {
            fpr_excluded.push(g);
        }
    }

    let spread = |rates: &[f64]| -> Option<f64> {
        if rates.len() < 2 {
            return None;
        }
        let max = rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = rates.iter().cloned().fold(f64::INFINITY, f64::min);
        Some(max - min)
    };

    match (spread(&tprs), spread(&fprs)) {
        (Some(t), Some(f)) => Ok(EodDetail {
            value: t.max(f),
            tpr_excluded,
            fpr_excluded,
        }),
        (Some(t), None) => Ok(EodDetail {
            value: t,
            tpr_excluded,
            fpr_excluded,
        }),
        (None, Some(f)) => Ok(EodDetail {
            value: f,
            tpr_excluded,
            fpr_excluded,
        }),
        (None, None) => Err(Error::UndefinedMetric(
            "equalized odds needs 2 groups with defined rates".into(),
        )),
    }
}

/// Squared gap between the batch mean prediction and the majority-group mean:
/// `(mean(scores) − mean(scores[maj]))²`. Returns `None` when the batch holds
/// no majority members, signalling the caller to skip the term.
pub fn fairness_loss(scores: &[f64], maj_mask: &[bool]) -> Option<f64> {
    fairness_loss_with_grad(scores, maj_mask).map(|(loss, _)| loss)
}

/// Fairness penalty and its gradient w.r.t. every score.
pub fn fairness_loss_with_grad(scores: &[f64], maj_mask: &[bool]) -> Option<(f64, Vec<f64>)> {
    assert_eq!(scores.len(), maj_mask.len(), "mask length mismatch");
    let n = scores.len();
    let n_maj = maj_mask.iter().filter(|&&m| m).count();
    if n == 0 || n_maj == 0 {
        return None;
    }
    let mean: f64 = scores.iter().sum::<f64>() / n as f64;
    let mean_maj: f64 = scores
        .iter()
        .zip(maj_mask)
        .filter(|(_, &m)| m)
        .map(|(&s, _)| s)
        .sum::<f64>()
        / n_maj as f64;
    let gap = mean - mean_maj;
    let grad: Vec<f64> = maj_mask
        .iter()
        .map(|&m| {
            let d_mean = 1.0 / n as f64;
            let d_maj = if m { 1.0 / n_maj as f64 } else { 0.0 };
            2.0 * gap * (d_mean - d_maj)
        })
        .collect();
    Some((gap * gap, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use std::collections::BTreeSet;

    #[test]
    fn binarize_uses_geq_threshold() {
        assert_eq!(binarize(&[0.4, 0.6], 0.5), vec![0, 1]);
        assert_eq!(binarize(&[0.5], 0.5), vec![1]);
        assert_eq!(binarize(&[0.2, 0.9, 1.0], 1.1), vec![0, 0, 0]);
    }

    #[test]
    fn dpd_cases() {
        assert_eq!(dpd(&[1, 0, 1, 0], &[0, 0, 1, 1]).unwrap(), 0.0);
        assert_eq!(dpd(&[1, 1, 0, 0], &[0, 0, 1, 1]).unwrap(), 1.0);
        // A: 2/3, B: 1/2, C: 1/4 -> 2/3 - 1/4 = 5/12
        let preds = [1, 0, 1, 1, 0, 0, 0, 0, 1];
        let groups = [0, 0, 0, 1, 1, 2, 2, 2, 2];
        let d = dpd(&preds, &groups).unwrap();
        assert!((d - 5.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn dpd_single_group_is_undefined() {
        assert!(dpd(&[1, 0], &[0, 0]).is_err());
    }

    #[test]
    fn eod_perfect_predictor_is_zero() {
        let labels = [1, 0, 1, 0, 1, 0];
        let groups = [0, 0, 0, 1, 1, 1];
        let detail = eod(&labels, &labels, &groups).unwrap();
        assert_eq!(detail.value, 0.0);
    }

    #[test]
    fn eod_opposite_groups_is_one() {
        // A: TPR=1, FPR=0; B: TPR=0, FPR=1
        let preds = [1, 0, 0, 1];
        let labels = [1, 0, 1, 0];
        let groups = [0, 0, 1, 1];
        assert_eq!(eod(&preds, &labels, &groups).unwrap().value, 1.0);
    }

    #[test]
    fn eod_half_case() {
        // A: labels [1,1,0] preds [1,0,0] -> TPR 1/2, FPR 0
        // B: labels [1,0,0] preds [1,1,0] -> TPR 1, FPR 1/2
        let preds = [1, 0, 0, 1, 1, 0];
        let labels = [1, 1, 0, 1, 0, 0];
        let groups = [0, 0, 0, 1, 1, 1];
        let detail = eod(&preds, &labels, &groups).unwrap();
        assert!((detail.value - 0.5).abs() < 1e-15);
    }

    #[test]
    fn eod_excludes_degenerate_group_with_warning() {
        // group 1 has no positives: excluded from the TPR spread
        let preds = [1, 0, 1, 0, 0, 1];
        let labels = [1, 0, 1, 0, 0, 0];
        let groups = [0, 0, 0, 1, 1, 1];
        let detail = eod(&preds, &labels, &groups).unwrap();
        assert_eq!(detail.tpr_excluded, vec![1]);
        // FPR: group 0 -> 0/1, group 1 -> 1/3; only the FPR spread is defined
        assert!((detail.value - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn fairness_loss_cases() {
        let constant = fairness_loss(&[0.7, 0.7, 0.7], &[true, false, false]).unwrap();
        assert!(constant.abs() < 1e-30);
        let (loss, _) = fairness_loss_with_grad(&[1.0, 1.0, 0.0, 0.0], &[true, true, false, false]).unwrap();
        assert!((loss - 0.25).abs() < 1e-15);
        assert_eq!(fairness_loss(&[0.2, 0.9], &[true, true]), Some(0.0));
        assert_eq!(fairness_loss(&[0.2, 0.9], &[false, false]), None);
    }

    #[test]
    fn fairness_grad_matches_finite_differences() {
        let mut rng = crate::rng::stream(3, "fair-grad");
        for _ in 0..20 {
            let n = rng.gen_range(2..=16);
            let scores: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let mut mask: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
            mask[0] = true;
            let (_, grad) = fairness_loss_with_grad(&scores, &mask).unwrap();
            let eps = 1e-6;
            for i in 0..n {
                let mut plus = scores.clone();
                plus[i] += eps;
                let mut minus = scores.clone();
                minus[i] -= eps;
                let fd = (fairness_loss(&plus, &mask).unwrap()
                    - fairness_loss(&minus, &mask).unwrap())
                    / (2.0 * eps);
                let denom = grad[i].abs().max(fd.abs()).max(1.0);
                assert!(
                    ((grad[i] - fd) / denom).abs() < 1e-6,
                    "analytic {} vs fd {fd}",
                    grad[i]
                );
            }
        }
    }

    /// Brute-force group-conditional counting oracle for DPD and EOD.
    fn dpd_oracle(preds: &[u8], groups: &[usize]) -> f64 {
        let ids: BTreeSet<usize> = groups.iter().copied().collect();
        let rates: Vec<f64> = ids
            .iter()
            .map(|&g| {
                let members: Vec<usize> =
                    (0..preds.len()).filter(|&i| groups[i] == g).collect();
                members.iter().map(|&i| f64::from(preds[i])).sum::<f64>() / members.len() as f64
            })
            .collect();
        rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - rates.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn dpd_matches_counting_oracle_on_random_instances() {
        let mut rng = crate::rng::stream(77, "dpd-oracle");
        for _ in 0..500 {
            let n = rng.gen_range(4..=50);
            let n_groups = rng.gen_range(2..=4);
            let preds: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2) as u8).collect();
            let mut groups: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n_groups)).collect();
            for g in 0..n_groups {
                groups[g] = g; // every group nonempty
            }
            let fast = dpd(&preds, &groups).unwrap();
            let slow = dpd_oracle(&preds, &groups);
            assert!((fast - slow).abs() < 1e-12);
        }
    }
}
