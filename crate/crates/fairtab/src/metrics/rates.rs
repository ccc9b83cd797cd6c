//! Subgroup waiting-list statistics and Pearson correlation.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Raw per-subgroup counts: waiting, receiving, and failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupCounts {
    pub label: String,
    pub n_w: u64,
    pub n_r: u64,
    pub n_f: u64,
}

/// Derived per-subgroup rates. `orr` is undefined for empty waiting lists,
/// `gfr` for subgroups that received no organs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupRates {
    pub label: String,
    pub n_w: u64,
    pub n_r: u64,
    pub n_f: u64,
    pub orr: Option<f64>,
    pub gfr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortRates {
    pub rows: Vec<SubgroupRates>,
}

/// Organ receiving rate `n_r / n_w` and graft failure rate `n_f / n_r`
/// per subgroup.
pub fn cohort_rates(counts: &[SubgroupCounts]) -> Result<CohortRates> {
    let mut rows = Vec::with_capacity(counts.len());
    for c in counts {
        if c.n_f > c.n_r {
            return Err(Error::Data(format!(
                "subgroup `{}`: failures {} exceed recipients {}",
                c.label, c.n_f, c.n_r
            )));
        }
        if c.n_r > c.n_w {
            return Err(Error::Data(format!(
                "subgroup `{}`: recipients {} exceed waiting count {}",
                c.label, c.n_r, c.n_w
            )));
        }
        let orr = if c.n_w > 0 {
            Some(c.n_r as f64 / c.n_w as f64)
        } else {
            None
        };
        let gfr = if c.n_r > 0 {
            Some(c.n_f as f64 / c.n_r as f64)
        } else {
            None
        };
        rows.push(SubgroupRates {
            label: c.label.clone(),
            n_w: c.n_w,
            n_r: c.n_r,
            n_f: c.n_f,
            orr,
            gfr,
        });
    }
    Ok(CohortRates { rows })
}

/// Standard sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape("pearson inputs differ in length".into()));
    }
    if x.len() < 2 {
        return Err(Error::UndefinedMetric(
            "pearson needs at least 2 points".into(),
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedMetric(
            "pearson is undefined for constant input".into(),
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orr_is_received_over_waiting() {
        let rates = cohort_rates(&[SubgroupCounts {
            label: "g".into(),
            n_w: 4,
            n_r: 3,
            n_f: 1,
        }])
        .unwrap();
        assert_eq!(rates.rows[0].orr, Some(0.75));
        assert_eq!(rates.rows[0].gfr, Some(1.0 / 3.0));
    }

    #[test]
    fn zero_recipients_gives_null_gfr() {
        let rates = cohort_rates(&[SubgroupCounts {
            label: "g".into(),
            n_w: 5,
            n_r: 0,
            n_f: 0,
        }])
        .unwrap();
        assert_eq!(rates.rows[0].orr, Some(0.0));
        assert_eq!(rates.rows[0].gfr, None);
    }

    #[test]
    fn count_inversions_are_data_errors() {
        assert!(cohort_rates(&[SubgroupCounts {
            label: "g".into(),
            n_w: 5,
            n_r: 2,
            n_f: 3,
        }])
        .is_err());
        assert!(cohort_rates(&[SubgroupCounts {
            label: "g".into(),
            n_w: 1,
            n_r: 2,
            n_f: 0,
        }])
        .is_err());
    }

    #[test]
    fn published_rate_round_trip_survives_count_reconstruction() {
        // a published ORR of 0.56405 on a waiting list of 89700 reconstructs
        // to the same 5 decimals from rounded counts
        let n_w = 89_700u64;
        let orr_published = 0.56405;
        let n_r = (orr_published * n_w as f64).round() as u64;
        let rates = cohort_rates(&[SubgroupCounts {
            label: "I/male".into(),
            n_w,
            n_r,
            n_f: 0,
        }])
        .unwrap();
        assert!((rates.rows[0].orr.unwrap() - orr_published).abs() < 5e-6);
    }

    #[test]
    fn pearson_affine_and_antisymmetric() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((pearson(&x, &y).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn pearson_closed_form_case() {
        let r = pearson(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap();
        assert!((r - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pearson_constant_input_is_undefined() {
        assert!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
    }
}
