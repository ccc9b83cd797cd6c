//! Sparse and dense feature views of an imputed cohort.
//!
//! The dense view is `[integer-encoded categoricals ‖ numeric columns]`; the
//! sparse view keeps the per-column integer codes for embedding lookups and
//! lazy one-hot expansion.

use crate::dataio::cohort::{Cell, Cohort};
use crate::dataio::encode::Vocab;
use crate::dataio::schema::FeatureKind;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Row-major encoded views shared by every model in the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureViews {
    pub n_rows: usize,
    /// N×S integer category codes (the combined categorical columns).
    pub sparse: Vec<u32>,
    pub s_cols: usize,
    /// N×D reals: codes as reals first, then numeric columns.
    pub dense: Vec<f64>,
    pub d_cols: usize,
    /// Fitted vocabulary per sparse column.
    pub vocabs: Vec<Vocab>,
    /// Total one-hot width (sum of vocabulary sizes).
    pub onehot_dim: usize,
}

impl FeatureViews {
    pub fn dense_row(&self, i: usize) -> &[f64] {
        &self.dense[i * self.d_cols..(i + 1) * self.d_cols]
    }

    pub fn sparse_row(&self, i: usize) -> &[u32] {
        &self.sparse[i * self.s_cols..(i + 1) * self.s_cols]
    }

    /// One-hot expansion of a sparse row, materialized on demand.
    pub fn onehot_row(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.onehot_dim];
        let mut offset = 0;
        for (j, &code) in self.sparse_row(i).iter().enumerate() {
            out[offset + code as usize] = 1.0;
            offset += self.vocabs[j].len();
        }
        out
    }
}

/// Fit per-categorical-column vocabularies on the given training rows,
/// in first-appearance order.
pub fn fit_vocabs(cohort: &Cohort, train_rows: &[usize]) -> Result<Vec<Vocab>> {
    let mut vocabs = Vec::new();
    for col in cohort.feature_columns() {
        if col.kind != FeatureKind::Categorical {
            continue;
        }
        let mut seen: Vec<&str> = Vec::with_capacity(train_rows.len());
        for &r in train_rows {
            match &col.cells[r] {
                Cell::Cat(t) => seen.push(t),
                Cell::Missing => {
                    return Err(Error::Data(format!(
                        "column `{}` still has missing cells; impute first",
                        col.name
                    )))
                }
                Cell::Num(_) => {
                    return Err(Error::Data(format!(
                        "categorical column `{}` holds a numeric cell",
                        col.name
                    )))
                }
            }
        }
        vocabs.push(crate::dataio::encode::fit_vocab(seen.into_iter()));
    }
    Ok(vocabs)
}

/// Encode an imputed cohort against fitted vocabularies.
pub fn build_feature_views(cohort: &Cohort, vocabs: &[Vocab]) -> Result<FeatureViews> {
    let n = cohort.n_rows();
    let kinds = cohort.feature_kinds();
    let s_cols = kinds
        .iter()
        .filter(|k| **k == FeatureKind::Categorical)
        .count();
    let num_cols = kinds.len() - s_cols;
    if vocabs.len() != s_cols {
        return Err(Error::Schema(format!(
            "{} vocabularies supplied for {} categorical columns",
            vocabs.len(),
            s_cols
        )));
    }
    let d_cols = s_cols + num_cols;

    let mut sparse = vec![0u32; n * s_cols];
    let mut dense = vec![0f64; n * d_cols];

    let mut cat_idx = 0;
    let mut num_idx = 0;
    for col in cohort.feature_columns() {
        match col.kind {
            FeatureKind::Categorical => {
                let vocab = &vocabs[cat_idx];
                for (i, cell) in col.cells.iter().enumerate() {
                    let code = match cell {
                        Cell::Cat(t) => vocab.code(t)?,
                        Cell::Missing => {
                            return Err(Error::Data(format!(
                                "column `{}` still has missing cells; impute first",
                                col.name
                            )))
                        }
                        Cell::Num(_) => unreachable!("validated cohort"),
                    };
                    sparse[i * s_cols + cat_idx] = code;
                    dense[i * d_cols + cat_idx] = f64::from(code);
                }
                cat_idx += 1;
            }
            FeatureKind::Numeric => {
                for (i, cell) in col.cells.iter().enumerate() {
                    let v = match cell {
                        Cell::Num(v) => *v,
                        Cell::Missing => {
                            return Err(Error::Data(format!(
                                "column `{}` still has missing cells; impute first",
                                col.name
                            )))
                        }
                        Cell::Cat(_) => unreachable!("validated cohort"),
                    };
                    dense[i * d_cols + s_cols + num_idx] = v;
                }
                num_idx += 1;
            }
        }
    }

    let onehot_dim = vocabs.iter().map(Vocab::len).sum();
    Ok(FeatureViews {
        n_rows: n,
        sparse,
        s_cols,
        dense,
        d_cols,
        vocabs: vocabs.to_vec(),
        onehot_dim,
    })
}

/// Per-column affine rescaling fitted on training rows. Integer-code columns
/// pass through unchanged; tree models always consume the raw dense view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Fit on the numeric columns of the dense view (columns `s_cols..`).
    pub fn fit(views: &FeatureViews, train_rows: &[usize]) -> Standardizer {
        let d = views.d_cols;
        let mut mean = vec![0.0; d];
        let mut std = vec![1.0; d];
        let n = train_rows.len().max(1) as f64;
        for col in views.s_cols..d {
            let mut m = 0.0;
            for &r in train_rows {
                m += views.dense[r * d + col];
            }
            m /= n;
            let mut v = 0.0;
            for &r in train_rows {
                let x = views.dense[r * d + col] - m;
                v += x * x;
            }
            let s = (v / n).sqrt();
            mean[col] = m;
            std[col] = if s > 1e-12 { s } else { 1.0 };
        }
        Standardizer { mean, std }
    }

    /// No-op rescaling (the `--no-standardize` path).
    pub fn identity(d_cols: usize) -> Standardizer {
        Standardizer {
            mean: vec![0.0; d_cols],
            std: vec![1.0; d_cols],
        }
    }

    pub fn transform_row(&self, row: &mut [f64]) {
        for (j, x) in row.iter_mut().enumerate() {
            *x = (*x - self.mean[j]) / self.std[j];
        }
    }

    /// Gathered, standardized dense matrix for the given rows.
    pub fn gather(&self, views: &FeatureViews, rows: &[usize]) -> Vec<f64> {
        let d = views.d_cols;
        let mut out = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            let start = out.len();
            out.extend_from_slice(views.dense_row(r));
            self.transform_row(&mut out[start..]);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::cohort::read_cohort_csv;
    use crate::dataio::impute_missing;
    use crate::dataio::schema::Schema;

    fn views_from(csv: &str, schema: &str) -> FeatureViews {
        let schema = Schema::parse(schema).unwrap();
        let cohort = impute_missing(&read_cohort_csv(csv, &schema).unwrap());
        let rows: Vec<usize> = (0..cohort.n_rows()).collect();
        let vocabs = fit_vocabs(&cohort, &rows).unwrap();
        build_feature_views(&cohort, &vocabs).unwrap()
    }

    #[test]
    fn two_numeric_one_categorical_gives_d3_s1() {
        let v = views_from(
            "a,b,c,race,gender,y\n1,2,A,I,m,0\n3,4,B,II,f,1\n",
            "a,numeric,recipient\nb,numeric,recipient\nc,categorical,organ\nrace,categorical,sensitive\ngender,categorical,sensitive\ny,numeric,label\n",
        );
        assert_eq!(v.d_cols, 3);
        assert_eq!(v.s_cols, 1);
        // code column first, then numerics
        assert_eq!(v.dense_row(0), &[0.0, 1.0, 2.0]);
        assert_eq!(v.dense_row(1), &[1.0, 3.0, 4.0]);
        assert_eq!(v.onehot_dim, 3); // {A, B, <NA>}
    }

    #[test]
    fn all_numeric_cohort_has_empty_sparse_view() {
        let v = views_from(
            "a,b,race,gender,y\n1,2,I,m,0\n3,4,II,f,1\n",
            "a,numeric,recipient\nb,numeric,organ\nrace,categorical,sensitive\ngender,categorical,sensitive\ny,numeric,label\n",
        );
        assert_eq!(v.s_cols, 0);
        assert_eq!(v.d_cols, 2);
        assert_eq!(v.dense, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn onehot_rows_sum_to_column_count() {
        let v = views_from(
            "c1,c2,race,gender,y\nA,X,I,m,0\nB,Y,II,f,1\nA,X,I,m,1\n",
            "c1,categorical,recipient\nc2,categorical,organ\nrace,categorical,sensitive\ngender,categorical,sensitive\ny,numeric,label\n",
        );
        for i in 0..3 {
            assert_eq!(v.onehot_row(i).iter().sum::<f64>(), 2.0);
        }
    }

    #[test]
    fn standardizer_zero_mean_unit_std_on_train() {
        let v = views_from(
            "a,b,race,gender,y\n1,10,I,m,0\n2,20,II,f,1\n3,30,I,m,0\n4,40,II,f,1\n",
            "a,numeric,recipient\nb,numeric,organ\nrace,categorical,sensitive\ngender,categorical,sensitive\ny,numeric,label\n",
        );
        let z = Standardizer::fit(&v, &[0, 1, 2, 3]);
        let x = z.gather(&v, &[0, 1, 2, 3]);
        for col in 0..2 {
            let m: f64 = (0..4).map(|r| x[r * 2 + col]).sum::<f64>() / 4.0;
            let s: f64 = ((0..4).map(|r| (x[r * 2 + col] - m).powi(2)).sum::<f64>() / 4.0).sqrt();
            assert!(m.abs() < 1e-12);
            assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
