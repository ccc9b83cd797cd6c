//! Regression-tree learner, gradient-boosted ensemble with logistic loss,
//! and a bagged random-forest baseline.
//!
//! Split search is exact: threshold candidates are midpoints between
//! consecutive sorted unique feature values, no histogram binning. Ties on
//! gain break toward the lowest feature index, then the lowest threshold.

mod forest;
mod gbdt;
mod tree;

pub use forest::{fit_random_forest, rf_predict_proba, RfModel, RfParams};
pub use gbdt::{
    fit_gbdt, fit_tree, leaf_indices, predict_margin, predict_proba, used_feature_indices,
    GbdtModel, GbdtParams,
};
pub use tree::{Node, Tree};

/// Borrowed row-major matrix view shared by every tabular learner.
#[derive(Debug, Clone, Copy)]
pub struct XMatrix<'a> {
    pub data: &'a [f64],
    pub rows: usize,
    pub cols: usize,
}

impl<'a> XMatrix<'a> {
    pub fn new(data: &'a [f64], rows: usize, cols: usize) -> XMatrix<'a> {
        assert_eq!(data.len(), rows * cols, "matrix data/shape mismatch");
        XMatrix { data, rows, cols }
    }

    pub fn row(&self, r: usize) -> &'a [f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}
