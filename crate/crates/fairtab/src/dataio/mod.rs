//! Cohort ingestion, imputation, dual categorical encoding, fold splitting,
//! and synthetic biased-cohort generation.
//!
//! A [`Cohort`] holds raw recipient/organ feature tables, sensitive group
//! labels, an optional priority-score column, and binary outcomes. Missing
//! cells survive loading untouched; [`impute_missing`] replaces them (zeros
//! for numerics, a reserved `<NA>` token for categoricals). Categorical
//! columns are encoded twice: integer codes that join the numeric columns in
//! the dense view, and one-hot indicators for models that want them.

mod cohort;
mod encode;
mod folds;
mod schema;
mod synth;
mod views;

pub use cohort::{impute_missing, load_cohort, read_cohort_csv, write_cohort_csv, Cell, Cohort, FeatureColumn, SensitiveColumn};
pub use encode::{encode_integer, encode_onehot, fit_vocab, Vocab, NA_TOKEN};
pub use folds::{kfold_split, FoldPlan};
pub use schema::{ColumnSpec, FeatureKind, Role, Schema};
pub use synth::{synth_generate, GroupSpec, SynthConfig};
pub use views::{build_feature_views, fit_vocabs, FeatureViews, Standardizer};
