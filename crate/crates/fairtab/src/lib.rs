//! Fair tabular learning on clinical-style cohorts.
//!
//! The pipeline combines a gradient-boosted tree teacher, a neural student
//! distilled from the teacher's leaf structure, an embedding/factorization
//! machine path for sparse categorical features, and a two-step
//! demographic-parity penalty applied during both distillation and
//! end-to-end training. A fairness evaluation harness (ROC AUC, demographic
//! parity difference, equalized odds difference, subgroup rate audits)
//! reports cross-validated results.
//!
//! See the guide under `book/` for worked chapters; every code block there
//! runs as a doctest of this crate.

pub mod baselines;
pub mod cli;
pub mod dataio;
pub mod distill;
pub mod error;
pub mod fusion;
pub mod metrics;
pub mod nn;
pub mod persist;
pub mod rng;
pub mod trees;

pub use cli::run_cli;
pub use error::{Error, Result};

#[cfg(doctest)]
mod book;
