//! Experiment configuration: JSON file with flag overrides on top.

use crate::baselines::LogisticParams;
use crate::cli::TrainFlags;
use crate::dataio::SynthConfig;
use crate::error::{Error, Result};
use crate::fusion::TrainConfig;
use crate::rng;
use crate::trees::{GbdtParams, RfParams};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Meld,
    Logistic,
    Rf,
    Gbdt,
    Fair,
}

impl ModelKind {
    pub fn parse(name: &str) -> Result<ModelKind> {
        match name {
            "meld" => Ok(ModelKind::Meld),
            "logistic" => Ok(ModelKind::Logistic),
            "rf" => Ok(ModelKind::Rf),
            "gbdt" => Ok(ModelKind::Gbdt),
            "fair" => Ok(ModelKind::Fair),
            other => Err(Error::Config(format!(
                "unknown model `{other}` (expected meld|logistic|rf|gbdt|fair)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Meld => "meld",
            ModelKind::Logistic => "logistic",
            ModelKind::Rf => "rf",
            ModelKind::Gbdt => "gbdt",
            ModelKind::Fair => "fair",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Cohort CSV; mutually exclusive with `synth`.
    pub dataset: Option<PathBuf>,
    /// Schema descriptor for `dataset`.
    pub schema: Option<PathBuf>,
    /// Inline synthetic-cohort spec used when no dataset is given.
    pub synth: Option<SynthConfig>,
    pub model: ModelKind,
    pub train: TrainConfig,
    pub gbdt: GbdtParams,
    pub rf: RfParams,
    pub logistic: LogisticParams,
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: None,
            schema: None,
            synth: None,
            model: ModelKind::Gbdt,
            train: TrainConfig::default(),
            gbdt: GbdtParams::default(),
            rf: RfParams::default(),
            logistic: LogisticParams::default(),
            jobs: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &std::path::Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Apply command-line overrides (flag > file > default). A `--seed`
    /// override re-seeds the inline synthetic dataset from the root seed so
    /// that seed sweeps draw fresh cohorts.
    pub fn apply_flags(&mut self, flags: &TrainFlags) -> Result<()> {
        if let Some(model) = &flags.model {
            self.model = ModelKind::parse(model)?;
        }
        if let Some(seed) = flags.seed {
            self.train.seed = seed;
            if let Some(synth) = &mut self.synth {
                synth.seed = rng::derive(seed, "synth");
            }
        }
        if let Some(alpha) = flags.alpha {
            self.train.alpha = alpha;
        }
        if let Some(alpha_kg) = flags.alpha_kg {
            self.train.alpha_kg = alpha_kg;
        }
        if let Some(sensitive) = &flags.sensitive {
            self.train.sensitive = sensitive.clone();
        }
        if let Some(folds) = flags.folds {
            self.train.folds = folds;
        }
        if let Some(threshold) = flags.threshold {
            self.train.threshold = threshold;
        }
        if let Some(jobs) = flags.jobs {
            self.jobs = jobs;
        }
        if flags.freeze_dense {
            self.train.freeze_dense = true;
        }
        if flags.no_standardize {
            self.train.no_standardize = true;
        }
        if flags.squash_step1 {
            self.train.squash_step1 = true;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dataset.is_some() && self.synth.is_some() {
            return Err(Error::Config(
                "config declares both a dataset file and a synth block".into(),
            ));
        }
        if self.dataset.is_none() && self.synth.is_none() {
            return Err(Error::Config(
                "config needs either a dataset file or a synth block".into(),
            ));
        }
        if let Some(dataset) = &self.dataset {
            if !dataset.exists() {
                return Err(Error::Config(format!(
                    "dataset file {} does not exist",
                    dataset.display()
                )));
            }
            match &self.schema {
                None => {
                    return Err(Error::Config(
                        "a dataset file requires a schema descriptor".into(),
                    ))
                }
                Some(schema) if !schema.exists() => {
                    return Err(Error::Config(format!(
                        "schema file {} does not exist",
                        schema.display()
                    )))
                }
                _ => {}
            }
        }
        if let Some(synth) = &self.synth {
            synth.validate()?;
        }
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        self.gbdt.validate()?;
        if self.train.alpha < 0.0 || self.train.alpha_kg < 0.0 {
            return Err(Error::Config("fairness weights must be nonnegative".into()));
        }
        Ok(())
    }

    /// Load the declared dataset or synthesize the inline cohort.
    pub fn load_cohort(&self) -> Result<crate::dataio::Cohort> {
        match (&self.dataset, &self.synth) {
            (Some(path), None) => {
                let schema = crate::dataio::Schema::load(self.schema.as_ref().unwrap())?;
                crate::dataio::load_cohort(path, &schema)
            }
            (None, Some(synth)) => crate::dataio::synth_generate(synth),
            _ => Err(Error::Config("invalid dataset configuration".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_json() {
        let config = ExperimentConfig {
            synth: Some(SynthConfig {
                n_rows: 100,
                n_numeric: 2,
                n_categorical: 1,
                group_spec: vec![
                    crate::dataio::GroupSpec {
                        label: "A".into(),
                        proportion: 0.5,
                        base_rate_shift: 0.0,
                    },
                    crate::dataio::GroupSpec {
                        label: "B".into(),
                        proportion: 0.5,
                        base_rate_shift: 0.0,
                    },
                ],
                label_noise: 0.0,
                signal_weights: vec![],
                seed: 1,
                cat_cardinality: 3,
                n_proxy: 0,
                proxy_strength: 0.0,
                sensitive_name: "group".into(),
            }),
            ..ExperimentConfig::default()
        };
        let json = serde_json::to_string(&config).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn partial_json_fills_defaults() {
        let config: ExperimentConfig =
            serde_json::from_str(r#"{"model":"fair","train":{"alpha":2.0}}"#).unwrap();
        assert_eq!(config.model, ModelKind::Fair);
        assert_eq!(config.train.alpha, 2.0);
        assert_eq!(config.train.epochs, 10);
        assert_eq!(config.jobs, 1);
    }

    #[test]
    fn unknown_model_name_is_a_usage_error() {
        assert!(ModelKind::parse("boost").is_err());
    }
}
