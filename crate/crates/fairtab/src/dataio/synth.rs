//! Synthetic cohort generation with controllable group-level bias.
//!
//! Labels follow `Bernoulli(sigmoid(signal_weights · x + shift(group)))`,
//! flipped with probability `label_noise`. The per-group `base_rate_shift`
//! injects outcome bias; the first `n_proxy` numeric features additionally
//! receive a group-dependent mean offset so that the bias is visible to a
//! model trained on features alone (without proxies, no feature-based model
//! could exhibit demographic disparity).

use crate::dataio::cohort::{Cell, Cohort, FeatureColumn, SensitiveColumn};
use crate::dataio::schema::{ColumnSpec, FeatureKind, Role, Schema};
use crate::error::{Error, Result};
use crate::rng;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub label: String,
    pub proportion: f64,
    pub base_rate_shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_rows: usize,
    pub n_numeric: usize,
    pub n_categorical: usize,
    pub group_spec: Vec<GroupSpec>,
    /// Probability that a sampled label is flipped, in [0, 0.5].
    pub label_noise: f64,
    /// Per-feature logit weights (numerics first, then categoricals);
    /// empty means all zeros.
    pub signal_weights: Vec<f64>,
    pub seed: u64,
    /// Vocabulary size of each categorical feature.
    #[serde(default = "default_cardinality")]
    pub cat_cardinality: usize,
    /// Leading numeric features whose mean shifts with the group.
    #[serde(default)]
    pub n_proxy: usize,
    /// Proxy mean offset per unit of `base_rate_shift`.
    #[serde(default)]
    pub proxy_strength: f64,
    #[serde(default = "default_sensitive_name")]
    pub sensitive_name: String,
}

fn default_cardinality() -> usize {
    5
}

fn default_sensitive_name() -> String {
    "group".to_string()
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_rows < 10 {
            return Err(Error::Config("n_rows must be at least 10".into()));
        }
        if self.group_spec.len() < 2 {
            return Err(Error::Config("need at least 2 groups".into()));
        }
        let total: f64 = self.group_spec.iter().map(|g| g.proportion).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "group proportions sum to {total}, expected 1"
            )));
        }
        if self.group_spec.iter().any(|g| g.proportion <= 0.0) {
            return Err(Error::Config("group proportions must be positive".into()));
        }
        if !(0.0..=0.5).contains(&self.label_noise) {
            return Err(Error::Config("label_noise must lie in [0, 0.5]".into()));
        }
        let n_features = self.n_numeric + self.n_categorical;
        if n_features == 0 {
            return Err(Error::Config("need at least one feature".into()));
        }
        if !self.signal_weights.is_empty() && self.signal_weights.len() != n_features {
            return Err(Error::Config(format!(
                "signal_weights has {} entries for {} features",
                self.signal_weights.len(),
                n_features
            )));
        }
        if self.cat_cardinality < 2 {
            return Err(Error::Config("cat_cardinality must be at least 2".into()));
        }
        if self.n_proxy > self.n_numeric {
            return Err(Error::Config("n_proxy exceeds n_numeric".into()));
        }
        Ok(())
    }

    /// The schema of the generated cohort: numerics and categoricals split
    /// evenly between recipient and organ roles, plus score/sensitive/label.
    pub fn schema(&self) -> Schema {
        let mut columns = Vec::new();
        for j in 0..self.n_numeric {
            columns.push(ColumnSpec {
                name: format!("num{j}"),
                kind: FeatureKind::Numeric,
                role: if j < self.n_numeric.div_ceil(2) {
                    Role::Recipient
                } else {
                    Role::Organ
                },
            });
        }
        for j in 0..self.n_categorical {
            columns.push(ColumnSpec {
                name: format!("cat{j}"),
                kind: FeatureKind::Categorical,
                role: if j < self.n_categorical.div_ceil(2) {
                    Role::Recipient
                } else {
                    Role::Organ
                },
            });
        }
        columns.push(ColumnSpec {
            name: self.sensitive_name.clone(),
            kind: FeatureKind::Categorical,
            role: Role::Sensitive,
        });
        columns.push(ColumnSpec {
            name: "score".into(),
            kind: FeatureKind::Numeric,
            role: Role::Score,
        });
        columns.push(ColumnSpec {
            name: "outcome".into(),
            kind: FeatureKind::Numeric,
            role: Role::Label,
        });
        Schema { columns }
    }
}

/// Generate a cohort. Bit-identical across runs for a fixed config.
pub fn synth_generate(config: &SynthConfig) -> Result<Cohort> {
    config.validate()?;
    let mut rng = rng::stream(config.seed, "synth");
    let n = config.n_rows;
    let n_features = config.n_numeric + config.n_categorical;
    let weights: Vec<f64> = if config.signal_weights.is_empty() {
        vec![0.0; n_features]
    } else {
        config.signal_weights.clone()
    };

    let mut cumulative = Vec::with_capacity(config.group_spec.len());
    let mut acc = 0.0;
    for g in &config.group_spec {
        acc += g.proportion;
        cumulative.push(acc);
    }

    let mut numeric: Vec<Vec<f64>> = vec![Vec::with_capacity(n); config.n_numeric];
    let mut categorical: Vec<Vec<u32>> = vec![Vec::with_capacity(n); config.n_categorical];
    let mut groups: Vec<usize> = Vec::with_capacity(n);
    let mut scores: Vec<f64> = Vec::with_capacity(n);
    let mut labels: Vec<u8> = Vec::with_capacity(n);

    let half_card = (config.cat_cardinality as f64 - 1.0) / 2.0;

    for _ in 0..n {
        let u: f64 = rng.gen();
        let g = cumulative.iter().position(|&c| u < c).unwrap_or(config.group_spec.len() - 1);
        let shift = config.group_spec[g].base_rate_shift;
        groups.push(g);

        let mut logit = shift;
        for (j, col) in numeric.iter_mut().enumerate() {
            let mut x = rng::normal(&mut rng);
            if j < config.n_proxy {
                x += config.proxy_strength * shift;
            }
            col.push(x);
            logit += weights[j] * x;
        }
        for (j, col) in categorical.iter_mut().enumerate() {
            let code = rng.gen_range(0..config.cat_cardinality as u32);
            col.push(code);
            // centered so that nonzero weights do not move the global base rate
            logit += weights[config.n_numeric + j] * (f64::from(code) - half_card);
        }
        scores.push(20.0 + 5.0 * rng::normal(&mut rng));

        let p = 1.0 / (1.0 + (-logit).exp());
        let mut y = u8::from(rng.gen::<f64>() < p);
        if rng.gen::<f64>() < config.label_noise {
            y = 1 - y;
        }
        labels.push(y);
    }

    let schema = config.schema();
    let mut recipient = Vec::new();
    let mut organ = Vec::new();
    for spec in schema
        .columns
        .iter()
        .filter(|c| matches!(c.role, Role::Recipient | Role::Organ))
    {
        let cells: Vec<Cell> = if let Some(j) = spec.name.strip_prefix("num") {
            let j: usize = j.parse().unwrap();
            numeric[j].iter().map(|&v| Cell::Num(v)).collect()
        } else {
            let j: usize = spec.name.strip_prefix("cat").unwrap().parse().unwrap();
            categorical[j]
                .iter()
                .map(|&c| Cell::Cat(format!("v{c}")))
                .collect()
        };
        let col = FeatureColumn {
            name: spec.name.clone(),
            kind: spec.kind,
            cells,
        };
        if spec.role == Role::Recipient {
            recipient.push(col);
        } else {
            organ.push(col);
        }
    }

    let cohort = Cohort {
        recipient,
        organ,
        sensitive: vec![SensitiveColumn {
            name: config.sensitive_name.clone(),
            values: groups
                .iter()
                .map(|&g| config.group_spec[g].label.clone())
                .collect(),
        }],
        score: Some(("score".into(), scores.into_iter().map(Some).collect())),
        labels,
        label_name: "outcome".into(),
    };
    cohort.validate()?;
    Ok(cohort)
}
