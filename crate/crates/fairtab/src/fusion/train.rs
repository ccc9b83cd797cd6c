//! End-to-end training of the fused model (step two): per-batch mean
//! cross-entropy plus `α · fairness-loss(ŷ, s_maj)` by AdamW over the mixing
//! weights, the sparse path, and (unless frozen) the dense path.

use crate::error::{Error, Result};
use crate::fusion::model::FusionModel;
use crate::fusion::TrainConfig;
use crate::metrics::fairness_loss_with_grad;
use crate::nn::{cross_entropy, OptConfig, Optimizer};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Encoded training split.
pub struct TrainData<'a> {
    /// n × d standardized dense rows.
    pub x_std: &'a [f64],
    /// n × s sparse codes.
    pub codes: &'a [u32],
    pub labels: &'a [u8],
    pub maj_mask: &'a [bool],
    pub n_rows: usize,
    pub d_cols: usize,
    pub s_cols: usize,
}

/// Separately-logged loss parts; the objective is `ce + α · fairness`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epoch_ce: Vec<f64>,
    pub epoch_fairness: Vec<f64>,
    pub skipped_fairness_batches: usize,
    pub alpha: f64,
}

impl TrainLog {
    pub fn total(&self, epoch: usize) -> f64 {
        self.epoch_ce[epoch] + self.alpha * self.epoch_fairness[epoch]
    }
}

pub fn train_end_to_end(
    model: &mut FusionModel,
    data: &TrainData,
    config: &TrainConfig,
    shuffle_rng: &mut ChaCha8Rng,
) -> Result<TrainLog> {
    if config.alpha < 0.0 {
        return Err(Error::Config("alpha must be nonnegative".into()));
    }
    if data.x_std.len() != data.n_rows * data.d_cols
        || data.codes.len() != data.n_rows * data.s_cols
        || data.labels.len() != data.n_rows
        || data.maj_mask.len() != data.n_rows
    {
        return Err(Error::Shape("training views are inconsistent".into()));
    }

    let mut opt = Optimizer::adamw(OptConfig {
        lr: config.lr,
        weight_decay: config.weight_decay,
        ..OptConfig::default()
    });
    let mut order: Vec<usize> = (0..data.n_rows).collect();
    let mut log = TrainLog {
        epoch_ce: Vec::with_capacity(config.epochs),
        epoch_fairness: Vec::with_capacity(config.epochs),
        skipped_fairness_batches: 0,
        alpha: config.alpha,
    };

    for _ in 0..config.epochs {
        order.shuffle(shuffle_rng);
        let mut ce_sum = 0.0;
        let mut fair_sum = 0.0;
        let mut n_batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let b = chunk.len();
            let mut xb = Vec::with_capacity(b * data.d_cols);
            let mut cb = Vec::with_capacity(b * data.s_cols);
            let mut yb = Vec::with_capacity(b);
            let mut mb = Vec::with_capacity(b);
            for &r in chunk {
                xb.extend_from_slice(&data.x_std[r * data.d_cols..(r + 1) * data.d_cols]);
                cb.extend_from_slice(&data.codes[r * data.s_cols..(r + 1) * data.s_cols]);
                yb.push(data.labels[r]);
                mb.push(data.maj_mask[r]);
            }

            let cache = model.forward(&xb, &cb, b)?;
            let mut ce = 0.0;
            let mut d_margin: Vec<f64> = Vec::with_capacity(b);
            for (i, (&p, &y)) in cache.probs.iter().zip(&yb).enumerate() {
                ce += cross_entropy(p, y);
                let _ = i;
                d_margin.push((p - f64::from(y)) / b as f64);
            }
            ce_sum += ce / b as f64;

            if config.alpha > 0.0 {
                match fairness_loss_with_grad(&cache.probs, &mb) {
                    Some((loss, grad)) => {
                        fair_sum += loss;
                        for i in 0..b {
                            let p = cache.probs[i];
                            d_margin[i] += config.alpha * grad[i] * p * (1.0 - p);
                        }
                    }
                    None => log.skipped_fairness_batches += 1,
                }
            }

            model.zero_grads();
            model.backward(&cache, &d_margin, config.freeze_dense)?;
            opt.step(&mut model.params_mut(config.freeze_dense))?;
            n_batches += 1;
        }
        log.epoch_ce.push(ce_sum / n_batches as f64);
        log.epoch_fairness.push(fair_sum / n_batches as f64);
    }
    Ok(log)
}
