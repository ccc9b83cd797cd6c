//! Low-dimensional embedding of a tree group's leaf membership.
//!
//! A group's multi-hot leaf vector (one active slot per member tree) is
//! projected to `d_leaf` dimensions by summing projection rows; a linear
//! output map is trained jointly so that the embedded representation still
//! reproduces the group's margin contribution. The per-row embedding vectors
//! become the distillation targets for the dense student.

use crate::distill::{DistillParams, TreeGroup};
use crate::error::{Error, Result};
use crate::nn::{mse, EmbeddingTable, OptConfig, Optimizer, Tensor};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafEmbedding {
    /// leaf_dim × d_leaf; a multi-hot embeds as the sum of its active rows.
    pub projection: EmbeddingTable,
    pub w_out: Tensor,
    pub b_out: Tensor,
    /// Mean squared margin error on the training rows after fitting.
    pub final_mse: f64,
}

impl LeafEmbedding {
    pub fn d_leaf(&self) -> usize {
        self.projection.dim()
    }

    /// Embed one row's leaf slots: the sum of the active projection rows.
    pub fn embed(&self, slots: &[u32]) -> Vec<f64> {
        let d = self.d_leaf();
        let mut e = vec![0.0; d];
        for &s in slots {
            let row = &self.projection.table.data[s as usize * d..(s as usize + 1) * d];
            for (acc, v) in e.iter_mut().zip(row) {
                *acc += v;
            }
        }
        e
    }

    /// Margin reconstruction from an embedding vector.
    pub fn output(&self, e: &[f64]) -> f64 {
        self.b_out.data[0] + e.iter().zip(&self.w_out.data).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Embeddings for all rows, row-major n × d_leaf.
    pub fn embed_all(&self, slots: &[u32], n_rows: usize) -> Vec<f64> {
        let m = slots.len() / n_rows;
        let mut out = Vec::with_capacity(n_rows * self.d_leaf());
        for r in 0..n_rows {
            out.extend(self.embed(&slots[r * m..(r + 1) * m]));
        }
        out
    }
}

/// Train (projection, w_out, b_out) by Adam so that the embedded multi-hot
/// reproduces the group's margin contribution in the mean-squared sense.
/// `slots` is row-major n × n_members.
pub fn fit_leaf_embedding(
    group: &TreeGroup,
    slots: &[u32],
    margins: &[f64],
    params: &DistillParams,
    rng: &mut ChaCha8Rng,
) -> Result<LeafEmbedding> {
    if params.d_leaf >= group.leaf_dim {
        return Err(Error::Config(format!(
            "d_leaf {} must be smaller than the group's leaf width {}",
            params.d_leaf, group.leaf_dim
        )));
    }
    let m = group.members.len();
    let n = margins.len();
    if slots.len() != n * m {
        return Err(Error::Shape("slots do not match rows × members".into()));
    }

    let d = params.d_leaf;
    let mut projection = EmbeddingTable::init(group.leaf_dim, d, rng);
    let bound = (6.0 / (d + 1) as f64).sqrt();
    let w_data: Vec<f64> = (0..d).map(|_| rng.gen_range(-bound..bound)).collect();
    let mut w_out = Tensor::param(&[d], w_data);
    let mut b_out = Tensor::scalar_param(0.0);

    let mut opt = Optimizer::adam(OptConfig {
        lr: params.lr,
        ..OptConfig::default()
    });
    let mut order: Vec<usize> = (0..n).collect();

    for _ in 0..params.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(params.batch_size) {
            projection.table.zero_grad();
            w_out.zero_grad();
            b_out.zero_grad();
            let b_len = chunk.len() as f64;

            // forward
            let mut embeds = Vec::with_capacity(chunk.len() * d);
            let mut preds = Vec::with_capacity(chunk.len());
            for &r in chunk {
                let e = {
                    let row_slots = &slots[r * m..(r + 1) * m];
                    let mut e = vec![0.0; d];
                    for &s in row_slots {
                        let row = &projection.table.data[s as usize * d..(s as usize + 1) * d];
                        for (acc, v) in e.iter_mut().zip(row) {
                            *acc += v;
                        }
                    }
                    e
                };
                let pred = b_out.data[0]
                    + e.iter().zip(&w_out.data).map(|(a, b)| a * b).sum::<f64>();
                preds.push(pred);
                embeds.extend(e);
            }

            // backward: d pred = 2(pred − target)/B
            let mut d_embed = vec![0.0; chunk.len() * d];
            let Tensor {
                data: w_data,
                grad: w_grad,
                ..
            } = &mut w_out;
            let w_grad = w_grad.as_deref_mut().unwrap();
            for (i, &r) in chunk.iter().enumerate() {
                let dp = 2.0 * (preds[i] - margins[r]) / b_len;
                b_out.grad_mut()[0] += dp;
                let e = &embeds[i * d..(i + 1) * d];
                for j in 0..d {
                    w_grad[j] += dp * e[j];
                    d_embed[i * d + j] = dp * w_data[j];
                }
            }
            for member in 0..m {
                let codes: Vec<u32> = chunk.iter().map(|&r| slots[r * m + member]).collect();
                projection.backward(&codes, &d_embed);
            }
            opt.step(&mut [&mut projection.table, &mut w_out, &mut b_out])?;
        }
    }

    let mut embedding = LeafEmbedding {
        projection,
        w_out,
        b_out,
        final_mse: 0.0,
    };
    let recon: Vec<f64> = (0..n)
        .map(|r| embedding.output(&embedding.embed(&slots[r * m..(r + 1) * m])))
        .collect();
    embedding.final_mse = mse(&recon, margins);
    Ok(embedding)
}
