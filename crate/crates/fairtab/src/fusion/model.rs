//! The fused two-path model: `ŷ(x) = σ(w₁·y_KD(x^d) + w₂·y_CatNN(x^s))`.

use crate::distill::{DenseForward, DistilledNet};
use crate::error::Result;
use crate::fusion::catnn::{CatCache, CatNN};
use crate::nn::{sigmoid, Tensor};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionModel {
    pub catnn: CatNN,
    pub distilled: DistilledNet,
    pub w1: Tensor,
    pub w2: Tensor,
}

/// Cached state of one fused forward pass.
pub struct FusionCache {
    pub dense: DenseForward,
    pub cat: CatCache,
    /// y_KD per row.
    pub a: Vec<f64>,
    /// y_CatNN per row.
    pub b: Vec<f64>,
    /// σ(w₁a + w₂b) per row.
    pub probs: Vec<f64>,
}

impl FusionModel {
    /// Mixing weights start at 1.0 each.
    pub fn new(catnn: CatNN, distilled: DistilledNet) -> FusionModel {
        FusionModel {
            catnn,
            distilled,
            w1: Tensor::scalar_param(1.0),
            w2: Tensor::scalar_param(1.0),
        }
    }

    /// Probability for one encoded row.
    pub fn fuse_predict(&self, dense_std_row: &[f64], codes: &[u32]) -> Result<f64> {
        let a = self.distilled.y_kd(dense_std_row)?;
        let b = self.catnn.forward_one(codes)?;
        Ok(sigmoid(self.w1.data[0] * a + self.w2.data[0] * b))
    }

    /// Batched forward with caches for backward.
    pub fn forward(&self, x_std: &[f64], codes: &[u32], batch: usize) -> Result<FusionCache> {
        let dense = self.distilled.forward_batch(x_std, batch)?;
        let (b, cat) = self.catnn.forward(codes, batch)?;
        let a = dense.y.clone();
        let probs: Vec<f64> = a
            .iter()
            .zip(&b)
            .map(|(&ai, &bi)| sigmoid(self.w1.data[0] * ai + self.w2.data[0] * bi))
            .collect();
        Ok(FusionCache {
            dense,
            cat,
            a,
            b,
            probs,
        })
    }

    /// Backward from the gradient w.r.t. the pre-sigmoid margin.
    pub fn backward(
        &mut self,
        cache: &FusionCache,
        d_margin: &[f64],
        freeze_dense: bool,
    ) -> Result<()> {
        let batch = d_margin.len();
        let mut d_a = Vec::with_capacity(batch);
        let mut d_b = Vec::with_capacity(batch);
        let mut g1 = 0.0;
        let mut g2 = 0.0;
        for i in 0..batch {
            g1 += d_margin[i] * cache.a[i];
            g2 += d_margin[i] * cache.b[i];
            d_a.push(d_margin[i] * self.w1.data[0]);
            d_b.push(d_margin[i] * self.w2.data[0]);
        }
        self.w1.grad_mut()[0] += g1;
        self.w2.grad_mut()[0] += g2;
        if !freeze_dense {
            self.distilled.backward_batch(&cache.dense, &d_a, true)?;
        }
        self.catnn.backward(&cache.cat, &d_b)?;
        Ok(())
    }

    /// Stable parameter order: mixing weights, sparse path, dense path.
    pub fn params_mut(&mut self, freeze_dense: bool) -> Vec<&mut Tensor> {
        let mut params: Vec<&mut Tensor> = vec![&mut self.w1, &mut self.w2];
        params.extend(self.catnn.params_mut());
        if !freeze_dense {
            params.extend(self.distilled.params_mut(true));
        }
        params
    }

    pub fn zero_grads(&mut self) {
        self.w1.zero_grad();
        self.w2.zero_grad();
        self.catnn.zero_grads();
        self.distilled.zero_grads();
    }
}
