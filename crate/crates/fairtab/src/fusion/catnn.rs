//! Sparse-path network: per-column embedding tables feeding a factorization
//! machine (first/second-order interactions) and a deep net (higher-order).

use crate::error::{Error, Result};
use crate::nn::{EmbeddingTable, Mlp, MlpCache, MlpSpec, Tensor};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// `y_CatNN(x^s) = E_fm(x^s) + E_deep(x^s)`. The FM's second-order factors
/// share the embedding tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatNN {
    pub tables: Vec<EmbeddingTable>,
    /// Per-column, per-category first-order weights.
    pub first_order: Vec<Tensor>,
    pub bias: Tensor,
    /// Deep interaction net over the concatenated embeddings; absent when
    /// the cohort has no sparse columns.
    pub deep: Option<Mlp>,
    pub embed_dim: usize,
}

/// Cached state of one batched forward pass.
pub struct CatCache {
    deep_cache: Option<MlpCache>,
    /// batch × S·d gathered embedding rows (the deep input).
    deep_in: Vec<f64>,
    /// batch × d embedding sums.
    sum_vec: Vec<f64>,
    codes: Vec<u32>,
    batch: usize,
}

impl CatNN {
    pub fn init(
        vocab_sizes: &[usize],
        embed_dim: usize,
        deep_hidden: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Result<CatNN> {
        if embed_dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        let tables: Vec<EmbeddingTable> = vocab_sizes
            .iter()
            .map(|&c| EmbeddingTable::init(c, embed_dim, rng))
            .collect();
        let first_order: Vec<Tensor> = vocab_sizes
            .iter()
            .map(|&c| Tensor::param(&[c], vec![0.0; c]))
            .collect();
        let deep = if vocab_sizes.is_empty() {
            None
        } else {
            let mut widths = vec![vocab_sizes.len() * embed_dim];
            widths.extend_from_slice(deep_hidden);
            widths.push(1);
            Some(Mlp::init(MlpSpec::relu_tower(widths, 0), rng)?)
        };
        Ok(CatNN {
            tables,
            first_order,
            bias: Tensor::scalar_param(0.0),
            deep,
            embed_dim,
        })
    }

    pub fn s_cols(&self) -> usize {
        self.tables.len()
    }

    fn check_codes(&self, codes: &[u32], batch: usize) -> Result<()> {
        let s = self.s_cols();
        if codes.len() != batch * s {
            return Err(Error::Shape(format!(
                "{} codes is not batch {} × {} sparse columns",
                codes.len(),
                batch,
                s
            )));
        }
        Ok(())
    }

    /// First- and second-order interactions only: `bias + Σ_j w_j[x_j] +
    /// ½(‖Σ_j v_j‖² − Σ_j ‖v_j‖²)`.
    pub fn fm_forward(&self, codes: &[u32]) -> Result<f64> {
        self.check_codes(codes, 1)?;
        let d = self.embed_dim;
        let mut sum_vec = vec![0.0; d];
        let mut sum_sq = 0.0;
        let mut first = 0.0;
        for (j, &code) in codes.iter().enumerate() {
            let row = self.tables[j].row(code)?;
            for (acc, v) in sum_vec.iter_mut().zip(row) {
                *acc += v;
            }
            sum_sq += row.iter().map(|v| v * v).sum::<f64>();
            let c = code as usize;
            if c >= self.first_order[j].len() {
                return Err(Error::Shape(format!("code {c} out of range in column {j}")));
            }
            first += self.first_order[j].data[c];
        }
        let norm_sq: f64 = sum_vec.iter().map(|v| v * v).sum();
        Ok(self.bias.data[0] + first + 0.5 * (norm_sq - sum_sq))
    }

    /// Full sparse-path output for a batch of code rows.
    pub fn forward(&self, codes: &[u32], batch: usize) -> Result<(Vec<f64>, CatCache)> {
        self.check_codes(codes, batch)?;
        let s = self.s_cols();
        let d = self.embed_dim;
        let mut y = Vec::with_capacity(batch);
        let mut deep_in = vec![0.0; batch * s * d];
        let mut sum_vec = vec![0.0; batch * d];

        for r in 0..batch {
            let row_codes = &codes[r * s..(r + 1) * s];
            let mut sum_sq = 0.0;
            let mut first = 0.0;
            for (j, &code) in row_codes.iter().enumerate() {
                let v = self.tables[j].row(code)?;
                deep_in[(r * s + j) * d..(r * s + j + 1) * d].copy_from_slice(v);
                for (acc, vi) in sum_vec[r * d..(r + 1) * d].iter_mut().zip(v) {
                    *acc += vi;
                }
                sum_sq += v.iter().map(|x| x * x).sum::<f64>();
                let c = code as usize;
                if c >= self.first_order[j].len() {
                    return Err(Error::Shape(format!("code {c} out of range in column {j}")));
                }
                first += self.first_order[j].data[c];
            }
            let norm_sq: f64 = sum_vec[r * d..(r + 1) * d].iter().map(|x| x * x).sum();
            y.push(self.bias.data[0] + first + 0.5 * (norm_sq - sum_sq));
        }

        let deep_cache = match &self.deep {
            Some(deep) => {
                let (out, cache) = deep.forward(&deep_in, batch)?;
                for (yi, o) in y.iter_mut().zip(&out) {
                    *yi += o;
                }
                Some(cache)
            }
            None => None,
        };
        crate::nn::assert_all_finite(&y, "catnn forward")?;
        Ok((
            y,
            CatCache {
                deep_cache,
                deep_in,
                sum_vec,
                codes: codes.to_vec(),
                batch,
            },
        ))
    }

    pub fn forward_one(&self, codes: &[u32]) -> Result<f64> {
        Ok(self.forward(codes, 1)?.0[0])
    }

    /// Accumulate gradients from `d_y` (one value per batch row).
    pub fn backward(&mut self, cache: &CatCache, d_y: &[f64]) -> Result<()> {
        if d_y.len() != cache.batch {
            return Err(Error::Shape("upstream gradient does not match batch".into()));
        }
        let s = self.s_cols();
        let d = self.embed_dim;

        // deep path first: d deep_in
        let d_deep_in = match (&mut self.deep, &cache.deep_cache) {
            (Some(deep), Some(deep_cache)) => deep.backward(deep_cache, d_y)?,
            _ => vec![0.0; cache.batch * s * d],
        };

        for r in 0..cache.batch {
            let dy = d_y[r];
            self.bias.grad_mut()[0] += dy;
            let row_codes = &cache.codes[r * s..(r + 1) * s];
            let sum = &cache.sum_vec[r * d..(r + 1) * d];
            for (j, &code) in row_codes.iter().enumerate() {
                let c = code as usize;
                self.first_order[j].grad_mut()[c] += dy;
                // FM second-order: d/dv_j ½(‖Σv‖² − Σ‖v‖²) = Σv − v_j
                let v = &cache.deep_in[(r * s + j) * d..(r * s + j + 1) * d];
                let dd = &d_deep_in[(r * s + j) * d..(r * s + j + 1) * d];
                let grad = self.tables[j].table.grad_mut();
                let g_row = &mut grad[c * d..(c + 1) * d];
                for k in 0..d {
                    g_row[k] += dy * (sum[k] - v[k]) + dd[k];
                }
            }
        }
        Ok(())
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut params: Vec<&mut Tensor> = Vec::new();
        for t in &mut self.tables {
            params.push(&mut t.table);
        }
        params.extend(self.first_order.iter_mut());
        params.push(&mut self.bias);
        if let Some(deep) = &mut self.deep {
            params.extend(deep.params_mut());
        }
        params
    }

    pub fn zero_grads(&mut self) {
        for t in &mut self.tables {
            t.table.zero_grad();
        }
        for w in &mut self.first_order {
            w.zero_grad();
        }
        self.bias.zero_grad();
        if let Some(deep) = &mut self.deep {
            deep.zero_grads();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn zeroed_deep(catnn: &mut CatNN) {
        if let Some(deep) = &mut catnn.deep {
            for layer in &mut deep.layers {
                layer.w.data.iter_mut().for_each(|v| *v = 0.0);
                layer.b.data.iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }

    #[test]
    fn zero_embeddings_reduce_to_bias_plus_first_order() {
        let mut catnn = CatNN::init(&[3, 4], 2, &[4], &mut rng::stream(1, "cat")).unwrap();
        for t in &mut catnn.tables {
            t.table.data.iter_mut().for_each(|v| *v = 0.0);
        }
        zeroed_deep(&mut catnn);
        catnn.bias.data[0] = 0.3;
        catnn.first_order[0].data[1] = 0.5;
        catnn.first_order[1].data[2] = -0.2;
        let y = catnn.forward_one(&[1, 2]).unwrap();
        assert!((y - (0.3 + 0.5 - 0.2)).abs() < 1e-15);
    }

    #[test]
    fn single_column_has_no_second_order_term() {
        let mut catnn = CatNN::init(&[5], 3, &[4], &mut rng::stream(2, "cat")).unwrap();
        zeroed_deep(&mut catnn);
        let fm = catnn.fm_forward(&[2]).unwrap();
        // ½(‖v‖² − ‖v‖²) = 0, bias and first-order are 0
        assert!(fm.abs() < 1e-15);
    }

    #[test]
    fn fm_identity_hand_case() {
        // S=2, v1=v2=[1,0]: ½((2²+0) − (1+1)) = 1
        let mut catnn = CatNN::init(&[2, 2], 2, &[4], &mut rng::stream(3, "cat")).unwrap();
        zeroed_deep(&mut catnn);
        catnn.tables[0].table.data = vec![1.0, 0.0, 0.0, 0.0];
        catnn.tables[1].table.data = vec![1.0, 0.0, 0.0, 0.0];
        let y = catnn.forward_one(&[0, 0]).unwrap();
        assert!((y - 1.0).abs() < 1e-15);
        assert!((catnn.fm_forward(&[0, 0]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn relabeling_symmetry() {
        // permuting two vocabulary rows together with their embedding and
        // first-order rows leaves the output unchanged
        let mut catnn = CatNN::init(&[4, 3], 3, &[5], &mut rng::stream(4, "cat")).unwrap();
        catnn.first_order[0].data = vec![0.1, -0.3, 0.2, 0.4];
        let before = catnn.forward_one(&[1, 2]).unwrap();

        let mut permuted = catnn.clone();
        let d = 3;
        // swap rows 0 and 1 of column 0
        for k in 0..d {
            permuted.tables[0].table.data.swap(k, d + k);
        }
        permuted.first_order[0].data.swap(0, 1);
        let after = permuted.forward_one(&[0, 2]).unwrap();
        assert!((before - after).abs() < 1e-15);
    }

    #[test]
    fn out_of_range_code_is_an_error() {
        let catnn = CatNN::init(&[3], 2, &[4], &mut rng::stream(5, "cat")).unwrap();
        assert!(catnn.forward_one(&[3]).is_err());
        assert!(catnn.fm_forward(&[7]).is_err());
    }

    #[test]
    fn no_sparse_columns_degenerates_to_bias() {
        let mut catnn = CatNN::init(&[], 2, &[4], &mut rng::stream(6, "cat")).unwrap();
        catnn.bias.data[0] = 0.9;
        let (y, cache) = catnn.forward(&[], 2).unwrap();
        assert_eq!(y, vec![0.9, 0.9]);
        catnn.backward(&cache, &[1.0, 1.0]).unwrap();
        assert_eq!(catnn.bias.grad()[0], 2.0);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut catnn = CatNN::init(&[3, 2], 2, &[4], &mut rng::stream(7, "cat")).unwrap();
        let codes = vec![1u32, 0, 2, 1, 1, 0];
        let batch = 3;
        // scalar objective: ½Σ y²
        let (y, cache) = catnn.forward(&codes, batch).unwrap();
        catnn.zero_grads();
        catnn.backward(&cache, &y).unwrap();

        struct Case {
            catnn: CatNN,
            codes: Vec<u32>,
            batch: usize,
        }
        let mut case = Case {
            catnn,
            codes,
            batch,
        };
        let report = crate::nn::grad_check(
            &mut case,
            |c| {
                let (y, _) = c.catnn.forward(&c.codes, c.batch).unwrap();
                0.5 * y.iter().map(|v| v * v).sum::<f64>()
            },
            |c| c.catnn.params_mut(),
            1e-5,
        );
        assert!(report.max_rel_err < 1e-4, "err {}", report.max_rel_err);
    }
}
