//! Trainable lookup table mapping category codes to dense vectors.

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;
use crate::rng;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// A c×d embedding matrix for one categorical column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub table: Tensor,
}

impl EmbeddingTable {
    /// Rows drawn from normal(0, 0.01).
    pub fn init(cardinality: usize, dim: usize, rng_src: &mut impl Rng) -> EmbeddingTable {
        let data: Vec<f64> = (0..cardinality * dim)
            .map(|_| 0.01 * rng::normal(rng_src))
            .collect();
        EmbeddingTable {
            table: Tensor::param(&[cardinality, dim], data),
        }
    }

    pub fn cardinality(&self) -> usize {
        self.table.rows()
    }

    pub fn dim(&self) -> usize {
        self.table.cols()
    }

    pub fn row(&self, code: u32) -> Result<&[f64]> {
        let d = self.dim();
        let c = code as usize;
        if c >= self.cardinality() {
            return Err(Error::Shape(format!(
                "code {c} out of range for table of {} rows",
                self.cardinality()
            )));
        }
        Ok(&self.table.data[c * d..(c + 1) * d])
    }

    /// Gather rows for a batch of codes into a batch×d matrix.
    pub fn lookup(&self, codes: &[u32]) -> Result<Vec<f64>> {
        let d = self.dim();
        let mut out = Vec::with_capacity(codes.len() * d);
        for &code in codes {
            out.extend_from_slice(self.row(code)?);
        }
        Ok(out)
    }

    /// Scatter-add `d_out` (batch×d) back into the gradient rows. Repeated
    /// codes in the batch accumulate their gradients.
    pub fn backward(&mut self, codes: &[u32], d_out: &[f64]) {
        let d = self.dim();
        debug_assert_eq!(d_out.len(), codes.len() * d);
        let grad = self.table.grad_mut();
        for (i, &code) in codes.iter().enumerate() {
            let g_row = &mut grad[code as usize * d..(code as usize + 1) * d];
            for (g, v) in g_row.iter_mut().zip(&d_out[i * d..(i + 1) * d]) {
                *g += v;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_gathers_rows_in_order() {
        let mut t = EmbeddingTable::init(3, 2, &mut rng::stream(1, "emb"));
        t.table.data = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        assert_eq!(t.lookup(&[2, 0]).unwrap(), vec![5.0, 6.0, 1.0, 2.0]);
        assert!(t.lookup(&[3]).is_err());
    }

    #[test]
    fn repeated_codes_accumulate_gradient() {
        let mut t = EmbeddingTable::init(3, 2, &mut rng::stream(1, "emb"));
        t.backward(&[1, 1, 0], &[0.5, 0.5, 1.0, 1.0, 2.0, 2.0]);
        assert_eq!(&t.table.grad()[2..4], &[1.5, 1.5]);
        assert_eq!(&t.table.grad()[0..2], &[2.0, 2.0]);
        // untouched row keeps exact zero
        assert_eq!(&t.table.grad()[4..6], &[0.0, 0.0]);
    }
}
