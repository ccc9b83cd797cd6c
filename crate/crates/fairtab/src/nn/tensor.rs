//! Flat value container with an optional gradient buffer.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Row-major values plus, for trainable parameters, a gradient buffer of
/// identical shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    pub grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Tensor {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; len],
            grad: None,
        }
    }

    /// A trainable parameter: gradient buffer allocated and zeroed.
    pub fn param(shape: &[usize], data: Vec<f64>) -> Tensor {
        let len: usize = shape.iter().product();
        assert_eq!(len, data.len(), "shape/data mismatch");
        Tensor {
            shape: shape.to_vec(),
            grad: Some(vec![0.0; len]),
            data,
        }
    }

    pub fn scalar_param(v: f64) -> Tensor {
        Tensor::param(&[1], vec![v])
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(0)
    }

    pub fn cols(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(1)
    }

    pub fn grad(&self) -> &[f64] {
        self.grad.as_deref().expect("tensor has no gradient buffer")
    }

    pub fn grad_mut(&mut self) -> &mut [f64] {
        self.grad.as_deref_mut().expect("tensor has no gradient buffer")
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = &mut self.grad {
            g.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    pub fn assert_finite(&self, what: &str) -> Result<()> {
        if self.data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!("{what} produced non-finite values")));
        }
        Ok(())
    }
}

/// Check a plain slice for NaN/Inf.
pub fn assert_all_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric(format!("{what} produced non-finite values")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_allocates_matching_grad() {
        let mut t = Tensor::param(&[2, 3], vec![1.0; 6]);
        assert_eq!(t.grad().len(), 6);
        t.grad_mut()[4] = 2.5;
        t.zero_grad();
        assert!(t.grad().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn finite_check_flags_nan() {
        let t = Tensor::param(&[2], vec![1.0, f64::NAN]);
        assert!(t.assert_finite("test").is_err());
    }
}
