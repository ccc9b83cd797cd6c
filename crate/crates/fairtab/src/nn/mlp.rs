//! Dense multi-layer perceptron with cached forward and hand-rolled backward.

use crate::error::{Error, Result};
use crate::nn::tensor::{assert_all_finite, Tensor};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => crate::nn::loss::sigmoid(z),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation `z`.
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = crate::nn::loss::sigmoid(z);
                s * (1.0 - s)
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Layer widths (including the input width) and one activation per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub widths: Vec<usize>,
    pub activations: Vec<Activation>,
    pub seed: u64,
}

impl MlpSpec {
    /// Relu hidden layers with an identity output layer.
    pub fn relu_tower(widths: Vec<usize>, seed: u64) -> MlpSpec {
        let n_layers = widths.len().saturating_sub(1);
        let mut activations = vec![Activation::Relu; n_layers];
        if let Some(last) = activations.last_mut() {
            *last = Activation::Identity;
        }
        MlpSpec {
            widths,
            activations,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 {
            return Err(Error::Config("MLP needs at least one layer".into()));
        }
        if self.widths.iter().any(|&w| w == 0) {
            return Err(Error::Config("MLP widths must be positive".into()));
        }
        if self.activations.len() != self.widths.len() - 1 {
            return Err(Error::Config(format!(
                "{} activations for {} layers",
                self.activations.len(),
                self.widths.len() - 1
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// out×in, row-major.
    pub w: Tensor,
    pub b: Tensor,
    pub act: Activation,
}

/// A fully-connected network. `forward` returns a cache consumed by
/// `backward`, which accumulates parameter gradients and returns the
/// gradient w.r.t. the input batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
    pub spec: MlpSpec,
}

/// Per-layer inputs and pre-activations cached by a forward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    inputs: Vec<Vec<f64>>,
    preacts: Vec<Vec<f64>>,
    batch: usize,
}

impl Mlp {
    /// Xavier-uniform weights, zero biases, deterministic in draw order.
    pub fn init(spec: MlpSpec, rng: &mut impl Rng) -> Result<Mlp> {
        spec.validate()?;
        let mut layers = Vec::with_capacity(spec.widths.len() - 1);
        for l in 0..spec.widths.len() - 1 {
            let fan_in = spec.widths[l];
            let fan_out = spec.widths[l + 1];
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let w: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| rng.gen_range(-bound..bound))
                .collect();
            layers.push(DenseLayer {
                w: Tensor::param(&[fan_out, fan_in], w),
                b: Tensor::param(&[fan_out], vec![0.0; fan_out]),
                act: spec.activations[l],
            });
        }
        Ok(Mlp { layers, spec })
    }

    pub fn in_dim(&self) -> usize {
        self.spec.widths[0]
    }

    pub fn out_dim(&self) -> usize {
        *self.spec.widths.last().unwrap()
    }

    /// Batched forward pass; `x` is row-major batch×in_dim.
    pub fn forward(&self, x: &[f64], batch: usize) -> Result<(Vec<f64>, MlpCache)> {
        if x.len() != batch * self.in_dim() {
            return Err(Error::Shape(format!(
                "input of {} values is not batch {} × width {}",
                x.len(),
                batch,
                self.in_dim()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut preacts = Vec::with_capacity(self.layers.len());
        let mut current = x.to_vec();
        for layer in &self.layers {
            let in_dim = layer.w.cols();
            let out_dim = layer.w.rows();
            let mut z = vec![0.0; batch * out_dim];
            for r in 0..batch {
                let row = &current[r * in_dim..(r + 1) * in_dim];
                for o in 0..out_dim {
                    let w_row = &layer.w.data[o * in_dim..(o + 1) * in_dim];
                    let mut acc = layer.b.data[o];
                    for (xi, wi) in row.iter().zip(w_row) {
                        acc += xi * wi;
                    }
                    z[r * out_dim + o] = acc;
                }
            }
            let a: Vec<f64> = z.iter().map(|&v| layer.act.apply(v)).collect();
            inputs.push(current);
            preacts.push(z);
            current = a;
        }
        assert_all_finite(&current, "mlp forward")?;
        Ok((
            current,
            MlpCache {
                inputs,
                preacts,
                batch,
            },
        ))
    }

    /// Accumulate parameter gradients from `d_out` (batch×out_dim) and
    /// return the gradient w.r.t. the input batch.
    pub fn backward(&mut self, cache: &MlpCache, d_out: &[f64]) -> Result<Vec<f64>> {
        if cache.inputs.len() != self.layers.len() {
            return Err(Error::State(
                "backward called with a cache from a different network".into(),
            ));
        }
        if d_out.len() != cache.batch * self.out_dim() {
            return Err(Error::Shape(format!(
                "upstream gradient of {} values is not batch {} × width {}",
                d_out.len(),
                cache.batch,
                self.out_dim()
            )));
        }
        let batch = cache.batch;
        let mut upstream = d_out.to_vec();
        for (l, layer) in self.layers.iter_mut().enumerate().rev() {
            let in_dim = layer.w.cols();
            let out_dim = layer.w.rows();
            let z = &cache.preacts[l];
            let x = &cache.inputs[l];
            // dz = upstream ⊙ act'(z)
            let mut dz = upstream;
            for (d, &zv) in dz.iter_mut().zip(z.iter()) {
                *d *= layer.act.derivative(zv);
            }
            {
                let gw = layer.w.grad_mut();
                for r in 0..batch {
                    for o in 0..out_dim {
                        let d = dz[r * out_dim + o];
                        if d == 0.0 {
                            continue;
                        }
                        let x_row = &x[r * in_dim..(r + 1) * in_dim];
                        let g_row = &mut gw[o * in_dim..(o + 1) * in_dim];
                        for (g, xi) in g_row.iter_mut().zip(x_row) {
                            *g += d * xi;
                        }
                    }
                }
            }
            {
                let gb = layer.b.grad_mut();
                for r in 0..batch {
                    for o in 0..out_dim {
                        gb[o] += dz[r * out_dim + o];
                    }
                }
            }
            let mut dx = vec![0.0; batch * in_dim];
            for r in 0..batch {
                for o in 0..out_dim {
                    let d = dz[r * out_dim + o];
                    if d == 0.0 {
                        continue;
                    }
                    let w_row = &layer.w.data[o * in_dim..(o + 1) * in_dim];
                    let dx_row = &mut dx[r * in_dim..(r + 1) * in_dim];
                    for (dxi, wi) in dx_row.iter_mut().zip(w_row) {
                        *dxi += d * wi;
                    }
                }
            }
            upstream = dx;
        }
        Ok(upstream)
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.w, &mut l.b])
            .collect()
    }

    pub fn zero_grads(&mut self) {
        for layer in &mut self.layers {
            layer.w.zero_grad();
            layer.b.zero_grad();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn identity_mlp(dim: usize) -> Mlp {
        let spec = MlpSpec {
            widths: vec![dim, dim],
            activations: vec![Activation::Identity],
            seed: 0,
        };
        let mut mlp = Mlp::init(spec, &mut rng::stream(0, "t")).unwrap();
        let mut w = vec![0.0; dim * dim];
        for i in 0..dim {
            w[i * dim + i] = 1.0;
        }
        mlp.layers[0].w.data = w;
        mlp.layers[0].b.data = vec![0.0; dim];
        mlp
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let mlp = identity_mlp(3);
        let x = vec![0.5, -1.0, 2.0, 3.0, 4.0, 5.0];
        let (y, _) = mlp.forward(&x, 2).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn relu_clamps_negatives() {
        let spec = MlpSpec {
            widths: vec![2, 2],
            activations: vec![Activation::Relu],
            seed: 0,
        };
        let mut mlp = Mlp::init(spec, &mut rng::stream(0, "t")).unwrap();
        mlp.layers[0].w.data = vec![1.0, 0.0, 0.0, 1.0];
        let (y, _) = mlp.forward(&[-1.0, 2.0], 1).unwrap();
        assert_eq!(y, vec![0.0, 2.0]);
    }

    #[test]
    fn zero_weights_yield_constant_bias() {
        let spec = MlpSpec {
            widths: vec![3, 2],
            activations: vec![Activation::Identity],
            seed: 0,
        };
        let mut mlp = Mlp::init(spec, &mut rng::stream(0, "t")).unwrap();
        mlp.layers[0].w.data = vec![0.0; 6];
        mlp.layers[0].b.data = vec![0.7, -0.2];
        let (y, _) = mlp.forward(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 2).unwrap();
        assert_eq!(y, vec![0.7, -0.2, 0.7, -0.2]);
    }

    #[test]
    fn quadratic_loss_gradient_closed_form() {
        // loss = ½‖Wx‖² for a single sample: dL/dW = (Wx)xᵀ
        let spec = MlpSpec {
            widths: vec![3, 2],
            activations: vec![Activation::Identity],
            seed: 4,
        };
        let mut mlp = Mlp::init(spec, &mut rng::stream(4, "t")).unwrap();
        mlp.layers[0].b.data = vec![0.0, 0.0];
        let x = vec![0.3, -0.7, 1.1];
        let (y, cache) = mlp.forward(&x, 1).unwrap();
        mlp.backward(&cache, &y).unwrap(); // dL/dy = y for L = ½‖y‖²
        for o in 0..2 {
            for i in 0..3 {
                let expected = y[o] * x[i];
                let got = mlp.layers[0].w.grad()[o * 3 + i];
                assert!((got - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_a_shape_error() {
        let mlp = identity_mlp(3);
        assert!(mlp.forward(&[1.0, 2.0], 1).is_err());
    }

    #[test]
    fn stale_cache_is_a_state_error() {
        let mut a = identity_mlp(2);
        let deep = Mlp::init(MlpSpec::relu_tower(vec![2, 4, 1], 1), &mut rng::stream(1, "t")).unwrap();
        let (_, cache) = deep.forward(&[1.0, 2.0], 1).unwrap();
        assert!(a.backward(&cache, &[1.0]).is_err());
    }
}
