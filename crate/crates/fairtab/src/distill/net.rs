//! The distilled dense-path network: one student MLP per tree group plus the
//! group's output map, summing to the dense margin `y_KD`.

use crate::error::{Error, Result};
use crate::nn::{Mlp, MlpCache, Tensor};
use serde::{Deserialize, Serialize};

/// Maps a student's output vector to the group's margin contribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OutputMap {
    /// Learned leaf-embedding head: `w_out·out + b_out`.
    Embedded { w_out: Tensor, b_out: Tensor },
    /// Debug path over raw multi-hot targets: dot with η-scaled leaf values.
    LeafValues { q_eta: Vec<f64> },
    /// Groups of single-leaf trees contribute a constant margin.
    Constant { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupHead {
    pub members: Vec<usize>,
    /// The group's used-feature index set 𝕀; the student reads x^d[𝕀].
    pub used_features: Vec<usize>,
    pub student: Option<Mlp>,
    pub out_map: OutputMap,
}

/// Neural surrogate of the boosted teacher: `y_KD(x) = base_score +
/// Σ_g out_map_g(student_g(x[𝕀_g]))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistilledNet {
    pub groups: Vec<GroupHead>,
    pub base_score: f64,
    /// Width of the full dense row the heads gather from.
    pub d_cols: usize,
}

/// Cached state of a batched dense-path forward pass.
pub struct DenseForward {
    /// y_KD per row.
    pub y: Vec<f64>,
    pub batch: usize,
    group_caches: Vec<Option<MlpCache>>,
    group_outputs: Vec<Vec<f64>>,
}

impl DistilledNet {
    pub fn gather_group_input(&self, g: usize, x_std: &[f64], batch: usize) -> Vec<f64> {
        let feats = &self.groups[g].used_features;
        let mut out = Vec::with_capacity(batch * feats.len());
        for r in 0..batch {
            let row = &x_std[r * self.d_cols..(r + 1) * self.d_cols];
            out.extend(feats.iter().map(|&f| row[f]));
        }
        out
    }

    /// Batched forward over standardized dense rows (batch × d_cols).
    pub fn forward_batch(&self, x_std: &[f64], batch: usize) -> Result<DenseForward> {
        if x_std.len() != batch * self.d_cols {
            return Err(Error::Shape(format!(
                "dense batch of {} values is not batch {} × width {}",
                x_std.len(),
                batch,
                self.d_cols
            )));
        }
        let mut y = vec![self.base_score; batch];
        let mut group_caches = Vec::with_capacity(self.groups.len());
        let mut group_outputs = Vec::with_capacity(self.groups.len());
        for (g, head) in self.groups.iter().enumerate() {
            match (&head.student, &head.out_map) {
                (Some(student), out_map) => {
                    let input = self.gather_group_input(g, x_std, batch);
                    let (out, cache) = student.forward(&input, batch)?;
                    let width = student.out_dim();
                    for r in 0..batch {
                        let o = &out[r * width..(r + 1) * width];
                        y[r] += apply_out_map(out_map, o);
                    }
                    group_caches.push(Some(cache));
                    group_outputs.push(out);
                }
                (None, OutputMap::Constant { value }) => {
                    for v in y.iter_mut() {
                        *v += value;
                    }
                    group_caches.push(None);
                    group_outputs.push(Vec::new());
                }
                (None, _) => {
                    return Err(Error::State(
                        "group without a student must use a constant output map".into(),
                    ))
                }
            }
        }
        Ok(DenseForward {
            y,
            batch,
            group_caches,
            group_outputs,
        })
    }

    /// Distribute `d_y` (batch) through every group head, accumulating
    /// student gradients and, when `train_out_maps`, output-map gradients.
    pub fn backward_batch(
        &mut self,
        fwd: &DenseForward,
        d_y: &[f64],
        train_out_maps: bool,
    ) -> Result<()> {
        if d_y.len() != fwd.batch {
            return Err(Error::Shape("upstream gradient does not match batch".into()));
        }
        for (g, head) in self.groups.iter_mut().enumerate() {
            let Some(student) = &mut head.student else {
                continue;
            };
            let width = student.out_dim();
            let out = &fwd.group_outputs[g];
            let mut d_out = vec![0.0; fwd.batch * width];
            match &mut head.out_map {
                OutputMap::Embedded { w_out, b_out } => {
                    for r in 0..fwd.batch {
                        let dy = d_y[r];
                        if train_out_maps && dy != 0.0 {
                            b_out.grad_mut()[0] += dy;
                        }
                        let o = &out[r * width..(r + 1) * width];
                        let Tensor {
                            data: w_data,
                            grad: w_grad,
                            ..
                        } = w_out;
                        let w_grad = w_grad.as_deref_mut().unwrap();
                        for j in 0..width {
                            d_out[r * width + j] = dy * w_data[j];
                            if train_out_maps {
                                w_grad[j] += dy * o[j];
                            }
                        }
                    }
                }
                OutputMap::LeafValues { q_eta } => {
                    for r in 0..fwd.batch {
                        let dy = d_y[r];
                        for j in 0..width {
                            d_out[r * width + j] = dy * q_eta[j];
                        }
                    }
                }
                OutputMap::Constant { .. } => unreachable!("student present"),
            }
            let cache = fwd.group_caches[g].as_ref().expect("student cache");
            student.backward(cache, &d_out)?;
        }
        Ok(())
    }

    /// Single-row dense margin.
    pub fn y_kd(&self, x_std_row: &[f64]) -> Result<f64> {
        Ok(self.forward_batch(x_std_row, 1)?.y[0])
    }

    /// Trainable tensors: student parameters, plus output maps when
    /// `include_out_maps`.
    pub fn params_mut(&mut self, include_out_maps: bool) -> Vec<&mut Tensor> {
        let mut params = Vec::new();
        for head in &mut self.groups {
            if let Some(student) = &mut head.student {
                params.extend(student.params_mut());
            }
            if include_out_maps {
                if let OutputMap::Embedded { w_out, b_out } = &mut head.out_map {
                    params.push(w_out);
                    params.push(b_out);
                }
            }
        }
        params
    }

    pub fn zero_grads(&mut self) {
        for head in &mut self.groups {
            if let Some(student) = &mut head.student {
                student.zero_grads();
            }
            if let OutputMap::Embedded { w_out, b_out } = &mut head.out_map {
                w_out.zero_grad();
                b_out.zero_grad();
            }
        }
    }
}

fn apply_out_map(map: &OutputMap, out: &[f64]) -> f64 {
    match map {
        OutputMap::Embedded { w_out, b_out } => {
            b_out.data[0] + out.iter().zip(&w_out.data).map(|(a, b)| a * b).sum::<f64>()
        }
        OutputMap::LeafValues { q_eta } => {
            out.iter().zip(q_eta).map(|(a, b)| a * b).sum::<f64>()
        }
        OutputMap::Constant { value } => *value,
    }
}

/// Gradient of the out-map scalar w.r.t. the student output, used by the
/// step-one fairness term where the output maps stay frozen.
pub(crate) fn out_map_weights(map: &OutputMap, width: usize) -> Vec<f64> {
    match map {
        OutputMap::Embedded { w_out, .. } => w_out.data.clone(),
        OutputMap::LeafValues { q_eta } => q_eta.clone(),
        OutputMap::Constant { .. } => vec![0.0; width],
    }
}
