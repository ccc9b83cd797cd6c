//! Training loop of the distillation stage.
//!
//! Each group's student minimizes `mse(student(x[𝕀]), c) + α_KG ·
//! fairness-loss(y_g, maj)` where `c` are the group's leaf-embedding targets
//! and `y_g` its margin contribution through the frozen output map. The
//! fairness gradient flows through the student only.

use crate::distill::net::{out_map_weights, DistilledNet, GroupHead, OutputMap};
use crate::distill::{Distillation, DistillParams, LeafEmbedding};
use crate::error::{Error, Result};
use crate::metrics::fairness_loss_with_grad;
use crate::nn::{mse, mse_grad, sigmoid, Mlp, MlpSpec, OptConfig, Optimizer};
use crate::rng;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

/// Separately-logged loss parts per epoch; the training objective is
/// `mse + α_KG · fairness` exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupLog {
    pub epoch_mse: Vec<f64>,
    pub epoch_fairness: Vec<f64>,
    pub skipped_fairness_batches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillLog {
    pub groups: Vec<GroupLog>,
    pub alpha_kg: f64,
}

impl DistillLog {
    /// Recombine the logged parts into the stage's total training loss.
    pub fn total(&self, epoch: usize) -> f64 {
        self.groups
            .iter()
            .map(|g| g.epoch_mse[epoch] + self.alpha_kg * g.epoch_fairness[epoch])
            .sum()
    }
}

/// Train one student per group. `x_std` is the standardized dense training
/// matrix (n × d_cols); `embeddings` must be fitted unless the raw one-hot
/// debug path is active; `maj_mask` marks majority-group rows.
#[allow(clippy::too_many_arguments)]
pub fn distill_dense_net(
    distillation: &Distillation,
    embeddings: &[LeafEmbedding],
    x_std: &[f64],
    n_rows: usize,
    d_cols: usize,
    maj_mask: &[bool],
    alpha_kg: f64,
    params: &DistillParams,
) -> Result<(DistilledNet, DistillLog)> {
    if alpha_kg < 0.0 {
        return Err(Error::Config("alpha_kg must be nonnegative".into()));
    }
    if x_std.len() != n_rows * d_cols {
        return Err(Error::Shape("dense matrix shape mismatch".into()));
    }
    if maj_mask.len() != n_rows {
        return Err(Error::Config(
            "majority mask must cover every training row".into(),
        ));
    }
    if !params.raw_onehot_targets && embeddings.len() != distillation.groups.len() {
        return Err(Error::Config(format!(
            "{} embeddings for {} groups",
            embeddings.len(),
            distillation.groups.len()
        )));
    }

    let mut heads = Vec::with_capacity(distillation.groups.len());
    let mut logs = Vec::with_capacity(distillation.groups.len());

    for (g, group) in distillation.groups.iter().enumerate() {
        let slots = &distillation.leaf_slots[g];
        let m = group.members.len();

        if group.used_features.is_empty() {
            // all member trees are single leaves: constant contribution
            let value = distillation.group_margins[g][0];
            heads.push(GroupHead {
                members: group.members.clone(),
                used_features: vec![],
                student: None,
                out_map: OutputMap::Constant { value },
            });
            logs.push(GroupLog {
                epoch_mse: vec![0.0; params.epochs],
                epoch_fairness: vec![0.0; params.epochs],
                skipped_fairness_batches: 0,
            });
            continue;
        }

        // targets and output map per path
        let (targets, target_dim, out_map) = if params.raw_onehot_targets {
            let mut t = vec![0.0; n_rows * group.leaf_dim];
            for r in 0..n_rows {
                for &s in &slots[r * m..(r + 1) * m] {
                    t[r * group.leaf_dim + s as usize] = 1.0;
                }
            }
            let q_eta: Vec<f64> = group.leaf_values.iter().map(|q| q * eta_of(distillation)).collect();
            (t, group.leaf_dim, OutputMap::LeafValues { q_eta })
        } else {
            let emb = &embeddings[g];
            (
                emb.embed_all(slots, n_rows),
                emb.d_leaf(),
                OutputMap::Embedded {
                    w_out: emb.w_out.clone(),
                    b_out: emb.b_out.clone(),
                },
            )
        };

        let mut widths = vec![group.used_features.len()];
        widths.extend_from_slice(&params.hidden);
        widths.push(target_dim);
        let spec = MlpSpec::relu_tower(widths, params.seed);
        let mut student = Mlp::init(
            spec,
            &mut rng::stream(params.seed, &format!("distill/g{g}/init")),
        )?;

        // gather x[𝕀] once for all rows
        let feats = &group.used_features;
        let mut x_g = Vec::with_capacity(n_rows * feats.len());
        for r in 0..n_rows {
            let row = &x_std[r * d_cols..(r + 1) * d_cols];
            x_g.extend(feats.iter().map(|&f| row[f]));
        }

        let w_fair = out_map_weights(&out_map, target_dim);
        let in_dim = feats.len();
        let mut opt = Optimizer::adam(OptConfig {
            lr: params.lr,
            ..OptConfig::default()
        });
        let mut shuffle_rng = rng::stream(params.seed, &format!("distill/g{g}/shuffle"));
        let mut order: Vec<usize> = (0..n_rows).collect();
        let mut log = GroupLog {
            epoch_mse: Vec::with_capacity(params.epochs),
            epoch_fairness: Vec::with_capacity(params.epochs),
            skipped_fairness_batches: 0,
        };

        for _ in 0..params.epochs {
            order.shuffle(&mut shuffle_rng);
            let mut mse_sum = 0.0;
            let mut fair_sum = 0.0;
            let mut n_batches = 0usize;
            for chunk in order.chunks(params.batch_size) {
                let b = chunk.len();
                let mut xb = Vec::with_capacity(b * in_dim);
                let mut tb = Vec::with_capacity(b * target_dim);
                let mut mb = Vec::with_capacity(b);
                for &r in chunk {
                    xb.extend_from_slice(&x_g[r * in_dim..(r + 1) * in_dim]);
                    tb.extend_from_slice(&targets[r * target_dim..(r + 1) * target_dim]);
                    mb.push(maj_mask[r]);
                }
                let (out, cache) = student.forward(&xb, b)?;
                let mut d_out = mse_grad(&out, &tb);
                mse_sum += mse(&out, &tb);

                if alpha_kg > 0.0 {
                    // group margin per row through the frozen output map
                    let bias = match &out_map {
                        OutputMap::Embedded { b_out, .. } => b_out.data[0],
                        _ => 0.0,
                    };
                    let y_g: Vec<f64> = (0..b)
                        .map(|i| {
                            bias + out[i * target_dim..(i + 1) * target_dim]
                                .iter()
                                .zip(&w_fair)
                                .map(|(a, c)| a * c)
                                .sum::<f64>()
                        })
                        .collect();
                    let fair_input: Vec<f64> = if params.squash_step1 {
                        y_g.iter().map(|&v| sigmoid(v)).collect()
                    } else {
                        y_g.clone()
                    };
                    match fairness_loss_with_grad(&fair_input, &mb) {
                        Some((loss, grad)) => {
                            fair_sum += loss;
                            for i in 0..b {
                                let mut dy = alpha_kg * grad[i];
                                if params.squash_step1 {
                                    let s = fair_input[i];
                                    dy *= s * (1.0 - s);
                                }
                                if dy != 0.0 {
                                    for j in 0..target_dim {
                                        d_out[i * target_dim + j] += dy * w_fair[j];
                                    }
                                }
                            }
                        }
                        None => log.skipped_fairness_batches += 1,
                    }
                }

                student.zero_grads();
                student.backward(&cache, &d_out)?;
                opt.step(&mut student.params_mut())?;
                n_batches += 1;
            }
            log.epoch_mse.push(mse_sum / n_batches as f64);
            log.epoch_fairness.push(fair_sum / n_batches as f64);
        }

        heads.push(GroupHead {
            members: group.members.clone(),
            used_features: group.used_features.clone(),
            student: Some(student),
            out_map,
        });
        logs.push(log);
    }

    Ok((
        DistilledNet {
            groups: heads,
            base_score: distillation.base_score,
            d_cols,
        },
        DistillLog {
            groups: logs,
            alpha_kg,
        },
    ))
}

/// The leaf values stored per group are raw; margins were scaled by the
/// teacher's learning rate during preparation, so recover it from any
/// nonconstant group (falls back to 1.0 for degenerate teachers).
fn eta_of(distillation: &Distillation) -> f64 {
    distillation.eta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distill::prepare_distillation;
    use crate::rng;
    use crate::trees::{fit_gbdt, predict_margin, GbdtParams, XMatrix};

    fn toy(n: usize, seed: u64) -> (Vec<f64>, Vec<u8>, Vec<bool>) {
        let mut r = rng::stream(seed, "distill-data");
        let mut x = Vec::with_capacity(n * 3);
        let mut y = Vec::with_capacity(n);
        let mut mask = Vec::with_capacity(n);
        for i in 0..n {
            let a = rng::normal(&mut r);
            let b = rng::normal(&mut r);
            let c = rng::normal(&mut r);
            x.extend_from_slice(&[a, b, c]);
            y.push(u8::from(a + 0.5 * b - 0.25 * c > 0.0));
            mask.push(i % 3 != 0);
        }
        (x, y, mask)
    }

    #[test]
    fn pure_distillation_mse_decreases_over_early_epochs() {
        let n = 600;
        let (x, y, mask) = toy(n, 3);
        let teacher = fit_gbdt(
            XMatrix::new(&x, n, 3),
            &y,
            &GbdtParams {
                n_trees: 20,
                max_depth: 3,
                min_samples_leaf: 5,
                ..GbdtParams::default()
            },
        )
        .unwrap();
        let params = DistillParams {
            n_groups: 2,
            d_leaf: 4,
            epochs: 4,
            ..DistillParams::default()
        };
        let dist = prepare_distillation(&teacher, &x, n, params.n_groups).unwrap();
        let embeddings: Vec<_> = (0..2)
            .map(|g| {
                crate::distill::fit_leaf_embedding(
                    &dist.groups[g],
                    &dist.leaf_slots[g],
                    &dist.group_margins[g],
                    &params,
                    &mut rng::stream(1, &format!("emb{g}")),
                )
                .unwrap()
            })
            .collect();
        let (_, log) =
            distill_dense_net(&dist, &embeddings, &x, n, 3, &mask, 0.0, &params).unwrap();
        for g in &log.groups {
            assert!(g.epoch_mse[1] < g.epoch_mse[0]);
            assert!(g.epoch_mse[2] < g.epoch_mse[1]);
            assert!(g.epoch_fairness.iter().all(|&f| f == 0.0));
        }
    }

    #[test]
    fn single_depth_one_tree_is_reproduced_via_raw_path() {
        // teacher = 1 depth-1 tree: the student sees the exact leaf pattern
        let n = 400;
        let (x, y, mask) = toy(n, 9);
        let teacher = fit_gbdt(
            XMatrix::new(&x, n, 3),
            &y,
            &GbdtParams {
                n_trees: 1,
                max_depth: 1,
                min_samples_leaf: 5,
                ..GbdtParams::default()
            },
        )
        .unwrap();
        let params = DistillParams {
            n_groups: 1,
            raw_onehot_targets: true,
            epochs: 60,
            lr: 0.01,
            ..DistillParams::default()
        };
        let dist = prepare_distillation(&teacher, &x, n, 1).unwrap();
        let (net, _) = distill_dense_net(&dist, &[], &x, n, 3, &mask, 0.0, &params).unwrap();
        let mut err = 0.0;
        let mut var = 0.0;
        let margins: Vec<f64> = (0..n)
            .map(|r| predict_margin(&teacher, &x[r * 3..(r + 1) * 3]).unwrap())
            .collect();
        let mean = margins.iter().sum::<f64>() / n as f64;
        for r in 0..n {
            let y_kd = net.y_kd(&x[r * 3..(r + 1) * 3]).unwrap();
            err += (y_kd - margins[r]).powi(2);
            var += (margins[r] - mean).powi(2);
        }
        assert!(err / n as f64 <= 0.05 * (var / n as f64), "mse {} var {}", err / n as f64, var / n as f64);
    }

    #[test]
    fn strong_fairness_weight_shrinks_group_margin_gap() {
        // biased data: feature 0 separates the groups and drives the label
        let n = 800;
        let mut r = rng::stream(17, "biased");
        let mut x = Vec::with_capacity(n * 2);
        let mut y = Vec::with_capacity(n);
        let mut mask = Vec::with_capacity(n);
        for i in 0..n {
            let g_a = i % 2 == 0;
            let shift = if g_a { 1.0 } else { -1.0 };
            let a = rng::normal(&mut r) + shift;
            let b = rng::normal(&mut r);
            x.extend_from_slice(&[a, b]);
            y.push(u8::from(a + 0.3 * b > 0.0));
            mask.push(g_a);
        }
        let teacher = fit_gbdt(
            XMatrix::new(&x, n, 2),
            &y,
            &GbdtParams {
                n_trees: 10,
                max_depth: 3,
                min_samples_leaf: 5,
                ..GbdtParams::default()
            },
        )
        .unwrap();
        let params = DistillParams {
            n_groups: 2,
            d_leaf: 3,
            epochs: 8,
            ..DistillParams::default()
        };
        let dist = prepare_distillation(&teacher, &x, n, 2).unwrap();
        let embeddings: Vec<_> = (0..2)
            .map(|g| {
                crate::distill::fit_leaf_embedding(
                    &dist.groups[g],
                    &dist.leaf_slots[g],
                    &dist.group_margins[g],
                    &params,
                    &mut rng::stream(2, &format!("emb{g}")),
                )
                .unwrap()
            })
            .collect();

        let gap_of = |net: &DistilledNet| {
            let (mut sa, mut na, mut sb, mut nb) = (0.0, 0usize, 0.0, 0usize);
            for i in 0..n {
                let v = net.y_kd(&x[i * 2..(i + 1) * 2]).unwrap();
                if i % 2 == 0 {
                    sa += v;
                    na += 1;
                } else {
                    sb += v;
                    nb += 1;
                }
            }
            (sa / na as f64 - sb / nb as f64).abs()
        };

        let (plain, _) =
            distill_dense_net(&dist, &embeddings, &x, n, 2, &mask, 0.0, &params).unwrap();
        let (fair, log) =
            distill_dense_net(&dist, &embeddings, &x, n, 2, &mask, 1000.0, &params).unwrap();
        assert!(log.groups.iter().any(|g| g.epoch_fairness.iter().any(|&f| f > 0.0)));
        assert!(
            gap_of(&fair) < gap_of(&plain),
            "fair gap {} vs plain gap {}",
            gap_of(&fair),
            gap_of(&plain)
        );
    }
}
