//! Step one of the pipeline: partition the teacher's trees into groups,
//! learn a low-dimensional embedding of each group's leaf membership, and
//! train one dense student network per group against those embeddings with
//! an optional fairness penalty on the student's margin contribution.

mod leaf_embed;
mod net;
mod train;

pub use leaf_embed::{fit_leaf_embedding, LeafEmbedding};
pub use net::{DenseForward, DistilledNet, GroupHead, OutputMap};
pub use train::{distill_dense_net, DistillLog, GroupLog};

use crate::error::{Error, Result};
use crate::trees::{used_feature_indices, GbdtModel};
use serde::{Deserialize, Serialize};

/// Hyperparameters of the distillation stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillParams {
    pub n_groups: usize,
    /// Leaf-embedding dimension (the width of the distillation targets).
    pub d_leaf: usize,
    /// Hidden widths of each student network.
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    /// Debug path: distill raw multi-hot leaf memberships instead of the
    /// learned embedding, with leaf values as the output map.
    pub raw_onehot_targets: bool,
    /// Apply a sigmoid to the margin before the step-one fairness term.
    pub squash_step1: bool,
    pub seed: u64,
}

impl Default for DistillParams {
    fn default() -> Self {
        DistillParams {
            n_groups: 5,
            d_leaf: 20,
            hidden: vec![64, 32],
            epochs: 10,
            lr: 0.001,
            batch_size: 256,
            raw_onehot_targets: false,
            squash_step1: false,
            seed: 0,
        }
    }
}

/// A contiguous slice of the boosted ensemble: member trees, their combined
/// used-feature index set, and the concatenated leaf-value vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeGroup {
    pub members: Vec<usize>,
    pub used_features: Vec<usize>,
    /// Total one-hot leaf width over members.
    pub leaf_dim: usize,
    /// Concatenated leaf values of the member trees.
    pub leaf_values: Vec<f64>,
    /// Offset of each member's leaf block inside the concatenated space.
    pub leaf_offsets: Vec<usize>,
}

/// Contiguous equal-size grouping by boosting order; the remainder goes to
/// the early groups.
pub fn group_trees(model: &GbdtModel, n_groups: usize) -> Result<Vec<TreeGroup>> {
    let n_trees = model.trees.len();
    if n_groups == 0 || n_groups > n_trees {
        return Err(Error::Config(format!(
            "cannot split {n_trees} trees into {n_groups} groups"
        )));
    }
    let base = n_trees / n_groups;
    let remainder = n_trees % n_groups;
    let mut groups = Vec::with_capacity(n_groups);
    let mut start = 0;
    for g in 0..n_groups {
        let size = base + usize::from(g < remainder);
        let members: Vec<usize> = (start..start + size).collect();
        start += size;
        let trees: Vec<_> = members.iter().map(|&t| model.trees[t].clone()).collect();
        let mut leaf_values = Vec::new();
        let mut leaf_offsets = Vec::with_capacity(members.len());
        for tree in &trees {
            leaf_offsets.push(leaf_values.len());
            leaf_values.extend(tree.leaf_values());
        }
        groups.push(TreeGroup {
            used_features: used_feature_indices(&trees),
            leaf_dim: leaf_values.len(),
            leaf_values,
            leaf_offsets,
            members,
        });
    }
    Ok(groups)
}

/// Per-row leaf slots (indices into the group's concatenated leaf space) and
/// the teacher's per-row margin contribution `η·Σ q` for each group.
pub struct Distillation {
    pub groups: Vec<TreeGroup>,
    /// Per group: n_rows × n_members slot indices, row-major.
    pub leaf_slots: Vec<Vec<u32>>,
    /// Per group: the η-scaled margin contribution of each row.
    pub group_margins: Vec<Vec<f64>>,
    pub base_score: f64,
    /// Teacher shrinkage, needed to scale raw leaf values into margins.
    pub eta: f64,
}

/// Run the teacher over the raw dense training matrix and collect the
/// per-group leaf memberships and margin contributions.
pub fn prepare_distillation(
    teacher: &GbdtModel,
    x_raw: &[f64],
    n_rows: usize,
    n_groups: usize,
) -> Result<Distillation> {
    let d = teacher.n_features;
    if x_raw.len() != n_rows * d {
        return Err(Error::Shape("raw matrix does not match teacher width".into()));
    }
    let groups = group_trees(teacher, n_groups)?;
    let mut leaf_slots: Vec<Vec<u32>> = groups
        .iter()
        .map(|g| Vec::with_capacity(n_rows * g.members.len()))
        .collect();
    let mut group_margins: Vec<Vec<f64>> =
        groups.iter().map(|_| Vec::with_capacity(n_rows)).collect();

    for r in 0..n_rows {
        let row = &x_raw[r * d..(r + 1) * d];
        for (gi, group) in groups.iter().enumerate() {
            let mut margin = 0.0;
            for (m, &t) in group.members.iter().enumerate() {
                let (leaf, value) = teacher.trees[t].leaf_of(row);
                leaf_slots[gi].push((group.leaf_offsets[m] + leaf) as u32);
                margin += value;
            }
            group_margins[gi].push(teacher.learning_rate * margin);
        }
    }
    Ok(Distillation {
        groups,
        leaf_slots,
        group_margins,
        base_score: teacher.base_score,
        eta: teacher.learning_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::trees::{fit_gbdt, predict_margin, GbdtParams, XMatrix};

    fn toy_teacher(n_trees: usize) -> (GbdtModel, Vec<f64>, usize) {
        let n = 80;
        let mut rng = rng::stream(5, "group-data");
        let mut x = Vec::with_capacity(n * 3);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let a = rng::normal(&mut rng);
            let b = rng::normal(&mut rng);
            let c = rng::normal(&mut rng);
            x.extend_from_slice(&[a, b, c]);
            y.push(u8::from(a - b + 0.5 * c > 0.0));
        }
        let params = GbdtParams {
            n_trees,
            max_depth: 3,
            min_samples_leaf: 4,
            ..GbdtParams::default()
        };
        let model = fit_gbdt(XMatrix::new(&x, n, 3), &y, &params).unwrap();
        (model, x, n)
    }

    #[test]
    fn even_and_remainder_group_sizes() {
        let (model, _, _) = toy_teacher(100);
        let groups = group_trees(&model, 5).unwrap();
        assert!(groups.iter().all(|g| g.members.len() == 20));

        let (model7, _, _) = toy_teacher(7);
        let sizes: Vec<usize> = group_trees(&model7, 3)
            .unwrap()
            .iter()
            .map(|g| g.members.len())
            .collect();
        assert_eq!(sizes, vec![3, 2, 2]);
    }

    #[test]
    fn single_group_covers_whole_ensemble() {
        let (model, _, _) = toy_teacher(10);
        let groups = group_trees(&model, 1).unwrap();
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].members, (0..10).collect::<Vec<_>>());
        assert_eq!(
            groups[0].used_features,
            used_feature_indices(&model.trees)
        );
    }

    #[test]
    fn groups_partition_every_tree_exactly_once() {
        let (model, _, _) = toy_teacher(23);
        let groups = group_trees(&model, 4).unwrap();
        let mut seen = vec![false; 23];
        for g in &groups {
            for &t in &g.members {
                assert!(!seen[t]);
                seen[t] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
        assert!(group_trees(&model, 0).is_err());
        assert!(group_trees(&model, 24).is_err());
    }

    #[test]
    fn group_margins_sum_to_teacher_margin() {
        let (model, x, n) = toy_teacher(12);
        let dist = prepare_distillation(&model, &x, n, 4).unwrap();
        for r in 0..n {
            let total: f64 = dist.group_margins.iter().map(|m| m[r]).sum();
            let expected = predict_margin(&model, &x[r * 3..(r + 1) * 3]).unwrap();
            assert!((dist.base_score + total - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn leaf_slots_stay_inside_group_blocks() {
        let (model, x, n) = toy_teacher(9);
        let dist = prepare_distillation(&model, &x, n, 3).unwrap();
        for (g, slots) in dist.groups.iter().zip(&dist.leaf_slots) {
            assert_eq!(slots.len(), n * g.members.len());
            assert!(slots.iter().all(|&s| (s as usize) < g.leaf_dim));
        }
    }
}
