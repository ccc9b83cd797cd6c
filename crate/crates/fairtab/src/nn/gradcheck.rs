//! Central finite-difference verification of analytic gradients.

use crate::nn::tensor::Tensor;

/// `|a − fd| / max(|a|, |fd|, 1)`: relative for large gradients, absolute
/// for vanishing ones where finite differences are pure roundoff.
pub fn max_rel_err(analytic: f64, fd: f64) -> f64 {
    (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1.0)
}

/// Worst disagreement between the already-populated analytic gradients and
/// central differences `(f(θ+ε) − f(θ−ε)) / 2ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_err: f64,
    /// (tensor position, element index) of the worst parameter.
    pub worst: (usize, usize),
}

/// Run backward once (populating gradients) before calling. `params_of` must
/// return the same tensors in the same order on every call; `forward`
/// re-evaluates the scalar objective at the current parameters.
pub fn grad_check<M>(
    model: &mut M,
    mut forward: impl FnMut(&mut M) -> f64,
    params_of: impl Fn(&mut M) -> Vec<&mut Tensor>,
    eps: f64,
) -> GradCheck {
    let analytic: Vec<Vec<f64>> = params_of(model)
        .iter()
        .map(|t| t.grad().to_vec())
        .collect();
    let mut report = GradCheck {
        max_rel_err: 0.0,
        worst: (0, 0),
    };
    for ti in 0..analytic.len() {
        for j in 0..analytic[ti].len() {
            params_of(model)[ti].data[j] += eps;
            let f_plus = forward(model);
            params_of(model)[ti].data[j] -= 2.0 * eps;
            let f_minus = forward(model);
            params_of(model)[ti].data[j] += eps;
            let fd = (f_plus - f_minus) / (2.0 * eps);
            let err = max_rel_err(analytic[ti][j], fd);
            if err > report.max_rel_err {
                report.max_rel_err = err;
                report.worst = (ti, j);
            }
        }
    }
    report
}
