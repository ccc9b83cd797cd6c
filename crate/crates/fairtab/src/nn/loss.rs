//! Scalar losses and the logistic squashing function.

/// Probabilities are clipped to `[PROB_CLIP, 1 - PROB_CLIP]` before logs.
pub const PROB_CLIP: f64 = 1e-7;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy `−[y·log p + (1−y)·log(1−p)]` with clipping.
pub fn cross_entropy(p: f64, y: u8) -> f64 {
    let p = p.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
    if y == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// d cross_entropy / d p at the clipped point (zero in the clipped region).
pub fn cross_entropy_grad(p: f64, y: u8) -> f64 {
    if p < PROB_CLIP || p > 1.0 - PROB_CLIP {
        return 0.0;
    }
    if y == 1 {
        -1.0 / p
    } else {
        1.0 / (1.0 - p)
    }
}

/// Mean squared componentwise difference.
pub fn mse(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "mse length mismatch");
    if a.is_empty() {
        return 0.0;
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.len() as f64
}

/// d mse / d a.
pub fn mse_grad(a: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), b.len(), "mse length mismatch");
    let n = a.len() as f64;
    a.iter().zip(b).map(|(x, y)| 2.0 * (x - y) / n).collect()
}
