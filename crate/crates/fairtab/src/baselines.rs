//! Linear comparison models: L2-regularized logistic regression and the
//! single-score classifier used as the clinical baseline.

use crate::error::{Error, Result};
use crate::nn::{sigmoid, OptConfig, Optimizer, Tensor};
use crate::trees::XMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub epochs: usize,
    pub lr: f64,
    pub l2: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            epochs: 200,
            lr: 0.1,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Training cross-entropy after each epoch.
    pub train_loss: Vec<f64>,
}

impl LogisticModel {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::Shape(format!(
                "row of width {} fed to a model of {} weights",
                x.len(),
                self.weights.len()
            )));
        }
        let z: f64 = self.bias + x.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>();
        Ok(sigmoid(z))
    }
}

/// Full-batch Adam on L2-regularized cross-entropy; zero-initialized, so
/// zero epochs means a constant-0.5 predictor.
pub fn fit_logistic(x: XMatrix, y: &[u8], params: &LogisticParams) -> Result<LogisticModel> {
    if y.len() != x.rows {
        return Err(Error::Shape("labels must match row count".into()));
    }
    let n_pos = y.iter().filter(|&&v| v == 1).count();
    if n_pos == 0 || n_pos == y.len() {
        return Err(Error::Config(
            "labels contain a single class; logistic regression needs both".into(),
        ));
    }
    let n = x.rows as f64;
    let mut w = Tensor::param(&[x.cols], vec![0.0; x.cols]);
    let mut b = Tensor::scalar_param(0.0);
    let mut opt = Optimizer::adam(OptConfig {
        lr: params.lr,
        ..OptConfig::default()
    });
    let mut train_loss = Vec::with_capacity(params.epochs);

    for _ in 0..params.epochs {
        w.zero_grad();
        b.zero_grad();
        let mut loss = 0.0;
        for r in 0..x.rows {
            let row = x.row(r);
            let z: f64 = b.data[0] + row.iter().zip(&w.data).map(|(a, c)| a * c).sum::<f64>();
            let p = sigmoid(z);
            loss += crate::nn::cross_entropy(p, y[r]);
            let dz = (p - f64::from(y[r])) / n;
            for (g, &xi) in w.grad_mut().iter_mut().zip(row) {
                *g += dz * xi;
            }
            b.grad_mut()[0] += dz;
        }
        // L2 on weights only
        let mut reg = 0.0;
        let Tensor { data, grad, .. } = &mut w;
        for (g, &wi) in grad.as_deref_mut().unwrap().iter_mut().zip(data.iter()) {
            *g += params.l2 * wi;
            reg += 0.5 * params.l2 * wi * wi;
        }
        train_loss.push(loss / n + reg);
        opt.step(&mut [&mut w, &mut b])?;
    }

    Ok(LogisticModel {
        weights: w.data,
        bias: b.data[0],
        train_loss,
    })
}

/// Logistic regression on a single score column. Constant scores fit an
/// intercept-only model and return a warning instead of failing.
pub fn fit_meld_classifier(
    scores: &[f64],
    y: &[u8],
    params: &LogisticParams,
) -> Result<(LogisticModel, Option<String>)> {
    if scores.is_empty() {
        return Err(Error::Data("score column is empty".into()));
    }
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
    if var < 1e-24 {
        let n_pos = y.iter().filter(|&&v| v == 1).count();
        if n_pos == 0 || n_pos == y.len() {
            return Err(Error::Config("labels contain a single class".into()));
        }
        let p = n_pos as f64 / n;
        return Ok((
            LogisticModel {
                weights: vec![0.0],
                bias: (p / (1.0 - p)).ln(),
                train_loss: vec![],
            },
            Some("constant score column; fitted intercept-only model".into()),
        ));
    }
    // standardize internally for stable training, fold back to raw units
    let std = var.sqrt();
    let standardized: Vec<f64> = scores.iter().map(|s| (s - mean) / std).collect();
    let model = fit_logistic(XMatrix::new(&standardized, scores.len(), 1), y, params)?;
    let w_raw = model.weights[0] / std;
    Ok((
        LogisticModel {
            weights: vec![w_raw],
            bias: model.bias - model.weights[0] * mean / std,
            train_loss: model.train_loss,
        },
        None,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::roc_auc;
    use crate::rng;

    fn separable_1d(n: usize, seed: u64) -> (Vec<f64>, Vec<u8>) {
        let mut rng = rng::stream(seed, "logit-data");
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let v = rng::normal(&mut rng);
            x.push(v);
            y.push(u8::from(v > 0.1));
        }
        (x, y)
    }

    #[test]
    fn separable_1d_reaches_high_auc() {
        let (x, y) = separable_1d(200, 5);
        let model = fit_logistic(XMatrix::new(&x[..150], 150, 1), &y[..150], &LogisticParams::default()).unwrap();
        let scores: Vec<f64> = x[150..].iter().map(|&v| model.predict(&[v]).unwrap()).collect();
        assert!(roc_auc(&scores, &y[150..]).unwrap() >= 0.95);
    }

    #[test]
    fn zero_epochs_predicts_half() {
        let (x, y) = separable_1d(50, 1);
        let params = LogisticParams {
            epochs: 0,
            ..LogisticParams::default()
        };
        let model = fit_logistic(XMatrix::new(&x, 50, 1), &y, &params).unwrap();
        assert_eq!(model.predict(&[3.7]).unwrap(), 0.5);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let x = vec![0.5, -1.0, 2.0, 0.3, -0.7, 1.1];
        let y = [1u8, 0, 1];
        let xm = XMatrix::new(&x, 3, 2);
        let w = [0.3, -0.2];
        let b = 0.1;
        let l2 = 1e-4;
        let loss = |w: &[f64], b: f64| -> f64 {
            let mut total = 0.0;
            for r in 0..3 {
                let z = b + xm.row(r).iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
                total += crate::nn::cross_entropy(sigmoid(z), y[r]);
            }
            total / 3.0 + 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>()
        };
        // analytic gradient mirrors the update inside fit_logistic
        let mut grad_w = [0.0; 2];
        let mut grad_b = 0.0;
        for r in 0..3 {
            let z = b + xm.row(r).iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
            let dz = (sigmoid(z) - f64::from(y[r])) / 3.0;
            for (g, &xi) in grad_w.iter_mut().zip(xm.row(r)) {
                *g += dz * xi;
            }
            grad_b += dz;
        }
        for (g, &wi) in grad_w.iter_mut().zip(&w) {
            *g += l2 * wi;
        }
        let eps = 1e-6;
        for i in 0..2 {
            let mut wp = w;
            wp[i] += eps;
            let mut wm = w;
            wm[i] -= eps;
            let fd = (loss(&wp, b) - loss(&wm, b)) / (2.0 * eps);
            assert!((grad_w[i] - fd).abs() < 1e-8, "w{i}: {} vs {fd}", grad_w[i]);
        }
        let fd_b = (loss(&w, b + eps) - loss(&w, b - eps)) / (2.0 * eps);
        assert!((grad_b - fd_b).abs() < 1e-8);
    }

    #[test]
    fn training_loss_non_increasing_at_small_lr() {
        let (x, y) = separable_1d(120, 9);
        let params = LogisticParams {
            epochs: 100,
            lr: 0.01,
            l2: 1e-4,
        };
        let model = fit_logistic(XMatrix::new(&x, 120, 1), &y, &params).unwrap();
        for w in model.train_loss.windows(2) {
            assert!(w[1] <= w[0] + 1e-10, "loss went up: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn meld_auc_equals_best_orientation_of_raw_score() {
        // monotone proxy: high score means high risk
        let (x, y) = separable_1d(150, 13);
        let (model, warn) = fit_meld_classifier(&x, &y, &LogisticParams::default()).unwrap();
        assert!(warn.is_none());
        let fitted: Vec<f64> = x.iter().map(|&v| model.predict(&[v]).unwrap()).collect();
        let auc_fit = roc_auc(&fitted, &y).unwrap();
        let auc_raw = roc_auc(&x, &y).unwrap();
        let best = auc_raw.max(1.0 - auc_raw);
        assert!((auc_fit - best).abs() < 1e-9);
        assert!(auc_fit >= 0.95);

        // inverted proxy: classifier flips the sign and recovers the AUC
        let inv: Vec<f64> = x.iter().map(|v| -v).collect();
        let (m2, _) = fit_meld_classifier(&inv, &y, &LogisticParams::default()).unwrap();
        let fitted2: Vec<f64> = inv.iter().map(|&v| m2.predict(&[v]).unwrap()).collect();
        let auc2 = roc_auc(&fitted2, &y).unwrap();
        assert!((auc2 - best).abs() < 1e-9);
    }

    #[test]
    fn constant_scores_fit_intercept_only_with_warning() {
        let scores = vec![20.0; 40];
        let y: Vec<u8> = (0..40).map(|i| u8::from(i % 4 == 0)).collect();
        let (model, warn) = fit_meld_classifier(&scores, &y, &LogisticParams::default()).unwrap();
        assert!(warn.is_some());
        assert_eq!(model.weights, vec![0.0]);
        assert!((model.predict(&[20.0]).unwrap() - 0.25).abs() < 1e-12);
    }
}
