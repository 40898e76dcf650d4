//! L2-regularized logistic regression trained by batch gradient descent.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::learners::{canonicalize, Label};
use crate::linalg::{sigmoid, Standardizer};

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticParams {
    pub l2: f64,
    pub learning_rate: f64,
    /// Step at epoch `t` is `learning_rate / (1 + decay * t)`.
    pub decay: f64,
    pub epochs: usize,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            l2: 1e-3,
            learning_rate: 0.1,
            decay: 1e-3,
            epochs: 500,
        }
    }
}

impl LogisticParams {
    pub fn validate(&self) -> Result<()> {
        if self.l2 < 0.0 || self.learning_rate <= 0.0 || self.decay < 0.0 || self.epochs == 0 {
            return Err(Error::InvalidParameter("invalid logistic regression parameters".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    scaler: Standardizer,
    weights: Array1<f64>,
    bias: f64,
}

/// Weighted mean log-loss plus `l2/2 * |w|^2` (bias unpenalized) and its
/// gradient with respect to `[w..., b]`.
///
/// `x` must already be standardized.
pub fn loss_and_gradient(
    params: &[f64],
    x: ArrayView2<f64>,
    y: &[Label],
    weights: Option<&[f64]>,
    l2: f64,
) -> (f64, Vec<f64>) {
    let d = x.ncols();
    let (w, b) = (&params[..d], params[d]);
    let total: f64 = weights.map_or(y.len() as f64, |s| s.iter().sum());
    let mut grad = vec![0.0; d + 1];
    let mut loss = 0.0;
    for (i, row) in x.outer_iter().enumerate() {
        let si = weights.map_or(1.0, |s| s[i]) / total;
        let z: f64 = row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>() + b;
        let t = f64::from(y[i]);
        // log(1 + e^z) - t z, computed stably
        let softplus = if z > 0.0 {
            z + (-z).exp().ln_1p()
        } else {
            z.exp().ln_1p()
        };
        loss += si * (softplus - t * z);
        let r = si * (sigmoid(z) - t);
        for j in 0..d {
            grad[j] += r * row[j];
        }
        grad[d] += r;
    }
    for j in 0..d {
        loss += 0.5 * l2 * w[j] * w[j];
        grad[j] += l2 * w[j];
    }
    (loss, grad)
}

/// Gradient half of [`loss_and_gradient`] in one pass over row-major `x`;
/// `share` holds each row's normalized weight.
fn gradient(params: &[f64], x: &[f64], t: &[f64], share: &[f64], l2: f64, grad: &mut [f64]) {
    let d = params.len() - 1;
    let (w, b) = (&params[..d], params[d]);
    grad.fill(0.0);
    for ((row, &ti), &si) in x.chunks_exact(d).zip(t).zip(share) {
        let z = row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>() + b;
        let r = si * (sigmoid(z) - ti);
        for (g, &a) in grad[..d].iter_mut().zip(row) {
            *g += r * a;
        }
        grad[d] += r;
    }
    for (g, &wj) in grad[..d].iter_mut().zip(w) {
        *g += l2 * wj;
    }
}

impl LogisticModel {
    pub fn fit(x: ArrayView2<f64>, y: &[Label], weights: Option<&[f64]>, p: &LogisticParams) -> Self {
        let (x, y, weights) = canonicalize(x, y, weights);
        let (y, weights) = (y.as_slice(), weights.as_deref());
        let scaler = Standardizer::fit(x.view());
        let xs = scaler.transform(x.view());
        let d = x.ncols();
        let t: Vec<f64> = y.iter().map(|&l| f64::from(l)).collect();
        let total: f64 = weights.map_or(y.len() as f64, |s| s.iter().sum());
        let share: Vec<f64> = (0..y.len()).map(|i| weights.map_or(1.0, |s| s[i]) / total).collect();
        let rows = xs.as_slice().expect("standardized features are contiguous");
        let mut params = vec![0.0; d + 1];
        let mut grad = vec![0.0; d + 1];
        for epoch in 0..p.epochs {
            gradient(&params, rows, &t, &share, p.l2, &mut grad);
            let step = p.learning_rate / (1.0 + p.decay * epoch as f64);
            if grad.iter().map(|g| g * g).sum::<f64>() < 1e-20 {
                break;
            }
            for (v, g) in params.iter_mut().zip(&grad) {
                *v -= step * g;
            }
        }
        let params = Array1::from(params);
        Self {
            scaler,
            weights: params.slice(ndarray::s![..d]).to_owned(),
            bias: params[d],
        }
    }

    /// A model with explicit coefficients on standardized inputs.
    pub fn from_parameters(scaler: Standardizer, weights: Array1<f64>, bias: f64) -> Self {
        Self { scaler, weights, bias }
    }

    pub fn n_features(&self) -> usize {
        self.weights.len()
    }

    pub fn coefficients(&self) -> (&Array1<f64>, f64) {
        (&self.weights, self.bias)
    }

    pub fn decision_function(&self, x: ArrayView2<f64>) -> Array1<f64> {
        let xs: Array2<f64> = self.scaler.transform(x);
        xs.dot(&self.weights) + self.bias
    }

    pub fn positive_proba(&self, x: ArrayView2<f64>) -> Vec<f64> {
        self.decision_function(x).iter().map(|&z| sigmoid(z)).collect()
    }
}
