//! Gaussian naive Bayes.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::learners::{canonicalize, Label};
use crate::linalg::Standardizer;

#[derive(Debug, Clone, PartialEq)]
pub struct BayesParams {
    pub variance_floor: f64,
}

impl Default for BayesParams {
    fn default() -> Self {
        Self { variance_floor: 1e-9 }
    }
}

impl BayesParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.variance_floor > 0.0) {
            return Err(Error::InvalidParameter("variance floor must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GaussianNb {
    scaler: Standardizer,
    /// Row `c` holds the per-feature means of class `c`.
    means: Array2<f64>,
    vars: Array2<f64>,
    log_prior: [f64; 2],
}

impl GaussianNb {
    pub fn fit(x: ArrayView2<f64>, y: &[Label], w: Option<&[f64]>, p: &BayesParams) -> Self {
        let (x, y, w) = canonicalize(x, y, w);
        let scaler = Standardizer::fit(x.view());
        let xs = scaler.transform(x.view());
        let d = xs.ncols();
        let mut means = Array2::zeros((2, d));
        let mut vars = Array2::zeros((2, d));
        let mut totals = [0.0f64; 2];
        let weight = |i: usize| w.as_ref().map_or(1.0, |w| w[i]);
        for (i, row) in xs.outer_iter().enumerate() {
            let c = y[i] as usize;
            totals[c] += weight(i);
            for j in 0..d {
                means[[c, j]] += weight(i) * row[j];
            }
        }
        for c in 0..2 {
            if totals[c] > 0.0 {
                for j in 0..d {
                    means[[c, j]] /= totals[c];
                }
            }
        }
        for (i, row) in xs.outer_iter().enumerate() {
            let c = y[i] as usize;
            for j in 0..d {
                let diff = row[j] - means[[c, j]];
                vars[[c, j]] += weight(i) * diff * diff;
            }
        }
        for c in 0..2 {
            for j in 0..d {
                let v: f64 = if totals[c] > 0.0 { vars[[c, j]] / totals[c] } else { 1.0 };
                vars[[c, j]] = v.max(p.variance_floor);
            }
        }
        let all = totals[0] + totals[1];
        let log_prior = [(totals[0] / all).ln(), (totals[1] / all).ln()];
        Self {
            scaler,
            means,
            vars,
            log_prior,
        }
    }

    fn log_joint(&self, c: usize, row: ndarray::ArrayView1<f64>) -> f64 {
        let mut s = self.log_prior[c];
        for j in 0..row.len() {
            let v = self.vars[[c, j]];
            let diff = row[j] - self.means[[c, j]];
            s -= 0.5 * ((2.0 * std::f64::consts::PI * v).ln() + diff * diff / v);
        }
        s
    }

    pub fn positive_proba(&self, x: ArrayView2<f64>) -> Vec<f64> {
        let xs = self.scaler.transform(x);
        xs.outer_iter()
            .map(|row| {
                let l0 = self.log_joint(0, row);
                let l1 = self.log_joint(1, row);
                let m = l0.max(l1);
                let (e0, e1) = ((l0 - m).exp(), (l1 - m).exp());
                e1 / (e0 + e1)
            })
            .collect()
    }
}
