//! Linear SVM: hinge loss + L2 trained by averaged stochastic subgradient
//! descent, with Platt-scaled probabilities.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::learners::Label;
use crate::linalg::{sigmoid, Standardizer};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct SvmParams {
    pub l2: f64,
    pub epochs: usize,
    pub platt_iterations: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            l2: 1e-3,
            epochs: 200,
            platt_iterations: 50,
        }
    }
}

impl SvmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.l2 > 0.0) || self.epochs == 0 {
            return Err(Error::InvalidParameter("svm needs l2 > 0 and epochs >= 1".into()));
        }
        Ok(())
    }
}

/// Appends a constant 1 column so the bias is part of the weight vector.
pub fn augment(x: ArrayView2<f64>) -> Array2<f64> {
    let (n, d) = x.dim();
    let mut out = Array2::ones((n, d + 1));
    out.slice_mut(ndarray::s![.., ..d]).assign(&x);
    out
}

/// Regularized hinge objective `l2/2 |w|^2 + (1/n) sum_i c_i max(0, 1 - y_i w.x_i)`.
///
/// `y` holds ±1 targets and `costs` per-row multipliers.
pub fn hinge_objective(w: ArrayView1<f64>, x: ArrayView2<f64>, y: &[f64], costs: &[f64], l2: f64) -> f64 {
    let n = y.len().max(1) as f64;
    let loss: f64 = x
        .outer_iter()
        .zip(y)
        .zip(costs)
        .map(|((row, &t), &c)| c * (1.0 - t * row.dot(&w)).max(0.0))
        .sum();
    0.5 * l2 * w.dot(&w) + loss / n
}

/// State of a hinge-loss optimization, resumable for warm starts.
#[derive(Debug, Clone, PartialEq)]
pub struct HingeState {
    /// Best averaged iterate seen so far; this is the reported model.
    pub weights: Array1<f64>,
    pub objective: f64,
    /// Reported objective after each epoch; non-increasing.
    pub trace: Vec<f64>,
    iterate: Array1<f64>,
    steps: u64,
}

impl HingeState {
    pub fn zeros(d: usize) -> Self {
        Self {
            weights: Array1::zeros(d),
            objective: f64::INFINITY,
            trace: Vec::new(),
            iterate: Array1::zeros(d),
            steps: 0,
        }
    }
}

/// Runs `epochs` passes of deterministic-shuffled subgradient descent with
/// step `1 / (l2 * t)`.
///
/// After each epoch the epoch's averaged iterate is scored and kept only if
/// it lowers the objective, so the reported objective never rises. Passing
/// a previous state resumes from it, re-scoring its weights under the
/// current costs.
pub fn train_hinge(
    x: ArrayView2<f64>,
    y: &[f64],
    costs: &[f64],
    l2: f64,
    epochs: usize,
    seed: u64,
    warm: Option<HingeState>,
) -> HingeState {
    let (n, d) = x.dim();
    let mut state = warm.unwrap_or_else(|| HingeState::zeros(d));
    state.objective = hinge_objective(state.weights.view(), x, y, costs, l2);
    if n == 0 {
        return state;
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut avg = Array1::zeros(d);
    for epoch in 0..epochs {
        let mut rng = seed::rng(seed::child(seed, state.steps + epoch as u64));
        order.shuffle(&mut rng);
        avg.fill(0.0);
        for &i in &order {
            state.steps += 1;
            let eta = 1.0 / (l2 * state.steps as f64);
            let row = x.row(i);
            let margin = y[i] * row.dot(&state.iterate);
            state.iterate *= 1.0 - eta * l2;
            if margin < 1.0 {
                state.iterate.scaled_add(eta * costs[i] * y[i], &row);
            }
            avg += &state.iterate;
        }
        avg /= n as f64;
        let obj = hinge_objective(avg.view(), x, y, costs, l2);
        if obj < state.objective {
            state.objective = obj;
            state.weights.assign(&avg);
        }
        state.trace.push(state.objective);
    }
    state
}

/// Platt scaling: fits `P(1 | f) = sigmoid(a f + b)` by Newton's method with
/// smoothed targets.
pub fn platt_scale(scores: &[f64], y: &[Label], iterations: usize) -> (f64, f64) {
    let n_pos = y.iter().filter(|&&l| l == 1).count() as f64;
    let n_neg = y.len() as f64 - n_pos;
    let hi = (n_pos + 1.0) / (n_pos + 2.0);
    let lo = 1.0 / (n_neg + 2.0);
    let targets: Vec<f64> = y.iter().map(|&l| if l == 1 { hi } else { lo }).collect();
    let nll = |a: f64, b: f64| -> f64 {
        scores
            .iter()
            .zip(&targets)
            .map(|(&f, &t)| {
                let z = a * f + b;
                let log1pe = if z > 0.0 {
                    z + (-z).exp().ln_1p()
                } else {
                    z.exp().ln_1p()
                };
                log1pe - t * z
            })
            .sum()
    };
    let (mut a, mut b) = (1.0, ((n_pos + 1.0) / (n_neg + 1.0)).ln());
    let mut current = nll(a, b);
    for _ in 0..iterations {
        let (mut gaa, mut gab, mut gbb, mut ga, mut gb) = (1e-12, 0.0, 1e-12, 0.0, 0.0);
        for (&f, &t) in scores.iter().zip(&targets) {
            let p = sigmoid(a * f + b);
            let r = p - t;
            let h = p * (1.0 - p);
            ga += r * f;
            gb += r;
            gaa += h * f * f;
            gab += h * f;
            gbb += h;
        }
        if ga.abs() < 1e-10 && gb.abs() < 1e-10 {
            break;
        }
        let det = gaa * gbb - gab * gab;
        if det.abs() < 1e-300 {
            break;
        }
        let da = -(gbb * ga - gab * gb) / det;
        let db = -(-gab * ga + gaa * gb) / det;
        let mut step = 1.0;
        let mut improved = false;
        while step > 1e-10 {
            let (na, nb) = (a + step * da, b + step * db);
            let v = nll(na, nb);
            if v < current + 1e-4 * step * (ga * da + gb * db) {
                a = na;
                b = nb;
                current = v;
                improved = true;
                break;
            }
            step /= 2.0;
        }
        if !improved {
            break;
        }
    }
    (a, b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvm {
    scaler: Standardizer,
    /// Weights over standardized features followed by the bias.
    weights: Array1<f64>,
    platt: (f64, f64),
    trace: Vec<f64>,
}

/// Maps labels to ±1 targets.
pub fn signed(y: &[Label]) -> Vec<f64> {
    y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect()
}

impl LinearSvm {
    pub fn fit(x: ArrayView2<f64>, y: &[Label], w: Option<&[f64]>, p: &SvmParams, seed: u64) -> Self {
        let scaler = Standardizer::fit(x);
        let xa = augment(scaler.transform(x).view());
        let costs = normalized_costs(w, y.len());
        let state = train_hinge(xa.view(), &signed(y), &costs, p.l2, p.epochs, seed, None);
        Self::from_state(scaler, state, x, y, p.platt_iterations)
    }

    /// Wraps an already trained weight vector, calibrating probabilities on
    /// `(x, y)`.
    pub fn from_state(
        scaler: Standardizer,
        state: HingeState,
        calib_x: ArrayView2<f64>,
        calib_y: &[Label],
        platt_iterations: usize,
    ) -> Self {
        let mut m = Self {
            scaler,
            weights: state.weights,
            platt: (1.0, 0.0),
            trace: state.trace,
        };
        let scores = m.decision_function(calib_x).to_vec();
        m.platt = platt_scale(&scores, calib_y, platt_iterations);
        m
    }

    pub fn weights(&self) -> &Array1<f64> {
        &self.weights
    }

    /// Reported objective after each training epoch.
    pub fn objective_trace(&self) -> &[f64] {
        &self.trace
    }

    pub fn decision_function(&self, x: ArrayView2<f64>) -> Array1<f64> {
        augment(self.scaler.transform(x).view()).dot(&self.weights)
    }

    pub fn positive_proba(&self, x: ArrayView2<f64>) -> Vec<f64> {
        let (a, b) = self.platt;
        self.decision_function(x).iter().map(|&f| sigmoid(a * f + b)).collect()
    }
}

/// Sample weights rescaled to mean 1 (all ones when absent).
pub fn normalized_costs(w: Option<&[f64]>, n: usize) -> Vec<f64> {
    match w {
        None => vec![1.0; n],
        Some(w) => {
            let mean = w.iter().sum::<f64>() / n as f64;
            if mean > 0.0 {
                w.iter().map(|v| v / mean).collect()
            } else {
                vec![1.0; n]
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn blobs(n: usize, gap: f64, seed: u64) -> (Array2<f64>, Vec<Label>) {
        let mut rng = seed::rng(seed);
        let y: Vec<Label> = (0..n).map(|i| (i % 2) as u8).collect();
        let x = Array2::from_shape_fn((n, 3), |(i, j)| {
            let shift = if y[i] == 1 && j == 0 { gap } else { 0.0 };
            rng.gen_range(-1.0..1.0) + shift
        });
        (x, y)
    }

    #[test]
    fn objective_never_rises_between_epochs() {
        let (x, y) = blobs(200, 1.0, 3);
        let m = LinearSvm::fit(x.view(), &y, None, &SvmParams::default(), 7);
        for pair in m.objective_trace().windows(2) {
            assert!(pair[1] <= pair[0] + 1e-6);
        }
        assert_eq!(m.objective_trace().len(), 200);
    }

    #[test]
    fn separates_and_calibrates() {
        let (x, y) = blobs(200, 4.0, 5);
        let m = LinearSvm::fit(x.view(), &y, None, &SvmParams::default(), 1);
        let p = m.positive_proba(x.view());
        let correct = p.iter().zip(&y).filter(|(p, &t)| u8::from(**p >= 0.5) == t).count();
        assert!(correct >= 198);
        assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn platt_recovers_monotone_map() {
        let scores: Vec<f64> = (-50..50).map(|i| i as f64 / 10.0).collect();
        let y: Vec<Label> = scores.iter().map(|&s| u8::from(s > 0.0)).collect();
        let (a, b) = platt_scale(&scores, &y, 50);
        assert!(a > 0.0);
        assert!(sigmoid(a * 2.0 + b) > 0.9 && sigmoid(a * -2.0 + b) < 0.1);
    }
}
