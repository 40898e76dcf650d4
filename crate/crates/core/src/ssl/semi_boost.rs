//! SemiBoost: boosting where each round pseudo-labels the unlabeled rows
//! most inconsistent with the current ensemble under an RBF similarity.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::learners::{Classifier, Label, Learner};
use crate::linalg::{median_pairwise_distance, pairwise_sq_distances, sigmoid, Standardizer};
use crate::ssl::{check_unlabeled, class_counts, Pool, TeachingMode};

#[derive(Debug, Clone, PartialEq)]
pub struct SemiBoostConfig {
    pub rounds: usize,
    /// RBF bandwidth; `None` uses the median pairwise distance.
    pub sigma: Option<f64>,
    /// Share of the unlabeled rows sampled per round.
    pub sample_fraction: f64,
}

impl Default for SemiBoostConfig {
    fn default() -> Self {
        Self {
            rounds: 10,
            sigma: None,
            sample_fraction: 0.1,
        }
    }
}

#[derive(Debug)]
pub struct SemiBoostModel {
    pub learners: Vec<Box<dyn Classifier>>,
    pub alphas: Vec<f64>,
    /// Set when a round produced `alpha <= 0` and boosting stopped early.
    pub stopped_early: bool,
}

impl SemiBoostModel {
    pub fn teaching_mode(&self) -> TeachingMode {
        TeachingMode::NotApplicable
    }

    /// Weighted ensemble score `sum_t alpha_t (2 p_t(x) - 1)`.
    pub fn score(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        let mut score = vec![0.0; x.nrows()];
        for (m, &a) in self.learners.iter().zip(&self.alphas) {
            for (s, p) in score.iter_mut().zip(m.positive_proba(x)?) {
                *s += a * (2.0 * p - 1.0);
            }
        }
        Ok(score)
    }
}

impl Classifier for SemiBoostModel {
    fn n_features(&self) -> usize {
        self.learners[0].n_features()
    }

    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let positive: Vec<f64> = self.score(x)?.into_iter().map(|s| sigmoid(2.0 * s)).collect();
        Ok(crate::learners::proba_matrix(&positive))
    }
}

/// RBF similarity `exp(-|a - b|² / σ²)` over the rows of `x`.
pub fn rbf_similarity(x: ArrayView2<f64>, sigma: f64) -> Array2<f64> {
    let s2 = sigma * sigma;
    pairwise_sq_distances(x).mapv(|d| (-d / s2).exp())
}

/// Per-unlabeled-row confidences `(p_i, q_i)` of being positive and negative.
///
/// `sim` covers labeled rows first (`y` in ±1) then unlabeled rows; `h`
/// holds the current ensemble score of the unlabeled rows and `c` weighs
/// the unlabeled–unlabeled consistency term.
pub fn confidences(sim: &Array2<f64>, y: &[f64], h: &[f64], c: f64) -> (Vec<f64>, Vec<f64>) {
    let l = y.len();
    let u = h.len();
    let mut p = vec![0.0; u];
    let mut q = vec![0.0; u];
    let grow: Vec<f64> = h.iter().map(|v| v.exp()).collect();
    let shrink: Vec<f64> = h.iter().map(|v| (-v).exp()).collect();
    for i in 0..u {
        let row = sim.row(l + i);
        let (mut to_pos, mut to_neg) = (0.0, 0.0);
        for (j, &t) in y.iter().enumerate() {
            if t > 0.0 {
                to_pos += row[j];
            } else {
                to_neg += row[j];
            }
        }
        // exp(h_j − h_i) factors as exp(h_j) · exp(−h_i).
        let (mut up, mut uq) = (0.0, 0.0);
        for j in 0..u {
            let s = row[l + j];
            up += s * grow[j];
            uq += s * shrink[j];
        }
        up *= shrink[i];
        uq *= grow[i];
        p[i] = to_pos * (-2.0 * h[i]).exp() + 0.5 * c * up;
        q[i] = to_neg * (2.0 * h[i]).exp() + 0.5 * c * uq;
    }
    (p, q)
}

pub fn semi_boost(
    learner: &dyn Learner,
    x_l: ArrayView2<f64>,
    y_l: &[Label],
    x_u: ArrayView2<f64>,
    cfg: &SemiBoostConfig,
) -> Result<SemiBoostModel> {
    class_counts(y_l)?;
    check_unlabeled(x_l, x_u)?;
    if cfg.rounds == 0 || !(cfg.sample_fraction > 0.0 && cfg.sample_fraction <= 1.0) {
        return Err(Error::InvalidParameter(
            "semi-boost needs rounds >= 1 and a sample fraction in (0, 1]".into(),
        ));
    }
    let supervised = || -> Result<SemiBoostModel> {
        Ok(SemiBoostModel {
            learners: vec![learner.fit_classifier(x_l, y_l, None)?],
            alphas: vec![1.0],
            stopped_early: false,
        })
    };
    let (l, u) = (x_l.nrows(), x_u.nrows());
    if u == 0 {
        return supervised();
    }
    let all = crate::linalg::vstack(x_l, x_u)?;
    let z = Standardizer::fit(all.view()).transform(all.view());
    let sigma = match cfg.sigma {
        Some(s) if s > 0.0 => s,
        Some(_) => return Err(Error::InvalidParameter("similarity bandwidth must be positive".into())),
        None => {
            let m = median_pairwise_distance(z.view());
            if m > 0.0 {
                m
            } else {
                1.0
            }
        }
    };
    let sim = rbf_similarity(z.view(), sigma);
    let y_signed: Vec<f64> = y_l.iter().map(|&t| if t == 1 { 1.0 } else { -1.0 }).collect();
    let c = l as f64 / u as f64;
    let take = ((cfg.sample_fraction * u as f64).ceil() as usize).clamp(1, u);

    let mut h = vec![0.0; u];
    let mut model = SemiBoostModel {
        learners: Vec::new(),
        alphas: Vec::new(),
        stopped_early: false,
    };
    for _ in 0..cfg.rounds {
        let (p, q) = confidences(&sim, &y_signed, &h, c);
        let mut order: Vec<usize> = (0..u).collect();
        order.sort_by(|&a, &b| (p[b] - q[b]).abs().total_cmp(&(p[a] - q[a]).abs()).then(a.cmp(&b)));
        order.truncate(take);
        order.sort_unstable();
        let top = order.iter().map(|&i| (p[i] - q[i]).abs()).fold(0.0, f64::max);
        let mut pool = Pool::new(x_l, y_l);
        for &i in &order {
            let weight = if top > 0.0 { (p[i] - q[i]).abs() / top } else { 1.0 };
            pool.push(x_u.row(i), u8::from(p[i] > q[i]), weight.max(1e-6));
        }
        let base = learner.fit_classifier(pool.x.view(), &pool.y, pool.weights())?;
        let hard: Vec<f64> = base
            .predict(x_u, 0.5)?
            .into_iter()
            .map(|t| if t == 1 { 1.0 } else { -1.0 })
            .collect();
        let (mut agree, mut disagree) = (0.0, 0.0);
        for i in 0..u {
            if hard[i] > 0.0 {
                agree += p[i];
                disagree += q[i];
            } else {
                agree += q[i];
                disagree += p[i];
            }
        }
        let alpha = if disagree > 0.0 {
            0.25 * (agree / disagree).ln()
        } else {
            f64::INFINITY
        };
        if !(alpha > 0.0) {
            model.stopped_early = true;
            break;
        }
        // An infinite alpha means the round is perfectly consistent; cap it
        // so the ensemble score stays finite.
        let alpha = alpha.min(5.0);
        for (hi, t) in h.iter_mut().zip(&hard) {
            *hi += alpha * t;
        }
        model.learners.push(base);
        model.alphas.push(alpha);
    }
    if model.learners.is_empty() {
        let mut fallback = supervised()?;
        fallback.stopped_early = true;
        return Ok(fallback);
    }
    Ok(model)
}
