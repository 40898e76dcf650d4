//! Tri-training and its effort-aware variant.
//!
//! Three learners start from class-stratified bootstrap resamples of the
//! labeled rows. In each round learner `i` is offered the unlabeled rows on
//! which the other two agree, and accepts them only while the estimated
//! noise `e_i · |L_i|` keeps shrinking (Zhou & Li's acceptance rule).

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::learners::{Classifier, Label, Learner};
use crate::linalg::select_rows;
use crate::seed::{self, Rng};
use crate::ssl::{check_unlabeled, class_counts, Pool, TeachingMode};

#[derive(Debug, Clone, PartialEq)]
pub struct TriTrainingConfig {
    pub max_rounds: usize,
    pub seed: u64,
}

impl Default for TriTrainingConfig {
    fn default() -> Self {
        Self {
            max_rounds: 30,
            seed: 0,
        }
    }
}

/// Three learners combined by majority vote.
#[derive(Debug)]
pub struct TriModel {
    pub learners: [Box<dyn Classifier>; 3],
    /// Pseudo-labels accepted per round for each learner.
    pub accepted: Vec<[usize; 3]>,
    pub rounds: usize,
}

impl TriModel {
    pub fn teaching_mode(&self) -> TeachingMode {
        TeachingMode::Mutual
    }
}

impl Classifier for TriModel {
    fn n_features(&self) -> usize {
        self.learners[0].n_features()
    }

    /// Mean probability of the learners on the majority side, so that
    /// thresholding at 0.5 reproduces the majority vote.
    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let probs = self
            .learners
            .iter()
            .map(|m| m.positive_proba(x))
            .collect::<Result<Vec<_>>>()?;
        let positive: Vec<f64> = (0..x.nrows())
            .map(|r| {
                let votes: Vec<f64> = probs.iter().map(|p| p[r]).collect();
                let pos_votes = votes.iter().filter(|&&p| p >= 0.5).count();
                let majority_positive = pos_votes >= 2;
                let side: Vec<f64> = votes.into_iter().filter(|&p| (p >= 0.5) == majority_positive).collect();
                side.iter().sum::<f64>() / side.len() as f64
            })
            .collect();
        Ok(crate::learners::proba_matrix(&positive))
    }
}

/// Bootstrap that resamples each class separately so both stay present.
pub fn stratified_bootstrap(y: &[Label], rng: &mut Rng) -> Vec<usize> {
    let mut rows = Vec::with_capacity(y.len());
    for class in [0u8, 1] {
        let members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        for _ in 0..members.len() {
            rows.push(members[rng.gen_range(0..members.len())]);
        }
    }
    rows.sort_unstable();
    rows
}

/// Takes `cap` of the `candidates`. The order is a seeded shuffle, stably
/// re-sorted by ascending effort when `effort` is given, so equal efforts
/// reproduce the plain shuffle.
pub fn select_candidates(candidates: &[usize], effort: Option<&[f64]>, cap: usize, rng: &mut Rng) -> Vec<usize> {
    let mut order = candidates.to_vec();
    order.shuffle(rng);
    if let Some(e) = effort {
        order.sort_by(|&a, &b| e[a].total_cmp(&e[b]));
    }
    order.truncate(cap);
    order.sort_unstable();
    order
}

/// Error rate on labeled rows where the two other learners agree, or 1
/// when they never agree.
fn agreement_error(pj: &[Label], pk: &[Label], y: &[Label]) -> f64 {
    let mut agree = 0usize;
    let mut wrong = 0usize;
    for ((&a, &b), &t) in pj.iter().zip(pk).zip(y) {
        if a == b {
            agree += 1;
            wrong += usize::from(a != t);
        }
    }
    if agree == 0 {
        1.0
    } else {
        wrong as f64 / agree as f64
    }
}

pub fn tri_train(
    learners: [&dyn Learner; 3],
    x_l: ArrayView2<f64>,
    y_l: &[Label],
    x_u: ArrayView2<f64>,
    cfg: &TriTrainingConfig,
) -> Result<TriModel> {
    run(learners, x_l, y_l, x_u, None, cfg)
}

/// Tri-training where, among agreement-qualified rows, smaller effort is
/// preferred whenever the acceptance cap forces a subsample.
pub fn eatt(
    learners: [&dyn Learner; 3],
    x_l: ArrayView2<f64>,
    y_l: &[Label],
    x_u: ArrayView2<f64>,
    effort_u: &[f64],
    cfg: &TriTrainingConfig,
) -> Result<TriModel> {
    if effort_u.len() != x_u.nrows() {
        return Err(Error::EffortMismatch {
            expected: x_u.nrows(),
            found: effort_u.len(),
        });
    }
    run(learners, x_l, y_l, x_u, Some(effort_u), cfg)
}

fn run(
    learners: [&dyn Learner; 3],
    x_l: ArrayView2<f64>,
    y_l: &[Label],
    x_u: ArrayView2<f64>,
    effort: Option<&[f64]>,
    cfg: &TriTrainingConfig,
) -> Result<TriModel> {
    class_counts(y_l)?;
    check_unlabeled(x_l, x_u)?;
    let mut models = Vec::with_capacity(3);
    for (i, learner) in learners.iter().enumerate() {
        let mut rng = seed::rng(seed::derive(cfg.seed, &["bootstrap", &i.to_string()]));
        let rows = stratified_bootstrap(y_l, &mut rng);
        let xb = select_rows(x_l, &rows);
        let yb: Vec<Label> = rows.iter().map(|&r| y_l[r]).collect();
        models.push(learner.fit_classifier(xb.view(), &yb, None)?);
    }
    let mut models: [Box<dyn Classifier>; 3] = models.try_into().expect("three learners");
    let mut accepted = Vec::new();
    let mut rounds = 0;
    if x_u.nrows() == 0 {
        return Ok(TriModel {
            learners: models,
            accepted,
            rounds,
        });
    }

    let mut prev_error = [0.5f64; 3];
    let mut prev_size = [0usize; 3];
    while rounds < cfg.max_rounds {
        let on_l = models.iter().map(|m| m.predict(x_l, 0.5)).collect::<Result<Vec<_>>>()?;
        let on_u = models.iter().map(|m| m.predict(x_u, 0.5)).collect::<Result<Vec<_>>>()?;
        let mut updates: [Option<(Vec<usize>, Vec<Label>, f64)>; 3] = [None, None, None];
        for i in 0..3 {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            let e = agreement_error(&on_l[j], &on_l[k], y_l);
            if e >= prev_error[i] {
                continue;
            }
            let agreed: Vec<usize> = (0..x_u.nrows()).filter(|&r| on_u[j][r] == on_u[k][r]).collect();
            if prev_size[i] == 0 {
                prev_size[i] = (e / (prev_error[i] - e) + 1.0).floor() as usize;
            }
            if prev_size[i] >= agreed.len() {
                continue;
            }
            let rows = if e * (agreed.len() as f64) < prev_error[i] * prev_size[i] as f64 {
                agreed
            } else if prev_size[i] as f64 > e / (prev_error[i] - e) {
                let cap = (prev_error[i] * prev_size[i] as f64 / e - 1.0).ceil() as usize;
                let mut rng = seed::rng(seed::derive(
                    cfg.seed,
                    &["subsample", &rounds.to_string(), &i.to_string()],
                ));
                select_candidates(&agreed, effort, cap, &mut rng)
            } else {
                continue;
            };
            let labels = rows.iter().map(|&r| on_u[j][r]).collect();
            updates[i] = Some((rows, labels, e));
        }
        if updates.iter().all(Option::is_none) {
            break;
        }
        let mut counts = [0usize; 3];
        for (i, update) in updates.into_iter().enumerate() {
            let Some((rows, labels, e)) = update else {
                continue;
            };
            let mut pool = Pool::new(x_l, y_l);
            for (&r, &label) in rows.iter().zip(&labels) {
                pool.push(x_u.row(r), label, 1.0);
            }
            models[i] = learners[i].fit_classifier(pool.x.view(), &pool.y, None)?;
            prev_error[i] = e;
            prev_size[i] = rows.len();
            counts[i] = rows.len();
        }
        accepted.push(counts);
        rounds += 1;
    }
    Ok(TriModel {
        learners: models,
        accepted,
        rounds,
    })
}
