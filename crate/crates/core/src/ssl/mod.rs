//! Semi-supervised methods built on the base learners.
//!
//! Inductive methods take labeled rows, unlabeled features and return a
//! [`Classifier`]. Transductive ones ([`graph`], cluster-then-label, the MDS
//! embedding) additionally see the test features, never the test labels.

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::learners::{Classifier, Label};
use crate::linalg::select_columns;

pub mod cluster;
pub mod co_forest;
pub mod graph;
pub mod intrinsic;
pub mod mds;
pub mod semi_boost;
pub mod tri_training;
pub mod wrappers;

pub use wrappers::{co_train, self_train, split_views, CoTrained, SelfTrained, ViewMode, ViewSplit};

/// Who supplies a learner's pseudo-labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TeachingMode {
    /// No pseudo-labels at all.
    None,
    /// A learner trains on its own predictions.
    SelfTeaching,
    /// Labels come from other learners.
    Mutual,
    /// Pseudo-labels are not produced by a teacher (graph, margin or
    /// cluster based methods).
    NotApplicable,
}

impl TeachingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TeachingMode::None => "none",
            TeachingMode::SelfTeaching => "self",
            TeachingMode::Mutual => "mutual",
            TeachingMode::NotApplicable => "n/a",
        }
    }
}

/// How wrappers grow their labeled pool.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabelPolicy {
    /// Minimum max-class probability for a pseudo-label.
    pub confidence_threshold: f64,
    /// Rows added per iteration; `None` means `ceil(0.05 · |U₀|)`.
    pub per_iteration_budget: Option<usize>,
    pub max_iterations: usize,
    /// Add pseudo-labels in the labeled set's class proportions.
    pub class_ratio_matching: bool,
}

impl Default for PseudoLabelPolicy {
    fn default() -> Self {
        Self {
            confidence_threshold: 0.9,
            per_iteration_budget: None,
            max_iterations: 30,
            class_ratio_matching: true,
        }
    }
}

impl PseudoLabelPolicy {
    pub fn validate(&self) -> Result<()> {
        let tau = self.confidence_threshold;
        if !(tau > 0.5 && tau <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "confidence threshold {tau} outside (0.5, 1]"
            )));
        }
        if self.per_iteration_budget == Some(0) {
            return Err(Error::InvalidParameter("per-iteration budget must be >= 1".into()));
        }
        Ok(())
    }

    /// Per-iteration growth for an initial pool of `n_unlabeled` rows.
    pub fn budget(&self, n_unlabeled: usize) -> usize {
        self.per_iteration_budget
            .unwrap_or_else(|| (0.05 * n_unlabeled as f64).ceil() as usize)
            .max(1)
    }
}

/// Counts (negatives, positives); fails unless both classes are present.
pub fn class_counts(y: &[Label]) -> Result<(usize, usize)> {
    let pos = y.iter().filter(|&&l| l == 1).count();
    let neg = y.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    Ok((neg, pos))
}

pub(crate) fn check_unlabeled(x_l: ArrayView2<f64>, x_u: ArrayView2<f64>) -> Result<()> {
    if x_u.nrows() > 0 && x_u.ncols() != x_l.ncols() {
        return Err(Error::DimensionMismatch {
            expected: x_l.ncols(),
            found: x_u.ncols(),
        });
    }
    Ok(())
}

/// Picks up to `budget` rows among `candidates` whose confidence
/// `max(p, 1 − p)` reaches `tau`, labeled by `p >= 0.5`.
///
/// With `positive_share = Some(r)` the picks are split `round(budget · r)`
/// positives and the rest negatives (at least one of each when the budget
/// allows); a class short of qualified rows is not topped up from the other.
/// Within a class the most confident rows win, ties by smaller row index.
pub fn confident_picks(
    positive_proba: &[f64],
    candidates: &[usize],
    tau: f64,
    budget: usize,
    positive_share: Option<f64>,
) -> Vec<(usize, Label)> {
    let mut ranked: Vec<(usize, Label, f64)> = candidates
        .iter()
        .map(|&i| {
            let p = positive_proba[i];
            let label = u8::from(p >= 0.5);
            (i, label, p.max(1.0 - p))
        })
        .filter(|&(_, _, c)| c >= tau)
        .collect();
    ranked.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
    let picks: Vec<(usize, Label)> = match positive_share {
        None => ranked.iter().take(budget).map(|&(i, l, _)| (i, l)).collect(),
        Some(share) => {
            let mut n_pos = (budget as f64 * share).round() as usize;
            if budget >= 2 {
                n_pos = n_pos.clamp(1, budget - 1);
            }
            let n_neg = budget - n_pos.min(budget);
            let pos = ranked.iter().filter(|r| r.1 == 1).take(n_pos);
            let neg = ranked.iter().filter(|r| r.1 == 0).take(n_neg);
            pos.chain(neg).map(|&(i, l, _)| (i, l)).collect()
        }
    };
    picks
}

/// Training rows with labels and weights that grow by appending.
#[derive(Debug, Clone)]
pub(crate) struct Pool {
    pub x: Array2<f64>,
    pub y: Vec<Label>,
    pub w: Vec<f64>,
}

impl Pool {
    pub fn new(x: ArrayView2<f64>, y: &[Label]) -> Self {
        Self {
            x: x.to_owned(),
            y: y.to_vec(),
            w: vec![1.0; y.len()],
        }
    }

    pub fn push(&mut self, row: ArrayView1<f64>, label: Label, weight: f64) {
        self.x.push_row(row).expect("pool rows share a width");
        self.y.push(label);
        self.w.push(weight);
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    /// Weights only when some row deviates from 1.
    pub fn weights(&self) -> Option<&[f64]> {
        self.w.iter().any(|&v| v != 1.0).then_some(&self.w[..])
    }
}

/// A classifier trained on a subset of columns that accepts full-width rows.
#[derive(Debug)]
pub struct ColumnView {
    pub inner: Box<dyn Classifier>,
    pub columns: Vec<usize>,
    pub n_features: usize,
}

impl Classifier for ColumnView {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        crate::learners::check_width(self.n_features, x.ncols())?;
        self.inner.predict_proba(select_columns(x, &self.columns).view())
    }
}

/// A classifier with a constant positive probability; the prediction of
/// methods that fall back to the labeled prior.
#[derive(Debug, Clone)]
pub struct ConstantClassifier {
    pub positive: f64,
    pub n_features: usize,
}

impl Classifier for ConstantClassifier {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        crate::learners::check_width(self.n_features, x.ncols())?;
        Ok(crate::learners::proba_matrix(&vec![self.positive; x.nrows()]))
    }
}
