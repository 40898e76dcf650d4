//! Self-training and co-training.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::learners::{feature_importance, Classifier, Label, Learner};
use crate::ssl::{check_unlabeled, class_counts, confident_picks, ColumnView, Pool, PseudoLabelPolicy, TeachingMode};

/// Per-iteration bookkeeping shared by the wrappers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WrapperTrace {
    /// Labeled pool size before each fit (one entry per pool per fit).
    pub pool_sizes: Vec<usize>,
    /// Unlabeled rows left after each iteration.
    pub remaining: Vec<usize>,
    /// Pseudo-labels added, as `(unlabeled row, label)` in order.
    pub pseudo_labels: Vec<(usize, Label)>,
    pub iterations: usize,
}

#[derive(Debug)]
pub struct SelfTrained {
    pub model: Box<dyn Classifier>,
    pub trace: WrapperTrace,
}

impl SelfTrained {
    pub fn teaching_mode(&self) -> TeachingMode {
        TeachingMode::SelfTeaching
    }
}

/// Positive probabilities indexed like `x_u`, computed for the `remaining`
/// rows only (others read 0.5).
fn proba_on_remaining(model: &dyn Classifier, x_u: ArrayView2<f64>, remaining: &[usize]) -> Result<Vec<f64>> {
    let mut out = vec![0.5; x_u.nrows()];
    if remaining.len() == x_u.nrows() {
        return model.positive_proba(x_u);
    }
    let sub = crate::linalg::select_rows(x_u, remaining);
    for (&i, p) in remaining.iter().zip(model.positive_proba(sub.view())?) {
        out[i] = p;
    }
    Ok(out)
}

/// Drops picked rows from `remaining`, keeping its order.
fn drop_picked(remaining: &mut Vec<usize>, n: usize, picks: &[(usize, Label)]) {
    let mut taken = vec![false; n];
    for &(i, _) in picks {
        taken[i] = true;
    }
    remaining.retain(|&i| !taken[i]);
}

fn labeled_share(y: &[Label]) -> f64 {
    y.iter().filter(|&&l| l == 1).count() as f64 / y.len() as f64
}

/// Self-training: fit, pseudo-label the most confident unlabeled rows with
/// the model's own predictions, refit, until nothing qualifies, the pool is
/// exhausted or the iteration cap is hit.
pub fn self_train(
    learner: &dyn Learner,
    x_l: ArrayView2<f64>,
    y_l: &[Label],
    x_u: ArrayView2<f64>,
    policy: &PseudoLabelPolicy,
) -> Result<SelfTrained> {
    policy.validate()?;
    class_counts(y_l)?;
    check_unlabeled(x_l, x_u)?;
    let share = policy.class_ratio_matching.then(|| labeled_share(y_l));
    let budget = policy.budget(x_u.nrows());
    let mut pool = Pool::new(x_l, y_l);
    let mut remaining: Vec<usize> = (0..x_u.nrows()).collect();
    let mut trace = WrapperTrace::default();
    loop {
        trace.pool_sizes.push(pool.len());
        let model = learner.fit_classifier(pool.x.view(), &pool.y, pool.weights())?;
        if remaining.is_empty() || trace.iterations >= policy.max_iterations {
            return Ok(SelfTrained { model, trace });
        }
        let proba = proba_on_remaining(model.as_ref(), x_u, &remaining)?;
        let picks = confident_picks(&proba, &remaining, policy.confidence_threshold, budget, share);
        if picks.is_empty() {
            return Ok(SelfTrained { model, trace });
        }
        for &(i, label) in &picks {
            pool.push(x_u.row(i), label, 1.0);
        }
        drop_picked(&mut remaining, x_u.nrows(), &picks);
        trace.pseudo_labels.extend_from_slice(&picks);
        trace.remaining.push(remaining.len());
        trace.iterations += 1;
    }
}

/// Disjoint column sets for two co-training views.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViewSplit {
    pub view_a: Vec<usize>,
    pub view_b: Vec<usize>,
}

/// Deals columns ranked by importance alternately: ranks 1, 3, 5, … to
/// view A and 2, 4, 6, … to view B.
pub fn split_views(n_columns: usize, importance: &[usize]) -> Result<ViewSplit> {
    if n_columns < 2 {
        return Err(Error::ViewTooSmall(n_columns));
    }
    let mut seen = vec![false; n_columns];
    let valid = importance.len() == n_columns
        && importance
            .iter()
            .all(|&c| c < n_columns && !std::mem::replace(&mut seen[c], true));
    if !valid {
        return Err(Error::InvalidParameter(
            "importance ranking must be a permutation of the columns".into(),
        ));
    }
    let view_a = importance.iter().step_by(2).copied().collect();
    let view_b = importance.iter().skip(1).step_by(2).copied().collect();
    Ok(ViewSplit { view_a, view_b })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViewMode {
    /// Both learners see every column.
    SingleView,
    /// Views from the information-gain ranking on the labeled rows.
    MultiView,
    /// Caller-provided views.
    Views(ViewSplit),
}

#[derive(Debug)]
pub struct CoTrained {
    pub model_a: Box<dyn Classifier>,
    pub model_b: Box<dyn Classifier>,
    pub views: Option<ViewSplit>,
    /// Rows A taught to B and B taught to A, per iteration.
    pub taught_by_a: Vec<Vec<(usize, Label)>>,
    pub taught_by_b: Vec<Vec<(usize, Label)>>,
    pub trace: WrapperTrace,
}

impl CoTrained {
    pub fn teaching_mode(&self) -> TeachingMode {
        TeachingMode::Mutual
    }
}

impl Classifier for CoTrained {
    fn n_features(&self) -> usize {
        self.model_a.n_features()
    }

    /// Mean of both learners' class probabilities.
    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let a = self.model_a.predict_proba(x)?;
        let b = self.model_b.predict_proba(x)?;
        Ok((a + b) * 0.5)
    }
}

fn fit_view(learner: &dyn Learner, pool: &Pool, columns: Option<&[usize]>) -> Result<Box<dyn Classifier>> {
    match columns {
        None => learner.fit_classifier(pool.x.view(), &pool.y, pool.weights()),
        Some(cols) => {
            let sub = crate::linalg::select_columns(pool.x.view(), cols);
            let inner = learner.fit_classifier(sub.view(), &pool.y, pool.weights())?;
            Ok(Box::new(ColumnView {
                inner,
                columns: cols.to_vec(),
                n_features: pool.x.ncols(),
            }))
        }
    }
}

/// Co-training with mutual teaching.
///
/// Each iteration both learners pick their most confident `ceil(g/2)`
/// unlabeled rows; A's picks join B's pool and B's picks join A's.
/// Additions are permanent and the union of picks leaves the shared pool.
pub fn co_train(
    learner_a: &dyn Learner,
    learner_b: &dyn Learner,
    x_l: ArrayView2<f64>,
    y_l: &[Label],
    x_u: ArrayView2<f64>,
    mode: &ViewMode,
    policy: &PseudoLabelPolicy,
) -> Result<CoTrained> {
    policy.validate()?;
    class_counts(y_l)?;
    check_unlabeled(x_l, x_u)?;
    let views = match mode {
        ViewMode::SingleView => None,
        ViewMode::MultiView => {
            if x_l.ncols() < 2 {
                return Err(Error::ViewTooSmall(x_l.ncols()));
            }
            Some(split_views(x_l.ncols(), &feature_importance(x_l, y_l)?)?)
        }
        ViewMode::Views(split) => {
            if split.view_a.is_empty() || split.view_b.is_empty() {
                return Err(Error::ViewTooSmall(split.view_a.len().min(split.view_b.len())));
            }
            Some(split.clone())
        }
    };
    let cols_a = views.as_ref().map(|v| v.view_a.as_slice());
    let cols_b = views.as_ref().map(|v| v.view_b.as_slice());

    let share = policy.class_ratio_matching.then(|| labeled_share(y_l));
    let half = policy.budget(x_u.nrows()).div_ceil(2);
    let mut pool_a = Pool::new(x_l, y_l);
    let mut pool_b = Pool::new(x_l, y_l);
    let mut remaining: Vec<usize> = (0..x_u.nrows()).collect();
    let mut trace = WrapperTrace::default();
    let (mut taught_by_a, mut taught_by_b) = (Vec::new(), Vec::new());
    let (model_a, model_b) = loop {
        trace.pool_sizes.push(pool_a.len());
        trace.pool_sizes.push(pool_b.len());
        let model_a = fit_view(learner_a, &pool_a, cols_a)?;
        let model_b = fit_view(learner_b, &pool_b, cols_b)?;
        if remaining.is_empty() || trace.iterations >= policy.max_iterations {
            break (model_a, model_b);
        }
        let pa = proba_on_remaining(model_a.as_ref(), x_u, &remaining)?;
        let pb = proba_on_remaining(model_b.as_ref(), x_u, &remaining)?;
        let from_a = confident_picks(&pa, &remaining, policy.confidence_threshold, half, share);
        let from_b = confident_picks(&pb, &remaining, policy.confidence_threshold, half, share);
        if from_a.is_empty() && from_b.is_empty() {
            break (model_a, model_b);
        }
        for &(i, label) in &from_a {
            pool_b.push(x_u.row(i), label, 1.0);
        }
        for &(i, label) in &from_b {
            pool_a.push(x_u.row(i), label, 1.0);
        }
        let picked: Vec<(usize, Label)> = from_a.iter().chain(&from_b).copied().collect();
        drop_picked(&mut remaining, x_u.nrows(), &picked);
        trace.pseudo_labels.extend(from_a.iter().chain(&from_b).copied());
        trace.remaining.push(remaining.len());
        trace.iterations += 1;
        taught_by_a.push(from_a);
        taught_by_b.push(from_b);
    };
    Ok(CoTrained {
        model_a,
        model_b,
        views,
        taught_by_a,
        taught_by_b,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{fit, ClassifierSpec, LearnerKind};
    use crate::seed;
    use ndarray::{concatenate, Axis};
    use rand_distr::{Distribution, Normal};

    /// Two Gaussian blobs `gap` apart along every axis.
    pub(crate) fn blobs(n: usize, d: usize, gap: f64, seed: u64) -> (Array2<f64>, Vec<Label>) {
        let mut rng = seed::rng(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let y: Vec<Label> = (0..n).map(|i| (i % 2) as u8).collect();
        let x = Array2::from_shape_fn((n, d), |(i, _)| noise.sample(&mut rng) + gap * f64::from(y[i]));
        (x, y)
    }

    #[test]
    fn empty_pool_matches_supervised_fit() {
        let (x, y) = blobs(40, 3, 2.0, 1);
        let spec = ClassifierSpec::new(LearnerKind::Lr);
        let empty = Array2::zeros((0, 3));
        let st = self_train(&spec, x.view(), &y, empty.view(), &PseudoLabelPolicy::default()).unwrap();
        let sup = fit(&spec, x.view(), &y, None).unwrap();
        assert_eq!(
            st.model.predict_proba(x.view()).unwrap(),
            sup.predict_proba(x.view()).unwrap()
        );
        assert!(st.trace.pseudo_labels.is_empty());
    }

    #[test]
    fn duplicates_receive_their_originals_labels() {
        let (x, y) = blobs(40, 2, 8.0, 2);
        let spec = ClassifierSpec::new(LearnerKind::Knn);
        let policy = PseudoLabelPolicy {
            confidence_threshold: 0.6,
            ..Default::default()
        };
        let st = self_train(&spec, x.view(), &y, x.view(), &policy).unwrap();
        assert!(!st.trace.pseudo_labels.is_empty());
        for &(i, label) in &st.trace.pseudo_labels {
            assert_eq!(label, y[i]);
        }
    }

    #[test]
    fn unreachable_threshold_adds_nothing() {
        let (x, y) = blobs(60, 3, 0.3, 3);
        let (u, _) = blobs(50, 3, 0.3, 4);
        let spec = ClassifierSpec::new(LearnerKind::Lr);
        let policy = PseudoLabelPolicy {
            confidence_threshold: 1.0,
            ..Default::default()
        };
        let st = self_train(&spec, x.view(), &y, u.view(), &policy).unwrap();
        assert!(st.trace.pseudo_labels.is_empty());
        let sup = fit(&spec, x.view(), &y, None).unwrap();
        assert_eq!(
            st.model.predict_proba(u.view()).unwrap(),
            sup.predict_proba(u.view()).unwrap()
        );
    }

    #[test]
    fn pool_grows_monotonically_without_loss() {
        let (x, y) = blobs(30, 3, 3.0, 5);
        let (u, _) = blobs(200, 3, 3.0, 6);
        let spec = ClassifierSpec::new(LearnerKind::Gnb);
        let policy = PseudoLabelPolicy {
            max_iterations: 7,
            ..Default::default()
        };
        let st = self_train(&spec, x.view(), &y, u.view(), &policy).unwrap();
        assert!(st.trace.iterations <= 7);
        for w in st.trace.pool_sizes.windows(2) {
            assert!(w[1] >= w[0]);
        }
        for (k, &left) in st.trace.remaining.iter().enumerate() {
            assert_eq!(st.trace.pool_sizes[k + 1] + left, 30 + 200);
        }
        let mut rows: Vec<usize> = st.trace.pseudo_labels.iter().map(|p| p.0).collect();
        rows.sort_unstable();
        rows.dedup();
        assert_eq!(rows.len(), st.trace.pseudo_labels.len());
    }

    #[test]
    fn single_class_rejected() {
        let (x, _) = blobs(10, 2, 1.0, 7);
        let spec = ClassifierSpec::new(LearnerKind::Lr);
        let err = self_train(&spec, x.view(), &[1; 10], x.view(), &PseudoLabelPolicy::default());
        assert_eq!(err.unwrap_err(), Error::SingleClass);
    }

    #[test]
    fn view_split_examples() {
        let v = split_views(4, &[3, 1, 2, 0]).unwrap();
        assert_eq!((v.view_a, v.view_b), (vec![3, 2], vec![1, 0]));
        let ranking: Vec<usize> = (0..21).collect();
        let v = split_views(21, &ranking).unwrap();
        assert_eq!((v.view_a.len(), v.view_b.len()), (11, 10));
        let v = split_views(2, &[1, 0]).unwrap();
        assert_eq!((v.view_a, v.view_b), (vec![1], vec![0]));
        assert_eq!(split_views(1, &[0]).unwrap_err(), Error::ViewTooSmall(1));
        assert!(split_views(3, &[0, 0, 1]).is_err());
    }

    #[test]
    fn co_training_empty_pool_averages_supervised_models() {
        let (x, y) = blobs(40, 4, 2.0, 8);
        let a = ClassifierSpec::new(LearnerKind::Lr);
        let b = ClassifierSpec::new(LearnerKind::Gnb);
        let empty = Array2::zeros((0, 4));
        let ct = co_train(
            &a,
            &b,
            x.view(),
            &y,
            empty.view(),
            &ViewMode::SingleView,
            &PseudoLabelPolicy::default(),
        )
        .unwrap();
        let pa = fit(&a, x.view(), &y, None).unwrap().predict_proba(x.view()).unwrap();
        let pb = fit(&b, x.view(), &y, None).unwrap().predict_proba(x.view()).unwrap();
        let got = ct.predict_proba(x.view()).unwrap();
        assert_eq!(got, (pa + pb) * 0.5);
    }

    #[test]
    fn identical_learners_teach_identical_streams() {
        let (x, y) = blobs(30, 3, 2.5, 9);
        let (u, _) = blobs(300, 3, 2.5, 10);
        let spec = ClassifierSpec::new(LearnerKind::Dt).with_seed(4);
        let ct = co_train(
            &spec,
            &spec,
            x.view(),
            &y,
            u.view(),
            &ViewMode::SingleView,
            &PseudoLabelPolicy::default(),
        )
        .unwrap();
        assert!(!ct.taught_by_a.is_empty());
        assert_eq!(ct.taught_by_a, ct.taught_by_b);
    }

    #[test]
    fn multi_view_learners_only_see_their_columns() {
        let (x, y) = blobs(60, 4, 2.0, 11);
        let (u, _) = blobs(100, 4, 2.0, 12);
        let spec = ClassifierSpec::new(LearnerKind::Lr);
        let ct = co_train(
            &spec,
            &spec,
            x.view(),
            &y,
            u.view(),
            &ViewMode::MultiView,
            &PseudoLabelPolicy::default(),
        )
        .unwrap();
        let views = ct.views.clone().unwrap();
        assert_eq!(views.view_a.len() + views.view_b.len(), 4);
        // Scrambling B's columns leaves A's predictions untouched.
        let mut scrambled = u.clone();
        for &c in &views.view_b {
            scrambled.column_mut(c).fill(1e3);
        }
        assert_eq!(
            ct.model_a.predict_proba(u.view()).unwrap(),
            ct.model_a.predict_proba(scrambled.view()).unwrap()
        );
        let narrow = concatenate(Axis(1), &[x.column(0).insert_axis(Axis(1))]).unwrap();
        let err = co_train(
            &spec,
            &spec,
            narrow.view(),
            &y,
            narrow.view(),
            &ViewMode::MultiView,
            &PseudoLabelPolicy::default(),
        );
        assert_eq!(err.unwrap_err(), Error::ViewTooSmall(1));
    }

    #[test]
    fn co_training_pool_accounting() {
        let (x, y) = blobs(20, 3, 3.0, 13);
        let (u, _) = blobs(200, 3, 3.0, 14);
        let a = ClassifierSpec::new(LearnerKind::Gnb);
        let b = ClassifierSpec::new(LearnerKind::Knn);
        let ct = co_train(
            &a,
            &b,
            x.view(),
            &y,
            u.view(),
            &ViewMode::SingleView,
            &PseudoLabelPolicy::default(),
        )
        .unwrap();
        assert!(ct.trace.iterations <= 30);
        let mut moved = std::collections::BTreeSet::new();
        for (k, (ta, tb)) in ct.taught_by_a.iter().zip(&ct.taught_by_b).enumerate() {
            moved.extend(ta.iter().chain(tb).map(|p| p.0));
            assert_eq!(moved.len() + ct.trace.remaining[k], 200);
        }
        let sizes_a: Vec<usize> = ct.trace.pool_sizes.iter().step_by(2).copied().collect();
        assert!(sizes_a.windows(2).all(|w| w[1] >= w[0]));
    }
}
