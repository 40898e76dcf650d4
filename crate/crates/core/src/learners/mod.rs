//! Supervised base learners behind one probabilistic interface.
//!
//! Every learner standardizes features from training statistics (trees are
//! scale invariant and skip it) and reports `P(class 0), P(class 1)` per row.

use std::fmt::Debug;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::select_columns;

pub mod bayes;
pub mod forest;
pub mod importance;
pub mod knn;
pub mod logistic;
pub mod svm;
pub mod tree;

pub use importance::{feature_importance, information_gains};

/// Binary class label: 1 = defect-inducing, 0 = clean.
pub type Label = u8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LearnerKind {
    Dt,
    Rf,
    Lr,
    Knn,
    Gnb,
    Svm,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 6] = [
        LearnerKind::Dt,
        LearnerKind::Rf,
        LearnerKind::Lr,
        LearnerKind::Knn,
        LearnerKind::Gnb,
        LearnerKind::Svm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::Dt => "DT",
            LearnerKind::Rf => "RF",
            LearnerKind::Lr => "LR",
            LearnerKind::Knn => "KNN",
            LearnerKind::Gnb => "GNB",
            LearnerKind::Svm => "SVM",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name().eq_ignore_ascii_case(name))
    }
}

impl std::fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Hyperparams {
    Tree(tree::TreeParams),
    Forest(forest::ForestParams),
    Logistic(logistic::LogisticParams),
    Knn(knn::KnnParams),
    Bayes(bayes::BayesParams),
    Svm(svm::SvmParams),
}

impl Hyperparams {
    pub fn default_for(kind: LearnerKind) -> Self {
        match kind {
            LearnerKind::Dt => Hyperparams::Tree(Default::default()),
            LearnerKind::Rf => Hyperparams::Forest(Default::default()),
            LearnerKind::Lr => Hyperparams::Logistic(Default::default()),
            LearnerKind::Knn => Hyperparams::Knn(Default::default()),
            LearnerKind::Gnb => Hyperparams::Bayes(Default::default()),
            LearnerKind::Svm => Hyperparams::Svm(Default::default()),
        }
    }

    fn kind(&self) -> LearnerKind {
        match self {
            Hyperparams::Tree(_) => LearnerKind::Dt,
            Hyperparams::Forest(_) => LearnerKind::Rf,
            Hyperparams::Logistic(_) => LearnerKind::Lr,
            Hyperparams::Knn(_) => LearnerKind::Knn,
            Hyperparams::Bayes(_) => LearnerKind::Gnb,
            Hyperparams::Svm(_) => LearnerKind::Svm,
        }
    }
}

/// What to fit: learner kind, its hyperparameters and a seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierSpec {
    pub kind: LearnerKind,
    pub params: Hyperparams,
    pub seed: u64,
}

impl ClassifierSpec {
    pub fn new(kind: LearnerKind) -> Self {
        Self {
            kind,
            params: Hyperparams::default_for(kind),
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_params(mut self, params: Hyperparams) -> Self {
        self.params = params;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.params.kind() != self.kind {
            return Err(Error::InvalidParameter(format!(
                "{} spec carries {} hyperparameters",
                self.kind,
                self.params.kind()
            )));
        }
        match &self.params {
            Hyperparams::Tree(p) => p.validate(),
            Hyperparams::Forest(p) => p.validate(),
            Hyperparams::Logistic(p) => p.validate(),
            Hyperparams::Knn(p) => p.validate(),
            Hyperparams::Bayes(p) => p.validate(),
            Hyperparams::Svm(p) => p.validate(),
        }
    }
}

/// A fitted binary classifier.
pub trait Classifier: Send + Sync + Debug {
    /// Number of columns expected by [`predict_proba`](Self::predict_proba).
    fn n_features(&self) -> usize;

    /// `n × 2` matrix of class probabilities; rows sum to one.
    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>>;

    fn positive_proba(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        Ok(self.predict_proba(x)?.column(1).to_vec())
    }

    /// Label 1 iff `P(class 1) >= threshold`.
    fn predict(&self, x: ArrayView2<f64>, threshold: f64) -> Result<Vec<Label>> {
        Ok(self
            .positive_proba(x)?
            .into_iter()
            .map(|p| u8::from(p >= threshold))
            .collect())
    }
}

impl<C: Classifier + ?Sized> Classifier for Box<C> {
    fn n_features(&self) -> usize {
        (**self).n_features()
    }

    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        (**self).predict_proba(x)
    }
}

/// Something that can fit a [`Classifier`] from (weighted) labeled rows.
pub trait Learner: Send + Sync {
    fn fit_classifier(&self, x: ArrayView2<f64>, y: &[Label], weights: Option<&[f64]>) -> Result<Box<dyn Classifier>>;
}

impl Learner for ClassifierSpec {
    fn fit_classifier(&self, x: ArrayView2<f64>, y: &[Label], weights: Option<&[f64]>) -> Result<Box<dyn Classifier>> {
        Ok(Box::new(fit(self, x, y, weights)?))
    }
}

#[derive(Debug, Clone)]
enum Model {
    Tree(tree::DecisionTree),
    Forest(forest::RandomForest),
    Logistic(logistic::LogisticModel),
    Knn(knn::KnnModel),
    Bayes(bayes::GaussianNb),
    Svm(svm::LinearSvm),
    Constant(f64),
}

/// A fitted base learner.
#[derive(Debug, Clone)]
pub struct TrainedClassifier {
    kind: LearnerKind,
    model: Model,
    n_features: usize,
    feature_view: Option<Vec<usize>>,
    single_class: bool,
}

impl TrainedClassifier {
    pub fn kind(&self) -> LearnerKind {
        self.kind
    }

    pub fn feature_view(&self) -> Option<&[usize]> {
        self.feature_view.as_deref()
    }

    /// Set when a single-class training set produced a constant predictor.
    pub fn single_class_warning(&self) -> bool {
        self.single_class
    }

    pub fn as_forest(&self) -> Option<&forest::RandomForest> {
        match &self.model {
            Model::Forest(f) => Some(f),
            _ => None,
        }
    }

    pub fn as_tree(&self) -> Option<&tree::DecisionTree> {
        match &self.model {
            Model::Tree(t) => Some(t),
            _ => None,
        }
    }

    pub fn as_svm(&self) -> Option<&svm::LinearSvm> {
        match &self.model {
            Model::Svm(s) => Some(s),
            _ => None,
        }
    }

    pub fn from_logistic(model: logistic::LogisticModel) -> Self {
        let n_features = model.n_features();
        Self {
            kind: LearnerKind::Lr,
            model: Model::Logistic(model),
            n_features,
            feature_view: None,
            single_class: false,
        }
    }

    pub fn from_forest(model: forest::RandomForest) -> Self {
        let n_features = model.n_features();
        Self {
            kind: LearnerKind::Rf,
            model: Model::Forest(model),
            n_features,
            feature_view: None,
            single_class: false,
        }
    }

    fn positive(&self, x: ArrayView2<f64>) -> Vec<f64> {
        match &self.model {
            Model::Tree(m) => m.positive_proba(x),
            Model::Forest(m) => m.positive_proba(x),
            Model::Logistic(m) => m.positive_proba(x),
            Model::Knn(m) => m.positive_proba(x),
            Model::Bayes(m) => m.positive_proba(x),
            Model::Svm(m) => m.positive_proba(x),
            Model::Constant(p) => vec![*p; x.nrows()],
        }
    }
}

impl Classifier for TrainedClassifier {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        check_width(self.n_features, x.ncols())?;
        let p = match &self.feature_view {
            Some(cols) => self.positive(select_columns(x, cols).view()),
            None => self.positive(x),
        };
        Ok(proba_matrix(&p))
    }
}

pub(crate) fn check_width(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Builds the `n × 2` probability matrix from positive-class probabilities.
pub fn proba_matrix(positive: &[f64]) -> Array2<f64> {
    let mut out = Array2::zeros((positive.len(), 2));
    for (i, &p) in positive.iter().enumerate() {
        let p = p.clamp(0.0, 1.0);
        out[[i, 0]] = 1.0 - p;
        out[[i, 1]] = p;
    }
    out
}

fn check_inputs(x: ArrayView2<f64>, y: &[Label], weights: Option<&[f64]>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            found: y.len(),
        });
    }
    if let Some(w) = weights {
        if w.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: y.len(),
                found: w.len(),
            });
        }
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter(
                "sample weights must be finite and nonnegative".into(),
            ));
        }
    }
    if y.len() < 2 {
        return Err(Error::DegenerateInput(format!("need at least 2 rows, got {}", y.len())));
    }
    if y.iter().any(|&l| l > 1) {
        return Err(Error::InvalidParameter("labels must be 0 or 1".into()));
    }
    Ok(())
}

fn all_rows_identical(x: ArrayView2<f64>) -> bool {
    let first = x.row(0);
    x.outer_iter().all(|r| r == first)
}

/// Fits a base learner on `x`, `y` with optional per-row weights.
pub fn fit(
    spec: &ClassifierSpec,
    x: ArrayView2<f64>,
    y: &[Label],
    weights: Option<&[f64]>,
) -> Result<TrainedClassifier> {
    spec.validate()?;
    check_inputs(x, y, weights)?;
    let positives = y.iter().filter(|&&l| l == 1).count();
    let single = positives == 0 || positives == y.len();
    let n_features = x.ncols();
    if single {
        return match spec.kind {
            LearnerKind::Gnb | LearnerKind::Knn => {
                log::warn!("{} fitted on a single class; predictions are constant", spec.kind);
                Ok(TrainedClassifier {
                    kind: spec.kind,
                    model: Model::Constant(if positives > 0 { 1.0 } else { 0.0 }),
                    n_features,
                    feature_view: None,
                    single_class: true,
                })
            }
            _ => Err(Error::SingleClass),
        };
    }
    if matches!(spec.kind, LearnerKind::Lr | LearnerKind::Svm) && all_rows_identical(x) {
        return Err(Error::DegenerateInput("all training rows are identical".into()));
    }
    let model = match &spec.params {
        Hyperparams::Tree(p) => Model::Tree(tree::DecisionTree::fit(x, y, weights, p, spec.seed)),
        Hyperparams::Forest(p) => Model::Forest(forest::RandomForest::fit(x, y, weights, p, spec.seed)),
        Hyperparams::Logistic(p) => Model::Logistic(logistic::LogisticModel::fit(x, y, weights, p)),
        Hyperparams::Knn(p) => Model::Knn(knn::KnnModel::fit(x, y, weights, p)),
        Hyperparams::Bayes(p) => Model::Bayes(bayes::GaussianNb::fit(x, y, weights, p)),
        Hyperparams::Svm(p) => Model::Svm(svm::LinearSvm::fit(x, y, weights, p, spec.seed)),
    };
    Ok(TrainedClassifier {
        kind: spec.kind,
        model,
        n_features,
        feature_view: None,
        single_class: false,
    })
}

/// Fits on the columns in `view` only; the fitted model accepts full-width
/// rows and selects the same columns at prediction time.
pub fn fit_on_view(
    spec: &ClassifierSpec,
    x: ArrayView2<f64>,
    y: &[Label],
    weights: Option<&[f64]>,
    view: &[usize],
) -> Result<TrainedClassifier> {
    if let Some(&bad) = view.iter().find(|&&c| c >= x.ncols()) {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            found: bad + 1,
        });
    }
    let mut model = fit(spec, select_columns(x, view).view(), y, weights)?;
    model.n_features = x.ncols();
    model.feature_view = Some(view.to_vec());
    Ok(model)
}

/// Row order sorted lexicographically by (features, label, weight).
///
/// Learners whose fit sums over rows train in this order so that permuting
/// the training set leaves the fitted model bit-identical.
pub(crate) fn canonical_order(x: ArrayView2<f64>, y: &[Label], w: Option<&[f64]>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    order.sort_by(|&a, &b| {
        x.row(a)
            .iter()
            .zip(x.row(b).iter())
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(y[a].cmp(&y[b]))
            .then_with(|| match w {
                Some(w) => w[a].total_cmp(&w[b]),
                None => std::cmp::Ordering::Equal,
            })
    });
    order
}

/// Copies of `x`, `y`, `w` in [`canonical_order`].
pub(crate) fn canonicalize(
    x: ArrayView2<f64>,
    y: &[Label],
    w: Option<&[f64]>,
) -> (Array2<f64>, Vec<Label>, Option<Vec<f64>>) {
    let order = canonical_order(x, y, w);
    (
        crate::linalg::select_rows(x, &order),
        order.iter().map(|&i| y[i]).collect(),
        w.map(|w| order.iter().map(|&i| w[i]).collect()),
    )
}

/// Convenience wrapper over [`Classifier::predict`].
pub fn predict(model: &dyn Classifier, x: ArrayView2<f64>, threshold: f64) -> Result<Vec<Label>> {
    model.predict(x, threshold)
}

/// Fraction of rows where `pred == truth`.
pub fn accuracy(pred: &[Label], truth: &[Label]) -> f64 {
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[derive(Debug)]
    struct Fixed(Vec<f64>);

    impl Classifier for Fixed {
        fn n_features(&self) -> usize {
            1
        }
        fn predict_proba(&self, _x: ArrayView2<f64>) -> Result<Array2<f64>> {
            Ok(proba_matrix(&self.0))
        }
    }

    #[test]
    fn threshold_rules() {
        let m = Fixed(vec![0.5, 0.1, 0.7]);
        let x = Array2::zeros((3, 1));
        assert_eq!(m.predict(x.view(), 0.5).unwrap(), vec![1, 0, 1]);
        assert_eq!(m.predict(x.view(), 0.0).unwrap(), vec![1, 1, 1]);
    }

    #[test]
    fn single_class_handling() {
        let x = array![[0.0], [1.0], [2.0]];
        let y = [1, 1, 1];
        for kind in [LearnerKind::Gnb, LearnerKind::Knn] {
            let m = fit(&ClassifierSpec::new(kind), x.view(), &y, None).unwrap();
            assert!(m.single_class_warning());
            assert_eq!(m.positive_proba(x.view()).unwrap(), vec![1.0; 3]);
        }
        for kind in [LearnerKind::Dt, LearnerKind::Rf, LearnerKind::Lr, LearnerKind::Svm] {
            assert_eq!(
                fit(&ClassifierSpec::new(kind), x.view(), &y, None).unwrap_err(),
                Error::SingleClass
            );
        }
    }

    #[test]
    fn degenerate_rows_rejected_for_linear_models() {
        let x = array![[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]];
        let y = [0, 1, 0];
        for kind in [LearnerKind::Lr, LearnerKind::Svm] {
            assert!(matches!(
                fit(&ClassifierSpec::new(kind), x.view(), &y, None),
                Err(Error::DegenerateInput(_))
            ));
        }
    }

    #[test]
    fn dimension_checks() {
        let x = array![[0.0, 1.0], [1.0, 0.0], [2.0, 2.0]];
        assert!(matches!(
            fit(&ClassifierSpec::new(LearnerKind::Lr), x.view(), &[0, 1], None),
            Err(Error::DimensionMismatch { .. })
        ));
        let m = fit(&ClassifierSpec::new(LearnerKind::Gnb), x.view(), &[0, 1, 1], None).unwrap();
        assert!(matches!(
            m.predict_proba(Array2::zeros((1, 3)).view()),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        ));
    }

    #[test]
    fn view_models_take_full_width_rows() {
        let x = array![[0.0, 100.0], [1.0, -3.0], [10.0, 7.0], [11.0, 0.0]];
        let y = [0, 0, 1, 1];
        let m = fit_on_view(&ClassifierSpec::new(LearnerKind::Gnb), x.view(), &y, None, &[0]).unwrap();
        assert_eq!(m.n_features(), 2);
        assert_eq!(m.predict(x.view(), 0.5).unwrap(), vec![0, 0, 1, 1]);
    }

    #[test]
    fn kind_names_round_trip() {
        for k in LearnerKind::ALL {
            assert_eq!(LearnerKind::from_name(k.name()), Some(k));
        }
    }
}
