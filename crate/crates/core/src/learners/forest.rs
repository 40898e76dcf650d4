//! Bagged random forest of CART trees.

use ndarray::ArrayView2;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::learners::tree::{DecisionTree, MaxFeatures, Presorted, TreeParams};
use crate::learners::Label;
use crate::seed::{self, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub bootstrap: bool,
    pub tree: TreeParams,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 50,
            bootstrap: true,
            tree: TreeParams {
                max_features: MaxFeatures::Sqrt,
                ..TreeParams::default()
            },
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidParameter("forest needs at least one tree".into()));
        }
        self.tree.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    trees: Vec<DecisionTree>,
    n_features: usize,
}

/// Generator for tree `index` of a forest seeded with `seed`.
pub fn tree_rng(seed: u64, index: usize) -> Rng {
    seed::rng(seed::child(seed, index as u64))
}

/// `n` draws with replacement from `0..n`.
pub fn bootstrap(rng: &mut Rng, n: usize) -> Vec<usize> {
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

/// The rows tree `index` of a bootstrapped forest trains on.
pub fn bootstrap_rows(seed: u64, index: usize, n: usize) -> Vec<usize> {
    bootstrap(&mut tree_rng(seed, index), n)
}

/// Grows tree `index` the way [`RandomForest::fit`] does, returning the
/// tree with its (possibly repeated) training rows.
pub fn grow_tree(
    sample: &Presorted,
    y: &[Label],
    w: Option<&[f64]>,
    params: &ForestParams,
    seed: u64,
    index: usize,
) -> (DecisionTree, Vec<usize>) {
    let mut rng = tree_rng(seed, index);
    let rows = if params.bootstrap {
        bootstrap(&mut rng, sample.n_rows())
    } else {
        (0..sample.n_rows()).collect()
    };
    let tree = DecisionTree::fit_presorted(sample, y, w, &rows, &params.tree, &mut rng);
    (tree, rows)
}

impl RandomForest {
    pub fn fit(x: ArrayView2<f64>, y: &[Label], w: Option<&[f64]>, params: &ForestParams, seed: u64) -> Self {
        let sample = Presorted::new(x);
        let trees = (0..params.n_trees)
            .map(|t| grow_tree(&sample, y, w, params, seed, t).0)
            .collect();
        Self {
            trees,
            n_features: x.ncols(),
        }
    }

    pub fn from_trees(trees: Vec<DecisionTree>) -> Self {
        let n_features = trees.first().map_or(0, |t| t.n_features());
        Self { trees, n_features }
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Mean of the trees' leaf probabilities.
    pub fn positive_proba(&self, x: ArrayView2<f64>) -> Vec<f64> {
        let n = self.trees.len() as f64;
        x.outer_iter()
            .map(|row| self.trees.iter().map(|t| t.positive_row(row)).sum::<f64>() / n)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{fit, Classifier, ClassifierSpec, Hyperparams, LearnerKind, TrainedClassifier};
    use crate::linalg::select_rows;
    use ndarray::Array2;

    fn noisy(n: usize, seed: u64) -> (Array2<f64>, Vec<Label>) {
        let mut rng = seed::rng(seed);
        let x = Array2::from_shape_fn((n, 5), |_| rng.gen_range(-1.0..1.0));
        let y = (0..n)
            .map(|i| u8::from(x[[i, 0]] - x[[i, 2]] + rng.gen_range(-0.5..0.5) > 0.0))
            .collect();
        (x, y)
    }

    #[test]
    fn single_full_tree_equals_decision_tree_on_resample() {
        let (x, y) = noisy(200, 1);
        let params = ForestParams {
            n_trees: 1,
            bootstrap: true,
            tree: TreeParams::default(),
        };
        let spec = ClassifierSpec::new(LearnerKind::Rf)
            .with_params(Hyperparams::Forest(params))
            .with_seed(17);
        let rf = fit(&spec, x.view(), &y, None).unwrap();

        let rows = bootstrap_rows(17, 0, 200);
        let xs = select_rows(x.view(), &rows);
        let ys: Vec<Label> = rows.iter().map(|&i| y[i]).collect();
        let dt = fit(
            &ClassifierSpec::new(LearnerKind::Dt).with_seed(99),
            xs.view(),
            &ys,
            None,
        )
        .unwrap();

        assert_eq!(rf.as_forest().unwrap().trees()[0], *dt.as_tree().unwrap());
        assert_eq!(rf.predict_proba(x.view()).unwrap(), dt.predict_proba(x.view()).unwrap());
    }

    #[test]
    fn unanimous_pure_trees_give_certain_rows() {
        let x = ndarray::array![[0.0], [0.1], [0.2], [5.0], [5.1], [5.2]];
        let y = [0, 0, 0, 1, 1, 1];
        let trees = (0..7)
            .map(|s| DecisionTree::fit(x.view(), &y, None, &TreeParams::default(), s))
            .collect();
        let rf = TrainedClassifier::from_forest(RandomForest::from_trees(trees));
        let p = rf.predict_proba(ndarray::array![[100.0]].view()).unwrap();
        assert_eq!(p, ndarray::array![[0.0, 1.0]]);
    }

    #[test]
    fn deterministic_per_seed() {
        let (x, y) = noisy(150, 2);
        let a = RandomForest::fit(x.view(), &y, None, &ForestParams::default(), 5);
        let b = RandomForest::fit(x.view(), &y, None, &ForestParams::default(), 5);
        assert_eq!(a, b);
    }
}
