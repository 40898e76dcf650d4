//! Co-forest: a random forest whose trees are taught by their concomitant
//! ensembles (every other tree).

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::learners::forest::{grow_tree, ForestParams, RandomForest};
use crate::learners::tree::{DecisionTree, MaxFeatures, Presorted, TreeParams};
use crate::learners::{Classifier, Label};
use crate::seed;
use crate::ssl::{check_unlabeled, class_counts, Pool, TeachingMode};

#[derive(Debug, Clone, PartialEq)]
pub struct CoForestConfig {
    pub n_trees: usize,
    /// Concomitant confidence a pseudo-label must exceed.
    pub theta: f64,
    pub max_rounds: usize,
    pub tree: TreeParams,
    pub seed: u64,
}

impl Default for CoForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 10,
            theta: 0.75,
            max_rounds: 30,
            tree: TreeParams {
                max_features: MaxFeatures::Sqrt,
                ..TreeParams::default()
            },
            seed: 0,
        }
    }
}

impl CoForestConfig {
    /// The forest parameters used for the initial (supervised) trees.
    pub fn forest_params(&self) -> ForestParams {
        ForestParams {
            n_trees: self.n_trees,
            bootstrap: true,
            tree: self.tree.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CoForest {
    pub forest: RandomForest,
    /// Pseudo-labels used by each retrained tree, per round.
    pub accepted: Vec<Vec<usize>>,
    pub rounds: usize,
}

impl CoForest {
    pub fn teaching_mode(&self) -> TeachingMode {
        TeachingMode::Mutual
    }
}

impl Classifier for CoForest {
    fn n_features(&self) -> usize {
        self.forest.n_features()
    }

    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        crate::learners::check_width(self.forest.n_features(), x.ncols())?;
        Ok(crate::learners::proba_matrix(&self.forest.positive_proba(x)))
    }
}

fn confidence(p: f64) -> f64 {
    p.max(1.0 - p)
}

pub fn co_forest(x_l: ArrayView2<f64>, y_l: &[Label], x_u: ArrayView2<f64>, cfg: &CoForestConfig) -> Result<CoForest> {
    class_counts(y_l)?;
    check_unlabeled(x_l, x_u)?;
    if cfg.n_trees < 3 {
        return Err(Error::InvalidParameter("co-forest needs at least 3 trees".into()));
    }
    cfg.tree.validate()?;
    let params = cfg.forest_params();
    let n = cfg.n_trees;
    let (mut trees, bags): (Vec<DecisionTree>, Vec<Vec<usize>>) = {
        let sample = Presorted::new(x_l);
        (0..n)
            .map(|i| grow_tree(&sample, y_l, None, &params, cfg.seed, i))
            .unzip()
    };
    let mut accepted = Vec::new();
    let mut rounds = 0;
    if x_u.nrows() == 0 {
        return Ok(CoForest {
            forest: RandomForest::from_trees(trees),
            accepted,
            rounds,
        });
    }

    let mut in_bag = vec![vec![false; y_l.len()]; n];
    for (flags, rows) in in_bag.iter_mut().zip(&bags) {
        for &r in rows {
            flags[r] = true;
        }
    }
    let mut on_l: Vec<Vec<f64>> = trees.iter().map(|t| t.positive_proba(x_l)).collect();
    let mut on_u: Vec<Vec<f64>> = trees.iter().map(|t| t.positive_proba(x_u)).collect();
    let mut prev_error = vec![0.5f64; n];
    let mut prev_weight = vec![(0.1 * y_l.len() as f64).min(100.0); n];

    while rounds < cfg.max_rounds {
        let sum_u: Vec<f64> = (0..x_u.nrows()).map(|r| on_u.iter().map(|p| p[r]).sum()).collect();
        let mut updates = Vec::new();
        for i in 0..n {
            // Out-of-bag error of the concomitant ensemble.
            let (mut wrong, mut counted) = (0usize, 0usize);
            for (r, &truth) in y_l.iter().enumerate() {
                let voters: Vec<usize> = (0..n).filter(|&j| j != i && !in_bag[j][r]).collect();
                if voters.is_empty() {
                    continue;
                }
                let p = voters.iter().map(|&j| on_l[j][r]).sum::<f64>() / voters.len() as f64;
                counted += 1;
                wrong += usize::from(u8::from(p >= 0.5) != truth);
            }
            let e = if counted == 0 {
                0.5
            } else {
                wrong as f64 / counted as f64
            };
            if e >= prev_error[i] {
                continue;
            }
            let w_max = if e > 0.0 {
                prev_error[i] * prev_weight[i] / e
            } else {
                f64::INFINITY
            };
            let mut order: Vec<usize> = (0..x_u.nrows()).collect();
            order.shuffle(&mut seed::rng(seed::derive(
                cfg.seed,
                &["co_forest", &rounds.to_string(), &i.to_string()],
            )));
            let mut picks = Vec::new();
            let mut weight = 0.0;
            for r in order {
                let p = (sum_u[r] - on_u[i][r]) / (n - 1) as f64;
                let c = confidence(p);
                if c <= cfg.theta {
                    continue;
                }
                if weight + c > w_max {
                    break;
                }
                weight += c;
                picks.push((r, u8::from(p >= 0.5), c));
            }
            if !picks.is_empty() && e * weight < prev_error[i] * prev_weight[i] {
                updates.push((i, picks, e, weight));
            }
        }
        if updates.is_empty() {
            break;
        }
        let mut counts = vec![0; n];
        for (i, mut picks, e, weight) in updates {
            picks.sort_unstable_by_key(|p| p.0);
            let xb = crate::linalg::select_rows(x_l, &bags[i]);
            let yb: Vec<Label> = bags[i].iter().map(|&r| y_l[r]).collect();
            let mut pool = Pool::new(xb.view(), &yb);
            for &(r, label, c) in &picks {
                pool.push(x_u.row(r), label, c);
            }
            let rows: Vec<usize> = (0..pool.len()).collect();
            let mut rng = seed::rng(seed::derive(
                cfg.seed,
                &["co_forest_tree", &rounds.to_string(), &i.to_string()],
            ));
            trees[i] = DecisionTree::fit_rows(pool.x.view(), &pool.y, Some(&pool.w), &rows, &cfg.tree, &mut rng);
            on_l[i] = trees[i].positive_proba(x_l);
            on_u[i] = trees[i].positive_proba(x_u);
            prev_error[i] = e;
            prev_weight[i] = weight;
            counts[i] = picks.len();
        }
        accepted.push(counts);
        rounds += 1;
    }
    Ok(CoForest {
        forest: RandomForest::from_trees(trees),
        accepted,
        rounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng;

    fn blobs(n: usize, gap: f64, seed: u64) -> (Array2<f64>, Vec<Label>) {
        let mut rng = seed::rng(seed);
        let y: Vec<Label> = (0..n).map(|i| u8::from(i % 3 == 0)).collect();
        let x = Array2::from_shape_fn((n, 4), |(i, _)| rng.gen_range(-1.0..1.0) + gap * f64::from(y[i]));
        (x, y)
    }

    #[test]
    fn unattainable_threshold_equals_supervised_forest() {
        let (x, y) = blobs(60, 0.8, 1);
        let (u, _) = blobs(200, 0.8, 2);
        let cfg = CoForestConfig {
            theta: 1.0 + 1e-9,
            seed: 5,
            ..Default::default()
        };
        let cf = co_forest(x.view(), &y, u.view(), &cfg).unwrap();
        let rf = RandomForest::fit(x.view(), &y, None, &cfg.forest_params(), 5);
        assert_eq!(cf.forest, rf);
        assert_eq!(cf.rounds, 0);
    }

    #[test]
    fn empty_pool_is_supervised_forest() {
        let (x, y) = blobs(40, 1.0, 3);
        let cfg = CoForestConfig::default();
        let cf = co_forest(x.view(), &y, Array2::zeros((0, 4)).view(), &cfg).unwrap();
        assert_eq!(
            cf.forest,
            RandomForest::fit(x.view(), &y, None, &cfg.forest_params(), 0)
        );
    }

    #[test]
    fn pseudo_labels_flow_and_rounds_are_bounded() {
        let (x, y) = blobs(30, 2.0, 4);
        let (u, _) = blobs(300, 2.0, 5);
        let cfg = CoForestConfig {
            max_rounds: 5,
            ..Default::default()
        };
        let cf = co_forest(x.view(), &y, u.view(), &cfg).unwrap();
        assert!(cf.rounds <= 5);
        assert!(cf.accepted.iter().flatten().sum::<usize>() > 0);
        let (t, ty) = blobs(200, 2.0, 6);
        let pred = cf.predict(t.view(), 0.5).unwrap();
        assert!(crate::learners::accuracy(&pred, &ty) > 0.9);
    }

    #[test]
    fn rejects_tiny_forests_and_single_class() {
        let (x, y) = blobs(30, 1.0, 7);
        let small = CoForestConfig {
            n_trees: 2,
            ..Default::default()
        };
        assert!(co_forest(x.view(), &y, x.view(), &small).is_err());
        assert_eq!(
            co_forest(x.view(), &[0; 30], x.view(), &CoForestConfig::default()).unwrap_err(),
            Error::SingleClass
        );
    }
}
