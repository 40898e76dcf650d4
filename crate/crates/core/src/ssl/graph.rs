//! Transductive graph methods: label propagation and label spreading.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::learners::Label;
use crate::linalg::{median_pairwise_distance, pairwise_sq_distances};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraphKind {
    /// Binary symmetrized k-nearest-neighbour graph.
    Knn(usize),
    /// Fully connected RBF graph; `None` bandwidth uses the median distance.
    Rbf(Option<f64>),
}

impl Default for GraphKind {
    fn default() -> Self {
        GraphKind::Rbf(None)
    }
}

/// Symmetric, nonnegative weight matrix with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityGraph {
    pub weights: Array2<f64>,
    /// All pairwise distances were zero; a kNN graph fell back to the
    /// complete graph.
    pub degenerate_distances: bool,
}

impl AffinityGraph {
    pub fn n_nodes(&self) -> usize {
        self.weights.nrows()
    }

    fn degrees(&self) -> Array1<f64> {
        self.weights.sum_axis(ndarray::Axis(1))
    }
}

pub fn build_graph(x: ArrayView2<f64>, kind: GraphKind) -> Result<AffinityGraph> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::TooFewInstances { needed: 2, found: n });
    }
    let d2 = pairwise_sq_distances(x);
    let all_zero = d2.iter().all(|&v| v == 0.0);
    let mut w = Array2::zeros((n, n));
    let mut degenerate = false;
    match kind {
        GraphKind::Rbf(sigma) => {
            let sigma = match sigma {
                Some(s) if s > 0.0 => s,
                Some(_) => return Err(Error::InvalidParameter("graph bandwidth must be positive".into())),
                None => {
                    let m = median_pairwise_distance(x);
                    if m > 0.0 {
                        m
                    } else {
                        1.0
                    }
                }
            };
            let s2 = 2.0 * sigma * sigma;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        w[[i, j]] = (-d2[[i, j]] / s2).exp();
                    }
                }
            }
        }
        GraphKind::Knn(k) => {
            if k == 0 {
                return Err(Error::InvalidParameter("kNN graph needs k >= 1".into()));
            }
            if all_zero {
                log::warn!("all pairwise distances are zero; using the complete graph");
                degenerate = true;
                w.fill(1.0);
                w.diag_mut().fill(0.0);
            } else {
                let k = k.min(n - 1);
                let mut order: Vec<usize> = Vec::with_capacity(n);
                for i in 0..n {
                    order.clear();
                    order.extend((0..n).filter(|&j| j != i));
                    order.sort_by(|&a, &b| d2[[i, a]].total_cmp(&d2[[i, b]]).then(a.cmp(&b)));
                    for &j in &order[..k] {
                        w[[i, j]] = 1.0;
                        w[[j, i]] = 1.0;
                    }
                }
            }
        }
    }
    Ok(AffinityGraph {
        weights: w,
        degenerate_distances: degenerate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for IterationConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 1000,
        }
    }
}

/// Class distributions per node.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagated {
    /// `n × 2`, rows sum to one.
    pub distribution: Array2<f64>,
    pub iterations: usize,
    /// Unlabeled nodes without edges; they are reported as (0.5, 0.5).
    pub isolated: Vec<usize>,
}

impl Propagated {
    pub fn positive(&self) -> Vec<f64> {
        self.distribution.column(1).to_vec()
    }
}

fn one_hot(y: &[Option<Label>]) -> Result<Array2<f64>> {
    let has = |c: Label| y.contains(&Some(c));
    if !has(0) || !has(1) {
        return Err(Error::NoLabeledRows);
    }
    let mut f = Array2::from_elem((y.len(), 2), 0.5);
    for (i, l) in y.iter().enumerate() {
        if let Some(c) = l {
            f[[i, 0]] = f64::from(1 - c);
            f[[i, 1]] = f64::from(*c);
        }
    }
    Ok(f)
}

fn check_len(g: &AffinityGraph, y: &[Option<Label>]) -> Result<()> {
    if g.n_nodes() != y.len() {
        return Err(Error::LengthMismatch {
            left: g.n_nodes(),
            right: y.len(),
        });
    }
    Ok(())
}

/// Iterates `F ← D⁻¹ W F` and re-clamps labeled rows until the largest
/// change drops below `tol`.
pub fn label_propagation(g: &AffinityGraph, y: &[Option<Label>], cfg: &IterationConfig) -> Result<Propagated> {
    check_len(g, y)?;
    let mut f = one_hot(y)?;
    let deg = g.degrees();
    let isolated: Vec<usize> = (0..y.len()).filter(|&i| y[i].is_none() && deg[i] <= 0.0).collect();
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        let mut next = g.weights.dot(&f);
        for i in 0..y.len() {
            match y[i] {
                Some(c) => {
                    next[[i, 0]] = f64::from(1 - c);
                    next[[i, 1]] = f64::from(c);
                }
                None if deg[i] > 0.0 => {
                    next[[i, 0]] /= deg[i];
                    next[[i, 1]] /= deg[i];
                }
                None => {
                    next[[i, 0]] = 0.5;
                    next[[i, 1]] = 0.5;
                }
            }
        }
        let change = (&next - &f).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        f = next;
        iterations += 1;
        if change < cfg.tol {
            break;
        }
    }
    Ok(Propagated {
        distribution: normalize_rows(f),
        iterations,
        isolated,
    })
}

fn normalize_rows(mut f: Array2<f64>) -> Array2<f64> {
    for mut row in f.outer_iter_mut() {
        let s = row[0] + row[1];
        if s > 0.0 && s.is_finite() {
            row /= s;
        } else {
            row.fill(0.5);
        }
    }
    f
}

/// `S = D^{-1/2} W D^{-1/2}`, with isolated nodes left unconnected.
pub fn normalized_weights(g: &AffinityGraph) -> Array2<f64> {
    let inv_sqrt = g.degrees().mapv(|d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 });
    let n = g.n_nodes();
    Array2::from_shape_fn((n, n), |(i, j)| inv_sqrt[i] * g.weights[[i, j]] * inv_sqrt[j])
}

/// Initial label matrix for spreading: one-hot rows for labeled nodes,
/// zeros elsewhere.
pub fn spreading_seed(y: &[Option<Label>]) -> Array2<f64> {
    let mut y0 = Array2::zeros((y.len(), 2));
    for (i, l) in y.iter().enumerate() {
        if let Some(c) = l {
            y0[[i, usize::from(*c)]] = 1.0;
        }
    }
    y0
}

/// Iterates `F ← α S F + (1 − α) Y₀`; rows are renormalized on output.
pub fn label_spreading(
    g: &AffinityGraph,
    y: &[Option<Label>],
    alpha: f64,
    cfg: &IterationConfig,
) -> Result<Propagated> {
    check_len(g, y)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "spreading alpha {alpha} outside (0, 1)"
        )));
    }
    one_hot(y)?;
    let s = normalized_weights(g);
    let y0 = spreading_seed(y);
    let deg = g.degrees();
    let isolated: Vec<usize> = (0..y.len()).filter(|&i| y[i].is_none() && deg[i] <= 0.0).collect();
    let mut f = y0.clone();
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        let next = s.dot(&f) * alpha + &y0 * (1.0 - alpha);
        let change = (&next - &f).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        f = next;
        iterations += 1;
        if change < cfg.tol {
            break;
        }
    }
    Ok(Propagated {
        distribution: normalize_rows(f),
        iterations,
        isolated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::solve;
    use ndarray::array;

    fn graph(w: Array2<f64>) -> AffinityGraph {
        AffinityGraph {
            weights: w,
            degenerate_distances: false,
        }
    }

    fn path3() -> AffinityGraph {
        graph(array![[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
    }

    #[test]
    fn rbf_weights_follow_distance() {
        let x = array![[0.0], [1.0], [2.0]];
        let g = build_graph(x.view(), GraphKind::Rbf(None)).unwrap();
        let w = &g.weights;
        assert_eq!(w[[0, 1]], w[[1, 2]]);
        assert!(w[[0, 1]] > w[[0, 2]]);
        assert_eq!(w, &w.t());
        assert!(w.diag().iter().all(|&v| v == 0.0));
        let dup = array![[1.0, 2.0], [1.0, 2.0], [5.0, 5.0]];
        assert_eq!(
            build_graph(dup.view(), GraphKind::Rbf(None)).unwrap().weights[[0, 1]],
            1.0
        );
    }

    #[test]
    fn knn_full_k_is_complete_and_degenerate_flagged() {
        let x = array![[0.0], [1.0], [3.0], [7.0]];
        let g = build_graph(x.view(), GraphKind::Knn(3)).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(g.weights[[i, j]], f64::from(u8::from(i != j)));
            }
        }
        let g = build_graph(x.view(), GraphKind::Knn(1)).unwrap();
        assert_eq!(g.weights, g.weights.t());
        let same = Array2::from_elem((3, 2), 4.0);
        let g = build_graph(same.view(), GraphKind::Knn(1)).unwrap();
        assert!(g.degenerate_distances);
        assert_eq!(g.weights.sum(), 6.0);
    }

    #[test]
    fn propagation_examples() {
        let y = [Some(0), None, Some(1)];
        let out = label_propagation(&path3(), &y, &IterationConfig::default()).unwrap();
        assert!((out.distribution[[1, 1]] - 0.5).abs() < 1e-9);

        // Star: the centre connects to a positive (0.9) and a negative (0.1).
        let star = graph(array![[0.0, 0.9, 0.1], [0.9, 0.0, 0.0], [0.1, 0.0, 0.0]]);
        let out = label_propagation(&star, &[None, Some(1), Some(0)], &IterationConfig::default()).unwrap();
        assert!((out.distribution[[0, 1]] - 0.9).abs() < 1e-12);

        let all = [Some(1), Some(0), Some(1)];
        let out = label_propagation(&path3(), &all, &IterationConfig::default()).unwrap();
        assert_eq!(out.distribution, spreading_seed(&all));
    }

    #[test]
    fn isolated_unlabeled_nodes_are_uniform() {
        let g = graph(array![[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]);
        let y = [Some(0), Some(1), None];
        for out in [
            label_propagation(&g, &y, &IterationConfig::default()).unwrap(),
            label_spreading(&g, &y, 0.9, &IterationConfig::default()).unwrap(),
        ] {
            assert_eq!(out.isolated, vec![2]);
            assert_eq!(out.distribution.row(2).to_vec(), vec![0.5, 0.5]);
        }
    }

    #[test]
    fn needs_both_classes() {
        let err = label_propagation(&path3(), &[Some(1), None, None], &IterationConfig::default());
        assert_eq!(err.unwrap_err(), Error::NoLabeledRows);
    }

    #[test]
    fn spreading_examples() {
        let y = [Some(0), None, Some(1)];
        let out = label_spreading(&path3(), &y, 1e-9, &IterationConfig::default()).unwrap();
        assert_eq!(out.distribution.row(1).to_vec(), vec![0.5, 0.5]);
        assert_eq!(out.distribution.row(0).to_vec(), vec![1.0, 0.0]);
        let out = label_spreading(&path3(), &y, 0.99, &IterationConfig::default()).unwrap();
        assert!((out.distribution[[1, 1]] - 0.5).abs() < 1e-9);
    }

    /// Two 5-cliques joined by one weak edge.
    fn two_clusters() -> AffinityGraph {
        let mut w = Array2::zeros((10, 10));
        for i in 0..10 {
            for j in 0..10 {
                if i != j && (i < 5) == (j < 5) {
                    w[[i, j]] = 1.0;
                }
            }
        }
        w[[4, 5]] = 0.05;
        w[[5, 4]] = 0.05;
        graph(w)
    }

    #[test]
    fn clusters_take_their_seed_label() {
        let mut y = vec![None; 10];
        y[0] = Some(1);
        y[9] = Some(0);
        let out = label_spreading(&two_clusters(), &y, 0.99, &IterationConfig::default()).unwrap();
        for i in 0..10 {
            let label = u8::from(out.distribution[[i, 1]] > 0.5);
            assert_eq!(label, u8::from(i < 5), "node {i}");
        }
    }

    #[test]
    fn spreading_matches_closed_form() {
        let g = two_clusters();
        let mut y = vec![None; 10];
        y[1] = Some(1);
        y[7] = Some(0);
        let alpha = 0.9;
        let cfg = IterationConfig {
            tol: 1e-12,
            max_iter: 100_000,
        };
        let out = label_spreading(&g, &y, alpha, &cfg).unwrap();
        // Oracle: F* = (I − αS)⁻¹ (1 − α) Y₀ by dense solve, then row-normalized.
        let s = normalized_weights(&g);
        let a = Array2::eye(10) - s * alpha;
        let y0 = spreading_seed(&y);
        let mut cols = Vec::new();
        for c in 0..2 {
            cols.push(solve(&a, &(y0.column(c).to_owned() * (1.0 - alpha))).unwrap());
        }
        for i in 0..10 {
            let total = cols[0][i] + cols[1][i];
            assert!((out.distribution[[i, 1]] - cols[1][i] / total).abs() < 1e-5);
        }
    }

    #[test]
    fn propagation_reaches_a_fixed_point() {
        let mut y = vec![None; 10];
        y[0] = Some(1);
        y[9] = Some(0);
        let g = two_clusters();
        let cfg = IterationConfig::default();
        let out = label_propagation(&g, &y, &cfg).unwrap();
        assert!(out.iterations < cfg.max_iter);
        // One more step moves nothing by more than tol.
        let deg = g.degrees();
        let next = g.weights.dot(&out.distribution);
        for i in 0..10 {
            if y[i].is_none() {
                assert!((next[[i, 1]] / deg[i] - out.distribution[[i, 1]]).abs() <= cfg.tol);
            }
            assert!((out.distribution.row(i).sum() - 1.0).abs() < 1e-9);
        }
    }
}
