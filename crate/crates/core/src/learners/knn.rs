//! k-nearest-neighbour vote on standardized features.

use ndarray::{s, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::learners::{canonicalize, Label};
use crate::linalg::Standardizer;

#[derive(Debug, Clone, PartialEq)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { k: 5 }
    }
}

impl KnnParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct KnnModel {
    scaler: Standardizer,
    points: Array2<f64>,
    labels: Vec<Label>,
    weights: Vec<f64>,
    k: usize,
}

impl KnnModel {
    pub fn fit(x: ArrayView2<f64>, y: &[Label], w: Option<&[f64]>, p: &KnnParams) -> Self {
        let (x, labels, weights) = canonicalize(x, y, w);
        let scaler = Standardizer::fit(x.view());
        let points = scaler.transform(x.view());
        let weights = weights.unwrap_or_else(|| vec![1.0; labels.len()]);
        Self {
            scaler,
            points,
            labels,
            weights,
            k: p.k.min(y.len()),
        }
    }

    /// Keeps the `k` smallest `(distance, index)` pairs in `best`, ties
    /// broken by storage order.
    fn offer(&self, best: &mut Vec<(f64, usize)>, d: f64, i: usize) {
        if best.len() < self.k {
            let pos = best.partition_point(|&(bd, _)| bd <= d);
            best.insert(pos, (d, i));
        } else if d < best[self.k - 1].0 {
            best.pop();
            let pos = best.partition_point(|&(bd, _)| bd <= d);
            best.insert(pos, (d, i));
        }
    }

    fn vote(&self, best: &[(f64, usize)]) -> f64 {
        let (pos, total) = best.iter().fold((0.0, 0.0), |(p, t), &(_, i)| {
            let w = self.weights[i];
            (p + if self.labels[i] == 1 { w } else { 0.0 }, t + w)
        });
        if total > 0.0 {
            pos / total
        } else {
            0.5
        }
    }

    /// Weighted share of class-1 votes among the `k` nearest training rows.
    ///
    /// Distances are ranked as `|p|² − 2 q·p`, which orders neighbours like
    /// the squared Euclidean distance; queries are processed in blocks so
    /// the dot products run as one matrix product per block.
    pub fn positive_proba(&self, x: ArrayView2<f64>) -> Vec<f64> {
        const BLOCK: usize = 256;
        let xs = self.scaler.transform(x);
        let norms: Vec<f64> = self.points.outer_iter().map(|p| p.dot(&p)).collect();
        let mut best = Vec::with_capacity(self.k + 1);
        let mut out = Vec::with_capacity(xs.nrows());
        let mut start = 0;
        while start < xs.nrows() {
            let end = (start + BLOCK).min(xs.nrows());
            let dots = xs.slice(s![start..end, ..]).dot(&self.points.t());
            for row in dots.outer_iter() {
                best.clear();
                for (i, (&dot, &norm)) in row.iter().zip(&norms).enumerate() {
                    self.offer(&mut best, norm - 2.0 * dot, i);
                }
                out.push(self.vote(&best));
            }
            start = end;
        }
        out
    }
}
