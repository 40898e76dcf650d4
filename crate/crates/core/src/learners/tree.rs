//! CART decision tree with weighted Gini impurity.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::learners::Label;
use crate::seed::{self, Rng};

/// How many candidate features each node examines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaxFeatures {
    All,
    Sqrt,
    Count(usize),
}

impl MaxFeatures {
    fn resolve(self, d: usize) -> usize {
        match self {
            MaxFeatures::All => d,
            MaxFeatures::Sqrt => ((d as f64).sqrt().round() as usize).clamp(1, d),
            MaxFeatures::Count(k) => k.clamp(1, d),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub max_features: MaxFeatures,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 12,
            min_samples_split: 4,
            max_features: MaxFeatures::All,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 || self.min_samples_split < 2 {
            return Err(Error::InvalidParameter(
                "tree needs max_depth >= 1 and min_samples_split >= 2".into(),
            ));
        }
        if self.max_features == MaxFeatures::Count(0) {
            return Err(Error::InvalidParameter("max_features must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        /// Weighted fraction of class 1 among the rows reaching this leaf.
        positive: f64,
        weight: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    n_features: usize,
}

/// A sample laid out for split search: one contiguous row per feature and,
/// for every feature, all row indices ordered by value (ties by index).
///
/// Built once and shared by every tree grown on the same sample.
pub struct Presorted {
    columns: Array2<f64>,
    order: Vec<u32>,
}

impl Presorted {
    pub fn new(x: ArrayView2<f64>) -> Self {
        let columns = x.t().as_standard_layout().into_owned();
        let n = x.nrows();
        let mut order = Vec::with_capacity(n * x.ncols());
        let mut keyed: Vec<(u64, u32)> = Vec::with_capacity(n);
        for column in columns.outer_iter() {
            keyed.clear();
            keyed.extend(column.iter().enumerate().map(|(i, &v)| (order_key(v), i as u32)));
            keyed.sort_unstable();
            order.extend(keyed.iter().map(|&(_, i)| i));
        }
        Self { columns, order }
    }

    pub fn n_rows(&self) -> usize {
        self.columns.ncols()
    }

    pub fn n_features(&self) -> usize {
        self.columns.nrows()
    }
}

struct Builder<'a> {
    columns: ArrayView2<'a, f64>,
    y: &'a [Label],
    w: &'a [f64],
    /// Times each row occurs in the sample being fitted.
    multiplicity: &'a [u32],
    params: &'a TreeParams,
    n_candidates: usize,
    rng: &'a mut Rng,
    nodes: Vec<Node>,
    /// Distinct sample rows, `m` per feature, each feature's block in value
    /// order; every node owns the same `lo..hi` range of every block.
    order: Vec<u32>,
    m: usize,
    goes_left: Vec<bool>,
    scratch: Vec<u32>,
}

/// `W * gini` for class weights `w0`, `w1`.
#[inline]
fn weighted_gini(w0: f64, w1: f64) -> f64 {
    let total = w0 + w1;
    if total <= 0.0 {
        0.0
    } else {
        total - (w0 * w0 + w1 * w1) / total
    }
}

const MIN_GAIN: f64 = 1e-12;

/// Integer key whose order matches `f64::total_cmp`.
#[inline]
fn order_key(v: f64) -> u64 {
    let b = v.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | 1 << 63
    }
}

impl Builder<'_> {
    fn block(&self, feature: usize, lo: usize, hi: usize) -> &[u32] {
        &self.order[feature * self.m + lo..feature * self.m + hi]
    }

    fn leaf(&mut self, w0: f64, w1: f64) -> usize {
        let total = w0 + w1;
        let positive = if total > 0.0 { w1 / total } else { 0.5 };
        self.nodes.push(Node::Leaf {
            positive,
            weight: total,
        });
        self.nodes.len() - 1
    }

    /// Best (gain, threshold) for one feature over the node's rows.
    fn best_threshold(&self, lo: usize, hi: usize, feature: usize, w0: f64, w1: f64) -> Option<(f64, f64)> {
        let column = self.columns.row(feature);
        let column = column.as_slice().expect("columns are contiguous");
        let rows = self.block(feature, lo, hi);
        let parent = weighted_gini(w0, w1);
        let (mut l0, mut l1) = (0.0, 0.0);
        let mut best: Option<(f64, f64)> = None;
        for k in 0..rows.len() - 1 {
            let i = rows[k] as usize;
            if self.y[i] == 1 {
                l1 += self.w[i];
            } else {
                l0 += self.w[i];
            }
            let (v, next) = (column[i], column[rows[k + 1] as usize]);
            if next <= v {
                continue;
            }
            let gain = parent - weighted_gini(l0, l1) - weighted_gini(w0 - l0, w1 - l1);
            if gain > MIN_GAIN && best.is_none_or(|(g, _)| gain > g) {
                let mid = v + (next - v) / 2.0;
                let threshold = if mid < next { mid } else { v };
                best = Some((gain, threshold));
            }
        }
        best
    }

    /// Stably moves the rows marked in `goes_left` to the front of
    /// `lo..hi` in every feature block; returns the left count.
    fn partition(&mut self, lo: usize, hi: usize) -> usize {
        let goes_left = &self.goes_left;
        let len = hi - lo;
        self.scratch.resize(len, 0);
        let mut n_left = 0;
        for block in self.order.chunks_exact_mut(self.m) {
            let block = &mut block[lo..hi];
            let mut n_right = 0;
            n_left = 0;
            for k in 0..len {
                let row = block[k];
                let left = goes_left[row as usize];
                // Write to both sides; only the matching cursor advances.
                block[n_left.min(k)] = row;
                self.scratch[n_right.min(len - 1)] = row;
                n_left += usize::from(left);
                n_right += usize::from(!left);
            }
            block[n_left..].copy_from_slice(&self.scratch[..n_right]);
        }
        n_left
    }

    fn build(&mut self, lo: usize, hi: usize, depth: usize) -> usize {
        let (mut w0, mut w1, mut size) = (0.0, 0.0, 0usize);
        for &i in self.block(0, lo, hi) {
            let i = i as usize;
            if self.y[i] == 1 {
                w1 += self.w[i];
            } else {
                w0 += self.w[i];
            }
            size += self.multiplicity[i] as usize;
        }
        if depth >= self.params.max_depth || size < self.params.min_samples_split || w0 <= 0.0 || w1 <= 0.0 {
            return self.leaf(w0, w1);
        }
        let d = self.columns.nrows();
        let mut candidates: Vec<usize> = (0..d).collect();
        if self.n_candidates < d {
            candidates.shuffle(self.rng);
        }
        let mut best: Option<(f64, usize, f64)> = None;
        for (visited, &f) in candidates.iter().enumerate() {
            if visited >= self.n_candidates && best.is_some() {
                break;
            }
            if let Some((gain, thr)) = self.best_threshold(lo, hi, f, w0, w1) {
                if best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, f, thr));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            return self.leaf(w0, w1);
        };
        for k in lo..hi {
            let row = self.order[k] as usize;
            self.goes_left[row] = self.columns[[feature, row]] <= threshold;
        }
        let split = lo + self.partition(lo, hi);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            positive: 0.0,
            weight: 0.0,
        });
        let left = self.build(lo, split, depth + 1);
        let right = self.build(split, hi, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

impl DecisionTree {
    pub fn fit(x: ArrayView2<f64>, y: &[Label], w: Option<&[f64]>, params: &TreeParams, seed: u64) -> Self {
        let rows: Vec<usize> = (0..x.nrows()).collect();
        let mut rng = seed::rng(seed);
        Self::fit_rows(x, y, w, &rows, params, &mut rng)
    }

    /// Grows a tree on `rows` (which may repeat indices, as in a bootstrap).
    pub fn fit_rows(
        x: ArrayView2<f64>,
        y: &[Label],
        w: Option<&[f64]>,
        rows: &[usize],
        params: &TreeParams,
        rng: &mut Rng,
    ) -> Self {
        Self::fit_presorted(&Presorted::new(x), y, w, rows, params, rng)
    }

    /// [`DecisionTree::fit_rows`] on a presorted sample.
    ///
    /// Repeated rows are folded into one row carrying its multiplicity as
    /// weight, which yields the same splits at a fraction of the cost.
    pub fn fit_presorted(
        sample: &Presorted,
        y: &[Label],
        w: Option<&[f64]>,
        rows: &[usize],
        params: &TreeParams,
        rng: &mut Rng,
    ) -> Self {
        let n = sample.n_rows();
        let mut multiplicity = vec![0u32; n];
        for &r in rows {
            multiplicity[r] += 1;
        }
        let folded: Vec<f64> = (0..n)
            .map(|i| f64::from(multiplicity[i]) * w.map_or(1.0, |w| w[i]))
            .collect();
        let order: Vec<u32> = sample
            .order
            .iter()
            .copied()
            .filter(|&i| multiplicity[i as usize] > 0)
            .collect();
        let d = sample.n_features();
        let mut b = Builder {
            columns: sample.columns.view(),
            y,
            w: &folded,
            multiplicity: &multiplicity,
            params,
            n_candidates: params.max_features.resolve(d),
            rng,
            nodes: Vec::new(),
            m: order.len() / d.max(1),
            order,
            goes_left: vec![false; n],
            scratch: Vec::new(),
        };
        if b.m > 0 {
            b.build(0, b.m, 0);
        } else {
            b.leaf(0.0, 0.0);
        }
        Self {
            nodes: b.nodes,
            n_features: d,
        }
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Index of the leaf reached by `row`.
    pub fn leaf_of(&self, row: ArrayView1<f64>) -> usize {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                Node::Leaf { .. } => return id,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn positive_row(&self, row: ArrayView1<f64>) -> f64 {
        match self.nodes[self.leaf_of(row)] {
            Node::Leaf { positive, .. } => positive,
            Node::Split { .. } => unreachable!("leaf_of returns leaves"),
        }
    }

    pub fn positive_proba(&self, x: ArrayView2<f64>) -> Vec<f64> {
        x.outer_iter().map(|r| self.positive_row(r)).collect()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}
