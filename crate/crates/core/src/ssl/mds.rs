//! Classical multidimensional scaling and FTcF (self-training in the
//! embedded space).
//!
//! Large inputs use landmark MDS: the eigenproblem is solved on a seeded
//! subset of anchor rows and every row is placed by distance triangulation
//! against the anchors. When all rows are anchors this is exact classical
//! MDS.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::index::sample;

use crate::error::{Error, Result};
use crate::learners::{Classifier, Label, Learner};
use crate::linalg::{pairwise_sq_distances, squared_distance, symmetric_eigen, Standardizer};
use crate::seed;
use crate::ssl::wrappers::{self_train, SelfTrained};
use crate::ssl::{PseudoLabelPolicy, TeachingMode};

/// Relative size below which an eigenvalue counts as zero.
const EIGEN_EPS: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct Embedding {
    /// `n × d` coordinates of the embedded rows.
    pub coords: Array2<f64>,
    /// Retained eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Fewer than the requested number of positive eigenvalues existed.
    pub rank_deficient: bool,
    /// Positive eigenvalues were dropped, so distances are not preserved.
    pub truncated: bool,
    anchors: Array2<f64>,
    /// Column means of the anchors' squared-distance matrix.
    anchor_mean_sq: Array1<f64>,
    /// `d × m` rows `v_k / sqrt(λ_k)`.
    projector: Array2<f64>,
}

impl Embedding {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Places new rows from their squared distances to the anchors.
    pub fn project(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.anchors.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.anchors.ncols(),
                found: x.ncols(),
            });
        }
        let m = self.anchors.nrows();
        let mut delta = Array2::zeros((x.nrows(), m));
        for (i, row) in x.outer_iter().enumerate() {
            for (j, a) in self.anchors.outer_iter().enumerate() {
                delta[[i, j]] = self.anchor_mean_sq[j] - squared_distance(row, a);
            }
        }
        Ok(delta.dot(&self.projector.t()) * 0.5)
    }
}

/// Classical MDS into `d` dimensions, exact for up to `max_anchors` rows.
pub fn mds_embed(x: ArrayView2<f64>, d: usize) -> Result<Embedding> {
    mds_embed_with(x, d, usize::MAX, 0)
}

pub fn mds_embed_with(x: ArrayView2<f64>, d: usize, max_anchors: usize, seed: u64) -> Result<Embedding> {
    let n = x.nrows();
    if d == 0 {
        return Err(Error::InvalidParameter("embedding dimension must be >= 1".into()));
    }
    if n < d || n == 0 {
        return Err(Error::TooFewSamples {
            needed: d.max(1),
            found: n,
        });
    }
    let anchor_rows: Option<Vec<usize>> = (n > max_anchors).then(|| {
        let mut rows = sample(&mut seed::rng(seed), n, max_anchors.max(d + 1)).into_vec();
        rows.sort_unstable();
        rows
    });
    let anchors = match &anchor_rows {
        Some(rows) => x.select(Axis(0), rows),
        None => x.to_owned(),
    };
    let m = anchors.nrows();
    let d2 = pairwise_sq_distances(anchors.view());
    let col_mean = d2.mean_axis(Axis(0)).expect("anchors exist");
    let total_mean = col_mean.mean().expect("anchors exist");
    // B = −½ J D² J.
    let b = Array2::from_shape_fn((m, m), |(i, j)| {
        -0.5 * (d2[[i, j]] - col_mean[i] - col_mean[j] + total_mean)
    });
    let (values, vectors) = symmetric_eigen(&b);
    let scale = values.first().copied().unwrap_or(0.0).abs().max(1e-300);
    let positive = values.iter().take_while(|&&v| v > EIGEN_EPS * scale).count();
    let kept = d.min(positive);
    if kept == 0 {
        return Err(Error::DegenerateInput("all rows coincide".into()));
    }
    let rank_deficient = kept < d;
    if rank_deficient {
        log::warn!("only {kept} positive eigenvalues; embedding in {kept} dimensions");
    }
    let eigenvalues = values[..kept].to_vec();
    let projector = Array2::from_shape_fn((kept, m), |(k, j)| vectors[[j, k]] / eigenvalues[k].sqrt());
    let coords_anchor = Array2::from_shape_fn((m, kept), |(j, k)| vectors[[j, k]] * eigenvalues[k].sqrt());
    let mut emb = Embedding {
        coords: Array2::zeros((0, kept)),
        eigenvalues,
        rank_deficient,
        truncated: positive > kept,
        anchors,
        anchor_mean_sq: col_mean,
        projector,
    };
    emb.coords = match anchor_rows {
        None => coords_anchor,
        Some(_) => emb.project(x)?,
    };
    Ok(emb)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FtcfConfig {
    pub dim: usize,
    /// Rows above which landmark MDS is used.
    pub max_anchors: usize,
    /// Z-score columns (fit on all rows) before embedding.
    pub standardize: bool,
    pub policy: PseudoLabelPolicy,
    pub seed: u64,
}

impl Default for FtcfConfig {
    fn default() -> Self {
        Self {
            dim: 10,
            max_anchors: 600,
            standardize: true,
            policy: PseudoLabelPolicy::default(),
            seed: 0,
        }
    }
}

/// Self-training on MDS coordinates.
#[derive(Debug)]
pub struct Ftcf {
    scaler: Option<Standardizer>,
    n_features: usize,
    pub embedding: Embedding,
    pub inner: SelfTrained,
}

impl Ftcf {
    pub fn teaching_mode(&self) -> TeachingMode {
        TeachingMode::SelfTeaching
    }
}

impl Classifier for Ftcf {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        crate::learners::check_width(self.n_features(), x.ncols())?;
        let z = match &self.scaler {
            Some(s) => self.embedding.project(s.transform(x).view())?,
            None => self.embedding.project(x)?,
        };
        self.inner.model.predict_proba(z.view())
    }
}

/// Embeds labeled, unlabeled and test features together, then self-trains `learner` in the embedded space.
pub fn ftcf_fit(
    learner: &dyn Learner,
    x_l: ArrayView2<f64>,
    y_l: &[Label],
    x_u: ArrayView2<f64>,
    x_test: ArrayView2<f64>,
    cfg: &FtcfConfig,
) -> Result<Ftcf> {
    crate::ssl::class_counts(y_l)?;
    crate::ssl::check_unlabeled(x_l, x_u)?;
    crate::ssl::check_unlabeled(x_l, x_test)?;
    let (l, u) = (x_l.nrows(), x_u.nrows());
    let mut all = crate::linalg::vstack(x_l, x_u)?;
    all = crate::linalg::vstack(all.view(), x_test)?;
    let scaler = cfg.standardize.then(|| Standardizer::fit(all.view()));
    let z = match &scaler {
        Some(s) => s.transform(all.view()),
        None => all,
    };
    let embedding = mds_embed_with(z.view(), cfg.dim.min(z.nrows()), cfg.max_anchors, cfg.seed)?;
    let coords = &embedding.coords;
    let inner = self_train(
        learner,
        coords.slice(ndarray::s![..l, ..]),
        y_l,
        coords.slice(ndarray::s![l..l + u, ..]),
        &cfg.policy,
    )?;
    Ok(Ftcf {
        scaler,
        n_features: x_l.ncols(),
        embedding,
        inner,
    })
}
