//! Diagonal Gaussian mixtures fitted by EM, BIC-based choice of K, and
//! cluster-then-label classification.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::learners::{Classifier, Label};
use crate::linalg::{squared_distance, Standardizer};
use crate::seed;
use crate::ssl::TeachingMode;

pub const VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GmmConfig {
    /// EM stops once the mean per-row log-likelihood gains less than this.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 500,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    pub weights: Vec<f64>,
    /// `K × d` component means.
    pub means: Array2<f64>,
    /// `K × d` diagonal variances, floored at [`VARIANCE_FLOOR`].
    pub variances: Array2<f64>,
    /// Total log-likelihood after each EM iteration.
    pub log_likelihood: Vec<f64>,
    /// Components re-seeded after emptying out.
    pub reseeded: Vec<usize>,
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

impl GmmModel {
    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    /// `n × K` matrix of `ln π_k + ln N(x | μ_k, Σ_k)`.
    pub fn log_joint(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let k = self.n_components();
        let d = self.means.ncols();
        let ln2pi = (2.0 * std::f64::consts::PI).ln();
        let consts: Vec<f64> = (0..k)
            .map(|c| {
                let log_det: f64 = self.variances.row(c).iter().map(|v| v.ln()).sum();
                self.weights[c].ln() - 0.5 * (d as f64 * ln2pi + log_det)
            })
            .collect();
        let mut out = Array2::zeros((x.nrows(), k));
        for (i, row) in x.outer_iter().enumerate() {
            for c in 0..k {
                let mut q = 0.0;
                for j in 0..d {
                    let diff = row[j] - self.means[[c, j]];
                    q += diff * diff / self.variances[[c, j]];
                }
                out[[i, c]] = consts[c] - 0.5 * q;
            }
        }
        out
    }

    /// Responsibilities (rows sum to one) and the total log-likelihood.
    pub fn e_step(&self, x: ArrayView2<f64>) -> (Array2<f64>, f64) {
        let mut r = self.log_joint(x);
        let mut total = 0.0;
        for mut row in r.outer_iter_mut() {
            let lse = log_sum_exp(row.as_slice().expect("standard layout"));
            total += lse;
            row.mapv_inplace(|v| (v - lse).exp());
        }
        (r, total)
    }

    pub fn responsibilities(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.e_step(x).0
    }

    pub fn n_parameters(&self) -> usize {
        let (k, d) = self.means.dim();
        2 * k * d + k - 1
    }

    /// `−2 ln L + p ln n`.
    pub fn bic(&self, x: ArrayView2<f64>) -> f64 {
        let ll = self.e_step(x).1;
        -2.0 * ll + self.n_parameters() as f64 * (x.nrows() as f64).ln()
    }
}

/// k-means++ seeding: the first mean uniformly, later ones with probability
/// proportional to the squared distance to the nearest chosen mean.
fn kmeanspp(x: ArrayView2<f64>, k: usize, rng: &mut seed::Rng) -> Vec<usize> {
    let n = x.nrows();
    let mut chosen = vec![rng.gen_range(0..n)];
    let mut nearest: Vec<f64> = (0..n).map(|i| squared_distance(x.row(i), x.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen_range(0.0..total);
            let mut pick = n - 1;
            for (i, &w) in nearest.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            // All remaining rows coincide with a chosen mean.
            rng.gen_range(0..n)
        };
        chosen.push(next);
        for i in 0..n {
            nearest[i] = nearest[i].min(squared_distance(x.row(i), x.row(next)));
        }
    }
    chosen
}

fn column_variances(x: ArrayView2<f64>) -> Array1<f64> {
    x.var_axis(Axis(0), 0.0).mapv(|v| v.max(VARIANCE_FLOOR))
}

/// Fits a `k`-component diagonal Gaussian mixture.
pub fn gmm_em(x: ArrayView2<f64>, k: usize, cfg: &GmmConfig) -> Result<GmmModel> {
    let (n, d) = x.dim();
    if k == 0 {
        return Err(Error::InvalidParameter("mixture needs at least one component".into()));
    }
    if n < k {
        return Err(Error::TooFewSamples { needed: k, found: n });
    }
    let mut rng = seed::rng(cfg.seed);
    let seeds = kmeanspp(x, k, &mut rng);
    let global_var = column_variances(x);
    let mut model = GmmModel {
        weights: vec![1.0 / k as f64; k],
        means: x.select(Axis(0), &seeds),
        variances: Array2::from_shape_fn((k, d), |(_, j)| global_var[j]),
        log_likelihood: Vec::new(),
        reseeded: Vec::new(),
    };
    let mut prev = f64::NEG_INFINITY;
    for _ in 0..cfg.max_iter {
        let (r, ll) = model.e_step(x);
        model.log_likelihood.push(ll);
        if (ll - prev) / (n as f64) < cfg.tol {
            break;
        }
        prev = ll;
        let mass = r.sum_axis(Axis(0));
        let mut reseeded_now = false;
        for c in 0..k {
            if mass[c] > 1e-10 {
                continue;
            }
            if model.reseeded.contains(&c) {
                return Err(Error::EmptyCluster(c));
            }
            // Restart the component at the worst-explained row.
            let joint = model.log_joint(x);
            let worst = (0..n)
                .min_by(|&a, &b| {
                    let la = log_sum_exp(joint.row(a).as_slice().unwrap());
                    let lb = log_sum_exp(joint.row(b).as_slice().unwrap());
                    la.total_cmp(&lb).then(a.cmp(&b))
                })
                .expect("rows exist");
            log::warn!("mixture component {c} emptied; reseeding at row {worst}");
            model.means.row_mut(c).assign(&x.row(worst));
            model.variances.row_mut(c).assign(&global_var);
            model.reseeded.push(c);
            reseeded_now = true;
        }
        if reseeded_now {
            model.weights = vec![1.0 / k as f64; k];
            prev = f64::NEG_INFINITY;
            continue;
        }
        let means = r.t().dot(&x) / mass.view().insert_axis(Axis(1));
        let mut vars: Array2<f64> = Array2::zeros((k, d));
        for (i, row) in x.outer_iter().enumerate() {
            for c in 0..k {
                let ric = r[[i, c]];
                for j in 0..d {
                    let diff = row[j] - means[[c, j]];
                    vars[[c, j]] += ric * diff * diff;
                }
            }
        }
        for c in 0..k {
            for j in 0..d {
                vars[[c, j]] = (vars[[c, j]] / mass[c]).max(VARIANCE_FLOOR);
            }
        }
        model.weights = mass.iter().map(|m| m / n as f64).collect();
        model.means = means;
        model.variances = vars;
    }
    Ok(model)
}

/// Hard cluster of each row.
fn assignments(r: &Array2<f64>) -> Vec<usize> {
    r.outer_iter()
        .map(|row| {
            (0..row.len())
                .max_by(|&a, &b| row[a].total_cmp(&row[b]).then(b.cmp(&a)))
                .expect("at least one component")
        })
        .collect()
}

/// Class of each cluster from its labeled members, plus the clusters that
/// had none and inherited from the nearest labeled cluster.
fn cluster_classes(model: &GmmModel, r: &Array2<f64>, labeled: &[(usize, Label)]) -> (Vec<Label>, Vec<usize>) {
    let k = model.n_components();
    let hard = assignments(r);
    let mut votes = vec![(0usize, 0usize); k];
    let mut best_member: Vec<Option<(f64, Label)>> = vec![None; k];
    for &(i, label) in labeled {
        let c = hard[i];
        if label == 1 {
            votes[c].1 += 1;
        } else {
            votes[c].0 += 1;
        }
        if best_member[c].is_none_or(|(resp, _)| r[[i, c]] > resp) {
            best_member[c] = Some((r[[i, c]], label));
        }
    }
    let mut classes: Vec<Option<Label>> = (0..k)
        .map(|c| match votes[c] {
            (0, 0) => None,
            (neg, pos) if pos > neg => Some(1),
            (neg, pos) if neg > pos => Some(0),
            _ => best_member[c].map(|(_, l)| l),
        })
        .collect();
    let labeled_clusters: Vec<usize> = (0..k).filter(|&c| classes[c].is_some()).collect();
    let mut inherited = Vec::new();
    for c in 0..k {
        if classes[c].is_some() {
            continue;
        }
        let nearest = labeled_clusters
            .iter()
            .copied()
            .min_by(|&a, &b| {
                let da = squared_distance(model.means.row(c), model.means.row(a));
                let db = squared_distance(model.means.row(c), model.means.row(b));
                da.total_cmp(&db).then(a.cmp(&b))
            })
            .expect("some cluster holds a labeled row");
        classes[c] = classes[nearest];
        inherited.push(c);
    }
    (classes.into_iter().map(|c| c.expect("assigned")).collect(), inherited)
}

/// Error of predicting each labeled row by its cluster's majority class.
pub fn labeled_error(model: &GmmModel, x: ArrayView2<f64>, labeled: &[(usize, Label)]) -> f64 {
    if labeled.is_empty() {
        return 0.0;
    }
    let r = model.responsibilities(x);
    let (classes, _) = cluster_classes(model, &r, labeled);
    let hard = assignments(&r);
    let wrong = labeled.iter().filter(|&&(i, l)| classes[hard[i]] != l).count();
    wrong as f64 / labeled.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct KSelection {
    pub k: usize,
    /// `(K, BIC, labeled error)` for every candidate.
    pub scores: Vec<(usize, f64, f64)>,
}

/// Picks K by BIC; candidates within 2 of the best BIC are compared by
/// labeled majority-vote error, then by smaller K.
pub fn select_k(x: ArrayView2<f64>, labeled: &[(usize, Label)], ks: &[usize], cfg: &GmmConfig) -> Result<KSelection> {
    if ks.is_empty() {
        return Err(Error::InvalidParameter("no candidate K".into()));
    }
    let mut scores = Vec::with_capacity(ks.len());
    for &k in ks {
        if k > x.nrows() {
            continue;
        }
        let model = gmm_em(x, k, cfg)?;
        scores.push((k, model.bic(x), labeled_error(&model, x, labeled)));
    }
    if scores.is_empty() {
        return Err(Error::TooFewSamples {
            needed: ks.iter().copied().min().unwrap_or(1),
            found: x.nrows(),
        });
    }
    let best_bic = scores.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let k = scores
        .iter()
        .filter(|s| s.1 - best_bic < 2.0)
        .min_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)))
        .expect("best candidate is in its own window")
        .0;
    Ok(KSelection { k, scores })
}

#[derive(Debug, Clone)]
pub struct ClusterThenLabel {
    scaler: Standardizer,
    pub gmm: GmmModel,
    pub cluster_class: Vec<Label>,
    /// Clusters without labeled members that took a neighbour's class.
    pub inherited: Vec<usize>,
    pub selection: Option<KSelection>,
}

impl ClusterThenLabel {
    pub fn teaching_mode(&self) -> TeachingMode {
        TeachingMode::NotApplicable
    }
}

impl Classifier for ClusterThenLabel {
    fn n_features(&self) -> usize {
        self.gmm.means.ncols()
    }

    /// Responsibility-weighted mix of the cluster classes.
    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        crate::learners::check_width(self.n_features(), x.ncols())?;
        let r = self.gmm.responsibilities(self.scaler.transform(x).view());
        let classes = Array1::from_iter(self.cluster_class.iter().map(|&c| f64::from(c)));
        Ok(crate::learners::proba_matrix(&r.dot(&classes).to_vec()))
    }
}

/// Clusters all rows of `x_all` (labeled, unlabeled and test features) and
/// maps clusters to the majority class of their labeled members.
///
/// `k = None` selects K from `ks` with [`select_k`].
pub fn cluster_then_label(
    x_all: ArrayView2<f64>,
    labeled: &[(usize, Label)],
    k: Option<usize>,
    ks: &[usize],
    cfg: &GmmConfig,
) -> Result<ClusterThenLabel> {
    if labeled.is_empty() {
        return Err(Error::NoLabeledRows);
    }
    if let Some(&(i, _)) = labeled.iter().find(|(i, _)| *i >= x_all.nrows()) {
        return Err(Error::DimensionMismatch {
            expected: x_all.nrows(),
            found: i + 1,
        });
    }
    let labels: Vec<Label> = labeled.iter().map(|p| p.1).collect();
    super::class_counts(&labels)?;
    let scaler = Standardizer::fit(x_all);
    let z = scaler.transform(x_all);
    let (k, selection) = match k {
        Some(k) => (k, None),
        None => {
            let s = select_k(z.view(), labeled, ks, cfg)?;
            (s.k, Some(s))
        }
    };
    let gmm = gmm_em(z.view(), k, cfg)?;
    let r = gmm.responsibilities(z.view());
    let (cluster_class, inherited) = cluster_classes(&gmm, &r, labeled);
    if !inherited.is_empty() {
        log::info!("{} clusters without labeled members inherited a class", inherited.len());
    }
    Ok(ClusterThenLabel {
        scaler,
        gmm,
        cluster_class,
        inherited,
        selection,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn gaussian(n: usize, d: usize, centre: f64, seed: u64) -> Array2<f64> {
        let mut rng = seed::rng(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        Array2::from_shape_fn((n, d), |_| centre + noise.sample(&mut rng))
    }

    fn two_blobs(n_each: usize, gap: f64, seed: u64) -> Array2<f64> {
        let a = gaussian(n_each, 2, 0.0, seed);
        let b = gaussian(n_each, 2, gap, seed + 1);
        crate::linalg::vstack(a.view(), b.view()).unwrap()
    }

    #[test]
    fn single_component_is_closed_form() {
        let x = gaussian(200, 3, 1.5, 1);
        let m = gmm_em(x.view(), 1, &GmmConfig::default()).unwrap();
        let mean = x.mean_axis(Axis(0)).unwrap();
        let var = x.var_axis(Axis(0), 0.0);
        for j in 0..3 {
            assert!((m.means[[0, j]] - mean[j]).abs() < 1e-10);
            assert!((m.variances[[0, j]] - var[j]).abs() < 1e-10);
        }
        assert_eq!(m.weights, vec![1.0]);
    }

    #[test]
    fn far_blobs_separate_and_likelihood_climbs() {
        let x = two_blobs(100, 20.0, 2);
        let m = gmm_em(x.view(), 2, &GmmConfig::default()).unwrap();
        let r = m.responsibilities(x.view());
        let own = if r[[0, 0]] > 0.5 { 0 } else { 1 };
        for i in 0..200 {
            let c = if i < 100 { own } else { 1 - own };
            assert!(r[[i, c]] >= 0.99);
            assert!((r.row(i).sum() - 1.0).abs() < 1e-12);
        }
        assert!((m.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for w in m.log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-9);
        }
    }

    #[test]
    fn likelihood_monotone_on_overlapping_data() {
        let x = two_blobs(150, 1.5, 3);
        for k in 2..5 {
            let m = gmm_em(
                x.view(),
                k,
                &GmmConfig {
                    seed: k as u64,
                    ..Default::default()
                },
            )
            .unwrap();
            for w in m.log_likelihood.windows(2) {
                assert!(w[1] >= w[0] - 1e-9, "K={k}");
            }
        }
    }

    /// Independent BIC oracle: K that minimizes `-2 LL + (2Kd + K - 1) ln n`
    /// recomputed from the fitted parameters by direct density evaluation.
    fn bic_oracle(x: &Array2<f64>, m: &GmmModel) -> f64 {
        let (n, d) = x.dim();
        let k = m.weights.len();
        let mut ll = 0.0;
        for row in x.outer_iter() {
            let mut dens = 0.0;
            for c in 0..k {
                let mut p = m.weights[c];
                for j in 0..d {
                    let v = m.variances[[c, j]];
                    let diff = row[j] - m.means[[c, j]];
                    p *= (-0.5 * diff * diff / v).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
                }
                dens += p;
            }
            ll += dens.ln();
        }
        -2.0 * ll + (2 * k * d + k - 1) as f64 * (n as f64).ln()
    }

    #[test]
    fn bic_picks_the_generating_k() {
        let cfg = GmmConfig::default();
        let one = gaussian(300, 2, 0.0, 4);
        let sel = select_k(one.view(), &[], &[1, 2, 3, 4], &cfg).unwrap();
        assert_eq!(sel.k, 1);
        let two = two_blobs(150, 8.0, 5);
        let sel = select_k(two.view(), &[], &[1, 2, 3, 4], &cfg).unwrap();
        assert_eq!(sel.k, 2);
        for &(k, bic, _) in &sel.scores {
            let m = gmm_em(two.view(), k, &cfg).unwrap();
            assert!((bic - bic_oracle(&two, &m)).abs() < 1e-6 * bic.abs());
        }
        assert_eq!(select_k(two.view(), &[], &[3], &cfg).unwrap().k, 3);
    }

    #[test]
    fn one_label_per_blob_classifies_perfectly() {
        let x = two_blobs(100, 10.0, 6);
        let labeled = [(0, 0), (150, 1)];
        let m = cluster_then_label(x.view(), &labeled, None, &[1, 2, 3], &GmmConfig::default()).unwrap();
        let pred = m.predict(x.view(), 0.5).unwrap();
        for (i, p) in pred.iter().enumerate() {
            assert_eq!(*p, u8::from(i >= 100));
        }
    }

    #[test]
    fn unlabeled_cluster_inherits_nearest_class() {
        // Three blobs on a line; only the outer two carry labels.
        let a = gaussian(60, 1, 0.0, 7);
        let b = gaussian(60, 1, 30.0, 8);
        let c = gaussian(60, 1, 40.0, 9);
        let x = crate::linalg::vstack(crate::linalg::vstack(a.view(), b.view()).unwrap().view(), c.view()).unwrap();
        let labeled = [(0, 0), (150, 1)];
        let m = cluster_then_label(x.view(), &labeled, Some(3), &[], &GmmConfig::default()).unwrap();
        assert_eq!(m.inherited.len(), 1);
        // The middle blob sits nearer the positive blob.
        assert_eq!(m.predict(x.slice(ndarray::s![60..120, ..]), 0.5).unwrap(), vec![1; 60]);
    }

    #[test]
    fn one_cluster_per_row_reproduces_training_labels() {
        let x = ndarray::array![[0.0, 0.0], [5.0, 1.0], [1.0, 7.0], [9.0, 9.0], [3.0, 4.0], [8.0, 2.0]];
        let y = [0, 1, 1, 0, 1, 0];
        let labeled: Vec<(usize, Label)> = y.iter().copied().enumerate().collect();
        let m = cluster_then_label(x.view(), &labeled, Some(6), &[], &GmmConfig::default()).unwrap();
        // 1-NN on its own training rows returns each row's label.
        assert_eq!(m.predict(x.view(), 0.5).unwrap(), y.to_vec());
    }

    #[test]
    fn errors() {
        let x = gaussian(3, 2, 0.0, 10);
        assert!(matches!(
            gmm_em(x.view(), 4, &GmmConfig::default()),
            Err(Error::TooFewSamples { .. })
        ));
        let err = cluster_then_label(x.view(), &[(0, 1), (1, 1)], Some(1), &[], &GmmConfig::default());
        assert_eq!(err.unwrap_err(), Error::SingleClass);
    }
}
