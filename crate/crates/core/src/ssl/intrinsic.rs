//! Intrinsically semi-supervised classifiers: a transductive linear SVM
//! (S3VM) and Laplacian-regularized least squares.

use ndarray::{s, Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::learners::svm::{augment, hinge_objective, signed, train_hinge, LinearSvm, SvmParams};
use crate::learners::{Classifier, Label};
use crate::linalg::{median_pairwise_distance, pairwise_sq_distances, sigmoid, solve, squared_distance, Standardizer};
use crate::ssl::{check_unlabeled, class_counts, TeachingMode};

#[derive(Debug, Clone, PartialEq)]
pub struct S3vmConfig {
    pub c_labeled: f64,
    pub c_unlabeled_max: f64,
    /// First unlabeled cost; doubled each stage up to the maximum.
    pub c_unlabeled_start: f64,
    pub epochs_per_stage: usize,
    /// Retrain/swap passes allowed per stage.
    pub max_passes: usize,
    /// Supervised warm start; also the model returned without unlabeled data.
    pub svm: SvmParams,
    pub seed: u64,
    /// Recompute the full objective after every swap for the trace instead
    /// of updating it incrementally (O(n·d) per swap; for diagnostics).
    pub exact_trace: bool,
}

impl Default for S3vmConfig {
    fn default() -> Self {
        Self {
            c_labeled: 1.0,
            c_unlabeled_max: 0.5,
            c_unlabeled_start: 1e-4,
            epochs_per_stage: 100,
            max_passes: 5,
            svm: SvmParams::default(),
            seed: 0,
            exact_trace: false,
        }
    }
}

impl S3vmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_labeled > 0.0) || self.c_unlabeled_max < 0.0 || !(self.c_unlabeled_start > 0.0) {
            return Err(Error::InvalidParameter("S3VM costs must be positive".into()));
        }
        if self.epochs_per_stage == 0 || self.max_passes == 0 {
            return Err(Error::InvalidParameter("S3VM needs epochs and passes >= 1".into()));
        }
        self.svm.validate()
    }

    /// Unlabeled costs of the annealing stages.
    pub fn schedule(&self) -> Vec<f64> {
        let mut stages = Vec::new();
        if self.c_unlabeled_max <= 0.0 {
            return stages;
        }
        let mut c = self.c_unlabeled_start.min(self.c_unlabeled_max);
        loop {
            stages.push(c);
            if c >= self.c_unlabeled_max {
                return stages;
            }
            c = (2.0 * c).min(self.c_unlabeled_max);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum S3vmEvent {
    StageStart,
    Retrain,
    Swap,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct S3vmStep {
    pub stage: usize,
    pub event: S3vmEvent,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct S3vm {
    pub svm: LinearSvm,
    /// Labels finally assigned to the unlabeled rows.
    pub unlabeled_labels: Vec<Label>,
    /// Objective after initialization, each retrain and each accepted swap.
    pub trace: Vec<S3vmStep>,
    pub swaps: usize,
}

impl S3vm {
    pub fn teaching_mode(&self) -> TeachingMode {
        TeachingMode::NotApplicable
    }
}

impl Classifier for S3vm {
    fn n_features(&self) -> usize {
        self.svm.weights().len() - 1
    }

    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        crate::learners::check_width(self.n_features(), x.ncols())?;
        Ok(crate::learners::proba_matrix(&self.svm.positive_proba(x)))
    }
}

/// Tentative unlabeled labels: the `round(share · |U|)` highest scores are
/// positive.
pub fn rank_labels(scores: &[f64], share: f64) -> Vec<f64> {
    let n_pos = (share * scores.len() as f64).round() as usize;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut y = vec![-1.0; scores.len()];
    for &i in &order[..n_pos] {
        y[i] = 1.0;
    }
    y
}

/// Transductive SVM by annealed label switching.
///
/// The objective is `λ/2 |w|² + (1/|L|) Σ_L C_l hinge + (1/|U|) Σ_U C* hinge`.
/// Each stage retrains (keeping the new weights only if they lower the
/// objective) and then swaps the most objective-reducing pairs of opposite
/// unlabeled labels.
pub fn s3vm_fit(x_l: ArrayView2<f64>, y_l: &[Label], x_u: ArrayView2<f64>, cfg: &S3vmConfig) -> Result<S3vm> {
    cfg.validate()?;
    let (neg, pos) = class_counts(y_l)?;
    check_unlabeled(x_l, x_u)?;
    let scaler = Standardizer::fit(x_l);
    let xa_l = augment(scaler.transform(x_l).view());
    let yl = signed(y_l);
    let sup = train_hinge(
        xa_l.view(),
        &yl,
        &vec![1.0; yl.len()],
        cfg.svm.l2,
        cfg.svm.epochs,
        cfg.seed,
        None,
    );
    let stages = cfg.schedule();
    let (l, u) = (x_l.nrows(), x_u.nrows());
    if u == 0 || stages.is_empty() {
        let svm = LinearSvm::from_state(scaler, sup, x_l, y_l, cfg.svm.platt_iterations);
        return Ok(S3vm {
            svm,
            unlabeled_labels: Vec::new(),
            trace: Vec::new(),
            swaps: 0,
        });
    }

    let xa_u = augment(scaler.transform(x_u).view());
    let x_all = crate::linalg::vstack(xa_l.view(), xa_u.view())?;
    let share = pos as f64 / (pos + neg) as f64;
    let scores: Vec<f64> = xa_u.dot(&sup.weights).to_vec();
    let mut y_all = yl.clone();
    y_all.extend(rank_labels(&scores, share));
    let n = (l + u) as f64;
    let mut costs = vec![cfg.c_labeled * n / l as f64; l];
    costs.extend(std::iter::repeat_n(0.0, u));

    let mut state = sup;
    let mut trace = Vec::new();
    let mut swaps = 0;
    for (stage, &c_star) in stages.iter().enumerate() {
        for c in &mut costs[l..] {
            *c = c_star * n / u as f64;
        }
        let objective = |w: &Array1<f64>, y: &[f64]| hinge_objective(w.view(), x_all.view(), y, &costs, cfg.svm.l2);
        let step = |event, objective| S3vmStep {
            stage,
            event,
            objective,
        };
        trace.push(step(S3vmEvent::StageStart, objective(&state.weights, &y_all)));
        for _ in 0..cfg.max_passes {
            let seed = crate::seed::derive(cfg.seed, &["s3vm", &stage.to_string(), &trace.len().to_string()]);
            state = train_hinge(
                x_all.view(),
                &y_all,
                &costs,
                cfg.svm.l2,
                cfg.epochs_per_stage,
                seed,
                Some(state),
            );
            trace.push(step(S3vmEvent::Retrain, state.objective));
            let f = xa_u.dot(&state.weights);
            // Hinge reduction from flipping each unlabeled label.
            let gain: Vec<f64> = (0..u)
                .map(|i| {
                    let t = y_all[l + i];
                    (1.0 - t * f[i]).max(0.0) - (1.0 + t * f[i]).max(0.0)
                })
                .collect();
            let mut positives: Vec<usize> = (0..u).filter(|&i| y_all[l + i] > 0.0).collect();
            let mut negatives: Vec<usize> = (0..u).filter(|&i| y_all[l + i] < 0.0).collect();
            let by_gain = |a: &usize, b: &usize| gain[*b].total_cmp(&gain[*a]).then(a.cmp(b));
            positives.sort_by(by_gain);
            negatives.sort_by(by_gain);
            let mut current = state.objective;
            let mut swapped = 0;
            for (&i, &j) in positives.iter().zip(&negatives) {
                let reduction = gain[i] + gain[j];
                if reduction <= 1e-12 {
                    break;
                }
                y_all[l + i] = -1.0;
                y_all[l + j] = 1.0;
                // Each unlabeled hinge enters the objective with weight C*/|U|.
                let after = current - c_star / u as f64 * reduction;
                if cfg!(debug_assertions) && u <= 500 {
                    let exact = objective(&state.weights, &y_all);
                    debug_assert!((exact - after).abs() <= 1e-9 * exact.abs().max(1.0));
                }
                assert!(after < current);
                let recorded = if cfg.exact_trace {
                    objective(&state.weights, &y_all)
                } else {
                    after
                };
                trace.push(step(S3vmEvent::Swap, recorded));
                current = after;
                swapped += 1;
            }
            swaps += swapped;
            if swapped == 0 {
                break;
            }
        }
    }
    let unlabeled_labels = y_all[l..].iter().map(|&t| u8::from(t > 0.0)).collect();
    let svm = LinearSvm::from_state(scaler, state, x_l, y_l, cfg.svm.platt_iterations);
    Ok(S3vm {
        svm,
        unlabeled_labels,
        trace,
        swaps,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LapConfig {
    /// RBF bandwidth; `None` uses the median pairwise distance.
    pub sigma: Option<f64>,
    pub lambda_ambient: f64,
    pub lambda_manifold: f64,
    /// Neighbours in the heat-weighted kNN graph.
    pub k: usize,
    /// Largest `|L| + |U|` accepted for the dense solve.
    pub max_points: usize,
    /// Slope of the logistic squashing of the kernel expansion.
    pub probability_scale: f64,
}

impl Default for LapConfig {
    fn default() -> Self {
        Self {
            sigma: None,
            lambda_ambient: 1e-2,
            lambda_manifold: 1e-2,
            k: 7,
            max_points: 2000,
            probability_scale: 2.0,
        }
    }
}

/// Kernel expansion `f(x) = Σ α_i k(x, x_i)` over standardized anchors.
#[derive(Debug, Clone)]
pub struct LapRls {
    scaler: Standardizer,
    anchors: Array2<f64>,
    pub alpha: Array1<f64>,
    pub sigma: f64,
    pub probability_scale: f64,
}

impl LapRls {
    pub fn teaching_mode(&self) -> TeachingMode {
        TeachingMode::NotApplicable
    }

    pub fn decision_function(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        crate::learners::check_width(self.anchors.ncols(), x.ncols())?;
        let z = self.scaler.transform(x);
        let s2 = 2.0 * self.sigma * self.sigma;
        Ok(z.outer_iter()
            .map(|row| {
                self.anchors
                    .outer_iter()
                    .zip(&self.alpha)
                    .map(|(a, &w)| w * (-squared_distance(row, a) / s2).exp())
                    .sum()
            })
            .collect())
    }
}

impl Classifier for LapRls {
    fn n_features(&self) -> usize {
        self.anchors.ncols()
    }

    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let f = self.decision_function(x)?;
        let p: Vec<f64> = f.iter().map(|&v| sigmoid(self.probability_scale * v)).collect();
        Ok(crate::learners::proba_matrix(&p))
    }
}

/// Gram matrix `exp(-|a-b|² / 2σ²)`.
pub fn rbf_kernel(z: ArrayView2<f64>, sigma: f64) -> Array2<f64> {
    let s2 = 2.0 * sigma * sigma;
    pairwise_sq_distances(z).mapv(|d| (-d / s2).exp())
}

/// Unnormalized Laplacian `D − W` of the symmetrized kNN graph with heat
/// weights taken from `kernel`.
pub fn knn_laplacian(z: ArrayView2<f64>, kernel: &Array2<f64>, k: usize) -> Array2<f64> {
    let n = z.nrows();
    let d2 = pairwise_sq_distances(z);
    let mut w = Array2::zeros((n, n));
    let k = k.min(n.saturating_sub(1));
    let mut order = Vec::with_capacity(n);
    for i in 0..n {
        order.clear();
        order.extend((0..n).filter(|&j| j != i));
        order.sort_by(|&a, &b| d2[[i, a]].total_cmp(&d2[[i, b]]).then(a.cmp(&b)));
        for &j in &order[..k] {
            w[[i, j]] = kernel[[i, j]];
            w[[j, i]] = kernel[[i, j]];
        }
    }
    let mut lap = -w;
    for i in 0..n {
        let deg: f64 = -lap.row(i).sum();
        lap[[i, i]] = deg;
    }
    lap
}

/// The Laplacian RLS system `A α = b` over standardized points whose first
/// `y.len()` rows are labeled (`y` in ±1).
pub fn laprls_system(
    kernel: &Array2<f64>,
    laplacian: &Array2<f64>,
    y: &[f64],
    cfg: &LapConfig,
) -> (Array2<f64>, Array1<f64>) {
    let n = kernel.nrows();
    let l = y.len();
    let mut a = Array2::zeros((n, n));
    a.slice_mut(s![..l, ..]).assign(&kernel.slice(s![..l, ..]));
    let ridge = cfg.lambda_ambient * l as f64;
    for i in 0..n {
        a[[i, i]] += ridge;
    }
    if cfg.lambda_manifold > 0.0 {
        let scale = cfg.lambda_manifold * l as f64 / (n as f64 * n as f64);
        a.scaled_add(scale, &laplacian.dot(kernel));
    }
    let mut b = Array1::zeros(n);
    b.slice_mut(s![..l]).assign(&Array1::from_vec(y.to_vec()));
    (a, b)
}

pub fn laprls_fit(x_l: ArrayView2<f64>, y_l: &[Label], x_u: ArrayView2<f64>, cfg: &LapConfig) -> Result<LapRls> {
    class_counts(y_l)?;
    check_unlabeled(x_l, x_u)?;
    if cfg.lambda_ambient < 0.0 || cfg.lambda_manifold < 0.0 || cfg.k == 0 {
        return Err(Error::InvalidParameter(
            "LapRLS needs nonnegative lambdas and k >= 1".into(),
        ));
    }
    let n = x_l.nrows() + x_u.nrows();
    if n > cfg.max_points {
        return Err(Error::PoolTooLarge {
            found: n,
            cap: cfg.max_points,
        });
    }
    let all = crate::linalg::vstack(x_l, x_u)?;
    let scaler = Standardizer::fit(all.view());
    let z = scaler.transform(all.view());
    let sigma = match cfg.sigma {
        Some(s) if s > 0.0 => s,
        Some(_) => return Err(Error::InvalidParameter("kernel bandwidth must be positive".into())),
        None => {
            let m = median_pairwise_distance(z.view());
            if m > 0.0 {
                m
            } else {
                1.0
            }
        }
    };
    let kernel = rbf_kernel(z.view(), sigma);
    let laplacian = if cfg.lambda_manifold > 0.0 {
        knn_laplacian(z.view(), &kernel, cfg.k)
    } else {
        Array2::zeros((n, n))
    };
    let (a, b) = laprls_system(&kernel, &laplacian, &signed(y_l), cfg);
    let alpha = solve(&a, &b)?;
    Ok(LapRls {
        scaler,
        anchors: z,
        alpha,
        sigma,
        probability_scale: cfg.probability_scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{accuracy, fit, ClassifierSpec, LearnerKind};
    use crate::seed;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn two_blobs(n: usize, seed: u64) -> (Array2<f64>, Vec<Label>) {
        let mut rng = seed::rng(seed);
        let noise = Normal::new(0.0, 0.5).unwrap();
        let y: Vec<Label> = (0..n).map(|i| (i % 2) as u8).collect();
        let x = Array2::from_shape_fn((n, 2), |(i, j)| {
            let centre = if j == 0 { 4.0 * f64::from(y[i]) - 2.0 } else { 0.0 };
            centre + noise.sample(&mut rng)
        });
        (x, y)
    }

    #[test]
    fn zero_unlabeled_cost_reproduces_supervised_svm() {
        let (x, y) = two_blobs(20, 1);
        let (u, _) = two_blobs(50, 2);
        let cfg = S3vmConfig {
            c_unlabeled_max: 0.0,
            seed: 3,
            ..Default::default()
        };
        let m = s3vm_fit(x.view(), &y, u.view(), &cfg).unwrap();
        let spec = ClassifierSpec::new(LearnerKind::Svm).with_seed(3);
        let sup = fit(&spec, x.view(), &y, None).unwrap();
        assert_eq!(m.svm.weights(), sup.as_svm().unwrap().weights());
        let empty = s3vm_fit(
            x.view(),
            &y,
            Array2::zeros((0, 2)).view(),
            &S3vmConfig {
                seed: 3,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(empty.svm.weights(), sup.as_svm().unwrap().weights());
    }

    #[test]
    fn annealing_schedule_is_bounded_and_increasing() {
        let s = S3vmConfig::default().schedule();
        assert_eq!(s[0], 1e-4);
        assert_eq!(*s.last().unwrap(), 0.5);
        assert!(s.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn balance_holds_and_objective_falls_within_stages() {
        let (x, y) = two_blobs(10, 4);
        let (u, _) = two_blobs(101, 5);
        let m = s3vm_fit(x.view(), &y, u.view(), &S3vmConfig::default()).unwrap();
        let pos = m.unlabeled_labels.iter().filter(|&&l| l == 1).count() as f64 / 101.0;
        assert!((pos - 0.5).abs() <= 1.0 / 101.0);
        for w in m.trace.windows(2) {
            if w[0].stage == w[1].stage {
                assert!(w[1].objective <= w[0].objective + 1e-9, "{:?}", w);
            }
        }
    }

    #[test]
    fn rank_labels_matches_share() {
        assert_eq!(rank_labels(&[0.3, -1.0, 2.0, 0.1], 0.5), vec![1.0, -1.0, 1.0, -1.0]);
    }

    #[test]
    fn one_label_per_blob_is_enough() {
        let (u, _) = two_blobs(100, 6);
        let (t, ty) = two_blobs(200, 7);
        // The two labeled points sit off-centre, so the supervised boundary
        // is tilted.
        let x = ndarray::array![[-2.0, 1.5], [2.0, -1.5]];
        let y = [0, 1];
        let m = s3vm_fit(x.view(), &y, u.view(), &S3vmConfig::default()).unwrap();
        let acc = accuracy(&m.predict(t.view(), 0.5).unwrap(), &ty);
        assert!(acc >= 0.95, "accuracy {acc}");
    }

    #[test]
    fn laprls_without_manifold_is_kernel_ridge() {
        let (x, y) = two_blobs(12, 8);
        let (u, _) = two_blobs(30, 9);
        let cfg = LapConfig {
            lambda_manifold: 0.0,
            ..Default::default()
        };
        let m = laprls_fit(x.view(), &y, u.view(), &cfg).unwrap();
        // Oracle: kernel ridge on the labeled rows alone, in the same
        // standardized space and bandwidth.
        let all = crate::linalg::vstack(x.view(), u.view()).unwrap();
        let z = Standardizer::fit(all.view()).transform(all.view());
        let zl = z.slice(s![..12, ..]);
        let k = rbf_kernel(zl, m.sigma) + Array2::<f64>::eye(12) * (cfg.lambda_ambient * 12.0);
        let ridge = solve(&k, &Array1::from_vec(signed(&y))).unwrap();
        for i in 0..12 {
            assert!((m.alpha[i] - ridge[i]).abs() < 1e-6);
        }
        assert!(m.alpha.iter().skip(12).all(|a| a.abs() < 1e-6));
        let empty = laprls_fit(x.view(), &y, Array2::zeros((0, 2)).view(), &cfg).unwrap();
        let k = rbf_kernel(Standardizer::fit(x.view()).transform(x.view()).view(), empty.sigma)
            + Array2::<f64>::eye(12) * (cfg.lambda_ambient * 12.0);
        let ridge = solve(&k, &Array1::from_vec(signed(&y))).unwrap();
        for i in 0..12 {
            assert!((empty.alpha[i] - ridge[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn laprls_system_residual_is_small() {
        let (x, y) = two_blobs(10, 10);
        let (u, _) = two_blobs(40, 11);
        let cfg = LapConfig::default();
        let m = laprls_fit(x.view(), &y, u.view(), &cfg).unwrap();
        let all = crate::linalg::vstack(x.view(), u.view()).unwrap();
        let z = Standardizer::fit(all.view()).transform(all.view());
        let k = rbf_kernel(z.view(), m.sigma);
        let lap = knn_laplacian(z.view(), &k, cfg.k);
        let (a, b) = laprls_system(&k, &lap, &signed(&y), &cfg);
        let r = a.dot(&m.alpha) - &b;
        let rel = r.dot(&r).sqrt() / b.dot(&b).sqrt();
        assert!(rel <= 1e-6, "relative residual {rel}");
    }

    #[test]
    fn laprls_rejects_oversized_pools() {
        let (x, y) = two_blobs(10, 12);
        let cfg = LapConfig {
            max_points: 15,
            ..Default::default()
        };
        let err = laprls_fit(x.view(), &y, x.view(), &cfg).unwrap_err();
        assert_eq!(err, Error::PoolTooLarge { found: 20, cap: 15 });
    }

    /// Two interleaved half circles.
    pub(crate) fn moons(n: usize, noise: f64, seed: u64) -> (Array2<f64>, Vec<Label>) {
        let mut rng = seed::rng(seed);
        let mut x = Array2::zeros((n, 2));
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let t = rng.gen_range(0.0..std::f64::consts::PI);
            let label = (i % 2) as u8;
            let (a, b) = if label == 0 {
                (t.cos(), t.sin())
            } else {
                (1.0 - t.cos(), 0.5 - t.sin())
            };
            x[[i, 0]] = a + noise * rng.gen_range(-1.0..1.0);
            x[[i, 1]] = b + noise * rng.gen_range(-1.0..1.0);
            y.push(label);
        }
        (x, y)
    }

    #[test]
    fn manifold_term_follows_the_moons() {
        let (u, _) = moons(200, 0.05, 13);
        let (t, ty) = moons(400, 0.05, 14);
        // One label at the tip of each moon.
        let x = ndarray::array![[-1.0, 0.0], [2.0, 0.5]];
        let y = [0, 1];
        let with = LapConfig {
            lambda_ambient: 1e-6,
            lambda_manifold: 1.0,
            sigma: Some(0.3),
            ..Default::default()
        };
        let without = LapConfig {
            lambda_manifold: 0.0,
            ..with.clone()
        };
        let acc = |cfg: &LapConfig| {
            let m = laprls_fit(x.view(), &y, u.view(), cfg).unwrap();
            accuracy(&m.predict(t.view(), 0.5).unwrap(), &ty)
        };
        let (a_with, a_without) = (acc(&with), acc(&without));
        assert!(a_with >= 0.9, "manifold accuracy {a_with}");
        assert!(a_without <= 0.8, "ridge accuracy {a_without}");
    }
}
