//! The catalog of runnable methods and how each one is fitted.

use std::fmt;

use ndarray::{s, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::learners::{fit, Classifier, ClassifierSpec, Label, LearnerKind};
use crate::linalg::{select_rows, vstack, Standardizer};
use crate::seed;
use crate::ssl::cluster::{cluster_then_label, GmmConfig};
use crate::ssl::co_forest::{co_forest, CoForestConfig};
use crate::ssl::graph::{build_graph, label_propagation, label_spreading, GraphKind, IterationConfig};
use crate::ssl::intrinsic::{laprls_fit, s3vm_fit, LapConfig, S3vmConfig};
use crate::ssl::mds::{ftcf_fit, FtcfConfig};
use crate::ssl::semi_boost::{semi_boost, SemiBoostConfig};
use crate::ssl::tri_training::{eatt, tri_train, TriTrainingConfig};
use crate::ssl::{co_train, self_train, PseudoLabelPolicy, TeachingMode, ViewMode};

/// Base-learner order used when naming pairs.
pub const PAIR_ORDER: [LearnerKind; 6] = [
    LearnerKind::Lr,
    LearnerKind::Rf,
    LearnerKind::Knn,
    LearnerKind::Gnb,
    LearnerKind::Dt,
    LearnerKind::Svm,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Supervised,
    Wrapper,
    Graph,
    Intrinsic,
    Preprocessing,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Supervised => "supervised",
            Family::Wrapper => "wrapper",
            Family::Graph => "graph",
            Family::Intrinsic => "intrinsic",
            Family::Preprocessing => "preproc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ViewTag {
    NotApplicable,
    Single,
    Multi,
}

impl ViewTag {
    pub fn as_str(self) -> &'static str {
        match self {
            ViewTag::NotApplicable => "n/a",
            ViewTag::Single => "single",
            ViewTag::Multi => "multi",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodKind {
    Supervised(LearnerKind),
    SelfTraining(LearnerKind),
    CoTraining {
        a: LearnerKind,
        b: LearnerKind,
        multi_view: bool,
    },
    TriTraining,
    Eatt,
    CoForest,
    SemiBoost,
    S3vm,
    LapRls,
    LabelPropagation,
    LabelSpreading,
    GmmClusterThenLabel,
    FtcfMds,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodDescriptor {
    pub id: String,
    pub kind: MethodKind,
    pub family: Family,
    pub teaching_mode: TeachingMode,
    pub view_mode: ViewTag,
}

impl MethodDescriptor {
    fn new(id: impl Into<String>, kind: MethodKind) -> Self {
        use MethodKind::*;
        let family = match kind {
            Supervised(_) => Family::Supervised,
            SelfTraining(_) | CoTraining { .. } | TriTraining | Eatt | CoForest | SemiBoost => Family::Wrapper,
            S3vm | LapRls => Family::Intrinsic,
            LabelPropagation | LabelSpreading => Family::Graph,
            GmmClusterThenLabel | FtcfMds => Family::Preprocessing,
        };
        let teaching_mode = match kind {
            Supervised(_) => TeachingMode::None,
            SelfTraining(_) | FtcfMds => TeachingMode::SelfTeaching,
            CoTraining { .. } | TriTraining | Eatt | CoForest => TeachingMode::Mutual,
            _ => TeachingMode::NotApplicable,
        };
        let view_mode = match kind {
            CoTraining { multi_view: true, .. } => ViewTag::Multi,
            CoTraining { .. } => ViewTag::Single,
            _ => ViewTag::NotApplicable,
        };
        Self {
            id: id.into(),
            kind,
            family,
            teaching_mode,
            view_mode,
        }
    }

    pub fn is_supervised(&self) -> bool {
        self.family == Family::Supervised
    }

    pub fn is_co_training(&self) -> bool {
        matches!(self.kind, MethodKind::CoTraining { .. })
    }
}

impl fmt::Display for MethodDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id)
    }
}

/// Every method: six supervised baselines and 52 semi-supervised ones.
///
/// Co-training pairs are unordered pairs of distinct base learners, named
/// in [`PAIR_ORDER`]. Multi-view co-training additionally pairs each
/// learner with itself, since the two copies see disjoint columns.
pub fn method_registry() -> Vec<MethodDescriptor> {
    use MethodKind::*;
    let mut out = Vec::new();
    for k in PAIR_ORDER {
        out.push(MethodDescriptor::new(k.name(), Supervised(k)));
    }
    for k in PAIR_ORDER {
        out.push(MethodDescriptor::new(format!("self_training_{k}"), SelfTraining(k)));
    }
    for multi_view in [false, true] {
        let tag = if multi_view { "mv" } else { "sv" };
        for (i, &a) in PAIR_ORDER.iter().enumerate() {
            let start = if multi_view { i } else { i + 1 };
            for &b in &PAIR_ORDER[start..] {
                out.push(MethodDescriptor::new(
                    format!("co_training_{tag}_{a}_{b}"),
                    CoTraining { a, b, multi_view },
                ));
            }
        }
    }
    for (id, kind) in [
        ("tri_training", TriTraining),
        ("EATT", Eatt),
        ("co_forest", CoForest),
        ("semi_boost", SemiBoost),
        ("s3vm", S3vm),
        ("laprls", LapRls),
        ("label_propagation", LabelPropagation),
        ("label_spreading", LabelSpreading),
        ("gmm_ctl", GmmClusterThenLabel),
        ("ftcf_mds", FtcfMds),
    ] {
        out.push(MethodDescriptor::new(id, kind));
    }
    out
}

pub fn find_method(id: &str) -> Result<MethodDescriptor> {
    method_registry()
        .into_iter()
        .find(|m| m.id == id)
        .ok_or_else(|| Error::UnknownMethod(id.to_string()))
}

/// Method settings shared by every cell of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSettings {
    pub policy: PseudoLabelPolicy,
    /// Base learner for tri-training and EATT (three copies, bootstrapped).
    pub tri_base: LearnerKind,
    pub semi_boost_base: LearnerKind,
    pub ftcf_base: LearnerKind,
    pub ftcf_dim: usize,
    /// Largest node count of the dense graph, kernel and similarity
    /// methods; unlabeled rows are subsampled to fit.
    pub dense_max_nodes: usize,
    pub spreading_alpha: f64,
    pub gmm_components: Vec<usize>,
}

impl Default for MethodSettings {
    fn default() -> Self {
        Self {
            policy: PseudoLabelPolicy::default(),
            tri_base: LearnerKind::Dt,
            semi_boost_base: LearnerKind::Dt,
            ftcf_base: LearnerKind::Rf,
            ftcf_dim: 10,
            dense_max_nodes: 2000,
            spreading_alpha: 0.2,
            gmm_components: (1..=8).collect(),
        }
    }
}

/// Training material of one cell. Only `y_l` carries labels.
#[derive(Debug, Clone)]
pub struct CellData {
    pub x_l: Array2<f64>,
    pub y_l: Vec<Label>,
    pub x_u: Array2<f64>,
    pub effort_u: Vec<f64>,
    pub x_test: Array2<f64>,
}

fn spec(kind: LearnerKind, seed: u64, role: &str) -> ClassifierSpec {
    ClassifierSpec::new(kind).with_seed(seed::derive(seed, &[role]))
}

/// A seeded sample of `cap` unlabeled rows (all of them when they fit).
fn cap_unlabeled(x_u: ArrayView2<f64>, cap: usize, seed: u64) -> Array2<f64> {
    if x_u.nrows() <= cap {
        return x_u.to_owned();
    }
    let mut rows = rand::seq::index::sample(&mut seed::rng(seed), x_u.nrows(), cap).into_vec();
    rows.sort_unstable();
    select_rows(x_u, &rows)
}

/// Graph methods: labels spread over labeled, (sampled) unlabeled and test
/// nodes. Test rows are processed in chunks so each graph stays within the
/// node cap.
fn graph_scores(desc: &MethodDescriptor, data: &CellData, settings: &MethodSettings, seed: u64) -> Result<Vec<f64>> {
    let l = data.x_l.nrows();
    let cap = settings.dense_max_nodes;
    if l + 1 > cap {
        return Err(Error::PoolTooLarge { found: l + 1, cap });
    }
    let chunk = data.x_test.nrows().clamp(1, (cap - l).div_ceil(2));
    let u = cap_unlabeled(
        data.x_u.view(),
        cap - l - chunk.min(data.x_test.nrows()),
        seed::derive(seed, &["graph-u"]),
    );
    let base = vstack(data.x_l.view(), u.view())?;
    let mut out = Vec::with_capacity(data.x_test.nrows());
    let mut start = 0;
    while start < data.x_test.nrows() {
        let end = (start + chunk).min(data.x_test.nrows());
        let nodes = vstack(base.view(), data.x_test.slice(s![start..end, ..]))?;
        let z = Standardizer::fit(nodes.view()).transform(nodes.view());
        let g = build_graph(z.view(), GraphKind::default())?;
        let mut y: Vec<Option<Label>> = vec![None; nodes.nrows()];
        for (slot, &label) in y.iter_mut().zip(&data.y_l) {
            *slot = Some(label);
        }
        let it = IterationConfig::default();
        let prop = match desc.kind {
            MethodKind::LabelPropagation => label_propagation(&g, &y, &it)?,
            _ => label_spreading(&g, &y, settings.spreading_alpha, &it)?,
        };
        out.extend_from_slice(&prop.positive()[base.nrows()..]);
        start = end;
    }
    Ok(out)
}

/// Fits `desc` on one cell and returns positive-class probabilities for the
/// test rows.
pub fn fit_predict(desc: &MethodDescriptor, data: &CellData, settings: &MethodSettings, seed: u64) -> Result<Vec<f64>> {
    use MethodKind::*;
    let (x_l, y_l, x_u, x_test) = (
        data.x_l.view(),
        data.y_l.as_slice(),
        data.x_u.view(),
        data.x_test.view(),
    );
    let model: Box<dyn Classifier> = match desc.kind {
        Supervised(k) => Box::new(fit(&spec(k, seed, "base"), x_l, y_l, None)?),
        SelfTraining(k) => self_train(&spec(k, seed, "base"), x_l, y_l, x_u, &settings.policy)?.model,
        CoTraining { a, b, multi_view } => {
            let mode = if multi_view {
                ViewMode::MultiView
            } else {
                ViewMode::SingleView
            };
            let (sa, sb) = (spec(a, seed, "a"), spec(b, seed, "b"));
            Box::new(co_train(&sa, &sb, x_l, y_l, x_u, &mode, &settings.policy)?)
        }
        TriTraining | Eatt => {
            let specs = ["t0", "t1", "t2"].map(|r| spec(settings.tri_base, seed, r));
            let learners = [&specs[0] as _, &specs[1] as _, &specs[2] as _];
            let cfg = TriTrainingConfig {
                seed: seed::derive(seed, &["tri"]),
                ..Default::default()
            };
            if desc.kind == Eatt {
                Box::new(eatt(learners, x_l, y_l, x_u, &data.effort_u, &cfg)?)
            } else {
                Box::new(tri_train(learners, x_l, y_l, x_u, &cfg)?)
            }
        }
        CoForest => {
            let cfg = CoForestConfig {
                seed: seed::derive(seed, &["co-forest"]),
                ..Default::default()
            };
            Box::new(co_forest(x_l, y_l, x_u, &cfg)?)
        }
        SemiBoost => {
            let cap = settings.dense_max_nodes.saturating_sub(x_l.nrows());
            let u = cap_unlabeled(x_u, cap, seed::derive(seed, &["semi-boost-u"]));
            let base = spec(settings.semi_boost_base, seed, "base");
            Box::new(semi_boost(&base, x_l, y_l, u.view(), &SemiBoostConfig::default())?)
        }
        S3vm => {
            let cfg = S3vmConfig {
                seed: seed::derive(seed, &["s3vm"]),
                ..Default::default()
            };
            Box::new(s3vm_fit(x_l, y_l, x_u, &cfg)?)
        }
        LapRls => {
            let cfg = LapConfig {
                max_points: settings.dense_max_nodes,
                ..Default::default()
            };
            let u = cap_unlabeled(
                x_u,
                cfg.max_points.saturating_sub(x_l.nrows()),
                seed::derive(seed, &["laprls-u"]),
            );
            Box::new(laprls_fit(x_l, y_l, u.view(), &cfg)?)
        }
        LabelPropagation | LabelSpreading => return graph_scores(desc, data, settings, seed),
        GmmClusterThenLabel => {
            let all = vstack(vstack(x_l, x_u)?.view(), x_test)?;
            let labeled: Vec<(usize, Label)> = y_l.iter().copied().enumerate().collect();
            let cfg = GmmConfig {
                seed: seed::derive(seed, &["gmm"]),
                ..Default::default()
            };
            let m = cluster_then_label(all.view(), &labeled, None, &settings.gmm_components, &cfg)?;
            let offset = x_l.nrows() + x_u.nrows();
            return m.positive_proba(all.slice(s![offset.., ..]));
        }
        FtcfMds => {
            let cfg = FtcfConfig {
                dim: settings.ftcf_dim,
                policy: settings.policy.clone(),
                seed: seed::derive(seed, &["mds"]),
                ..Default::default()
            };
            let base = spec(settings.ftcf_base, seed, "base");
            Box::new(ftcf_fit(&base, x_l, y_l, x_u, x_test, &cfg)?)
        }
    };
    model.positive_proba(x_test)
}
