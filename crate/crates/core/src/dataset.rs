//! Process-metric datasets: loading, splitting, label budgets and a
//! synthetic generator.

use std::collections::BTreeSet;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::learners::Label;
use crate::linalg::select_rows;
use crate::seed;

/// The 21 process metrics, in canonical column order.
pub const METRIC_COLUMNS: [&str; 21] = [
    "la",
    "ld",
    "lt",
    "age",
    "ddev",
    "nuc",
    "own",
    "minor",
    "ndev",
    "ncomm",
    "adev",
    "nadev",
    "avg_nddev",
    "avg_nadev",
    "avg_ncomm",
    "ns",
    "exp",
    "sexp",
    "rexp",
    "nd",
    "sctr",
];

/// Column holding the effort proxy (lines of code before the change).
pub const EFFORT_COLUMN: usize = 2;

pub const LABEL_COLUMN: &str = "buggy";
pub const RELEASE_COLUMN: &str = "release";
pub const ROW_ID_COLUMN: &str = "row_id";

/// Lower bound of a metric's valid range, `None` when unbounded.
pub fn lower_bound(column: &str) -> Option<f64> {
    match column {
        "sctr" => None,
        "ddev" | "adev" | "ns" | "nd" => Some(1.0),
        c if METRIC_COLUMNS.contains(&c) => Some(0.0),
        _ => None,
    }
}

/// A table of per-change process metrics.
///
/// Rows are kept stably sorted by release so that release order and row
/// order agree.
#[derive(Debug, Clone, PartialEq)]
pub struct DefectDataset {
    pub project_id: String,
    pub columns: Vec<String>,
    pub features: Array2<f64>,
    /// `None` marks a row whose label is unknown; such rows only ever join
    /// the unlabeled pool.
    pub labels: Vec<Option<Label>>,
    pub effort: Vec<f64>,
    pub release: Vec<i64>,
    pub row_ids: Option<Vec<String>>,
}

impl DefectDataset {
    /// Builds a dataset with the canonical schema, validating ranges and
    /// sorting rows by release.
    pub fn new(
        project_id: impl Into<String>,
        features: Array2<f64>,
        labels: Vec<Option<Label>>,
        release: Vec<i64>,
    ) -> Result<Self> {
        let columns = METRIC_COLUMNS.iter().map(|c| c.to_string()).collect();
        Self::with_columns(project_id, columns, features, labels, release, None)
    }

    fn with_columns(
        project_id: impl Into<String>,
        columns: Vec<String>,
        features: Array2<f64>,
        labels: Vec<Option<Label>>,
        release: Vec<i64>,
        row_ids: Option<Vec<String>>,
    ) -> Result<Self> {
        let n = features.nrows();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if columns.len() != features.ncols() {
            return Err(Error::DimensionMismatch {
                expected: columns.len(),
                found: features.ncols(),
            });
        }
        for (len, what) in [(labels.len(), n), (release.len(), n)] {
            if len != what {
                return Err(Error::LengthMismatch { left: len, right: what });
            }
        }
        for (r, row) in features.outer_iter().enumerate() {
            for (c, name) in columns.iter().enumerate() {
                let v = row[c];
                let below = lower_bound(name).is_some_and(|lb| v < lb);
                if !v.is_finite() || below {
                    return Err(Error::RangeViolation {
                        row: r,
                        column: name.clone(),
                        value: v,
                    });
                }
            }
        }
        let effort_col = columns.iter().position(|c| c == "lt");
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| release[i]);
        let features = select_rows(features.view(), &order);
        let effort = match effort_col {
            Some(c) => features.column(c).to_vec(),
            None => vec![1.0; n],
        };
        Ok(Self {
            project_id: project_id.into(),
            columns,
            features,
            labels: order.iter().map(|&i| labels[i]).collect(),
            effort,
            release: order.iter().map(|&i| release[i]).collect(),
            row_ids: row_ids.map(|ids| order.iter().map(|&i| ids[i].clone()).collect()),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    /// Rows whose label is known.
    pub fn labeled_rows(&self) -> Vec<usize> {
        (0..self.n_rows()).filter(|&i| self.labels[i].is_some()).collect()
    }

    pub fn defect_count(&self) -> usize {
        self.labels.iter().filter(|l| **l == Some(1)).count()
    }

    /// Writes the dataset as CSV with the canonical header.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = self.columns.clone();
        header.push(LABEL_COLUMN.into());
        header.push(RELEASE_COLUMN.into());
        w.write_record(&header)?;
        for (i, row) in self.features.outer_iter().enumerate() {
            let mut rec: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            rec.push(self.labels[i].map(|l| l.to_string()).unwrap_or_default());
            rec.push(self.release[i].to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Loads a CSV file whose header contains every column of `schema`.
///
/// `buggy`, `release` and `row_id` are optional. An empty `buggy` cell
/// marks an unlabeled row; a missing `release` column puts every row in
/// release 1.
pub fn load_csv(path: &Path, schema: &[&str]) -> Result<DefectDataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let header = reader.headers()?.clone();
    let find = |name: &str| header.iter().position(|h| h.trim() == name);
    let mut positions = Vec::with_capacity(schema.len());
    for name in schema {
        positions.push(find(name).ok_or_else(|| Error::MissingColumn(name.to_string()))?);
    }
    let label_pos = find(LABEL_COLUMN);
    let release_pos = find(RELEASE_COLUMN);
    let id_pos = find(ROW_ID_COLUMN);

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut release = Vec::new();
    let mut ids = Vec::new();
    for (r, rec) in reader.records().enumerate() {
        let rec = rec?;
        let field = |pos: usize| rec.get(pos).unwrap_or("").trim();
        for (&pos, name) in positions.iter().zip(schema) {
            let raw = field(pos);
            let v: f64 = raw.parse().map_err(|_| Error::Parse {
                row: r,
                column: name.to_string(),
                raw: raw.to_string(),
            })?;
            values.push(v);
        }
        labels.push(match label_pos.map(field) {
            None | Some("") => None,
            Some(raw) => Some(parse_label(raw).ok_or_else(|| Error::Parse {
                row: r,
                column: LABEL_COLUMN.into(),
                raw: raw.to_string(),
            })?),
        });
        release.push(match release_pos.map(field) {
            None => 1,
            Some(raw) => raw.parse().map_err(|_| Error::Parse {
                row: r,
                column: RELEASE_COLUMN.into(),
                raw: raw.to_string(),
            })?,
        });
        if let Some(p) = id_pos {
            ids.push(field(p).to_string());
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let features =
        Array2::from_shape_vec((labels.len(), schema.len()), values).expect("row-major buffer matches shape");
    let project_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    DefectDataset::with_columns(
        project_id,
        schema.iter().map(|s| s.to_string()).collect(),
        features,
        labels,
        release,
        id_pos.map(|_| ids),
    )
}

fn parse_label(raw: &str) -> Option<Label> {
    match raw.to_ascii_lowercase().as_str() {
        "1" | "1.0" | "true" => Some(1),
        "0" | "0.0" | "false" => Some(0),
        _ => None,
    }
}

/// One test bin of one repeat of stratified cross-validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub repeat_index: usize,
    pub bin_index: usize,
    pub test_rows: Vec<usize>,
    pub train_rows: Vec<usize>,
}

/// `repeats` × `bins` stratified cross-validation plan.
///
/// Only labeled rows are dealt into bins; unlabeled rows always sit in the
/// training side.
pub fn cross_val_plan(ds: &DefectDataset, repeats: usize, bins: usize, seed: u64) -> Result<Vec<FoldAssignment>> {
    if repeats == 0 || bins < 2 {
        return Err(Error::InvalidParameter(format!(
            "cross-validation needs repeats >= 1 and bins >= 2, got {repeats} x {bins}"
        )));
    }
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    let mut unlabeled = Vec::new();
    for (i, l) in ds.labels.iter().enumerate() {
        match l {
            Some(c) => by_class[*c as usize].push(i),
            None => unlabeled.push(i),
        }
    }
    let smallest = by_class[0].len().min(by_class[1].len());
    if smallest < bins {
        return Err(Error::TooFewInstances {
            needed: bins,
            found: smallest,
        });
    }
    let mut plan = Vec::with_capacity(repeats * bins);
    for r in 0..repeats {
        let mut rng = seed::rng(seed::child(seed, r as u64));
        let mut bin_of = vec![usize::MAX; ds.n_rows()];
        // Deal positives then negatives round-robin so per-bin class counts
        // differ by at most one.
        let mut k = 0usize;
        for class in [1usize, 0] {
            let mut rows = by_class[class].clone();
            rows.shuffle(&mut rng);
            for row in rows {
                bin_of[row] = k % bins;
                k += 1;
            }
        }
        for b in 0..bins {
            let test_rows: Vec<usize> = (0..ds.n_rows()).filter(|&i| bin_of[i] == b).collect();
            let train_rows: Vec<usize> = (0..ds.n_rows()).filter(|&i| bin_of[i] != b).collect();
            plan.push(FoldAssignment {
                repeat_index: r,
                bin_index: b,
                test_rows,
                train_rows,
            });
        }
    }
    debug_assert!(unlabeled.iter().all(|u| plan.iter().all(|f| !f.test_rows.contains(u))));
    Ok(plan)
}

/// Chronological split: train on all but the last three releases, test on
/// each of the last three separately.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReleaseSplit {
    pub train_releases: Vec<i64>,
    pub train_rows: Vec<usize>,
    pub test_releases: [i64; 3],
    pub test_rows: [Vec<usize>; 3],
}

pub fn release_plan(ds: &DefectDataset) -> Result<ReleaseSplit> {
    let releases: Vec<i64> = ds
        .release
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let r = releases.len();
    if r < 4 {
        return Err(Error::TooFewReleases(r));
    }
    let train_releases = releases[..r - 3].to_vec();
    let test_releases = [releases[r - 3], releases[r - 2], releases[r - 1]];
    let last_train = train_releases[train_releases.len() - 1];
    let train_rows = (0..ds.n_rows()).filter(|&i| ds.release[i] <= last_train).collect();
    // Unlabeled rows can still feed the training pool but are never scored.
    let test_rows = test_releases.map(|rel| {
        (0..ds.n_rows())
            .filter(|&i| ds.release[i] == rel && ds.labels[i].is_some())
            .collect()
    });
    Ok(ReleaseSplit {
        train_releases,
        train_rows,
        test_releases,
        test_rows,
    })
}

/// Label budgets explored by the budget sweep.
pub const STANDARD_BUDGETS: [f64; 7] = [0.01, 0.025, 0.05, 0.10, 0.20, 0.40, 1.0];

/// Index partition of one training fold under a label budget.
///
/// Only [`labeled`](Self::labeled) reads labels; the unlabeled and test
/// accessors return features (and effort) alone.
#[derive(Debug, Clone, PartialEq)]
pub struct PartiallyLabeledView {
    pub labeled_rows: Vec<usize>,
    pub unlabeled_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub budget_fraction: f64,
}

impl PartiallyLabeledView {
    pub fn with_test_rows(mut self, test_rows: Vec<usize>) -> Self {
        self.test_rows = test_rows;
        self
    }

    pub fn labeled(&self, ds: &DefectDataset) -> (Array2<f64>, Vec<Label>) {
        let x = select_rows(ds.features.view(), &self.labeled_rows);
        let y = self
            .labeled_rows
            .iter()
            .map(|&i| ds.labels[i].expect("labeled rows carry labels"))
            .collect();
        (x, y)
    }

    pub fn unlabeled_features(&self, ds: &DefectDataset) -> Array2<f64> {
        select_rows(ds.features.view(), &self.unlabeled_rows)
    }

    pub fn unlabeled_effort(&self, ds: &DefectDataset) -> Vec<f64> {
        self.unlabeled_rows.iter().map(|&i| ds.effort[i]).collect()
    }

    pub fn test_features(&self, ds: &DefectDataset) -> Array2<f64> {
        select_rows(ds.features.view(), &self.test_rows)
    }

    /// Moves a stratified `fraction` of the labeled rows into a validation
    /// set, keeping at least one row per class on the labeled side.
    pub fn carve_validation(
        &self,
        ds: &DefectDataset,
        fraction: f64,
        seed: u64,
    ) -> Result<(PartiallyLabeledView, Vec<usize>)> {
        let mut rng = seed::rng(seed);
        let mut validation = Vec::new();
        let mut kept = Vec::new();
        for class in [0, 1] {
            let mut rows: Vec<usize> = self
                .labeled_rows
                .iter()
                .copied()
                .filter(|&i| ds.labels[i] == Some(class))
                .collect();
            rows.shuffle(&mut rng);
            let take = ((fraction * rows.len() as f64).round() as usize).min(rows.len().saturating_sub(1));
            validation.extend_from_slice(&rows[..take]);
            kept.extend_from_slice(&rows[take..]);
        }
        validation.sort_unstable();
        kept.sort_unstable();
        let view = PartiallyLabeledView {
            labeled_rows: kept,
            ..self.clone()
        };
        Ok((view, validation))
    }
}

/// Reveals the labels of a stratified `fraction` of `train_rows`.
///
/// The labeled sample has `max(2, round(fraction * |train|))` rows with at
/// least one row per class. Rows whose label is unknown always go to the
/// unlabeled side.
pub fn apply_budget(
    train_rows: &[usize],
    labels: &[Option<Label>],
    fraction: f64,
    seed: u64,
) -> Result<PartiallyLabeledView> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "budget fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let mut pools: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    let mut unknown = Vec::new();
    for &i in train_rows {
        match labels[i] {
            Some(c) => pools[c as usize].push(i),
            None => unknown.push(i),
        }
    }
    let (neg, pos) = (pools[0].len(), pools[1].len());
    if neg == 0 || pos == 0 {
        return Err(Error::SingleClassTrainingSet);
    }
    let known = neg + pos;
    let target = ((fraction * train_rows.len() as f64).round() as usize)
        .max(2)
        .min(known);
    let (n_pos, n_neg) = stratified_quota(target, pos, neg);

    let mut rng = seed::rng(seed);
    let mut labeled = Vec::with_capacity(target);
    let mut unlabeled = unknown;
    let [neg_pool, pos_pool] = &mut pools;
    for (pool, take) in [(pos_pool, n_pos), (neg_pool, n_neg)] {
        pool.sort_unstable();
        pool.shuffle(&mut rng);
        labeled.extend_from_slice(&pool[..take]);
        unlabeled.extend_from_slice(&pool[take..]);
    }
    labeled.sort_unstable();
    unlabeled.sort_unstable();
    Ok(PartiallyLabeledView {
        labeled_rows: labeled,
        unlabeled_rows: unlabeled,
        test_rows: Vec::new(),
        budget_fraction: fraction,
    })
}

/// Splits `target` draws between classes proportionally, promoting a class
/// to one draw when proportional rounding leaves it empty.
fn stratified_quota(target: usize, pos: usize, neg: usize) -> (usize, usize) {
    let known = pos + neg;
    let mut n_pos = ((target * pos) as f64 / known as f64).round() as usize;
    n_pos = n_pos.clamp(1, pos.min(target - 1));
    let mut n_neg = target - n_pos;
    if n_neg > neg {
        n_neg = neg;
        n_pos = (target - n_neg).min(pos);
    }
    (n_pos, n_neg)
}

/// Scales used by the synthetic generator: (lower bound, spread).
fn synth_scale(column: &str) -> (f64, f64) {
    // Spreads follow the interquartile ranges of real process metrics.
    let iqr = match column {
        "la" => 39.0,
        "ld" => 12.0,
        "lt" => 122.0,
        "age" => 35.0,
        "ddev" => 1.0,
        "nuc" => 3.0,
        "own" => 0.5,
        "minor" => 0.5,
        "ndev" => 22.0,
        "ncomm" => 49.5,
        "adev" => 3.0,
        "nadev" => 49.0,
        "avg_nddev" => 2.0,
        "avg_nadev" => 5.0,
        "avg_ncomm" => 5.0,
        "ns" => 0.5,
        "exp" => 172.7,
        "sexp" => 70.0,
        "rexp" => 3.4,
        "nd" => 0.5,
        _ => 0.1,
    };
    (lower_bound(column).unwrap_or(-0.2), iqr / 1.35)
}

/// Columns whose class-conditional mean differs in synthetic data.
const SYNTH_INFORMATIVE: [&str; 8] = ["la", "ld", "nuc", "ndev", "ncomm", "nadev", "exp", "rexp"];

/// Separations above this are treated as already fully separated.
const MAX_SEPARATION: f64 = 100.0;

const SYNTH_RELEASES: usize = 8;

/// Two-blob synthetic dataset on the canonical schema.
///
/// Defective rows are shifted by `separation` standard deviations (in
/// Mahalanobis terms) along an informative subset of columns; every other
/// column is noise. Values respect each metric's lower bound and `lt` is
/// strictly positive. Rows are spread over eight releases.
pub fn synth_defect_data(n_rows: usize, defect_ratio: f64, separation: f64, seed: u64) -> DefectDataset {
    assert!(n_rows >= 20, "synthetic datasets need at least 20 rows");
    assert!(
        defect_ratio > 0.0 && defect_ratio < 1.0,
        "defect ratio must lie in (0, 1)"
    );
    let sep = if separation.is_nan() {
        0.0
    } else {
        separation.clamp(0.0, MAX_SEPARATION)
    };
    let mut rng = seed::rng(seed);
    let n_buggy = ((n_rows as f64 * defect_ratio).round() as usize).clamp(1, n_rows - 1);
    let mut labels: Vec<Label> = (0..n_rows).map(|i| u8::from(i < n_buggy)).collect();
    labels.shuffle(&mut rng);

    let shift = sep / (SYNTH_INFORMATIVE.len() as f64).sqrt();
    let mut x = Array2::zeros((n_rows, METRIC_COLUMNS.len()));
    for (i, &label) in labels.iter().enumerate() {
        for (j, name) in METRIC_COLUMNS.iter().enumerate() {
            let z: f64 = StandardNormal.sample(&mut rng);
            let mu = if label == 1 && SYNTH_INFORMATIVE.contains(name) {
                shift
            } else {
                0.0
            };
            let (lb, spread) = synth_scale(name);
            x[[i, j]] = if *name == "sctr" {
                lb + spread * (z + mu)
            } else {
                let v = lb + spread * (3.0 + z + mu);
                if *name == "lt" {
                    v.max(1.0)
                } else {
                    v.max(lb)
                }
            };
        }
    }
    let release = (0..n_rows).map(|i| 1 + (i * SYNTH_RELEASES / n_rows) as i64).collect();
    DefectDataset::new("synthetic", x, labels.into_iter().map(Some).collect(), release)
        .expect("generator respects the schema")
}
