//! Aggregation of result rows into rank tables, box-plot quantiles and
//! budget-wise medians.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::results::{write_atomic, Metric, RunResult};
use crate::scott_knott::{sk_rank, Goal, RankTable, SkConfig, TreatmentSamples};
use crate::seed;

/// What a treatment is when pooling result rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GroupBy {
    Method,
    Family,
    /// `supervised` against `semi_supervised`.
    Supervision,
    /// Co-training methods against every other semi-supervised method.
    CoTraining,
    /// Co-training rows only, `single` against `multi`.
    ViewMode,
    /// `self` against `mutual`; rows without either tag are left out.
    TeachingMode,
}

impl GroupBy {
    /// The comparisons every report carries besides its main table.
    pub const COMPARISONS: [GroupBy; 4] = [
        GroupBy::Supervision,
        GroupBy::CoTraining,
        GroupBy::ViewMode,
        GroupBy::TeachingMode,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GroupBy::Method => "method",
            GroupBy::Family => "family",
            GroupBy::Supervision => "supervision",
            GroupBy::CoTraining => "co_training",
            GroupBy::ViewMode => "view_mode",
            GroupBy::TeachingMode => "teaching_mode",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [
            GroupBy::Method,
            GroupBy::Family,
            GroupBy::Supervision,
            GroupBy::CoTraining,
            GroupBy::ViewMode,
            GroupBy::TeachingMode,
        ]
        .into_iter()
        .find(|g| g.as_str() == name)
    }

    /// Treatment of a row, `None` when the row sits outside the comparison.
    pub fn key(self, r: &RunResult) -> Option<String> {
        let supervised = r.family == "supervised";
        let co = r.method.starts_with("co_training");
        match self {
            GroupBy::Method => Some(r.method.clone()),
            GroupBy::Family => Some(r.family.clone()),
            GroupBy::Supervision => Some(if supervised { "supervised" } else { "semi_supervised" }.into()),
            GroupBy::CoTraining if supervised => None,
            GroupBy::CoTraining => Some(if co { "co_training" } else { "other" }.into()),
            GroupBy::ViewMode => co.then(|| r.view_mode.clone()),
            GroupBy::TeachingMode => {
                matches!(r.teaching_mode.as_str(), "self" | "mutual").then(|| r.teaching_mode.clone())
            }
        }
    }
}

/// Linear-interpolation quantile of sorted values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Box-plot summary of one treatment.
#[derive(Debug, Clone, PartialEq)]
pub struct TreatmentStats {
    pub treatment: String,
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl TreatmentStats {
    pub fn from_values(treatment: impl Into<String>, values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        Ok(Self {
            treatment: treatment.into(),
            n: s.len(),
            min: s[0],
            q1: quantile(&s, 0.25),
            median: quantile(&s, 0.5),
            q3: quantile(&s, 0.75),
            max: s[s.len() - 1],
        })
    }

    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// One metric at one budget, ranked over the treatments of a grouping.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTable {
    pub group_by: GroupBy,
    pub metric: Metric,
    pub budget: f64,
    /// In ranking order, best group first.
    pub stats: Vec<TreatmentStats>,
    pub ranks: RankTable,
}

impl MetricTable {
    /// Rank in the published orientation: rank 1 holds the smallest values
    /// (worst for recall, best for false alarms).
    pub fn paper_rank(&self, treatment: &str) -> Option<usize> {
        self.ranks.ascending_rank(treatment)
    }
}

/// Budget-wise median of one method and metric (long format).
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetRow {
    pub method: String,
    pub metric: Metric,
    pub budget: f64,
    pub median: f64,
    pub iqr: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub group_by: GroupBy,
    pub tables: Vec<MetricTable>,
    pub comparisons: Vec<MetricTable>,
    pub budget_rows: Vec<BudgetRow>,
    /// Treatments left out of a table for having fewer than two values.
    pub skipped: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportConfig {
    pub group_by: GroupBy,
    pub metrics: Vec<Metric>,
    pub alpha: f64,
    pub d_threshold: f64,
    pub resamples: usize,
    pub seed: u64,
}

impl Default for ReportConfig {
    fn default() -> Self {
        let sk = SkConfig::default();
        Self {
            group_by: GroupBy::Method,
            metrics: Metric::ALL.to_vec(),
            alpha: sk.alpha,
            d_threshold: sk.d_threshold,
            resamples: sk.resamples,
            seed: 0,
        }
    }
}

/// Distinct budgets of the rows, ascending.
pub fn budgets(rows: &[RunResult]) -> Vec<f64> {
    let mut b: Vec<f64> = rows.iter().map(|r| r.budget).collect();
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

/// Values of `metric` per treatment at `budget`, in first-seen order of
/// the rows. Error rows and undefined values are left out.
pub fn treatment_values(rows: &[RunResult], group_by: GroupBy, metric: Metric, budget: f64) -> Vec<(String, Vec<f64>)> {
    let mut order: Vec<String> = Vec::new();
    let mut values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.budget == budget && r.error.is_none()) {
        let Some(key) = group_by.key(r) else { continue };
        let entry = values.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            Vec::new()
        });
        entry.extend(r.metric(metric));
    }
    order
        .into_iter()
        .map(|k| {
            let v = values.remove(&k).unwrap_or_default();
            (k, v)
        })
        .collect()
}

fn metric_table(
    rows: &[RunResult],
    group_by: GroupBy,
    metric: Metric,
    budget: f64,
    cfg: &ReportConfig,
    skipped: &mut Vec<String>,
) -> Result<Option<MetricTable>> {
    let mut treatments = Vec::new();
    for (name, values) in treatment_values(rows, group_by, metric, budget) {
        if values.len() < 2 {
            skipped.push(format!(
                "{}/{}/{budget}: {name} ({} values)",
                group_by.as_str(),
                metric.column(),
                values.len()
            ));
        } else {
            treatments.push(TreatmentSamples::new(name, values));
        }
    }
    if treatments.is_empty() {
        return Ok(None);
    }
    let sk = SkConfig {
        alpha: cfg.alpha,
        d_threshold: cfg.d_threshold,
        resamples: cfg.resamples,
        goal: metric.goal(),
        seed: seed::derive(
            cfg.seed,
            &["report", group_by.as_str(), metric.column(), &budget.to_string()],
        ),
    };
    let ranks = sk_rank(&treatments, &sk)?;
    let by_name: BTreeMap<&str, &TreatmentSamples> = treatments.iter().map(|t| (t.name.as_str(), t)).collect();
    let stats = ranks
        .groups
        .iter()
        .flatten()
        .map(|n| TreatmentStats::from_values(n.clone(), &by_name[n.as_str()].values))
        .collect::<Result<_>>()?;
    Ok(Some(MetricTable {
        group_by,
        metric,
        budget,
        stats,
        ranks,
    }))
}

/// Builds the report bundle: per budget and metric a ranked table over the
/// `group_by` treatments, the four standard grouped comparisons, and the
/// budget-wise medians of every method.
///
/// Fails with `InsufficientSamples` when some requested metric has no
/// treatment with at least two values at any budget.
pub fn aggregate_report(rows: &[RunResult], cfg: &ReportConfig) -> Result<ReportBundle> {
    if rows.is_empty() {
        return Err(Error::InsufficientSamples("no result rows".into()));
    }
    let mut skipped = Vec::new();
    let mut tables = Vec::new();
    let mut comparisons = Vec::new();
    for &metric in &cfg.metrics {
        let before = tables.len();
        for &budget in &budgets(rows) {
            tables.extend(metric_table(rows, cfg.group_by, metric, budget, cfg, &mut skipped)?);
            for g in GroupBy::COMPARISONS {
                comparisons.extend(metric_table(rows, g, metric, budget, cfg, &mut Vec::new())?);
            }
        }
        if tables.len() == before {
            return Err(Error::InsufficientSamples(format!(
                "metric `{}` has no treatment with two or more values",
                metric.column()
            )));
        }
    }
    let mut budget_rows = Vec::new();
    for &metric in &cfg.metrics {
        for t in tables
            .iter()
            .filter(|t| t.metric == metric && t.group_by == GroupBy::Method)
        {
            budget_rows.extend(t.stats.iter().map(|s| BudgetRow {
                method: s.treatment.clone(),
                metric,
                budget: t.budget,
                median: s.median,
                iqr: s.iqr(),
                n: s.n,
            }));
        }
    }
    budget_rows.sort_by(|a, b| {
        (a.metric, &a.method)
            .cmp(&(b.metric, &b.method))
            .then(a.budget.total_cmp(&b.budget))
    });
    Ok(ReportBundle {
        group_by: cfg.group_by,
        tables,
        comparisons,
        budget_rows,
        skipped,
    })
}

fn goal_str(g: Goal) -> &'static str {
    match g {
        Goal::Maximize => "max",
        Goal::Minimize => "min",
    }
}

fn orientation(metric: Metric) -> &'static str {
    match metric.goal() {
        Goal::Maximize => "rank 1 is worst",
        Goal::Minimize => "rank 1 is best",
    }
}

fn f(v: f64) -> String {
    format!("{v:.4}")
}

/// `ranks.csv`: one row per treatment of every table and comparison.
pub fn ranks_csv(bundle: &ReportBundle) -> String {
    let mut out = String::from("grouping,metric,goal,budget,treatment,n,median,iqr,rank,n_groups,blurred\n");
    for t in bundle.tables.iter().chain(&bundle.comparisons) {
        for s in &t.stats {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                t.group_by.as_str(),
                t.metric.column(),
                goal_str(t.metric.goal()),
                t.budget,
                s.treatment,
                s.n,
                f(s.median),
                f(s.iqr()),
                t.paper_rank(&s.treatment).unwrap_or(0),
                t.ranks.n_groups(),
                t.ranks.blurred()
            );
        }
    }
    out
}

/// `boxplot.csv`: five-number summaries for external plotting.
pub fn boxplot_csv(bundle: &ReportBundle) -> String {
    let mut out = String::from("grouping,metric,budget,treatment,n,min,q1,median,q3,max\n");
    for t in bundle.tables.iter().chain(&bundle.comparisons) {
        for s in &t.stats {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                t.group_by.as_str(),
                t.metric.column(),
                t.budget,
                s.treatment,
                s.n,
                f(s.min),
                f(s.q1),
                f(s.median),
                f(s.q3),
                f(s.max)
            );
        }
    }
    out
}

/// `budget_table.csv`: method × metric × budget medians, long format.
pub fn budget_csv(bundle: &ReportBundle) -> String {
    let mut out = String::from("method,metric,budget,median,iqr,n\n");
    for r in &bundle.budget_rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.method,
            r.metric.column(),
            r.budget,
            f(r.median),
            f(r.iqr),
            r.n
        );
    }
    out
}

fn text_table(out: &mut String, t: &MetricTable) {
    let _ = writeln!(
        out,
        "[{} | {} | budget {}] {} groups, {}{}",
        t.group_by.as_str(),
        t.metric.column(),
        t.budget,
        t.ranks.n_groups(),
        orientation(t.metric),
        if t.ranks.blurred() { ", BLURRED" } else { "" }
    );
    let width = t.stats.iter().map(|s| s.treatment.len()).max().unwrap_or(0).max(9);
    let _ = writeln!(
        out,
        "  {:>4}  {:<width$}  {:>8}  {:>8}  {:>4}",
        "rank", "treatment", "median", "iqr", "n"
    );
    for s in &t.stats {
        let _ = writeln!(
            out,
            "  {:>4}  {:<width$}  {:>8}  {:>8}  {:>4}",
            t.paper_rank(&s.treatment).unwrap_or(0),
            s.treatment,
            f(s.median),
            f(s.iqr()),
            s.n
        );
    }
    out.push('\n');
}

/// `summary.txt`: every table as aligned text.
pub fn summary_text(bundle: &ReportBundle) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# treatments by {}\n", bundle.group_by.as_str());
    for t in &bundle.tables {
        text_table(&mut out, t);
    }
    let _ = writeln!(out, "# grouped comparisons\n");
    for t in &bundle.comparisons {
        text_table(&mut out, t);
    }
    if !bundle.skipped.is_empty() {
        let _ = writeln!(out, "# skipped (fewer than two values)");
        for s in &bundle.skipped {
            let _ = writeln!(out, "  {s}");
        }
    }
    out
}

/// Writes `summary.txt`, `ranks.csv`, `boxplot.csv` and `budget_table.csv`
/// into `dir`, returning their paths.
pub fn write_report(dir: &Path, bundle: &ReportBundle) -> Result<Vec<PathBuf>> {
    let files = [
        ("summary.txt", summary_text(bundle)),
        ("ranks.csv", ranks_csv(bundle)),
        ("boxplot.csv", boxplot_csv(bundle)),
        ("budget_table.csv", budget_csv(bundle)),
    ];
    let mut paths = Vec::new();
    for (name, text) in files {
        let p = dir.join(name);
        write_atomic(&p, text.as_bytes())?;
        paths.push(p);
    }
    Ok(paths)
}
