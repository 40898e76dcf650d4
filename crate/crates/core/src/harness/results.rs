//! Result rows and their CSV form.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::MetricReport;
use crate::scott_knott::Goal;

pub const RESULT_COLUMNS: [&str; 18] = [
    "method",
    "dataset",
    "strategy",
    "budget",
    "repeat",
    "bin",
    "recall",
    "precision",
    "pf",
    "f1",
    "gscore",
    "popt20",
    "ifa",
    "seconds",
    "teaching_mode",
    "family",
    "view_mode",
    "error",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Recall,
    Precision,
    Pf,
    F1,
    GScore,
    Popt20,
    Ifa,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::Recall,
        Metric::Precision,
        Metric::Pf,
        Metric::F1,
        Metric::GScore,
        Metric::Popt20,
        Metric::Ifa,
    ];

    pub fn column(self) -> &'static str {
        match self {
            Metric::Recall => "recall",
            Metric::Precision => "precision",
            Metric::Pf => "pf",
            Metric::F1 => "f1",
            Metric::GScore => "gscore",
            Metric::Popt20 => "popt20",
            Metric::Ifa => "ifa",
        }
    }

    pub fn from_column(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.column() == name)
    }

    pub fn goal(self) -> Goal {
        match self {
            Metric::Pf | Metric::Ifa => Goal::Minimize,
            _ => Goal::Maximize,
        }
    }

    pub fn value(self, r: &MetricReport) -> Option<f64> {
        match self {
            Metric::Recall => r.recall,
            Metric::Precision => r.precision,
            Metric::Pf => r.false_alarm,
            Metric::F1 => r.f1,
            Metric::GScore => r.g_score,
            Metric::Popt20 => r.popt20,
            Metric::Ifa => Some(r.ifa as f64),
        }
    }
}

/// One (method, dataset, fold, budget) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub method: String,
    pub dataset: String,
    pub strategy: String,
    pub budget: f64,
    pub repeat: usize,
    pub bin: usize,
    /// `None` on error rows.
    pub report: Option<MetricReport>,
    pub seconds: f64,
    pub teaching_mode: String,
    pub family: String,
    pub view_mode: String,
    /// Failure class and message of an error row.
    pub error: Option<String>,
}

impl RunResult {
    pub fn metric(&self, m: Metric) -> Option<f64> {
        self.report.as_ref().and_then(|r| m.value(r))
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn record(r: &RunResult) -> Vec<String> {
    let metric = |m: Metric| opt(r.metric(m));
    vec![
        r.method.clone(),
        r.dataset.clone(),
        r.strategy.clone(),
        r.budget.to_string(),
        r.repeat.to_string(),
        r.bin.to_string(),
        metric(Metric::Recall),
        metric(Metric::Precision),
        metric(Metric::Pf),
        metric(Metric::F1),
        metric(Metric::GScore),
        metric(Metric::Popt20),
        r.report.as_ref().map(|x| x.ifa.to_string()).unwrap_or_default(),
        r.seconds.to_string(),
        r.teaching_mode.clone(),
        r.family.clone(),
        r.view_mode.clone(),
        r.error.clone().unwrap_or_default(),
    ]
}

/// Serializes rows to CSV bytes in the given order.
pub fn results_csv(rows: &[RunResult]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RESULT_COLUMNS)?;
    for r in rows {
        w.write_record(record(r))?;
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

/// Writes `bytes` to `path` through a sibling temporary file and a rename,
/// so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(format!("`{}` is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let written = fs::File::create(&tmp).and_then(|mut f| {
        f.write_all(bytes)?;
        f.sync_all()
    });
    if let Err(e) = written.and_then(|_| fs::rename(&tmp, path)) {
        let _ = fs::remove_file(&tmp);
        return Err(e.into());
    }
    Ok(())
}

pub fn write_results(path: &Path, rows: &[RunResult]) -> Result<()> {
    write_atomic(path, &results_csv(rows)?)
}

pub fn read_results(path: &Path) -> Result<Vec<RunResult>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(RESULT_COLUMNS) {
        return Err(Error::Parse {
            row: 0,
            column: "header".into(),
            raw: headers.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let bad = |c: usize| Error::Parse {
            row,
            column: RESULT_COLUMNS[c].into(),
            raw: field(c).into(),
        };
        let num = |c: usize| -> Result<Option<f64>> {
            match field(c) {
                "" => Ok(None),
                s => s.parse().map(Some).map_err(|_| bad(c)),
            }
        };
        let int = |c: usize| -> Result<usize> { field(c).parse().map_err(|_| bad(c)) };
        let error = Some(field(17).to_string()).filter(|e| !e.is_empty());
        let report = if error.is_some() {
            None
        } else {
            let ifa = int(12)?;
            Some(MetricReport {
                recall: num(6)?,
                precision: num(7)?,
                false_alarm: num(8)?,
                f1: num(9)?,
                g_score: num(10)?,
                popt20: num(11)?,
                ifa,
                ifa_no_defect: false,
            })
        };
        out.push(RunResult {
            method: field(0).into(),
            dataset: field(1).into(),
            strategy: field(2).into(),
            budget: num(3)?.ok_or_else(|| bad(3))?,
            repeat: int(4)?,
            bin: int(5)?,
            report,
            seconds: num(13)?.unwrap_or(0.0),
            teaching_mode: field(14).into(),
            family: field(15).into(),
            view_mode: field(16).into(),
            error,
        });
    }
    Ok(out)
}
