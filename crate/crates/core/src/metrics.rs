//! Classification and effort-aware evaluation metrics.
//!
//! `popt20` here is recall at 20% of total effort: the share of all defects
//! found when inspecting the highest-ranked rows whose cumulative effort
//! stays within a fifth of the total.

use crate::error::{Error, Result};
use crate::learners::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn confusion(y_true: &[Label], y_pred: &[Label]) -> Result<ConfusionCounts> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut c = ConfusionCounts::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t == 1, p == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fn_ += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// Ratio metrics derived from a confusion matrix; `None` marks a zero
/// denominator.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CoreMetrics {
    pub recall: Option<f64>,
    pub precision: Option<f64>,
    pub false_alarm: Option<f64>,
    pub f1: Option<f64>,
    pub g_score: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Harmonic mean, zero when both inputs are zero.
fn harmonic(a: f64, b: f64) -> f64 {
    if a + b > 0.0 {
        2.0 * a * b / (a + b)
    } else {
        0.0
    }
}

pub fn core_metrics(c: &ConfusionCounts) -> CoreMetrics {
    let recall = ratio(c.tp, c.tp + c.fn_);
    let precision = ratio(c.tp, c.tp + c.fp);
    let false_alarm = ratio(c.fp, c.fp + c.tn);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) => Some(harmonic(p, r)),
        _ => None,
    };
    let g_score = match (false_alarm, recall) {
        (Some(pf), Some(r)) => Some(harmonic(1.0 - pf, r)),
        _ => None,
    };
    CoreMetrics {
        recall,
        precision,
        false_alarm,
        f1,
        g_score,
    }
}

/// One scored test row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedPrediction {
    pub probability: f64,
    pub truth: Label,
    pub effort: f64,
}

/// Inspection order: probability descending, then effort ascending, then
/// input order.
pub fn inspection_order(rows: &[RankedPrediction]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| {
        rows[b]
            .probability
            .total_cmp(&rows[a].probability)
            .then(rows[a].effort.total_cmp(&rows[b].effort))
            .then(a.cmp(&b))
    });
    order
}

/// Defects found within 20% of total effort, as a share of all defects.
/// `None` when there is no defect or no effort.
pub fn popt20(rows: &[RankedPrediction]) -> Option<f64> {
    popt_at(rows, 0.20)
}

pub fn popt_at(rows: &[RankedPrediction], share: f64) -> Option<f64> {
    let defects = rows.iter().filter(|r| r.truth == 1).count();
    let total_effort: f64 = rows.iter().map(|r| r.effort).sum();
    if defects == 0 || !(total_effort > 0.0) {
        return None;
    }
    // Relative slack absorbs rounding so uniform effort scaling cannot flip
    // a boundary comparison.
    let budget = share * total_effort * (1.0 + 1e-12);
    let mut spent = 0.0;
    let mut found = 0;
    for (k, i) in inspection_order(rows).into_iter().enumerate() {
        spent += rows[i].effort;
        if k > 0 && spent > budget {
            break;
        }
        if rows[i].truth == 1 {
            found += 1;
        }
    }
    Some(found as f64 / defects as f64)
}

/// Initial false alarms before the first defect in inspection order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ifa {
    pub count: usize,
    pub no_defect: bool,
}

pub fn ifa(rows: &[RankedPrediction]) -> Ifa {
    let order = inspection_order(rows);
    match order.iter().position(|&i| rows[i].truth == 1) {
        Some(k) => Ifa {
            count: k,
            no_defect: false,
        },
        None => Ifa {
            count: rows.len(),
            no_defect: true,
        },
    }
}

/// All metrics for one (method, fold) cell.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricReport {
    pub recall: Option<f64>,
    pub precision: Option<f64>,
    pub false_alarm: Option<f64>,
    pub f1: Option<f64>,
    pub g_score: Option<f64>,
    pub popt20: Option<f64>,
    pub ifa: usize,
    pub ifa_no_defect: bool,
}

/// Scores probabilities against truth at `threshold` (ties predict 1).
pub fn evaluate(probabilities: &[f64], truth: &[Label], effort: &[f64], threshold: f64) -> Result<MetricReport> {
    if probabilities.len() != truth.len() || effort.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: probabilities.len(),
            right: truth.len(),
        });
    }
    let pred: Vec<Label> = probabilities.iter().map(|&p| u8::from(p >= threshold)).collect();
    let core = core_metrics(&confusion(truth, &pred)?);
    let ranked: Vec<RankedPrediction> = probabilities
        .iter()
        .zip(truth)
        .zip(effort)
        .map(|((&probability, &truth), &effort)| RankedPrediction {
            probability,
            truth,
            effort,
        })
        .collect();
    let i = ifa(&ranked);
    Ok(MetricReport {
        recall: core.recall,
        precision: core.precision,
        false_alarm: core.false_alarm,
        f1: core.f1,
        g_score: core.g_score,
        popt20: popt20(&ranked),
        ifa: i.count,
        ifa_no_defect: i.no_defect,
    })
}
