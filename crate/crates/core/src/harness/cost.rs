//! Crowd-labeling cost model.

use serde::Serialize;

use crate::error::{Error, Result};

/// Labeling seconds per file.
pub const SECONDS_PER_FILE: u64 = 7;
/// Dollars per labeled hour: two readers at $8.25.
pub const DOLLARS_PER_HOUR: f64 = 2.0 * 8.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostEstimate {
    pub files: u64,
    pub hours: u64,
    pub dollars: f64,
}

/// Files to label for `fraction` of `total_files`, with whole hours and
/// the resulting wage bill.
pub fn cost_estimate(total_files: u64, fraction: f64) -> Result<CostEstimate> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let files = (fraction * total_files as f64).floor() as u64;
    let hours = files * SECONDS_PER_FILE / 3600;
    Ok(CostEstimate {
        files,
        hours,
        dollars: hours as f64 * DOLLARS_PER_HOUR,
    })
}
