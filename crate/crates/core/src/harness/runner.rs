//! Runs every (dataset, method, fold, budget) cell of an experiment.

use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;

use crate::balance::{smote, SmoteConfig};
use crate::dataset::{apply_budget, cross_val_plan, release_plan, DefectDataset};
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, Strategy};
use crate::harness::registry::{fit_predict, CellData, MethodDescriptor, MethodSettings};
use crate::harness::results::{write_results, RunResult};
use crate::learners::Label;
use crate::linalg::select_rows;
use crate::metrics::{evaluate, MetricReport};
use crate::seed;

/// Decision threshold applied to positive-class probabilities.
pub const THRESHOLD: f64 = 0.5;

/// One train/test split of a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub repeat: usize,
    pub bin: usize,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
}

/// Splits for `strategy`: `repeats × bins` stratified folds, or one split
/// per held-out release (bins 0, 1, 2).
pub fn plan_splits(ds: &DefectDataset, cfg: &ExperimentConfig) -> Result<Vec<Split>> {
    match cfg.strategy {
        Strategy::CrossVal => {
            let plan_seed = seed::derive(cfg.seed, &["cv", &ds.project_id]);
            Ok(cross_val_plan(ds, cfg.repeats, cfg.bins, plan_seed)?
                .into_iter()
                .map(|f| Split {
                    repeat: f.repeat_index,
                    bin: f.bin_index,
                    train_rows: f.train_rows,
                    test_rows: f.test_rows,
                })
                .collect())
        }
        Strategy::Release => {
            let plan = release_plan(ds)?;
            Ok(plan
                .test_rows
                .into_iter()
                .enumerate()
                .map(|(bin, test_rows)| Split {
                    repeat: 0,
                    bin,
                    train_rows: plan.train_rows.clone(),
                    test_rows,
                })
                .collect())
        }
    }
}

/// Seed of the labeled sample (and its SMOTE rows); shared by every method
/// so that all methods of a cell see the same labels.
pub fn data_seed(master: u64, dataset: &str, repeat: usize, bin: usize, budget: f64) -> u64 {
    seed::derive(
        master,
        &[
            "data",
            dataset,
            &repeat.to_string(),
            &bin.to_string(),
            &budget.to_string(),
        ],
    )
}

/// Seed handed to a method's fit.
pub fn method_seed(master: u64, method: &str, dataset: &str, repeat: usize, bin: usize, budget: f64) -> u64 {
    seed::derive(
        master,
        &[
            "fit",
            method,
            dataset,
            &repeat.to_string(),
            &bin.to_string(),
            &budget.to_string(),
        ],
    )
}

/// Draws the labeled sample of a training fold and, when asked, balances
/// it with SMOTE. Test labels are never read.
///
/// SMOTE is skipped when the sampled minority has fewer than two rows.
pub fn prepare_cell(
    ds: &DefectDataset,
    split: &Split,
    budget: f64,
    use_smote: bool,
    data_seed: u64,
) -> Result<CellData> {
    let view = apply_budget(
        &split.train_rows,
        &ds.labels,
        budget,
        seed::derive(data_seed, &["budget"]),
    )?;
    let (mut x_l, mut y_l) = view.labeled(ds);
    if use_smote {
        let pos = y_l.iter().filter(|&&y| y == 1).count();
        let minority = pos.min(y_l.len() - pos);
        if minority >= 2 {
            let cfg = SmoteConfig {
                seed: seed::derive(data_seed, &["smote"]),
                ..Default::default()
            };
            let over = smote(x_l.view(), &y_l, &cfg)?;
            x_l = over.features;
            y_l = over.labels;
        }
    }
    Ok(CellData {
        x_l,
        y_l,
        x_u: view.unlabeled_features(ds),
        effort_u: view.unlabeled_effort(ds),
        x_test: select_rows(ds.features.view(), &split.test_rows),
    })
}

/// Scores test-row probabilities against the held-out labels.
pub fn score_split(ds: &DefectDataset, split: &Split, probabilities: &[f64]) -> Result<MetricReport> {
    let truth: Vec<Label> = split
        .test_rows
        .iter()
        .map(|&i| ds.labels[i].ok_or(Error::InsufficientSamples(format!("test row {i} has no label"))))
        .collect::<Result<_>>()?;
    let effort: Vec<f64> = split.test_rows.iter().map(|&i| ds.effort[i]).collect();
    evaluate(probabilities, &truth, &effort, THRESHOLD)
}

struct CellKey<'a> {
    desc: &'a MethodDescriptor,
    dataset: usize,
    split: usize,
    budget: usize,
}

fn blank_row(
    desc: &MethodDescriptor,
    dataset: &str,
    strategy: Strategy,
    budget: f64,
    repeat: usize,
    bin: usize,
) -> RunResult {
    RunResult {
        method: desc.id.clone(),
        dataset: dataset.to_string(),
        strategy: strategy.as_str().to_string(),
        budget,
        repeat,
        bin,
        report: None,
        seconds: 0.0,
        teaching_mode: desc.teaching_mode.as_str().to_string(),
        family: desc.family.as_str().to_string(),
        view_mode: desc.view_mode.as_str().to_string(),
        error: None,
    }
}

fn error_text(e: &Error) -> String {
    format!("{}: {}", e.class(), e)
}

/// Runs one method on one prepared cell.
pub fn run_cell(
    desc: &MethodDescriptor,
    ds: &DefectDataset,
    split: &Split,
    budget: f64,
    data: &Result<CellData>,
    settings: &MethodSettings,
    cfg: &ExperimentConfig,
) -> RunResult {
    let mut row = blank_row(desc, &ds.project_id, cfg.strategy, budget, split.repeat, split.bin);
    let started = Instant::now();
    let outcome = data.as_ref().map_err(Clone::clone).and_then(|data| {
        let fit_seed = method_seed(cfg.seed, &desc.id, &ds.project_id, split.repeat, split.bin, budget);
        let probs = fit_predict(desc, data, settings, fit_seed)?;
        score_split(ds, split, &probs)
    });
    if cfg.record_timing {
        row.seconds = started.elapsed().as_secs_f64();
    }
    match outcome {
        Ok(report) => row.report = Some(report),
        Err(e) => {
            warn!(
                "{} on {} (repeat {}, bin {}, budget {budget}): {e}",
                desc.id, ds.project_id, split.repeat, split.bin
            );
            row.error = Some(error_text(&e));
        }
    }
    row
}

/// Runs the whole grid. Rows come back ordered by dataset, method (in
/// configuration order), budget, repeat and bin, independent of the number
/// of worker threads.
///
/// A dataset that cannot be split yields one error row per method and
/// budget; a failing cell yields an error row. Only unreadable inputs and
/// invalid configuration abort the run.
pub fn run_experiment(cfg: &ExperimentConfig, base_dir: &Path) -> Result<Vec<RunResult>> {
    cfg.validate()?;
    let methods = cfg.resolved_methods()?;
    let settings = cfg.options.settings()?;
    let datasets: Vec<DefectDataset> = cfg.datasets.iter().map(|d| d.load(base_dir)).collect::<Result<_>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;

    pool.install(|| {
        let mut rows = Vec::new();
        for (d, ds) in datasets.iter().enumerate() {
            let splits = match plan_splits(ds, cfg) {
                Ok(s) => s,
                Err(e) => {
                    warn!("cannot split {}: {e}", ds.project_id);
                    for desc in &methods {
                        for &budget in &cfg.budgets {
                            let mut row = blank_row(desc, &ds.project_id, cfg.strategy, budget, 0, 0);
                            row.error = Some(error_text(&e));
                            rows.push(row);
                        }
                    }
                    continue;
                }
            };
            info!(
                "{}: {} rows, {} splits, {} budgets, {} methods",
                ds.project_id,
                ds.n_rows(),
                splits.len(),
                cfg.budgets.len(),
                methods.len()
            );
            let nb = cfg.budgets.len();
            let prepared: Vec<Result<CellData>> = (0..splits.len() * nb)
                .into_par_iter()
                .map(|i| {
                    let (split, budget) = (&splits[i / nb], cfg.budgets[i % nb]);
                    let seed = data_seed(cfg.seed, &ds.project_id, split.repeat, split.bin, budget);
                    prepare_cell(ds, split, budget, cfg.smote, seed)
                })
                .collect();
            let mut keys = Vec::with_capacity(methods.len() * prepared.len());
            for desc in &methods {
                for budget in 0..nb {
                    for split in 0..splits.len() {
                        keys.push(CellKey {
                            desc,
                            dataset: d,
                            split,
                            budget,
                        });
                    }
                }
            }
            let out: Vec<RunResult> = keys
                .par_iter()
                .map(|k| {
                    let ds = &datasets[k.dataset];
                    let data = &prepared[k.split * nb + k.budget];
                    run_cell(
                        k.desc,
                        ds,
                        &splits[k.split],
                        cfg.budgets[k.budget],
                        data,
                        &settings,
                        cfg,
                    )
                })
                .collect();
            rows.extend(out);
        }
        Ok(rows)
    })
}

/// Runs the grid and writes `results.csv` under the output directory
/// (relative directories resolve against `base_dir`).
pub fn run_to_dir(cfg: &ExperimentConfig, base_dir: &Path) -> Result<(PathBuf, Vec<RunResult>)> {
    let rows = run_experiment(cfg, base_dir)?;
    let dir = if cfg.out_dir.is_relative() {
        base_dir.join(&cfg.out_dir)
    } else {
        cfg.out_dir.clone()
    };
    let path = dir.join("results.csv");
    write_results(&path, &rows)?;
    Ok((path, rows))
}
