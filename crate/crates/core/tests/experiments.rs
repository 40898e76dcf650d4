//! Paired synthetic experiments through the harness.

use std::path::Path;

use defect_ssl::dataset::{cross_val_plan, synth_defect_data};
use defect_ssl::harness::results::{Metric, RunResult};
use defect_ssl::harness::runner::{method_seed, THRESHOLD};
use defect_ssl::harness::{run_experiment, DatasetSource, ExperimentConfig};
use defect_ssl::learners::{fit, Classifier, ClassifierSpec, LearnerKind};
use defect_ssl::linalg::select_rows;
use defect_ssl::metrics::evaluate;
use defect_ssl::{seed, Label};

fn synthetic(name: &str, rows: usize, ratio: f64, separation: f64, seed: u64) -> DatasetSource {
    DatasetSource::Synthetic {
        name: name.into(),
        rows,
        ratio,
        separation,
        seed,
    }
}

/// Metric values of one method keyed by (repeat, bin), in fold order.
fn by_fold(rows: &[RunResult], method: &str, metric: Metric) -> Vec<((usize, usize), f64)> {
    rows.iter()
        .filter(|r| r.method == method)
        .filter_map(|r| r.metric(metric).map(|v| ((r.repeat, r.bin), v)))
        .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

#[test]
fn eatt_popt20_at_least_tri_training_in_most_folds() {
    let mut cfg = ExperimentConfig::new(vec![synthetic("effort", 1500, 0.3, 1.0, 11)]);
    cfg.seed = 11;
    cfg.methods = vec!["tri_training".into(), "EATT".into()];
    cfg.budgets = vec![0.1];
    let rows = run_experiment(&cfg, Path::new(".")).unwrap();
    let tri = by_fold(&rows, "tri_training", Metric::Popt20);
    let eatt = by_fold(&rows, "EATT", Metric::Popt20);
    assert_eq!(tri.len(), 25);
    assert_eq!(eatt.len(), 25);
    let wins = tri
        .iter()
        .zip(&eatt)
        .filter(|(t, e)| {
            assert_eq!(t.0, e.0);
            e.1 >= t.1
        })
        .count();
    println!("EATT Popt20 >= tri-training in {wins}/25 folds");
    assert!(wins >= 15, "EATT matched or beat tri-training in only {wins}/25 folds");
}

#[test]
fn co_forest_recall_at_least_supervised_tree() {
    let mut cfg = ExperimentConfig::new(vec![synthetic("blobs", 1200, 0.3, 2.0, 12)]);
    cfg.seed = 12;
    cfg.methods = vec!["DT".into(), "co_forest".into()];
    cfg.budgets = vec![0.025];
    let rows = run_experiment(&cfg, Path::new(".")).unwrap();
    let recall = |m: &str| {
        let v: Vec<f64> = by_fold(&rows, m, Metric::Recall).into_iter().map(|(_, r)| r).collect();
        assert_eq!(v.len(), 25, "{m}");
        median(v)
    };
    let (dt, cf) = (recall("DT"), recall("co_forest"));
    println!("median recall: co-forest {cf:.3}, decision tree {dt:.3}");
    assert!(cf >= dt, "co-forest {cf} < decision tree {dt}");
}

#[test]
fn full_budget_supervised_matches_direct_fit() {
    let (name, master) = ("direct", 13);
    let ds = synth_defect_data(300, 0.3, 1.0, 13);
    let mut cfg = ExperimentConfig::new(vec![synthetic(name, 300, 0.3, 1.0, 13)]);
    cfg.seed = master;
    cfg.methods = vec!["LR".into(), "DT".into(), "RF".into()];
    cfg.budgets = vec![1.0];
    cfg.smote = false;
    cfg.repeats = 1;
    cfg.bins = 3;
    let rows = run_experiment(&cfg, Path::new(".")).unwrap();

    let plan = cross_val_plan(&ds, 1, 3, seed::derive(master, &["cv", name])).unwrap();
    for (id, kind) in [
        ("LR", LearnerKind::Lr),
        ("DT", LearnerKind::Dt),
        ("RF", LearnerKind::Rf),
    ] {
        for fold in &plan {
            let mut train = fold.train_rows.clone();
            train.sort_unstable();
            let x = select_rows(ds.features.view(), &train);
            let y: Vec<Label> = train.iter().map(|&i| ds.labels[i].unwrap()).collect();
            let s = method_seed(master, id, name, fold.repeat_index, fold.bin_index, 1.0);
            let spec = ClassifierSpec::new(kind).with_seed(seed::derive(s, &["base"]));
            let model = fit(&spec, x.view(), &y, None).unwrap();
            let probs = model
                .positive_proba(select_rows(ds.features.view(), &fold.test_rows).view())
                .unwrap();
            let truth: Vec<Label> = fold.test_rows.iter().map(|&i| ds.labels[i].unwrap()).collect();
            let effort: Vec<f64> = fold.test_rows.iter().map(|&i| ds.effort[i]).collect();
            let direct = evaluate(&probs, &truth, &effort, THRESHOLD).unwrap();
            let row = rows
                .iter()
                .find(|r| r.method == id && r.repeat == fold.repeat_index && r.bin == fold.bin_index)
                .unwrap();
            assert_eq!(row.report.as_ref(), Some(&direct), "{id} fold {}", fold.bin_index);
        }
    }
}
