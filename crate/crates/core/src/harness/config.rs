//! Experiment configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{load_csv, synth_defect_data, DefectDataset, METRIC_COLUMNS};
use crate::error::{Error, Result};
use crate::harness::registry::{find_method, method_registry, MethodDescriptor, MethodSettings};
use crate::learners::LearnerKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    CrossVal,
    Release,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::CrossVal => "cross_val",
            Strategy::Release => "release",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetSource {
    Csv {
        path: PathBuf,
        #[serde(default)]
        name: Option<String>,
    },
    Synthetic {
        name: String,
        rows: usize,
        ratio: f64,
        #[serde(default = "default_separation")]
        separation: f64,
        #[serde(default)]
        seed: u64,
    },
}

fn default_separation() -> f64 {
    1.0
}

impl DatasetSource {
    /// Loads the dataset; relative CSV paths resolve against `base`.
    pub fn load(&self, base: &Path) -> Result<DefectDataset> {
        match self {
            DatasetSource::Csv { path, name } => {
                let full = if path.is_relative() {
                    base.join(path)
                } else {
                    path.clone()
                };
                let mut ds = load_csv(&full, &METRIC_COLUMNS)?;
                ds.project_id = match name {
                    Some(n) => n.clone(),
                    None => path
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_default(),
                };
                Ok(ds)
            }
            DatasetSource::Synthetic {
                name,
                rows,
                ratio,
                separation,
                seed,
            } => {
                if *rows < 20 || !(*ratio > 0.0 && *ratio < 1.0) {
                    return Err(Error::Config(format!(
                        "synthetic dataset `{name}` needs rows >= 20 and ratio in (0, 1)"
                    )));
                }
                let mut ds = synth_defect_data(*rows, *ratio, *separation, *seed);
                ds.project_id = name.clone();
                Ok(ds)
            }
        }
    }
}

/// Knobs of the semi-supervised methods; every field is optional in TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodOptions {
    pub confidence_threshold: f64,
    pub max_iterations: usize,
    pub class_ratio_matching: bool,
    pub tri_base: String,
    pub semi_boost_base: String,
    pub ftcf_base: String,
    pub ftcf_dim: usize,
    pub dense_max_nodes: usize,
    pub spreading_alpha: f64,
    pub gmm_components: Vec<usize>,
}

impl Default for MethodOptions {
    fn default() -> Self {
        let s = MethodSettings::default();
        Self {
            confidence_threshold: s.policy.confidence_threshold,
            max_iterations: s.policy.max_iterations,
            class_ratio_matching: s.policy.class_ratio_matching,
            tri_base: s.tri_base.name().into(),
            semi_boost_base: s.semi_boost_base.name().into(),
            ftcf_base: s.ftcf_base.name().into(),
            ftcf_dim: s.ftcf_dim,
            dense_max_nodes: s.dense_max_nodes,
            spreading_alpha: s.spreading_alpha,
            gmm_components: s.gmm_components,
        }
    }
}

impl MethodOptions {
    pub fn settings(&self) -> Result<MethodSettings> {
        let learner = |name: &str| {
            LearnerKind::from_name(name).ok_or_else(|| Error::Config(format!("unknown base learner `{name}`")))
        };
        let mut s = MethodSettings {
            tri_base: learner(&self.tri_base)?,
            semi_boost_base: learner(&self.semi_boost_base)?,
            ftcf_base: learner(&self.ftcf_base)?,
            ftcf_dim: self.ftcf_dim,
            dense_max_nodes: self.dense_max_nodes,
            spreading_alpha: self.spreading_alpha,
            gmm_components: self.gmm_components.clone(),
            ..Default::default()
        };
        s.policy.confidence_threshold = self.confidence_threshold;
        s.policy.max_iterations = self.max_iterations;
        s.policy.class_ratio_matching = self.class_ratio_matching;
        s.policy.validate()?;
        if !(1..21).contains(&s.ftcf_dim) {
            return Err(Error::Config("ftcf_dim must lie in 1..=20".into()));
        }
        if s.gmm_components.is_empty() || s.gmm_components.contains(&0) {
            return Err(Error::Config(
                "gmm_components must be a nonempty list of positive counts".into(),
            ));
        }
        if s.dense_max_nodes < 10 {
            return Err(Error::Config("dense_max_nodes must be at least 10".into()));
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetSource>,
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
    #[serde(default = "default_budgets")]
    pub budgets: Vec<f64>,
    /// Method ids; empty selects the whole registry.
    #[serde(default)]
    pub methods: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "default_true")]
    pub smote: bool,
    #[serde(default = "default_folds")]
    pub repeats: usize,
    #[serde(default = "default_folds")]
    pub bins: usize,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub jobs: usize,
    /// Record wall-clock seconds per cell (makes output run-dependent).
    #[serde(default)]
    pub record_timing: bool,
    #[serde(default)]
    pub options: MethodOptions,
}

fn default_strategy() -> Strategy {
    Strategy::CrossVal
}

fn default_budgets() -> Vec<f64> {
    vec![0.025, 0.05, 0.10, 0.20]
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("results")
}

fn default_true() -> bool {
    true
}

fn default_folds() -> usize {
    5
}

impl ExperimentConfig {
    /// A configuration with defaults for everything but the datasets.
    pub fn new(datasets: Vec<DatasetSource>) -> Self {
        Self {
            datasets,
            strategy: default_strategy(),
            budgets: default_budgets(),
            methods: Vec::new(),
            seed: 0,
            out_dir: default_out_dir(),
            smote: true,
            repeats: 5,
            bins: 5,
            jobs: 0,
            record_timing: false,
            options: MethodOptions::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(Error::Config("at least one dataset is required".into()));
        }
        if self.budgets.is_empty() {
            return Err(Error::Config("at least one budget is required".into()));
        }
        if let Some(b) = self.budgets.iter().find(|b| !(**b > 0.0 && **b <= 1.0)) {
            return Err(Error::Config(format!("budget {b} outside (0, 1]")));
        }
        if self.strategy == Strategy::CrossVal && (self.repeats == 0 || self.bins < 2) {
            return Err(Error::Config(
                "cross-validation needs repeats >= 1 and bins >= 2".into(),
            ));
        }
        self.resolved_methods()?;
        self.options.settings()?;
        Ok(())
    }

    pub fn resolved_methods(&self) -> Result<Vec<MethodDescriptor>> {
        if self.methods.is_empty() {
            return Ok(method_registry());
        }
        self.methods.iter().map(|m| find_method(m)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_takes_defaults() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            [[datasets]]
            name = "synthetic"
            rows = 100
            ratio = 0.3
            "#,
        )
        .unwrap();
        assert_eq!(cfg.strategy, Strategy::CrossVal);
        assert_eq!(cfg.budgets, vec![0.025, 0.05, 0.10, 0.20]);
        assert!(cfg.smote);
        assert_eq!((cfg.repeats, cfg.bins), (5, 5));
        assert_eq!(cfg.resolved_methods().unwrap().len(), 58);
        assert_eq!(cfg.options, MethodOptions::default());
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = ExperimentConfig::new(vec![
            DatasetSource::Csv {
                path: "data/a.csv".into(),
                name: None,
            },
            DatasetSource::Synthetic {
                name: "s".into(),
                rows: 50,
                ratio: 0.4,
                separation: 2.0,
                seed: 3,
            },
        ]);
        cfg.methods = vec!["RF".into(), "EATT".into()];
        cfg.strategy = Strategy::Release;
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_bad_values() {
        let base = "[[datasets]]\nname = \"s\"\nrows = 100\nratio = 0.3\n";
        for extra in [
            "budgets = [0.0]\n",
            "budgets = []\n",
            "methods = [\"nope\"]\n",
            "bins = 1\n",
            "colour = 3\n",
        ] {
            let text = format!("{extra}{base}");
            assert!(ExperimentConfig::from_toml(&text).is_err(), "{extra}");
        }
        let bad_option = format!("{base}[options]\nftcf_dim = 21\n");
        assert!(ExperimentConfig::from_toml(&bad_option).is_err());
    }
}
