//! TOML experiment configuration.
//!
//! ```toml
//! [sim]
//! noise_sigma = 0.1
//!
//! [forest]
//! n_trees = 264
//!
//! [dataset]
//! classes = ["000000", "100000", "101000"]
//! total_samples = 24000
//! train_samples = 8000
//! ```
//!
//! Every section and key is optional.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagnosis::DiagnosisConfig;
use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::forest::ForestParams;
use crate::label::FaultLabel;
use crate::sim::SimConfig;

/// How dataset rows are labeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelMode {
    /// Faulted switches that the current region can reveal.
    #[default]
    Observable,
    /// Every faulted switch, regardless of region.
    True,
}

impl LabelMode {
    pub fn as_str(self) -> &'static str {
        match self {
            LabelMode::Observable => "observable",
            LabelMode::True => "true",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetComposition {
    /// Fault classes as 6-bit labels.
    pub classes: Vec<String>,
    pub total_samples: usize,
    pub train_samples: usize,
    /// Independent series (each with its own random phase) per class.
    pub series_per_class: usize,
    /// Length of each series in fundamental periods.
    pub periods_per_series: usize,
    pub label_mode: LabelMode,
}

impl Default for DatasetComposition {
    fn default() -> Self {
        DatasetComposition {
            classes: FaultLabel::single_and_double_faults().iter().map(|l| l.to_string()).collect(),
            total_samples: 24_000,
            train_samples: 8_000,
            series_per_class: 4,
            periods_per_series: 5,
            label_mode: LabelMode::Observable,
        }
    }
}

impl DatasetComposition {
    pub fn class_labels(&self) -> Result<Vec<FaultLabel>> {
        let labels = self
            .classes
            .iter()
            .map(|s| s.parse::<FaultLabel>().map_err(|e| Error::InvalidConfig(format!("class {s:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let mut seen = labels.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != labels.len() {
            return Err(Error::InvalidConfig("duplicate class in dataset.classes".into()));
        }
        Ok(labels)
    }

    pub fn validate(&self) -> Result<()> {
        let classes = self.class_labels()?;
        if classes.is_empty() {
            return Err(Error::InvalidConfig("dataset.classes is empty".into()));
        }
        if self.series_per_class == 0 || self.periods_per_series == 0 {
            return Err(Error::InvalidConfig("series_per_class and periods_per_series must be >= 1".into()));
        }
        if self.total_samples < classes.len() * self.series_per_class {
            return Err(Error::InvalidConfig(format!(
                "total_samples {} cannot cover {} classes x {} series",
                self.total_samples,
                classes.len(),
                self.series_per_class
            )));
        }
        if self.train_samples > self.total_samples {
            return Err(Error::InvalidConfig(format!(
                "train_samples {} exceeds total_samples {}",
                self.train_samples, self.total_samples
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub sim: SimConfig,
    pub forest: ForestParams,
    pub diagnosis: DiagnosisConfig,
    pub dataset: DatasetComposition,
    pub features: FeatureSet,
    /// Folds used by the tree-count sweep.
    pub cv_folds: Option<usize>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
        ExperimentConfig::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.diagnosis.validate()?;
        self.dataset.validate()?;
        if self.forest.n_trees == 0 || self.forest.min_samples_leaf == 0 {
            return Err(Error::InvalidConfig("forest.n_trees and forest.min_samples_leaf must be >= 1".into()));
        }
        if self.cv_folds.is_some_and(|k| k < 2) {
            return Err(Error::InvalidConfig("cv_folds must be >= 2".into()));
        }
        if (self.sim.sample_rate - self.diagnosis.source_rate).abs() > 0.0 {
            return Err(Error::InvalidConfig(format!(
                "diagnosis.source_rate {} differs from sim.sample_rate {}",
                self.diagnosis.source_rate, self.sim.sample_rate
            )));
        }
        Ok(())
    }

    /// Set every seed in the configuration.
    pub fn with_seed(mut self, seed: u64) -> ExperimentConfig {
        self.sim.seed = seed;
        self.forest.seed = seed;
        self
    }

    pub fn folds(&self) -> usize {
        self.cv_folds.unwrap_or(5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        let cfg = ExperimentConfig::parse("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.dataset.class_labels().unwrap().len(), 22);
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = ExperimentConfig::default().with_seed(9);
        cfg.dataset.classes = vec!["000000".into(), "101000".into()];
        cfg.dataset.label_mode = LabelMode::True;
        cfg.diagnosis.phase_deg = Some(30.0);
        let text = cfg.to_toml().unwrap();
        assert_eq!(ExperimentConfig::parse(&text).unwrap(), cfg);
    }

    #[test]
    fn invalid_settings_are_rejected() {
        for text in [
            "[dataset]\nclasses = [\"1100\"]",
            "[dataset]\nclasses = []",
            "[dataset]\ntrain_samples = 30000",
            "[dataset]\nclasses = [\"000000\", \"000000\"]",
            "[sim]\nbogus = 1",
            "[forest]\nn_trees = 0",
            "[sim]\nsample_rate = 20000.0",
            "cv_folds = 1",
        ] {
            assert!(ExperimentConfig::parse(text).is_err(), "{text}");
        }
    }
}
