//! Random forest over cluster features, with confidence-filtered retraining.

mod forest;
mod tree;
mod two_stage;

pub use forest::{train_forest, Forest, FOREST_FORMAT_VERSION};
pub use tree::{best_split, gini, DecisionTree, Node, Split};
pub use two_stage::{two_stage_train, TwoStageOutcome};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features drawn (without replacement) at every node.
    pub features_per_split: usize,
    pub confidence_threshold: f64,
    /// Carried here with the other forest settings but applied upstream, when
    /// small clusters are dropped before classification.
    pub min_area_ratio: f64,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 300,
            max_depth: None,
            min_samples_leaf: 1,
            // floor(sqrt(1033))
            features_per_split: 32,
            confidence_threshold: 0.70,
            min_area_ratio: 0.01,
            seed: 42,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        if self.n_trees == 0 {
            return Err(ClassifierError::InvalidConfig("n_trees must be >= 1".into()));
        }
        if self.min_samples_leaf == 0 || self.features_per_split == 0 {
            return Err(ClassifierError::InvalidConfig(
                "min_samples_leaf and features_per_split must be >= 1".into(),
            ));
        }
        for (name, v) in [
            ("confidence_threshold", self.confidence_threshold),
            ("min_area_ratio", self.min_area_ratio),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ClassifierError::InvalidConfig(format!("{name} must lie in [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ClassifierError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("{features} feature rows but {labels} labels")]
    LabelCountMismatch { features: usize, labels: usize },
    #[error("label {label} is outside 0..{class_count}")]
    LabelOutOfRange { label: usize, class_count: usize },
    #[error("expected {expected} features, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid forest config: {0}")]
    InvalidConfig(String),
    #[error("forest file: {0}")]
    Format(String),
}
