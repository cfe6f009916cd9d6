//! Whole-pipeline settings, as loaded from a TOML file by the CLI.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::alignment::TrainConfig;
use crate::classifier::ForestConfig;
use crate::geoattr::GeoAttrConfig;
use crate::hypothesis::HypothesisMode;
use crate::synth::BenchConfig;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_CANDIDATES: usize = 6;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub manifest: Option<PathBuf>,
    pub forest: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CandidateConfig {
    /// Candidates generated per scene.
    pub count: usize,
    pub mode: HypothesisMode,
}

impl Default for CandidateConfig {
    fn default() -> Self {
        Self {
            count: DEFAULT_CANDIDATES,
            mode: HypothesisMode::Ours,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Copied into every seeded component by [`PipelineConfig::apply_seed`].
    pub seed: u64,
    pub paths: PathsConfig,
    pub geoattr: GeoAttrConfig,
    pub forest: ForestConfig,
    pub train: TrainConfig,
    pub candidates: CandidateConfig,
    pub synth: BenchConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let mut cfg = Self {
            seed: DEFAULT_SEED,
            paths: PathsConfig::default(),
            geoattr: GeoAttrConfig::default(),
            forest: ForestConfig::default(),
            train: TrainConfig::default(),
            candidates: CandidateConfig::default(),
            synth: BenchConfig::default(),
        };
        cfg.apply_seed();
        cfg
    }
}

impl PipelineConfig {
    pub fn apply_seed(&mut self) {
        let seed = self.seed;
        self.geoattr.kmeans.seed = seed;
        self.forest.seed = seed;
        self.train.seed = seed;
        self.synth.reseed(seed);
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.apply_seed();
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = PipelineConfig::default();
        assert_eq!(c.geoattr.kmeans.k, 8);
        assert_eq!(c.geoattr.min_area_ratio, 0.01);
        assert_eq!(c.forest.n_trees, 300);
        assert_eq!(c.forest.confidence_threshold, 0.70);
        assert_eq!(c.train.pca_dims, 32);
        assert_eq!(c.train.lr, 1e-3);
        assert_eq!(c.train.weight_decay, 1e-4);
        assert_eq!(c.train.batch_size, 64);
        assert_eq!(c.train.max_epochs, 80);
        assert_eq!(c.train.patience, 12);
        assert_eq!(c.train.val_fraction, 0.15);
        assert_eq!(c.candidates.count, 6);
        assert_eq!(c.seed, 42);
    }

    #[test]
    fn seed_reaches_every_component() {
        let c = PipelineConfig::default().with_seed(7);
        assert_eq!(c.geoattr.kmeans.seed, 7);
        assert_eq!(c.forest.seed, 7);
        assert_eq!(c.train.seed, 7);
        assert_eq!(c.synth.world.seed, 7);
        assert_eq!(c.synth.train.seed, 7);
    }

    #[test]
    fn json_roundtrip() {
        let c = PipelineConfig::default().with_seed(3);
        let back: PipelineConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
