use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, DecisionTree, TreeParams};
use super::{ClassifierError, ForestConfig};
use crate::linalg::Matrix;
use crate::rng::seeded;

pub const FOREST_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub format_version: u32,
    pub class_count: usize,
    pub feature_count: usize,
    pub trees: Vec<DecisionTree>,
}

/// A trained forest plus which samples each tree saw.
pub(crate) struct TrainedForest {
    pub forest: Forest,
    pub in_bag: Vec<Vec<bool>>,
}

/// Bootstrap-aggregated Gini trees. Tree `t` draws its bootstrap sample and
/// feature subsets from a generator seeded with `cfg.seed + t`.
pub fn train_forest(
    x: &Matrix,
    y: &[usize],
    class_count: usize,
    cfg: &ForestConfig,
) -> Result<Forest, ClassifierError> {
    train_with_bags(x, y, class_count, cfg, cfg.seed).map(|t| t.forest)
}

pub(crate) fn train_with_bags(
    x: &Matrix,
    y: &[usize],
    class_count: usize,
    cfg: &ForestConfig,
    seed: u64,
) -> Result<TrainedForest, ClassifierError> {
    cfg.validate()?;
    let n = x.rows();
    if n == 0 {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    if y.len() != n {
        return Err(ClassifierError::LabelCountMismatch {
            features: n,
            labels: y.len(),
        });
    }
    if let Some(&label) = y.iter().find(|&&l| l >= class_count) {
        return Err(ClassifierError::LabelOutOfRange { label, class_count });
    }
    if n == 1 {
        log::warn!("random forest trained on a single sample; every tree is one leaf");
    }
    let params = TreeParams {
        max_depth: cfg.max_depth,
        min_samples_leaf: cfg.min_samples_leaf,
        features_per_split: cfg.features_per_split,
        class_count,
    };

    let build = |t: usize| {
        let mut rng = seeded(seed.wrapping_add(t as u64));
        let mut in_bag = vec![false; n];
        let sample: Vec<usize> = (0..n)
            .map(|_| {
                let i = rng.random_range(0..n);
                in_bag[i] = true;
                i
            })
            .collect();
        (grow_tree(x, y, sample, &params, &mut rng), in_bag)
    };

    #[cfg(feature = "parallel")]
    let built: Vec<(DecisionTree, Vec<bool>)> = {
        use rayon::prelude::*;
        (0..cfg.n_trees).into_par_iter().map(build).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let built: Vec<(DecisionTree, Vec<bool>)> = (0..cfg.n_trees).map(build).collect();

    let (trees, in_bag) = built.into_iter().unzip();
    Ok(TrainedForest {
        forest: Forest {
            format_version: FOREST_FORMAT_VERSION,
            class_count,
            feature_count: x.cols(),
            trees,
        },
        in_bag,
    })
}

impl Forest {
    /// Mean of the per-tree leaf distributions.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>, ClassifierError> {
        if x.len() != self.feature_count {
            return Err(ClassifierError::DimensionMismatch {
                expected: self.feature_count,
                actual: x.len(),
            });
        }
        Ok(self.mean_over(x, self.trees.iter()))
    }

    pub(crate) fn mean_over<'a>(
        &'a self,
        x: &[f64],
        trees: impl Iterator<Item = &'a DecisionTree>,
    ) -> Vec<f64> {
        let mut acc = vec![0.0; self.class_count];
        let mut used = 0usize;
        for tree in trees {
            used += 1;
            for (a, p) in acc.iter_mut().zip(tree.leaf_probs(x)) {
                *a += p;
            }
        }
        let used = used.max(1) as f64;
        acc.iter_mut().for_each(|a| *a /= used);
        acc
    }

    /// Argmax of [`Forest::predict_proba`], lowest class on ties.
    pub fn predict(&self, x: &[f64]) -> Result<usize, ClassifierError> {
        Ok(argmax(&self.predict_proba(x)?))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("forest serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, ClassifierError> {
        let f: Forest = serde_json::from_str(s).map_err(|e| ClassifierError::Format(e.to_string()))?;
        if f.format_version != FOREST_FORMAT_VERSION {
            return Err(ClassifierError::Format(format!(
                "unsupported forest format version {}",
                f.format_version
            )));
        }
        Ok(f)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ClassifierError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ClassifierError::Format(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

pub(crate) fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}
