//! Train, drop unreliable pseudo-labels, retrain.

use super::forest::{argmax, train_with_bags, Forest};
use super::{ClassifierError, ForestConfig};
use crate::linalg::Matrix;

#[derive(Debug, Clone)]
pub struct TwoStageOutcome {
    /// Stage-2 forest, or the stage-1 forest when nothing survived filtering.
    pub forest: Forest,
    /// Samples kept for stage 2, ascending.
    pub kept: Vec<usize>,
    /// Stage-1 confidence (max class probability) per sample.
    pub confidence: Vec<f64>,
    /// Stage-1 predicted class per sample.
    pub predicted: Vec<usize>,
    /// Set when the kept set was empty and stage 1 was returned.
    pub fell_back: bool,
}

/// Stage 1 fits on everything. A sample's confidence is the max class
/// probability of its out-of-bag prediction (full forest when no tree left it
/// out). Samples whose confidence reaches `cfg.confidence_threshold` and whose
/// prediction agrees with the pseudo-label are kept; stage 2 refits on them
/// with tree seeds offset by `n_trees`.
pub fn two_stage_train(
    x: &Matrix,
    y: &[usize],
    class_count: usize,
    cfg: &ForestConfig,
) -> Result<TwoStageOutcome, ClassifierError> {
    let stage1 = train_with_bags(x, y, class_count, cfg, cfg.seed)?;
    let (confidence, predicted) = oob_confidence(x, &stage1.forest, &stage1.in_bag);
    let kept = filter_confident(&confidence, &predicted, y, cfg.confidence_threshold);

    if kept.is_empty() {
        log::warn!(
            "two-stage training: no sample reached confidence {}, keeping the stage-1 forest",
            cfg.confidence_threshold
        );
        return Ok(TwoStageOutcome {
            forest: stage1.forest,
            kept,
            confidence,
            predicted,
            fell_back: true,
        });
    }

    let x2 = x.select_rows(&kept);
    let y2: Vec<usize> = kept.iter().map(|&i| y[i]).collect();
    let stage2_seed = cfg.seed.wrapping_add(cfg.n_trees as u64);
    let stage2 = train_with_bags(&x2, &y2, class_count, cfg, stage2_seed)?;
    Ok(TwoStageOutcome {
        forest: stage2.forest,
        kept,
        confidence,
        predicted,
        fell_back: false,
    })
}

pub(crate) fn oob_confidence(
    x: &Matrix,
    forest: &Forest,
    in_bag: &[Vec<bool>],
) -> (Vec<f64>, Vec<usize>) {
    (0..x.rows())
        .map(|i| {
            let row = x.row(i);
            let oob = forest
                .trees
                .iter()
                .zip(in_bag)
                .filter(|(_, bag)| !bag[i])
                .map(|(t, _)| t);
            let has_oob = in_bag.iter().any(|bag| !bag[i]);
            let p = if has_oob {
                forest.mean_over(row, oob)
            } else {
                forest.mean_over(row, forest.trees.iter())
            };
            let c = argmax(&p);
            (p[c], c)
        })
        .unzip()
}

pub(crate) fn filter_confident(
    confidence: &[f64],
    predicted: &[usize],
    labels: &[usize],
    threshold: f64,
) -> Vec<usize> {
    (0..labels.len())
        .filter(|&i| confidence[i] >= threshold && predicted[i] == labels[i])
        .collect()
}
