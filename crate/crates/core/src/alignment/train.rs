use serde::{Deserialize, Serialize};

use super::mlp::{analytic_gradients, DropoutMasks, Mlp};
use super::pca::fit_pca;
use super::{AlignError, ProjectionModel};
use crate::linalg::{cosine, Matrix};
use crate::rng::{permutation, seeded};

/// Per-feature z-scoring fitted on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    /// Population standard deviation, floored at [`Normalizer::STD_FLOOR`].
    pub std: Vec<f64>,
}

impl Normalizer {
    pub const STD_FLOOR: f64 = 1e-8;

    pub fn fit(x: &Matrix) -> Self {
        let mean = x.column_means();
        let n = x.rows().max(1) as f64;
        let std = (0..x.cols())
            .map(|j| {
                let var = x.iter_rows().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
                var.sqrt().max(Self::STD_FLOOR)
            })
            .collect();
        Self { mean, std }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub val_fraction: f64,
    pub seed: u64,
    pub hidden: usize,
    pub dropout: f64,
    pub pca_dims: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            weight_decay: 1e-4,
            batch_size: 64,
            max_epochs: 80,
            patience: 12,
            val_fraction: 0.15,
            seed: 42,
            hidden: 256,
            dropout: 0.1,
            pca_dims: 32,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), AlignError> {
        let positive = [self.lr, self.eps];
        if positive.iter().any(|v| !(*v > 0.0))
            || self.weight_decay < 0.0
            || self.batch_size == 0
            || self.max_epochs == 0
            || self.patience == 0
            || self.hidden == 0
            || self.pca_dims == 0
        {
            return Err(AlignError::InvalidConfig(
                "rates, sizes and epoch counts must be positive".into(),
            ));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(AlignError::InvalidConfig("val_fraction must lie in (0, 1)".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(AlignError::InvalidConfig("dropout must lie in [0, 1)".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(AlignError::InvalidConfig("betas must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// One line of the training log. `loss = 1 − cosine` for both splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_cosine: f64,
    pub val_loss: f64,
    pub val_cosine: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose weights were kept (lowest validation loss).
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub best_val_cosine: f64,
    pub stopped_early: bool,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
}

/// Seeded Fisher–Yates shuffle; the first `ceil(n · fraction)` indices
/// (at least one, leaving at least one) are the validation split.
pub fn split_indices(n: usize, val_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let perm = permutation(n, &mut seeded(seed));
    let n_val = ((n as f64 * val_fraction).ceil() as usize).clamp(1, n.saturating_sub(1).max(1));
    let (val, train) = perm.split_at(n_val.min(n));
    (train.to_vec(), val.to_vec())
}

fn unit_rows(m: &Matrix) -> Result<Vec<Vec<f64>>, AlignError> {
    m.iter_rows()
        .enumerate()
        .map(|(i, r)| {
            let n = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n == 0.0 || !n.is_finite() {
                return Err(AlignError::ZeroVector(format!("target row {i}")));
            }
            Ok(r.iter().map(|v| v / n).collect())
        })
        .collect()
}

/// Mean cosine between eval-mode outputs and targets, plus the matching loss.
fn evaluate(mlp: &Mlp, x: &[Vec<f64>], t: &[Vec<f64>]) -> (f64, f64) {
    let mut loss = 0.0;
    let mut cos = 0.0;
    for (xi, ti) in x.iter().zip(t) {
        let c = cosine(&mlp.forward(xi, None).output, ti).unwrap_or(0.0);
        loss += 1.0 - c;
        cos += c;
    }
    let n = x.len().max(1) as f64;
    (loss / n, cos / n)
}

struct AdamW {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl AdamW {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], cfg: &TrainConfig) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t);
        let bc2 = 1.0 - cfg.beta2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *p -= cfg.lr * cfg.weight_decay * *p;
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            *p -= cfg.lr * (*m / bc1) / ((*v / bc2).sqrt() + cfg.eps);
        }
    }
}

/// Trained network plus input normalizer, without the target PCA.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedProjection {
    pub normalizer: Normalizer,
    pub mlp: Mlp,
}

/// Minimizes the mean cosine loss between normalized network outputs and the
/// (re-normalized) targets with AdamW, keeping the weights of the epoch with
/// the lowest validation loss.
pub fn train_projection(
    geo: &Matrix,
    targets: &Matrix,
    cfg: &TrainConfig,
) -> Result<(TrainedProjection, TrainHistory), AlignError> {
    cfg.validate()?;
    let n = geo.rows();
    if n < 2 {
        return Err(AlignError::EmptyDataset(n));
    }
    if targets.rows() != n {
        return Err(AlignError::InvalidInput(format!(
            "{n} geo rows but {} target rows",
            targets.rows()
        )));
    }
    let (train_idx, val_idx) = split_indices(n, cfg.val_fraction, cfg.seed);
    let normalizer = Normalizer::fit(&geo.select_rows(&train_idx));
    let x: Vec<Vec<f64>> = geo.iter_rows().map(|r| normalizer.apply(r)).collect();
    let t = unit_rows(targets)?;
    let gather = |idx: &[usize], src: &[Vec<f64>]| idx.iter().map(|&i| src[i].clone()).collect::<Vec<_>>();
    let (val_x, val_t) = (gather(&val_idx, &x), gather(&val_idx, &t));

    let mut rng = seeded(cfg.seed.wrapping_add(1));
    let sizes = [geo.cols(), cfg.hidden, cfg.hidden, targets.cols()];
    let mut mlp = Mlp::kaiming_uniform(&sizes, cfg.dropout, &mut rng);
    let mut opt = AdamW::new(mlp.params.len());

    let mut epochs = Vec::new();
    let mut best = (f64::INFINITY, 0.0, 0usize, mlp.params.clone());
    let mut since_best = 0;
    let mut stopped_early = false;
    for epoch in 1..=cfg.max_epochs {
        let order = permutation(train_idx.len(), &mut rng);
        let (mut loss_sum, mut cos_sum) = (0.0, 0.0);
        for chunk in order.chunks(cfg.batch_size) {
            let bx: Vec<Vec<f64>> = chunk.iter().map(|&k| x[train_idx[k]].clone()).collect();
            let bt: Vec<Vec<f64>> = chunk.iter().map(|&k| t[train_idx[k]].clone()).collect();
            let masks: Vec<DropoutMasks> = chunk.iter().map(|_| mlp.sample_masks(&mut rng)).collect();
            let (loss, cos, grad) = analytic_gradients(&mlp, &bx, &bt, Some(&masks));
            loss_sum += loss * chunk.len() as f64;
            cos_sum += cos * chunk.len() as f64;
            opt.step(&mut mlp.params, &grad, cfg);
        }
        let m = train_idx.len() as f64;
        let (val_loss, val_cosine) = evaluate(&mlp, &val_x, &val_t);
        epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / m,
            train_cosine: cos_sum / m,
            val_loss,
            val_cosine,
        });
        if val_loss < best.0 {
            best = (val_loss, val_cosine, epoch, mlp.params.clone());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                stopped_early = epoch < cfg.max_epochs;
                break;
            }
        }
    }
    mlp.params = best.3;
    Ok((
        TrainedProjection { normalizer, mlp },
        TrainHistory {
            epochs,
            best_epoch: best.2,
            best_val_loss: best.0,
            best_val_cosine: best.1,
            stopped_early,
            train_indices: train_idx,
            val_indices: val_idx,
        },
    ))
}

/// Full alignment fit from raw audio embeddings: PCA on the training split,
/// PCA projections as targets, then [`train_projection`] on the same split.
pub fn train_alignment(
    geo: &Matrix,
    audio: &Matrix,
    cfg: &TrainConfig,
) -> Result<(ProjectionModel, TrainHistory), AlignError> {
    cfg.validate()?;
    if geo.rows() != audio.rows() {
        return Err(AlignError::InvalidInput(format!(
            "{} geo rows but {} audio rows",
            geo.rows(),
            audio.rows()
        )));
    }
    if geo.rows() < 2 {
        return Err(AlignError::EmptyDataset(geo.rows()));
    }
    let (train_idx, _) = split_indices(geo.rows(), cfg.val_fraction, cfg.seed);
    let pca = fit_pca(&audio.select_rows(&train_idx), cfg.pca_dims)?;
    let targets = pca.project_rows(audio)?;
    let (trained, history) = train_projection(geo, &targets, cfg)?;
    Ok((
        ProjectionModel {
            normalizer: trained.normalizer,
            mlp: trained.mlp,
            pca,
        },
        history,
    ))
}
