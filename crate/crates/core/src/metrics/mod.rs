//! Distribution-level evaluation metrics.

mod report;

pub use report::{
    evaluate_run, read_selections, write_per_scene_csv, write_selections, MetricReport,
    RunInputs, SceneRow, SelectionRow, CLAP_AUDIO, CLAP_TEXT, CLASS_PROBS, FAD_FEATURES,
    FD_FEATURES, REPORT_SCHEMA_VERSION, SELECTIONS,
};

use crate::linalg::{cosine, sqrt_psd, symmetric_eigen, symmetrized, Matrix, SqrtError};

/// Smoothing added to every probability before taking logs.
pub const PROB_EPS: f64 = 1e-10;
const ROW_SUM_TOL: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch((usize, usize), (usize, usize)),
    #[error("zero-length vector")]
    ZeroVector,
    #[error("probability matrix has no rows")]
    EmptyMatrix,
    #[error("row {row} is not a distribution: {detail}")]
    NotADistribution { row: usize, detail: String },
    #[error(transparent)]
    Sqrt(#[from] SqrtError),
    #[error("missing or unreadable inputs:\n  {}", .0.join("\n  "))]
    MissingInput(Vec<String>),
    #[error("{0}")]
    Io(String),
}

/// Sample mean and unbiased, symmetrized covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    pub mean: Vec<f64>,
    pub cov: Matrix,
    pub n: usize,
}

impl GaussianStats {
    pub fn from_samples(x: &Matrix) -> Result<Self, MetricError> {
        let (n, d) = (x.rows(), x.cols());
        if n < 2 {
            return Err(MetricError::TooFewSamples { needed: 2, got: n });
        }
        let mean = x.column_means();
        let mut cov = Matrix::zeros(d, d);
        let mut centered = vec![0.0; d];
        for row in x.iter_rows() {
            for (c, (v, m)) in centered.iter_mut().zip(row.iter().zip(&mean)) {
                *c = v - m;
            }
            for i in 0..d {
                let ci = centered[i];
                if ci == 0.0 {
                    continue;
                }
                let out = cov.row_mut(i);
                for j in i..d {
                    out[j] += ci * centered[j];
                }
            }
        }
        let denom = (n - 1) as f64;
        for i in 0..d {
            for j in i..d {
                let v = cov[(i, j)] / denom;
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        Ok(Self {
            mean,
            cov: symmetrized(&cov),
            n,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Square root of a symmetric PSD matrix; see [`crate::linalg::sqrt_psd`].
pub fn matrix_sqrt_psd(a: &Matrix) -> Result<Matrix, MetricError> {
    Ok(sqrt_psd(a)?)
}

/// `‖μ₁−μ₂‖² + tr(Σ₁ + Σ₂ − 2 (Σ₁Σ₂)^{1/2})`, clamped at zero.
///
/// The cross term uses `tr((Σ₁Σ₂)^{1/2}) = tr((√Σ₁ Σ₂ √Σ₁)^{1/2})`, whose
/// argument is symmetric PSD, so only symmetric eigensolves are needed.
pub fn frechet_distance(a: &GaussianStats, b: &GaussianStats) -> Result<f64, MetricError> {
    if a.dim() != b.dim() {
        return Err(MetricError::DimensionMismatch(a.dim(), b.dim()));
    }
    let mean_term: f64 = a.mean.iter().zip(&b.mean).map(|(x, y)| (x - y) * (x - y)).sum();
    let s1 = sqrt_psd(&a.cov)?;
    let inner = symmetrized(&s1.matmul(&b.cov).matmul(&s1));
    let cross: f64 = symmetric_eigen(&inner)
        .values
        .iter()
        .map(|&l| l.max(0.0).sqrt())
        .sum();
    let d = mean_term + a.cov.trace() + b.cov.trace() - 2.0 * cross;
    Ok(d.max(0.0))
}

pub fn clap_similarity(text: &[f64], audio: &[f64]) -> Result<f64, MetricError> {
    if text.len() != audio.len() {
        return Err(MetricError::DimensionMismatch(text.len(), audio.len()));
    }
    cosine(text, audio).ok_or(MetricError::ZeroVector)
}

/// Mean of row-wise cosines between paired text and audio embeddings.
pub fn clap_similarity_batch(text: &Matrix, audio: &Matrix) -> Result<f64, MetricError> {
    if (text.rows(), text.cols()) != (audio.rows(), audio.cols()) {
        return Err(MetricError::ShapeMismatch(
            (text.rows(), text.cols()),
            (audio.rows(), audio.cols()),
        ));
    }
    if text.rows() == 0 {
        return Err(MetricError::EmptyMatrix);
    }
    let mut sum = 0.0;
    for i in 0..text.rows() {
        sum += clap_similarity(text.row(i), audio.row(i))?;
    }
    Ok(sum / text.rows() as f64)
}

/// Checks that every row is a probability distribution.
pub fn validate_probs(p: &Matrix) -> Result<(), MetricError> {
    for (i, row) in p.iter_rows().enumerate() {
        if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(MetricError::NotADistribution {
                row: i,
                detail: "negative or non-finite entry".into(),
            });
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > ROW_SUM_TOL {
            return Err(MetricError::NotADistribution {
                row: i,
                detail: format!("sums to {s}"),
            });
        }
    }
    Ok(())
}

fn smoothed(row: &[f64]) -> Vec<f64> {
    let s: f64 = row.iter().map(|v| v + PROB_EPS).sum();
    row.iter().map(|v| (v + PROB_EPS) / s).collect()
}

/// `Σ p ln(p / q)` after ε-smoothing both sides.
pub fn kl_row(p: &[f64], q: &[f64]) -> f64 {
    let p = smoothed(p);
    let q = smoothed(q);
    p.iter().zip(&q).map(|(a, b)| a * (a / b).ln()).sum::<f64>().max(0.0)
}

/// Paired KL: mean over rows of `KL(reference_i ‖ generated_i)`.
pub fn kl_divergence(generated: &Matrix, reference: &Matrix) -> Result<f64, MetricError> {
    same_shape(generated, reference)?;
    if generated.rows() == 0 {
        return Err(MetricError::EmptyMatrix);
    }
    validate_probs(generated)?;
    validate_probs(reference)?;
    let total: f64 = (0..generated.rows())
        .map(|i| kl_row(reference.row(i), generated.row(i)))
        .sum();
    Ok(total / generated.rows() as f64)
}

/// Histogram intersection of the two mean class distributions.
pub fn overlap(generated: &Matrix, reference: &Matrix) -> Result<f64, MetricError> {
    if generated.cols() != reference.cols() {
        return Err(MetricError::DimensionMismatch(generated.cols(), reference.cols()));
    }
    if generated.rows() == 0 || reference.rows() == 0 {
        return Err(MetricError::EmptyMatrix);
    }
    validate_probs(generated)?;
    validate_probs(reference)?;
    let p = generated.column_means();
    let q = reference.column_means();
    Ok(p.iter().zip(&q).map(|(a, b)| a.min(*b)).sum::<f64>().clamp(0.0, 1.0))
}

/// `exp(mean_i KL(p_i ‖ p̄))` over a single split.
pub fn inception_score(probs: &Matrix) -> Result<f64, MetricError> {
    if probs.rows() == 0 {
        return Err(MetricError::EmptyMatrix);
    }
    validate_probs(probs)?;
    let marginal = probs.column_means();
    let mean_kl: f64 = probs
        .iter_rows()
        .map(|row| kl_row(row, &marginal))
        .sum::<f64>()
        / probs.rows() as f64;
    Ok(mean_kl.exp())
}

fn same_shape(a: &Matrix, b: &Matrix) -> Result<(), MetricError> {
    if (a.rows(), a.cols()) != (b.rows(), b.cols()) {
        return Err(MetricError::ShapeMismatch((a.rows(), a.cols()), (b.rows(), b.cols())));
    }
    Ok(())
}

/// Headline objective scores reported for the full method on the real
/// benchmark. They need the proprietary dataset and pretrained generators, so
/// they are kept for reference and never asserted.
pub mod reference_scores {
    pub const FAD: f64 = 1.765;
    pub const FD: f64 = 12.060;
    pub const CLAP: f64 = 0.449;
    pub const KL: f64 = 0.098;
    pub const OVL: f64 = 0.847;
    pub const IS: f64 = 2.480;
}
