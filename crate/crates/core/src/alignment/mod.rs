//! Geo-acoustic alignment: a small network maps geo descriptors into the
//! PCA-reduced audio embedding space, where candidates are ranked by cosine.

mod mlp;
mod model_io;
mod pca;
mod select;
mod train;

pub use mlp::{analytic_gradients, gelu, gelu_grad, DropoutMasks, ForwardCache, Mlp};
pub use model_io::{load_model, read_model, save_model, write_model, MODEL_MAGIC, MODEL_VERSION};
pub use pca::{fit_pca, PcaModel};
pub use select::{select_candidate, CandidateScores};
pub use train::{
    split_indices, train_alignment, train_projection, EpochRecord, Normalizer, TrainConfig,
    TrainHistory, TrainedProjection,
};

use crate::linalg::{cosine, Matrix};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AlignError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("need at least 2 paired samples, got {0}")]
    EmptyDataset(usize),
    #[error("zero-length vector: {0}")]
    ZeroVector(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("no candidates to select from")]
    EmptyCandidateSet,
    #[error("model format: {0}")]
    ModelFormat(String),
    #[error("io: {0}")]
    Io(String),
}

/// `1 − cos(a, b)`.
pub fn cosine_loss(a: &[f64], b: &[f64]) -> Result<f64, AlignError> {
    if a.len() != b.len() {
        return Err(AlignError::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    cosine(a, b)
        .map(|c| 1.0 - c)
        .ok_or_else(|| AlignError::ZeroVector("cosine loss operand".into()))
}

/// Everything needed to embed a geo descriptor and compare it with raw audio
/// embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionModel {
    pub normalizer: Normalizer,
    pub mlp: Mlp,
    pub pca: PcaModel,
}

impl ProjectionModel {
    pub fn geo_dim(&self) -> usize {
        self.mlp.sizes[0]
    }

    pub fn embed_dim(&self) -> usize {
        *self.mlp.sizes.last().unwrap()
    }

    pub(crate) fn check(&self) -> Result<(), AlignError> {
        let bad = |m: &str| Err(AlignError::ModelFormat(m.to_string()));
        if self.normalizer.mean.len() != self.geo_dim() || self.normalizer.std.len() != self.geo_dim() {
            return bad("normalizer width does not match network input");
        }
        if self.pca.dims() != self.embed_dim() {
            return bad("PCA dimension does not match network output");
        }
        if self.pca.mean.len() != self.pca.input_dim() || self.pca.explained_variance.len() != self.pca.dims() {
            return bad("inconsistent PCA arrays");
        }
        Ok(())
    }

    /// Unit-length embedding of one geo descriptor (evaluation mode).
    pub fn embed(&self, geo: &[f64]) -> Result<Vec<f64>, AlignError> {
        if geo.len() != self.geo_dim() {
            return Err(AlignError::DimensionMismatch {
                expected: self.geo_dim(),
                actual: geo.len(),
            });
        }
        Ok(self.mlp.forward(&self.normalizer.apply(geo), None).output)
    }

    /// Projects raw candidate embeddings through the PCA and ranks them
    /// against the embedded descriptor.
    pub fn score_candidates(&self, geo: &[f64], raw_candidates: &Matrix) -> Result<CandidateScores, AlignError> {
        let g = self.embed(geo)?;
        let projected = self.pca.project_rows(raw_candidates)?;
        select_candidate(&g, &projected)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    fn tiny_model(seed: u64) -> ProjectionModel {
        let mut rng = seeded(seed);
        let audio = Matrix::from_vec(20, 6, (0..120).map(|_| rng.random_range(-1.0..1.0)).collect());
        ProjectionModel {
            normalizer: Normalizer {
                mean: vec![0.1, -0.2, 0.0],
                std: vec![1.0, 2.0, 0.5],
            },
            mlp: Mlp::kaiming_uniform(&[3, 8, 8, 4], 0.1, &mut rng),
            pca: fit_pca(&audio, 4).unwrap(),
        }
    }

    #[test]
    fn cosine_loss_values() {
        assert!((cosine_loss(&[1.0, 0.0], &[1.0, 0.0]).unwrap()).abs() < 1e-15);
        assert!((cosine_loss(&[1.0, 0.0], &[0.0, 3.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((cosine_loss(&[1.0, 1.0], &[-2.0, -2.0]).unwrap() - 2.0).abs() < 1e-15);
        assert!(cosine_loss(&[0.0], &[1.0]).is_err());
        assert!(cosine_loss(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn embed_is_unit_and_checks_width() {
        let m = tiny_model(3);
        let e = m.embed(&[0.3, 0.1, -0.4]).unwrap();
        assert_eq!(e.len(), 4);
        assert!((e.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(matches!(m.embed(&[0.0; 2]), Err(AlignError::DimensionMismatch { .. })));
    }

    #[test]
    fn model_file_roundtrip() {
        let m = tiny_model(9);
        let mut buf = Vec::new();
        write_model(&mut buf, &m).unwrap();
        assert_eq!(&buf[..8], MODEL_MAGIC);
        let back = read_model(&mut buf.as_slice()).unwrap();
        assert_eq!(back, m);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save_model(&path, &m).unwrap();
        assert_eq!(load_model(&path).unwrap(), m);
    }

    #[test]
    fn model_file_rejects_corruption() {
        let m = tiny_model(4);
        let mut buf = Vec::new();
        write_model(&mut buf, &m).unwrap();
        let mut bad_magic = buf.clone();
        bad_magic[0] = b'X';
        assert!(matches!(read_model(&mut bad_magic.as_slice()), Err(AlignError::ModelFormat(_))));
        let truncated = &buf[..buf.len() - 5];
        assert!(read_model(&mut &truncated[..]).is_err());
        let mut trailing = buf.clone();
        trailing.push(0);
        assert!(read_model(&mut trailing.as_slice()).is_err());
        let mut version = buf;
        version[8] = 99;
        assert!(read_model(&mut version.as_slice()).is_err());
    }

    #[test]
    fn score_candidates_projects_first() {
        let m = tiny_model(5);
        let mut rng = seeded(6);
        let raw = Matrix::from_vec(4, 6, (0..24).map(|_| rng.random_range(-1.0..1.0)).collect());
        let g = [0.5, -0.5, 0.2];
        let got = m.score_candidates(&g, &raw).unwrap();
        let direct = select_candidate(&m.embed(&g).unwrap(), &m.pca.project_rows(&raw).unwrap()).unwrap();
        assert_eq!(got, direct);
        assert!(m.score_candidates(&g, &Matrix::zeros(1, 5)).is_err());
    }
}
