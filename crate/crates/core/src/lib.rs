//! Satellite-to-soundscape building blocks.
//!
//! The crate turns dense patch embeddings of an overhead image into a compact
//! five-dimensional geographic descriptor, plans text-to-audio candidate
//! generation from expanded captions, ranks generated candidates with a learned
//! geo-to-acoustic projection, and scores whole runs with the usual
//! distribution-level audio metrics.
//!
//! Module map:
//!
//! * [`tensor_io`]: `.npy` (f32, C order) tensors and scene manifests.
//! * [`geoattr`]: K-means over patch embeddings, per-cluster appearance
//!   statistics, heuristic pseudo-labels and area-weighted aggregation.
//! * [`classifier`]: Gini random forest with confidence-filtered retraining.
//! * [`hypothesis`]: caption expansion prompts, response parsing, candidate plans
//!   and the external generator client.
//! * [`alignment`]: PCA targets, the projection MLP, AdamW training and
//!   candidate selection.
//! * [`metrics`]: Fréchet distance, CLAP cosine, KL, overlap, Inception Score.
//! * [`synth`]: a procedurally generated world with a planted geo-to-audio map
//!   and the desk-scale benchmark built on it.

pub mod alignment;
pub mod classifier;
pub mod config;
pub mod geoattr;
pub mod hypothesis;
pub mod linalg;
pub mod metrics;
pub mod synth;
pub mod tensor_io;

mod rng;

pub use alignment::{CandidateScores, PcaModel, ProjectionModel, TrainConfig};
pub use classifier::{Forest, ForestConfig};
pub use geoattr::{GeoDescriptor, LandClass};
pub use linalg::Matrix;
pub use tensor_io::{SceneManifest, Tensor};
