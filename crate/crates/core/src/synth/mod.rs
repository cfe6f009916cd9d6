//! Synthetic world with a planted geo-to-audio map and the desk-scale
//! benchmark that exercises the whole pipeline on it.

mod bench;
mod world;

pub use bench::{
    run_desk_benchmark, Arm, ArmReport, BenchConfig, BenchmarkArtifacts, BenchmarkReport,
    ExtractionSummary, SweepPoint, BENCH_REPORT_VERSION, FOREST_FILE, MODEL_FILE, REPORT_FILE,
};
pub use world::{
    generate_world, paint_pixel, write_world, SceneAudio, SynthScene, SynthWorldConfig, TruthRow,
    World, WorldFiles, AUDIO_DIM, DESCRIPTOR_DIM, MANIFEST_FILE, MAX_SWEEP_CANDIDATES,
    REFERENCE_AUDIO_FILE, TRUTH_FILE,
};

use crate::alignment::AlignError;
use crate::classifier::ClassifierError;
use crate::geoattr::GeoAttrError;
use crate::tensor_io::{ManifestError, TensorError};

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    GeoAttr(#[from] GeoAttrError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
