//! End-to-end desk benchmark on a synthetic world: extract descriptors with
//! the real attribute pipeline, train the projection under four input arms and
//! sweep the candidate count.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::world::{SceneAudio, SynthWorldConfig, World, AUDIO_DIM, DESCRIPTOR_DIM};
use super::SynthError;
use crate::alignment::{
    save_model, train_alignment, EpochRecord, ProjectionModel, TrainConfig, TrainHistory,
};
use crate::classifier::{two_stage_train, Forest, ForestConfig};
use crate::geoattr::{
    cluster_features, descriptor_from_clusters, pseudo_label, ClusterFeature, GeoAttrConfig,
    CLASS_COUNT,
};
use crate::linalg::Matrix;
use crate::rng::{derived, permutation};

pub const BENCH_REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub world: SynthWorldConfig,
    pub geoattr: GeoAttrConfig,
    pub forest: ForestConfig,
    pub train: TrainConfig,
    /// Leading scenes whose clusters train the land-cover forest.
    pub forest_scenes: usize,
    pub sweep: Vec<usize>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            world: SynthWorldConfig::default(),
            geoattr: GeoAttrConfig::default(),
            forest: ForestConfig {
                n_trees: 100,
                ..ForestConfig::default()
            },
            train: TrainConfig::default(),
            forest_scenes: 150,
            sweep: vec![1, 3, 6, 10],
        }
    }
}

impl BenchConfig {
    /// Points every seeded component at `seed`.
    pub fn reseed(&mut self, seed: u64) {
        self.world.seed = seed;
        self.geoattr.kmeans.seed = seed;
        self.forest.seed = seed;
        self.train.seed = seed;
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        self.world.validate()?;
        self.forest.validate()?;
        self.train.validate()?;
        if self.world.n_scenes < 2 {
            return Err(SynthError::InvalidConfig("the benchmark needs at least two scenes".into()));
        }
        if self.sweep.is_empty() || self.sweep.contains(&0) {
            return Err(SynthError::InvalidConfig("sweep must list positive candidate counts".into()));
        }
        if self.forest_scenes == 0 {
            return Err(SynthError::InvalidConfig("forest_scenes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    /// Extracted descriptors as they are.
    FullGeo,
    /// Only the road proportion; the other inputs are zeroed.
    SingleRoad,
    ZeroInput,
    /// Descriptors permuted across scenes.
    ShuffledGeo,
}

impl Arm {
    pub const ALL: [Arm; 4] = [Arm::FullGeo, Arm::SingleRoad, Arm::ZeroInput, Arm::ShuffledGeo];

    pub fn name(self) -> &'static str {
        match self {
            Arm::FullGeo => "full_geo",
            Arm::SingleRoad => "single_road",
            Arm::ZeroInput => "zero_input",
            Arm::ShuffledGeo => "shuffled_geo",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n: usize,
    /// Fraction of validation scenes whose selected candidate is the
    /// compatible one.
    pub selection_accuracy: f64,
    pub geoalign_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub arm: Arm,
    pub val_cosine: f64,
    pub val_loss: f64,
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub sweep: Vec<SweepPoint>,
    pub history: Vec<EpochRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionSummary {
    pub forest_samples: usize,
    pub forest_kept: usize,
    pub forest_fell_back: bool,
    /// Mean absolute error between extracted and true descriptors, averaged
    /// over scenes and the five components.
    pub descriptor_mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub schema_version: u32,
    pub seed: u64,
    pub n_scenes: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub noise_sigma: f64,
    pub extraction: ExtractionSummary,
    pub arms: Vec<ArmReport>,
}

impl BenchmarkReport {
    pub fn arm(&self, arm: Arm) -> Option<&ArmReport> {
        self.arms.iter().find(|a| a.arm == arm)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Report plus the full-geo model and the forest it relied on.
#[derive(Debug, Clone)]
pub struct BenchmarkArtifacts {
    pub report: BenchmarkReport,
    pub model: ProjectionModel,
    pub forest: Forest,
    /// Extracted descriptors, one row per scene.
    pub descriptors: Matrix,
}

pub const REPORT_FILE: &str = "report.json";
pub const MODEL_FILE: &str = "model.bin";
pub const FOREST_FILE: &str = "forest.json";

impl BenchmarkArtifacts {
    /// Writes `report.json`, `model.bin` and `forest.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<(), SynthError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(REPORT_FILE), self.report.to_json())?;
        save_model(dir.join(MODEL_FILE), &self.model)?;
        self.forest.save(dir.join(FOREST_FILE))?;
        Ok(())
    }
}

struct SceneWork {
    clusters: Vec<ClusterFeature>,
    audio: SceneAudio,
}

fn extract_clusters(world: &World, cfg: &BenchConfig) -> Result<Vec<SceneWork>, SynthError> {
    let one = |i: usize| -> Result<SceneWork, SynthError> {
        let scene = world.scene(i);
        let clusters = cluster_features(&scene.image, &scene.patches, &cfg.geoattr)?;
        Ok(SceneWork {
            clusters,
            audio: scene.audio,
        })
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..world.len()).into_par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..world.len()).map(one).collect()
    }
}

fn arm_inputs(arm: Arm, geo: &Matrix, seed: u64) -> Matrix {
    match arm {
        Arm::FullGeo => geo.clone(),
        Arm::SingleRoad => {
            let mut m = Matrix::zeros(geo.rows(), geo.cols());
            for i in 0..geo.rows() {
                m[(i, 3)] = geo[(i, 3)];
            }
            m
        }
        Arm::ZeroInput => Matrix::zeros(geo.rows(), geo.cols()),
        Arm::ShuffledGeo => {
            let perm = permutation(geo.rows(), &mut derived(seed, 0x5348_5546));
            geo.select_rows(&perm)
        }
    }
}

fn sweep(
    model: &ProjectionModel,
    inputs: &Matrix,
    audio: &[SceneAudio],
    val: &[usize],
    counts: &[usize],
) -> Result<Vec<SweepPoint>, SynthError> {
    counts
        .iter()
        .map(|&n| {
            let (mut hits, mut geoalign) = (0usize, 0.0);
            for &i in val {
                let (cands, slot) = audio[i].candidates(n);
                let s = model.score_candidates(inputs.row(i), &cands)?;
                hits += (s.selected == slot) as usize;
                geoalign += s.geoalign;
            }
            let m = val.len().max(1) as f64;
            Ok(SweepPoint {
                n,
                selection_accuracy: hits as f64 / m,
                geoalign_mean: geoalign / m,
            })
        })
        .collect()
}

pub fn run_desk_benchmark(cfg: &BenchConfig) -> Result<BenchmarkArtifacts, SynthError> {
    cfg.validate()?;
    let max_n = cfg.sweep.iter().copied().max().unwrap_or(1);
    let world = World::with_pool(cfg.world.clone(), max_n)?;
    if max_n > world.distractor_pool() + 1 {
        return Err(SynthError::InvalidConfig(format!(
            "sweep asks for {max_n} candidates but the world holds {}",
            world.distractor_pool() + 1
        )));
    }
    let n = world.len();

    log::info!("synth-bench: extracting clusters for {n} scenes");
    let work = extract_clusters(&world, cfg)?;

    let forest_scenes = cfg.forest_scenes.min(n);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for w in &work[..forest_scenes] {
        for c in &w.clusters {
            rows.push(c.descriptor.feature_vector());
            labels.push(pseudo_label(&c.descriptor).0.index());
        }
    }
    let width = rows.first().map_or(0, |r| r.len());
    log::info!("synth-bench: training forest on {} clusters", rows.len());
    let outcome = two_stage_train(&Matrix::from_rows(&rows, width), &labels, CLASS_COUNT, &cfg.forest)?;
    let forest = outcome.forest;

    let mut descriptors = Matrix::zeros(n, DESCRIPTOR_DIM);
    let mut abs_err = 0.0;
    for (i, w) in work.iter().enumerate() {
        let d = descriptor_from_clusters(&w.clusters, &forest, cfg.geoattr.min_area_ratio)?.to_array();
        let truth = world.true_descriptor(i).to_array();
        abs_err += d.iter().zip(&truth).map(|(a, b)| (a - b).abs()).sum::<f64>();
        descriptors.row_mut(i).copy_from_slice(&d);
    }
    let audio: Vec<SceneAudio> = work.into_iter().map(|w| w.audio).collect();
    let mut targets = Matrix::zeros(n, AUDIO_DIM);
    for (i, a) in audio.iter().enumerate() {
        targets.row_mut(i).copy_from_slice(&a.reference);
    }

    let mut arms = Vec::with_capacity(Arm::ALL.len());
    let mut full_model = None;
    let mut split = (0, 0);
    for arm in Arm::ALL {
        log::info!("synth-bench: training arm {}", arm.name());
        let inputs = arm_inputs(arm, &descriptors, cfg.train.seed);
        let (model, history): (ProjectionModel, TrainHistory) = train_alignment(&inputs, &targets, &cfg.train)?;
        split = (history.train_indices.len(), history.val_indices.len());
        arms.push(ArmReport {
            arm,
            val_cosine: history.best_val_cosine,
            val_loss: history.best_val_loss,
            best_epoch: history.best_epoch,
            stopped_early: history.stopped_early,
            sweep: sweep(&model, &inputs, &audio, &history.val_indices, &cfg.sweep)?,
            history: history.epochs,
        });
        if arm == Arm::FullGeo {
            full_model = Some(model);
        }
    }

    Ok(BenchmarkArtifacts {
        report: BenchmarkReport {
            schema_version: BENCH_REPORT_VERSION,
            seed: cfg.world.seed,
            n_scenes: n,
            n_train: split.0,
            n_val: split.1,
            noise_sigma: cfg.world.noise_sigma,
            extraction: ExtractionSummary {
                forest_samples: labels.len(),
                forest_kept: outcome.kept.len(),
                forest_fell_back: outcome.fell_back,
                descriptor_mae: abs_err / (n * DESCRIPTOR_DIM) as f64,
            },
            arms,
        },
        model: full_model.expect("full-geo arm always runs"),
        forest,
        descriptors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> BenchConfig {
        let mut cfg = BenchConfig {
            world: SynthWorldConfig {
                n_scenes: 60,
                embed_dim: 24,
                ..SynthWorldConfig::default()
            },
            forest: ForestConfig {
                n_trees: 15,
                features_per_split: 5,
                ..ForestConfig::default()
            },
            train: TrainConfig {
                hidden: 16,
                max_epochs: 6,
                ..TrainConfig::default()
            },
            forest_scenes: 20,
            ..BenchConfig::default()
        };
        cfg.reseed(5);
        cfg
    }

    #[test]
    fn tiny_run_is_complete_and_consistent() {
        let art = run_desk_benchmark(&tiny()).unwrap();
        let r = &art.report;
        assert_eq!(r.arms.len(), 4);
        assert_eq!(r.n_train + r.n_val, 60);
        for arm in &r.arms {
            assert_eq!(arm.sweep.iter().map(|p| p.n).collect::<Vec<_>>(), vec![1, 3, 6, 10]);
            assert_eq!(arm.sweep[0].selection_accuracy, 1.0);
            for w in arm.sweep.windows(2) {
                assert!(w[1].geoalign_mean >= w[0].geoalign_mean - 1e-12);
            }
            for e in &arm.history {
                assert!((e.val_loss - (1.0 - e.val_cosine)).abs() < 1e-9);
                assert!((e.train_loss - (1.0 - e.train_cosine)).abs() < 1e-9);
            }
        }
        assert!(r.extraction.descriptor_mae < 0.1, "{}", r.extraction.descriptor_mae);
        let z = r.arm(Arm::ZeroInput).unwrap();
        assert_eq!(art.descriptors.rows(), 60);
        assert!(z.val_cosine.abs() < 0.5);
    }

    #[test]
    fn identical_seeds_identical_report() {
        let a = run_desk_benchmark(&tiny()).unwrap();
        let b = run_desk_benchmark(&tiny()).unwrap();
        assert_eq!(a.report.to_json(), b.report.to_json());
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn config_validation() {
        let mut cfg = tiny();
        cfg.sweep = vec![0];
        assert!(run_desk_benchmark(&cfg).is_err());
        let mut cfg = tiny();
        cfg.world.n_scenes = 1;
        cfg.world.candidate_count = 1;
        assert!(run_desk_benchmark(&cfg).is_err());
    }
}
