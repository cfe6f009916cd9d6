//! Browser bindings: paint and segment a synthetic scene, train the
//! projection on a small world and rank a scene's candidates, and compare
//! two Gaussians with the Fréchet distance.
//!
//! Results cross the boundary as JSON strings.

use geo2sound::alignment::{train_alignment, ProjectionModel, TrainConfig};
use geo2sound::geoattr::{aggregate_attributes, cluster_features, pseudo_label, GeoAttrConfig, GeoDescriptor};
use geo2sound::linalg::Matrix;
use geo2sound::metrics::{frechet_distance, GaussianStats};
use geo2sound::synth::{SynthScene, SynthWorldConfig, World};
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn to_json<T: Serialize>(v: &T) -> Result<String, JsError> {
    serde_json::to_string(v).map_err(js_err)
}

#[derive(Serialize)]
struct SceneView {
    scene_id: String,
    caption: String,
    size: usize,
    truth: [f64; 5],
    extracted: [f64; 5],
    clusters: Vec<ClusterView>,
}

#[derive(Serialize)]
struct ClusterView {
    area: f64,
    class: &'static str,
    confidence: f64,
}

#[derive(Serialize)]
struct TrainView {
    scenes: usize,
    epochs: usize,
    best_epoch: usize,
    val_cosine: f64,
    curve: Vec<f64>,
}

#[derive(Serialize)]
struct RankView {
    scores: Vec<f64>,
    selected: usize,
    compatible: usize,
    geoalign: f64,
}

/// Clusters the patch grid and labels every cluster with the color rules
/// alone, so the demo needs no trained forest.
fn segment(scene: &SynthScene) -> Result<(GeoDescriptor, Vec<ClusterView>), JsError> {
    let cfg = GeoAttrConfig::default();
    let clusters = cluster_features(&scene.image, &scene.patches, &cfg).map_err(js_err)?;
    let mut dists = Vec::new();
    let mut areas = Vec::new();
    let mut views = Vec::new();
    for c in &clusters {
        let (class, confidence) = pseudo_label(&c.descriptor);
        let mut onehot = vec![0.0; 5];
        onehot[class.index()] = 1.0;
        dists.push(onehot);
        areas.push(c.descriptor.area_ratio);
        views.push(ClusterView {
            area: c.descriptor.area_ratio,
            class: class.name(),
            confidence,
        });
    }
    let d = aggregate_attributes(&dists, &areas).map_err(js_err)?;
    Ok((d, views))
}

#[wasm_bindgen]
pub struct Demo {
    world: World,
    model: Option<ProjectionModel>,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, n_scenes: usize, noise: f64) -> Result<Demo, JsError> {
        let cfg = SynthWorldConfig {
            n_scenes,
            noise_sigma: noise,
            embed_dim: 64,
            seed: seed as u64,
            ..SynthWorldConfig::default()
        };
        Ok(Demo {
            world: World::new(cfg).map_err(js_err)?,
            model: None,
        })
    }

    pub fn len(&self) -> usize {
        self.world.len()
    }

    pub fn is_empty(&self) -> bool {
        self.world.is_empty()
    }

    /// RGBA bytes of scene `i`, ready for `ImageData`.
    pub fn rgba(&self, i: usize) -> Vec<u8> {
        let img = self.world.scene(i).image;
        img.data
            .chunks_exact(3)
            .flat_map(|p| [p[0], p[1], p[2], 255])
            .collect()
    }

    pub fn segment(&self, i: usize) -> Result<String, JsError> {
        let scene = self.world.scene(i);
        let (d, clusters) = segment(&scene)?;
        to_json(&SceneView {
            scene_id: scene.scene_id,
            caption: scene.caption,
            size: scene.image.width,
            truth: scene.true_descriptor.to_array(),
            extracted: d.to_array(),
            clusters,
        })
    }

    /// Fits the projection on true descriptors and reference audio.
    pub fn train(&mut self, max_epochs: usize) -> Result<String, JsError> {
        let n = self.world.len();
        let geo: Vec<[f64; 5]> = (0..n).map(|i| self.world.true_descriptor(i).to_array()).collect();
        let audio: Vec<Vec<f64>> = (0..n).map(|i| self.world.scene_audio(i).reference).collect();
        let cfg = TrainConfig {
            max_epochs,
            hidden: 64,
            seed: self.world.config.seed,
            ..TrainConfig::default()
        };
        let (model, history) = train_alignment(
            &Matrix::from_rows(&geo, 5),
            &Matrix::from_rows(&audio, audio[0].len()),
            &cfg,
        )
        .map_err(js_err)?;
        self.model = Some(model);
        to_json(&TrainView {
            scenes: n,
            epochs: history.epochs.len(),
            best_epoch: history.best_epoch,
            val_cosine: history.best_val_cosine,
            curve: history.epochs.iter().map(|e| e.val_cosine).collect(),
        })
    }

    /// Scores `n` candidates of scene `i` from its extracted descriptor.
    pub fn rank(&self, i: usize, n: usize) -> Result<String, JsError> {
        let model = self.model.as_ref().ok_or_else(|| JsError::new("train the projection first"))?;
        let n = n.clamp(1, self.world.distractor_pool() + 1);
        let scene = self.world.scene(i);
        let (d, _) = segment(&scene)?;
        let (cands, compatible) = scene.audio.candidates(n);
        let s = model.score_candidates(&d.to_array(), &cands).map_err(js_err)?;
        to_json(&RankView {
            scores: s.scores,
            selected: s.selected,
            compatible,
            geoalign: s.geoalign,
        })
    }
}

/// Fréchet distance between two diagonal Gaussians.
#[wasm_bindgen]
pub fn frechet_diagonal(mean_a: &[f64], var_a: &[f64], mean_b: &[f64], var_b: &[f64]) -> Result<f64, JsError> {
    let d = mean_a.len();
    if [var_a.len(), mean_b.len(), var_b.len()].iter().any(|&l| l != d) {
        return Err(JsError::new("means and variances must have equal length"));
    }
    let stats = |mean: &[f64], var: &[f64]| {
        let mut cov = Matrix::zeros(d, d);
        for (k, v) in var.iter().enumerate() {
            cov[(k, k)] = v.max(0.0);
        }
        GaussianStats { mean: mean.to_vec(), cov, n: 2 }
    };
    frechet_distance(&stats(mean_a, var_a), &stats(mean_b, var_b)).map_err(js_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_frechet_closed_form() {
        let f = frechet_diagonal(&[0.0, 1.0], &[1.0, 4.0], &[1.0, 1.0], &[4.0, 1.0]).unwrap();
        // |Δμ|² + Σ (√a − √b)²
        assert!((f - (1.0 + 1.0 + 1.0)).abs() < 1e-9);
    }

    #[test]
    fn demo_round_trip() {
        let mut demo = Demo::new(3, 60, 0.05).unwrap();
        assert_eq!(demo.rgba(0).len(), 32 * 32 * 4);
        let seg: serde_json::Value = serde_json::from_str(&demo.segment(0).unwrap()).unwrap();
        let sum: f64 = seg["extracted"].as_array().unwrap()[..4].iter().map(|v| v.as_f64().unwrap()).sum();
        assert!(sum > 0.0 && sum <= 1.0 + 1e-9);
        demo.train(30).unwrap();
        let r: serde_json::Value = serde_json::from_str(&demo.rank(1, 6).unwrap()).unwrap();
        assert_eq!(r["scores"].as_array().unwrap().len(), 6);
    }
}
