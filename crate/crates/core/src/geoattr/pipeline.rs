//! Image + patch grid → [`GeoDescriptor`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::kmeans::{kmeans, KMeansConfig};
use super::visual::{upsample_labels, ClusterDescriptor, ImageStats, LabelGrid, RgbImage};
use super::{aggregate_attributes, GeoAttrError, GeoDescriptor};
use crate::classifier::Forest;
use crate::linalg::Matrix;
use crate::tensor_io::{read_tensor, Tensor};

/// `h × w` grid of `dim`-wide patch embeddings, one matrix row per patch in
/// row-major grid order.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGrid {
    pub height: usize,
    pub width: usize,
    pub embeddings: Matrix,
}

impl PatchGrid {
    pub fn new(height: usize, width: usize, embeddings: Matrix) -> Result<Self, GeoAttrError> {
        if height == 0 || width == 0 {
            return Err(GeoAttrError::EmptyGrid);
        }
        if embeddings.rows() != height * width {
            return Err(GeoAttrError::InvalidInput(format!(
                "{} embedding rows for a {height}x{width} grid",
                embeddings.rows()
            )));
        }
        Ok(Self {
            height,
            width,
            embeddings,
        })
    }

    /// From a `[h, w, D]` tensor.
    pub fn from_tensor(t: &Tensor) -> Result<Self, GeoAttrError> {
        let &[h, w, d] = t.shape() else {
            return Err(GeoAttrError::InvalidInput(format!(
                "patch grid must be [h, w, D], got {:?}",
                t.shape()
            )));
        };
        Self::new(h, w, Matrix::from_vec(h * w, d, t.to_f64()))
    }

    pub fn dim(&self) -> usize {
        self.embeddings.cols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeoAttrConfig {
    pub kmeans: KMeansConfig,
    /// Clusters covering less of the image than this are left out of the
    /// aggregation.
    pub min_area_ratio: f64,
}

impl Default for GeoAttrConfig {
    fn default() -> Self {
        Self {
            kmeans: KMeansConfig::default(),
            min_area_ratio: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterFeature {
    pub cluster_id: usize,
    pub descriptor: ClusterDescriptor,
}

/// K-means over the patches, label upsampling, per-cluster descriptors.
/// Clusters that own no pixels are skipped; the rest come back ordered by id.
pub fn cluster_features(
    image: &RgbImage,
    grid: &PatchGrid,
    cfg: &GeoAttrConfig,
) -> Result<Vec<ClusterFeature>, GeoAttrError> {
    if image.height < grid.height || image.width < grid.width {
        return Err(GeoAttrError::InvalidInput(format!(
            "image {}x{} is smaller than patch grid {}x{}",
            image.height, image.width, grid.height, grid.width
        )));
    }
    let n = grid.embeddings.rows();
    let mut km = cfg.kmeans;
    if n < km.k {
        log::warn!("patch grid has {n} patches, clustering with k={n} instead of {}", km.k);
        km.k = n;
    }
    let model = kmeans(&grid.embeddings, &km)?;
    let labels = LabelGrid::new(grid.height, grid.width, model.labels)?;
    let pixels = upsample_labels(&labels, image.height, image.width)?;

    let mut present = vec![false; model.k];
    for &l in &pixels.labels {
        present[l] = true;
    }
    let stats = ImageStats::new(image);
    (0..model.k)
        .filter(|&c| present[c])
        .map(|c| {
            Ok(ClusterFeature {
                cluster_id: c,
                descriptor: stats.cluster_descriptor(&pixels, c, model.centroids.row(c))?,
            })
        })
        .collect()
}

/// Drops clusters under `min_area_ratio`, renormalizes the remaining areas,
/// classifies each cluster and aggregates. If every cluster is under the
/// threshold the largest one is kept.
pub fn descriptor_from_clusters(
    clusters: &[ClusterFeature],
    forest: &Forest,
    min_area_ratio: f64,
) -> Result<GeoDescriptor, GeoAttrError> {
    if clusters.is_empty() {
        return Err(GeoAttrError::EmptyGrid);
    }
    let mut kept: Vec<&ClusterFeature> = clusters
        .iter()
        .filter(|c| c.descriptor.area_ratio >= min_area_ratio)
        .collect();
    if kept.is_empty() {
        let largest = clusters
            .iter()
            .max_by(|a, b| a.descriptor.area_ratio.total_cmp(&b.descriptor.area_ratio))
            .expect("non-empty");
        kept.push(largest);
    }
    let total: f64 = kept.iter().map(|c| c.descriptor.area_ratio).sum();
    let areas: Vec<f64> = kept.iter().map(|c| c.descriptor.area_ratio / total).collect();
    let dists = kept
        .iter()
        .map(|c| forest.predict_proba(&c.descriptor.feature_vector()))
        .collect::<Result<Vec<_>, _>>()?;
    aggregate_attributes(&dists, &areas)
}

pub fn extract_geo_descriptor(
    image: &RgbImage,
    grid: &PatchGrid,
    forest: &Forest,
    cfg: &GeoAttrConfig,
) -> Result<GeoDescriptor, GeoAttrError> {
    let clusters = cluster_features(image, grid, cfg)?;
    descriptor_from_clusters(&clusters, forest, cfg.min_area_ratio)
}

/// Reads an RGB image from a `[H, W, 3]` f32 tensor with values in `[0, 1]`
/// (`.npy`) or, with the `png` feature, from a PNG file.
pub fn load_rgb_image(path: impl AsRef<Path>) -> Result<RgbImage, GeoAttrError> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("npy") => {
            let t = read_tensor(path).map_err(|e| GeoAttrError::InvalidInput(e.to_string()))?;
            let &[h, w, 3] = t.shape() else {
                return Err(GeoAttrError::InvalidInput(format!(
                    "{}: image tensor must be [H, W, 3], got {:?}",
                    path.display(),
                    t.shape()
                )));
            };
            RgbImage::from_unit_floats(h, w, t.data())
        }
        #[cfg(feature = "png")]
        Some("png") => {
            let img = image::open(path)
                .map_err(|e| GeoAttrError::InvalidInput(format!("{}: {e}", path.display())))?
                .to_rgb8();
            let (w, h) = img.dimensions();
            RgbImage::new(h as usize, w as usize, img.into_raw())
        }
        _ => Err(GeoAttrError::InvalidInput(format!(
            "{}: unsupported image format",
            path.display()
        ))),
    }
}
