//! Pixel-level appearance statistics of clusters.

use serde::{Deserialize, Serialize};

use super::GeoAttrError;

/// Gradient magnitude (grayscale in `[0, 1]`) above which a pixel is an edge.
pub const EDGE_THRESHOLD: f64 = 0.1;

pub const VISUAL_STAT_COUNT: usize = 9;

/// Index of each entry in [`ClusterDescriptor::visual_stats`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VisualStat {
    MeanR = 0,
    MeanG,
    MeanB,
    MeanH,
    MeanS,
    MeanV,
    GrayStd,
    GrayMean,
    EdgeDensity,
}

/// 8-bit RGB image, row-major, interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub height: usize,
    pub width: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self, GeoAttrError> {
        if data.len() != height * width * 3 {
            return Err(GeoAttrError::InvalidInput(format!(
                "rgb buffer has {} bytes, expected {}",
                data.len(),
                height * width * 3
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, rgb: [u8; 3]) -> Self {
        let data = rgb.iter().copied().cycle().take(height * width * 3).collect();
        Self {
            height,
            width,
            data,
        }
    }

    /// From `[H, W, 3]` floats in `[0, 1]`.
    pub fn from_unit_floats(height: usize, width: usize, v: &[f32]) -> Result<Self, GeoAttrError> {
        let data = v
            .iter()
            .map(|&x| (x.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        Self::new(height, width, data)
    }

    #[inline]
    pub fn pixel(&self, y: usize, x: usize) -> [u8; 3] {
        let o = (y * self.width + x) * 3;
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    pub fn set_pixel(&mut self, y: usize, x: usize, rgb: [u8; 3]) {
        let o = (y * self.width + x) * 3;
        self.data[o..o + 3].copy_from_slice(&rgb);
    }
}

/// Integer label per cell, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelGrid {
    pub height: usize,
    pub width: usize,
    pub labels: Vec<usize>,
}

impl LabelGrid {
    pub fn new(height: usize, width: usize, labels: Vec<usize>) -> Result<Self, GeoAttrError> {
        if labels.len() != height * width {
            return Err(GeoAttrError::InvalidInput(format!(
                "label grid has {} cells, expected {}",
                labels.len(),
                height * width
            )));
        }
        Ok(Self {
            height,
            width,
            labels,
        })
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> usize {
        self.labels[y * self.width + x]
    }
}

/// Nearest-neighbour upsampling: pixel `(y, x)` takes the label at
/// `(floor(y·h/H), floor(x·w/W))`.
pub fn upsample_labels(
    grid: &LabelGrid,
    target_h: usize,
    target_w: usize,
) -> Result<LabelGrid, GeoAttrError> {
    if grid.height == 0 || grid.width == 0 {
        return Err(GeoAttrError::EmptyGrid);
    }
    if target_h < grid.height || target_w < grid.width {
        return Err(GeoAttrError::InvalidInput(format!(
            "cannot upsample {}x{} to smaller {}x{}",
            grid.height, grid.width, target_h, target_w
        )));
    }
    let mut labels = Vec::with_capacity(target_h * target_w);
    for y in 0..target_h {
        let sy = y * grid.height / target_h;
        for x in 0..target_w {
            labels.push(grid.get(sy, x * grid.width / target_w));
        }
    }
    LabelGrid::new(target_h, target_w, labels)
}

/// Appearance statistics plus mean embedding of one cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterDescriptor {
    /// Order given by [`VisualStat`]; every entry lies in `[0, 1]`.
    pub visual_stats: [f64; VISUAL_STAT_COUNT],
    pub centroid: Vec<f64>,
    pub area_ratio: f64,
}

impl ClusterDescriptor {
    #[inline]
    pub fn stat(&self, s: VisualStat) -> f64 {
        self.visual_stats[s as usize]
    }

    /// Classifier input: nine statistics followed by the centroid.
    pub fn feature_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(VISUAL_STAT_COUNT + self.centroid.len());
        v.extend_from_slice(&self.visual_stats);
        v.extend_from_slice(&self.centroid);
        v
    }
}

/// Per-pixel quantities shared by every cluster of an image.
pub struct ImageStats<'a> {
    image: &'a RgbImage,
    gray: Vec<f64>,
    edge: Vec<bool>,
}

impl<'a> ImageStats<'a> {
    pub fn new(image: &'a RgbImage) -> Self {
        let gray: Vec<f64> = image
            .data
            .chunks_exact(3)
            .map(|p| luma(p[0], p[1], p[2]))
            .collect();
        let edge = sobel_magnitude(&gray, image.height, image.width)
            .into_iter()
            .map(|m| m > EDGE_THRESHOLD)
            .collect();
        Self { image, gray, edge }
    }

    pub fn cluster_descriptor(
        &self,
        label_map: &LabelGrid,
        cluster_id: usize,
        centroid: &[f64],
    ) -> Result<ClusterDescriptor, GeoAttrError> {
        let img = self.image;
        if label_map.height != img.height || label_map.width != img.width {
            return Err(GeoAttrError::InvalidInput(format!(
                "label map {}x{} does not match image {}x{}",
                label_map.height, label_map.width, img.height, img.width
            )));
        }
        let mut count = 0usize;
        let (mut r, mut g, mut b) = (0.0, 0.0, 0.0);
        let (mut hue_cos, mut hue_sin, mut sat, mut val) = (0.0, 0.0, 0.0, 0.0);
        let (mut gray_sum, mut gray_sq, mut edges) = (0.0, 0.0, 0usize);
        // shifted sums keep the variance exact for flat clusters
        let shift = label_map
            .labels
            .iter()
            .position(|&l| l == cluster_id)
            .map_or(0.0, |i| self.gray[i]);
        for (i, &label) in label_map.labels.iter().enumerate() {
            if label != cluster_id {
                continue;
            }
            count += 1;
            let p = &img.data[i * 3..i * 3 + 3];
            let (pr, pg, pb) = (p[0] as f64 / 255.0, p[1] as f64 / 255.0, p[2] as f64 / 255.0);
            r += pr;
            g += pg;
            b += pb;
            let (h, s, v) = rgb_to_hsv(pr, pg, pb);
            let angle = h * std::f64::consts::TAU;
            hue_cos += angle.cos();
            hue_sin += angle.sin();
            sat += s;
            val += v;
            let dg = self.gray[i] - shift;
            gray_sum += dg;
            gray_sq += dg * dg;
            edges += self.edge[i] as usize;
        }
        if count == 0 {
            return Err(GeoAttrError::EmptyCluster(cluster_id));
        }
        let n = count as f64;
        let gray_shifted = gray_sum / n;
        let gray_var = (gray_sq / n - gray_shifted * gray_shifted).max(0.0);
        let gray_mean = shift + gray_shifted;
        Ok(ClusterDescriptor {
            visual_stats: [
                r / n,
                g / n,
                b / n,
                circular_mean_hue(hue_cos / n, hue_sin / n),
                sat / n,
                val / n,
                gray_var.sqrt(),
                gray_mean,
                edges as f64 / n,
            ],
            centroid: centroid.to_vec(),
            area_ratio: n / (img.height * img.width) as f64,
        })
    }
}

/// Convenience wrapper that computes image-wide quantities on the fly.
pub fn cluster_descriptor(
    image: &RgbImage,
    label_map: &LabelGrid,
    cluster_id: usize,
    centroid: &[f64],
) -> Result<ClusterDescriptor, GeoAttrError> {
    ImageStats::new(image).cluster_descriptor(label_map, cluster_id, centroid)
}

/// Rec. 601 luma of an 8-bit pixel, in `[0, 1]`.
#[inline]
fn luma(r: u8, g: u8, b: u8) -> f64 {
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64) / 255.0
}

/// Standard HSV with all three channels in `[0, 1]`; hue of an achromatic
/// pixel is 0.
fn rgb_to_hsv(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        (b - r) / delta + 2.0
    } else {
        (r - g) / delta + 4.0
    };
    (h / 6.0, s, max)
}

fn circular_mean_hue(mean_cos: f64, mean_sin: f64) -> f64 {
    if mean_cos.hypot(mean_sin) < 1e-12 {
        return 0.0;
    }
    let h = mean_sin.atan2(mean_cos) / std::f64::consts::TAU;
    let h = h.rem_euclid(1.0);
    // rem_euclid can round up to exactly 1.0
    if h >= 1.0 {
        0.0
    } else {
        h
    }
}

/// Sobel gradient magnitude with replicated borders.
pub fn sobel_magnitude(gray: &[f64], height: usize, width: usize) -> Vec<f64> {
    let at = |y: isize, x: isize| {
        let y = y.clamp(0, height as isize - 1) as usize;
        let x = x.clamp(0, width as isize - 1) as usize;
        gray[y * width + x]
    };
    let mut out = Vec::with_capacity(height * width);
    for y in 0..height as isize {
        for x in 0..width as isize {
            let gx = (at(y - 1, x + 1) + 2.0 * at(y, x + 1) + at(y + 1, x + 1))
                - (at(y - 1, x - 1) + 2.0 * at(y, x - 1) + at(y + 1, x - 1));
            let gy = (at(y + 1, x - 1) + 2.0 * at(y + 1, x) + at(y + 1, x + 1))
                - (at(y - 1, x - 1) + 2.0 * at(y - 1, x) + at(y - 1, x + 1));
            out.push(gx.hypot(gy));
        }
    }
    out
}
