//! Heuristic land-cover scores over cluster appearance statistics.
//!
//! The table is the only place that encodes what a class "looks like"; the
//! rest of the pipeline treats it as an opaque labeller.

use super::visual::{ClusterDescriptor, VisualStat};
use super::{LandClass, CLASS_COUNT};

const WATER_HUE: f64 = 0.6;
const WATER_HUE_WIDTH: f64 = 0.15;
const ROAD_GRAY: f64 = 0.45;
const OTHER_FLOOR: f64 = 0.15;

/// Score of every class, indexed by [`LandClass::index`].
///
/// * vegetation: `G - max(R, B) + 0.5·S`
/// * water: `0.5·(1 - V) + tri(H; 0.6, 0.15) - edges`
/// * built-up: `edges + gray_std - S`
/// * road: `(1 - S) - gray_std - |gray_mean - 0.45|`
/// * other: constant `0.15`
///
/// Roads are scored as smooth, unsaturated, mid-gray surfaces; built-up areas
/// as textured, edge-dense, unsaturated ones.
pub fn pseudo_scores(d: &ClusterDescriptor) -> [f64; CLASS_COUNT] {
    use VisualStat::*;
    let (r, g, b) = (d.stat(MeanR), d.stat(MeanG), d.stat(MeanB));
    let (h, s, v) = (d.stat(MeanH), d.stat(MeanS), d.stat(MeanV));
    let (gray_std, gray_mean, edges) = (d.stat(GrayStd), d.stat(GrayMean), d.stat(EdgeDensity));

    // hue is circular, so measure proximity the short way round
    let hue_gap = {
        let raw = (h - WATER_HUE).abs();
        raw.min(1.0 - raw)
    };
    let blue_proximity = (1.0 - hue_gap / WATER_HUE_WIDTH).max(0.0);

    [
        g - r.max(b) + 0.5 * s,
        0.5 * (1.0 - v) + blue_proximity - edges,
        edges + gray_std - s,
        (1.0 - s) - gray_std - (gray_mean - ROAD_GRAY).abs(),
        OTHER_FLOOR,
    ]
}

/// Highest-scoring class; ties go to the earlier class in [`LandClass::ALL`].
pub fn pseudo_label(d: &ClusterDescriptor) -> (LandClass, f64) {
    let scores = pseudo_scores(d);
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    (LandClass::ALL[best], scores[best])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geoattr::visual::{cluster_descriptor, LabelGrid, RgbImage};

    fn describe(img: &RgbImage) -> ClusterDescriptor {
        let labels = LabelGrid::new(img.height, img.width, vec![0; img.height * img.width]).unwrap();
        cluster_descriptor(img, &labels, 0, &[]).unwrap()
    }

    fn stats(values: [f64; 9]) -> ClusterDescriptor {
        ClusterDescriptor {
            visual_stats: values,
            centroid: vec![],
            area_ratio: 1.0,
        }
    }

    #[test]
    fn green_is_vegetation() {
        let (c, _) = pseudo_label(&describe(&RgbImage::filled(8, 8, [0, 255, 0])));
        assert_eq!(c, LandClass::Vegetation);
        let (c, _) = pseudo_label(&describe(&RgbImage::filled(8, 8, [40, 140, 50])));
        assert_eq!(c, LandClass::Vegetation);
    }

    #[test]
    fn dark_blue_is_water() {
        let (c, _) = pseudo_label(&describe(&RgbImage::filled(8, 8, [30, 40, 60])));
        assert_eq!(c, LandClass::Water);
        let (c, _) = pseudo_label(&describe(&RgbImage::filled(8, 8, [25, 55, 115])));
        assert_eq!(c, LandClass::Water);
    }

    #[test]
    fn flat_mid_gray_is_road() {
        let (c, score) = pseudo_label(&describe(&RgbImage::filled(8, 8, [118, 118, 118])));
        assert_eq!(c, LandClass::Road);
        assert!((score - (1.0 - (118.0 / 255.0 - 0.45f64).abs())).abs() < 1e-9);
    }

    #[test]
    fn mid_gray_high_edge_cluster_regression() {
        // meanRGB 0.5, no saturation, gray std 0.2, gray mean 0.5, edges 0.8
        let d = stats([0.5, 0.5, 0.5, 0.0, 0.0, 0.5, 0.2, 0.5, 0.8]);
        let s = pseudo_scores(&d);
        // by hand: veg 0, water 0.25 - 0.8, built 0.8 + 0.2, road 1 - 0.2 - 0.05
        let expected = [0.0, 0.25 - 0.8, 1.0, 0.75, 0.15];
        for (a, b) in s.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(pseudo_label(&d).0, LandClass::BuiltUp);
    }

    #[test]
    fn textured_gray_is_built_up() {
        let mut img = RgbImage::filled(8, 8, [85, 85, 90]);
        for y in 0..8 {
            for x in 0..8 {
                if (y / 2 + x / 2) % 2 == 0 {
                    img.set_pixel(y, x, [205, 205, 200]);
                }
            }
        }
        assert_eq!(pseudo_label(&describe(&img)).0, LandClass::BuiltUp);
    }

    #[test]
    fn saturated_orange_falls_to_other() {
        let (c, score) = pseudo_label(&describe(&RgbImage::filled(8, 8, [230, 110, 40])));
        assert_eq!(c, LandClass::Other);
        assert_eq!(score, OTHER_FLOOR);
    }

    #[test]
    fn ties_break_toward_earlier_class() {
        // vegetation and water both score exactly 0.25, the rest lower
        let d = stats([0.5, 0.5, 0.5, 0.0, 0.5, 0.5, 0.0, 0.0, 0.0]);
        let s = pseudo_scores(&d);
        assert_eq!(s[0], 0.25);
        assert_eq!(s[1], 0.25);
        assert!(s[2] < 0.25 && s[3] < 0.25);
        assert_eq!(pseudo_label(&d).0, LandClass::Vegetation);
    }
}
