//! Structural geographic attributes from patch embeddings.
//!
//! Patch embeddings are clustered with K-means, the label grid is upsampled to
//! pixel resolution, each cluster gets nine appearance statistics plus its
//! mean embedding, a random forest turns those features into class
//! probabilities, and the probabilities are accumulated by cluster area into
//! the image-level [`GeoDescriptor`].

mod aggregate;
mod kmeans;
mod pipeline;
mod pseudo;
mod table;
mod visual;

pub use aggregate::{aggregate_attributes, shannon_entropy};
pub use kmeans::{kmeans, ClusterModel, KMeansConfig};
pub use pipeline::{
    cluster_features, descriptor_from_clusters, extract_geo_descriptor, load_rgb_image,
    ClusterFeature, GeoAttrConfig, PatchGrid,
};
pub use pseudo::{pseudo_label, pseudo_scores};
pub use table::{read_geo_csv, write_geo_csv, GeoRow};
pub use visual::{
    cluster_descriptor, sobel_magnitude, upsample_labels, ClusterDescriptor, ImageStats,
    LabelGrid, RgbImage, VisualStat, EDGE_THRESHOLD, VISUAL_STAT_COUNT,
};

use serde::{Deserialize, Serialize};

/// Land-cover classes in their fixed tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LandClass {
    Vegetation = 0,
    Water = 1,
    BuiltUp = 2,
    Road = 3,
    Other = 4,
}

pub const CLASS_COUNT: usize = 5;

impl LandClass {
    pub const ALL: [LandClass; CLASS_COUNT] = [
        LandClass::Vegetation,
        LandClass::Water,
        LandClass::BuiltUp,
        LandClass::Road,
        LandClass::Other,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            LandClass::Vegetation => "vegetation",
            LandClass::Water => "water",
            LandClass::BuiltUp => "built_up",
            LandClass::Road => "road",
            LandClass::Other => "other",
        }
    }
}

/// Image-level descriptor: four class proportions plus the land-use-mix
/// entropy (natural log, over all five classes).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoDescriptor {
    pub vegetation: f64,
    pub water: f64,
    pub built_up: f64,
    pub road: f64,
    pub land_use_mix: f64,
}

impl GeoDescriptor {
    pub const FIELDS: [&'static str; 5] = ["vegetation", "water", "built_up", "road", "land_use_mix"];

    pub fn to_array(&self) -> [f64; 5] {
        [
            self.vegetation,
            self.water,
            self.built_up,
            self.road,
            self.land_use_mix,
        ]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self {
            vegetation: a[0],
            water: a[1],
            built_up: a[2],
            road: a[3],
            land_use_mix: a[4],
        }
    }

    /// Builds the descriptor straight from five class proportions.
    pub fn from_proportions(p: &[f64; CLASS_COUNT]) -> Result<Self, GeoAttrError> {
        Ok(Self {
            vegetation: p[0],
            water: p[1],
            built_up: p[2],
            road: p[3],
            land_use_mix: shannon_entropy(p)?,
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GeoAttrError {
    #[error("need at least k={k} points, got {n}")]
    TooFewPoints { n: usize, k: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("label grid is empty")]
    EmptyGrid,
    #[error("cluster {0} has no pixels")]
    EmptyCluster(usize),
    #[error("{dists} distributions but {areas} areas")]
    LengthMismatch { dists: usize, areas: usize },
    #[error("cluster areas sum to {0}, expected 1")]
    AreaSumViolation(f64),
    #[error("not a probability distribution: {0}")]
    NotADistribution(String),
    #[error(transparent)]
    Classifier(#[from] crate::classifier::ClassifierError),
}
