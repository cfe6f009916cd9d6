//! Lloyd's algorithm with k-means++ seeding.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::GeoAttrError;
use crate::linalg::{squared_distance, Matrix};
use crate::rng::{derived, DetRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iter: usize,
    /// Stop once no centroid moves farther than this.
    pub tol: f64,
    pub seed: u64,
    /// Independent seeded restarts; the lowest-inertia run wins.
    pub n_init: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            k: 8,
            max_iter: 100,
            tol: 1e-6,
            seed: 42,
            n_init: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub k: usize,
    /// `k × D`.
    pub centroids: Matrix,
    pub labels: Vec<usize>,
    pub inertia: f64,
    pub iterations: usize,
    /// All points coincide while `k > 1`, so some centroids are duplicates.
    pub degenerate: bool,
}

pub fn kmeans(points: &Matrix, cfg: &KMeansConfig) -> Result<ClusterModel, GeoAttrError> {
    let (n, dim) = (points.rows(), points.cols());
    let k = cfg.k;
    if k == 0 || dim == 0 {
        return Err(GeoAttrError::InvalidInput("k and D must be at least 1".into()));
    }
    if n < k {
        return Err(GeoAttrError::TooFewPoints { n, k });
    }
    if points.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(GeoAttrError::InvalidInput("non-finite point coordinates".into()));
    }

    let mut best: Option<ClusterModel> = None;
    for run in 0..cfg.n_init.max(1) {
        let mut rng = derived(cfg.seed, run as u64);
        let model = lloyd(points, k, cfg, &mut rng);
        let better = match &best {
            None => true,
            Some(b) => model.inertia < b.inertia,
        };
        if better {
            best = Some(model);
        }
    }
    let best = best.expect("at least one run");
    if best.degenerate {
        log::warn!("kmeans: all {n} points coincide, centroids are duplicated");
    }
    Ok(best)
}

fn lloyd(points: &Matrix, k: usize, cfg: &KMeansConfig, rng: &mut DetRng) -> ClusterModel {
    let (n, dim) = (points.rows(), points.cols());
    let (mut centroids, degenerate) = plus_plus_init(points, k, rng);
    let mut labels = vec![0usize; n];
    let mut inertia = assign(points, &centroids, &mut labels);
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        iterations += 1;

        let mut sums = Matrix::zeros(k, dim);
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (s, v) in sums.row_mut(l).iter_mut().zip(points.row(i)) {
                *s += v;
            }
        }
        let mut shift = 0.0f64;
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let inv = 1.0 / counts[c] as f64;
            let mut moved = 0.0;
            for (dst, s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                let v = s * inv;
                moved += (v - *dst) * (v - *dst);
                *dst = v;
            }
            shift = shift.max(moved.sqrt());
        }
        // empty clusters take the point currently worst served
        for c in 0..k {
            if counts[c] != 0 {
                continue;
            }
            let far = farthest_point(points, &centroids, &labels);
            let before = centroids.row(c).to_vec();
            centroids.row_mut(c).copy_from_slice(points.row(far));
            labels[far] = c;
            shift = shift.max(squared_distance(&before, points.row(far)).sqrt());
        }

        let next = assign(points, &centroids, &mut labels);
        debug_assert!(
            next <= inertia + 1e-9 * inertia.max(1.0),
            "kmeans inertia increased: {inertia} -> {next}"
        );
        inertia = next;
        if shift < cfg.tol {
            break;
        }
    }

    ClusterModel {
        k,
        centroids,
        labels,
        inertia,
        iterations,
        degenerate,
    }
}

/// Nearest-centroid assignment (lowest index on ties). Returns the inertia.
fn assign(points: &Matrix, centroids: &Matrix, labels: &mut [usize]) -> f64 {
    let mut total = 0.0;
    for (i, label) in labels.iter_mut().enumerate() {
        let p = points.row(i);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for c in 0..centroids.rows() {
            let d = squared_distance(p, centroids.row(c));
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        *label = best;
        total += best_d;
    }
    total
}

fn farthest_point(points: &Matrix, centroids: &Matrix, labels: &[usize]) -> usize {
    let mut far = 0;
    let mut far_d = -1.0;
    for (i, &l) in labels.iter().enumerate() {
        let d = squared_distance(points.row(i), centroids.row(l));
        if d > far_d {
            far_d = d;
            far = i;
        }
    }
    far
}

fn plus_plus_init(points: &Matrix, k: usize, rng: &mut DetRng) -> (Matrix, bool) {
    let n = points.rows();
    let mut centroids = Matrix::zeros(k, points.cols());
    let first = rng.random_range(0..n);
    centroids.row_mut(0).copy_from_slice(points.row(first));
    let mut d2: Vec<f64> = (0..n)
        .map(|i| squared_distance(points.row(i), points.row(first)))
        .collect();
    let mut degenerate = false;

    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            // rounding can leave `target` past the last positive weight
            if d2[pick] <= 0.0 {
                pick = d2.iter().rposition(|&w| w > 0.0).unwrap_or(0);
            }
            pick
        } else {
            degenerate = true;
            rng.random_range(0..n)
        };
        centroids.row_mut(c).copy_from_slice(points.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(squared_distance(points.row(i), points.row(pick)));
        }
    }
    (centroids, degenerate)
}
