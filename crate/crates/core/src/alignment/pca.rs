use serde::{Deserialize, Serialize};

use super::AlignError;
use crate::linalg::{symmetric_eigen, Matrix};

/// Principal axes of a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `dims × D`, one unit-length principal axis per row, by descending
    /// explained variance.
    pub components: Matrix,
    pub explained_variance: Vec<f64>,
    /// Fewer than `dims` directions carried variance; the trailing axes are
    /// arbitrary orthonormal completions with zero variance.
    pub rank_deficient: bool,
}

/// Eigenvalues below this fraction of the largest one count as zero.
const RANK_TOL: f64 = 1e-12;

/// Eigendecomposition of the sample covariance (divisor `n − 1`). Each axis is
/// signed so that its largest-magnitude coordinate is positive.
pub fn fit_pca(x: &Matrix, dims: usize) -> Result<PcaModel, AlignError> {
    let (n, d) = (x.rows(), x.cols());
    if dims == 0 || d < dims {
        return Err(AlignError::InvalidInput(format!(
            "cannot keep {dims} components of {d}-dimensional data"
        )));
    }
    if n < 2 {
        return Err(AlignError::InvalidInput(format!("PCA needs at least 2 samples, got {n}")));
    }
    let mean = x.column_means();
    let mut cov = Matrix::zeros(d, d);
    let mut c = vec![0.0; d];
    for row in x.iter_rows() {
        for (ci, (v, m)) in c.iter_mut().zip(row.iter().zip(&mean)) {
            *ci = v - m;
        }
        for i in 0..d {
            let ci = c[i];
            let out = &mut cov.row_mut(i)[i..];
            for (o, cj) in out.iter_mut().zip(&c[i..]) {
                *o += ci * cj;
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] / denom;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }

    let eig = symmetric_eigen(&cov);
    let top = eig.values[0].max(0.0);
    let mut components = Matrix::zeros(dims, d);
    let mut explained_variance = Vec::with_capacity(dims);
    let mut rank_deficient = false;
    for k in 0..dims {
        let lambda = eig.values[k];
        if lambda <= RANK_TOL * top.max(f64::MIN_POSITIVE) || lambda <= 0.0 {
            rank_deficient = true;
            explained_variance.push(0.0);
        } else {
            explained_variance.push(lambda);
        }
        let row = components.row_mut(k);
        for (j, r) in row.iter_mut().enumerate() {
            *r = eig.vectors[(j, k)];
        }
        let mut pivot = 0;
        for j in 1..d {
            if row[j].abs() > row[pivot].abs() + 1e-12 {
                pivot = j;
            }
        }
        if row[pivot] < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
        }
    }
    if rank_deficient {
        log::warn!("PCA: fewer than {dims} directions with nonzero variance");
    }
    Ok(PcaModel {
        mean,
        components,
        explained_variance,
        rank_deficient,
    })
}

impl PcaModel {
    pub fn dims(&self) -> usize {
        self.components.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    /// `components · (x − mean)`.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>, AlignError> {
        if x.len() != self.input_dim() {
            return Err(AlignError::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(v, m)| v - m).collect();
        Ok(self.components.mat_vec(&centered))
    }

    pub fn project_rows(&self, x: &Matrix) -> Result<Matrix, AlignError> {
        let mut out = Matrix::zeros(x.rows(), self.dims());
        for i in 0..x.rows() {
            out.row_mut(i).copy_from_slice(&self.project(x.row(i))?);
        }
        Ok(out)
    }

    /// `mean + componentsᵀ · z`.
    pub fn reconstruct(&self, z: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (k, &zk) in z.iter().enumerate() {
            for (o, c) in out.iter_mut().zip(self.components.row(k)) {
                *o += zk * c;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// Cyclic Jacobi eigenvalues, independent of the library solver.
    fn jacobi_eigenvalues(a: &Matrix) -> Vec<f64> {
        let n = a.rows();
        let mut m = a.clone();
        for _ in 0..100 {
            let mut off = 0.0;
            for p in 0..n {
                for q in p + 1..n {
                    off += m[(p, q)] * m[(p, q)];
                }
            }
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if m[(p, q)].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * m[(p, q)]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                        m[(k, p)] = c * mkp - s * mkq;
                        m[(k, q)] = s * mkp + c * mkq;
                    }
                    for k in 0..n {
                        let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                        m[(p, k)] = c * mpk - s * mqk;
                        m[(q, k)] = s * mpk + c * mqk;
                    }
                }
            }
        }
        let mut v: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }

    fn gaussian(rows: usize, cols: usize, seed: u64, scales: &[f64]) -> Matrix {
        let mut rng = seeded(seed);
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                let z: f64 = StandardNormal.sample(&mut rng);
                m[(i, j)] = z * scales[j % scales.len()] + 0.3 * j as f64;
            }
        }
        m
    }

    #[test]
    fn line_in_three_d() {
        let dir = [1.0 / 3f64.sqrt(); 3];
        let ts = [-2.0, -1.0, 0.5, 1.0, 1.5];
        let rows: Vec<[f64; 3]> = ts
            .iter()
            .map(|&t| [1.0 + t * dir[0], 2.0 + t * dir[1], t * dir[2]])
            .collect();
        let pca = fit_pca(&Matrix::from_rows(&rows, 3), 1).unwrap();
        let c = pca.components.row(0);
        for v in c {
            assert!((v - dir[0]).abs() < 1e-9);
        }
        let mean_t = ts.iter().sum::<f64>() / 5.0;
        let var = ts.iter().map(|t| (t - mean_t).powi(2)).sum::<f64>() / 4.0;
        assert!((pca.explained_variance[0] - var).abs() < 1e-9);
        assert!(!pca.rank_deficient);
    }

    #[test]
    fn reconstruction_error_is_discarded_spectrum() {
        let x = gaussian(50, 8, 3, &[3.0, 2.0, 1.5, 1.0, 0.7, 0.5, 0.3, 0.2]);
        let pca = fit_pca(&x, 4).unwrap();
        let full = fit_pca(&x, 8).unwrap();
        let mut cov = Matrix::zeros(8, 8);
        let mean = x.column_means();
        for r in x.iter_rows() {
            for i in 0..8 {
                for j in 0..8 {
                    cov[(i, j)] += (r[i] - mean[i]) * (r[j] - mean[j]) / 49.0;
                }
            }
        }
        let oracle = jacobi_eigenvalues(&cov);
        for (a, b) in full.explained_variance.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9);
        }
        let err: f64 = x
            .iter_rows()
            .map(|r| {
                let back = pca.reconstruct(&pca.project(r).unwrap());
                r.iter().zip(&back).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
            })
            .sum::<f64>()
            / 49.0;
        let discarded: f64 = oracle[4..].iter().sum();
        assert!((err - discarded).abs() < 1e-9, "{err} vs {discarded}");
    }

    #[test]
    fn orthonormal_sorted_and_signed() {
        let x = gaussian(200, 6, 5, &[1.0]);
        let pca = fit_pca(&x, 6).unwrap();
        let g = pca.components.matmul(&pca.components.transpose());
        for i in 0..6 {
            for j in 0..6 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - want).abs() < 1e-9);
            }
            let row = pca.components.row(i);
            let big = row.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
            assert!(big > 0.0);
        }
        assert!(pca.explained_variance.windows(2).all(|w| w[0] >= w[1]));
        // isotropic input: variances are of similar size
        let ev = &pca.explained_variance;
        assert!(ev[0] / ev[5] < 2.5);
    }

    #[test]
    fn projection_matches_direct_product() {
        let x = gaussian(40, 5, 9, &[2.0, 1.0]);
        let pca = fit_pca(&x, 3).unwrap();
        assert!(pca.project(&pca.mean).unwrap().iter().all(|v| v.abs() < 1e-12));
        let mut rng = seeded(4);
        let v: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
        let got = pca.project(&v).unwrap();
        for k in 0..3 {
            let want: f64 = (0..5).map(|j| pca.components[(k, j)] * (v[j] - pca.mean[j])).sum();
            assert!((got[k] - want).abs() < 1e-12);
        }
        let in_span = pca.reconstruct(&[0.5, -1.0, 2.0]);
        let z = pca.project(&in_span).unwrap();
        for (a, b) in z.iter().zip([0.5, -1.0, 2.0]) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(matches!(pca.project(&[1.0]), Err(AlignError::DimensionMismatch { .. })));
    }

    #[test]
    fn rank_deficient_pads_with_zero_variance() {
        let rows: Vec<[f64; 4]> = (0..10).map(|i| [i as f64, 2.0 * i as f64, 0.0, 1.0]).collect();
        let pca = fit_pca(&Matrix::from_rows(&rows, 4), 3).unwrap();
        assert!(pca.rank_deficient);
        assert_eq!(&pca.explained_variance[1..], &[0.0, 0.0]);
        let g = pca.components.matmul(&pca.components.transpose());
        for i in 0..3 {
            assert!((g[(i, i)] - 1.0).abs() < 1e-9);
        }
    }
}
