use serde::{Deserialize, Serialize};

use super::AlignError;
use crate::linalg::{cosine, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScores {
    pub scores: Vec<f64>,
    pub selected: usize,
    /// `scores[selected]`.
    pub geoalign: f64,
}

/// Cosine of every candidate row against `g_embed`; argmax with the lowest
/// index winning exact ties.
pub fn select_candidate(g_embed: &[f64], candidates: &Matrix) -> Result<CandidateScores, AlignError> {
    if candidates.rows() == 0 {
        return Err(AlignError::EmptyCandidateSet);
    }
    if candidates.cols() != g_embed.len() {
        return Err(AlignError::DimensionMismatch {
            expected: g_embed.len(),
            actual: candidates.cols(),
        });
    }
    let scores = candidates
        .iter_rows()
        .enumerate()
        .map(|(j, c)| {
            cosine(g_embed, c).ok_or_else(|| AlignError::ZeroVector(format!("candidate {j} or geo embedding")))
        })
        .collect::<Result<Vec<f64>, _>>()?;
    let mut selected = 0;
    for (j, &s) in scores.iter().enumerate() {
        if s > scores[selected] {
            selected = j;
        }
    }
    Ok(CandidateScores {
        geoalign: scores[selected],
        selected,
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn singleton_and_antipodal() {
        let g = [0.6, 0.8];
        let one = select_candidate(&g, &Matrix::from_vec(1, 2, vec![1.0, 0.0])).unwrap();
        assert_eq!(one.selected, 0);
        assert!((one.geoalign - 0.6).abs() < 1e-15);
        let pair = select_candidate(&g, &Matrix::from_vec(2, 2, vec![0.6, 0.8, -0.6, -0.8])).unwrap();
        assert_eq!(pair.selected, 0);
        assert!((pair.scores[0] - 1.0).abs() < 1e-15 && (pair.scores[1] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn ties_pick_lowest_index() {
        let c = Matrix::from_vec(3, 2, vec![0.0, 1.0, 1.0, 0.0, 2.0, 0.0]);
        assert_eq!(select_candidate(&[1.0, 0.0], &c).unwrap().selected, 1);
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = seeded(17);
        let g: Vec<f64> = (0..32).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c = Matrix::from_vec(6, 32, (0..192).map(|_| rng.random_range(-1.0..1.0)).collect());
        let got = select_candidate(&g, &c).unwrap();
        let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut best = (0, f64::NEG_INFINITY);
        for j in 0..6 {
            let r = c.row(j);
            let s = g.iter().zip(r).map(|(a, b)| a * b).sum::<f64>()
                / (gn * r.iter().map(|v| v * v).sum::<f64>().sqrt());
            assert!((got.scores[j] - s).abs() < 1e-12);
            if s > best.1 {
                best = (j, s);
            }
        }
        assert_eq!(got.selected, best.0);
        assert_eq!(got.geoalign, got.scores[got.selected]);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            select_candidate(&[1.0], &Matrix::zeros(0, 1)),
            Err(AlignError::EmptyCandidateSet)
        ));
        assert!(matches!(
            select_candidate(&[1.0, 0.0], &Matrix::zeros(1, 2)),
            Err(AlignError::ZeroVector(_))
        ));
    }

    proptest! {
        #[test]
        fn argmax_scale_invariant(seed in 0u64..1000, scale in 0.01f64..100.0, which in 0usize..5) {
            let mut rng = seeded(seed);
            let g: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let c = Matrix::from_vec(5, 8, (0..40).map(|_| rng.random_range(-1.0..1.0)).collect());
            let base = select_candidate(&g, &c).unwrap();
            let mut c2 = c.clone();
            c2.row_mut(which).iter_mut().for_each(|v| *v *= scale);
            let g2: Vec<f64> = g.iter().map(|v| v * scale).collect();
            prop_assert_eq!(select_candidate(&g2, &c2).unwrap().selected, base.selected);
            prop_assert!(base.scores.iter().all(|&s| s <= base.geoalign && (-1.0..=1.0).contains(&s)));
        }
    }
}
