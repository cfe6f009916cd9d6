use super::{GeoAttrError, GeoDescriptor, CLASS_COUNT};

const DIST_TOL: f64 = 1e-6;

/// `-Σ p ln p` with `0 ln 0 = 0`.
pub fn shannon_entropy(p: &[f64]) -> Result<f64, GeoAttrError> {
    if p.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(GeoAttrError::NotADistribution(
            "negative or non-finite entry".into(),
        ));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > DIST_TOL {
        return Err(GeoAttrError::NotADistribution(format!("sums to {sum}")));
    }
    Ok(-p
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.ln())
        .sum::<f64>())
}

/// Area-weighted accumulation of per-cluster class distributions.
pub fn aggregate_attributes(
    dists: &[Vec<f64>],
    areas: &[f64],
) -> Result<GeoDescriptor, GeoAttrError> {
    if dists.len() != areas.len() {
        return Err(GeoAttrError::LengthMismatch {
            dists: dists.len(),
            areas: areas.len(),
        });
    }
    let area_sum: f64 = areas.iter().sum();
    if (area_sum - 1.0).abs() > DIST_TOL || areas.iter().any(|&a| a < 0.0) {
        return Err(GeoAttrError::AreaSumViolation(area_sum));
    }
    let mut p = [0.0; CLASS_COUNT];
    for (dist, &area) in dists.iter().zip(areas) {
        if dist.len() != CLASS_COUNT {
            return Err(GeoAttrError::NotADistribution(format!(
                "expected {CLASS_COUNT} classes, got {}",
                dist.len()
            )));
        }
        let s: f64 = dist.iter().sum();
        if (s - 1.0).abs() > DIST_TOL || dist.iter().any(|&v| v < 0.0) {
            return Err(GeoAttrError::NotADistribution(format!(
                "cluster distribution sums to {s}"
            )));
        }
        for (acc, &prob) in p.iter_mut().zip(dist) {
            *acc += area * prob;
        }
    }
    let total: f64 = p.iter().sum();
    for v in &mut p {
        *v /= total;
    }
    GeoDescriptor::from_proportions(&p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_hot(c: usize) -> Vec<f64> {
        let mut v = vec![0.0; CLASS_COUNT];
        v[c] = 1.0;
        v
    }

    #[test]
    fn entropy_cases() {
        assert_eq!(shannon_entropy(&[0.0, 1.0, 0.0, 0.0, 0.0]).unwrap(), 0.0);
        let u = shannon_entropy(&[0.2; 5]).unwrap();
        assert!((u - 5f64.ln()).abs() < 1e-12);
        assert!((u - 1.6094).abs() < 1e-4);
        let h = shannon_entropy(&[0.5, 0.5, 0.0, 0.0, 0.0]).unwrap();
        assert!((h - 2f64.ln()).abs() < 1e-12);
        assert!(matches!(
            shannon_entropy(&[0.5, 0.6]),
            Err(GeoAttrError::NotADistribution(_))
        ));
        assert!(shannon_entropy(&[1.2, -0.2]).is_err());
    }

    #[test]
    fn single_water_cluster() {
        let g = aggregate_attributes(&[one_hot(1)], &[1.0]).unwrap();
        assert_eq!(g.to_array(), [0.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn half_vegetation_half_road() {
        let g = aggregate_attributes(&[one_hot(0), one_hot(3)], &[0.5, 0.5]).unwrap();
        assert_eq!(g.vegetation, 0.5);
        assert_eq!(g.road, 0.5);
        assert_eq!(g.water, 0.0);
        assert!((g.land_use_mix - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn mixed_three_clusters_match_direct_sum() {
        let dists = vec![
            vec![0.7, 0.1, 0.1, 0.05, 0.05],
            vec![0.0, 0.2, 0.5, 0.3, 0.0],
            vec![0.25, 0.25, 0.0, 0.25, 0.25],
        ];
        let areas = [0.2, 0.5, 0.3];
        // hand sums: veg .14+0+.075, water .02+.1+.075, built .02+.25+0, road .01+.15+.075, other .01+0+.075
        let p = [0.215, 0.195, 0.27, 0.235, 0.085];
        let h: f64 = -p.iter().map(|v: &f64| v * v.ln()).sum::<f64>();
        let g = aggregate_attributes(&dists, &areas).unwrap();
        let got = g.to_array();
        for i in 0..4 {
            assert!((got[i] - p[i]).abs() < 1e-12);
        }
        assert!((got[4] - h).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            aggregate_attributes(&[one_hot(0)], &[0.5, 0.5]),
            Err(GeoAttrError::LengthMismatch { dists: 1, areas: 2 })
        ));
        assert!(matches!(
            aggregate_attributes(&[one_hot(0), one_hot(1)], &[0.5, 0.4]),
            Err(GeoAttrError::AreaSumViolation(_))
        ));
    }

    fn distribution(raw: Vec<f64>) -> Vec<f64> {
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / s).collect()
    }

    proptest! {
        #[test]
        fn entropy_bounded_and_permutation_invariant(
            raw in prop::collection::vec(0.001f64..1.0, CLASS_COUNT),
            rot in 0usize..CLASS_COUNT,
        ) {
            let p = distribution(raw);
            let h = shannon_entropy(&p).unwrap();
            prop_assert!(h >= 0.0 && h <= (CLASS_COUNT as f64).ln() + 1e-12);
            let mut q = p.clone();
            q.rotate_left(rot);
            prop_assert!((shannon_entropy(&q).unwrap() - h).abs() < 1e-12);
        }

        #[test]
        fn aggregation_is_a_distribution_and_order_free(
            clusters in prop::collection::vec(
                (0.01f64..1.0, prop::collection::vec(0.0f64..1.0, CLASS_COUNT)), 1..8),
        ) {
            let area_total: f64 = clusters.iter().map(|c| c.0).sum();
            let areas: Vec<f64> = clusters.iter().map(|c| c.0 / area_total).collect();
            let dists: Vec<Vec<f64>> = clusters
                .iter()
                .map(|c| distribution(c.1.iter().map(|v| v + 1e-3).collect()))
                .collect();
            let g = aggregate_attributes(&dists, &areas).unwrap();
            let a = g.to_array();
            for v in &a[..4] {
                prop_assert!((0.0..=1.0).contains(v));
            }
            // other = 1 - first four
            let other: f64 = dists.iter().zip(&areas).map(|(d, a)| d[4] * a).sum();
            let total = a[..4].iter().sum::<f64>() + other;
            prop_assert!((total - 1.0).abs() < 1e-9);

            let mut rev_d = dists.clone();
            rev_d.reverse();
            let mut rev_a = areas.clone();
            rev_a.reverse();
            let r = aggregate_attributes(&rev_d, &rev_a).unwrap().to_array();
            for (x, y) in a.iter().zip(r) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
