//! CART classification trees with Gini splits.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::rng::DetRng;

/// Gini values closer than this count as equal when choosing a split.
pub(crate) const GINI_TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        probs: Vec<f64>,
    },
}

/// Nodes in construction order; node 0 is the root. Samples with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn leaf_probs(&self, x: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { probs } => return probs,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    /// Size-weighted Gini impurity of the two children.
    pub impurity: f64,
}

pub fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

/// Best Gini split of `samples` over `features`. Candidate thresholds are the
/// midpoints between consecutive distinct values; both children must keep at
/// least `min_leaf` samples. Ties go to the lowest feature index, then the
/// lowest threshold.
pub fn best_split(
    x: &Matrix,
    y: &[usize],
    samples: &[usize],
    features: &[usize],
    class_count: usize,
    min_leaf: usize,
) -> Option<Split> {
    let n = samples.len();
    if n < 2 * min_leaf.max(1) {
        return None;
    }
    let mut total = vec![0usize; class_count];
    for &s in samples {
        total[y[s]] += 1;
    }

    let mut best: Option<Split> = None;
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(n);
    let mut left = vec![0usize; class_count];
    for &f in features {
        order.clear();
        order.extend(samples.iter().map(|&s| (x[(s, f)], y[s])));
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        left.iter_mut().for_each(|c| *c = 0);

        // running sums of squared class counts give both Gini terms in O(1)
        let mut left_sq = 0.0f64;
        let mut right_sq: f64 = total.iter().map(|&c| (c * c) as f64).sum();
        for i in 0..n - 1 {
            let c = order[i].1;
            left_sq += (2 * left[c] + 1) as f64;
            right_sq -= (2 * (total[c] - left[c]) - 1) as f64;
            left[c] += 1;
            let (lo, hi) = (order[i].0, order[i + 1].0);
            if lo == hi {
                continue;
            }
            let n_left = i + 1;
            let n_right = n - n_left;
            if n_left < min_leaf || n_right < min_leaf {
                continue;
            }
            let impurity = ((n_left as f64 - left_sq / n_left as f64)
                + (n_right as f64 - right_sq / n_right as f64))
                / n as f64;
            let mut threshold = lo + (hi - lo) / 2.0;
            // adjacent floats can round the midpoint onto `hi`
            if threshold >= hi {
                threshold = lo;
            }
            let candidate = Split {
                feature: f,
                threshold,
                impurity,
            };
            best = match best {
                Some(b) if !prefer(&candidate, &b) => Some(b),
                _ => Some(candidate),
            };
        }
    }
    best
}

fn prefer(a: &Split, b: &Split) -> bool {
    if a.impurity < b.impurity - GINI_TIE_EPS {
        return true;
    }
    if a.impurity > b.impurity + GINI_TIE_EPS {
        return false;
    }
    (a.feature, a.threshold) < (b.feature, b.threshold)
}

pub(crate) struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub features_per_split: usize,
    pub class_count: usize,
}

/// Grows a tree on `samples` (may contain repeats, e.g. a bootstrap draw).
pub(crate) fn grow_tree(
    x: &Matrix,
    y: &[usize],
    samples: Vec<usize>,
    params: &TreeParams,
    rng: &mut DetRng,
) -> DecisionTree {
    let mut nodes = Vec::new();
    grow(x, y, samples, 0, params, rng, &mut nodes);
    DecisionTree { nodes }
}

fn grow(
    x: &Matrix,
    y: &[usize],
    samples: Vec<usize>,
    depth: usize,
    params: &TreeParams,
    rng: &mut DetRng,
    nodes: &mut Vec<Node>,
) -> usize {
    let id = nodes.len();
    let mut counts = vec![0usize; params.class_count];
    for &s in &samples {
        counts[y[s]] += 1;
    }
    let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
    let depth_reached = params.max_depth.is_some_and(|d| depth >= d);
    let leaf = |counts: &[usize]| {
        let n = samples.len().max(1) as f64;
        Node::Leaf {
            probs: counts.iter().map(|&c| c as f64 / n).collect(),
        }
    };
    if pure || depth_reached || samples.len() < 2 * params.min_samples_leaf {
        nodes.push(leaf(&counts));
        return id;
    }

    // draw features without replacement; past the quota, keep drawing one at a
    // time only while no valid split has been found
    let n_features = x.cols();
    let mut pool: Vec<usize> = (0..n_features).collect();
    let mut split: Option<Split> = None;
    let mut drawn = 0;
    while drawn < n_features {
        let target = if drawn == 0 {
            params.features_per_split.min(n_features)
        } else {
            drawn + 1
        };
        let mut batch = Vec::with_capacity(target - drawn);
        while drawn < target {
            let j = rng.random_range(drawn..n_features);
            pool.swap(drawn, j);
            batch.push(pool[drawn]);
            drawn += 1;
        }
        split = best_split(x, y, &samples, &batch, params.class_count, params.min_samples_leaf);
        if split.is_some() {
            break;
        }
    }

    let Some(split) = split else {
        nodes.push(leaf(&counts));
        return id;
    };
    let (left_s, right_s): (Vec<usize>, Vec<usize>) = samples
        .into_iter()
        .partition(|&s| x[(s, split.feature)] <= split.threshold);
    nodes.push(Node::Leaf { probs: vec![] });
    let left = grow(x, y, left_s, depth + 1, params, rng, nodes);
    let right = grow(x, y, right_s, depth + 1, params, rng, nodes);
    nodes[id] = Node::Split {
        feature: split.feature,
        threshold: split.threshold,
        left,
        right,
    };
    id
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn gini_values() {
        assert_eq!(gini(&[4, 0], 4), 0.0);
        assert!((gini(&[2, 2], 4) - 0.5).abs() < 1e-15);
        assert!((gini(&[1, 1, 1], 3) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn split_on_obvious_feature() {
        let x = Matrix::from_vec(4, 2, vec![0.0, 5.0, 1.0, 5.0, 2.0, 5.0, 3.0, 5.0]);
        let y = [0, 0, 1, 1];
        let s = best_split(&x, &y, &[0, 1, 2, 3], &[0, 1], 2, 1).unwrap();
        assert_eq!(s.feature, 0);
        assert_eq!(s.threshold, 1.5);
        assert_eq!(s.impurity, 0.0);
    }

    #[test]
    fn constant_features_have_no_split() {
        let x = Matrix::from_vec(3, 1, vec![1.0, 1.0, 1.0]);
        assert!(best_split(&x, &[0, 1, 0], &[0, 1, 2], &[0], 2, 1).is_none());
    }

    #[test]
    fn min_leaf_is_respected() {
        let x = Matrix::from_vec(4, 1, vec![0.0, 1.0, 2.0, 3.0]);
        let y = [0, 1, 1, 1];
        let s = best_split(&x, &y, &[0, 1, 2, 3], &[0], 2, 2).unwrap();
        assert_eq!(s.threshold, 1.5);
    }

    #[test]
    fn tree_fits_distinct_points() {
        let x = Matrix::from_vec(6, 2, vec![0., 0., 0., 1., 1., 0., 1., 1., 2., 2., 3., 0.]);
        let y = [0, 1, 1, 0, 2, 1];
        let params = TreeParams {
            max_depth: None,
            min_samples_leaf: 1,
            features_per_split: 1,
            class_count: 3,
        };
        let tree = grow_tree(&x, &y, (0..6).collect(), &params, &mut seeded(1));
        for i in 0..6 {
            let p = tree.leaf_probs(x.row(i));
            assert_eq!(p[y[i]], 1.0);
        }
    }
}
