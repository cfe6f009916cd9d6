//! Fully connected network with exact GELU, inverted dropout and an L2
//! normalized output, plus its hand-derived backward pass.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::rng::DetRng;

/// `x · Φ(x)` with the exact normal CDF.
#[inline]
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x * std::f64::consts::FRAC_1_SQRT_2))
}

#[inline]
pub fn gelu_grad(x: f64) -> f64 {
    let cdf = 0.5 * (1.0 + libm::erf(x * std::f64::consts::FRAC_1_SQRT_2));
    let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    cdf + x * pdf
}

/// All weights and biases in one flat buffer. Layer `l` stores its
/// `sizes[l+1] × sizes[l]` weight matrix row-major, then its bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub params: Vec<f64>,
    pub dropout: f64,
}

/// Per-hidden-layer keep masks already scaled by `1 / (1 − p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks(pub Vec<Vec<f64>>);

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input of each layer (after activation and dropout of the previous one).
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Vec<f64>>,
    masks: Option<DropoutMasks>,
    /// Raw output before normalization.
    raw: Vec<f64>,
    raw_norm: f64,
    pub output: Vec<f64>,
}

impl Mlp {
    pub fn param_count(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
    }

    pub fn zeros(sizes: &[usize], dropout: f64) -> Self {
        Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; Self::param_count(sizes)],
            dropout,
        }
    }

    /// Weights `U(−√(6/fan_in), √(6/fan_in))`, biases zero.
    pub fn kaiming_uniform(sizes: &[usize], dropout: f64, rng: &mut DetRng) -> Self {
        let mut m = Self::zeros(sizes, dropout);
        for l in 0..m.layer_count() {
            let bound = (6.0 / sizes[l] as f64).sqrt();
            let (w, _) = m.layer_range(l);
            for p in &mut m.params[w] {
                *p = rng.random_range(-bound..bound);
            }
        }
        m
    }

    pub fn layer_count(&self) -> usize {
        self.sizes.len() - 1
    }

    /// Index ranges of layer `l`'s weights and bias in [`Mlp::params`].
    pub fn layer_range(&self, l: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let offset = Self::param_count(&self.sizes[..=l]);
        let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
        let w = offset..offset + fan_in * fan_out;
        let b = w.end..w.end + fan_out;
        (w, b)
    }

    pub fn weight(&self, l: usize) -> Matrix {
        let (w, _) = self.layer_range(l);
        Matrix::from_vec(self.sizes[l + 1], self.sizes[l], self.params[w].to_vec())
    }

    pub fn bias(&self, l: usize) -> &[f64] {
        let (_, b) = self.layer_range(l);
        &self.params[b]
    }

    pub fn sample_masks(&self, rng: &mut DetRng) -> DropoutMasks {
        let keep = 1.0 - self.dropout;
        DropoutMasks(
            (1..self.layer_count())
                .map(|l| {
                    (0..self.sizes[l])
                        .map(|_| {
                            if self.dropout > 0.0 && rng.random::<f64>() < self.dropout {
                                0.0
                            } else {
                                1.0 / keep
                            }
                        })
                        .collect()
                })
                .collect(),
        )
    }

    /// Forward pass; `masks = None` is evaluation mode.
    pub fn forward(&self, x: &[f64], masks: Option<&DropoutMasks>) -> ForwardCache {
        assert_eq!(x.len(), self.sizes[0], "input width");
        let layers = self.layer_count();
        let mut inputs = Vec::with_capacity(layers);
        let mut pre = Vec::with_capacity(layers - 1);
        let mut cur = x.to_vec();
        for l in 0..layers {
            let (wr, br) = self.layer_range(l);
            let (w, b) = (&self.params[wr], &self.params[br]);
            let fan_in = self.sizes[l];
            let z: Vec<f64> = b
                .iter()
                .enumerate()
                .map(|(i, bi)| {
                    bi + w[i * fan_in..(i + 1) * fan_in]
                        .iter()
                        .zip(&cur)
                        .map(|(a, c)| a * c)
                        .sum::<f64>()
                })
                .collect();
            inputs.push(std::mem::take(&mut cur));
            if l + 1 == layers {
                cur = z;
            } else {
                let mut a: Vec<f64> = z.iter().map(|&v| gelu(v)).collect();
                if let Some(m) = masks {
                    for (ai, mi) in a.iter_mut().zip(&m.0[l]) {
                        *ai *= mi;
                    }
                }
                pre.push(z);
                cur = a;
            }
        }
        let raw_norm = cur.iter().map(|v| v * v).sum::<f64>().sqrt();
        let output = if raw_norm > 0.0 && raw_norm.is_finite() {
            cur.iter().map(|v| v / raw_norm).collect()
        } else {
            log::warn!("projection output has zero norm; substituting the first basis vector");
            let mut e = vec![0.0; cur.len()];
            e[0] = 1.0;
            e
        };
        ForwardCache {
            inputs,
            pre,
            masks: masks.cloned(),
            raw: cur,
            raw_norm,
            output,
        }
    }

    /// Accumulates `scale · ∂(1 − ⟨out, target⟩)/∂params` into `grad`.
    /// `target` must already be unit length. Returns the sample's cosine.
    pub fn backward(&self, cache: &ForwardCache, target: &[f64], scale: f64, grad: &mut [f64]) -> f64 {
        let o = &cache.output;
        let cos: f64 = o.iter().zip(target).map(|(a, b)| a * b).sum();
        if !(cache.raw_norm > 0.0 && cache.raw_norm.is_finite()) {
            return cos;
        }
        // d/d raw of −⟨raw/‖raw‖, t⟩ = −(t − o⟨o, t⟩)/‖raw‖
        let mut delta: Vec<f64> = o
            .iter()
            .zip(target)
            .map(|(oi, ti)| -scale * (ti - oi * cos) / cache.raw_norm)
            .collect();
        debug_assert_eq!(cache.raw.len(), delta.len());

        for l in (0..self.layer_count()).rev() {
            let (wr, br) = self.layer_range(l);
            let fan_in = self.sizes[l];
            let input = &cache.inputs[l];
            for (i, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                grad[br.start + i] += d;
                let row = &mut grad[wr.start + i * fan_in..wr.start + (i + 1) * fan_in];
                for (g, x) in row.iter_mut().zip(input) {
                    *g += d * x;
                }
            }
            if l == 0 {
                break;
            }
            let w = &self.params[wr];
            let mut back = vec![0.0; fan_in];
            for (i, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (b, wv) in back.iter_mut().zip(&w[i * fan_in..(i + 1) * fan_in]) {
                    *b += d * wv;
                }
            }
            let pre = &cache.pre[l - 1];
            for (j, b) in back.iter_mut().enumerate() {
                let m = cache.masks.as_ref().map_or(1.0, |m| m.0[l - 1][j]);
                *b *= m * gelu_grad(pre[j]);
            }
            delta = back;
        }
        cos
    }
}

/// Mean cosine loss over a batch and its gradient. Targets must be unit
/// length. Returns `(loss, mean cosine, gradient)`.
pub fn analytic_gradients(
    mlp: &Mlp,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    masks: Option<&[DropoutMasks]>,
) -> (f64, f64, Vec<f64>) {
    assert!(!inputs.is_empty() && inputs.len() == targets.len());
    let scale = 1.0 / inputs.len() as f64;
    let mut grad = vec![0.0; mlp.params.len()];
    let mut loss = 0.0;
    let mut cos_sum = 0.0;
    for (i, (x, t)) in inputs.iter().zip(targets).enumerate() {
        let cache = mlp.forward(x, masks.map(|m| &m[i]));
        let c = mlp.backward(&cache, t, scale, &mut grad);
        loss += 1.0 - c;
        cos_sum += c;
    }
    (loss * scale, cos_sum * scale, grad)
}
