//! Layers of the convolutional text classifier: the embedding look-up matrix,
//! one-dimensional convolution groups over word windows, and dense heads.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{IdSequence, PAD_ID};
use crate::error::{Error, Result};
use crate::nn::ops::relu;

/// Word-embedding look-up matrix, row-major `vocab_size x dim`.
///
/// The pad row is all-zero and stays zero: its gradient is discarded before
/// every optimizer step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMatrix {
    pub vocab_size: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl EmbeddingMatrix {
    /// Uniform(-0.25, 0.25) initialization with a zeroed pad row.
    pub fn init(vocab_size: usize, dim: usize, rng: &mut impl Rng) -> EmbeddingMatrix {
        let mut data = vec![0.0; vocab_size * dim];
        for (row, chunk) in data.chunks_mut(dim).enumerate() {
            if row == PAD_ID {
                continue;
            }
            for v in chunk {
                *v = rng.gen_range(-0.25..0.25);
            }
        }
        EmbeddingMatrix {
            vocab_size,
            dim,
            data,
        }
    }

    pub fn row(&self, id: usize) -> &[f64] {
        &self.data[id * self.dim..(id + 1) * self.dim]
    }

    pub fn row_mut(&mut self, id: usize) -> &mut [f64] {
        &mut self.data[id * self.dim..(id + 1) * self.dim]
    }
}

/// Filters sharing one window size. `weights` is filter-major: filter `f`
/// occupies `weights[f * window * dim ..][.. window * dim]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvGroup {
    pub window: usize,
    pub num_filters: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl ConvGroup {
    pub fn init(window: usize, num_filters: usize, dim: usize, rng: &mut impl Rng) -> ConvGroup {
        let fan_in = window * dim;
        let bound = (6.0 / (fan_in + num_filters) as f64).sqrt();
        let weights = (0..num_filters * fan_in)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        ConvGroup {
            window,
            num_filters,
            weights,
            biases: vec![0.0; num_filters],
        }
    }

    pub fn filter(&self, f: usize, dim: usize) -> &[f64] {
        let w = self.window * dim;
        &self.weights[f * w..(f + 1) * w]
    }
}

/// All convolution groups of a model, one per window size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvFilterBank {
    pub groups: Vec<ConvGroup>,
}

impl ConvFilterBank {
    pub fn total_filters(&self) -> usize {
        self.groups.iter().map(|g| g.num_filters).sum()
    }

    pub fn max_window(&self) -> usize {
        self.groups.iter().map(|g| g.window).max().unwrap_or(0)
    }
}

/// Rectified convolution maps for one document, one map per filter in
/// group-major order.
///
/// A filter with window `h` produces `max(true_len - h + 1, 1)` positions:
/// windows never extend past `true_len + h - 1` into the padding, and a
/// document shorter than the window is evaluated as the single window over
/// its padded prefix.
pub fn conv_forward(
    doc: &IdSequence,
    emb: &EmbeddingMatrix,
    bank: &ConvFilterBank,
) -> Result<Vec<Vec<f64>>> {
    let mut maps = Vec::with_capacity(bank.total_filters());
    for group in &bank.groups {
        let h = group.window;
        if doc.ids.len() < h {
            return Err(Error::Dimension {
                context: "conv_forward: padded document shorter than window".into(),
                expected: h,
                actual: doc.ids.len(),
            });
        }
        let positions = doc.true_len.saturating_sub(h - 1).max(1);
        for f in 0..group.num_filters {
            let filter = group.filter(f, emb.dim);
            let bias = group.biases[f];
            let mut map = Vec::with_capacity(positions);
            for i in 0..positions {
                let mut acc = bias;
                for j in 0..h {
                    let row = emb.row(doc.ids[i + j]);
                    let wslice = &filter[j * emb.dim..(j + 1) * emb.dim];
                    for (w, x) in wslice.iter().zip(row) {
                        acc += w * x;
                    }
                }
                map.push(relu(acc));
            }
            maps.push(map);
        }
    }
    Ok(maps)
}

/// Dense layer `q = W^T f + b` with `weight` stored row-major
/// `in_dim x out_dim` (`weight[d * out_dim + j]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseHead {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseHead {
    pub fn init(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> DenseHead {
        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weight = (0..in_dim * out_dim)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        DenseHead {
            in_dim,
            out_dim,
            weight,
            bias: vec![0.0; out_dim],
        }
    }

    pub fn forward(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.in_dim {
            return Err(Error::Dimension {
                context: "dense forward".into(),
                expected: self.in_dim,
                actual: features.len(),
            });
        }
        let mut out = self.bias.clone();
        for (d, &x) in features.iter().enumerate() {
            let row = &self.weight[d * self.out_dim..(d + 1) * self.out_dim];
            for (j, &w) in row.iter().enumerate() {
                out[j] += w * x;
            }
        }
        Ok(out)
    }

    /// Gradients of a scalar loss given `d_logits`; returns
    /// `(d_weight, d_bias, d_features)`.
    pub fn backward(&self, features: &[f64], d_logits: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        debug_assert_eq!(features.len(), self.in_dim);
        debug_assert_eq!(d_logits.len(), self.out_dim);
        let mut d_weight = vec![0.0; self.weight.len()];
        let mut d_features = vec![0.0; self.in_dim];
        for (d, &x) in features.iter().enumerate() {
            let row = &self.weight[d * self.out_dim..(d + 1) * self.out_dim];
            let drow = &mut d_weight[d * self.out_dim..(d + 1) * self.out_dim];
            let mut acc = 0.0;
            for (j, &dq) in d_logits.iter().enumerate() {
                drow[j] = x * dq;
                acc += row[j] * dq;
            }
            d_features[d] = acc;
        }
        (d_weight, d_logits.to_vec(), d_features)
    }
}
