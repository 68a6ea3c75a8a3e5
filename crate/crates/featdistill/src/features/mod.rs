//! Pluggable feature extractors and the lightweight classification head.
//!
//! Two extractor families cover desk-scale work: a deterministic synthetic
//! patch extractor (a stand-in for ViT backbones) and a reader for
//! precomputed embedding files keyed by item id.

mod embed;

pub use embed::{load_embeddings, write_embeddings, EmbeddingStore};

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Patch edge of the synthetic extractor, in pixels.
pub const PATCH_SIDE: usize = 16;
/// Flattened patch length: 16×16 pixels × 3 channels.
pub const PATCH_VALUES: usize = PATCH_SIDE * PATCH_SIDE * 3;

/// Square HWC tensor of finite reals, as produced by preprocessing.
///
/// Unlike image buffers, values may leave [0,1] (normalization shifts them).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    side: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(side: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if side == 0 {
            return Err(Error::invalid("tensor side must be >= 1"));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(format!("tensor channels must be 1 or 3, got {channels}")));
        }
        if data.len() != side * side * channels {
            return Err(Error::shape(format!(
                "tensor data length {} != {side}x{side}x{channels}",
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("tensor contains non-finite values"));
        }
        Ok(Self { side, channels, data })
    }

    /// All-zero tensor; the placeholder paired with embedding-file extractors.
    pub fn zeros(side: usize, channels: usize) -> Self {
        Self::new(side, channels, vec![0.0; side * side * channels]).expect("valid zero tensor")
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.side + x) * self.channels + c]
    }
}

/// Token grid emitted by an extractor: T tokens of D coordinates plus their
/// arithmetic mean.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    tokens: usize,
    dim: usize,
    values: Vec<f64>,
    pooled: Vec<f64>,
}

impl FeatureMap {
    /// Build from row-major T×D values; the pooled vector is the token mean.
    pub fn new(tokens: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if tokens == 0 || dim == 0 {
            return Err(Error::invalid("feature map needs tokens >= 1 and dim >= 1"));
        }
        if values.len() != tokens * dim {
            return Err(Error::shape(format!(
                "feature values length {} != {tokens}x{dim}",
                values.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("feature map contains non-finite values"));
        }
        let mut pooled = vec![0.0; dim];
        for t in 0..tokens {
            for d in 0..dim {
                pooled[d] += values[t * dim + d];
            }
        }
        for p in pooled.iter_mut() {
            *p /= tokens as f64;
        }
        Ok(Self { tokens, dim, values, pooled })
    }

    pub fn tokens(&self) -> usize {
        self.tokens
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row-major T×D token values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn token(&self, t: usize) -> &[f64] {
        &self.values[t * self.dim..(t + 1) * self.dim]
    }

    /// Mean over tokens, the vector the classifier head consumes.
    pub fn pooled(&self) -> &[f64] {
        &self.pooled
    }
}

/// Configuration-level description of an extractor.
#[derive(Debug, Clone, PartialEq)]
pub enum ExtractorRef {
    /// Seeded random-projection extractor over non-overlapping 16x16 patches.
    Synthetic { seed: u64, side: usize, dim: usize },
    /// Precomputed embeddings, one row per item id.
    EmbeddingFile { path: PathBuf },
}

impl ExtractorRef {
    /// Human-readable id, stable across runs.
    pub fn descriptor(&self) -> String {
        match self {
            ExtractorRef::Synthetic { seed, side, dim } => {
                format!("synthetic(seed={seed},side={side},dim={dim})")
            }
            ExtractorRef::EmbeddingFile { path } => format!("embeddings({})", path.display()),
        }
    }
}

/// An extractor ready to run: weights materialized or rows loaded.
#[derive(Debug, Clone)]
pub enum Extractor {
    Synthetic(SyntheticExtractor),
    Embeddings(EmbeddingStore),
}

impl Extractor {
    pub fn load(r: &ExtractorRef) -> Result<Self> {
        match r {
            ExtractorRef::Synthetic { seed, side, dim } => {
                Ok(Extractor::Synthetic(SyntheticExtractor::new(*seed, *side, *dim)?))
            }
            ExtractorRef::EmbeddingFile { path } => {
                Ok(Extractor::Embeddings(load_embeddings(path)?))
            }
        }
    }

    /// Token count this extractor emits.
    pub fn tokens(&self) -> usize {
        match self {
            Extractor::Synthetic(s) => s.tokens(),
            Extractor::Embeddings(e) => e.tokens(),
        }
    }

    /// Coordinate count per token.
    pub fn dim(&self) -> usize {
        match self {
            Extractor::Synthetic(s) => s.dim(),
            Extractor::Embeddings(e) => e.dim(),
        }
    }

    /// Run on one item. Synthetic extraction reads the tensor; the embedding
    /// store ignores it and looks the item up by id.
    pub fn extract(&self, tensor: &Tensor, item_id: &str) -> Result<FeatureMap> {
        match self {
            Extractor::Synthetic(s) => s.extract(tensor),
            Extractor::Embeddings(e) => e.feature_map(item_id),
        }
    }
}

/// tanh(W·patch + b) over a fixed non-overlapping 16×16 patch grid; W and b
/// are drawn once from the seed, so output depends only on (seed, tensor).
#[derive(Debug, Clone)]
pub struct SyntheticExtractor {
    side: usize,
    dim: usize,
    // dim×768 row-major projection and its bias, entries N(0, 1/768).
    w: Vec<f64>,
    b: Vec<f64>,
}

impl SyntheticExtractor {
    pub fn new(seed: u64, side: usize, dim: usize) -> Result<Self> {
        if side == 0 || side % PATCH_SIDE != 0 {
            return Err(Error::invalid(format!(
                "synthetic extractor side {side} must be a positive multiple of {PATCH_SIDE}"
            )));
        }
        if dim == 0 {
            return Err(Error::invalid("synthetic extractor dim must be >= 1"));
        }
        let mut rng = SeededRng::new(seed);
        let scale = 1.0 / (PATCH_VALUES as f64).sqrt();
        let w = (0..dim * PATCH_VALUES).map(|_| rng.normal() * scale).collect();
        let b = (0..dim).map(|_| rng.normal() * scale).collect();
        Ok(Self { side, dim, w, b })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tokens(&self) -> usize {
        let g = self.side / PATCH_SIDE;
        g * g
    }

    /// Largest |W| entry: a Lipschitz bound on any token coordinate per unit
    /// change of a single input value (tanh is 1-Lipschitz).
    pub fn max_abs_weight(&self) -> f64 {
        self.w.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn extract(&self, tensor: &Tensor) -> Result<FeatureMap> {
        if tensor.side() != self.side {
            return Err(Error::invalid(format!(
                "tensor side {} does not match extractor side {}",
                tensor.side(),
                self.side
            )));
        }
        if tensor.channels() != 3 {
            return Err(Error::invalid("synthetic extractor needs 3-channel tensors"));
        }
        let grid = self.side / PATCH_SIDE;
        let mut values = Vec::with_capacity(self.tokens() * self.dim);
        let mut patch = vec![0.0; PATCH_VALUES];
        for gy in 0..grid {
            for gx in 0..grid {
                let mut i = 0;
                for py in 0..PATCH_SIDE {
                    for px in 0..PATCH_SIDE {
                        for c in 0..3 {
                            patch[i] = tensor.get(gy * PATCH_SIDE + py, gx * PATCH_SIDE + px, c);
                            i += 1;
                        }
                    }
                }
                for d in 0..self.dim {
                    let row = &self.w[d * PATCH_VALUES..(d + 1) * PATCH_VALUES];
                    let z: f64 = row.iter().zip(&patch).map(|(w, p)| w * p).sum::<f64>() + self.b[d];
                    values.push(z.tanh());
                }
            }
        }
        FeatureMap::new(self.tokens(), self.dim, values)
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Per-expert linear probe: one weight per pooled coordinate plus a bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl ClassifierHead {
    /// Zero-initialized head: predicts 0.5 everywhere until trained.
    pub fn zeros(dim: usize) -> Self {
        Self { weights: vec![0.0; dim], bias: 0.0 }
    }
}

/// σ(w·pooled + b), the probability the item is AI-generated.
pub fn head_forward(head: &ClassifierHead, pooled: &[f64]) -> Result<f64> {
    if head.weights.len() != pooled.len() {
        return Err(Error::shape(format!(
            "head dim {} != pooled dim {}",
            head.weights.len(),
            pooled.len()
        )));
    }
    let z: f64 = head.weights.iter().zip(pooled).map(|(w, p)| w * p).sum::<f64>() + head.bias;
    Ok(sigmoid(z))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_tensor(seed: u64, side: usize) -> Tensor {
        let mut rng = SeededRng::new(seed);
        let data = (0..side * side * 3).map(|_| rng.next_f64()).collect();
        Tensor::new(side, 3, data).unwrap()
    }

    #[test]
    fn synthetic_same_inputs_identical_outputs() {
        let t = random_tensor(3, 32);
        let a = SyntheticExtractor::new(11, 32, 6).unwrap().extract(&t).unwrap();
        let b = SyntheticExtractor::new(11, 32, 6).unwrap().extract(&t).unwrap();
        assert_eq!(a.values(), b.values());
        assert_eq!(a.pooled(), b.pooled());
    }

    #[test]
    fn synthetic_outputs_inside_tanh_range() {
        let t = random_tensor(4, 48);
        let fm = SyntheticExtractor::new(5, 48, 8).unwrap().extract(&t).unwrap();
        assert_eq!(fm.tokens(), 9);
        assert!(fm.values().iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn synthetic_rejects_wrong_side() {
        let ex = SyntheticExtractor::new(1, 32, 4).unwrap();
        assert!(ex.extract(&random_tensor(0, 16)).is_err());
        assert!(SyntheticExtractor::new(1, 20, 4).is_err());
    }

    #[test]
    fn pooled_matches_recomputed_token_mean() {
        let t = random_tensor(9, 64);
        let fm = SyntheticExtractor::new(2, 64, 5).unwrap().extract(&t).unwrap();
        for d in 0..fm.dim() {
            let mean: f64 =
                (0..fm.tokens()).map(|tk| fm.token(tk)[d]).sum::<f64>() / fm.tokens() as f64;
            assert!((mean - fm.pooled()[d]).abs() < 1e-9);
        }
    }

    #[test]
    fn single_pixel_perturbation_is_lipschitz_bounded() {
        let ex = SyntheticExtractor::new(21, 16, 4).unwrap();
        let base = random_tensor(7, 16);
        let base_fm = ex.extract(&base).unwrap();
        let eps = 1e-3;
        let bound = ex.max_abs_weight() * eps + 1e-12;
        for pixel in [0usize, 100, 500] {
            let mut data = base.data().to_vec();
            data[pixel] += eps;
            let fm = ex.extract(&Tensor::new(16, 3, data).unwrap()).unwrap();
            for (a, b) in fm.values().iter().zip(base_fm.values()) {
                assert!((a - b).abs() <= bound, "token moved {} > bound {bound}", (a - b).abs());
            }
        }
    }

    #[test]
    fn head_forward_hand_values() {
        let dim3 = ClassifierHead::zeros(3);
        assert_eq!(head_forward(&dim3, &[0.4, -2.0, 9.9]).unwrap(), 0.5);

        let biased = ClassifierHead { weights: vec![0.0, 0.0], bias: 3f64.ln() };
        assert!((head_forward(&biased, &[5.0, -5.0]).unwrap() - 0.75).abs() < 1e-12);

        let head = ClassifierHead { weights: vec![2.0, 5.0], bias: -2.0 };
        assert!((head_forward(&head, &[1.0, 0.0]).unwrap() - 0.5).abs() < 1e-15);

        assert!(head_forward(&head, &[1.0]).is_err());
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(800.0), 1.0);
        assert!(sigmoid(-800.0) > 0.0 || sigmoid(-800.0) == 0.0);
        assert!(sigmoid(-800.0).is_finite());
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn feature_map_rejects_bad_shapes() {
        assert!(FeatureMap::new(2, 3, vec![0.0; 5]).is_err());
        assert!(FeatureMap::new(0, 3, vec![]).is_err());
        assert!(FeatureMap::new(1, 2, vec![f64::NAN, 0.0]).is_err());
    }
}
