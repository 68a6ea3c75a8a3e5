//! Deterministic synthetic data: a small corpus of structured "natural-ish"
//! test images plus feature-blob fixtures for end-to-end toy training.

use std::collections::BTreeMap;

use crate::features::EmbeddingStore;
use crate::image::ImageBuffer;
use crate::rng::{derive_seed, SeededRng};

const IMAGE_TAG: u64 = 0x6E61_7475_7261_6C00;

/// Chromatic multi-scale test image: smooth gradient + sinusoid banks + mild
/// grain, values inside [0.05, 0.95]. Depends only on (index, side).
pub fn natural_image(index: u64, side: usize) -> ImageBuffer {
    let mut rng = SeededRng::new(derive_seed(IMAGE_TAG, index));
    let tau = std::f64::consts::TAU;

    // Per-channel sinusoid banks: coarse, medium, fine.
    let mut waves = [[(0.0, 0.0, 0.0, 0.0); 3]; 3];
    for bank in waves.iter_mut() {
        for (w, amp) in bank.iter_mut().zip([0.16, 0.10, 0.06]) {
            let freq = rng.uniform(1.0, 7.0) * tau / side as f64;
            let theta = rng.uniform(0.0, tau);
            let phase = rng.uniform(0.0, tau);
            *w = (freq * theta.cos(), freq * theta.sin(), phase, amp);
        }
    }
    let g_theta = rng.uniform(0.0, tau);
    let g_amp = rng.uniform(0.08, 0.2);
    let (gx, gy) = (g_theta.cos() / side as f64, g_theta.sin() / side as f64);

    let mut data = Vec::with_capacity(side * side * 3);
    for y in 0..side {
        for x in 0..side {
            let (xf, yf) = (x as f64, y as f64);
            for bank in &waves {
                let mut v = 0.5 + g_amp * (gx * xf + gy * yf - 0.5);
                for &(fx, fy, phase, amp) in bank {
                    v += amp * (fx * xf + fy * yf + phase).sin();
                }
                v += rng.uniform(-0.03, 0.03);
                data.push(v.clamp(0.05, 0.95));
            }
        }
    }
    ImageBuffer::from_data(side, side, 3, data).expect("valid synthetic image")
}

/// Fixed evaluation corpus: `n` structured 3-channel images.
pub fn natural_corpus(n: usize, side: usize) -> Vec<ImageBuffer> {
    (0..n as u64).map(|i| natural_image(i, side)).collect()
}

/// Two well-separated Gaussian blobs in feature space, stored as a 1-token
/// embedding table with ids `blob-0000`, `blob-0001`, …. Even indices are
/// label 0, odd are label 1. Returns the store and the labels.
pub fn blob_embeddings(seed: u64, items: usize, dim: usize) -> (EmbeddingStore, Vec<u8>) {
    let mut rng = SeededRng::new(derive_seed(seed, 0xB10B));
    let mut rows = BTreeMap::new();
    let mut labels = Vec::with_capacity(items);
    for i in 0..items {
        let label = (i % 2) as u8;
        let center = if label == 1 { 1.5 } else { -1.5 };
        let row: Vec<f32> = (0..dim).map(|_| (center + rng.normal() * 0.5) as f32).collect();
        rows.insert(blob_id(i), row);
        labels.push(label);
    }
    (EmbeddingStore::new(1, dim, rows).expect("valid blob store"), labels)
}

/// Manifest-style id of the i-th blob item.
pub fn blob_id(i: usize) -> String {
    format!("blob-{i:04}")
}

const TOY_TAG: u64 = 0x7479_5F74_6F79_0000;

/// Pixel-scale checkerboard amplitude carried only by class-1 toy images.
/// Blur, resampling, and compression wipe it out.
pub const TOY_HF_AMP: f64 = 0.10;
/// Faint red-up/blue-down channel shift carried only by class-1 toy images.
/// It survives the degradations that destroy the checkerboard.
pub const TOY_TINT: f64 = 0.04;

/// One item of the toy robust-detection task. Both classes share the same
/// smooth seeded scene distribution (gradient plus coarse sinusoids, no
/// grain); class 1 additionally carries a strong pixel-scale luminance
/// checkerboard — an easy but fragile give-away — and a faint channel tint
/// that degradations largely preserve. Depends only on (label, index, side).
pub fn toy_class_image(label: u8, index: u64, side: usize) -> ImageBuffer {
    let mut rng = SeededRng::new(derive_seed(derive_seed(TOY_TAG, index), u64::from(label)));
    let tau = std::f64::consts::TAU;

    // Smooth per-channel base: one gradient + two coarse waves.
    let g_theta = rng.uniform(0.0, tau);
    let g_amp = rng.uniform(0.06, 0.16);
    let (gx, gy) = (g_theta.cos() / side as f64, g_theta.sin() / side as f64);
    let mut waves = [[(0.0, 0.0, 0.0, 0.0); 2]; 3];
    for bank in waves.iter_mut() {
        for (w, amp) in bank.iter_mut().zip([0.12, 0.07]) {
            let freq = rng.uniform(1.0, 4.0) * tau / side as f64;
            let theta = rng.uniform(0.0, tau);
            let phase = rng.uniform(0.0, tau);
            *w = (freq * theta.cos(), freq * theta.sin(), phase, amp);
        }
    }
    let checker_phase = rng.below(2) as usize;

    let mut data = Vec::with_capacity(side * side * 3);
    for y in 0..side {
        for x in 0..side {
            let (xf, yf) = (x as f64, y as f64);
            let checker = if label == 1 {
                if (x + y + checker_phase) % 2 == 0 {
                    TOY_HF_AMP
                } else {
                    -TOY_HF_AMP
                }
            } else {
                0.0
            };
            for (c, bank) in waves.iter().enumerate() {
                let mut v = 0.5 + g_amp * (gx * xf + gy * yf - 0.5);
                for &(fx, fy, phase, amp) in bank {
                    v += amp * (fx * xf + fy * yf + phase).sin();
                }
                v += checker;
                if label == 1 {
                    if c == 0 {
                        v += TOY_TINT;
                    } else if c == 2 {
                        v -= TOY_TINT;
                    }
                }
                data.push(v.clamp(0.02, 0.98));
            }
        }
    }
    ImageBuffer::from_data(side, side, 3, data).expect("valid toy image")
}
