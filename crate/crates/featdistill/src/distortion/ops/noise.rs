//! Stochastic pixel corruptions. Every operator consumes randomness from the
//! caller-supplied generator in raster order, so a fixed seed fixes the output.

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::rng::SeededRng;

/// Additive white Gaussian noise, independent per value, clamped to [0, 1].
pub fn gaussian_noise(img: &ImageBuffer, rng: &mut SeededRng, sigma: f64) -> Result<ImageBuffer> {
    if !(sigma >= 0.0) {
        return Err(Error::invalid("gaussian_noise sigma must be >= 0"));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let data = img
        .data()
        .iter()
        .map(|&v| (v + sigma * rng.normal()).clamp(0.0, 1.0))
        .collect();
    let (w, h, c) = img.shape();
    ImageBuffer::from_data(w, h, c, data)
}

/// Photon (shot) noise: each value becomes `Poisson(v * peak) / peak`.
/// Smaller `peak` means fewer photons and proportionally stronger noise.
pub fn shot_noise(img: &ImageBuffer, rng: &mut SeededRng, peak: f64) -> Result<ImageBuffer> {
    if !(peak > 0.0) {
        return Err(Error::invalid("shot_noise peak must be > 0"));
    }
    let data = img
        .data()
        .iter()
        .map(|&v| (rng.poisson(v.max(0.0) * peak) as f64 / peak).clamp(0.0, 1.0))
        .collect();
    let (w, h, c) = img.shape();
    ImageBuffer::from_data(w, h, c, data)
}

/// Multiplicative speckle: `v * (1 + sigma * n)` with standard normal `n`.
pub fn speckle_noise(img: &ImageBuffer, rng: &mut SeededRng, sigma: f64) -> Result<ImageBuffer> {
    if !(sigma >= 0.0) {
        return Err(Error::invalid("speckle_noise sigma must be >= 0"));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let data = img
        .data()
        .iter()
        .map(|&v| (v * (1.0 + sigma * rng.normal())).clamp(0.0, 1.0))
        .collect();
    let (w, h, c) = img.shape();
    ImageBuffer::from_data(w, h, c, data)
}

/// Impulse noise: each pixel independently becomes black with probability
/// `amount / 2`, white with probability `amount / 2`, across all channels.
pub fn salt_pepper(img: &ImageBuffer, rng: &mut SeededRng, amount: f64) -> Result<ImageBuffer> {
    if !(0.0..=1.0).contains(&amount) {
        return Err(Error::invalid("salt_pepper amount must be in [0, 1]"));
    }
    if amount == 0.0 {
        return Ok(img.clone());
    }
    let mut out = img.clone();
    let (w, h, c) = img.shape();
    for y in 0..h {
        for x in 0..w {
            let u = rng.next_f64();
            let hit = if u < amount / 2.0 {
                Some(0.0)
            } else if u < amount {
                Some(1.0)
            } else {
                None
            };
            if let Some(v) = hit {
                for ch in 0..c {
                    out.data_mut()[(y * w + x) * c + ch] = v;
                }
            }
        }
    }
    Ok(out)
}

/// Horizontal banding: one uniform offset in [-amplitude, amplitude] per row,
/// added to every value in that row.
pub fn banding_noise(img: &ImageBuffer, rng: &mut SeededRng, amplitude: f64) -> Result<ImageBuffer> {
    if !(amplitude >= 0.0) {
        return Err(Error::invalid("banding_noise amplitude must be >= 0"));
    }
    if amplitude == 0.0 {
        return Ok(img.clone());
    }
    let mut out = img.clone();
    let (w, h, c) = img.shape();
    for y in 0..h {
        let offset = rng.uniform(-amplitude, amplitude);
        let row = &mut out.data_mut()[y * w * c..(y + 1) * w * c];
        for v in row {
            *v = (*v + offset).clamp(0.0, 1.0);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::psnr;
    use crate::synth::natural_image;

    fn sample_std(deltas: &[f64]) -> f64 {
        let n = deltas.len() as f64;
        let mean = deltas.iter().sum::<f64>() / n;
        (deltas.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    }

    #[test]
    fn zero_strength_is_bitwise_identity() {
        let img = natural_image(1, 24);
        let mut rng = SeededRng::new(7);
        assert_eq!(gaussian_noise(&img, &mut rng, 0.0).unwrap().data(), img.data());
        assert_eq!(speckle_noise(&img, &mut rng, 0.0).unwrap().data(), img.data());
        assert_eq!(salt_pepper(&img, &mut rng, 0.0).unwrap().data(), img.data());
        assert_eq!(banding_noise(&img, &mut rng, 0.0).unwrap().data(), img.data());
    }

    #[test]
    fn gaussian_noise_hits_requested_sigma() {
        let img = ImageBuffer::constant(256, 256, 1, 0.5).unwrap();
        let out = gaussian_noise(&img, &mut SeededRng::new(11), 0.1).unwrap();
        let deltas: Vec<f64> = out.data().iter().zip(img.data()).map(|(a, b)| a - b).collect();
        let std = sample_std(&deltas);
        assert!((0.09..=0.11).contains(&std), "sample std {std}");
    }

    #[test]
    fn stronger_noise_means_lower_psnr() {
        let img = natural_image(2, 64);
        let mild = gaussian_noise(&img, &mut SeededRng::new(3), 0.05).unwrap();
        let harsh = gaussian_noise(&img, &mut SeededRng::new(3), 0.2).unwrap();
        assert!(psnr(&img, &harsh).unwrap() < psnr(&img, &mild).unwrap());

        let few = shot_noise(&img, &mut SeededRng::new(4), 4.0).unwrap();
        let many = shot_noise(&img, &mut SeededRng::new(4), 80.0).unwrap();
        assert!(psnr(&img, &few).unwrap() < psnr(&img, &many).unwrap());
    }

    #[test]
    fn shot_noise_is_seed_deterministic() {
        let img = natural_image(3, 32);
        let a = shot_noise(&img, &mut SeededRng::new(42), 12.0).unwrap();
        let b = shot_noise(&img, &mut SeededRng::new(42), 12.0).unwrap();
        assert_eq!(a.data(), b.data());
        let c = shot_noise(&img, &mut SeededRng::new(43), 12.0).unwrap();
        assert_ne!(a.data(), c.data());
    }

    #[test]
    fn speckle_scales_with_signal() {
        let img = ImageBuffer::constant(128, 128, 1, 0.5).unwrap();
        let out = speckle_noise(&img, &mut SeededRng::new(5), 0.2).unwrap();
        let deltas: Vec<f64> = out.data().iter().zip(img.data()).map(|(a, b)| a - b).collect();
        let std = sample_std(&deltas);
        // multiplicative noise on 0.5 gives std of about 0.5 * 0.2
        assert!((0.09..=0.11).contains(&std), "sample std {std}");
    }

    #[test]
    fn salt_pepper_hits_expected_fraction_on_all_channels() {
        let img = ImageBuffer::constant(128, 128, 3, 0.5).unwrap();
        let out = salt_pepper(&img, &mut SeededRng::new(6), 0.1).unwrap();
        let mut black = 0usize;
        let mut white = 0usize;
        for y in 0..128 {
            for x in 0..128 {
                let px: Vec<f64> = (0..3).map(|c| out.get(x, y, c)).collect();
                if px == [0.0; 3] {
                    black += 1;
                } else if px == [1.0; 3] {
                    white += 1;
                } else {
                    assert_eq!(px, [0.5; 3], "pixel must be untouched or fully flipped");
                }
            }
        }
        let frac = (black + white) as f64 / (128.0 * 128.0);
        assert!((0.08..=0.12).contains(&frac), "impulse fraction {frac}");
        assert!(black > 0 && white > 0);
    }

    #[test]
    fn banding_offsets_whole_rows() {
        let img = ImageBuffer::constant(32, 16, 3, 0.5).unwrap();
        let out = banding_noise(&img, &mut SeededRng::new(8), 0.1).unwrap();
        let mut offsets = Vec::new();
        for y in 0..16 {
            let first = out.get(0, y, 0) - 0.5;
            for x in 0..32 {
                for c in 0..3 {
                    assert!((out.get(x, y, c) - 0.5 - first).abs() < 1e-12);
                }
            }
            assert!(first.abs() <= 0.1 + 1e-12);
            offsets.push(first);
        }
        offsets.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        assert!(offsets.len() > 8, "rows should get distinct offsets");
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let img = ImageBuffer::constant(4, 4, 1, 0.5).unwrap();
        let mut rng = SeededRng::new(1);
        assert!(gaussian_noise(&img, &mut rng, -0.1).is_err());
        assert!(shot_noise(&img, &mut rng, 0.0).is_err());
        assert!(salt_pepper(&img, &mut rng, 1.5).is_err());
        assert!(banding_noise(&img, &mut rng, -1.0).is_err());
    }
}
