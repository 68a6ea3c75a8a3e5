//! Sensor-level artifacts: highlight blooming, lens vignetting, hot pixels.

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::rng::SeededRng;

use super::conv::gaussian_blur_buf;

/// Spreads energy above `threshold` into neighboring pixels: the excess is
/// removed where it occurred and re-deposited through a Gaussian of width
/// `spread`. Zero spread leaves the image untouched.
pub fn sensor_blooming(img: &ImageBuffer, threshold: f64, spread: f64) -> Result<ImageBuffer> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::invalid("sensor_blooming threshold must be in [0, 1]"));
    }
    if !(spread >= 0.0) {
        return Err(Error::invalid("sensor_blooming spread must be >= 0"));
    }
    if spread == 0.0 {
        return Ok(img.clone());
    }
    let (w, h, c) = img.shape();
    let excess_data: Vec<f64> = img.data().iter().map(|&v| (v - threshold).max(0.0)).collect();
    let excess = ImageBuffer::from_data(w, h, c, excess_data)?;
    let leaked = gaussian_blur_buf(&excess, spread);
    let data = img
        .data()
        .iter()
        .zip(excess.data())
        .zip(leaked.data())
        .map(|((&v, &e), &l)| (v - e + l).clamp(0.0, 1.0))
        .collect();
    ImageBuffer::from_data(w, h, c, data)
}

/// Radial darkening `v * (1 - strength * r^2)` with r = 1 at the corners.
pub fn vignette(img: &ImageBuffer, strength: f64) -> Result<ImageBuffer> {
    if !(0.0..=1.0).contains(&strength) {
        return Err(Error::invalid("vignette strength must be in [0, 1]"));
    }
    if strength == 0.0 {
        return Ok(img.clone());
    }
    let (w, h, c) = img.shape();
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let rmax2 = (cx * cx + cy * cy).max(f64::MIN_POSITIVE);
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            let r2 = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)) / rmax2;
            let gain = 1.0 - strength * r2;
            for ch in 0..c {
                out.data_mut()[(y * w + x) * c + ch] *= gain;
            }
        }
    }
    Ok(out)
}

/// Sets `round(fraction * pixels)` seeded pixel positions (drawn with
/// replacement: x then y per pixel, then one brightness in [0.85, 1] shared
/// by all channels) to a near-white value.
pub fn hot_pixels(img: &ImageBuffer, rng: &mut SeededRng, fraction: f64) -> Result<ImageBuffer> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::invalid("hot_pixels fraction must be in [0, 1]"));
    }
    let (w, h, c) = img.shape();
    let count = (fraction * (w * h) as f64).round() as usize;
    if count == 0 {
        return Ok(img.clone());
    }
    let mut out = img.clone();
    for _ in 0..count {
        let x = rng.below(w as u64) as usize;
        let y = rng.below(h as u64) as usize;
        let value = rng.uniform(0.85, 1.0);
        for ch in 0..c {
            out.data_mut()[(y * w + x) * c + ch] = value;
        }
    }
    Ok(out)
}
