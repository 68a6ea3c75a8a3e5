//! Photometric adjustments: channel gains, saturation/contrast/gamma shifts,
//! posterization, and a combined brightness/contrast/saturation adjust.
//!
//! Every operator leaves the image bitwise untouched at its neutral setting:
//! neutral stages return early instead of multiplying by 1.0.

use crate::error::{Error, Result};
use crate::image::ImageBuffer;

use super::{LUMA_B, LUMA_G, LUMA_R};

fn pixel_luma(px: &[f64]) -> f64 {
    LUMA_R * px[0] + LUMA_G * px[1] + LUMA_B * px[2]
}

fn require_color(img: &ImageBuffer, what: &str) -> Result<()> {
    if img.channels() != 3 {
        return Err(Error::invalid(format!("{what} requires a 3-channel image")));
    }
    Ok(())
}

/// Per-channel gains, as from an incorrect white balance.
pub fn color_cast(img: &ImageBuffer, gain_r: f64, gain_g: f64, gain_b: f64) -> Result<ImageBuffer> {
    require_color(img, "color_cast")?;
    let gains = [gain_r, gain_g, gain_b];
    if gains.iter().any(|g| !(*g >= 0.0)) {
        return Err(Error::invalid("color_cast gains must be >= 0"));
    }
    if gains == [1.0; 3] {
        return Ok(img.clone());
    }
    let data = img
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| (v * gains[i % 3]).clamp(0.0, 1.0))
        .collect();
    let (w, h, c) = img.shape();
    ImageBuffer::from_data(w, h, c, data)
}

/// Scales chroma around per-pixel luma: 0 turns the image gray, values above
/// one oversaturate.
pub fn saturation_shift(img: &ImageBuffer, factor: f64) -> Result<ImageBuffer> {
    require_color(img, "saturation_shift")?;
    if !(factor >= 0.0) {
        return Err(Error::invalid("saturation_shift factor must be >= 0"));
    }
    if factor == 1.0 {
        return Ok(img.clone());
    }
    let mut data = Vec::with_capacity(img.data().len());
    for px in img.data().chunks_exact(3) {
        let y = pixel_luma(px);
        for &v in px {
            data.push((y + factor * (v - y)).clamp(0.0, 1.0));
        }
    }
    let (w, h, c) = img.shape();
    ImageBuffer::from_data(w, h, c, data)
}

/// Scales values around mid-gray.
pub fn contrast_shift(img: &ImageBuffer, factor: f64) -> Result<ImageBuffer> {
    if !(factor >= 0.0) {
        return Err(Error::invalid("contrast_shift factor must be >= 0"));
    }
    if factor == 1.0 {
        return Ok(img.clone());
    }
    let data = img
        .data()
        .iter()
        .map(|&v| (0.5 + factor * (v - 0.5)).clamp(0.0, 1.0))
        .collect();
    let (w, h, c) = img.shape();
    ImageBuffer::from_data(w, h, c, data)
}

/// Power-law tone curve `v^gamma` on values already in [0, 1].
pub fn gamma_shift(img: &ImageBuffer, gamma: f64) -> Result<ImageBuffer> {
    if !(gamma > 0.0) {
        return Err(Error::invalid("gamma_shift gamma must be > 0"));
    }
    if gamma == 1.0 {
        return Ok(img.clone());
    }
    let data = img.data().iter().map(|&v| v.max(0.0).powf(gamma).clamp(0.0, 1.0)).collect();
    let (w, h, c) = img.shape();
    ImageBuffer::from_data(w, h, c, data)
}

/// Snaps every value to one of `levels` evenly spaced steps.
pub fn posterize(img: &ImageBuffer, levels: f64) -> Result<ImageBuffer> {
    let rounded = levels.round();
    if !(rounded >= 2.0) || (levels - rounded).abs() > 1e-9 {
        return Err(Error::invalid("posterize levels must be an integer >= 2"));
    }
    let steps = rounded - 1.0;
    let data = img.data().iter().map(|&v| ((v * steps).round() / steps).clamp(0.0, 1.0)).collect();
    let (w, h, c) = img.shape();
    ImageBuffer::from_data(w, h, c, data)
}

/// Brightness, contrast, then saturation, each skipped at its neutral value
/// so the all-ones setting is a bitwise identity.
pub fn color_adjust(
    img: &ImageBuffer,
    brightness: f64,
    contrast: f64,
    saturation: f64,
) -> Result<ImageBuffer> {
    require_color(img, "color_adjust")?;
    for (name, v) in [("brightness", brightness), ("contrast", contrast), ("saturation", saturation)] {
        if !(v >= 0.0) {
            return Err(Error::invalid(format!("color_adjust {name} must be >= 0")));
        }
    }
    let mut out = img.clone();
    if brightness != 1.0 {
        for v in out.data_mut() {
            *v = (*v * brightness).clamp(0.0, 1.0);
        }
    }
    if contrast != 1.0 {
        for v in out.data_mut() {
            *v = (0.5 + contrast * (*v - 0.5)).clamp(0.0, 1.0);
        }
    }
    if saturation != 1.0 {
        for px in out.data_mut().chunks_exact_mut(3) {
            let y = pixel_luma(px);
            for v in px {
                *v = (y + saturation * (*v - y)).clamp(0.0, 1.0);
            }
        }
    }
    Ok(out)
}
