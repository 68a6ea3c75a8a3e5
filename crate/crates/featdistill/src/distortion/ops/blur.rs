//! Blur family: Gaussian, motion, defocus, atmospheric, zoom — plus the
//! official-style sharpen/smooth filter, which reuses the same kernels.

use super::conv::{box3_blur, disk_blur, gaussian_blur_buf, line_blur, sinc_lowpass};
use crate::error::{Error, Result};
use crate::image::{sample_clamped, ImageBuffer};

pub fn gaussian_blur(img: &ImageBuffer, sigma: f64) -> Result<ImageBuffer> {
    if sigma < 0.0 {
        return Err(Error::invalid("blur sigma must be >= 0"));
    }
    Ok(gaussian_blur_buf(img, sigma))
}

pub fn motion_blur(img: &ImageBuffer, kernel_len: usize, angle_deg: f64) -> Result<ImageBuffer> {
    if kernel_len < 1 {
        return Err(Error::invalid("kernel_len must be >= 1"));
    }
    Ok(line_blur(img, kernel_len, angle_deg))
}

pub fn defocus_blur(img: &ImageBuffer, radius: usize) -> Result<ImageBuffer> {
    Ok(disk_blur(img, radius))
}

/// Long-tailed blur: (1−w)·G(σ) + w·G(3σ), blending a sharp core with a wide
/// halo. σ = 0 is the identity regardless of the tail weight.
pub fn atmospheric_blur(img: &ImageBuffer, sigma: f64, tail_weight: f64) -> Result<ImageBuffer> {
    if sigma < 0.0 {
        return Err(Error::invalid("blur sigma must be >= 0"));
    }
    if !(0.0..=1.0).contains(&tail_weight) {
        return Err(Error::invalid("tail_weight must lie in [0,1]"));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let core = gaussian_blur_buf(img, sigma);
    let halo = gaussian_blur_buf(img, 3.0 * sigma);
    let mut out = core;
    for (o, h) in out.data_mut().iter_mut().zip(halo.data()) {
        *o = (1.0 - tail_weight) * *o + tail_weight * h;
    }
    Ok(out)
}

/// Average of 7 center scalings between 1 and 1+strength.
pub fn zoom_blur(img: &ImageBuffer, strength: f64) -> Result<ImageBuffer> {
    if strength < 0.0 {
        return Err(Error::invalid("zoom strength must be >= 0"));
    }
    if strength == 0.0 {
        return Ok(img.clone());
    }
    const STEPS: usize = 7;
    let (w, h, c) = img.shape();
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let mut out = img.clone();
    let data = out.data_mut();
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for i in 0..STEPS {
                    let s = 1.0 + strength * i as f64 / (STEPS - 1) as f64;
                    let sx = cx + (x as f64 - cx) / s;
                    let sy = cy + (y as f64 - cy) / s;
                    acc += sample_clamped(img, sx, sy, ch);
                }
                data[(y * w + x) * c + ch] = acc / STEPS as f64;
            }
        }
    }
    Ok(out)
}

/// Official-style filter: mode 0 blends toward a 3×3 box blur, mode 1 adds an
/// unsharp-mask term. Strength 0 is the identity in both modes.
pub fn official_filter(img: &ImageBuffer, mode: u8, strength: f64) -> Result<ImageBuffer> {
    if mode > 1 {
        return Err(Error::invalid(format!("filter mode {mode} outside {{0,1}}")));
    }
    if !(0.0..=1.0).contains(&strength) {
        return Err(Error::invalid("filter strength must lie in [0,1]"));
    }
    if strength == 0.0 {
        return Ok(img.clone());
    }
    let mut out = img.clone();
    if mode == 0 {
        let soft = box3_blur(img);
        for (o, s) in out.data_mut().iter_mut().zip(soft.data()) {
            *o = (1.0 - strength) * *o + strength * s;
        }
    } else {
        let soft = gaussian_blur_buf(img, 1.0);
        for (o, s) in out.data_mut().iter_mut().zip(soft.data()) {
            *o = (*o + strength * (*o - s)).clamp(0.0, 1.0);
        }
    }
    Ok(out)
}

/// Truncated-sinc low-pass with visible ringing at harsh cutoffs; grouped
/// with the compression artifacts by the catalog.
pub fn ringing(img: &ImageBuffer, cutoff: f64) -> Result<ImageBuffer> {
    if !(0.0 < cutoff && cutoff <= 1.0) {
        return Err(Error::invalid("ringing cutoff must lie in (0,1]"));
    }
    let mut out = sinc_lowpass(img, cutoff);
    out.clamp_in_place();
    Ok(out)
}
