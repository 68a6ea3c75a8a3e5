//! Geometric warps. All warps inverse-map output pixels to source
//! coordinates and sample bilinearly with edge replication, so the output
//! shape always matches the input.

use crate::error::{Error, Result};
use crate::image::{sample_clamped, ImageBuffer};
use crate::rng::SeededRng;

fn warp_with<F>(img: &ImageBuffer, mut src_of: F) -> Result<ImageBuffer>
where
    F: FnMut(f64, f64) -> (f64, f64),
{
    let (w, h, c) = img.shape();
    let mut data = Vec::with_capacity(w * h * c);
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = src_of(x as f64, y as f64);
            for ch in 0..c {
                data.push(sample_clamped(img, sx, sy, ch));
            }
        }
    }
    ImageBuffer::from_data(w, h, c, data)
}

/// Radial remap `r_src = r * (1 + k * r^2)` with radius normalized so the
/// image corners sit at r = 1. Positive `k` bows edges inward (barrel),
/// negative bows them outward (pincushion).
fn radial(img: &ImageBuffer, k: f64) -> Result<ImageBuffer> {
    if !k.is_finite() {
        return Err(Error::invalid("radial distortion coefficient must be finite"));
    }
    let (w, h, _) = img.shape();
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let rmax = (cx * cx + cy * cy).sqrt();
    if rmax == 0.0 {
        return Ok(img.clone());
    }
    warp_with(img, |x, y| {
        let (dx, dy) = (x - cx, y - cy);
        let r2 = (dx * dx + dy * dy) / (rmax * rmax);
        let s = 1.0 + k * r2;
        (cx + dx * s, cy + dy * s)
    })
}

pub fn barrel_distortion(img: &ImageBuffer, k: f64) -> Result<ImageBuffer> {
    if !(k >= 0.0) {
        return Err(Error::invalid("barrel_distortion k must be >= 0"));
    }
    radial(img, k)
}

pub fn pincushion_distortion(img: &ImageBuffer, k: f64) -> Result<ImageBuffer> {
    if !(k >= 0.0) {
        return Err(Error::invalid("pincushion_distortion k must be >= 0"));
    }
    radial(img, -k)
}

/// Signed radial distortion; the sign is chosen upstream when parameters are
/// sampled.
pub fn lens_distortion(img: &ImageBuffer, k: f64) -> Result<ImageBuffer> {
    radial(img, k)
}

/// Downscale by `scale` and upscale back, both bilinear. At `scale = 1` the
/// resize is a same-size copy and the image is returned unchanged.
pub fn down_up_resize(img: &ImageBuffer, scale: f64) -> Result<ImageBuffer> {
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(Error::invalid("down_up_resize scale must be in (0, 1]"));
    }
    let (w, h, _) = img.shape();
    let dw = ((w as f64 * scale).round() as usize).max(1);
    let dh = ((h as f64 * scale).round() as usize).max(1);
    let small = crate::image::resize_bilinear(img, dw, dh);
    Ok(crate::image::resize_bilinear(&small, w, h))
}

/// Rotation about the image center; uncovered corners replicate edge pixels.
pub fn rotation_crop(img: &ImageBuffer, angle_deg: f64) -> Result<ImageBuffer> {
    if !angle_deg.is_finite() {
        return Err(Error::invalid("rotation_crop angle must be finite"));
    }
    if angle_deg == 0.0 {
        return Ok(img.clone());
    }
    let (w, h, _) = img.shape();
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let theta = -angle_deg.to_radians();
    let (sin, cos) = theta.sin_cos();
    warp_with(img, |x, y| {
        let (dx, dy) = (x - cx, y - cy);
        (cx + cos * dx - sin * dy, cy + sin * dx + cos * dy)
    })
}

/// Solves for the 3x3 homography (h33 = 1) that maps each `from` point to the
/// matching `to` point, via an 8x8 linear system with partial pivoting.
fn homography(from: &[(f64, f64); 4], to: &[(f64, f64); 4]) -> Result<[f64; 9]> {
    let mut m = [[0.0f64; 9]; 8];
    for (i, (&(xf, yf), &(xt, yt))) in from.iter().zip(to.iter()).enumerate() {
        m[2 * i] = [xf, yf, 1.0, 0.0, 0.0, 0.0, -xt * xf, -xt * yf, xt];
        m[2 * i + 1] = [0.0, 0.0, 0.0, xf, yf, 1.0, -yt * xf, -yt * yf, yt];
    }
    for col in 0..8 {
        let pivot = (col..8)
            .max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())
            .unwrap();
        if m[pivot][col].abs() < 1e-12 {
            return Err(Error::invalid("degenerate corner layout for perspective warp"));
        }
        m.swap(col, pivot);
        for row in 0..8 {
            if row != col {
                let f = m[row][col] / m[col][col];
                for k in col..9 {
                    m[row][k] -= f * m[col][k];
                }
            }
        }
    }
    let mut h = [0.0f64; 9];
    for i in 0..8 {
        h[i] = m[i][8] / m[i][i];
    }
    h[8] = 1.0;
    Ok(h)
}

fn apply_homography(h: &[f64; 9], x: f64, y: f64) -> (f64, f64) {
    let d = h[6] * x + h[7] * y + h[8];
    ((h[0] * x + h[1] * y + h[2]) / d, (h[3] * x + h[4] * y + h[5]) / d)
}

/// Random projective warp: each source corner is displaced by up to
/// `corner_jitter * min(w, h)` in both axes (eight uniform draws, TL/TR/BR/BL
/// order, x before y), and the image is resampled through the induced
/// homography.
pub fn perspective_warp(
    img: &ImageBuffer,
    rng: &mut SeededRng,
    corner_jitter: f64,
) -> Result<ImageBuffer> {
    if !(0.0..=0.25).contains(&corner_jitter) {
        return Err(Error::invalid("perspective_warp corner_jitter must be in [0, 0.25]"));
    }
    let (w, h, _) = img.shape();
    let (wf, hf) = (w as f64 - 1.0, h as f64 - 1.0);
    let reach = corner_jitter * (w.min(h)) as f64;
    let corners = [(0.0, 0.0), (wf, 0.0), (wf, hf), (0.0, hf)];
    let mut jittered = corners;
    for p in jittered.iter_mut() {
        p.0 += rng.uniform(-reach, reach);
        p.1 += rng.uniform(-reach, reach);
    }
    let h_mat = homography(&corners, &jittered)?;
    warp_with(img, |x, y| apply_homography(&h_mat, x, y))
}
