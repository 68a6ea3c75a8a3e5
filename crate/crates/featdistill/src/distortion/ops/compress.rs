//! Compression-style corruptions: real JPEG round-trips, wavelet coefficient
//! quantization, and chroma-plane blockiness.

use crate::error::{Error, Result};
use crate::image::{io::jpeg_roundtrip, ImageBuffer};

use super::{LUMA_B as YB, LUMA_G as YG, LUMA_R as YR};

fn quality_from_param(q: f64, what: &str) -> Result<u8> {
    let rounded = q.round();
    if !(1.0..=100.0).contains(&rounded) || (q - rounded).abs() > 1e-9 {
        return Err(Error::invalid(format!("{what} must be an integer in [1, 100]")));
    }
    Ok(rounded as u8)
}

/// Single JPEG encode/decode pass at the given quality.
pub fn jpeg(img: &ImageBuffer, quality: f64) -> Result<ImageBuffer> {
    jpeg_roundtrip(img, quality_from_param(quality, "jpeg quality")?)
}

/// Two JPEG passes in sequence, as when a shared image is re-encoded.
pub fn recompress(img: &ImageBuffer, quality1: f64, quality2: f64) -> Result<ImageBuffer> {
    let first = jpeg_roundtrip(img, quality_from_param(quality1, "recompress quality1")?)?;
    jpeg_roundtrip(&first, quality_from_param(quality2, "recompress quality2")?)
}

/// One orthonormal Haar pairing step. Odd-length tails pass through to the
/// approximation half unchanged, so any length round-trips exactly.
fn haar_step(values: &mut [f64], scratch: &mut Vec<f64>) {
    let n = values.len();
    let pairs = n / 2;
    scratch.clear();
    scratch.extend_from_slice(values);
    let s = std::f64::consts::SQRT_2;
    for i in 0..pairs {
        values[i] = (scratch[2 * i] + scratch[2 * i + 1]) / s;
        values[pairs + n % 2 + i] = (scratch[2 * i] - scratch[2 * i + 1]) / s;
    }
    if n % 2 == 1 {
        values[pairs] = scratch[n - 1];
    }
}

fn haar_step_inverse(values: &mut [f64], scratch: &mut Vec<f64>) {
    let n = values.len();
    let pairs = n / 2;
    scratch.clear();
    scratch.extend_from_slice(values);
    let s = std::f64::consts::SQRT_2;
    for i in 0..pairs {
        values[2 * i] = (scratch[i] + scratch[pairs + n % 2 + i]) / s;
        values[2 * i + 1] = (scratch[i] - scratch[pairs + n % 2 + i]) / s;
    }
    if n % 2 == 1 {
        values[n - 1] = scratch[pairs];
    }
}

/// Approximation-corner size after one pairing step.
fn half_up(n: usize) -> usize {
    n / 2 + n % 2
}

struct Plane {
    w: usize,
    data: Vec<f64>,
}

impl Plane {
    fn row(&mut self, y: usize, w: usize) -> &mut [f64] {
        &mut self.data[y * self.w..y * self.w + w]
    }

    fn forward_level(&mut self, w: usize, h: usize, col: &mut Vec<f64>, scratch: &mut Vec<f64>) {
        for y in 0..h {
            haar_step(self.row(y, w), scratch);
        }
        for x in 0..w {
            col.clear();
            col.extend((0..h).map(|y| self.data[y * self.w + x]));
            haar_step(col, scratch);
            for y in 0..h {
                self.data[y * self.w + x] = col[y];
            }
        }
    }

    fn inverse_level(&mut self, w: usize, h: usize, col: &mut Vec<f64>, scratch: &mut Vec<f64>) {
        for x in 0..w {
            col.clear();
            col.extend((0..h).map(|y| self.data[y * self.w + x]));
            haar_step_inverse(col, scratch);
            for y in 0..h {
                self.data[y * self.w + x] = col[y];
            }
        }
        for y in 0..h {
            haar_step_inverse(self.row(y, w), scratch);
        }
    }
}

const WAVELET_LEVELS: usize = 3;

/// Three-level orthonormal Haar transform per channel; detail coefficients are
/// snapped to multiples of `q`, approximation coefficients pass through.
pub fn wavelet_quant(img: &ImageBuffer, q: f64) -> Result<ImageBuffer> {
    if !(q >= 0.0) {
        return Err(Error::invalid("wavelet_quant q must be >= 0"));
    }
    if q == 0.0 {
        return Ok(img.clone());
    }
    let (w, h, c) = img.shape();
    let mut out = Vec::with_capacity(w * h * c);
    let mut col = Vec::new();
    let mut scratch = Vec::new();
    for ch in 0..c {
        let mut plane = Plane {
            w,
            data: (0..h).flat_map(|y| (0..w).map(move |x| (y, x))).map(|(y, x)| img.get(x, y, ch)).collect(),
        };
        let mut dims = Vec::new();
        let (mut lw, mut lh) = (w, h);
        for _ in 0..WAVELET_LEVELS {
            if lw < 2 && lh < 2 {
                break;
            }
            plane.forward_level(lw, lh, &mut col, &mut scratch);
            dims.push((lw, lh));
            lw = half_up(lw);
            lh = half_up(lh);
        }
        // Everything outside the final approximation corner is detail.
        let (aw, ah) = (lw, lh);
        for y in 0..h {
            for x in 0..w {
                if y >= ah || x >= aw {
                    let v = &mut plane.data[y * w + x];
                    *v = (*v / q).round() * q;
                }
            }
        }
        for &(lw, lh) in dims.iter().rev() {
            plane.inverse_level(lw, lh, &mut col, &mut scratch);
        }
        out.extend(plane.data.iter().map(|v| v.clamp(0.0, 1.0)));
    }
    // out is channel-planar; interleave back to HWC
    let mut interleaved = vec![0.0; w * h * c];
    for ch in 0..c {
        for i in 0..w * h {
            interleaved[i * c + ch] = out[ch * w * h + i];
        }
    }
    ImageBuffer::from_data(w, h, c, interleaved)
}

/// Averages chroma planes over `factor`-sized blocks while keeping luma
/// untouched, mimicking aggressive chroma subsampling. Requires 3 channels.
pub fn chroma_blockiness(img: &ImageBuffer, factor: f64) -> Result<ImageBuffer> {
    let k = factor.round();
    if !(factor >= 1.0) || (factor - k).abs() > 1e-9 {
        return Err(Error::invalid("chroma_blockiness factor must be an integer >= 1"));
    }
    let (w, h, c) = img.shape();
    if c != 3 {
        return Err(Error::invalid("chroma_blockiness requires a 3-channel image"));
    }
    let k = k as usize;

    let mut luma = vec![0.0; w * h];
    let mut cb = vec![0.0; w * h];
    let mut cr = vec![0.0; w * h];
    for i in 0..w * h {
        let (r, g, b) = (img.data()[3 * i], img.data()[3 * i + 1], img.data()[3 * i + 2]);
        let y = YR * r + YG * g + YB * b;
        luma[i] = y;
        cb[i] = (b - y) / (2.0 * (1.0 - YB)) + 0.5;
        cr[i] = (r - y) / (2.0 * (1.0 - YR)) + 0.5;
    }

    for plane in [&mut cb, &mut cr] {
        for by in (0..h).step_by(k) {
            for bx in (0..w).step_by(k) {
                let (eh, ew) = ((h - by).min(k), (w - bx).min(k));
                let mut sum = 0.0;
                for y in by..by + eh {
                    for x in bx..bx + ew {
                        sum += plane[y * w + x];
                    }
                }
                let mean = sum / (eh * ew) as f64;
                for y in by..by + eh {
                    for x in bx..bx + ew {
                        plane[y * w + x] = mean;
                    }
                }
            }
        }
    }

    let mut data = Vec::with_capacity(w * h * 3);
    for i in 0..w * h {
        let y = luma[i];
        let r = y + 2.0 * (1.0 - YR) * (cr[i] - 0.5);
        let b = y + 2.0 * (1.0 - YB) * (cb[i] - 0.5);
        let g = (y - YR * r - YB * b) / YG;
        data.push(r.clamp(0.0, 1.0));
        data.push(g.clamp(0.0, 1.0));
        data.push(b.clamp(0.0, 1.0));
    }
    ImageBuffer::from_data(w, h, 3, data)
}
