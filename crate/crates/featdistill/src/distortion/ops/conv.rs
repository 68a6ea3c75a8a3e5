//! Shared convolution and sampling machinery for the degradation operators.
//!
//! Edge policy is pinned: reflection (mirror about the edge pixel) for
//! convolutions, replication for warps — see `sample_clamped` for the latter.

use crate::image::ImageBuffer;

/// Mirror an index about the edge pixels, e.g. n=5: -1→1, -2→2, 5→3, 6→2.
pub fn reflect_index(i: isize, n: usize) -> usize {
    debug_assert!(n >= 1);
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut i = i.rem_euclid(period);
    if i >= n as isize {
        i = period - i;
    }
    i as usize
}

/// Continuous reflection of a coordinate into [0, n−1].
fn reflect_coord(x: f64, n: usize) -> f64 {
    if n == 1 {
        return 0.0;
    }
    let period = 2.0 * (n as f64 - 1.0);
    let mut x = x.rem_euclid(period);
    if x > n as f64 - 1.0 {
        x = period - x;
    }
    x
}

/// Bilinear sample with mirrored edges.
pub fn sample_reflect(img: &ImageBuffer, x: f64, y: f64, c: usize) -> f64 {
    let x = reflect_coord(x, img.width());
    let y = reflect_coord(y, img.height());
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let top = img.get(x0, y0, c) * (1.0 - fx) + img.get(x1, y0, c) * fx;
    let bot = img.get(x0, y1, c) * (1.0 - fx) + img.get(x1, y1, c) * fx;
    top * (1.0 - fy) + bot * fy
}

/// Convolve every channel with an odd-length 1-D kernel along one axis,
/// mirroring at the edges.
pub fn convolve_1d(img: &ImageBuffer, kernel: &[f64], horizontal: bool) -> ImageBuffer {
    debug_assert!(kernel.len() % 2 == 1);
    let radius = (kernel.len() / 2) as isize;
    let (w, h, c) = img.shape();
    let mut out = img.clone();
    let data = out.data_mut();
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for (k, weight) in kernel.iter().enumerate() {
                    let off = k as isize - radius;
                    let (sx, sy) = if horizontal {
                        (reflect_index(x as isize + off, w), y)
                    } else {
                        (x, reflect_index(y as isize + off, h))
                    };
                    acc += weight * img.get(sx, sy, ch);
                }
                data[(y * w + x) * c + ch] = acc;
            }
        }
    }
    out
}

/// Normalized Gaussian taps out to 3σ (at least radius 1).
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    debug_assert!(sigma > 0.0);
    let radius = (3.0 * sigma).ceil().max(1.0) as usize;
    let mut k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let t = i as f64 - radius as f64;
            (-t * t / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = k.iter().sum();
    for v in k.iter_mut() {
        *v /= sum;
    }
    k
}

/// Separable Gaussian blur; σ = 0 is the identity.
pub fn gaussian_blur_buf(img: &ImageBuffer, sigma: f64) -> ImageBuffer {
    if sigma == 0.0 {
        return img.clone();
    }
    let k = gaussian_kernel(sigma);
    convolve_1d(&convolve_1d(img, &k, true), &k, false)
}

/// Separable 3×3 box blur.
pub fn box3_blur(img: &ImageBuffer) -> ImageBuffer {
    let k = [1.0 / 3.0; 3];
    convolve_1d(&convolve_1d(img, &k, true), &k, false)
}

/// Uniform disk convolution of integer radius with mirrored edges.
pub fn disk_blur(img: &ImageBuffer, radius: usize) -> ImageBuffer {
    if radius == 0 {
        return img.clone();
    }
    let r = radius as isize;
    let mut offsets = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                offsets.push((dx, dy));
            }
        }
    }
    let weight = 1.0 / offsets.len() as f64;
    let (w, h, c) = img.shape();
    let mut out = img.clone();
    let data = out.data_mut();
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for &(dx, dy) in &offsets {
                    let sx = reflect_index(x as isize + dx, w);
                    let sy = reflect_index(y as isize + dy, h);
                    acc += img.get(sx, sy, ch);
                }
                data[(y * w + x) * c + ch] = acc * weight;
            }
        }
    }
    out
}

/// Average of `len` bilinear samples along a line through each pixel at the
/// given angle (degrees), with mirrored edges. Length 1 is the identity.
pub fn line_blur(img: &ImageBuffer, len: usize, angle_deg: f64) -> ImageBuffer {
    if len <= 1 {
        return img.clone();
    }
    let theta = angle_deg.to_radians();
    let (dx, dy) = (theta.cos(), theta.sin());
    let (w, h, c) = img.shape();
    let mut out = img.clone();
    let data = out.data_mut();
    let half = (len as f64 - 1.0) / 2.0;
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for i in 0..len {
                    let t = i as f64 - half;
                    acc += sample_reflect(img, x as f64 + t * dx, y as f64 + t * dy, ch);
                }
                data[(y * w + x) * c + ch] = acc / len as f64;
            }
        }
    }
    out
}

/// Truncated-sinc low-pass (radius 8). Cutoff 1 is treated as the identity;
/// lower cutoffs ring around sharp edges.
pub fn sinc_lowpass(img: &ImageBuffer, cutoff: f64) -> ImageBuffer {
    if cutoff >= 1.0 {
        return img.clone();
    }
    let radius = 8usize;
    let mut k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let t = i as f64 - radius as f64;
            if t == 0.0 {
                cutoff
            } else {
                let arg = std::f64::consts::PI * cutoff * t;
                cutoff * arg.sin() / arg
            }
        })
        .collect();
    let sum: f64 = k.iter().sum();
    for v in k.iter_mut() {
        *v /= sum;
    }
    convolve_1d(&convolve_1d(img, &k, true), &k, false)
}
