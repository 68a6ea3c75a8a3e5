//! Environmental overlays: fog, rain streaks, snow flakes, and a soft shadow.
//! Each draws from the caller's generator in a fixed order, so outputs are a
//! pure function of (image, parameters, seed).

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::rng::SeededRng;

const FOG_GRID: usize = 129; // 2^7 + 1, as diamond-square requires
const FOG_TONE: f64 = 0.9;

/// Plasma heightmap on a 129x129 grid, normalized to [0, 1].
fn diamond_square(rng: &mut SeededRng) -> Vec<f64> {
    let n = FOG_GRID;
    let mut map = vec![0.0f64; n * n];
    for &(y, x) in &[(0, 0), (0, n - 1), (n - 1, 0), (n - 1, n - 1)] {
        map[y * n + x] = rng.next_f64();
    }
    let mut step = n - 1;
    let mut amp = 1.0;
    while step > 1 {
        let half = step / 2;
        for y in (half..n).step_by(step) {
            for x in (half..n).step_by(step) {
                let sum = map[(y - half) * n + (x - half)]
                    + map[(y - half) * n + (x + half)]
                    + map[(y + half) * n + (x - half)]
                    + map[(y + half) * n + (x + half)];
                map[y * n + x] = sum / 4.0 + rng.uniform(-amp, amp);
            }
        }
        for y in (0..n).step_by(half) {
            let start = if (y / half) % 2 == 0 { half } else { 0 };
            for x in (start..n).step_by(step) {
                let mut sum = 0.0;
                let mut count = 0.0;
                for (ny, nx) in [
                    (y as isize - half as isize, x as isize),
                    (y as isize + half as isize, x as isize),
                    (y as isize, x as isize - half as isize),
                    (y as isize, x as isize + half as isize),
                ] {
                    if ny >= 0 && nx >= 0 && (ny as usize) < n && (nx as usize) < n {
                        sum += map[ny as usize * n + nx as usize];
                        count += 1.0;
                    }
                }
                map[y * n + x] = sum / count + rng.uniform(-amp, amp);
            }
        }
        step = half;
        amp *= 0.5;
    }
    let (mut lo, mut hi) = (f64::MAX, f64::MIN);
    for &v in &map {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi > lo {
        for v in map.iter_mut() {
            *v = (*v - lo) / (hi - lo);
        }
    } else {
        map.fill(0.5);
    }
    map
}

fn sample_grid(map: &[f64], n: usize, u: f64, v: f64) -> f64 {
    let x = u * (n - 1) as f64;
    let y = v * (n - 1) as f64;
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(n - 1), (y0 + 1).min(n - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let top = map[y0 * n + x0] * (1.0 - fx) + map[y0 * n + x1] * fx;
    let bot = map[y1 * n + x0] * (1.0 - fx) + map[y1 * n + x1] * fx;
    top * (1.0 - fy) + bot * fy
}

/// Depth-weighted haze: a plasma depth field drives per-pixel transmission
/// `exp(-density * depth)` toward a bright fog tone. All channels share the
/// same field.
pub fn fog(img: &ImageBuffer, rng: &mut SeededRng, density: f64) -> Result<ImageBuffer> {
    if !(density >= 0.0) {
        return Err(Error::invalid("fog density must be >= 0"));
    }
    if density == 0.0 {
        return Ok(img.clone());
    }
    let map = diamond_square(rng);
    let (w, h, c) = img.shape();
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            let u = if w > 1 { x as f64 / (w - 1) as f64 } else { 0.0 };
            let v = if h > 1 { y as f64 / (h - 1) as f64 } else { 0.0 };
            // keep a depth floor so full density always leaves some haze
            let depth = 0.05 + 0.95 * sample_grid(&map, FOG_GRID, u, v);
            let t = (-density * depth).exp();
            for ch in 0..c {
                let i = (y * w + x) * c + ch;
                let val = &mut out.data_mut()[i];
                *val = (t * *val + (1.0 - t) * FOG_TONE).clamp(0.0, 1.0);
            }
        }
    }
    Ok(out)
}

/// Splats `weight` at a fractional position into an accumulation mask.
fn splat(mask: &mut [f64], w: usize, h: usize, x: f64, y: f64, weight: f64) {
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    for (dy, wy) in [(0.0, 1.0 - fy), (1.0, fy)] {
        for (dx, wx) in [(0.0, 1.0 - fx), (1.0, fx)] {
            let (px, py) = (x0 + dx, y0 + dy);
            if px >= 0.0 && py >= 0.0 && (px as usize) < w && (py as usize) < h {
                mask[py as usize * w + px as usize] += weight * wx * wy;
            }
        }
    }
}

fn add_mask(img: &ImageBuffer, mask: &[f64], gain: f64) -> ImageBuffer {
    let (w, h, c) = img.shape();
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            let m = mask[y * w + x].min(1.0);
            if m > 0.0 {
                for ch in 0..c {
                    let val = &mut out.data_mut()[(y * w + x) * c + ch];
                    *val = (*val + gain * m).clamp(0.0, 1.0);
                }
            }
        }
    }
    out
}

/// Bright near-vertical streaks. `density` is streaks per pixel; each streak
/// draws its start point, then its angle within +/- 12 degrees of vertical.
pub fn rain(
    img: &ImageBuffer,
    rng: &mut SeededRng,
    density: f64,
    length: f64,
    intensity: f64,
) -> Result<ImageBuffer> {
    if !(density >= 0.0) || !(length >= 1.0) || !(intensity >= 0.0) {
        return Err(Error::invalid(
            "rain needs density >= 0, length >= 1, intensity >= 0",
        ));
    }
    let (w, h, _) = img.shape();
    let drops = (density * (w * h) as f64).round() as usize;
    if drops == 0 {
        return Ok(img.clone());
    }
    let mut mask = vec![0.0f64; w * h];
    for _ in 0..drops {
        let x0 = rng.uniform(0.0, w as f64 - 1.0);
        let y0 = rng.uniform(0.0, h as f64 - 1.0);
        let angle = (90.0 + rng.uniform(-12.0, 12.0)).to_radians();
        let (dy, dx) = angle.sin_cos();
        let steps = length.ceil() as usize;
        for s in 0..steps {
            let t = s as f64;
            splat(&mut mask, w, h, x0 + dx * t, y0 + dy * t, 1.0);
        }
    }
    Ok(add_mask(img, &mask, intensity))
}

/// Soft bright disks. `density` is flakes per pixel.
pub fn snow(img: &ImageBuffer, rng: &mut SeededRng, density: f64, radius: f64) -> Result<ImageBuffer> {
    if !(density >= 0.0) || !(radius > 0.0) {
        return Err(Error::invalid("snow needs density >= 0 and radius > 0"));
    }
    let (w, h, _) = img.shape();
    let flakes = (density * (w * h) as f64).round() as usize;
    if flakes == 0 {
        return Ok(img.clone());
    }
    let mut mask = vec![0.0f64; w * h];
    let reach = radius.ceil() as isize;
    for _ in 0..flakes {
        let cx = rng.uniform(0.0, w as f64 - 1.0);
        let cy = rng.uniform(0.0, h as f64 - 1.0);
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                let (px, py) = (cx.round() as isize + dx, cy.round() as isize + dy);
                if px < 0 || py < 0 || px as usize >= w || py as usize >= h {
                    continue;
                }
                let d = ((px as f64 - cx).powi(2) + (py as f64 - cy).powi(2)).sqrt();
                let soft = (1.0 - d / radius).max(0.0);
                mask[py as usize * w + px as usize] += soft;
            }
        }
    }
    Ok(add_mask(img, &mask, 0.8))
}

/// Darkens one side of a seeded line with a smoothstep falloff whose width is
/// `softness * min(w, h)` pixels.
pub fn shadow_mask(
    img: &ImageBuffer,
    rng: &mut SeededRng,
    opacity: f64,
    softness: f64,
) -> Result<ImageBuffer> {
    if !(0.0..=1.0).contains(&opacity) {
        return Err(Error::invalid("shadow_mask opacity must be in [0, 1]"));
    }
    if !(softness > 0.0) {
        return Err(Error::invalid("shadow_mask softness must be > 0"));
    }
    if opacity == 0.0 {
        return Ok(img.clone());
    }
    let (w, h, c) = img.shape();
    let px0 = rng.uniform(0.0, w as f64 - 1.0);
    let py0 = rng.uniform(0.0, h as f64 - 1.0);
    let theta = rng.uniform(0.0, std::f64::consts::TAU);
    let (ny, nx) = theta.sin_cos();
    let width = softness * w.min(h) as f64;
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            let sd = (x as f64 - px0) * nx + (y as f64 - py0) * ny;
            let t = (sd / width + 0.5).clamp(0.0, 1.0);
            let smooth = t * t * (3.0 - 2.0 * t);
            let shade = 1.0 - opacity * smooth;
            for ch in 0..c {
                out.data_mut()[(y * w + x) * c + ch] *= shade;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::natural_image;

    #[test]
    fn zero_strength_is_bitwise_identity() {
        let img = natural_image(16, 24);
        assert_eq!(fog(&img, &mut SeededRng::new(1), 0.0).unwrap().data(), img.data());
        assert_eq!(rain(&img, &mut SeededRng::new(1), 0.0, 10.0, 0.4).unwrap().data(), img.data());
        assert_eq!(snow(&img, &mut SeededRng::new(1), 0.0, 2.0).unwrap().data(), img.data());
        assert_eq!(shadow_mask(&img, &mut SeededRng::new(1), 0.0, 0.2).unwrap().data(), img.data());
    }

    #[test]
    fn fog_brightens_dark_scenes_and_saturates_with_density() {
        let img = ImageBuffer::constant(48, 40, 3, 0.2).unwrap();
        let mean = |im: &ImageBuffer| im.data().iter().sum::<f64>() / im.data().len() as f64;
        let light = fog(&img, &mut SeededRng::new(5), 0.25).unwrap();
        let heavy = fog(&img, &mut SeededRng::new(5), 1.0).unwrap();
        assert!(mean(&light) > 0.2);
        assert!(mean(&heavy) > mean(&light));
        assert!(heavy.data().iter().all(|v| (0.0..=1.0).contains(v)));
        // the same seeded field must drive every channel
        for px in heavy.data().chunks_exact(3) {
            assert!((px[0] - px[1]).abs() < 1e-12 && (px[1] - px[2]).abs() < 1e-12);
        }
    }

    #[test]
    fn fog_never_fully_clears_at_max_density() {
        // depth has a floor, so even the shallowest pixel keeps some haze
        let img = ImageBuffer::constant(32, 32, 1, 0.0).unwrap();
        let out = fog(&img, &mut SeededRng::new(9), 1.0).unwrap();
        assert!(out.data().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn rain_adds_bright_streaks_deterministically() {
        let img = ImageBuffer::constant(64, 64, 3, 0.3).unwrap();
        let a = rain(&img, &mut SeededRng::new(21), 0.002, 12.0, 0.5).unwrap();
        let b = rain(&img, &mut SeededRng::new(21), 0.002, 12.0, 0.5).unwrap();
        assert_eq!(a.data(), b.data());
        let changed = a.data().iter().zip(img.data()).filter(|(x, y)| x > y).count();
        assert!(changed > 0);
        assert!(a.data().iter().zip(img.data()).all(|(x, y)| x >= y));
        let dense = rain(&img, &mut SeededRng::new(21), 0.01, 12.0, 0.5).unwrap();
        let changed_dense = dense.data().iter().zip(img.data()).filter(|(x, y)| x > y).count();
        assert!(changed_dense > changed);
    }

    #[test]
    fn snow_spots_are_local_and_bounded() {
        let img = ImageBuffer::constant(64, 64, 1, 0.1).unwrap();
        let out = snow(&img, &mut SeededRng::new(31), 0.001, 2.0).unwrap();
        let changed = out.data().iter().zip(img.data()).filter(|(x, y)| x > y).count();
        // 4 flakes, each touching at most a (2r+1)^2 patch
        assert!(changed > 0 && changed <= 4 * 25);
        assert!(out.data().iter().all(|&v| v <= 0.1 + 0.8 + 1e-12));
    }

    #[test]
    fn shadow_only_darkens_and_respects_opacity_floor() {
        let img = natural_image(17, 32);
        let out = shadow_mask(&img, &mut SeededRng::new(41), 0.4, 0.2).unwrap();
        for (o, i) in out.data().iter().zip(img.data()) {
            assert!(*o <= *i + 1e-12);
            assert!(*o >= i * (1.0 - 0.4) - 1e-12);
        }
        assert_ne!(out.data(), img.data());
    }
}
