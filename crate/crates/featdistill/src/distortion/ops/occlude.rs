//! Occlusions: gray rectangles, glyph-like text, a watermark lattice, and a
//! screenshot-style frame.

use crate::error::{Error, Result};
use crate::image::{resize_bilinear, ImageBuffer};
use crate::rng::SeededRng;

fn fill_rect(img: &mut ImageBuffer, x0: usize, y0: usize, rw: usize, rh: usize, value: f64) {
    let (w, _, c) = img.shape();
    for y in y0..y0 + rh {
        for x in x0..x0 + rw {
            for ch in 0..c {
                img.data_mut()[(y * w + x) * c + ch] = value;
            }
        }
    }
}

/// Covers the image with `count` seeded gray rectangles. Each side is at most
/// `max_frac` of the matching image dimension. Per rectangle the draws are:
/// width fraction, height fraction, x, y, gray level.
pub fn random_occlusion(
    img: &ImageBuffer,
    rng: &mut SeededRng,
    count: f64,
    max_frac: f64,
) -> Result<ImageBuffer> {
    let n = count.round();
    if !(n >= 1.0) || (count - n).abs() > 1e-9 {
        return Err(Error::invalid("random_occlusion count must be an integer >= 1"));
    }
    if !(max_frac > 0.0 && max_frac <= 0.5) {
        return Err(Error::invalid("random_occlusion max_frac must be in (0, 0.5]"));
    }
    let (w, h, _) = img.shape();
    let mut out = img.clone();
    for _ in 0..n as usize {
        let rw = ((rng.uniform(0.3, 1.0) * max_frac * w as f64).round() as usize).clamp(1, w);
        let rh = ((rng.uniform(0.3, 1.0) * max_frac * h as f64).round() as usize).clamp(1, h);
        let x0 = rng.below((w - rw + 1) as u64) as usize;
        let y0 = rng.below((h - rh + 1) as u64) as usize;
        let gray = rng.uniform(0.15, 0.85);
        fill_rect(&mut out, x0, y0, rw, rh, gray);
    }
    Ok(out)
}

const GLYPH_COLS: usize = 5;
const GLYPH_ROWS: usize = 7;
const GLYPH_COUNT: usize = 10;
const GLYPH_FILL_PROB: f64 = 0.45;

/// Stamps a row of procedural 5x7 glyphs. Draw order: ink coin, x, y, then
/// one cell coin per glyph in row-major order. `height_frac` sets the glyph
/// height relative to the image.
pub fn text_overlay(
    img: &ImageBuffer,
    rng: &mut SeededRng,
    height_frac: f64,
    opacity: f64,
) -> Result<ImageBuffer> {
    if !(height_frac > 0.0 && height_frac <= 0.5) {
        return Err(Error::invalid("text_overlay height_frac must be in (0, 0.5]"));
    }
    if !(0.0..=1.0).contains(&opacity) {
        return Err(Error::invalid("text_overlay opacity must be in [0, 1]"));
    }
    if opacity == 0.0 {
        return Ok(img.clone());
    }
    let (w, h, c) = img.shape();
    let cell = ((height_frac * h as f64 / GLYPH_ROWS as f64).round() as usize).max(1);
    let glyph_w = GLYPH_COLS * cell;
    let advance = glyph_w + cell; // one empty column of cells between glyphs
    let glyphs = (1 + (w.saturating_sub(glyph_w)) / advance).min(GLYPH_COUNT);
    let text_w = glyph_w + (glyphs - 1) * advance;
    let text_h = GLYPH_ROWS * cell;

    let ink = if rng.coin() { 0.98 } else { 0.02 };
    let x0 = rng.below((w.saturating_sub(text_w) + 1) as u64) as usize;
    let y0 = rng.below((h.saturating_sub(text_h) + 1) as u64) as usize;

    let mut out = img.clone();
    for g in 0..glyphs {
        let gx = x0 + g * advance;
        for row in 0..GLYPH_ROWS {
            for col in 0..GLYPH_COLS {
                let on = rng.next_f64() < GLYPH_FILL_PROB;
                if !on {
                    continue;
                }
                for y in (y0 + row * cell)..(y0 + (row + 1) * cell).min(h) {
                    for x in (gx + col * cell)..(gx + (col + 1) * cell).min(w) {
                        for ch in 0..c {
                            let v = &mut out.data_mut()[(y * w + x) * c + ch];
                            *v = (1.0 - opacity) * *v + opacity * ink;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Mid-gray crosses on a staggered lattice; `period_frac` scales the lattice
/// pitch by the shorter image side. Fully deterministic.
pub fn watermark_grid(img: &ImageBuffer, period_frac: f64, opacity: f64) -> Result<ImageBuffer> {
    if !(period_frac > 0.0 && period_frac <= 1.0) {
        return Err(Error::invalid("watermark_grid period_frac must be in (0, 1]"));
    }
    if !(0.0..=1.0).contains(&opacity) {
        return Err(Error::invalid("watermark_grid opacity must be in [0, 1]"));
    }
    if opacity == 0.0 {
        return Ok(img.clone());
    }
    let (w, h, c) = img.shape();
    let period = ((period_frac * w.min(h) as f64).round() as usize).max(4);
    let arm = (period / 8).max(1);
    let mut out = img.clone();
    let mut row = 0usize;
    let mut cy = period / 2;
    while cy < h {
        let offset = if row % 2 == 1 { period / 2 } else { 0 };
        let mut cx = period / 2 + offset;
        while cx < w {
            for d in -(arm as isize)..=arm as isize {
                let mut points = vec![(cx as isize + d, cy as isize)];
                if d != 0 {
                    // the center cell belongs to the horizontal arm only
                    points.push((cx as isize, cy as isize + d));
                }
                for (px, py) in points {
                    if px >= 0 && py >= 0 && (px as usize) < w && (py as usize) < h {
                        for ch in 0..c {
                            let v = &mut out.data_mut()[(py as usize * w + px as usize) * c + ch];
                            *v = (1.0 - opacity) * *v + opacity * 0.5;
                        }
                    }
                }
            }
            cx += period;
        }
        cy += period;
        row += 1;
    }
    Ok(out)
}

const BORDER_TONE: f64 = 0.92;
const BAR_TONE: f64 = 0.13;

/// Shrinks the image into a light frame with a dark title bar, as when a
/// screenshot of the image is taken. Zero fractions reproduce the input.
pub fn screenshot_border(img: &ImageBuffer, border_frac: f64, bar_frac: f64) -> Result<ImageBuffer> {
    if !(0.0..=0.25).contains(&border_frac) || !(0.0..=0.25).contains(&bar_frac) {
        return Err(Error::invalid("screenshot_border fractions must be in [0, 0.25]"));
    }
    let (w, h, c) = img.shape();
    let bw = (border_frac * w.min(h) as f64).round() as usize;
    let bar = (bar_frac * h as f64).round() as usize;
    let inner_w = w.saturating_sub(2 * bw);
    let inner_h = h.saturating_sub(2 * bw + bar);
    if inner_w == 0 || inner_h == 0 {
        return Err(Error::invalid("screenshot_border leaves no room for content"));
    }
    if bw == 0 && bar == 0 {
        return Ok(img.clone());
    }
    let content = resize_bilinear(img, inner_w, inner_h);
    let mut out = ImageBuffer::constant(w, h, c, BORDER_TONE)?;
    fill_rect(&mut out, bw, bw, inner_w, bar.min(h - bw), BAR_TONE);
    for y in 0..inner_h {
        for x in 0..inner_w {
            for ch in 0..c {
                out.data_mut()[((y + bw + bar) * w + (x + bw)) * c + ch] = content.get(x, y, ch);
            }
        }
    }
    Ok(out)
}
