use super::ImageBuffer;

/// Bilinear sample at real coordinates with clamp-to-edge (replicate).
///
/// Coordinates are in pixel units where integer (x, y) is the pixel center,
/// so sampling at exact integers returns the pixel value exactly.
pub fn sample_clamped(img: &ImageBuffer, x: f64, y: f64, c: usize) -> f64 {
    let w = img.width() as isize;
    let h = img.height() as isize;
    let x0 = x.floor();
    let y0 = y.floor();
    let dx = x - x0;
    let dy = y - y0;
    let clamp_x = |i: isize| i.clamp(0, w - 1) as usize;
    let clamp_y = |i: isize| i.clamp(0, h - 1) as usize;
    let ix0 = clamp_x(x0 as isize);
    let ix1 = clamp_x(x0 as isize + 1);
    let iy0 = clamp_y(y0 as isize);
    let iy1 = clamp_y(y0 as isize + 1);
    let v00 = img.get(ix0, iy0, c);
    let v01 = img.get(ix1, iy0, c);
    let v10 = img.get(ix0, iy1, c);
    let v11 = img.get(ix1, iy1, c);
    v00 * (1.0 - dx) * (1.0 - dy) + v01 * dx * (1.0 - dy) + v10 * (1.0 - dx) * dy + v11 * dx * dy
}

/// Bilinear resize with half-pixel center alignment.
///
/// Resizing to the source dimensions reproduces the input exactly, which is
/// what makes zero-strength geometric settings testable as identities.
pub fn resize_bilinear(img: &ImageBuffer, new_w: usize, new_h: usize) -> ImageBuffer {
    assert!(new_w >= 1 && new_h >= 1);
    let (w, h, c) = img.shape();
    if new_w == w && new_h == h {
        return img.clone();
    }
    let scale_x = w as f64 / new_w as f64;
    let scale_y = h as f64 / new_h as f64;
    let mut data = vec![0.0; new_w * new_h * c];
    for y in 0..new_h {
        let sy = (y as f64 + 0.5) * scale_y - 0.5;
        for x in 0..new_w {
            let sx = (x as f64 + 0.5) * scale_x - 0.5;
            for ch in 0..c {
                data[(y * new_w + x) * c + ch] = sample_clamped(img, sx, sy, ch);
            }
        }
    }
    ImageBuffer::from_data(new_w, new_h, c, data).expect("resize output shape is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn noise_image(seed: u64, w: usize, h: usize, c: usize) -> ImageBuffer {
        let mut rng = SeededRng::new(seed);
        let data = (0..w * h * c).map(|_| rng.next_f64()).collect();
        ImageBuffer::from_data(w, h, c, data).unwrap()
    }

    #[test]
    fn same_size_resize_is_identity() {
        let img = noise_image(3, 13, 9, 3);
        let out = resize_bilinear(&img, 13, 9);
        assert_eq!(out.data(), img.data());
    }

    #[test]
    fn integer_coordinates_sample_exactly() {
        let img = noise_image(11, 8, 6, 1);
        for y in 0..6 {
            for x in 0..8 {
                assert_eq!(sample_clamped(&img, x as f64, y as f64, 0), img.get(x, y, 0));
            }
        }
    }

    #[test]
    fn resize_changes_dims_and_stays_in_range() {
        let img = noise_image(4, 20, 10, 3);
        let out = resize_bilinear(&img, 7, 13);
        assert_eq!(out.shape(), (7, 13, 3));
        assert!(out.in_unit_range());
    }

    #[test]
    fn out_of_frame_samples_replicate_edges() {
        let img = ImageBuffer::constant(4, 4, 1, 0.7).unwrap();
        assert_eq!(sample_clamped(&img, -5.0, -5.0, 0), 0.7);
        assert_eq!(sample_clamped(&img, 10.0, 2.0, 0), 0.7);
    }
}
