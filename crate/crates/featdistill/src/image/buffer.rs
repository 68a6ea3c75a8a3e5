use crate::error::{Error, Result};

/// H x W x C raster of f64 samples, row-major with interleaved channels.
///
/// The working range is [0, 1]. Constructors accept any finite values so
/// intermediate arithmetic can overshoot; every degradation operator clamps
/// before returning, and [`ImageBuffer::clamped`] is the enforcement tool.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageBuffer {
    /// Wrap raw samples. Dimensions must be >= 1, channels 1 or 3, and the
    /// data length must equal width * height * channels.
    pub fn from_data(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be >= 1"));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(format!("channels must be 1 or 3, got {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::invalid(format!(
                "data length {} does not match {}x{}x{}",
                data.len(),
                width,
                height,
                channels
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("image samples must be finite"));
        }
        Ok(ImageBuffer { width, height, channels, data })
    }

    /// Image filled with a single value in [0, 1].
    pub fn constant(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::invalid(format!("fill value {value} outside [0, 1]")));
        }
        Self::from_data(width, height, channels, vec![value; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.channels)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// Copy with every sample clamped into [0, 1]. Idempotent.
    pub fn clamped(&self) -> ImageBuffer {
        let data = self.data.iter().map(|v| v.clamp(0.0, 1.0)).collect();
        ImageBuffer { width: self.width, height: self.height, channels: self.channels, data }
    }

    pub(crate) fn clamp_in_place(&mut self) {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
    }

    /// True when every sample already lies in [0, 1].
    pub fn in_unit_range(&self) -> bool {
        self.data.iter().all(|v| (0.0..=1.0).contains(v))
    }

    /// Mean over all samples.
    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Rec. 601 luma of one pixel; the sample itself for grayscale.
    pub fn luma(&self, x: usize, y: usize) -> f64 {
        if self.channels == 1 {
            self.get(x, y, 0)
        } else {
            0.299 * self.get(x, y, 0) + 0.587 * self.get(x, y, 1) + 0.114 * self.get(x, y, 2)
        }
    }

    /// Convert 8-bit samples to the normalized representation.
    pub fn from_u8(width: usize, height: usize, channels: usize, bytes: &[u8]) -> Result<Self> {
        let data = bytes.iter().map(|&b| f64::from(b) / 255.0).collect();
        Self::from_data(width, height, channels, data)
    }

    /// Quantize to 8 bits with round-half-up on the [0, 255] scale.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect()
    }

    /// Replicate a grayscale image to 3 channels; 3-channel input is cloned.
    pub fn to_rgb(&self) -> ImageBuffer {
        if self.channels == 3 {
            return self.clone();
        }
        let mut data = Vec::with_capacity(self.width * self.height * 3);
        for v in &self.data {
            data.extend_from_slice(&[*v, *v, *v]);
        }
        ImageBuffer { width: self.width, height: self.height, channels: 3, data }
    }
}

/// Peak signal-to-noise ratio in dB with peak 1.0.
///
/// Returns +inf when the images are identical (zero MSE).
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!("psnr inputs {:?} vs {:?}", a.shape(), b.shape())));
    }
    let mse = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.data.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-10.0 * mse.log10())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_fill() {
        let img = ImageBuffer::constant(2, 2, 1, 0.0).unwrap();
        assert_eq!(img.data(), &[0.0; 4]);
        let img = ImageBuffer::constant(1, 1, 3, 1.0).unwrap();
        assert_eq!(img.data(), &[1.0; 3]);
        let img = ImageBuffer::constant(3, 2, 3, 0.5).unwrap();
        assert_eq!(img.data().len(), 18);
        assert!(img.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(ImageBuffer::constant(0, 2, 1, 0.5).is_err());
        assert!(ImageBuffer::constant(2, 0, 1, 0.5).is_err());
        assert!(ImageBuffer::constant(2, 2, 2, 0.5).is_err());
        assert!(ImageBuffer::constant(2, 2, 1, 1.5).is_err());
    }

    #[test]
    fn psnr_identical_is_infinite() {
        let img = ImageBuffer::constant(4, 4, 3, 0.25).unwrap();
        assert!(psnr(&img, &img).unwrap().is_infinite());
    }

    #[test]
    fn psnr_black_vs_white_is_zero() {
        let a = ImageBuffer::constant(5, 3, 1, 0.0).unwrap();
        let b = ImageBuffer::constant(5, 3, 1, 1.0).unwrap();
        assert_eq!(psnr(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn psnr_tenth_step_is_twenty_db() {
        // MSE = 0.01 -> 10*log10(1/0.01) = 20 dB.
        let a = ImageBuffer::constant(7, 2, 3, 0.5).unwrap();
        let b = ImageBuffer::constant(7, 2, 3, 0.6).unwrap();
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn psnr_shape_mismatch_is_error() {
        let a = ImageBuffer::constant(2, 2, 1, 0.5).unwrap();
        let b = ImageBuffer::constant(2, 3, 1, 0.5).unwrap();
        assert!(psnr(&a, &b).is_err());
    }

    #[test]
    fn clamp_examples() {
        let img =
            ImageBuffer::from_data(3, 1, 1, vec![-0.2, 1.7, 0.4]).unwrap().clamped();
        assert_eq!(img.data(), &[0.0, 1.0, 0.4]);
        // Idempotent.
        assert_eq!(img.clamped().data(), img.data());
    }

    #[test]
    fn u8_round_trip_is_exact() {
        let bytes: Vec<u8> = (0..=255).collect();
        let img = ImageBuffer::from_u8(16, 16, 1, &bytes).unwrap();
        assert_eq!(img.to_u8(), bytes);
    }

    #[test]
    fn grayscale_replication() {
        let img = ImageBuffer::from_data(2, 1, 1, vec![0.1, 0.9]).unwrap();
        let rgb = img.to_rgb();
        assert_eq!(rgb.channels(), 3);
        assert_eq!(rgb.data(), &[0.1, 0.1, 0.1, 0.9, 0.9, 0.9]);
    }
}
