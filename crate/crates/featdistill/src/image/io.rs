//! PNG interchange and the JPEG codec used by the compression distortions.

use std::io::Cursor;
use std::path::Path;

use image::codecs::jpeg::JpegEncoder;
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageReader};

use super::ImageBuffer;
use crate::error::{Error, Result};

/// Load an 8-bit PNG (or any format the decoder recognizes).
///
/// Grayscale files stay single-channel; everything else lands on RGB.
/// 8-bit PNGs round-trip bit-exactly through [`save_png`].
pub fn load_image(path: &Path) -> Result<ImageBuffer> {
    let reader = ImageReader::open(path)
        .map_err(|e| Error::Codec(format!("{}: {e}", path.display())))?;
    let dynimg = reader
        .decode()
        .map_err(|e| Error::Codec(format!("{}: {e}", path.display())))?;
    decode_dynamic(dynimg)
}

fn decode_dynamic(dynimg: DynamicImage) -> Result<ImageBuffer> {
    match dynimg {
        DynamicImage::ImageLuma8(g) => {
            let (w, h) = g.dimensions();
            ImageBuffer::from_u8(w as usize, h as usize, 1, g.as_raw())
        }
        other => {
            let rgb = other.to_rgb8();
            let (w, h) = rgb.dimensions();
            ImageBuffer::from_u8(w as usize, h as usize, 3, rgb.as_raw())
        }
    }
}

/// Save as 8-bit PNG. Encoding is deterministic: identical pixels in,
/// identical bytes out.
pub fn save_png(img: &ImageBuffer, path: &Path) -> Result<()> {
    let (w, h, c) = img.shape();
    let bytes = img.to_u8();
    let color = if c == 1 { ExtendedColorType::L8 } else { ExtendedColorType::Rgb8 };
    image::save_buffer(path, &bytes, w as u32, h as u32, color)
        .map_err(|e| Error::Codec(format!("{}: {e}", path.display())))
}

/// Encode to baseline JPEG at the given quality and decode back.
///
/// This is the pinned reference codec behind the compression operators; it is
/// pure Rust and single-threaded, so repeated calls are bitwise identical.
pub fn jpeg_roundtrip(img: &ImageBuffer, quality: u8) -> Result<ImageBuffer> {
    if !(1..=100).contains(&quality) {
        return Err(Error::invalid(format!("jpeg quality {quality} outside 1..=100")));
    }
    let (w, h, c) = img.shape();
    let bytes = img.to_u8();
    let mut encoded = Vec::new();
    let encoder = JpegEncoder::new_with_quality(Cursor::new(&mut encoded), quality);
    let color = if c == 1 { ExtendedColorType::L8 } else { ExtendedColorType::Rgb8 };
    encoder
        .write_image(&bytes, w as u32, h as u32, color)
        .map_err(|e| Error::Codec(format!("jpeg encode: {e}")))?;
    let decoded = image::load_from_memory_with_format(&encoded, image::ImageFormat::Jpeg)
        .map_err(|e| Error::Codec(format!("jpeg decode: {e}")))?;
    let out = decode_dynamic(decoded)?;
    if out.shape() != (w, h, c) {
        // Luma input decoded as luma, RGB as RGB; anything else is a codec bug.
        return Err(Error::Codec(format!(
            "jpeg round-trip changed shape {:?} -> {:?}",
            (w, h, c),
            out.shape()
        )));
    }
    Ok(out)
}
