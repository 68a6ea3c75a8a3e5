//! Pixel raster representation and reference quality metrics.
//!
//! Samples are stored as normalized reals in [0, 1], row-major, interleaved
//! channels. 8-bit files convert on load via v/255 and on save via
//! round(v*255), which keeps the degradation math independent of bit depth.

mod buffer;
pub mod io;
mod resize;

pub use buffer::{psnr, ImageBuffer};
pub use resize::{resize_bilinear, sample_clamped};
