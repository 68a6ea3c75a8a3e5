//! Pixel-level implementations of the degradation operators. Submodules are
//! grouped by mechanism; the public catalog dispatches into them by name.

pub mod blur;
pub mod color;
pub mod compress;
pub mod conv;
pub mod environ;
pub mod geometric;
pub mod noise;
pub mod occlude;
pub mod sensor;

/// Rec. 601 luma weights, shared by every operator that separates luma from
/// chroma so "luma-preserving" means the same thing everywhere.
pub(crate) const LUMA_R: f64 = 0.299;
pub(crate) const LUMA_G: f64 = 0.587;
pub(crate) const LUMA_B: f64 = 0.114;
