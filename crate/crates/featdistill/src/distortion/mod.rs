//! Seeded image degradations.
//!
//! A [`DistortionSpec`] fully determines one degradation: the operator, a
//! severity level in 1..=5, the concrete parameters, and the seed for any
//! randomness the operator consumes while running. Applying the same spec to
//! the same image always yields the same bytes, regardless of thread count or
//! platform.

pub mod catalog;
mod ops;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::rng::SeededRng;

/// Every degradation operator, spanning blur, noise, compression, color,
/// geometry, environment, sensor, and occlusion effects. The `Official*`
/// variants reproduce the reference evaluation pipeline; the rest form the
/// extended training catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistortionOp {
    GaussianBlur,
    MotionBlur,
    DefocusBlur,
    AtmosphericBlur,
    ZoomBlur,
    GaussianNoise,
    ShotNoise,
    SpeckleNoise,
    SaltPepper,
    BandingNoise,
    Jpeg,
    WaveletQuant,
    Ringing,
    ChromaBlockiness,
    ColorCast,
    SaturationShift,
    ContrastShift,
    GammaShift,
    Posterize,
    PerspectiveWarp,
    BarrelDistortion,
    PincushionDistortion,
    DownUpResize,
    RotationCrop,
    Fog,
    Rain,
    Snow,
    ShadowMask,
    SensorBlooming,
    Vignette,
    HotPixels,
    RandomOcclusion,
    TextOverlay,
    WatermarkGrid,
    ScreenshotBorder,
    OfficialGaussianBlur,
    OfficialGaussianNoise,
    OfficialJpeg,
    OfficialResize,
    OfficialColorAdjust,
    OfficialLensDistortion,
    OfficialFilter,
    OfficialMotionBlur,
    OfficialRecompress,
}

/// Snake_case names, parallel to the declaration order of [`DistortionOp`].
const OP_NAMES: [&str; 44] = [
    "gaussian_blur",
    "motion_blur",
    "defocus_blur",
    "atmospheric_blur",
    "zoom_blur",
    "gaussian_noise",
    "shot_noise",
    "speckle_noise",
    "salt_pepper",
    "banding_noise",
    "jpeg",
    "wavelet_quant",
    "ringing",
    "chroma_blockiness",
    "color_cast",
    "saturation_shift",
    "contrast_shift",
    "gamma_shift",
    "posterize",
    "perspective_warp",
    "barrel_distortion",
    "pincushion_distortion",
    "down_up_resize",
    "rotation_crop",
    "fog",
    "rain",
    "snow",
    "shadow_mask",
    "sensor_blooming",
    "vignette",
    "hot_pixels",
    "random_occlusion",
    "text_overlay",
    "watermark_grid",
    "screenshot_border",
    "official_gaussian_blur",
    "official_gaussian_noise",
    "official_jpeg",
    "official_resize",
    "official_color_adjust",
    "official_lens_distortion",
    "official_filter",
    "official_motion_blur",
    "official_recompress",
];

impl DistortionOp {
    /// All operators, in declaration order.
    pub const ALL: [DistortionOp; 44] = {
        use DistortionOp::*;
        [
            GaussianBlur,
            MotionBlur,
            DefocusBlur,
            AtmosphericBlur,
            ZoomBlur,
            GaussianNoise,
            ShotNoise,
            SpeckleNoise,
            SaltPepper,
            BandingNoise,
            Jpeg,
            WaveletQuant,
            Ringing,
            ChromaBlockiness,
            ColorCast,
            SaturationShift,
            ContrastShift,
            GammaShift,
            Posterize,
            PerspectiveWarp,
            BarrelDistortion,
            PincushionDistortion,
            DownUpResize,
            RotationCrop,
            Fog,
            Rain,
            Snow,
            ShadowMask,
            SensorBlooming,
            Vignette,
            HotPixels,
            RandomOcclusion,
            TextOverlay,
            WatermarkGrid,
            ScreenshotBorder,
            OfficialGaussianBlur,
            OfficialGaussianNoise,
            OfficialJpeg,
            OfficialResize,
            OfficialColorAdjust,
            OfficialLensDistortion,
            OfficialFilter,
            OfficialMotionBlur,
            OfficialRecompress,
        ]
    };

    pub fn name(self) -> &'static str {
        OP_NAMES[self as usize]
    }

    pub fn from_name(name: &str) -> Option<DistortionOp> {
        OP_NAMES.iter().position(|n| *n == name).map(|i| Self::ALL[i])
    }

    /// Whether the operator belongs to the reference evaluation pipeline.
    pub fn is_official(self) -> bool {
        self.name().starts_with("official_")
    }

    pub fn category(self) -> Category {
        use DistortionOp::*;
        match self {
            GaussianBlur | MotionBlur | DefocusBlur | AtmosphericBlur | ZoomBlur
            | OfficialGaussianBlur | OfficialMotionBlur => Category::Blur,
            GaussianNoise | ShotNoise | SpeckleNoise | SaltPepper | BandingNoise
            | OfficialGaussianNoise => Category::Noise,
            Jpeg | WaveletQuant | Ringing | ChromaBlockiness | OfficialJpeg
            | OfficialRecompress => Category::Compression,
            ColorCast | SaturationShift | ContrastShift | GammaShift | Posterize
            | OfficialColorAdjust => Category::Color,
            PerspectiveWarp | BarrelDistortion | PincushionDistortion | DownUpResize
            | RotationCrop | OfficialResize | OfficialLensDistortion => Category::Geometric,
            Fog | Rain | Snow | ShadowMask => Category::Environmental,
            SensorBlooming | Vignette | HotPixels => Category::Sensor,
            RandomOcclusion | TextOverlay | WatermarkGrid | ScreenshotBorder => Category::Occlusion,
            OfficialFilter => Category::Filter,
        }
    }
}

/// Coarse operator families, used for grouped robustness reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Blur,
    Noise,
    Compression,
    Color,
    Geometric,
    Environmental,
    Sensor,
    Occlusion,
    Filter,
}

/// How strictly a neutral parameter setting reproduces the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdentityClass {
    /// Bitwise equality.
    Exact,
    /// Per-value agreement within 1e-6.
    Approx,
}

/// Which operator pool a degradation sampler draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineMode {
    /// No degradation at all.
    Clean,
    /// Reference evaluation operators only.
    OfficialOnly,
    /// Extended training operators only.
    ExtendedOnly,
    /// Fair coin per draw between the two pools.
    MixedEqual,
}

/// One fully determined degradation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistortionSpec {
    pub op: DistortionOp,
    pub severity: u8,
    pub params: BTreeMap<String, f64>,
    pub seed: u64,
}

impl DistortionSpec {
    /// Builds a spec at a severity level, drawing any randomized parameters
    /// from `rng` and a fresh application seed.
    pub fn sample(op: DistortionOp, severity: u8, rng: &mut SeededRng) -> Result<DistortionSpec> {
        let params = catalog::sample_params(op, severity, rng)?;
        Ok(DistortionSpec { op, severity, params, seed: rng.next_u64() })
    }

    /// The neutral spec for `op`, if the operator has one.
    pub fn zero_strength(op: DistortionOp, seed: u64) -> Option<(DistortionSpec, IdentityClass)> {
        catalog::zero_strength(op).map(|(params, class)| {
            (DistortionSpec { op, severity: 1, params, seed }, class)
        })
    }
}

/// The operators a pipeline mode draws from: 9 official, 35 extended.
pub fn pool(official: bool) -> Vec<DistortionOp> {
    DistortionOp::ALL.iter().copied().filter(|op| op.is_official() == official).collect()
}

/// Draws the degradation for one item, or `None` in clean mode. Draw order:
/// pool coin (mixed mode only), operator, severity, operator parameters,
/// application seed.
pub fn sample_spec(rng: &mut SeededRng, mode: PipelineMode) -> Result<Option<DistortionSpec>> {
    let official = match mode {
        PipelineMode::Clean => return Ok(None),
        PipelineMode::OfficialOnly => true,
        PipelineMode::ExtendedOnly => false,
        PipelineMode::MixedEqual => rng.coin(),
    };
    let ops = pool(official);
    let op = ops[rng.below(ops.len() as u64) as usize];
    let severity = 1 + rng.below(5) as u8;
    Ok(Some(DistortionSpec::sample(op, severity, rng)?))
}

fn int_param(value: f64, what: &str) -> Result<usize> {
    let rounded = value.round();
    if !(rounded >= 0.0) || (value - rounded).abs() > 1e-9 {
        return Err(Error::invalid(format!("{what} must be a non-negative integer, got {value}")));
    }
    Ok(rounded as usize)
}

/// Runs a spec against an image. The output always has the input's shape and
/// stays inside [0, 1]; identical (spec, image) pairs yield identical bytes.
pub fn apply(spec: &DistortionSpec, img: &ImageBuffer) -> Result<ImageBuffer> {
    use DistortionOp::*;
    if !(1..=5).contains(&spec.severity) {
        return Err(Error::invalid(format!("severity must be 1..=5, got {}", spec.severity)));
    }
    let schema = catalog::schema(spec.op);
    if spec.params.len() != schema.len() {
        return Err(Error::invalid(format!(
            "{} expects parameters {:?}, got {:?}",
            spec.op.name(),
            schema,
            spec.params.keys().collect::<Vec<_>>()
        )));
    }
    for key in schema {
        match spec.params.get(*key) {
            Some(v) if v.is_finite() => {}
            Some(_) => {
                return Err(Error::invalid(format!("{} parameter {key} must be finite", spec.op.name())))
            }
            None => {
                return Err(Error::invalid(format!("{} is missing parameter {key}", spec.op.name())))
            }
        }
    }
    // Safe after the schema check above.
    let p = |key: &str| -> f64 { spec.params[key] };
    let mut rng = SeededRng::new(spec.seed);

    let mut out = match spec.op {
        GaussianBlur | OfficialGaussianBlur => ops::blur::gaussian_blur(img, p("sigma")),
        MotionBlur | OfficialMotionBlur => {
            ops::blur::motion_blur(img, int_param(p("kernel_len"), "kernel_len")?, p("angle"))
        }
        DefocusBlur => ops::blur::defocus_blur(img, int_param(p("radius"), "radius")?),
        AtmosphericBlur => ops::blur::atmospheric_blur(img, p("sigma"), p("tail_weight")),
        ZoomBlur => ops::blur::zoom_blur(img, p("strength")),
        GaussianNoise | OfficialGaussianNoise => ops::noise::gaussian_noise(img, &mut rng, p("sigma")),
        ShotNoise => ops::noise::shot_noise(img, &mut rng, p("peak")),
        SpeckleNoise => ops::noise::speckle_noise(img, &mut rng, p("sigma")),
        SaltPepper => ops::noise::salt_pepper(img, &mut rng, p("amount")),
        BandingNoise => ops::noise::banding_noise(img, &mut rng, p("amplitude")),
        Jpeg | OfficialJpeg => ops::compress::jpeg(img, p("quality")),
        WaveletQuant => ops::compress::wavelet_quant(img, p("q")),
        Ringing => ops::blur::ringing(img, p("cutoff")),
        ChromaBlockiness => ops::compress::chroma_blockiness(img, p("factor")),
        ColorCast => ops::color::color_cast(img, p("gain_r"), p("gain_g"), p("gain_b")),
        SaturationShift => ops::color::saturation_shift(img, p("factor")),
        ContrastShift => ops::color::contrast_shift(img, p("factor")),
        GammaShift => ops::color::gamma_shift(img, p("gamma")),
        Posterize => ops::color::posterize(img, p("levels")),
        PerspectiveWarp => ops::geometric::perspective_warp(img, &mut rng, p("corner_jitter")),
        BarrelDistortion => ops::geometric::barrel_distortion(img, p("k")),
        PincushionDistortion => ops::geometric::pincushion_distortion(img, p("k")),
        DownUpResize | OfficialResize => ops::geometric::down_up_resize(img, p("scale")),
        RotationCrop => ops::geometric::rotation_crop(img, p("angle_deg")),
        Fog => ops::environ::fog(img, &mut rng, p("density")),
        Rain => ops::environ::rain(img, &mut rng, p("density"), p("length"), p("intensity")),
        Snow => ops::environ::snow(img, &mut rng, p("density"), p("radius")),
        ShadowMask => ops::environ::shadow_mask(img, &mut rng, p("opacity"), p("softness")),
        SensorBlooming => ops::sensor::sensor_blooming(img, p("threshold"), p("spread")),
        Vignette => ops::sensor::vignette(img, p("strength")),
        HotPixels => ops::sensor::hot_pixels(img, &mut rng, p("fraction")),
        RandomOcclusion => {
            ops::occlude::random_occlusion(img, &mut rng, p("count"), p("max_frac"))
        }
        TextOverlay => ops::occlude::text_overlay(img, &mut rng, p("height_frac"), p("opacity")),
        WatermarkGrid => ops::occlude::watermark_grid(img, p("period_frac"), p("opacity")),
        ScreenshotBorder => {
            ops::occlude::screenshot_border(img, p("border_frac"), p("bar_frac"))
        }
        OfficialColorAdjust => {
            ops::color::color_adjust(img, p("brightness"), p("contrast"), p("saturation"))
        }
        OfficialLensDistortion => ops::geometric::lens_distortion(img, p("k")),
        OfficialFilter => {
            let mode = int_param(p("mode"), "mode")?;
            if mode > 1 {
                return Err(Error::invalid("official_filter mode must be 0 or 1"));
            }
            ops::blur::official_filter(img, mode as u8, p("strength"))
        }
        OfficialRecompress => ops::compress::recompress(img, p("quality1"), p("quality2")),
    }?;
    // all operators clamp already; for in-range data this is a bitwise no-op
    out.clamp_in_place();
    debug_assert_eq!(out.shape(), img.shape());
    Ok(out)
}
