//! Operator tables: which parameters each operator takes, what values each
//! severity level maps to, and the neutral setting (if any) under which the
//! operator reproduces its input.
//!
//! Severity tables are five entries long, indexed by `severity - 1`.
//! Parameters that carry randomness (angles, signs, per-channel gains) are
//! drawn here, at sampling time, in schema order; applying a finished spec
//! never redraws them.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::rng::SeededRng;

use super::{DistortionOp, IdentityClass};

/// Canonical parameter names for an operator, in sampling order.
pub fn schema(op: DistortionOp) -> &'static [&'static str] {
    use DistortionOp::*;
    match op {
        GaussianBlur | OfficialGaussianBlur => &["sigma"],
        MotionBlur | OfficialMotionBlur => &["kernel_len", "angle"],
        DefocusBlur => &["radius"],
        AtmosphericBlur => &["sigma", "tail_weight"],
        ZoomBlur => &["strength"],
        GaussianNoise | SpeckleNoise | OfficialGaussianNoise => &["sigma"],
        ShotNoise => &["peak"],
        SaltPepper => &["amount"],
        BandingNoise => &["amplitude"],
        Jpeg | OfficialJpeg => &["quality"],
        WaveletQuant => &["q"],
        Ringing => &["cutoff"],
        ChromaBlockiness => &["factor"],
        ColorCast => &["gain_r", "gain_g", "gain_b"],
        SaturationShift | ContrastShift => &["factor"],
        GammaShift => &["gamma"],
        Posterize => &["levels"],
        PerspectiveWarp => &["corner_jitter"],
        BarrelDistortion | PincushionDistortion | OfficialLensDistortion => &["k"],
        DownUpResize | OfficialResize => &["scale"],
        RotationCrop => &["angle_deg"],
        Fog => &["density"],
        Rain => &["density", "length", "intensity"],
        Snow => &["density", "radius"],
        ShadowMask => &["opacity", "softness"],
        SensorBlooming => &["threshold", "spread"],
        Vignette => &["strength"],
        HotPixels => &["fraction"],
        RandomOcclusion => &["count", "max_frac"],
        TextOverlay => &["height_frac", "opacity"],
        WatermarkGrid => &["period_frac", "opacity"],
        ScreenshotBorder => &["border_frac", "bar_frac"],
        OfficialColorAdjust => &["brightness", "contrast", "saturation"],
        OfficialFilter => &["mode", "strength"],
        OfficialRecompress => &["quality1", "quality2"],
    }
}

fn params(entries: &[(&str, f64)]) -> BTreeMap<String, f64> {
    entries.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn signed(rng: &mut SeededRng, magnitude: f64) -> f64 {
    if rng.coin() {
        magnitude
    } else {
        -magnitude
    }
}

/// Concrete parameters for (operator, severity). Severity runs 1..=5.
pub fn sample_params(
    op: DistortionOp,
    severity: u8,
    rng: &mut SeededRng,
) -> Result<BTreeMap<String, f64>> {
    use DistortionOp::*;
    if !(1..=5).contains(&severity) {
        return Err(Error::invalid(format!("severity must be 1..=5, got {severity}")));
    }
    let i = (severity - 1) as usize;
    Ok(match op {
        GaussianBlur => params(&[("sigma", [0.6, 1.0, 1.6, 2.4, 3.2][i])]),
        MotionBlur => params(&[
            ("kernel_len", [3.0, 5.0, 9.0, 13.0, 17.0][i]),
            ("angle", rng.uniform(0.0, 180.0)),
        ]),
        DefocusBlur => params(&[("radius", [1.0, 2.0, 3.0, 5.0, 7.0][i])]),
        AtmosphericBlur => params(&[
            ("sigma", [0.7, 1.2, 1.8, 2.3, 2.9][i]),
            ("tail_weight", [0.2, 0.25, 0.3, 0.35, 0.4][i]),
        ]),
        ZoomBlur => params(&[("strength", [0.04, 0.08, 0.13, 0.19, 0.26][i])]),
        GaussianNoise => params(&[("sigma", [0.04, 0.08, 0.12, 0.18, 0.26][i])]),
        ShotNoise => params(&[("peak", [60.0, 25.0, 12.0, 5.0, 3.0][i])]),
        SpeckleNoise => params(&[("sigma", [0.08, 0.15, 0.22, 0.33, 0.45][i])]),
        SaltPepper => params(&[("amount", [0.005, 0.012, 0.022, 0.042, 0.07][i])]),
        BandingNoise => params(&[("amplitude", [0.02, 0.04, 0.06, 0.09, 0.13][i])]),
        Jpeg => params(&[("quality", [80.0, 60.0, 40.0, 25.0, 12.0][i])]),
        WaveletQuant => params(&[("q", [0.02, 0.05, 0.09, 0.16, 0.28][i])]),
        Ringing => params(&[("cutoff", [0.85, 0.65, 0.5, 0.38, 0.28][i])]),
        ChromaBlockiness => params(&[("factor", [2.0, 3.0, 4.0, 6.0, 8.0][i])]),
        ColorCast => {
            let d = [0.06, 0.12, 0.18, 0.24, 0.3][i];
            params(&[
                ("gain_r", 1.0 + rng.uniform(-d, d)),
                ("gain_g", 1.0 + rng.uniform(-d, d)),
                ("gain_b", 1.0 + rng.uniform(-d, d)),
            ])
        }
        SaturationShift => {
            let d = [0.25, 0.45, 0.6, 0.75, 0.9][i];
            params(&[("factor", 1.0 + signed(rng, d))])
        }
        ContrastShift => {
            let d = [0.12, 0.24, 0.36, 0.48, 0.6][i];
            params(&[("factor", 1.0 + signed(rng, d))])
        }
        GammaShift => {
            let d = [0.18, 0.36, 0.54, 0.72, 0.9][i];
            params(&[("gamma", signed(rng, d).exp())])
        }
        Posterize => params(&[("levels", [32.0, 16.0, 8.0, 5.0, 3.0][i])]),
        PerspectiveWarp => params(&[("corner_jitter", [0.02, 0.045, 0.08, 0.13, 0.2][i])]),
        BarrelDistortion => params(&[("k", [0.05, 0.1, 0.18, 0.28, 0.4][i])]),
        PincushionDistortion => params(&[("k", [0.04, 0.08, 0.14, 0.22, 0.32][i])]),
        DownUpResize => params(&[("scale", [0.8, 0.6, 0.45, 0.3, 0.2][i])]),
        RotationCrop => {
            let d = [2.0, 4.0, 7.0, 11.0, 16.0][i];
            params(&[("angle_deg", signed(rng, d))])
        }
        Fog => params(&[("density", [0.25, 0.45, 0.6, 0.8, 1.0][i])]),
        Rain => params(&[
            ("density", [0.0008, 0.0016, 0.0026, 0.004, 0.006][i]),
            ("length", [8.0, 10.0, 12.0, 14.0, 16.0][i]),
            ("intensity", [0.25, 0.35, 0.45, 0.55, 0.65][i]),
        ]),
        Snow => params(&[
            ("density", [0.0004, 0.0009, 0.0015, 0.0024, 0.0035][i]),
            ("radius", [1.2, 1.5, 1.9, 2.4, 3.0][i]),
        ]),
        ShadowMask => params(&[
            ("opacity", [0.15, 0.25, 0.35, 0.47, 0.6][i]),
            ("softness", [0.25, 0.22, 0.2, 0.17, 0.15][i]),
        ]),
        SensorBlooming => params(&[
            ("threshold", [0.9, 0.85, 0.8, 0.75, 0.7][i]),
            ("spread", [1.5, 2.0, 2.5, 3.0, 3.5][i]),
        ]),
        Vignette => params(&[("strength", [0.15, 0.3, 0.45, 0.6, 0.75][i])]),
        HotPixels => params(&[("fraction", [0.0002, 0.0006, 0.0012, 0.0022, 0.0035][i])]),
        RandomOcclusion => params(&[
            ("count", [1.0, 1.0, 2.0, 3.0, 4.0][i]),
            ("max_frac", [0.08, 0.12, 0.18, 0.24, 0.3][i]),
        ]),
        TextOverlay => params(&[
            ("height_frac", [0.04, 0.06, 0.08, 0.11, 0.14][i]),
            ("opacity", [0.35, 0.45, 0.55, 0.65, 0.75][i]),
        ]),
        WatermarkGrid => params(&[
            ("period_frac", [0.5, 0.4, 0.3, 0.22, 0.16][i]),
            ("opacity", [0.12, 0.2, 0.28, 0.38, 0.5][i]),
        ]),
        ScreenshotBorder => params(&[
            ("border_frac", [0.015, 0.03, 0.05, 0.075, 0.1][i]),
            ("bar_frac", [0.04, 0.06, 0.08, 0.1, 0.12][i]),
        ]),
        OfficialGaussianBlur => params(&[("sigma", [0.5, 1.0, 1.5, 2.0, 2.5][i])]),
        OfficialGaussianNoise => params(&[("sigma", [0.03, 0.06, 0.1, 0.15, 0.2][i])]),
        OfficialJpeg => params(&[("quality", [85.0, 70.0, 50.0, 35.0, 20.0][i])]),
        OfficialResize => params(&[("scale", [0.85, 0.7, 0.55, 0.4, 0.25][i])]),
        OfficialColorAdjust => {
            let d = [0.06, 0.12, 0.18, 0.25, 0.32][i];
            params(&[
                ("brightness", 1.0 + signed(rng, d)),
                ("contrast", 1.0 + signed(rng, d)),
                ("saturation", 1.0 + signed(rng, d)),
            ])
        }
        OfficialLensDistortion => {
            let d = [0.04, 0.08, 0.13, 0.19, 0.26][i];
            params(&[("k", signed(rng, d))])
        }
        OfficialFilter => params(&[
            ("mode", if rng.coin() { 1.0 } else { 0.0 }),
            ("strength", [0.2, 0.35, 0.5, 0.7, 0.9][i]),
        ]),
        OfficialMotionBlur => params(&[
            ("kernel_len", [3.0, 5.0, 7.0, 9.0, 11.0][i]),
            ("angle", rng.uniform(0.0, 180.0)),
        ]),
        OfficialRecompress => {
            let (q1, q2) = [(85.0, 70.0), (75.0, 55.0), (60.0, 45.0), (50.0, 35.0), (35.0, 25.0)][i];
            params(&[("quality1", q1), ("quality2", q2)])
        }
    })
}

/// The parameter setting under which the operator reproduces its input, with
/// the guarantee class: `Exact` settings are bitwise identities, `Approx`
/// settings agree within 1e-6 per value. Operators with no neutral setting
/// (a JPEG pass always re-encodes, posterize always snaps) return `None`.
pub fn zero_strength(op: DistortionOp) -> Option<(BTreeMap<String, f64>, IdentityClass)> {
    use DistortionOp::*;
    use IdentityClass::*;
    let entry = |entries: &[(&str, f64)], class: IdentityClass| Some((params(entries), class));
    match op {
        GaussianBlur | OfficialGaussianBlur => entry(&[("sigma", 0.0)], Exact),
        MotionBlur | OfficialMotionBlur => entry(&[("kernel_len", 1.0), ("angle", 0.0)], Exact),
        DefocusBlur => entry(&[("radius", 0.0)], Exact),
        AtmosphericBlur => entry(&[("sigma", 0.0), ("tail_weight", 0.2)], Exact),
        ZoomBlur => entry(&[("strength", 0.0)], Exact),
        GaussianNoise | SpeckleNoise | OfficialGaussianNoise => entry(&[("sigma", 0.0)], Exact),
        ShotNoise => None,
        SaltPepper => entry(&[("amount", 0.0)], Exact),
        BandingNoise => entry(&[("amplitude", 0.0)], Exact),
        Jpeg | OfficialJpeg => None,
        WaveletQuant => entry(&[("q", 0.0)], Exact),
        Ringing => entry(&[("cutoff", 1.0)], Exact),
        ChromaBlockiness => entry(&[("factor", 1.0)], Approx),
        ColorCast => entry(&[("gain_r", 1.0), ("gain_g", 1.0), ("gain_b", 1.0)], Exact),
        SaturationShift | ContrastShift => entry(&[("factor", 1.0)], Exact),
        GammaShift => entry(&[("gamma", 1.0)], Exact),
        Posterize => None,
        PerspectiveWarp => entry(&[("corner_jitter", 0.0)], Approx),
        BarrelDistortion | PincushionDistortion | OfficialLensDistortion => {
            entry(&[("k", 0.0)], Approx)
        }
        DownUpResize | OfficialResize => entry(&[("scale", 1.0)], Exact),
        RotationCrop => entry(&[("angle_deg", 0.0)], Approx),
        Fog => entry(&[("density", 0.0)], Exact),
        Rain => entry(&[("density", 0.0), ("length", 8.0), ("intensity", 0.25)], Exact),
        Snow => entry(&[("density", 0.0), ("radius", 1.2)], Exact),
        ShadowMask => entry(&[("opacity", 0.0), ("softness", 0.25)], Exact),
        SensorBlooming => entry(&[("threshold", 1.0), ("spread", 0.0)], Exact),
        Vignette => entry(&[("strength", 0.0)], Exact),
        HotPixels => entry(&[("fraction", 0.0)], Exact),
        RandomOcclusion => None,
        TextOverlay => entry(&[("height_frac", 0.04), ("opacity", 0.0)], Exact),
        WatermarkGrid => entry(&[("period_frac", 0.5), ("opacity", 0.0)], Exact),
        ScreenshotBorder => entry(&[("border_frac", 0.0), ("bar_frac", 0.0)], Exact),
        OfficialColorAdjust => {
            entry(&[("brightness", 1.0), ("contrast", 1.0), ("saturation", 1.0)], Exact)
        }
        OfficialFilter => entry(&[("mode", 0.0), ("strength", 0.0)], Exact),
        OfficialRecompress => None,
    }
}
