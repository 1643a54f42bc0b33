//! Rendering style parameters and their deterministic sampling.

use crate::error::RenderError;
use crate::synth::background;
use serde::{Deserialize, Serialize};
use stedit_tensor::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BgKind {
    Solid,
    Gradient,
    Texture { id: u8 },
}

/// Everything that defines how a word is drawn, except the word itself.
/// Two renders from the same `StyleParams` and text are byte-identical.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StyleParams {
    pub font_id: u32,
    /// Cap height in final-image pixels.
    pub font_size_px: u32,
    pub fg_color: [f32; 3],
    pub bg_kind: BgKind,
    pub rotation_deg: f32,
    /// Corner offsets (x, y) as fractions of image dims, order
    /// top-left, top-right, bottom-right, bottom-left.
    pub perspective: [[f32; 2]; 4],
    pub curve_amplitude_px: f32,
    pub blur_sigma: f32,
    pub seed: u64,
}

pub const FONT_SIZE_MIN: u32 = 14;
pub const FONT_SIZE_MAX: u32 = 26;
pub const ROTATION_MAX_DEG: f32 = 15.0;
pub const PERSPECTIVE_MAX: f32 = 0.1;
pub const CURVE_MAX_PX: f32 = 4.0;
pub const BLUR_MAX_SIGMA: f32 = 1.5;

impl StyleParams {
    pub fn validate(&self) -> Result<(), RenderError> {
        let checks: [(&'static str, f64, f64, f64); 4] = [
            (
                "rotation_deg",
                self.rotation_deg as f64,
                -(ROTATION_MAX_DEG as f64),
                ROTATION_MAX_DEG as f64,
            ),
            (
                "curve_amplitude_px",
                self.curve_amplitude_px as f64,
                0.0,
                CURVE_MAX_PX as f64,
            ),
            ("blur_sigma", self.blur_sigma as f64, 0.0, BLUR_MAX_SIGMA as f64),
            (
                "font_size_px",
                self.font_size_px as f64,
                FONT_SIZE_MIN as f64,
                FONT_SIZE_MAX as f64,
            ),
        ];
        for (field, v, lo, hi) in checks {
            if !(lo..=hi).contains(&v) {
                return Err(RenderError::InvalidStyle { field, value: v });
            }
        }
        for corner in &self.perspective {
            for &off in corner {
                if !(-PERSPECTIVE_MAX..=PERSPECTIVE_MAX).contains(&off) {
                    return Err(RenderError::InvalidStyle {
                        field: "perspective",
                        value: off as f64,
                    });
                }
            }
        }
        for &c in &self.fg_color {
            if !(0.0..=1.0).contains(&c) {
                return Err(RenderError::InvalidStyle {
                    field: "fg_color",
                    value: c as f64,
                });
            }
        }
        Ok(())
    }
}

/// Sampling profile: which fonts and background kinds a split draws from.
/// The default profile covers every registered font with equal background
/// weights; dataset splits shift these to create distribution gaps.
#[derive(Clone, Debug)]
pub struct SamplerProfile {
    pub font_ids: Vec<u32>,
    /// Weights for solid / gradient / texture.
    pub bg_weights: [f64; 3],
}

impl SamplerProfile {
    pub fn uniform(font_ids: Vec<u32>) -> Self {
        Self {
            font_ids,
            bg_weights: [1.0, 1.0, 1.0],
        }
    }
}

/// Deterministic style draw. Every field is uniform over its range; the
/// foreground color is additionally re-drawn (bounded retries) until it
/// clears a minimum luminance distance from the derived background base so
/// rendered text stays legible.
pub fn sample_style_with(profile: &SamplerProfile, rng_seed: u64) -> StyleParams {
    assert!(!profile.font_ids.is_empty(), "profile has no fonts");
    let mut rng = Rng::stream_tagged(rng_seed, "style", &[]);
    let font_id = *rng.choose(&profile.font_ids);
    let font_size_px = rng.range_u64(FONT_SIZE_MIN as u64, FONT_SIZE_MAX as u64) as u32;
    let wsum: f64 = profile.bg_weights.iter().sum();
    let mut pick = rng.next_f64() * wsum;
    let mut bg_idx = 0usize;
    for (i, &w) in profile.bg_weights.iter().enumerate() {
        if pick < w {
            bg_idx = i;
            break;
        }
        pick -= w;
    }
    let bg_kind = match bg_idx {
        0 => BgKind::Solid,
        1 => BgKind::Gradient,
        _ => BgKind::Texture {
            id: rng.below(3) as u8,
        },
    };
    let seed = rng.next_u64();
    let bg_lum = background::base_luminance(&bg_kind, seed);
    let mut fg_color = [0f32; 3];
    for attempt in 0..16 {
        for c in fg_color.iter_mut() {
            *c = rng.next_f64() as f32;
        }
        let lum = background::luminance(fg_color);
        if (lum - bg_lum).abs() >= 0.35 {
            break;
        }
        if attempt == 15 {
            fg_color = if bg_lum > 0.5 {
                [0.0, 0.0, 0.0]
            } else {
                [1.0, 1.0, 1.0]
            };
        }
    }
    let rotation_deg = rng.range_f64(-(ROTATION_MAX_DEG as f64), ROTATION_MAX_DEG as f64) as f32;
    let mut perspective = [[0f32; 2]; 4];
    for corner in perspective.iter_mut() {
        for off in corner.iter_mut() {
            *off = rng.range_f64(-(PERSPECTIVE_MAX as f64), PERSPECTIVE_MAX as f64) as f32;
        }
    }
    let curve_amplitude_px = rng.range_f64(0.0, CURVE_MAX_PX as f64) as f32;
    let blur_sigma = rng.range_f64(0.0, BLUR_MAX_SIGMA as f64) as f32;
    StyleParams {
        font_id,
        font_size_px,
        fg_color,
        bg_kind,
        rotation_deg,
        perspective,
        curve_amplitude_px,
        blur_sigma,
        seed,
    }
}
