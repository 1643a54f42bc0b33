//! Vertical-band corruption for the self-supervised branch.

use crate::error::DataError;
use crate::image::{TextImage, IMG_H, IMG_W};
use serde::{Deserialize, Serialize};
use stedit_tensor::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoutFill {
    Zero,
    DatasetMean,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CutoutSpec {
    pub width_px: usize,
    pub fill: CutoutFill,
}

impl Default for CutoutSpec {
    fn default() -> Self {
        Self {
            width_px: 42,
            fill: CutoutFill::Zero,
        }
    }
}

/// Blank a vertical band of `spec.width_px` columns at a uniform random
/// left edge, across full height and all channels. Returns the corrupted
/// image and the band's left edge.
pub fn cutout(
    image: &TextImage,
    spec: &CutoutSpec,
    fill_rgb: [f32; 3],
    rng: &mut Rng,
) -> Result<(TextImage, usize), DataError> {
    if spec.width_px > IMG_W {
        return Err(DataError::WidthExceedsImage(spec.width_px, IMG_W));
    }
    let cut_left = rng.range_u64(0, (IMG_W - spec.width_px) as u64) as usize;
    let mut out = image.clone();
    let fill = match spec.fill {
        CutoutFill::Zero => [0.0, 0.0, 0.0],
        CutoutFill::DatasetMean => fill_rgb,
    };
    for c in 0..3 {
        for y in 0..IMG_H {
            for x in cut_left..cut_left + spec.width_px {
                out.set(c, y, x, fill[c]);
            }
        }
    }
    Ok((out, cut_left))
}

/// Per-channel mean over a set of images, the `DatasetMean` fill value.
pub fn dataset_mean(images: &[TextImage]) -> [f32; 3] {
    let mut sums = [0f64; 3];
    let mut count = 0f64;
    for img in images {
        for c in 0..3 {
            let ch = &img.pixels[c * IMG_H * IMG_W..(c + 1) * IMG_H * IMG_W];
            sums[c] += ch.iter().map(|&v| v as f64).sum::<f64>();
        }
        count += (IMG_H * IMG_W) as f64;
    }
    if count == 0.0 {
        return [0.0; 3];
    }
    [
        (sums[0] / count) as f32,
        (sums[1] / count) as f32,
        (sums[2] / count) as f32,
    ]
}
