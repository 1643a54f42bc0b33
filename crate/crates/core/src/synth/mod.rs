//! Deterministic paired synthetic word-image rendering.
//!
//! Render order: glyph rasterization -> baseline curve -> rotation ->
//! perspective -> background composite -> blur -> 2x box downscale to the
//! final 32x128 raster.

pub mod background;
pub mod font;
pub mod glyphs;
pub mod raster;
pub mod style;
pub mod warp;

use crate::error::RenderError;
use crate::image::{TextImage, IMG_H, IMG_W};
use font::FontRegistry;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use stedit_tensor::Rng;
pub use style::{sample_style_with, BgKind, SamplerProfile, StyleParams};

pub const MAX_TEXT_LEN: usize = 24;

/// Two renders sharing every style parameter, differing only in text.
#[derive(Clone, Debug)]
pub struct RenderedPair {
    pub image_a: TextImage,
    pub image_b: TextImage,
    pub style: StyleParams,
}

fn validate_text(text: &str, registry: &FontRegistry, font_id: u32) -> Result<(), RenderError> {
    if text.is_empty() {
        return Err(RenderError::EmptyText);
    }
    let n = text.chars().count();
    if n > MAX_TEXT_LEN {
        return Err(RenderError::TextTooLong(n, MAX_TEXT_LEN));
    }
    let font = registry.get(font_id)?;
    for c in text.chars() {
        if !c.is_ascii_alphanumeric() {
            return Err(RenderError::CharNotInCharset(c));
        }
        if !font.covers(c) {
            return Err(RenderError::CharNotInFont(c, font_id));
        }
    }
    Ok(())
}

/// Render `text` in the given style. Pure in (text, style): identical calls
/// produce byte-identical rasters.
pub fn render_text(
    text: &str,
    style: &StyleParams,
    registry: &FontRegistry,
) -> Result<TextImage, RenderError> {
    style.validate()?;
    validate_text(text, registry, style.font_id)?;
    let font = registry.get(style.font_id)?;
    let (h, w) = (raster::CANVAS_H, raster::CANVAS_W);

    let cap_px = style.font_size_px as f32 * raster::SUPERSAMPLE;
    let mut alpha = raster::rasterize_word(text, font, cap_px);
    alpha = raster::apply_curve(&alpha, style.curve_amplitude_px * raster::SUPERSAMPLE);
    alpha = warp::rotate(&alpha, h, w, style.rotation_deg);
    alpha = warp::perspective(&alpha, h, w, &style.perspective);

    let bg = background::render(&style.bg_kind, style.seed, h, w);
    let mut canvas = vec![0f32; 3 * h * w];
    for ch in 0..3 {
        let fg = style.fg_color[ch];
        let bgc = &bg[ch * h * w..(ch + 1) * h * w];
        let dst = &mut canvas[ch * h * w..(ch + 1) * h * w];
        for ((d, &a), &b) in dst.iter_mut().zip(&alpha).zip(bgc) {
            *d = b * (1.0 - a) + fg * a;
        }
    }
    let blurred = warp::gaussian_blur_chw(&canvas, 3, h, w, style.blur_sigma * raster::SUPERSAMPLE);
    let small = warp::downscale2_chw(&blurred, 3, h, w);
    let pixels = small.iter().map(|&v| v.clamp(0.0, 1.0)).collect();
    Ok(TextImage::new(pixels, Some(text.to_string())))
}

/// Render two texts under one identical style.
pub fn render_pair(
    text_a: &str,
    text_b: &str,
    style: &StyleParams,
    registry: &FontRegistry,
) -> Result<RenderedPair, RenderError> {
    Ok(RenderedPair {
        image_a: render_text(text_a, style, registry)?,
        image_b: render_text(text_b, style, registry)?,
        style: style.clone(),
    })
}

pub const CONTENT_FONT_ID: u32 = 0;
pub const CONTENT_CAP_PX: u32 = 20;

/// Canonical content rendering: default font, black on white, horizontally
/// centered, no geometric or photometric effects.
pub fn render_content_image(text: &str, registry: &FontRegistry) -> Result<TextImage, RenderError> {
    render_content_variant(text, CONTENT_FONT_ID, [0.0, 0.0, 0.0], registry)
}

/// Content rendering with a chosen font / ink color (used by the invariance
/// probes); background stays pure white and geometry stays neutral.
pub fn render_content_variant(
    text: &str,
    font_id: u32,
    fg: [f32; 3],
    registry: &FontRegistry,
) -> Result<TextImage, RenderError> {
    validate_text(text, registry, font_id)?;
    let font = registry.get(font_id)?;
    let (h, w) = (raster::CANVAS_H, raster::CANVAS_W);
    let alpha = raster::rasterize_word(
        text,
        font,
        CONTENT_CAP_PX as f32 * raster::SUPERSAMPLE,
    );
    let mut canvas = vec![0f32; 3 * h * w];
    for ch in 0..3 {
        let dst = &mut canvas[ch * h * w..(ch + 1) * h * w];
        for (d, &a) in dst.iter_mut().zip(&alpha) {
            *d = (1.0 - a) + fg[ch] * a;
        }
    }
    let small = warp::downscale2_chw(&canvas, 3, h, w);
    let pixels = small.iter().map(|&v| v.clamp(0.0, 1.0)).collect();
    Ok(TextImage::new(pixels, Some(text.to_string())))
}

/// Uniform style draw over the full registry.
pub fn sample_style(rng_seed: u64, registry: &FontRegistry) -> StyleParams {
    sample_style_with(&SamplerProfile::uniform(registry.ids()), rng_seed)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairEntry {
    pub pair_id: u64,
    pub path_a: String,
    pub path_b: String,
    pub text_a: String,
    pub text_b: String,
    pub style: StyleParams,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub entries: Vec<PairEntry>,
}

impl Manifest {
    pub fn save(&self, path: &Path) -> Result<(), RenderError> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<(Self, PathBuf), RenderError> {
        let text = std::fs::read_to_string(path)?;
        let m: Manifest = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Ok((m, base))
    }
}

/// Generate `n_pairs` rendered pairs plus a manifest under `out_dir`.
/// Deterministic in (corpus order, seed, profile).
pub fn generate_dataset(
    corpus: &[String],
    n_pairs: usize,
    out_dir: &Path,
    seed: u64,
    profile: &SamplerProfile,
    registry: &FontRegistry,
) -> Result<Manifest, RenderError> {
    if corpus.is_empty() {
        return Err(RenderError::CorpusEmpty);
    }
    std::fs::create_dir_all(out_dir.join("images"))?;
    let results: Vec<Result<PairEntry, RenderError>> = (0..n_pairs)
        .into_par_iter()
        .map(|i| {
            let style = sample_style_with(profile, Rng::stream(seed, &[i as u64]).next_u64());
            let mut trng = Rng::stream_tagged(seed, "texts", &[i as u64]);
            let text_a = trng.choose(corpus).clone();
            let mut text_b = trng.choose(corpus).clone();
            for _ in 0..8 {
                if text_b != text_a || corpus.len() == 1 {
                    break;
                }
                text_b = trng.choose(corpus).clone();
            }
            let pair = render_pair(&text_a, &text_b, &style, registry)?;
            let rel_a = format!("images/pair_{i:05}_a.png");
            let rel_b = format!("images/pair_{i:05}_b.png");
            pair.image_a
                .save_png(&out_dir.join(&rel_a))
                .map_err(|e| RenderError::Io(std::io::Error::other(e.to_string())))?;
            pair.image_b
                .save_png(&out_dir.join(&rel_b))
                .map_err(|e| RenderError::Io(std::io::Error::other(e.to_string())))?;
            Ok(PairEntry {
                pair_id: i as u64,
                path_a: rel_a,
                path_b: rel_b,
                text_a,
                text_b,
                style,
            })
        })
        .collect();
    let mut entries = Vec::with_capacity(n_pairs);
    for r in results {
        entries.push(r?);
    }
    let manifest = Manifest { seed, entries };
    manifest.save(&out_dir.join("manifest.json"))?;
    Ok(manifest)
}

/// Fraction of pixels that differ from the most common (background) value
/// by more than a small threshold; a cheap ink-coverage probe for tests.
pub fn ink_fraction(img: &TextImage) -> f32 {
    // Use the corner pixel as the background reference.
    let bg = [img.get(0, 0, 0), img.get(1, 0, 0), img.get(2, 0, 0)];
    let mut ink = 0usize;
    for y in 0..IMG_H {
        for x in 0..IMG_W {
            let d = (img.get(0, y, x) - bg[0]).abs()
                + (img.get(1, y, x) - bg[1]).abs()
                + (img.get(2, y, x) - bg[2]).abs();
            if d > 0.05 {
                ink += 1;
            }
        }
    }
    ink as f32 / (IMG_H * IMG_W) as f32
}
