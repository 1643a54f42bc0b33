//! Metrics and diagnostics: edit recognition accuracy, Fréchet feature
//! distance, feature-decomposition purity, style-invariance probes and
//! embedding export.

pub mod frechet;
pub mod metrics;
pub mod purity;

use crate::error::EvalError;
use crate::image::TextImage;
use crate::model::{bind_nets, Model};
use crate::synth::font::FontRegistry;
use crate::synth::{render_content_variant, render_text, sample_style};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub use frechet::frechet_distance;
pub use metrics::{mean_pixel_variance, psnr, ssim};
pub use purity::nearest_centroid_purity;

fn psnr_ser<S: serde::Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str("Inf")
    } else {
        s.serialize_f64(*v)
    }
}

fn psnr_de<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum V {
        N(f64),
        S(serde::de::IgnoredAny),
    }
    Ok(match V::deserialize(d)? {
        V::N(x) => x,
        V::S(_) => f64::INFINITY,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InvarianceReport {
    /// Mean pairwise PSNR over generated outputs; "Inf" when any pair is
    /// pixel-identical.
    #[serde(serialize_with = "psnr_ser", deserialize_with = "psnr_de")]
    pub mean_psnr_db: f64,
    pub mean_ssim: f64,
    pub mean_pixel_variance: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub recognition_accuracy: f64,
    pub frechet_distance: f64,
    pub content_purity: f64,
    pub style_purity: f64,
    pub invariance: InvarianceReport,
}

impl EvalReport {
    pub fn save(&self, path: &Path) -> Result<(), EvalError> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, serde_json::to_string_pretty(self).unwrap())?;
        Ok(())
    }
}

/// Exact full-string, case-sensitive match rate of the frozen recognizer's
/// greedy decodes against the requested texts.
pub fn recognition_accuracy(
    recognizer: &Model,
    edits: &[(TextImage, String)],
) -> Result<f64, EvalError> {
    if edits.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let images: Vec<TextImage> = edits.iter().map(|(im, _)| im.clone()).collect();
    let decoded = recognizer.read_texts(&images);
    let hits = decoded
        .iter()
        .zip(edits)
        .filter(|(got, (_, want))| got.as_str() == want)
        .count();
    Ok(hits as f64 / edits.len() as f64)
}

/// A rendered style-by-content grid with its labels.
pub struct FeatureGrid {
    pub images: Vec<TextImage>,
    pub style_labels: Vec<usize>,
    pub content_labels: Vec<usize>,
    pub n_styles: usize,
    pub n_contents: usize,
}

/// Render an N_s x N_c grid: every text under every sampled style.
pub fn render_grid(
    texts: &[String],
    style_seeds: &[u64],
    registry: &FontRegistry,
) -> Result<FeatureGrid, EvalError> {
    let mut images = Vec::with_capacity(texts.len() * style_seeds.len());
    let mut style_labels = Vec::new();
    let mut content_labels = Vec::new();
    for (si, &seed) in style_seeds.iter().enumerate() {
        let style = sample_style(seed, registry);
        for (ci, text) in texts.iter().enumerate() {
            images.push(render_text(text, &style, registry)?);
            style_labels.push(si);
            content_labels.push(ci);
        }
    }
    Ok(FeatureGrid {
        images,
        style_labels,
        content_labels,
        n_styles: style_seeds.len(),
        n_contents: texts.len(),
    })
}

/// Leave-one-out nearest-centroid purity of mean-pooled content features
/// against content labels, and of pooled style features against style
/// labels.
pub fn decomposition_purity(model: &Model, grid: &FeatureGrid) -> Result<(f64, f64), EvalError> {
    if grid.n_styles < 2 || grid.n_contents < 2 {
        return Err(EvalError::GridTooSmall {
            need: 2,
            rows: grid.n_styles,
            cols: grid.n_contents,
        });
    }
    let (style_vecs, content_vecs) = model.pooled_features(&grid.images);
    let content_purity =
        nearest_centroid_purity(&content_vecs, &grid.content_labels, grid.n_contents);
    let style_purity = nearest_centroid_purity(&style_vecs, &grid.style_labels, grid.n_styles);
    Ok((content_purity, style_purity))
}

/// Cross check: how much the content features cluster by style instead.
pub fn content_by_style_purity(model: &Model, grid: &FeatureGrid) -> f64 {
    let (_, content_vecs) = model.pooled_features(&grid.images);
    nearest_centroid_purity(&content_vecs, &grid.style_labels, grid.n_styles)
}

/// A content-image restyle for the invariance probe: same text, different
/// simple-render appearance.
#[derive(Clone, Debug)]
pub struct ContentVariant {
    pub font_id: u32,
    pub fg_color: [f32; 3],
}

/// Edit one style image with the same target text rendered under several
/// content-image styles; measure how stable the outputs are.
pub fn style_invariance(
    model: &Model,
    style_image: &TextImage,
    text: &str,
    variants: &[ContentVariant],
    registry: &FontRegistry,
) -> Result<InvarianceReport, EvalError> {
    if variants.len() < 2 {
        return Err(EvalError::TooFewVariants {
            need: 2,
            got: variants.len(),
        });
    }
    let content_images: Vec<TextImage> = variants
        .iter()
        .map(|v| render_content_variant(text, v.font_id, v.fg_color, registry))
        .collect::<Result<_, _>>()?;
    let styles = vec![style_image.clone(); variants.len()];
    let outputs = edit_with_content_images(model, &styles, &content_images)?;
    let mut psnr_sum = 0f64;
    let mut ssim_sum = 0f64;
    let mut pairs = 0usize;
    for i in 0..outputs.len() {
        for j in i + 1..outputs.len() {
            psnr_sum += psnr(&outputs[i], &outputs[j]);
            ssim_sum += ssim(&outputs[i], &outputs[j]);
            pairs += 1;
        }
    }
    Ok(InvarianceReport {
        mean_psnr_db: psnr_sum / pairs as f64,
        mean_ssim: ssim_sum / pairs as f64,
        mean_pixel_variance: mean_pixel_variance(&outputs),
    })
}

/// Generate with explicit content images (invariance probes feed restyled
/// content renders rather than the canonical one).
pub fn edit_with_content_images(
    model: &Model,
    style_images: &[TextImage],
    content_images: &[TextImage],
) -> Result<Vec<TextImage>, EvalError> {
    assert_eq!(style_images.len(), content_images.len());
    let mut tape = stedit_tensor::Tape::<f32>::new();
    let (nets, _) = bind_nets(
        &mut tape,
        &model.store,
        &model.cfg,
        crate::model::params::Trainable::NONE,
    );
    let style_refs: Vec<TextImage> = style_images.to_vec();
    let xs = crate::losses::image_batch_const(&mut tape, &style_refs);
    let maps = nets.enc.trunk(&mut tape, xs);
    let xc = crate::losses::image_batch_const(&mut tape, content_images);
    let (_, ct) = nets.enc.encode(&mut tape, xc);
    let out = nets.gen.forward(&mut tape, &maps, ct);
    let v = tape.val(out);
    let px = 3 * 32 * 128;
    Ok((0..style_images.len())
        .map(|i| TextImage::new(v.data()[i * px..(i + 1) * px].to_vec(), None))
        .collect())
}

/// Write pooled style and content vectors plus labels as CSV: two label
/// columns, then the content dims, then the style dims.
pub fn export_embeddings(
    model: &Model,
    images: &[TextImage],
    style_tags: &[String],
    out_path: &Path,
) -> Result<(), EvalError> {
    assert_eq!(images.len(), style_tags.len());
    let (style_vecs, content_vecs) = model.pooled_features(images);
    let mut out = String::new();
    let d_ct = content_vecs.first().map(|v| v.len()).unwrap_or(0);
    let d_st = style_vecs.first().map(|v| v.len()).unwrap_or(0);
    out.push_str("text,style");
    for i in 0..d_ct {
        out.push_str(&format!(",c{i}"));
    }
    for i in 0..d_st {
        out.push_str(&format!(",s{i}"));
    }
    out.push('\n');
    for (i, img) in images.iter().enumerate() {
        out.push_str(img.label.as_deref().unwrap_or(""));
        out.push(',');
        out.push_str(&style_tags[i]);
        for v in &content_vecs[i] {
            out.push_str(&format!(",{v:.6e}"));
        }
        for v in &style_vecs[i] {
            out.push_str(&format!(",{v:.6e}"));
        }
        out.push('\n');
    }
    if let Some(dir) = out_path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(out_path, out)?;
    Ok(())
}
