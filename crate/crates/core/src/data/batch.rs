//! Mixed synthetic/pseudo-real batch assembly with epoch-shuffled,
//! without-replacement sampling. All sampling is a pure function of
//! (seed, iteration), so runs resume bit-identically from any step.

use crate::data::codec::CharsetCodec;
use crate::data::cutout::{cutout, dataset_mean, CutoutFill, CutoutSpec};
use crate::error::DataError;
use crate::image::TextImage;
use crate::synth::font::FontRegistry;
use crate::synth::{render_text, sample_style_with, Manifest, SamplerProfile};
use serde::{Deserialize, Serialize};
use std::path::Path;
use stedit_tensor::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairStyleMode {
    /// Content source is the paired image: same style as the style-image.
    Same,
    /// Content source is re-rendered with an independently sampled style
    /// each time the pair is drawn; the reconstruction target keeps the
    /// pair's own style.
    Different,
}

/// One training batch. The real branch never exposes labels.
#[derive(Clone, Debug)]
pub struct Batch {
    pub synth_style: Vec<TextImage>,
    pub synth_target: Vec<TextImage>,
    /// Image the content feature is extracted from; equals `synth_target`
    /// under `PairStyleMode::Same`.
    pub synth_content_src: Vec<TextImage>,
    pub synth_labels_source: Vec<Vec<usize>>,
    pub synth_labels_target: Vec<Vec<usize>>,
    pub real_clean: Vec<TextImage>,
    pub real_noisy: Vec<TextImage>,
    pub cut_positions: Vec<usize>,
    pub synth_ids: Vec<usize>,
    pub real_ids: Vec<usize>,
}

struct SynthItem {
    style_img: TextImage,
    target_img: TextImage,
    text_a: String,
    text_b: String,
    style_seed: u64,
}

pub struct BatchSampler {
    synth: Vec<SynthItem>,
    real: Vec<TextImage>,
    pub batch_synth: usize,
    pub batch_real: usize,
    codec: CharsetCodec,
    cutout_spec: CutoutSpec,
    mean_fill: [f32; 3],
    seed: u64,
    pair_mode: PairStyleMode,
    restyle: Option<(FontRegistry, SamplerProfile)>,
}

fn epoch_index(seed: u64, tag: &str, epoch: usize, n: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = Rng::stream_tagged(seed, tag, &[epoch as u64]);
    rng.shuffle(&mut perm);
    perm
}

/// Item index for global draw position `m` over a dataset of `n` items:
/// epoch-local permutation, without replacement inside each epoch.
fn draw(seed: u64, tag: &str, m: usize, n: usize) -> usize {
    let epoch = m / n;
    let pos = m % n;
    epoch_index(seed, tag, epoch, n)[pos]
}

impl BatchSampler {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        synth_manifest: &Path,
        real_manifest: &Path,
        batch_synth: usize,
        batch_real: usize,
        codec: CharsetCodec,
        cutout_spec: CutoutSpec,
        seed: u64,
        pair_mode: PairStyleMode,
        restyle: Option<(FontRegistry, SamplerProfile)>,
    ) -> Result<Self, DataError> {
        let (sm, sbase) = Manifest::load(synth_manifest).map_err(DataError::Render)?;
        let (rm, rbase) = Manifest::load(real_manifest).map_err(DataError::Render)?;
        if sm.entries.is_empty() {
            return Err(DataError::EmptyManifest("synthetic"));
        }
        if rm.entries.is_empty() {
            return Err(DataError::EmptyManifest("pseudo-real"));
        }
        if pair_mode == PairStyleMode::Different && restyle.is_none() {
            return Err(DataError::Image(
                "different-style pairing needs a font registry".into(),
            ));
        }
        let mut synth = Vec::with_capacity(sm.entries.len());
        for e in &sm.entries {
            let mut style_img = TextImage::load_png(&sbase.join(&e.path_a))?;
            style_img.label = Some(e.text_a.clone());
            let mut target_img = TextImage::load_png(&sbase.join(&e.path_b))?;
            target_img.label = Some(e.text_b.clone());
            synth.push(SynthItem {
                style_img,
                target_img,
                text_a: e.text_a.clone(),
                text_b: e.text_b.clone(),
                style_seed: e.style.seed,
            });
        }
        // The pseudo-real branch deliberately ignores manifest labels; both
        // pair images enter as independent unlabeled samples.
        let mut real = Vec::new();
        for e in &rm.entries {
            real.push(TextImage::load_png(&rbase.join(&e.path_a))?);
            real.push(TextImage::load_png(&rbase.join(&e.path_b))?);
        }
        let mean_fill = if cutout_spec.fill == CutoutFill::DatasetMean {
            dataset_mean(&real)
        } else {
            [0.0; 3]
        };
        Ok(Self {
            synth,
            real,
            batch_synth,
            batch_real,
            codec,
            cutout_spec,
            mean_fill,
            seed,
            pair_mode,
            restyle,
        })
    }

    pub fn synth_len(&self) -> usize {
        self.synth.len()
    }

    pub fn real_len(&self) -> usize {
        self.real.len()
    }

    pub fn codec(&self) -> &CharsetCodec {
        &self.codec
    }

    /// Assemble the batch for one iteration; pure in (self.seed, iter).
    pub fn make_batch(&self, iter: u64) -> Result<Batch, DataError> {
        let bs = self.batch_synth;
        let br = self.batch_real;
        let mut batch = Batch {
            synth_style: Vec::with_capacity(bs),
            synth_target: Vec::with_capacity(bs),
            synth_content_src: Vec::with_capacity(bs),
            synth_labels_source: Vec::with_capacity(bs),
            synth_labels_target: Vec::with_capacity(bs),
            real_clean: Vec::with_capacity(br),
            real_noisy: Vec::with_capacity(br),
            cut_positions: Vec::with_capacity(br),
            synth_ids: Vec::with_capacity(bs),
            real_ids: Vec::with_capacity(br),
        };
        for slot in 0..bs {
            let m = iter as usize * bs + slot;
            let id = draw(self.seed, "synth-order", m, self.synth.len());
            let item = &self.synth[id];
            batch.synth_ids.push(id);
            batch.synth_style.push(item.style_img.clone());
            batch.synth_target.push(item.target_img.clone());
            let content_src = match self.pair_mode {
                PairStyleMode::Same => item.target_img.clone(),
                PairStyleMode::Different => {
                    let (reg, profile) = self.restyle.as_ref().unwrap();
                    let style_seed = Rng::stream_tagged(
                        self.seed,
                        "restyle",
                        &[iter, slot as u64, item.style_seed],
                    )
                    .next_u64();
                    let alt = sample_style_with(profile, style_seed);
                    render_text(&item.text_b, &alt, reg)?
                }
            };
            batch.synth_content_src.push(content_src);
            batch
                .synth_labels_source
                .push(self.codec.encode(&item.text_a)?);
            batch
                .synth_labels_target
                .push(self.codec.encode(&item.text_b)?);
        }
        for slot in 0..br {
            let m = iter as usize * br + slot;
            let id = draw(self.seed, "real-order", m, self.real.len());
            let clean = self.real[id].clone();
            let mut rng = Rng::stream_tagged(self.seed, "cutout", &[iter, slot as u64]);
            let (noisy, left) = cutout(&clean, &self.cutout_spec, self.mean_fill, &mut rng)?;
            batch.real_ids.push(id);
            batch.real_clean.push(clean);
            batch.real_noisy.push(noisy);
            batch.cut_positions.push(left);
        }
        Ok(batch)
    }
}
