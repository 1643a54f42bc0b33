//! The four networks and the single-image operations built on them.

pub mod checkpoint;
pub mod config;
pub mod discriminator;
pub mod encoder;
pub mod generator;
pub mod layers;
pub mod params;
pub mod recognizer;

use crate::data::codec::CharsetCodec;
use crate::error::ModelError;
use crate::image::TextImage;
use crate::synth::font::FontRegistry;
use crate::synth::render_content_image;
use config::ModelConfig;
use discriminator::DiscriminatorNet;
use encoder::EncoderNet;
use generator::GeneratorNet;
use params::{Binder, InitCollector, ParamDef, ParamSink, ParamStore, Trainable};
use recognizer::RecognizerNet;
use std::collections::BTreeMap;
use stedit_tensor::{Scalar, Tape, Tensor, VarId};

/// Multi-scale style representation of one image: the encoder stage maps,
/// each (C, H, W).
#[derive(Clone, Debug)]
pub struct StyleFeature {
    pub stage_maps: Vec<Tensor<f32>>,
}

/// Width-axis content sequence of one image: (L, D).
#[derive(Clone, Debug)]
pub struct ContentFeature {
    pub sequence: Tensor<f32>,
}

/// Per-patch realness probabilities, (grid_h, grid_w), all in (0,1).
#[derive(Clone, Debug)]
pub struct PatchScores {
    pub grid: Tensor<f32>,
}

pub struct Nets {
    pub enc: EncoderNet,
    pub rec: RecognizerNet,
    pub gen: GeneratorNet,
    pub disc: DiscriminatorNet,
}

impl Nets {
    pub fn build<S: Scalar, P: ParamSink<S>>(p: &mut P, cfg: &ModelConfig) -> Self {
        Self {
            enc: EncoderNet::build(p, cfg),
            rec: RecognizerNet::build(p, cfg),
            gen: GeneratorNet::build(p, cfg),
            disc: DiscriminatorNet::build(p, cfg),
        }
    }
}

/// Registry plus inits for the full model.
pub fn param_registry(cfg: &ModelConfig) -> InitCollector {
    let mut c = InitCollector::default();
    let _ = Nets::build::<f32, _>(&mut c, cfg);
    c
}

pub fn param_defs(cfg: &ModelConfig) -> Vec<ParamDef> {
    param_registry(cfg).defs
}

pub fn new_store<S: Scalar>(cfg: &ModelConfig, seed: u64) -> ParamStore<S> {
    let reg = param_registry(cfg);
    ParamStore::init(reg.defs, &reg.inits, seed)
}

/// Bind every network onto a tape; `ids` maps parameter names to leaves.
pub fn bind_nets<'a, S: Scalar>(
    tape: &'a mut Tape<S>,
    store: &'a ParamStore<S>,
    cfg: &ModelConfig,
    trainable: Trainable,
) -> (Nets, BTreeMap<String, VarId>) {
    let mut b = Binder::new(tape, store, trainable);
    let nets = Nets::build(&mut b, cfg);
    (nets, b.ids)
}

/// Inference-facing bundle: config, codec and current parameters.
pub struct Model {
    pub cfg: ModelConfig,
    pub codec: CharsetCodec,
    pub store: ParamStore<f32>,
}

impl Model {
    pub fn new(cfg: ModelConfig, codec: CharsetCodec, seed: u64) -> Self {
        assert_eq!(
            cfg.charset_size,
            codec.vocab_size(),
            "config/codec vocab drift"
        );
        let store = new_store(&cfg, seed);
        Self { cfg, codec, store }
    }

    pub fn config_hash(&self) -> String {
        self.cfg.config_hash(self.codec.charset())
    }

    fn image_const<S: Scalar>(tape: &mut Tape<S>, imgs: &[&TextImage]) -> VarId {
        let mut data = Vec::with_capacity(imgs.len() * 3 * 32 * 128);
        for im in imgs {
            data.extend(im.pixels.iter().map(|&v| S::from_f64(v as f64)));
        }
        tape.constant(Tensor::new(vec![imgs.len(), 3, 32, 128], data))
    }

    fn content_const(
        &self,
        tape: &mut Tape<f32>,
        content: &ContentFeature,
    ) -> Result<VarId, ModelError> {
        let l = self.cfg.content_len();
        let d = self.cfg.content_dim;
        if content.sequence.shape() != [l, d] {
            return Err(ModelError::ShapeMismatch {
                expected: format!("content ({l}, {d})"),
                got: format!("{:?}", content.sequence.shape()),
            });
        }
        Ok(tape.constant(content.sequence.clone().reshaped(vec![l, 1, d])))
    }

    /// Decompose one image into its style maps and content sequence.
    pub fn encode(&self, image: &TextImage) -> Result<(StyleFeature, ContentFeature), ModelError> {
        let mut tape: Tape<f32> = Tape::new();
        let (nets, _) = bind_nets(&mut tape, &self.store, &self.cfg, Trainable::NONE);
        let x = Self::image_const(&mut tape, &[image]);
        let (maps, ct) = nets.enc.encode(&mut tape, x);
        let stage_maps = maps
            .iter()
            .map(|&m| {
                let v = tape.val(m);
                let sh = v.shape().to_vec();
                Tensor::new(vec![sh[1], sh[2], sh[3]], v.data().to_vec())
            })
            .collect();
        let ctv = tape.val(ct);
        let l = ctv.shape()[0];
        let d = ctv.shape()[2];
        let sequence = Tensor::new(vec![l, d], ctv.data().to_vec());
        Ok((StyleFeature { stage_maps }, ContentFeature { sequence }))
    }

    /// Greedy decode of a content sequence; returns per-step distributions
    /// (max_len rows of charset_size) and the decoded text.
    pub fn recognize(
        &self,
        content: &ContentFeature,
        max_len: usize,
    ) -> Result<(Tensor<f32>, String), ModelError> {
        let mut tape: Tape<f32> = Tape::new();
        let (nets, _) = bind_nets(&mut tape, &self.store, &self.cfg, Trainable::NONE);
        let ct = self.content_const(&mut tape, content)?;
        let (seqs, dists) = nets.rec.greedy(&mut tape, ct, max_len, true);
        let v = self.cfg.charset_size;
        let mut flat = Vec::with_capacity(max_len * v);
        for step in &dists {
            flat.extend_from_slice(step.data());
        }
        let with_eos: Vec<usize> = seqs[0].iter().copied().chain([crate::data::EOS]).collect();
        Ok((
            Tensor::new(vec![dists.len(), v], flat),
            self.codec.decode(&with_eos),
        ))
    }

    /// Compose an image from style maps and a content sequence.
    pub fn generate(
        &self,
        style: &StyleFeature,
        content: &ContentFeature,
    ) -> Result<TextImage, ModelError> {
        let mut tape: Tape<f32> = Tape::new();
        let (nets, _) = bind_nets(&mut tape, &self.store, &self.cfg, Trainable::NONE);
        let expected = self.cfg.stage_shapes();
        if style.stage_maps.len() != 4 {
            return Err(ModelError::ShapeMismatch {
                expected: "4 stage maps".into(),
                got: format!("{}", style.stage_maps.len()),
            });
        }
        let mut ids = [VarId(0); 4];
        for (i, m) in style.stage_maps.iter().enumerate() {
            let (c, h, w) = expected[i];
            if m.shape() != [c, h, w] {
                return Err(ModelError::ShapeMismatch {
                    expected: format!("stage {i} ({c},{h},{w})"),
                    got: format!("{:?}", m.shape()),
                });
            }
            ids[i] = tape.constant(m.clone().reshaped(vec![1, c, h, w]));
        }
        let ct = self.content_const(&mut tape, content)?;
        let out = nets.gen.forward(&mut tape, &ids, ct);
        let v = tape.val(out);
        Ok(TextImage::new(v.data().to_vec(), None))
    }

    /// Patch realness grid for a candidate under (style reference, content)
    /// conditions.
    pub fn discriminate(
        &self,
        candidate: &TextImage,
        style_ref: &TextImage,
        content: &ContentFeature,
    ) -> Result<PatchScores, ModelError> {
        let mut tape: Tape<f32> = Tape::new();
        let (nets, _) = bind_nets(&mut tape, &self.store, &self.cfg, Trainable::NONE);
        let cand = Self::image_const(&mut tape, &[candidate]);
        let sref = Self::image_const(&mut tape, &[style_ref]);
        let ct = self.content_const(&mut tape, content)?;
        let out = nets.disc.forward(&mut tape, cand, sref, ct);
        let v = tape.val(out.probs);
        let (gh, gw) = self.cfg.disc_patch_grid;
        Ok(PatchScores {
            grid: Tensor::new(vec![gh, gw], v.data().to_vec()),
        })
    }

    /// Text replacement: style from `style_image`, content from the
    /// canonical rendering of `target_text`.
    pub fn edit(
        &self,
        style_image: &TextImage,
        target_text: &str,
        registry: &FontRegistry,
    ) -> Result<TextImage, ModelError> {
        Ok(self
            .edit_batch(&[style_image.clone()], &[target_text.to_string()], registry)?
            .remove(0))
    }

    /// Batched edit; one forward pass for the whole set.
    pub fn edit_batch(
        &self,
        style_images: &[TextImage],
        target_texts: &[String],
        registry: &FontRegistry,
    ) -> Result<Vec<TextImage>, ModelError> {
        assert_eq!(style_images.len(), target_texts.len());
        for t in target_texts {
            for ch in t.chars() {
                if !self.codec.contains(ch) {
                    return Err(ModelError::ShapeMismatch {
                        expected: "target text within codec charset".into(),
                        got: format!("character {ch:?}"),
                    });
                }
            }
        }
        let content_imgs: Vec<TextImage> = target_texts
            .iter()
            .map(|t| render_content_image(t, registry))
            .collect::<Result<_, _>>()
            .map_err(|e| ModelError::ShapeMismatch {
                expected: "renderable target text".into(),
                got: e.to_string(),
            })?;
        let mut tape: Tape<f32> = Tape::new();
        let (nets, _) = bind_nets(&mut tape, &self.store, &self.cfg, Trainable::NONE);
        let style_refs: Vec<&TextImage> = style_images.iter().collect();
        let xs = Self::image_const(&mut tape, &style_refs);
        let maps = nets.enc.trunk(&mut tape, xs);
        let content_refs: Vec<&TextImage> = content_imgs.iter().collect();
        let xc = Self::image_const(&mut tape, &content_refs);
        let (_, ct) = nets.enc.encode(&mut tape, xc);
        let out = nets.gen.forward(&mut tape, &maps, ct);
        let v = tape.val(out);
        let px = 3 * 32 * 128;
        Ok((0..style_images.len())
            .map(|i| TextImage::new(v.data()[i * px..(i + 1) * px].to_vec(), None))
            .collect())
    }

    /// Greedy text read-out of images through the encoder + text head.
    pub fn read_texts(&self, images: &[TextImage]) -> Vec<String> {
        if images.is_empty() {
            return Vec::new();
        }
        let mut tape: Tape<f32> = Tape::new();
        let (nets, _) = bind_nets(&mut tape, &self.store, &self.cfg, Trainable::NONE);
        let refs: Vec<&TextImage> = images.iter().collect();
        let xs = Self::image_const(&mut tape, &refs);
        let (_, ct) = nets.enc.encode(&mut tape, xs);
        let (seqs, _) = nets.rec.greedy(&mut tape, ct, self.cfg.max_decode_len, false);
        seqs.iter()
            .map(|s| {
                let with_eos: Vec<usize> = s.iter().copied().chain([crate::data::EOS]).collect();
                self.codec.decode(&with_eos)
            })
            .collect()
    }

    /// Mean-pooled deepest style map and mean-pooled content vector per
    /// image: the feature pair used by clustering metrics and the Fréchet
    /// feature distance.
    pub fn pooled_features(&self, images: &[TextImage]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        if images.is_empty() {
            return (Vec::new(), Vec::new());
        }
        let mut tape: Tape<f32> = Tape::new();
        let (nets, _) = bind_nets(&mut tape, &self.store, &self.cfg, Trainable::NONE);
        let refs: Vec<&TextImage> = images.iter().collect();
        let xs = Self::image_const(&mut tape, &refs);
        let (maps, ct) = nets.enc.encode(&mut tape, xs);
        let n = images.len();
        let s4 = tape.val(maps[3]);
        let c = s4.shape()[1];
        let hw = s4.shape()[2] * s4.shape()[3];
        let mut style_vecs = vec![vec![0f64; c]; n];
        for i in 0..n {
            for ch in 0..c {
                let base = (i * c + ch) * hw;
                let mean: f64 = s4.data()[base..base + hw]
                    .iter()
                    .map(|&v| v as f64)
                    .sum::<f64>()
                    / hw as f64;
                style_vecs[i][ch] = mean;
            }
        }
        let ctv = tape.val(ct);
        let l = ctv.shape()[0];
        let d = ctv.shape()[2];
        let mut content_vecs = vec![vec![0f64; d]; n];
        for li in 0..l {
            for i in 0..n {
                let base = (li * n + i) * d;
                for k in 0..d {
                    content_vecs[i][k] += ctv.data()[base + k] as f64;
                }
            }
        }
        for v in content_vecs.iter_mut() {
            for x in v.iter_mut() {
                *x /= l as f64;
            }
        }
        (style_vecs, content_vecs)
    }
}
