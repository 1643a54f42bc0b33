//! Training objectives: paired reconstruction, recognition, self-supervised
//! denoising, conditional adversarial terms, feature matching, the optional
//! text-consistency term, and their weighted totals. Stop-gradient
//! placement follows the training scheme exactly: content features feeding
//! the generator or conditioning the discriminator are detached, so the
//! content branch learns from recognition alone.

use crate::data::batch::Batch;
use crate::data::codec::CharsetCodec;
use crate::image::TextImage;
use crate::model::config::ModelConfig;
use crate::model::discriminator::DiscriminatorNet;
use crate::model::params::{Binder, ParamStore, Trainable};
use crate::model::Nets;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use stedit_tensor::{Scalar, Tape, Tensor, VarId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvMode {
    /// The literal two-player objective: the generator minimizes
    /// mean log(1 - D(fake)).
    Minimax,
    /// The generator minimizes -mean log D(fake) instead.
    Nonsaturating,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdvSide {
    Disc,
    Gen,
}

/// Per-iteration loss components. Adversarial entries are log-domain and may
/// be negative; everything else is non-negative.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct LossBreakdown {
    pub gen_synth: f64,
    pub text_synth: f64,
    pub per_synth: f64,
    pub gen_real: f64,
    pub per_real: f64,
    pub adv_synth_d: f64,
    pub adv_synth_g: f64,
    pub adv_real_d: f64,
    pub adv_real_g: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub con_text: Option<f64>,
    pub total_eg_r: f64,
    pub total_d: f64,
}

impl LossBreakdown {
    /// The documented weighted sum the encoder/generator/recognizer side
    /// minimizes.
    pub fn expected_total_eg_r(&self, lambda: f64) -> f64 {
        self.gen_synth
            + self.text_synth
            + self.per_synth
            + self.gen_real
            + self.per_real
            + lambda * (self.adv_synth_g + self.adv_real_g)
            + self.con_text.unwrap_or(0.0)
    }

    /// The documented weighted sum the discriminator side minimizes.
    pub fn expected_total_d(&self, lambda: f64) -> f64 {
        lambda * (self.adv_synth_d + self.adv_real_d)
    }

    pub fn all_finite(&self) -> bool {
        let vals = [
            self.gen_synth,
            self.text_synth,
            self.per_synth,
            self.gen_real,
            self.per_real,
            self.adv_synth_d,
            self.adv_synth_g,
            self.adv_real_d,
            self.adv_real_g,
            self.con_text.unwrap_or(0.0),
            self.total_eg_r,
            self.total_d,
        ];
        vals.iter().all(|v| v.is_finite())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct StepOptions {
    pub lambda: f64,
    pub adv_mode: AdvMode,
    /// When false, every stop-gradient is removed (ablation).
    pub stop_gradient: bool,
    pub con_text: bool,
    /// Drop the recognition loss entirely (ablation).
    pub drop_recognition: bool,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            adv_mode: AdvMode::Nonsaturating,
            stop_gradient: true,
            con_text: false,
            drop_recognition: false,
        }
    }
}

pub fn image_batch_const<S: Scalar>(t: &mut Tape<S>, imgs: &[TextImage]) -> VarId {
    assert!(!imgs.is_empty());
    let mut data = Vec::with_capacity(imgs.len() * 3 * 32 * 128);
    for im in imgs {
        data.extend(im.pixels.iter().map(|&v| S::from_f64(v as f64)));
    }
    t.constant(Tensor::new(vec![imgs.len(), 3, 32, 128], data))
}

fn mean_ln<S: Scalar>(t: &mut Tape<S>, probs: VarId) -> VarId {
    let l = t.ln(probs);
    t.mean_all(l)
}

fn one_minus<S: Scalar>(t: &mut Tape<S>, probs: VarId) -> VarId {
    t.affine_const(probs, -1.0, 1.0)
}

/// Adversarial objective from patch probability grids.
pub fn adv_from_probs<S: Scalar>(
    t: &mut Tape<S>,
    real_probs: Option<VarId>,
    fake_probs: VarId,
    side: AdvSide,
    mode: AdvMode,
) -> VarId {
    match side {
        AdvSide::Disc => {
            let real = real_probs.expect("discriminator side needs real scores");
            let lr = mean_ln(t, real);
            let omf = one_minus(t, fake_probs);
            let lf = mean_ln(t, omf);
            t.weighted_sum_scalars(&[(lr, -1.0), (lf, -1.0)])
        }
        AdvSide::Gen => match mode {
            AdvMode::Minimax => {
                let omf = one_minus(t, fake_probs);
                mean_ln(t, omf)
            }
            AdvMode::Nonsaturating => {
                let lf = mean_ln(t, fake_probs);
                t.scale(lf, -1.0)
            }
        },
    }
}

/// Sum over layers of the per-element-normalized L1 gap between activation
/// maps.
pub fn feature_matching<S: Scalar>(
    t: &mut Tape<S>,
    target_feats: &[VarId],
    fake_feats: &[VarId],
) -> VarId {
    assert_eq!(target_feats.len(), fake_feats.len());
    let terms: Vec<(VarId, f64)> = target_feats
        .iter()
        .zip(fake_feats)
        .map(|(&a, &b)| (t.l1_diff_mean(a, b), 1.0))
        .collect();
    t.weighted_sum_scalars(&terms)
}

/// Everything the losses need from one forward pass over a batch.
pub struct SharedForward {
    pub xa: VarId,
    pub xb: VarId,
    pub fake_synth: VarId,
    /// Content of the content-source image as consumed by G and D
    /// (detached under the default options).
    pub ct_src_used: VarId,
    /// Content of the style-image, gradient-carrying, for recognition.
    pub maps_a: [VarId; 4],
    pub xclean: VarId,
    pub xnoisy: VarId,
    pub fake_real: VarId,
    pub ct_clean_used: VarId,
}

/// Forward passes shared by every loss term: encode, generate for both the
/// paired branch and the denoising branch.
pub fn build_shared<S: Scalar>(
    t: &mut Tape<S>,
    nets: &Nets,
    batch: &Batch,
    opts: &StepOptions,
) -> SharedForward {
    let xa = image_batch_const(t, &batch.synth_style);
    let xb = image_batch_const(t, &batch.synth_target);
    let xsrc = if batch
        .synth_content_src
        .iter()
        .zip(&batch.synth_target)
        .all(|(a, b)| a.pixels == b.pixels)
    {
        xb
    } else {
        image_batch_const(t, &batch.synth_content_src)
    };
    let maps_a = nets.enc.trunk(t, xa);
    let (_, ct_src) = if xsrc == xb {
        let maps_b = nets.enc.trunk(t, xb);
        let ct = nets.enc.content(t, maps_b[3]);
        (maps_b, ct)
    } else {
        let maps_s = nets.enc.trunk(t, xsrc);
        let ct = nets.enc.content(t, maps_s[3]);
        (maps_s, ct)
    };
    let ct_src_used = if opts.stop_gradient {
        t.detach(ct_src)
    } else {
        ct_src
    };
    let fake_synth = nets.gen.forward(t, &maps_a, ct_src_used);

    let xclean = image_batch_const(t, &batch.real_clean);
    let xnoisy = image_batch_const(t, &batch.real_noisy);
    let maps_noisy = nets.enc.trunk(t, xnoisy);
    let maps_clean = nets.enc.trunk(t, xclean);
    let ct_clean = nets.enc.content(t, maps_clean[3]);
    let ct_clean_used = if opts.stop_gradient {
        t.detach(ct_clean)
    } else {
        ct_clean
    };
    let fake_real = nets.gen.forward(t, &maps_noisy, ct_clean_used);

    SharedForward {
        xa,
        xb,
        fake_synth,
        ct_src_used,
        maps_a,
        xclean,
        xnoisy,
        fake_real,
        ct_clean_used,
    }
}

/// Discriminator-side adversarial terms over detached fakes.
/// Returns (adv_synth_d, adv_real_d).
pub fn build_d_losses<S: Scalar>(
    t: &mut Tape<S>,
    disc: &DiscriminatorNet,
    fwd: &SharedForward,
) -> (VarId, VarId) {
    let fake_s = t.detach(fwd.fake_synth);
    let cond_s = t.detach(fwd.ct_src_used);
    let real_out = disc.forward(t, fwd.xb, fwd.xa, cond_s);
    let fake_out = disc.forward(t, fake_s, fwd.xa, cond_s);
    let adv_synth_d = adv_from_probs(
        t,
        Some(real_out.probs),
        fake_out.probs,
        AdvSide::Disc,
        AdvMode::Minimax,
    );

    let fake_r = t.detach(fwd.fake_real);
    let cond_r = t.detach(fwd.ct_clean_used);
    let real_out_r = disc.forward(t, fwd.xclean, fwd.xnoisy, cond_r);
    let fake_out_r = disc.forward(t, fake_r, fwd.xnoisy, cond_r);
    let adv_real_d = adv_from_probs(
        t,
        Some(real_out_r.probs),
        fake_out_r.probs,
        AdvSide::Disc,
        AdvMode::Minimax,
    );
    (adv_synth_d, adv_real_d)
}

pub struct EgrLosses {
    pub gen_synth: VarId,
    pub text_synth: Option<VarId>,
    pub per_synth: VarId,
    pub gen_real: VarId,
    pub per_real: VarId,
    pub adv_synth_g: VarId,
    pub adv_real_g: VarId,
    pub con_text: Option<VarId>,
    pub total: VarId,
}

/// The encoder/generator/recognizer objective. `disc` should be bound
/// frozen (its parameters receive no updates from this side).
pub fn build_egr_losses<S: Scalar>(
    t: &mut Tape<S>,
    nets: &Nets,
    disc: &DiscriminatorNet,
    fwd: &SharedForward,
    batch: &Batch,
    opts: &StepOptions,
) -> EgrLosses {
    let gen_synth = t.l1_diff_mean(fwd.fake_synth, fwd.xb);
    let gen_real = t.l1_diff_mean(fwd.fake_real, fwd.xclean);

    let text_synth = if opts.drop_recognition {
        None
    } else {
        let ct_a = nets.enc.content(t, fwd.maps_a[3]);
        let (sum, count) = nets.rec.teacher_ce(t, ct_a, &batch.synth_labels_source);
        Some(t.scale(sum, 1.0 / count as f64))
    };

    // Adversarial + feature matching share the same conditions and the same
    // discriminator passes.
    let cond_s = t.detach(fwd.ct_src_used);
    let fake_out = disc.forward(t, fwd.fake_synth, fwd.xa, cond_s);
    let tgt_out = disc.forward(t, fwd.xb, fwd.xa, cond_s);
    let adv_synth_g = adv_from_probs(t, None, fake_out.probs, AdvSide::Gen, opts.adv_mode);
    let per_synth = feature_matching(t, &tgt_out.feats, &fake_out.feats);

    let cond_r = t.detach(fwd.ct_clean_used);
    let fake_out_r = disc.forward(t, fwd.fake_real, fwd.xnoisy, cond_r);
    let tgt_out_r = disc.forward(t, fwd.xclean, fwd.xnoisy, cond_r);
    let adv_real_g = adv_from_probs(t, None, fake_out_r.probs, AdvSide::Gen, opts.adv_mode);
    let per_real = feature_matching(t, &tgt_out_r.feats, &fake_out_r.feats);

    let con_text = if opts.con_text {
        let maps_fake = nets.enc.trunk(t, fwd.fake_synth);
        let ct_fake = nets.enc.content(t, maps_fake[3]);
        let (sum, count) = nets.rec.teacher_ce(t, ct_fake, &batch.synth_labels_target);
        Some(t.scale(sum, 1.0 / count as f64))
    } else {
        None
    };

    let mut terms: Vec<(VarId, f64)> = vec![
        (gen_synth, 1.0),
        (per_synth, 1.0),
        (gen_real, 1.0),
        (per_real, 1.0),
        (adv_synth_g, opts.lambda),
        (adv_real_g, opts.lambda),
    ];
    if let Some(ts) = text_synth {
        terms.push((ts, 1.0));
    }
    if let Some(ct) = con_text {
        terms.push((ct, 1.0));
    }
    let total = t.weighted_sum_scalars(&terms);
    EgrLosses {
        gen_synth,
        text_synth,
        per_synth,
        gen_real,
        per_real,
        adv_synth_g,
        adv_real_g,
        con_text,
        total,
    }
}

/// A loss evaluated on its own tape, with parameter leaves addressable by
/// name for gradient inspection.
pub struct LossEval<S: Scalar> {
    pub tape: Tape<S>,
    pub loss: VarId,
    pub ids: BTreeMap<String, VarId>,
}

impl<S: Scalar> LossEval<S> {
    pub fn value(&self) -> f64 {
        self.tape.val(self.loss).item().to_f64()
    }

    pub fn grads(&self) -> Vec<Option<Tensor<S>>> {
        self.tape.backward(self.loss)
    }
}

fn bind_all<S: Scalar>(
    tape: &mut Tape<S>,
    store: &ParamStore<S>,
    cfg: &ModelConfig,
) -> (Nets, BTreeMap<String, VarId>) {
    let mut b = Binder::new(tape, store, Trainable::ALL);
    let nets = Nets::build(&mut b, cfg);
    (nets, b.ids)
}

/// Paired reconstruction: G(style(style_img), stopgrad(content(target_img)))
/// against target_img, mean absolute error.
pub fn loss_gen_synth<S: Scalar>(
    cfg: &ModelConfig,
    store: &ParamStore<S>,
    style_img: &TextImage,
    target_img: &TextImage,
) -> LossEval<S> {
    loss_gen_synth_pinned(cfg, store, style_img, target_img, Vec::new())
}

/// Variant for finite-difference checks: detached values are pinned so
/// perturbed evaluations stay on the differentiated function.
pub fn loss_gen_synth_pinned<S: Scalar>(
    cfg: &ModelConfig,
    store: &ParamStore<S>,
    style_img: &TextImage,
    target_img: &TextImage,
    pins: Vec<Tensor<S>>,
) -> LossEval<S> {
    let mut tape = Tape::new();
    tape.set_detach_pins(pins);
    let (nets, ids) = bind_all(&mut tape, store, cfg);
    let xa = image_batch_const(&mut tape, std::slice::from_ref(style_img));
    let xb = image_batch_const(&mut tape, std::slice::from_ref(target_img));
    let maps_a = nets.enc.trunk(&mut tape, xa);
    let maps_b = nets.enc.trunk(&mut tape, xb);
    let ct_b = nets.enc.content(&mut tape, maps_b[3]);
    let ct_sg = tape.detach(ct_b);
    let fake = nets.gen.forward(&mut tape, &maps_a, ct_sg);
    let loss = tape.l1_diff_mean(fake, xb);
    LossEval {
        tape,
        loss,
        ids,
    }
}

/// Recognition: masked mean cross entropy of the teacher-forced text head
/// on the image's content sequence.
pub fn loss_text<S: Scalar>(
    cfg: &ModelConfig,
    store: &ParamStore<S>,
    image: &TextImage,
    label: &[usize],
) -> LossEval<S> {
    loss_text_pinned(cfg, store, image, label, Vec::new())
}

/// Variant for finite-difference checks: detached values are pinned so
/// perturbed evaluations stay on the differentiated function.
pub fn loss_text_pinned<S: Scalar>(
    cfg: &ModelConfig,
    store: &ParamStore<S>,
    image: &TextImage,
    label: &[usize],
    pins: Vec<Tensor<S>>,
) -> LossEval<S> {
    let mut tape = Tape::new();
    tape.set_detach_pins(pins);
    let (nets, ids) = bind_all(&mut tape, store, cfg);
    let x = image_batch_const(&mut tape, std::slice::from_ref(image));
    let (_, ct) = nets.enc.encode(&mut tape, x);
    let (sum, count) = nets.rec.teacher_ce(&mut tape, ct, &[label.to_vec()]);
    let loss = tape.scale(sum, 1.0 / count as f64);
    LossEval {
        tape,
        loss,
        ids,
    }
}

/// Conditioned denoising reconstruction: style from the corrupted image,
/// content (stop-gradient) from the clean one, target the clean image.
pub fn loss_gen_real<S: Scalar>(
    cfg: &ModelConfig,
    store: &ParamStore<S>,
    clean_img: &TextImage,
    noisy_img: &TextImage,
) -> LossEval<S> {
    loss_gen_real_pinned(cfg, store, clean_img, noisy_img, Vec::new())
}

/// Variant for finite-difference checks: detached values are pinned so
/// perturbed evaluations stay on the differentiated function.
pub fn loss_gen_real_pinned<S: Scalar>(
    cfg: &ModelConfig,
    store: &ParamStore<S>,
    clean_img: &TextImage,
    noisy_img: &TextImage,
    pins: Vec<Tensor<S>>,
) -> LossEval<S> {
    let mut tape = Tape::new();
    tape.set_detach_pins(pins);
    let (nets, ids) = bind_all(&mut tape, store, cfg);
    let xc = image_batch_const(&mut tape, std::slice::from_ref(clean_img));
    let xn = image_batch_const(&mut tape, std::slice::from_ref(noisy_img));
    let maps_n = nets.enc.trunk(&mut tape, xn);
    let maps_c = nets.enc.trunk(&mut tape, xc);
    let ct_c = nets.enc.content(&mut tape, maps_c[3]);
    let ct_sg = tape.detach(ct_c);
    let fake = nets.gen.forward(&mut tape, &maps_n, ct_sg);
    let loss = tape.l1_diff_mean(fake, xc);
    LossEval {
        tape,
        loss,
        ids,
    }
}

/// Conditional adversarial objective on given images. The content condition
/// is computed from `cond_content_img` and detached.
#[allow(clippy::too_many_arguments)]
pub fn loss_adv<S: Scalar>(
    cfg: &ModelConfig,
    store: &ParamStore<S>,
    real_img: &TextImage,
    fake_img: &TextImage,
    cond_style: &TextImage,
    cond_content_img: &TextImage,
    side: AdvSide,
    mode: AdvMode,
) -> LossEval<S> {
    loss_adv_pinned(
        cfg, store, real_img, fake_img, cond_style, cond_content_img, side, mode,
        Vec::new(),
    )
}

#[allow(clippy::too_many_arguments)]
pub fn loss_adv_pinned<S: Scalar>(
    cfg: &ModelConfig,
    store: &ParamStore<S>,
    real_img: &TextImage,
    fake_img: &TextImage,
    cond_style: &TextImage,
    cond_content_img: &TextImage,
    side: AdvSide,
    mode: AdvMode,
    pins: Vec<Tensor<S>>,
) -> LossEval<S> {
    let mut tape = Tape::new();
    tape.set_detach_pins(pins);
    let (nets, ids) = bind_all(&mut tape, store, cfg);
    let xr = image_batch_const(&mut tape, std::slice::from_ref(real_img));
    let xf = image_batch_const(&mut tape, std::slice::from_ref(fake_img));
    let xs = image_batch_const(&mut tape, std::slice::from_ref(cond_style));
    let xc = image_batch_const(&mut tape, std::slice::from_ref(cond_content_img));
    let (_, ct) = nets.enc.encode(&mut tape, xc);
    let cond = tape.detach(ct);
    let fake_out = nets.disc.forward(&mut tape, xf, xs, cond);
    let loss = match side {
        AdvSide::Disc => {
            let real_out = nets.disc.forward(&mut tape, xr, xs, cond);
            adv_from_probs(&mut tape, Some(real_out.probs), fake_out.probs, side, mode)
        }
        AdvSide::Gen => adv_from_probs(&mut tape, None, fake_out.probs, side, mode),
    };
    LossEval {
        tape,
        loss,
        ids,
    }
}

/// Feature matching between discriminator activations on target vs fake,
/// under shared (style, content) conditions.
pub fn loss_feature_matching<S: Scalar>(
    cfg: &ModelConfig,
    store: &ParamStore<S>,
    target_img: &TextImage,
    fake_img: &TextImage,
    cond_style: &TextImage,
    cond_content_img: &TextImage,
) -> LossEval<S> {
    loss_feature_matching_pinned(
        cfg, store, target_img, fake_img, cond_style, cond_content_img,
        Vec::new(),
    )
}

#[allow(clippy::too_many_arguments)]
pub fn loss_feature_matching_pinned<S: Scalar>(
    cfg: &ModelConfig,
    store: &ParamStore<S>,
    target_img: &TextImage,
    fake_img: &TextImage,
    cond_style: &TextImage,
    cond_content_img: &TextImage,
    pins: Vec<Tensor<S>>,
) -> LossEval<S> {
    let mut tape = Tape::new();
    tape.set_detach_pins(pins);
    let (nets, ids) = bind_all(&mut tape, store, cfg);
    let xt = image_batch_const(&mut tape, std::slice::from_ref(target_img));
    let xf = image_batch_const(&mut tape, std::slice::from_ref(fake_img));
    let xs = image_batch_const(&mut tape, std::slice::from_ref(cond_style));
    let xc = image_batch_const(&mut tape, std::slice::from_ref(cond_content_img));
    let (_, ct) = nets.enc.encode(&mut tape, xc);
    let cond = tape.detach(ct);
    let tgt_out = nets.disc.forward(&mut tape, xt, xs, cond);
    let fake_out = nets.disc.forward(&mut tape, xf, xs, cond);
    let loss = feature_matching(&mut tape, &tgt_out.feats, &fake_out.feats);
    LossEval {
        tape,
        loss,
        ids,
    }
}

/// Text-consistency loss on a generated image (off by default at training
/// time).
pub fn loss_con_text<S: Scalar>(
    cfg: &ModelConfig,
    store: &ParamStore<S>,
    generated_img: &TextImage,
    label: &[usize],
) -> LossEval<S> {
    loss_text(cfg, store, generated_img, label)
}

/// Every component and both totals on one tape, current parameters for all
/// passes. Backward from `total_eg_r_id` or `total_d_id` reproduces the
/// respective side's gradients.
pub struct TotalEval<S: Scalar> {
    pub tape: Tape<S>,
    pub breakdown: LossBreakdown,
    pub total_eg_r_id: VarId,
    pub total_d_id: VarId,
    pub text_only_id: Option<VarId>,
    pub ids: BTreeMap<String, VarId>,
}

pub fn total_losses<S: Scalar>(
    cfg: &ModelConfig,
    store: &ParamStore<S>,
    batch: &Batch,
    opts: &StepOptions,
) -> TotalEval<S> {
    total_losses_pinned(cfg, store, batch, opts, Vec::new())
}

pub fn total_losses_pinned<S: Scalar>(
    cfg: &ModelConfig,
    store: &ParamStore<S>,
    batch: &Batch,
    opts: &StepOptions,
    pins: Vec<Tensor<S>>,
) -> TotalEval<S> {
    let mut tape = Tape::new();
    tape.set_detach_pins(pins);
    let (nets, ids) = bind_all(&mut tape, store, cfg);
    let fwd = build_shared(&mut tape, &nets, batch, opts);
    let (adv_synth_d, adv_real_d) = build_d_losses(&mut tape, &nets.disc, &fwd);
    let total_d = tape.weighted_sum_scalars(&[(adv_synth_d, opts.lambda), (adv_real_d, opts.lambda)]);
    let egr = build_egr_losses(&mut tape, &nets, &nets.disc, &fwd, batch, opts);
    let val = |t: &Tape<S>, v: VarId| t.val(v).item().to_f64();
    let mut breakdown = LossBreakdown {
        gen_synth: val(&tape, egr.gen_synth),
        text_synth: egr.text_synth.map(|v| val(&tape, v)).unwrap_or(0.0),
        per_synth: val(&tape, egr.per_synth),
        gen_real: val(&tape, egr.gen_real),
        per_real: val(&tape, egr.per_real),
        adv_synth_d: val(&tape, adv_synth_d),
        adv_synth_g: val(&tape, egr.adv_synth_g),
        adv_real_d: val(&tape, adv_real_d),
        adv_real_g: val(&tape, egr.adv_real_g),
        con_text: egr.con_text.map(|v| val(&tape, v)),
        total_eg_r: 0.0,
        total_d: 0.0,
    };
    // Reported totals are the documented weighted sums of the reported
    // components (the tape totals drive the gradients).
    breakdown.total_eg_r = breakdown.expected_total_eg_r(opts.lambda);
    breakdown.total_d = breakdown.expected_total_d(opts.lambda);
    TotalEval {
        tape,
        breakdown,
        total_eg_r_id: egr.total,
        total_d_id: total_d,
        text_only_id: egr.text_synth,
        ids,
    }
}

/// Names of parameters exclusive to the content branch: everything after
/// the trunk/content split (the recurrent layers and the content
/// projection).
pub fn content_branch_param_names(store_defs: &[crate::model::params::ParamDef]) -> Vec<String> {
    store_defs
        .iter()
        .filter(|d| d.name.starts_with("enc.ct."))
        .map(|d| d.name.clone())
        .collect()
}

/// Serialize one training-log line.
pub fn log_line(iter: u64, lr: f64, b: &LossBreakdown) -> String {
    #[derive(Serialize)]
    struct Line<'a> {
        iter: u64,
        lr: f64,
        #[serde(flatten)]
        losses: &'a LossBreakdown,
    }
    serde_json::to_string(&Line {
        iter,
        lr,
        losses: b,
    })
    .expect("loss line serializes")
}

/// Helper for building label matrices used in tests.
pub fn encode_labels(codec: &CharsetCodec, texts: &[&str]) -> Vec<Vec<usize>> {
    texts
        .iter()
        .map(|t| codec.encode(t).expect("valid test text"))
        .collect()
}
