//! Alternating optimization: one discriminator update on its own objective,
//! then one encoder/generator/recognizer update, per iteration, with
//! checkpointing and a JSON-lines loss log.

pub mod adam;
pub mod schedule;

use crate::data::batch::{Batch, BatchSampler, PairStyleMode};
use crate::data::codec::CharsetCodec;
use crate::data::cutout::{CutoutFill, CutoutSpec};
use crate::error::TrainError;
use crate::losses::{
    build_d_losses, build_egr_losses, build_shared, log_line, AdvMode, LossBreakdown, StepOptions,
};
use crate::model::checkpoint::{self, CheckpointMeta};
use crate::model::config::ModelConfig;
use crate::model::params::{Binder, Network, ParamStore, Trainable};
use crate::model::bind_nets;
use crate::synth::font::FontRegistry;
use crate::synth::SamplerProfile;
use adam::{adam_step, AdamGroups, AdamHyper, AdamState};
use schedule::{lr_at, LrSchedule};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use stedit_tensor::{Tape, Tensor, VarId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// The full multi-branch objective.
    Full,
    /// Encoder + text head only, on labeled synthetic images (used to
    /// train the frozen evaluation recognizer).
    RecognizerOnly,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    pub total_iters: u64,
    pub batch_synth: usize,
    pub batch_real: usize,
    pub base_lr: f64,
    pub lr_min: f64,
    /// 0 means "total_iters / 10".
    pub cycle_iters: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub lambda: f64,
    pub seed: u64,
    pub checkpoint_every: u64,
    pub adv_mode: AdvMode,
    pub con_text_enabled: bool,
    pub objective: Objective,
    pub drop_recognition: bool,
    pub no_stop_gradient: bool,
    pub pair_style: PairStyleMode,
    pub cutout_width: usize,
    pub cutout_fill: CutoutFill,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            total_iters: 5_000,
            batch_synth: 9,
            batch_real: 3,
            base_lr: 1e-4,
            lr_min: 1e-5,
            cycle_iters: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            lambda: 0.1,
            seed: 0,
            checkpoint_every: 500,
            adv_mode: AdvMode::Nonsaturating,
            con_text_enabled: false,
            objective: Objective::Full,
            drop_recognition: false,
            no_stop_gradient: false,
            pair_style: PairStyleMode::Same,
            cutout_width: 42,
            cutout_fill: CutoutFill::Zero,
        }
    }
}

impl TrainConfig {
    pub fn schedule(&self) -> LrSchedule {
        LrSchedule {
            lr_min: self.lr_min,
            lr_max: self.base_lr,
            cycle_iters: if self.cycle_iters == 0 {
                (self.total_iters / 10).max(1)
            } else {
                self.cycle_iters
            },
        }
    }

    pub fn hyper(&self) -> AdamHyper {
        AdamHyper {
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }

    pub fn step_options(&self) -> StepOptions {
        StepOptions {
            lambda: self.lambda,
            adv_mode: self.adv_mode,
            stop_gradient: !self.no_stop_gradient,
            con_text: self.con_text_enabled,
            drop_recognition: self.drop_recognition,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub iterations: u64,
    pub final_digest: String,
    pub final_checkpoint: PathBuf,
    pub log_path: PathBuf,
    pub mean_total_first_100: f64,
    pub mean_total_last_100: f64,
}

pub struct Trainer {
    pub cfg: TrainConfig,
    pub mcfg: ModelConfig,
    pub codec: CharsetCodec,
    pub store: ParamStore<f32>,
    pub opt: AdamGroups,
    sampler: BatchSampler,
    start_iter: u64,
}

impl Trainer {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        cfg: TrainConfig,
        mcfg: ModelConfig,
        codec: CharsetCodec,
        synth_manifest: &Path,
        real_manifest: &Path,
        registry_path: Option<&Path>,
    ) -> Result<Self, TrainError> {
        let restyle = if cfg.pair_style == PairStyleMode::Different {
            let path = registry_path.ok_or_else(|| {
                TrainError::Io(std::io::Error::other(
                    "different-style pairing needs a font registry path",
                ))
            })?;
            let reg = FontRegistry::load(path)?;
            let profile = SamplerProfile::uniform(reg.ids());
            Some((reg, profile))
        } else {
            None
        };
        let sampler = BatchSampler::new(
            synth_manifest,
            real_manifest,
            cfg.batch_synth,
            cfg.batch_real,
            codec.clone(),
            CutoutSpec {
                width_px: cfg.cutout_width,
                fill: cfg.cutout_fill,
            },
            cfg.seed,
            cfg.pair_style,
            restyle,
        )?;
        let store = crate::model::new_store::<f32>(&mcfg, cfg.seed);
        let opt = AdamGroups::default();
        Ok(Self {
            cfg,
            mcfg,
            codec,
            store,
            opt,
            sampler,
            start_iter: 0,
        })
    }

    /// Restore parameters, optimizer state and the iteration cursor from a
    /// checkpoint produced by a run with the same config and seed.
    pub fn resume_from(&mut self, dir: &Path) -> Result<(), TrainError> {
        let (meta, opt) = checkpoint::load(dir, &mut self.store)?;
        if meta.seed != self.cfg.seed {
            return Err(TrainError::Io(std::io::Error::other(format!(
                "checkpoint seed {} differs from configured seed {}",
                meta.seed, self.cfg.seed
            ))));
        }
        let expect = self.mcfg.config_hash(self.codec.charset());
        if meta.config_hash != expect {
            return Err(TrainError::Model(
                crate::error::ModelError::CheckpointMismatch {
                    expected: expect,
                    found: meta.config_hash,
                },
            ));
        }
        self.opt = opt.unwrap_or_default();
        self.start_iter = meta.iteration;
        Ok(())
    }

    fn meta(&self, iteration: u64) -> CheckpointMeta {
        CheckpointMeta {
            config_hash: self.mcfg.config_hash(self.codec.charset()),
            iteration,
            seed: self.cfg.seed,
            rng_state_digest: checkpoint::rng_digest(self.cfg.seed, iteration),
            model_config: self.mcfg.clone(),
            charset: self.codec.charset().iter().collect(),
        }
    }

    fn apply_updates(
        &mut self,
        names: &[String],
        ids: &BTreeMap<String, VarId>,
        grads: &[Option<Tensor<f32>>],
        group_d: bool,
        lr: f64,
        iter: u64,
    ) -> Result<(), TrainError> {
        let hyper = self.cfg.hyper();
        let t = if group_d {
            self.opt.step_d += 1;
            self.opt.step_d
        } else {
            self.opt.step_egr += 1;
            self.opt.step_egr
        };
        for name in names {
            let leaf = ids[name];
            let idx = self.store.idx(name);
            let n = self.store.values[idx].numel();
            let zero;
            let grad: &[f32] = match grads[leaf.0].as_ref() {
                Some(g) => g.data(),
                None => {
                    zero = vec![0f32; n];
                    &zero
                }
            };
            let state = self
                .opt
                .states
                .entry(name.clone())
                .or_insert_with(|| AdamState::zeros(n));
            adam_step(
                self.store.values[idx].data_mut(),
                grad,
                state,
                t,
                lr,
                &hyper,
            )
            .map_err(|_| TrainError::NonFiniteGradient {
                tensor: name.clone(),
                iter,
            })?;
        }
        Ok(())
    }

    /// One full-objective step: discriminator update first (frozen
    /// encoder/generator/recognizer), then the joint update against the
    /// refreshed discriminator.
    pub fn train_step(&mut self, iter: u64, batch: &Batch) -> Result<LossBreakdown, TrainError> {
        let lr = lr_at(iter, &self.cfg.schedule());
        let opts = self.cfg.step_options();

        let mut tape: Tape<f32> = Tape::new();
        let (nets, ids) = bind_nets(&mut tape, &self.store, &self.mcfg, Trainable::ALL);
        let fwd = build_shared(&mut tape, &nets, batch, &opts);
        let (adv_synth_d, adv_real_d) =
            build_d_losses(&mut tape, &nets.disc, &fwd);
        let total_d = tape.weighted_sum_scalars(&[
            (adv_synth_d, opts.lambda),
            (adv_real_d, opts.lambda),
        ]);
        let adv_synth_d_v = tape.val(adv_synth_d).item() as f64;
        let adv_real_d_v = tape.val(adv_real_d).item() as f64;
        let total_d_v = tape.val(total_d).item() as f64;
        if !total_d_v.is_finite() {
            return Err(TrainError::NonFiniteLoss {
                iter,
                synth_ids: batch.synth_ids.clone(),
                real_ids: batch.real_ids.clone(),
            });
        }
        let d_grads = tape.backward(total_d);
        let d_names = self.store.names_for(Network::Discriminator);
        self.apply_updates(&d_names, &ids, &d_grads, true, lr, iter)?;
        drop(d_grads);

        // Rebind the refreshed discriminator, frozen, for the joint side.
        let (disc2, _ids2) = {
            let mut b = Binder::new(&mut tape, &self.store, Trainable::NONE);
            let d = crate::model::discriminator::DiscriminatorNet::build(&mut b, &self.mcfg);
            (d, b.ids)
        };
        let egr = build_egr_losses(&mut tape, &nets, &disc2, &fwd, batch, &opts);
        let val = |t: &Tape<f32>, v: VarId| t.val(v).item() as f64;
        let mut breakdown = LossBreakdown {
            gen_synth: val(&tape, egr.gen_synth),
            text_synth: egr.text_synth.map(|v| val(&tape, v)).unwrap_or(0.0),
            per_synth: val(&tape, egr.per_synth),
            gen_real: val(&tape, egr.gen_real),
            per_real: val(&tape, egr.per_real),
            adv_synth_d: adv_synth_d_v,
            adv_synth_g: val(&tape, egr.adv_synth_g),
            adv_real_d: adv_real_d_v,
            adv_real_g: val(&tape, egr.adv_real_g),
            con_text: egr.con_text.map(|v| val(&tape, v)),
            total_eg_r: 0.0,
            total_d: 0.0,
        };
        breakdown.total_eg_r = breakdown.expected_total_eg_r(opts.lambda);
        breakdown.total_d = breakdown.expected_total_d(opts.lambda);
        if !breakdown.all_finite() {
            return Err(TrainError::NonFiniteLoss {
                iter,
                synth_ids: batch.synth_ids.clone(),
                real_ids: batch.real_ids.clone(),
            });
        }
        let egr_grads = tape.backward(egr.total);
        let mut egr_names = self.store.names_for(Network::Encoder);
        egr_names.extend(self.store.names_for(Network::Generator));
        egr_names.extend(self.store.names_for(Network::Recognizer));
        self.apply_updates(&egr_names, &ids, &egr_grads, false, lr, iter)?;
        Ok(breakdown)
    }

    /// Recognizer-pretraining step: encoder + text head on both labeled
    /// synthetic images of each pair.
    fn recognizer_step(&mut self, iter: u64, batch: &Batch) -> Result<LossBreakdown, TrainError> {
        let lr = lr_at(iter, &self.cfg.schedule());
        let mut tape: Tape<f32> = Tape::new();
        let (nets, ids) = bind_nets(
            &mut tape,
            &self.store,
            &self.mcfg,
            Trainable {
                enc: true,
                rec: true,
                gen: false,
                disc: false,
            },
        );
        let mut images = batch.synth_style.clone();
        images.extend(batch.synth_target.iter().cloned());
        let mut labels = batch.synth_labels_source.clone();
        labels.extend(batch.synth_labels_target.iter().cloned());
        let x = crate::losses::image_batch_const(&mut tape, &images);
        let (_, ct) = nets.enc.encode(&mut tape, x);
        let (sum, count) = nets.rec.teacher_ce(&mut tape, ct, &labels);
        let loss = tape.scale(sum, 1.0 / count as f64);
        let loss_v = tape.val(loss).item() as f64;
        if !loss_v.is_finite() {
            return Err(TrainError::NonFiniteLoss {
                iter,
                synth_ids: batch.synth_ids.clone(),
                real_ids: batch.real_ids.clone(),
            });
        }
        let grads = tape.backward(loss);
        let mut names = self.store.names_for(Network::Encoder);
        names.extend(self.store.names_for(Network::Recognizer));
        self.apply_updates(&names, &ids, &grads, false, lr, iter)?;
        Ok(LossBreakdown {
            gen_synth: 0.0,
            text_synth: loss_v,
            per_synth: 0.0,
            gen_real: 0.0,
            per_real: 0.0,
            adv_synth_d: 0.0,
            adv_synth_g: 0.0,
            adv_real_d: 0.0,
            adv_real_g: 0.0,
            con_text: None,
            total_eg_r: loss_v,
            total_d: 0.0,
        })
    }

    fn save_checkpoint(&self, dir: &Path, iteration: u64) -> Result<(), TrainError> {
        checkpoint::save(dir, &self.store, Some(&self.opt), &self.meta(iteration))?;
        Ok(())
    }

    /// Run to `cfg.total_iters`, writing periodic checkpoints and the loss
    /// log under `out_dir`. Returns final digests and loss-trend summary.
    pub fn train(&mut self, out_dir: &Path) -> Result<RunSummary, TrainError> {
        std::fs::create_dir_all(out_dir)?;
        let log_path = out_dir.join("train_log.jsonl");
        let mut log = std::io::BufWriter::new(if self.start_iter > 0 && log_path.exists() {
            std::fs::OpenOptions::new().append(true).open(&log_path)?
        } else {
            std::fs::File::create(&log_path)?
        });
        if self.start_iter == 0 {
            self.save_checkpoint(&out_dir.join("ckpt_000000"), 0)?;
        }
        let mut first100 = Vec::new();
        let mut last100 = std::collections::VecDeque::with_capacity(100);
        let result: Result<(), TrainError> = (|| {
            for iter in self.start_iter..self.cfg.total_iters {
                let batch = self.sampler.make_batch(iter)?;
                let breakdown = match self.cfg.objective {
                    Objective::Full => self.train_step(iter, &batch),
                    Objective::RecognizerOnly => self.recognizer_step(iter, &batch),
                };
                let breakdown = match breakdown {
                    Ok(b) => b,
                    Err(e) => {
                        if let TrainError::NonFiniteLoss {
                            synth_ids,
                            real_ids,
                            iter,
                        } = &e
                        {
                            let dump = serde_json::json!({
                                "iter": iter,
                                "synth_ids": synth_ids,
                                "real_ids": real_ids,
                            });
                            let _ = std::fs::write(
                                out_dir.join("nonfinite_dump.json"),
                                serde_json::to_string_pretty(&dump).unwrap(),
                            );
                        }
                        return Err(e);
                    }
                };
                let lr = lr_at(iter, &self.cfg.schedule());
                writeln!(log, "{}", log_line(iter, lr, &breakdown))?;
                if iter < self.start_iter.max(0) + 100 {
                    first100.push(breakdown.total_eg_r);
                }
                if last100.len() == 100 {
                    last100.pop_front();
                }
                last100.push_back(breakdown.total_eg_r);
                let done = iter + 1;
                if self.cfg.checkpoint_every > 0 && done % self.cfg.checkpoint_every == 0 {
                    self.save_checkpoint(&out_dir.join(format!("ckpt_{done:06}")), done)?;
                }
            }
            Ok(())
        })();
        log.flush()?;
        result?;
        let final_dir = out_dir.join("ckpt_final");
        self.save_checkpoint(&final_dir, self.cfg.total_iters)?;
        let mean = |v: &[f64]| {
            if v.is_empty() {
                0.0
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        };
        let last_vec: Vec<f64> = last100.iter().copied().collect();
        Ok(RunSummary {
            iterations: self.cfg.total_iters,
            final_digest: self.store.digest(),
            final_checkpoint: final_dir,
            log_path,
            mean_total_first_100: mean(&first100),
            mean_total_last_100: mean(&last_vec),
        })
    }
}
