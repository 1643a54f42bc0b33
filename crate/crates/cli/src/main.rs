//! `stedit` — scene-text editing pipeline: dataset synthesis, training,
//! single-image editing, evaluation and diagnostics.
//!
//! Exit codes: 0 success, 2 config/usage error, 3 IO error, 4 checkpoint
//! mismatch, 5 numerical failure.

mod config;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use config::{parse_font_ids, RunConfig};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use stedit_core::error::{DataError, EvalError, ModelError, RenderError, TrainError};
use stedit_core::eval::{
    content_by_style_purity, decomposition_purity, frechet_distance, recognition_accuracy,
    render_grid, style_invariance, ContentVariant, EvalReport, InvarianceReport,
};
use stedit_core::image::TextImage;
use stedit_core::model::checkpoint::{self, CheckpointMeta};
use stedit_core::model::config::ModelConfig;
use stedit_core::model::Model;
use stedit_core::synth::font::FontRegistry;
use stedit_core::synth::{generate_dataset, Manifest, SamplerProfile};
use stedit_core::trainer::Trainer;
use stedit_tensor::Rng;

const KEY_HELP: &str = "Config file keys (flat key=value lines, also usable with --set):
  corpus fonts charset out_dir
  synth_pairs real_pairs synth_fonts real_fonts synth_bg real_bg
  synth_manifest real_manifest grid_styles grid_contents eval_max
  total_iters batch_synth batch_real base_lr lr_min cycle_iters
  adam_beta1 adam_beta2 adam_eps lambda seed checkpoint_every
  adv_mode con_text_enabled objective drop_recognition no_stop_gradient
  pair_style cutout_width cutout_fill";

#[derive(Parser)]
#[command(name = "stedit", about = "Scene-text editing toolkit", after_help = KEY_HELP)]
struct Cli {
    /// Flat key=value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one config key (repeatable), e.g. --set total_iters=100.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Root seed for every random decision.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Render the paired synthetic split and the pseudo-real split.
    Synthgen(SynthgenArgs),
    /// Train (or resume) on generated manifests.
    Train(TrainArgs),
    /// Replace the text in one image.
    Edit(EditArgs),
    /// Evaluate a checkpoint on a manifest: edit accuracy + feature distance.
    Eval(EvalArgs),
    /// Feature-decomposition and invariance diagnostics on a fresh grid.
    Diagnose(DiagnoseArgs),
}

#[derive(Args)]
struct SynthgenArgs {
    /// Output root (default: out_dir from config).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    synth_manifest: Option<PathBuf>,
    #[arg(long)]
    real_manifest: Option<PathBuf>,
    /// Resume from a checkpoint directory.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Args)]
struct EditArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    text: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Frozen recognizer checkpoint; defaults to the model's own text head.
    #[arg(long)]
    recognizer: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    grid_styles: Option<usize>,
    #[arg(long)]
    grid_contents: Option<usize>,
}

fn classify(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(m) = cause.downcast_ref::<ModelError>() {
            return match m {
                ModelError::CheckpointMismatch { .. } => 4,
                ModelError::Io(_) | ModelError::Meta(_) | ModelError::CheckpointFormat(_) => 3,
                ModelError::ShapeMismatch { .. } => 2,
            };
        }
        if let Some(t) = cause.downcast_ref::<TrainError>() {
            return match t {
                TrainError::NonFiniteGradient { .. } | TrainError::NonFiniteLoss { .. } => 5,
                TrainError::Io(_) => 3,
                TrainError::Model(ModelError::CheckpointMismatch { .. }) => 4,
                TrainError::Model(_) | TrainError::Data(_) | TrainError::Render(_) => 3,
            };
        }
        if let Some(v) = cause.downcast_ref::<EvalError>() {
            return match v {
                EvalError::DegenerateCovariance => 5,
                EvalError::Io(_) | EvalError::Model(_) | EvalError::Render(_) => 3,
                _ => 2,
            };
        }
        if let Some(r) = cause.downcast_ref::<RenderError>() {
            return match r {
                RenderError::Io(_) | RenderError::Manifest(_) => 3,
                _ => 2,
            };
        }
        if let Some(d) = cause.downcast_ref::<DataError>() {
            return match d {
                DataError::Io(_) | DataError::Image(_) => 3,
                _ => 2,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 3;
        }
    }
    2
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.load_file(path)?;
    }
    for s in &cli.sets {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| anyhow!("--set expects KEY=VALUE, got {s:?}"))?;
        cfg.apply(k.trim(), v.trim())?;
    }
    if let Some(seed) = cli.seed {
        cfg.train.seed = seed;
    }
    Ok(cfg)
}

fn model_config_for(codec: &stedit_core::data::CharsetCodec) -> ModelConfig {
    ModelConfig {
        charset_size: codec.vocab_size(),
        ..ModelConfig::default()
    }
}

fn read_corpus(cfg: &RunConfig) -> Result<Vec<String>> {
    if !cfg.corpus.exists() {
        bail!("corpus file not found: {}", cfg.corpus.display());
    }
    let codec = cfg.codec()?;
    let text = std::fs::read_to_string(&cfg.corpus)
        .with_context(|| format!("reading corpus {}", cfg.corpus.display()))?;
    let words: Vec<String> = text
        .split_whitespace()
        .filter(|w| {
            let n = w.chars().count();
            n >= 1 && n <= 24 && w.chars().all(|c| codec.contains(c))
        })
        .map(|w| w.to_string())
        .collect();
    if words.is_empty() {
        bail!("corpus {} contains no usable words", cfg.corpus.display());
    }
    Ok(words)
}

fn profile(registry: &FontRegistry, spec: &str, bg: [f64; 3]) -> Result<SamplerProfile> {
    let ids = parse_font_ids(spec)?;
    let known = registry.ids();
    for id in &ids {
        if !known.contains(id) {
            bail!("font id {id} not in registry (have {known:?})");
        }
    }
    Ok(SamplerProfile {
        font_ids: ids,
        bg_weights: bg,
    })
}

fn cmd_synthgen(cfg: &RunConfig, args: &SynthgenArgs) -> Result<()> {
    let out = args.out.clone().unwrap_or_else(|| cfg.out_dir.clone());
    let words = read_corpus(cfg)?;
    let registry = FontRegistry::load(&cfg.fonts)?;
    let synth_profile = profile(&registry, &cfg.synth_fonts, cfg.synth_bg)?;
    let real_profile = profile(&registry, &cfg.real_fonts, cfg.real_bg)?;
    let seed = cfg.train.seed;
    let synth_seed = Rng::stream_tagged(seed, "split", &[0]).next_u64();
    let real_seed = Rng::stream_tagged(seed, "split", &[1]).next_u64();
    let synth_dir = out.join("synth");
    let real_dir = out.join("real");
    generate_dataset(&words, cfg.synth_pairs, &synth_dir, synth_seed, &synth_profile, &registry)?;
    generate_dataset(&words, cfg.real_pairs, &real_dir, real_seed, &real_profile, &registry)?;
    println!("{}", synth_dir.join("manifest.json").display());
    println!("{}", real_dir.join("manifest.json").display());
    Ok(())
}

fn cmd_train(cfg: &RunConfig, args: &TrainArgs) -> Result<()> {
    let out = args.out.clone().unwrap_or_else(|| cfg.out_dir.join("train"));
    let synth = args
        .synth_manifest
        .clone()
        .or(cfg.synth_manifest.clone())
        .unwrap_or_else(|| cfg.out_dir.join("synth/manifest.json"));
    let real = args
        .real_manifest
        .clone()
        .or(cfg.real_manifest.clone())
        .unwrap_or_else(|| cfg.out_dir.join("real/manifest.json"));
    let codec = cfg.codec()?;
    let mcfg = model_config_for(&codec);
    let mut trainer = Trainer::new(
        cfg.train.clone(),
        mcfg,
        codec,
        &synth,
        &real,
        Some(cfg.fonts.as_path()),
    )?;
    if let Some(resume) = &args.resume {
        trainer.resume_from(resume)?;
    }
    let summary = trainer.train(&out)?;
    println!(
        "trained {} iters; final checkpoint {}; params {}; mean total first100 {:.4} last100 {:.4}",
        summary.iterations,
        summary.final_checkpoint.display(),
        summary.final_digest,
        summary.mean_total_first_100,
        summary.mean_total_last_100,
    );
    Ok(())
}

fn load_model(cfg: &RunConfig, ckpt: &Path) -> Result<(Model, CheckpointMeta)> {
    let codec = cfg.codec()?;
    let mcfg = model_config_for(&codec);
    let expected = mcfg.config_hash(codec.charset());
    let meta_text = std::fs::read_to_string(ckpt.join("meta.json"))
        .map_err(|e| anyhow!(ModelError::Io(e)))
        .with_context(|| format!("checkpoint {}", ckpt.display()))?;
    let meta: CheckpointMeta =
        serde_json::from_str(&meta_text).map_err(|e| anyhow!(ModelError::Meta(e)))?;
    if meta.config_hash != expected {
        return Err(anyhow!(ModelError::CheckpointMismatch {
            expected,
            found: meta.config_hash,
        }));
    }
    let mut model = Model::new(mcfg, codec, meta.seed);
    checkpoint::load(ckpt, &mut model.store).map_err(ModelError::Io)?;
    Ok((model, meta))
}

fn cmd_edit(cfg: &RunConfig, args: &EditArgs) -> Result<()> {
    let (model, _) = load_model(cfg, &args.checkpoint)?;
    for c in args.text.chars() {
        if !model.codec.contains(c) {
            bail!("target text contains out-of-charset character {c:?}");
        }
    }
    let input = TextImage::load_png(&args.input)?;
    let registry = FontRegistry::load(&cfg.fonts)?;
    let edited = model.edit(&input, &args.text, &registry)?;
    edited.save_png(&args.out)?;
    let read = model.read_texts(&[edited]);
    println!("{} (reads back as {:?})", args.out.display(), read[0]);
    Ok(())
}

/// The shared report body: purity on a fresh grid plus invariance probes.
fn grid_diagnostics(
    cfg: &RunConfig,
    model: &Model,
    registry: &FontRegistry,
    n_styles: usize,
    n_contents: usize,
) -> Result<(f64, f64, InvarianceReport, Vec<TextImage>, Vec<String>)> {
    let words = read_corpus(cfg)?;
    let mut texts: Vec<String> = Vec::new();
    for w in &words {
        if w.chars().count() <= 8 && !texts.contains(w) {
            texts.push(w.clone());
        }
        if texts.len() == n_contents {
            break;
        }
    }
    if texts.len() < n_contents {
        bail!("corpus provides only {} usable grid texts", texts.len());
    }
    let seed = cfg.train.seed;
    let style_seeds: Vec<u64> = (0..n_styles)
        .map(|i| Rng::stream_tagged(seed, "grid-style", &[i as u64]).next_u64())
        .collect();
    let grid = render_grid(&texts, &style_seeds, registry)?;
    let (content_purity, style_purity) = decomposition_purity(model, &grid)?;
    let cross = content_by_style_purity(model, &grid);
    eprintln!(
        "content features cluster by content {content_purity:.3} vs by style {cross:.3}"
    );

    // Invariance probes: >=5 ink-color variants and >=5 font variants.
    let probe_style = grid.images[0].clone();
    let probe_text = texts[1].clone();
    let colors: Vec<ContentVariant> = [
        [0.0, 0.0, 0.0],
        [0.8, 0.1, 0.1],
        [0.1, 0.5, 0.9],
        [0.1, 0.6, 0.2],
        [0.6, 0.2, 0.7],
    ]
    .iter()
    .map(|&fg| ContentVariant {
        font_id: 0,
        fg_color: fg,
    })
    .collect();
    let fonts: Vec<ContentVariant> = registry
        .ids()
        .into_iter()
        .take(5)
        .map(|font_id| ContentVariant {
            font_id,
            fg_color: [0.0, 0.0, 0.0],
        })
        .collect();
    let color_rep = style_invariance(model, &probe_style, &probe_text, &colors, registry)?;
    let font_rep = style_invariance(model, &probe_style, &probe_text, &fonts, registry)?;
    eprintln!(
        "invariance to content color: psnr {} ssim {:.4} var {:.2e}",
        fmt_psnr(color_rep.mean_psnr_db),
        color_rep.mean_ssim,
        color_rep.mean_pixel_variance
    );
    eprintln!(
        "invariance to content font:  psnr {} ssim {:.4} var {:.2e}",
        fmt_psnr(font_rep.mean_psnr_db),
        font_rep.mean_ssim,
        font_rep.mean_pixel_variance
    );
    let mut all = colors;
    all.extend(fonts);
    let merged = style_invariance(model, &probe_style, &probe_text, &all, registry)?;

    // Edit-accuracy probe images: the first-content column of the grid.
    let styles: Vec<TextImage> = (0..n_styles)
        .map(|si| grid.images[si * n_contents].clone())
        .collect();
    let targets: Vec<String> = (0..n_styles)
        .map(|si| texts[(si + 1) % n_contents].clone())
        .collect();
    Ok((content_purity, style_purity, merged, styles, targets))
}

fn fmt_psnr(v: f64) -> String {
    if v.is_infinite() {
        "Inf".to_string()
    } else {
        format!("{v:.2}")
    }
}

fn ffd_edits_vs_styles(model: &Model, edits: &[TextImage], styles: &[TextImage]) -> Result<f64> {
    let (edit_feats, _) = model.pooled_features(edits);
    let (style_feats, _) = model.pooled_features(styles);
    Ok(frechet_distance(&edit_feats, &style_feats)?)
}

fn cmd_eval(cfg: &RunConfig, args: &EvalArgs) -> Result<()> {
    let (model, _) = load_model(cfg, &args.checkpoint)?;
    let oracle = match &args.recognizer {
        Some(p) => Some(load_model(cfg, p)?.0),
        None => None,
    };
    let recognizer = oracle.as_ref().unwrap_or(&model);
    let registry = FontRegistry::load(&cfg.fonts)?;
    let (manifest, base) = Manifest::load(&args.manifest)?;
    if manifest.entries.is_empty() {
        bail!("manifest {} is empty", args.manifest.display());
    }
    let n = manifest.entries.len().min(cfg.eval_max);
    let styles: Vec<TextImage> = manifest.entries[..n]
        .iter()
        .map(|e| TextImage::load_png(&base.join(&e.path_a)))
        .collect::<Result<_, _>>()?;
    let targets: Vec<String> = (0..n)
        .map(|i| manifest.entries[(i + 3) % n].text_b.clone())
        .collect();
    let edits = model.edit_batch(&styles, &targets, &registry)?;
    let pairs: Vec<(TextImage, String)> = edits
        .iter()
        .cloned()
        .zip(targets.iter().cloned())
        .collect();
    let accuracy = recognition_accuracy(recognizer, &pairs)?;
    let ffd = ffd_edits_vs_styles(&model, &edits, &styles)?;
    let (content_purity, style_purity, invariance, _, _) = grid_diagnostics(
        cfg,
        &model,
        &registry,
        cfg.grid_styles.max(4),
        cfg.grid_contents.max(4),
    )?;
    let report = EvalReport {
        recognition_accuracy: accuracy,
        frechet_distance: ffd,
        content_purity,
        style_purity,
        invariance,
    };
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| cfg.out_dir.join("eval_report.json"));
    report.save(&out)?;
    println!(
        "accuracy {:.4}  ffd {:.4}  content_purity {:.3}  style_purity {:.3}  report {}",
        accuracy,
        ffd,
        content_purity,
        style_purity,
        out.display()
    );
    Ok(())
}

fn cmd_diagnose(cfg: &RunConfig, args: &DiagnoseArgs) -> Result<()> {
    let n_styles = args.grid_styles.unwrap_or(cfg.grid_styles);
    let n_contents = args.grid_contents.unwrap_or(cfg.grid_contents);
    if n_styles < 4 || n_contents < 4 {
        bail!("grid must be at least 4x4, got {n_styles}x{n_contents}");
    }
    let (model, _) = load_model(cfg, &args.checkpoint)?;
    let registry = FontRegistry::load(&cfg.fonts)?;
    let (content_purity, style_purity, invariance, styles, targets) =
        grid_diagnostics(cfg, &model, &registry, n_styles, n_contents)?;
    let edits = model.edit_batch(&styles, &targets, &registry)?;
    let pairs: Vec<(TextImage, String)> = edits
        .iter()
        .cloned()
        .zip(targets.iter().cloned())
        .collect();
    let accuracy = recognition_accuracy(&model, &pairs)?;
    let ffd = ffd_edits_vs_styles(&model, &edits, &styles)?;
    let report = EvalReport {
        recognition_accuracy: accuracy,
        frechet_distance: ffd,
        content_purity,
        style_purity,
        invariance,
    };
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| cfg.out_dir.join("diagnose_report.json"));
    report.save(&out)?;
    println!(
        "content_purity {:.3}  style_purity {:.3}  accuracy {:.4}  ffd {:.4}  report {}",
        content_purity,
        style_purity,
        accuracy,
        ffd,
        out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let result = match &cli.cmd {
        Cmd::Synthgen(a) => cmd_synthgen(&cfg, a),
        Cmd::Train(a) => cmd_train(&cfg, a),
        Cmd::Edit(a) => cmd_edit(&cfg, a),
        Cmd::Eval(a) => cmd_eval(&cfg, a),
        Cmd::Diagnose(a) => cmd_diagnose(&cfg, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = classify(&e);
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
