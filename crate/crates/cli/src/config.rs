//! Flat key=value run configuration. Precedence: command-line flags >
//! --set overrides > config file > built-in defaults.

use anyhow::{anyhow, bail, Result};
use std::path::{Path, PathBuf};
use stedit_core::data::{CharsetCodec, CutoutFill, PairStyleMode};
use stedit_core::losses::AdvMode;
use stedit_core::trainer::{Objective, TrainConfig};

#[derive(Clone, Debug)]
pub struct RunConfig {
    // Assets and IO.
    pub corpus: PathBuf,
    pub fonts: PathBuf,
    pub charset: Option<PathBuf>,
    pub out_dir: PathBuf,
    // Dataset generation.
    pub synth_pairs: usize,
    pub real_pairs: usize,
    pub synth_fonts: String,
    pub real_fonts: String,
    pub synth_bg: [f64; 3],
    pub real_bg: [f64; 3],
    // Training inputs.
    pub synth_manifest: Option<PathBuf>,
    pub real_manifest: Option<PathBuf>,
    // Diagnostics.
    pub grid_styles: usize,
    pub grid_contents: usize,
    pub eval_max: usize,
    // Optimization.
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            corpus: "assets/corpus/words.txt".into(),
            fonts: "assets/fonts/registry.json".into(),
            charset: None,
            out_dir: "runs/out".into(),
            synth_pairs: 200,
            real_pairs: 50,
            synth_fonts: "0-7".into(),
            real_fonts: "8-11".into(),
            synth_bg: [0.5, 0.3, 0.2],
            real_bg: [0.2, 0.3, 0.5],
            synth_manifest: None,
            real_manifest: None,
            grid_styles: 10,
            grid_contents: 10,
            eval_max: 64,
            train: TrainConfig::default(),
        }
    }
}

pub const KNOWN_KEYS: &[&str] = &[
    "corpus",
    "fonts",
    "charset",
    "out_dir",
    "synth_pairs",
    "real_pairs",
    "synth_fonts",
    "real_fonts",
    "synth_bg",
    "real_bg",
    "synth_manifest",
    "real_manifest",
    "grid_styles",
    "grid_contents",
    "eval_max",
    "total_iters",
    "batch_synth",
    "batch_real",
    "base_lr",
    "lr_min",
    "cycle_iters",
    "adam_beta1",
    "adam_beta2",
    "adam_eps",
    "lambda",
    "seed",
    "checkpoint_every",
    "adv_mode",
    "con_text_enabled",
    "objective",
    "drop_recognition",
    "no_stop_gradient",
    "pair_style",
    "cutout_width",
    "cutout_fill",
];

fn parse_bool(v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        other => bail!("expected boolean, got {other:?}"),
    }
}

fn parse_triple(v: &str) -> Result<[f64; 3]> {
    let parts: Vec<f64> = v
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| anyhow!("expected three comma-separated weights: {e}"))?;
    if parts.len() != 3 {
        bail!("expected three comma-separated weights, got {}", parts.len());
    }
    Ok([parts[0], parts[1], parts[2]])
}

/// "0-7" or "0,3,5" into explicit ids.
pub fn parse_font_ids(v: &str) -> Result<Vec<u32>> {
    if let Some((a, b)) = v.split_once('-') {
        let lo: u32 = a.trim().parse()?;
        let hi: u32 = b.trim().parse()?;
        if hi < lo {
            bail!("font range {v:?} is reversed");
        }
        return Ok((lo..=hi).collect());
    }
    v.split(',')
        .map(|p| p.trim().parse::<u32>().map_err(|e| anyhow!("{e}")))
        .collect()
}

impl RunConfig {
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        if !KNOWN_KEYS.contains(&key) {
            bail!("unknown config key {key:?}");
        }
        let t = &mut self.train;
        match key {
            "corpus" => self.corpus = value.into(),
            "fonts" => self.fonts = value.into(),
            "charset" => self.charset = Some(value.into()),
            "out_dir" => self.out_dir = value.into(),
            "synth_pairs" => self.synth_pairs = value.parse()?,
            "real_pairs" => self.real_pairs = value.parse()?,
            "synth_fonts" => self.synth_fonts = value.into(),
            "real_fonts" => self.real_fonts = value.into(),
            "synth_bg" => self.synth_bg = parse_triple(value)?,
            "real_bg" => self.real_bg = parse_triple(value)?,
            "synth_manifest" => self.synth_manifest = Some(value.into()),
            "real_manifest" => self.real_manifest = Some(value.into()),
            "grid_styles" => self.grid_styles = value.parse()?,
            "grid_contents" => self.grid_contents = value.parse()?,
            "eval_max" => self.eval_max = value.parse()?,
            "total_iters" => t.total_iters = value.parse()?,
            "batch_synth" => t.batch_synth = value.parse()?,
            "batch_real" => t.batch_real = value.parse()?,
            "base_lr" => t.base_lr = value.parse()?,
            "lr_min" => t.lr_min = value.parse()?,
            "cycle_iters" => t.cycle_iters = value.parse()?,
            "adam_beta1" => t.adam_beta1 = value.parse()?,
            "adam_beta2" => t.adam_beta2 = value.parse()?,
            "adam_eps" => t.adam_eps = value.parse()?,
            "lambda" => t.lambda = value.parse()?,
            "seed" => t.seed = value.parse()?,
            "checkpoint_every" => t.checkpoint_every = value.parse()?,
            "adv_mode" => {
                t.adv_mode = match value {
                    "minimax" => AdvMode::Minimax,
                    "nonsaturating" => AdvMode::Nonsaturating,
                    other => bail!("adv_mode must be minimax|nonsaturating, got {other:?}"),
                }
            }
            "con_text_enabled" => t.con_text_enabled = parse_bool(value)?,
            "objective" => {
                t.objective = match value {
                    "full" => Objective::Full,
                    "recognizer_only" => Objective::RecognizerOnly,
                    other => bail!("objective must be full|recognizer_only, got {other:?}"),
                }
            }
            "drop_recognition" => t.drop_recognition = parse_bool(value)?,
            "no_stop_gradient" => t.no_stop_gradient = parse_bool(value)?,
            "pair_style" => {
                t.pair_style = match value {
                    "same" => PairStyleMode::Same,
                    "different" => PairStyleMode::Different,
                    other => bail!("pair_style must be same|different, got {other:?}"),
                }
            }
            "cutout_width" => t.cutout_width = value.parse()?,
            "cutout_fill" => {
                t.cutout_fill = match value {
                    "zero" => CutoutFill::Zero,
                    "dataset_mean" => CutoutFill::DatasetMean,
                    other => bail!("cutout_fill must be zero|dataset_mean, got {other:?}"),
                }
            }
            _ => unreachable!(),
        }
        Ok(())
    }

    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow!("cannot read config {}: {e}", path.display()))?;
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{}:{}: expected key=value", path.display(), ln + 1))?;
            self.apply(k.trim(), v.trim())
                .map_err(|e| anyhow!("{}:{}: {e}", path.display(), ln + 1))?;
        }
        Ok(())
    }

    pub fn codec(&self) -> Result<CharsetCodec> {
        Ok(match &self.charset {
            Some(p) => CharsetCodec::from_file(p, 25)
                .map_err(|e| anyhow!("charset {}: {e}", p.display()))?,
            None => CharsetCodec::default_alphanumeric(),
        })
    }
}
