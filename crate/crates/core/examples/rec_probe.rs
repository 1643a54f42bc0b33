// Supervised-only probe: can the encoder + text head memorize N words in
// `iters` iterations at the documented learning-rate schedule?
use std::path::Path;
use stedit_core::data::CharsetCodec;
use stedit_core::image::TextImage;
use stedit_core::model::config::ModelConfig;
use stedit_core::model::Model;
use stedit_core::synth::{font::FontRegistry, generate_dataset, Manifest, SamplerProfile};
use stedit_core::trainer::{Objective, TrainConfig, Trainer};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let iters: u64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(1000);
    let nwords: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(20);
    let wordlen: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(6);
    let reg = FontRegistry::load(Path::new("assets/fonts/registry.json")).unwrap();
    let all = std::fs::read_to_string("assets/corpus/words.txt").unwrap();
    let words: Vec<String> = all
        .split_whitespace()
        .filter(|w| w.len() <= wordlen && w.chars().all(|c| c.is_ascii_alphanumeric()))
        .take(nwords)
        .map(|s| s.to_string())
        .collect();
    println!("{} words, max len {}", words.len(), wordlen);
    let dir = tempfile::tempdir().unwrap();
    let profile = SamplerProfile { font_ids: (0..8).collect(), bg_weights: [0.5, 0.3, 0.2] };
    generate_dataset(&words, 20, &dir.path().join("synth"), 42, &profile, &reg).unwrap();
    generate_dataset(&words, 4, &dir.path().join("real"), 43, &profile, &reg).unwrap();
    let cfg = TrainConfig {
        total_iters: iters,
        objective: Objective::RecognizerOnly,
        batch_synth: 9,
        batch_real: 3,
        seed: 42,
        checkpoint_every: 0,
        ..TrainConfig::default()
    };
    let codec = CharsetCodec::default_alphanumeric();
    let mcfg = ModelConfig::default();
    let mut t = Trainer::new(
        cfg, mcfg.clone(), codec.clone(),
        &dir.path().join("synth/manifest.json"),
        &dir.path().join("real/manifest.json"),
        None,
    ).unwrap();
    let t0 = std::time::Instant::now();
    let summary = t.train(&dir.path().join("run")).unwrap();
    println!("{} iters in {:.1} min, text loss {:.4} -> {:.4}",
        iters, t0.elapsed().as_secs_f64()/60.0,
        summary.mean_total_first_100, summary.mean_total_last_100);
    let model = Model { cfg: mcfg, codec, store: t.store.clone() };
    let (m, base) = Manifest::load(&dir.path().join("synth/manifest.json")).unwrap();
    let mut imgs = Vec::new();
    let mut texts = Vec::new();
    for e in &m.entries {
        imgs.push(TextImage::load_png(&base.join(&e.path_a)).unwrap());
        texts.push(e.text_a.clone());
        imgs.push(TextImage::load_png(&base.join(&e.path_b)).unwrap());
        texts.push(e.text_b.clone());
    }
    let read = model.read_texts(&imgs);
    let acc = read.iter().zip(&texts).filter(|(a, b)| a == b).count() as f64 / texts.len() as f64;
    println!("train accuracy: {acc:.3}");
    for (r, w) in read.iter().zip(&texts).take(8) { println!("  {r:?} vs {w:?}"); }
}
