// Times full-config training iterations; a sizing aid for the accept suite.
use std::path::Path;
use stedit_core::data::CharsetCodec;
use stedit_core::model::config::ModelConfig;
use stedit_core::synth::{font::FontRegistry, generate_dataset, SamplerProfile};
use stedit_core::trainer::{TrainConfig, Trainer};

fn main() {
    let reg = FontRegistry::load(Path::new("assets/fonts/registry.json")).unwrap();
    let corpus: Vec<String> = ["castle", "dragon", "forest", "copper", "silver", "temple"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let profile = SamplerProfile::uniform(reg.ids());
    generate_dataset(&corpus, 20, &dir.path().join("synth"), 1, &profile, &reg).unwrap();
    generate_dataset(&corpus, 5, &dir.path().join("real"), 2, &profile, &reg).unwrap();
    let cfg = TrainConfig {
        total_iters: 10,
        seed: 3,
        checkpoint_every: 0,
        ..TrainConfig::default()
    };
    let mut t = Trainer::new(
        cfg,
        ModelConfig::default(),
        CharsetCodec::default_alphanumeric(),
        &dir.path().join("synth/manifest.json"),
        &dir.path().join("real/manifest.json"),
        None,
    )
    .unwrap();
    let out = tempfile::tempdir().unwrap();
    let t0 = std::time::Instant::now();
    t.train(out.path()).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    println!("10 iters in {dt:.2}s -> {:.2} s/iter", dt / 10.0);
    println!("2000 iters ~= {:.1} min", dt / 10.0 * 2000.0 / 60.0);
}
