//! Trainer contracts: determinism, resume, update-group isolation,
//! checkpoint cadence. Runs on the narrow test config to stay fast.

use std::path::{Path, PathBuf};
use stedit_core::data::CharsetCodec;
use stedit_core::model::config::ModelConfig;
use stedit_core::model::params::Network;
use stedit_core::synth::{font::FontRegistry, generate_dataset, SamplerProfile};
use stedit_core::trainer::{Objective, TrainConfig, Trainer};

fn assets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets")
}

struct Fixture {
    _dir: tempfile::TempDir,
    synth: PathBuf,
    real: PathBuf,
}

fn fixture() -> Fixture {
    let reg = FontRegistry::load(&assets().join("fonts/registry.json")).unwrap();
    let corpus: Vec<String> = ["cat", "dog", "sun", "map", "fox", "owl"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let profile = SamplerProfile::uniform(reg.ids());
    generate_dataset(&corpus, 6, &dir.path().join("synth"), 70, &profile, &reg).unwrap();
    generate_dataset(&corpus, 3, &dir.path().join("real"), 71, &profile, &reg).unwrap();
    Fixture {
        synth: dir.path().join("synth/manifest.json"),
        real: dir.path().join("real/manifest.json"),
        _dir: dir,
    }
}

fn small_cfg(total_iters: u64, seed: u64) -> TrainConfig {
    TrainConfig {
        total_iters,
        batch_synth: 3,
        batch_real: 1,
        seed,
        checkpoint_every: 3,
        ..TrainConfig::default()
    }
}

fn trainer(fx: &Fixture, cfg: TrainConfig) -> Trainer {
    Trainer::new(
        cfg,
        ModelConfig::tiny(),
        CharsetCodec::default_alphanumeric(),
        &fx.synth,
        &fx.real,
        None,
    )
    .unwrap()
}

#[test]
fn zero_iteration_run_writes_initial_checkpoint() {
    let fx = fixture();
    let out = tempfile::tempdir().unwrap();
    let mut t = trainer(&fx, small_cfg(0, 1));
    let summary = t.train(out.path()).unwrap();
    assert!(out.path().join("ckpt_000000/meta.json").exists());
    assert!(out.path().join("ckpt_final/meta.json").exists());
    assert!(summary.log_path.exists());
    assert_eq!(summary.iterations, 0);
}

#[test]
fn identical_runs_produce_identical_logs_and_digests() {
    let fx = fixture();
    let out_a = tempfile::tempdir().unwrap();
    let out_b = tempfile::tempdir().unwrap();
    let sa = trainer(&fx, small_cfg(4, 5)).train(out_a.path()).unwrap();
    let sb = trainer(&fx, small_cfg(4, 5)).train(out_b.path()).unwrap();
    assert_eq!(sa.final_digest, sb.final_digest);
    let la = std::fs::read(out_a.path().join("train_log.jsonl")).unwrap();
    let lb = std::fs::read(out_b.path().join("train_log.jsonl")).unwrap();
    assert!(!la.is_empty());
    assert_eq!(la, lb);
}

#[test]
fn resume_matches_uninterrupted_run() {
    let fx = fixture();
    // Uninterrupted 6-iteration run.
    let out_full = tempfile::tempdir().unwrap();
    let full = trainer(&fx, small_cfg(6, 9)).train(out_full.path()).unwrap();
    // 6-iteration run resumed from the checkpoint written after 3.
    let out_head = tempfile::tempdir().unwrap();
    trainer(&fx, small_cfg(3, 9)).train(out_head.path()).unwrap();
    let out_tail = tempfile::tempdir().unwrap();
    let mut tail = trainer(&fx, small_cfg(6, 9));
    tail.resume_from(&out_head.path().join("ckpt_000003")).unwrap();
    let resumed = tail.train(out_tail.path()).unwrap();
    assert_eq!(full.final_digest, resumed.final_digest);
}

#[test]
fn resume_rejects_seed_mismatch() {
    let fx = fixture();
    let out = tempfile::tempdir().unwrap();
    trainer(&fx, small_cfg(3, 9)).train(out.path()).unwrap();
    let mut other = trainer(&fx, small_cfg(6, 10));
    assert!(other.resume_from(&out.path().join("ckpt_000003")).is_err());
}

#[test]
fn both_update_groups_move_and_opt_state_tracks_steps() {
    let fx = fixture();
    let mut t = trainer(&fx, small_cfg(2, 11));
    let before = t.store.clone();
    let out = tempfile::tempdir().unwrap();
    t.train(out.path()).unwrap();
    let mut d_changed = false;
    let mut egr_changed = false;
    for (def, (old, new)) in t
        .store
        .defs
        .iter()
        .zip(before.values.iter().zip(&t.store.values))
    {
        if old.data() != new.data() {
            if def.net == Network::Discriminator {
                d_changed = true;
            } else {
                egr_changed = true;
            }
        }
    }
    assert!(d_changed, "discriminator never updated");
    assert!(egr_changed, "joint group never updated");
    assert_eq!(t.opt.step_d, 2);
    assert_eq!(t.opt.step_egr, 2);
}

#[test]
fn recognizer_only_objective_trains_and_freezes_gan() {
    let fx = fixture();
    let cfg = TrainConfig {
        objective: Objective::RecognizerOnly,
        ..small_cfg(3, 12)
    };
    let mut t = trainer(&fx, cfg);
    let before = t.store.clone();
    let out = tempfile::tempdir().unwrap();
    t.train(out.path()).unwrap();
    for (def, (old, new)) in t
        .store
        .defs
        .iter()
        .zip(before.values.iter().zip(&t.store.values))
    {
        match def.net {
            Network::Generator | Network::Discriminator => {
                assert_eq!(old.data(), new.data(), "{} moved", def.name);
            }
            _ => {}
        }
    }
    // Log lines carry only the recognition term.
    let log = std::fs::read_to_string(out.path().join("train_log.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    assert_eq!(first["gen_synth"], 0.0);
    assert!(first["text_synth"].as_f64().unwrap() > 0.0);
}

#[test]
fn drop_recognition_keeps_text_term_zero() {
    let fx = fixture();
    let cfg = TrainConfig {
        drop_recognition: true,
        ..small_cfg(2, 13)
    };
    let mut t = trainer(&fx, cfg);
    let out = tempfile::tempdir().unwrap();
    t.train(out.path()).unwrap();
    let log = std::fs::read_to_string(out.path().join("train_log.jsonl")).unwrap();
    for line in log.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["text_synth"], 0.0);
    }
}

#[test]
fn log_lines_match_breakdown_identity() {
    let fx = fixture();
    let cfg = small_cfg(3, 14);
    let lambda = cfg.lambda;
    let mut t = trainer(&fx, cfg);
    let out = tempfile::tempdir().unwrap();
    t.train(out.path()).unwrap();
    let log = std::fs::read_to_string(out.path().join("train_log.jsonl")).unwrap();
    let mut n = 0;
    for line in log.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let total = v["total_eg_r"].as_f64().unwrap();
        let expect = v["gen_synth"].as_f64().unwrap()
            + v["text_synth"].as_f64().unwrap()
            + v["per_synth"].as_f64().unwrap()
            + v["gen_real"].as_f64().unwrap()
            + v["per_real"].as_f64().unwrap()
            + lambda * (v["adv_synth_g"].as_f64().unwrap() + v["adv_real_g"].as_f64().unwrap());
        assert!((total - expect).abs() < 1e-9);
        let total_d = v["total_d"].as_f64().unwrap();
        let expect_d =
            lambda * (v["adv_synth_d"].as_f64().unwrap() + v["adv_real_d"].as_f64().unwrap());
        assert!((total_d - expect_d).abs() < 1e-9);
        n += 1;
    }
    assert_eq!(n, 3);
}
