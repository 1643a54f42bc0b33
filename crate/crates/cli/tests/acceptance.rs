//! Acceptance suite: property checks plus direction-checked desk-scale
//! training experiments. Each test prints one `criterion N: PASS/FAIL`
//! line (visible with `-- --nocapture`). The training fixtures (one full
//! run plus three ablation runs at the same corpus and budget, and a frozen
//! evaluation recognizer) are built once and shared; expect a multi-hour
//! wall time on small machines, tens of minutes on a desktop.

use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;
use stedit_core::data::batch::Batch;
use stedit_core::data::{cutout, CharsetCodec, CutoutSpec, PairStyleMode};
use stedit_core::error::EvalError;
use stedit_core::eval::{
    frechet_distance, mean_pixel_variance, psnr, recognition_accuracy, ssim,
};
use stedit_core::image::{TextImage, IMG_H, IMG_W};
use stedit_core::losses::{
    self, adv_from_probs, content_branch_param_names, feature_matching, total_losses, AdvMode,
    AdvSide, LossEval, StepOptions,
};
use stedit_core::model::config::ModelConfig;
use stedit_core::model::params::ParamStore;
use stedit_core::model::{bind_nets, new_store, Model};
use stedit_core::synth::{font::FontRegistry, generate_dataset, Manifest, SamplerProfile};
use stedit_core::trainer::{Objective, RunSummary, TrainConfig, Trainer};
use stedit_tensor::{Rng, Tape, Tensor};

const DESK_SEED: u64 = 42;
const DESK_ITERS: u64 = 2000;
const ORACLE_ITERS: u64 = 1500;

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn assets() -> PathBuf {
    repo_root().join("assets")
}

fn registry() -> FontRegistry {
    FontRegistry::load(&assets().join("fonts/registry.json")).unwrap()
}

fn desk_words() -> Vec<String> {
    ["cat", "dog", "sun", "map", "fox"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

fn oracle_words() -> Vec<String> {
    let mut words = desk_words();
    for w in [
        "bright", "clever", "double", "eleven", "frozen", "ginger", "hollow", "insect",
        "jacket", "kitten", "little", "mirror", "needle", "outlet", "pepper", "quiver",
        "ribbon", "saddle", "tunnel", "urgent", "valley", "wizard", "yellow", "zigzag",
        "apple", "baker", "candy", "delta", "eagle", "fable", "grape", "house", "igloo",
        "jolly", "koala", "lemon", "mango", "night", "ocean", "piano", "queen", "river",
        "sugar", "tiger", "uncle", "vivid", "water", "young", "zebra", "stone",
    ] {
        words.push(w.to_string());
    }
    words
}

fn synth_profile() -> SamplerProfile {
    SamplerProfile {
        font_ids: (0..8).collect(),
        bg_weights: [0.5, 0.3, 0.2],
    }
}

fn real_profile() -> SamplerProfile {
    SamplerProfile {
        font_ids: (8..12).collect(),
        bg_weights: [0.2, 0.3, 0.5],
    }
}

struct TrainedRun {
    summary: RunSummary,
    model: Model,
}

struct Fixtures {
    _dir: tempfile::TempDir,
    /// (style image, source text, target text) per desk pair.
    pairs: Vec<(TextImage, String, String)>,
    targets_b: Vec<TextImage>,
    oracle: Model,
    oracle_clean_accuracy: f64,
    full: TrainedRun,
    without_recognition: TrainedRun,
    without_stop_gradient: TrainedRun,
    different_styles: TrainedRun,
}

fn desk_config(seed: u64) -> TrainConfig {
    TrainConfig {
        total_iters: DESK_ITERS,
        batch_synth: 9,
        batch_real: 3,
        seed,
        checkpoint_every: 1000,
        ..TrainConfig::default()
    }
}

fn run_training(
    label: &str,
    cfg: TrainConfig,
    synth: &Path,
    real: &Path,
    out: &Path,
) -> TrainedRun {
    let codec = CharsetCodec::default_alphanumeric();
    let mcfg = ModelConfig::default();
    let t0 = Instant::now();
    let mut trainer = Trainer::new(
        cfg,
        mcfg.clone(),
        codec.clone(),
        synth,
        real,
        Some(assets().join("fonts/registry.json").as_path()),
    )
    .unwrap_or_else(|e| panic!("{label}: trainer init failed: {e}"));
    let summary = trainer
        .train(out)
        .unwrap_or_else(|e| panic!("{label}: training failed: {e}"));
    eprintln!(
        "[fixture] {label}: {} iters in {:.1} min (total_eg_r {:.3} -> {:.3})",
        summary.iterations,
        t0.elapsed().as_secs_f64() / 60.0,
        summary.mean_total_first_100,
        summary.mean_total_last_100
    );
    TrainedRun {
        summary,
        model: Model {
            cfg: mcfg,
            codec,
            store: trainer.store.clone(),
        },
    }
}

fn fixtures() -> &'static Fixtures {
    static FIX: OnceLock<Fixtures> = OnceLock::new();
    FIX.get_or_init(|| {
        let reg = registry();
        let dir = tempfile::tempdir().expect("tempdir");
        let base = dir.path();

        // Desk corpus: a complete style-by-word grid of 20 pairs — four
        // styles (the first near-canonical) by five words, each style
        // cycling through every word as source and as target. Words recur
        // across styles so a style never determines the supervised label,
        // and the canonical-like style keeps inference-time content renders
        // in-distribution.
        let words = desk_words();
        {
            use stedit_core::synth::{
                render_pair, sample_style_with, BgKind, Manifest as M, PairEntry, StyleParams,
            };
            let simple_style = |k: u64| -> StyleParams {
                let mut sseed = Rng::stream(DESK_SEED, &[900 + k]).next_u64();
                let mut best = (0.0f32, sseed);
                for _ in 0..4096 {
                    let lum =
                        stedit_core::synth::background::base_luminance(&BgKind::Solid, sseed);
                    if lum > best.0 {
                        best = (lum, sseed);
                    }
                    if lum > 0.97 {
                        break;
                    }
                    sseed = Rng::stream(sseed, &[1]).next_u64();
                }
                StyleParams {
                    font_id: 0,
                    font_size_px: 20,
                    fg_color: [0.0, 0.0, 0.0],
                    bg_kind: BgKind::Solid,
                    rotation_deg: 0.0,
                    perspective: [[0.0, 0.0]; 4],
                    curve_amplitude_px: 0.0,
                    blur_sigma: 0.0,
                    seed: best.1,
                }
            };
            let styles_list: Vec<StyleParams> = (0..4u64)
                .map(|j| {
                    if j == 0 {
                        simple_style(j)
                    } else {
                        sample_style_with(
                            &synth_profile(),
                            Rng::stream(DESK_SEED, &[j]).next_u64(),
                        )
                    }
                })
                .collect();
            let out = base.join("synth");
            std::fs::create_dir_all(out.join("images")).unwrap();
            let mut entries = Vec::new();
            let mut pair_idx = 0usize;
            for style in &styles_list {
                for k in 0..5usize {
                    let wa = words[k].clone();
                    let wb = words[(k + 1) % 5].clone();
                    let pair = render_pair(&wa, &wb, style, &reg).unwrap();
                    let rel_a = format!("images/pair_{pair_idx:05}_a.png");
                    let rel_b = format!("images/pair_{pair_idx:05}_b.png");
                    pair.image_a.save_png(&out.join(&rel_a)).unwrap();
                    pair.image_b.save_png(&out.join(&rel_b)).unwrap();
                    entries.push(PairEntry {
                        pair_id: pair_idx as u64,
                        path_a: rel_a,
                        path_b: rel_b,
                        text_a: wa,
                        text_b: wb,
                        style: style.clone(),
                    });
                    pair_idx += 1;
                }
            }
            M {
                seed: DESK_SEED,
                entries,
            }
            .save(&out.join("manifest.json"))
            .unwrap();
        }
        generate_dataset(
            &words,
            6,
            &base.join("real"),
            DESK_SEED + 1,
            &real_profile(),
            &reg,
        )
        .unwrap();
        let synth_manifest = base.join("synth/manifest.json");
        let real_manifest = base.join("real/manifest.json");
        let _ = (&synth_manifest, &real_manifest);
        let (manifest, mbase) = Manifest::load(&synth_manifest).unwrap();
        let pairs: Vec<(TextImage, String, String)> = manifest
            .entries
            .iter()
            .map(|e| {
                (
                    TextImage::load_png(&mbase.join(&e.path_a)).unwrap(),
                    e.text_a.clone(),
                    e.text_b.clone(),
                )
            })
            .collect();
        let targets_b: Vec<TextImage> = manifest
            .entries
            .iter()
            .map(|e| TextImage::load_png(&mbase.join(&e.path_b)).unwrap())
            .collect();

        // Frozen evaluation recognizer: trained separately on a held-out
        // synthetic split covering every font.
        generate_dataset(
            &oracle_words(),
            200,
            &base.join("oracle_data"),
            DESK_SEED + 7,
            &SamplerProfile::uniform(reg.ids()),
            &reg,
        )
        .unwrap();
        let oracle_cfg = TrainConfig {
            total_iters: ORACLE_ITERS,
            batch_synth: 8,
            batch_real: 1,
            objective: Objective::RecognizerOnly,
            seed: DESK_SEED + 7,
            checkpoint_every: 0,
            ..TrainConfig::default()
        };
        let oracle_run = run_training(
            "oracle recognizer",
            oracle_cfg,
            &base.join("oracle_data/manifest.json"),
            &base.join("real/manifest.json"),
            &base.join("oracle_out"),
        );
        let oracle = oracle_run.model;
        // Oracle sanity on freshly rendered desk words in unseen styles.
        let mut probe_imgs = Vec::new();
        let mut probe_texts = Vec::new();
        for (i, w) in desk_words().iter().enumerate() {
            let style = stedit_core::synth::sample_style(
                Rng::stream_tagged(DESK_SEED, "oracle-probe", &[i as u64]).next_u64(),
                &reg,
            );
            probe_imgs.push(stedit_core::synth::render_text(w, &style, &reg).unwrap());
            probe_texts.push(w.clone());
        }
        let decoded = oracle.read_texts(&probe_imgs);
        let oracle_clean_accuracy = decoded
            .iter()
            .zip(&probe_texts)
            .filter(|(a, b)| a == b)
            .count() as f64
            / probe_texts.len() as f64;
        eprintln!("[fixture] oracle clean-render accuracy: {oracle_clean_accuracy:.3}");

        // The four desk-budget runs.
        let full = run_training(
            "full model",
            desk_config(DESK_SEED),
            &synth_manifest,
            &real_manifest,
            &base.join("run_full"),
        );
        let without_recognition = run_training(
            "ablation without recognition",
            TrainConfig {
                drop_recognition: true,
                ..desk_config(DESK_SEED)
            },
            &synth_manifest,
            &real_manifest,
            &base.join("run_wo_r"),
        );
        let without_stop_gradient = run_training(
            "ablation without stop gradient",
            TrainConfig {
                no_stop_gradient: true,
                ..desk_config(DESK_SEED)
            },
            &synth_manifest,
            &real_manifest,
            &base.join("run_wo_sg"),
        );
        let different_styles = run_training(
            "different-style pairs",
            TrainConfig {
                pair_style: PairStyleMode::Different,
                ..desk_config(DESK_SEED)
            },
            &synth_manifest,
            &real_manifest,
            &base.join("run_diff_style"),
        );

        Fixtures {
            _dir: dir,
            pairs,
            targets_b,
            oracle,
            oracle_clean_accuracy,
            full,
            without_recognition,
            without_stop_gradient,
            different_styles,
        }
    })
}

/// Cross-combination edit protocol shared by criteria 5-7: held-in style
/// images paired with held-in target texts from other pairs. Criterion 5
/// uses the first 20 combinations (one per pair); the comparative criteria
/// score all five rotations for finer resolution.
fn cross_edit_requests(fx: &Fixtures, rotations: usize) -> (Vec<TextImage>, Vec<String>) {
    let base: Vec<TextImage> = fx.pairs.iter().map(|(im, _, _)| im.clone()).collect();
    let n = base.len();
    let mut styles = Vec::new();
    let mut targets = Vec::new();
    // Offset 4 would request each style image's own source text under the
    // cyclic five-word pool; it is skipped so an edit that merely preserves
    // the original text never scores as correct.
    let offsets: &[usize] = &[1, 2, 3, 5];
    for &off in &offsets[..rotations.min(offsets.len())] {
        for i in 0..n {
            styles.push(base[i].clone());
            targets.push(fx.pairs[(i + off) % n].2.clone());
        }
    }
    (styles, targets)
}

fn edit_accuracy(fx: &Fixtures, run: &TrainedRun, rotations: usize) -> (f64, Vec<TextImage>) {
    let reg = registry();
    let (styles, targets) = cross_edit_requests(fx, rotations);
    let edits = run.model.edit_batch(&styles, &targets, &reg).unwrap();
    let pairs: Vec<(TextImage, String)> = edits
        .iter()
        .cloned()
        .zip(targets.iter().cloned())
        .collect();
    let acc = recognition_accuracy(&fx.oracle, &pairs).unwrap();
    (acc, edits)
}

fn edit_style_ffd(run: &TrainedRun, edits: &[TextImage], styles: &[TextImage]) -> f64 {
    let (edit_feats, _) = run.model.pooled_features(edits);
    let (style_feats, _) = run.model.pooled_features(styles);
    frechet_distance(&edit_feats, &style_feats).unwrap()
}

fn report(criterion: &str, pass: bool, detail: &str, t0: Instant) {
    let status = if pass { "PASS" } else { "FAIL" };
    println!(
        "criterion {criterion}: {status} — {detail} ({:.1}s)",
        t0.elapsed().as_secs_f64()
    );
    eprintln!(
        "criterion {criterion}: {status} — {detail} ({:.1}s)",
        t0.elapsed().as_secs_f64()
    );
    assert!(pass, "criterion {criterion}: {detail}");
}

fn small_batch_for_ledger() -> Batch {
    let reg = registry();
    let codec = CharsetCodec::default_alphanumeric();
    let render = |seed: u64, text: &str| {
        stedit_core::synth::render_text(
            text,
            &stedit_core::synth::sample_style(seed, &reg),
            &reg,
        )
        .unwrap()
    };
    let clean = render(7, "sun");
    let mut rng = Rng::stream_tagged(7, "ledger-cut", &[]);
    let (noisy, left) = cutout(&clean, &CutoutSpec::default(), [0.0; 3], &mut rng).unwrap();
    Batch {
        synth_style: vec![render(3, "cat")],
        synth_target: vec![render(3, "dog")],
        synth_content_src: vec![render(3, "dog")],
        synth_labels_source: vec![codec.encode("cat").unwrap()],
        synth_labels_target: vec![codec.encode("dog").unwrap()],
        real_clean: vec![clean],
        real_noisy: vec![noisy],
        cut_positions: vec![left],
        synth_ids: vec![0],
        real_ids: vec![0],
    }
}

#[test]
fn criterion_01_stop_gradient_ledger() {
    let t0 = Instant::now();
    // Full default configuration in f64; gradients of content-branch
    // parameters under the joint objective must equal the recognition-only
    // gradients elementwise.
    let cfg = ModelConfig::default();
    let store = new_store::<f64>(&cfg, 77);
    let batch = small_batch_for_ledger();
    let total = total_losses(&cfg, &store, &batch, &StepOptions::default());
    let grads_total = total.tape.backward(total.total_eg_r_id);
    let grads_text = total.tape.backward(total.text_only_id.expect("recognition on"));
    let mut max_diff = 0f64;
    let mut checked = 0usize;
    for name in content_branch_param_names(&store.defs) {
        let leaf = total.ids[&name];
        match (&grads_total[leaf.0], &grads_text[leaf.0]) {
            (Some(a), Some(b)) => {
                for (x, y) in a.data().iter().zip(b.data()) {
                    max_diff = max_diff.max((x - y).abs());
                    checked += 1;
                }
            }
            (None, None) => {}
            _ => {
                report("1 (stop-gradient ledger)", false, "gradient presence differs", t0);
                return;
            }
        }
    }
    let pass = checked > 1_000_000 && max_diff <= 1e-12;
    report(
        "1 (stop-gradient ledger)",
        pass,
        &format!("{checked} content-branch elements, max |Δgrad| = {max_diff:.2e} (≤ 1e-12)"),
        t0,
    );
}

#[test]
fn criterion_02_gradient_correctness() {
    let t0 = Instant::now();
    let cfg = ModelConfig::tiny();
    let store = new_store::<f64>(&cfg, 99);
    let reg = registry();
    let codec = CharsetCodec::default_alphanumeric();
    let render = |seed: u64, text: &str| {
        stedit_core::synth::render_text(
            text,
            &stedit_core::synth::sample_style(seed, &reg),
            &reg,
        )
        .unwrap()
    };

    // Ten random parameter elements per loss, drawn over the networks the
    // loss touches, against pinned central differences.
    let mut failures: Vec<String> = Vec::new();
    let mut check = |label: &str,
                     nets: &[&str],
                     build: &dyn Fn(&ParamStore<f64>, Vec<Tensor<f64>>) -> LossEval<f64>| {
        let base = build(&store, Vec::new());
        let pins = base.tape.detach_record().to_vec();
        let grads = base.grads();
        let mut rng = Rng::stream_tagged(1234, label, &[]);
        let candidates: Vec<String> = store
            .defs
            .iter()
            .filter(|d| nets.iter().any(|p| d.name.starts_with(p)))
            .map(|d| d.name.clone())
            .collect();
        for k in 0..10 {
            let name = &candidates[rng.below(candidates.len() as u64) as usize];
            let idx = store.idx(name);
            let ei = rng.below(store.values[idx].numel() as u64) as usize;
            let leaf = base.ids[name];
            let an = grads[leaf.0].as_ref().map(|g| g.data()[ei]).unwrap_or(0.0);
            let fd_at = |h: f64| {
                let mut plus = store.clone();
                plus.values[idx].data_mut()[ei] += h;
                let up = build(&plus, pins.clone()).value();
                let mut minus = store.clone();
                minus.values[idx].data_mut()[ei] -= h;
                let dn = build(&minus, pins.clone()).value();
                (up - dn) / (2.0 * h)
            };
            let rel_of = |fd: f64| (an - fd).abs() / an.abs().max(fd.abs()).max(1e-6);
            let rel = rel_of(fd_at(1e-4));
            // Kink-crossing noise in the quotient: re-verify at a converged
            // step before declaring a mismatch.
            if rel >= 1e-3 && rel_of(fd_at(1e-7)) >= 1e-3 {
                failures.push(format!("{label}#{k} {name}[{ei}] rel {rel:.2e}"));
            }
        }
    };

    let (a, b) = (render(71, "cat"), render(71, "dog"));
    check("gen_synth", &["enc.", "gen."], &|s, p| {
        losses::loss_gen_synth_pinned(&cfg, s, &a, &b, p)
    });
    let x = render(72, "map");
    let label = codec.encode("map").unwrap();
    check("text", &["enc.", "rec."], &|s, p| {
        losses::loss_text_pinned(&cfg, s, &x, &label, p)
    });
    let clean = render(73, "sun");
    let mut rng = Rng::stream_tagged(90, "cut", &[]);
    let (noisy, _) = cutout(&clean, &CutoutSpec::default(), [0.0; 3], &mut rng).unwrap();
    check("gen_real", &["enc.", "gen."], &|s, p| {
        losses::loss_gen_real_pinned(&cfg, s, &clean, &noisy, p)
    });
    let (r, f, cs, cc) = (render(74, "owl"), render(75, "pig"), render(76, "rat"), render(77, "web"));
    check("adv_d", &["disc."], &|s, p| {
        losses::loss_adv_pinned(&cfg, s, &r, &f, &cs, &cc, AdvSide::Disc, AdvMode::Minimax, p)
    });
    check("adv_g", &["disc."], &|s, p| {
        losses::loss_adv_pinned(
            &cfg, s, &r, &f, &cs, &cc, AdvSide::Gen, AdvMode::Nonsaturating, p,
        )
    });
    check("feature_matching", &["disc."], &|s, p| {
        losses::loss_feature_matching_pinned(&cfg, s, &r, &f, &cs, &cc, p)
    });
    check("con_text", &["enc.", "rec."], &|s, p| {
        losses::loss_text_pinned(&cfg, s, &f, &label, p)
    });

    let pass = failures.is_empty();
    report(
        "2 (gradient correctness)",
        pass,
        &format!(
            "7 losses x 10 random parameters vs central differences (rel tol 1e-3){}",
            if pass {
                String::new()
            } else {
                format!("; failures: {failures:?}")
            }
        ),
        t0,
    );
}

#[test]
fn criterion_03_closed_form_identities() {
    let t0 = Instant::now();
    let mut ok = true;
    let mut notes = Vec::new();

    // L1 of a constant offset.
    let a = TextImage::filled(0.2);
    let b = TextImage::filled(0.7);
    let mut tape: Tape<f64> = Tape::new();
    let xa = losses::image_batch_const(&mut tape, &[a]);
    let xb = losses::image_batch_const(&mut tape, &[b]);
    let l1 = tape.l1_diff_mean(xa, xb);
    let v = tape.val(l1).item();
    ok &= (v - 0.5).abs() < 1e-6;
    notes.push(format!("L1 offset {v:.8}"));

    // Cross entropy of a uniform 2-class prediction.
    let logits = tape.constant(Tensor::new(vec![1, 2], vec![1.7, 1.7]));
    let ce = tape.ce_logits_masked(logits, &[0], &[true]);
    let v = tape.val(ce).item();
    ok &= (v - std::f64::consts::LN_2).abs() < 1e-6;
    notes.push(format!("CE ln2 {v:.8}"));

    // Adversarial value at D = 0.5 everywhere.
    let half = tape.constant(Tensor::filled(vec![2, 1, 4, 16], 0.5));
    let adv = adv_from_probs(&mut tape, Some(half), half, AdvSide::Disc, AdvMode::Minimax);
    let v = tape.val(adv).item();
    ok &= (v - 2.0 * std::f64::consts::LN_2).abs() < 1e-6;
    notes.push(format!("adv 2ln2 {v:.8}"));

    // Feature matching under an identity feature map equals plain L1.
    let mut rng = Rng::new(5);
    let pa: Vec<f64> = (0..48).map(|_| rng.range_f64(0.0, 1.0)).collect();
    let pb: Vec<f64> = (0..48).map(|_| rng.range_f64(0.0, 1.0)).collect();
    let fa = tape.constant(Tensor::new(vec![1, 3, 4, 4], pa));
    let fb = tape.constant(Tensor::new(vec![1, 3, 4, 4], pb));
    let fm = feature_matching(&mut tape, &[fa], &[fb]);
    let l1 = tape.l1_diff_mean(fa, fb);
    let dv = (tape.val(fm).item() - tape.val(l1).item()).abs();
    ok &= dv < 1e-6;
    notes.push(format!("fm-vs-L1 gap {dv:.2e}"));

    report("3 (closed-form identities)", ok, &notes.join(", "), t0);
}

#[test]
fn criterion_04_overfit_run() {
    let t0 = Instant::now();
    let fx = fixtures();
    // Recognizer accuracy on the 20 supervised training texts.
    let imgs: Vec<TextImage> = fx.pairs.iter().map(|(im, _, _)| im.clone()).collect();
    let texts: Vec<String> = fx.pairs.iter().map(|(_, ta, _)| ta.clone()).collect();
    let decoded = fx.full.model.read_texts(&imgs);
    let rec_hits = decoded.iter().zip(&texts).filter(|(a, b)| a == b).count();
    let rec_acc = rec_hits as f64 / texts.len() as f64;

    // Mean paired-reconstruction L1 against the 20 targets.
    let mut tape: Tape<f32> = Tape::new();
    let (nets, _) = bind_nets(
        &mut tape,
        &fx.full.model.store,
        &fx.full.model.cfg,
        stedit_core::model::params::Trainable::NONE,
    );
    let xa = losses::image_batch_const(&mut tape, &imgs);
    let xb = losses::image_batch_const(&mut tape, &fx.targets_b);
    let maps_a = nets.enc.trunk(&mut tape, xa);
    let maps_b = nets.enc.trunk(&mut tape, xb);
    let ct_b = nets.enc.content(&mut tape, maps_b[3]);
    let fake = nets.gen.forward(&mut tape, &maps_a, ct_b);
    let l1_id = tape.l1_diff_mean(fake, xb);
    let l1 = tape.val(l1_id).item() as f64;

    let first = fx.full.summary.mean_total_first_100;
    let last = fx.full.summary.mean_total_last_100;
    let pass = rec_acc == 1.0 && l1 < 0.05 && last < first;
    report(
        "4 (overfit run)",
        pass,
        &format!(
            "recognizer {rec_hits}/20 correct, reconstruction L1 {l1:.4} (< 0.05), \
             total_eg_r first100 {first:.3} -> last100 {last:.3}"
        ),
        t0,
    );
}

#[test]
fn criterion_05_edit_end_to_end() {
    let t0 = Instant::now();
    let fx = fixtures();
    assert!(
        fx.oracle_clean_accuracy >= 0.9,
        "evaluation recognizer too weak on clean renders: {:.3}",
        fx.oracle_clean_accuracy
    );
    let (acc, _) = edit_accuracy(fx, &fx.full, 1);
    // Also report the run's own text head for context.
    let reg = registry();
    let (styles, targets) = cross_edit_requests(fx, 1);
    let edits = fx.full.model.edit_batch(&styles, &targets, &reg).unwrap();
    let own = fx.full.model.read_texts(&edits);
    let own_acc =
        own.iter().zip(&targets).filter(|(a, b)| a == b).count() as f64 / targets.len() as f64;
    let pass = acc >= 0.9;
    report(
        "5 (edit end-to-end)",
        pass,
        &format!(
            "20 held-in (style, text) combinations: frozen-recognizer accuracy {acc:.2} \
             (>= 0.90; own text head reads {own_acc:.2})"
        ),
        t0,
    );
}

#[test]
fn criterion_06_ablation_directions() {
    let t0 = Instant::now();
    let fx = fixtures();
    // (a) Dropping the recognition loss collapses edit accuracy.
    let (acc_wo_r, _) = edit_accuracy(fx, &fx.without_recognition, 4);
    // (b) Dropping the stop gradient makes the edit-vs-style feature
    // distance strictly worse than the full model's.
    let (styles, _) = cross_edit_requests(fx, 4);
    let (_, edits_full) = edit_accuracy(fx, &fx.full, 4);
    let (_, edits_wo_sg) = edit_accuracy(fx, &fx.without_stop_gradient, 4);
    // Measure both runs' edits in the same (full model's) feature space.
    let ffd_full = edit_style_ffd(&fx.full, &edits_full, &styles);
    let ffd_wo_sg = edit_style_ffd(&fx.full, &edits_wo_sg, &styles);
    let pass_a = acc_wo_r < 0.20;
    let pass_b = ffd_wo_sg > ffd_full;
    report(
        "6 (ablation directions)",
        pass_a && pass_b,
        &format!(
            "without recognition: edit accuracy {acc_wo_r:.2} (< 0.20); \
             without stop gradient: FFD {ffd_wo_sg:.2} vs full {ffd_full:.2} (strictly greater)"
        ),
        t0,
    );
}

#[test]
fn criterion_07_same_style_pair_decision() {
    let t0 = Instant::now();
    let fx = fixtures();
    let (acc_same, _) = edit_accuracy(fx, &fx.full, 4);
    let (acc_diff, _) = edit_accuracy(fx, &fx.different_styles, 4);
    let pass = acc_diff < acc_same;
    report(
        "7 (same-style pair decision)",
        pass,
        &format!(
            "different-style training accuracy {acc_diff:.2} vs same-style {acc_same:.2} \
             (strictly below)"
        ),
        t0,
    );
}

#[test]
fn criterion_08_metric_identities() {
    let t0 = Instant::now();
    let mut ok = true;
    let mut notes = Vec::new();

    let mut rng = Rng::new(8);
    let set: Vec<Vec<f64>> = (0..24)
        .map(|_| (0..6).map(|_| rng.normal()).collect())
        .collect();
    let d0 = frechet_distance(&set, &set).unwrap();
    ok &= d0.abs() <= 1e-6;
    notes.push(format!("FFD(identical) {d0:.2e}"));

    let a = vec![vec![-1.0], vec![1.0]];
    let b = vec![vec![0.0], vec![2.0]];
    let d1 = frechet_distance(&a, &b).unwrap();
    ok &= (d1 - 1.0).abs() <= 1e-6;
    notes.push(format!("FFD(two-point) {d1:.8}"));

    let mut img = TextImage::filled(0.0);
    for y in 0..IMG_H {
        for x in 0..IMG_W {
            img.set(0, y, x, ((x * 5 + y * 3) % 13) as f32 / 13.0);
            img.set(1, y, x, ((x * 2 + y * 7) % 11) as f32 / 11.0);
        }
    }
    let s = ssim(&img, &img);
    ok &= (s - 1.0).abs() < 1e-12;
    notes.push(format!("SSIM(x,x) {s:.12}"));

    let off = {
        let mut o = img.clone();
        for v in o.pixels.iter_mut() {
            *v += 0.1;
        }
        o
    };
    let p = psnr(&img, &off);
    ok &= (p - 20.0).abs() <= 0.01;
    notes.push(format!("PSNR(0.1 offset) {p:.4} dB"));

    // Identical outputs: infinite PSNR sentinel, SSIM 1, variance 0.
    let p_inf = psnr(&img, &img);
    let var0 = mean_pixel_variance(&[img.clone(), img.clone()]);
    ok &= p_inf.is_infinite() && var0 == 0.0;
    notes.push("identical pair -> PSNR Inf, variance 0".to_string());

    report("8 (metric identities)", ok, &notes.join("; "), t0);
}

#[test]
fn criterion_09_cutout_contract() {
    let t0 = Instant::now();
    let spec = CutoutSpec::default();
    assert_eq!(spec.width_px, 42);
    let mut worst_outside = 0f32;
    let mut all_bands_exact = true;
    for i in 0..1000u64 {
        let mut rng = Rng::stream_tagged(0xC0, "img", &[i]);
        let mut img = TextImage::filled(0.0);
        for v in img.pixels.iter_mut() {
            // Keep strictly positive so the zero fill is always detectable.
            *v = 0.05 + 0.95 * rng.next_f64() as f32;
        }
        let mut crng = Rng::stream_tagged(0xC1, "cut", &[i]);
        let (noisy, left) = cutout(&img, &spec, [0.0; 3], &mut crng).unwrap();
        let mut cols = std::collections::BTreeSet::new();
        for c in 0..3 {
            for y in 0..IMG_H {
                for x in 0..IMG_W {
                    let d = (noisy.get(c, y, x) - img.get(c, y, x)).abs();
                    if x >= left && x < left + 42 {
                        if d > 0.0 {
                            cols.insert(x);
                        }
                    } else {
                        worst_outside = worst_outside.max(d);
                    }
                }
            }
        }
        all_bands_exact &= cols.len() == 42
            && *cols.iter().next().unwrap() == left
            && *cols.iter().last().unwrap() == left + 41;
    }
    let pass = worst_outside == 0.0 && all_bands_exact;
    report(
        "9 (cutout contract)",
        pass,
        &format!(
            "1000 images: max |Δ| outside band {worst_outside}, band width exactly 42 columns"
        ),
        t0,
    );
}

#[test]
fn criterion_10_pipeline_determinism() {
    let t0 = Instant::now();
    let bin = env!("CARGO_BIN_EXE_stedit");
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.cfg");
    std::fs::write(
        &cfg_path,
        format!(
            "corpus = {}\nfonts = {}\nsynth_pairs = 8\nreal_pairs = 3\nseed = 31\n\
             total_iters = 100\nbatch_synth = 9\nbatch_real = 3\ncheckpoint_every = 50\n\
             grid_styles = 4\ngrid_contents = 4\neval_max = 8\n",
            assets().join("corpus/words.txt").display(),
            assets().join("fonts/registry.json").display(),
        ),
    )
    .unwrap();
    let run_pipeline = |tag: &str| -> (Vec<u8>, Vec<u8>, Vec<u8>, Vec<u8>) {
        let out = dir.path().join(tag);
        let sh = |args: &[&str]| {
            let r = std::process::Command::new(bin)
                .args(args)
                .current_dir(repo_root())
                .output()
                .expect("spawn");
            assert!(
                r.status.success(),
                "{args:?}: {}",
                String::from_utf8_lossy(&r.stderr)
            );
        };
        let cfg = cfg_path.to_str().unwrap();
        let out_s = out.to_str().unwrap();
        sh(&["synthgen", "--config", cfg, "--set", &format!("out_dir={out_s}")]);
        sh(&["train", "--config", cfg, "--set", &format!("out_dir={out_s}")]);
        let ckpt = out.join("train/ckpt_final");
        let edited = out.join("edited.png");
        sh(&[
            "edit",
            "--config",
            cfg,
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--input",
            out.join("synth/images/pair_00000_a.png").to_str().unwrap(),
            "--text",
            "cat",
            "--out",
            edited.to_str().unwrap(),
        ]);
        sh(&[
            "eval",
            "--config",
            cfg,
            "--set",
            &format!("out_dir={out_s}"),
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--manifest",
            out.join("synth/manifest.json").to_str().unwrap(),
        ]);
        (
            std::fs::read(out.join("synth/manifest.json")).unwrap(),
            std::fs::read(out.join("train/train_log.jsonl")).unwrap(),
            std::fs::read(&edited).unwrap(),
            std::fs::read(out.join("eval_report.json")).unwrap(),
        )
    };
    let a = run_pipeline("a");
    let b = run_pipeline("b");
    let pass = a == b;
    report(
        "10 (pipeline determinism)",
        pass,
        &format!(
            "synthgen -> train(100) -> edit -> eval twice: manifests {}, loss logs {}, \
             edited PNGs {}, reports {}",
            eq(&a.0, &b.0),
            eq(&a.1, &b.1),
            eq(&a.2, &b.2),
            eq(&a.3, &b.3)
        ),
        t0,
    );
}

fn eq(a: &[u8], b: &[u8]) -> &'static str {
    if a == b {
        "identical"
    } else {
        "DIFFER"
    }
}

#[test]
fn fixture_inputs_exist() {
    // Cheap guard so fixture Path wiring fails loudly before the long runs.
    assert!(assets().join("fonts/registry.json").exists());
    assert!(assets().join("corpus/words.txt").exists());
    let _ = EvalError::EmptyInput; // referenced to keep the import earning its place
}
