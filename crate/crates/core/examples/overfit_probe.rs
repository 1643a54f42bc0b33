// Rehearsal for the desk-scale overfit experiment: 20 pairs, 2000 iters,
// batch 9+3. Reports reconstruction L1, recognizer accuracy on the training
// texts, and cross-combination edit readability with the run's own text head.
use std::path::Path;
use stedit_core::data::CharsetCodec;
use stedit_core::image::TextImage;
use stedit_core::losses::image_batch_const;
use stedit_core::model::config::ModelConfig;
use stedit_core::model::params::Trainable;
use stedit_core::model::{bind_nets, Model};
use stedit_core::synth::{font::FontRegistry, generate_dataset, Manifest, SamplerProfile};
use stedit_core::trainer::{TrainConfig, Trainer};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let iters: u64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(2000);
    let seed: u64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(42);
    let reg = FontRegistry::load(Path::new("assets/fonts/registry.json")).unwrap();
    let words: Vec<String> = ["cat", "dog", "sun", "map", "fox"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let synth_profile = SamplerProfile { font_ids: (0..8).collect(), bg_weights: [0.5, 0.3, 0.2] };
    let real_profile = SamplerProfile { font_ids: (8..12).collect(), bg_weights: [0.2, 0.3, 0.5] };
    // Desk corpus: two styles (one near-canonical, one sampled), five
    // words, and crucially TWO distinct targets per (style, word) source:
    // a generator that ignores the content condition cannot fit both
    // targets of the same source image, so reconstruction pressure forces
    // it to read the content features.
    {
        use stedit_core::synth::{render_pair, sample_style_with, BgKind, PairEntry, StyleParams};
        use stedit_tensor::Rng;
        let simple_style = |k: u64| -> StyleParams {
            let mut sseed = Rng::stream(seed, &[900 + k]).next_u64();
            let mut best = (0.0f32, sseed);
            for _ in 0..4096 {
                let lum = stedit_core::synth::background::base_luminance(&BgKind::Solid, sseed);
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
        let styles_list = vec![
            simple_style(0),
            sample_style_with(&synth_profile, Rng::stream(seed, &[1]).next_u64()),
        ];
        let out = dir.path().join("synth");
        std::fs::create_dir_all(out.join("images")).unwrap();
        let mut entries = Vec::new();
        let mut pair_idx = 0usize;
        for style in &styles_list {
            for k in 0..5usize {
                for step in [1usize, 2] {
                    let wa = words[k].clone();
                    let wb = words[(k + step) % 5].clone();
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
        }
        Manifest { seed, entries }.save(&out.join("manifest.json")).unwrap();
    }
    generate_dataset(&words, 6, &dir.path().join("real"), seed + 1, &real_profile, &reg).unwrap();
    let cfg = TrainConfig {
        total_iters: iters,
        seed,
        checkpoint_every: 1000,
        ..TrainConfig::default()
    };
    let mcfg = ModelConfig::default();
    let codec = CharsetCodec::default_alphanumeric();
    let mut t = Trainer::new(
        cfg,
        mcfg.clone(),
        codec.clone(),
        &dir.path().join("synth/manifest.json"),
        &dir.path().join("real/manifest.json"),
        None,
    )
    .unwrap();
    let out = dir.path().join("run");
    let t0 = std::time::Instant::now();
    let summary = t.train(&out).unwrap();
    println!(
        "trained {iters} iters in {:.1} min; total_eg_r first100 {:.4} last100 {:.4}",
        t0.elapsed().as_secs_f64() / 60.0,
        summary.mean_total_first_100,
        summary.mean_total_last_100
    );

    let model = Model { cfg: mcfg.clone(), codec: codec.clone(), store: t.store.clone() };
    let (manifest, base) = Manifest::load(&dir.path().join("synth/manifest.json")).unwrap();

    // Recognizer accuracy on the 40 training images.
    let mut imgs = Vec::new();
    let mut texts = Vec::new();
    for e in &manifest.entries {
        imgs.push(TextImage::load_png(&base.join(&e.path_a)).unwrap());
        texts.push(e.text_a.clone());
        imgs.push(TextImage::load_png(&base.join(&e.path_b)).unwrap());
        texts.push(e.text_b.clone());
    }
    let decoded = model.read_texts(&imgs);
    let acc = decoded.iter().zip(&texts).filter(|(a, b)| a == b).count() as f64 / texts.len() as f64;
    println!("train-set recognizer accuracy: {acc:.3}");
    for (d, t_) in decoded.iter().zip(&texts).take(6) {
        println!("  read {d:?} want {t_:?}");
    }

    // Paired reconstruction L1 (style from a, content from b, target b).
    let mut tape = stedit_tensor::Tape::<f32>::new();
    let (nets, _) = bind_nets(&mut tape, &model.store, &mcfg, Trainable::NONE);
    let styles: Vec<TextImage> = manifest.entries.iter().map(|e| TextImage::load_png(&base.join(&e.path_a)).unwrap()).collect();
    let targets: Vec<TextImage> = manifest.entries.iter().map(|e| TextImage::load_png(&base.join(&e.path_b)).unwrap()).collect();
    let xa = image_batch_const(&mut tape, &styles);
    let xb = image_batch_const(&mut tape, &targets);
    let maps = nets.enc.trunk(&mut tape, xa);
    let (_, ct) = {
        let m = nets.enc.trunk(&mut tape, xb);
        let c = nets.enc.content(&mut tape, m[3]);
        (m, c)
    };
    let fake = nets.gen.forward(&mut tape, &maps, ct);
    let l1 = tape.l1_diff_mean(fake, xb);
    println!("reconstruction L1: {:.4}", tape.val(l1).item());

    // Cross-combination edits read back with the run's own recognizer.
    let mut styles_rep = Vec::new();
    let mut cross = Vec::new();
    for (i, e) in manifest.entries.iter().enumerate() {
        for w in &words {
            if *w != e.text_a {
                styles_rep.push(styles[i].clone());
                cross.push(w.clone());
            }
        }
    }
    let edits = model.edit_batch(&styles_rep, &cross, &reg).unwrap();
    let read = model.read_texts(&edits);
    let acc_edit = read.iter().zip(&cross).filter(|(a, b)| a == b).count() as f64 / cross.len() as f64;
    println!("cross-edit accuracy over {} combos (own recognizer): {acc_edit:.3}", cross.len());
    for (r, c) in read.iter().zip(&cross).take(12) {
        println!("  edit-> {r:?} want {c:?}");
    }
}
