//! Data-pipeline contracts: batch cardinality, determinism, epoch coverage,
//! cutout band bookkeeping, codec round trips.

use proptest::prelude::*;
use std::path::{Path, PathBuf};
use stedit_core::data::{BatchSampler, CharsetCodec, CutoutSpec, PairStyleMode};
use stedit_core::image::{IMG_H, IMG_W};
use stedit_core::synth::{font::FontRegistry, generate_dataset, SamplerProfile};

fn assets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets")
}

fn registry() -> FontRegistry {
    FontRegistry::load(&assets().join("fonts/registry.json")).unwrap()
}

fn corpus() -> Vec<String> {
    ["cat", "dog", "sun", "map", "fox", "owl", "pig", "rat", "ink", "oak"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

struct Fixture {
    _dir: tempfile::TempDir,
    synth: PathBuf,
    real: PathBuf,
}

fn make_fixture(n_synth: usize, n_real: usize) -> Fixture {
    let reg = registry();
    let dir = tempfile::tempdir().unwrap();
    let synth_dir = dir.path().join("synth");
    let real_dir = dir.path().join("real");
    let profile = SamplerProfile::uniform(reg.ids());
    generate_dataset(&corpus(), n_synth, &synth_dir, 7, &profile, &reg).unwrap();
    generate_dataset(&corpus(), n_real, &real_dir, 8, &profile, &reg).unwrap();
    Fixture {
        synth: synth_dir.join("manifest.json"),
        real: real_dir.join("manifest.json"),
        _dir: dir,
    }
}

fn sampler(fx: &Fixture, bs: usize, br: usize) -> BatchSampler {
    BatchSampler::new(
        &fx.synth,
        &fx.real,
        bs,
        br,
        CharsetCodec::default_alphanumeric(),
        CutoutSpec::default(),
        99,
        PairStyleMode::Same,
        None,
    )
    .unwrap()
}

#[test]
fn batch_cardinality_and_ratio() {
    let fx = make_fixture(12, 4);
    let s = sampler(&fx, 9, 3);
    let b = s.make_batch(0).unwrap();
    assert_eq!(b.synth_style.len(), 9);
    assert_eq!(b.synth_target.len(), 9);
    assert_eq!(b.synth_content_src.len(), 9);
    assert_eq!(b.real_clean.len(), 3);
    assert_eq!(b.real_noisy.len(), 3);
    assert_eq!(b.cut_positions.len(), 3);
    assert_eq!(b.synth_labels_source.len(), 9);
    assert_eq!(b.synth_labels_target.len(), 9);
}

#[test]
fn same_iteration_reproduces_batch() {
    let fx = make_fixture(12, 4);
    let s = sampler(&fx, 9, 3);
    let a = s.make_batch(5).unwrap();
    let b = s.make_batch(5).unwrap();
    assert_eq!(a.synth_ids, b.synth_ids);
    assert_eq!(a.real_ids, b.real_ids);
    assert_eq!(a.cut_positions, b.cut_positions);
    for (x, y) in a.synth_style.iter().zip(&b.synth_style) {
        assert_eq!(x.pixels, y.pixels);
    }
    for (x, y) in a.real_noisy.iter().zip(&b.real_noisy) {
        assert_eq!(x.pixels, y.pixels);
    }
}

#[test]
fn epoch_sampling_without_replacement() {
    // 30 pairs, batch 9: within one epoch (first 30 draws) every pair
    // appears exactly once; across two epochs at most twice.
    let fx = make_fixture(30, 4);
    let s = sampler(&fx, 9, 3);
    let mut counts = vec![0usize; 30];
    let mut first_epoch_counts = vec![0usize; 30];
    let mut draw_no = 0usize;
    for iter in 0..4u64 {
        let b = s.make_batch(iter).unwrap();
        for &id in &b.synth_ids {
            counts[id] += 1;
            if draw_no < 30 {
                first_epoch_counts[id] += 1;
            }
            draw_no += 1;
        }
    }
    // 36 draws = one full epoch + 6 draws of the next.
    assert!(counts.iter().all(|&c| c <= 2));
    assert_eq!(first_epoch_counts.iter().max(), Some(&1));
}

#[test]
fn noisy_differs_only_inside_recorded_band() {
    let fx = make_fixture(8, 6);
    let s = sampler(&fx, 4, 3);
    for iter in 0..8u64 {
        let b = s.make_batch(iter).unwrap();
        for ((clean, noisy), &left) in
            b.real_clean.iter().zip(&b.real_noisy).zip(&b.cut_positions)
        {
            assert!(left + 42 <= IMG_W);
            for c in 0..3 {
                for y in 0..IMG_H {
                    for x in 0..IMG_W {
                        let inside = x >= left && x < left + 42;
                        if !inside {
                            assert_eq!(clean.get(c, y, x), noisy.get(c, y, x));
                        } else {
                            assert_eq!(noisy.get(c, y, x), 0.0);
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn different_style_mode_restyles_content_source() {
    let fx = make_fixture(6, 4);
    let s = BatchSampler::new(
        &fx.synth,
        &fx.real,
        4,
        2,
        CharsetCodec::default_alphanumeric(),
        CutoutSpec::default(),
        99,
        PairStyleMode::Different,
        Some((registry(), SamplerProfile::uniform(registry().ids()))),
    )
    .unwrap();
    let b = s.make_batch(0).unwrap();
    let mut any_diff = false;
    for (tgt, src) in b.synth_target.iter().zip(&b.synth_content_src) {
        assert_eq!(tgt.label, src.label, "restyled content must keep the text");
        if tgt.pixels != src.pixels {
            any_diff = true;
        }
    }
    assert!(any_diff, "restyled content sources should differ from targets");
    // Still deterministic.
    let b2 = s.make_batch(0).unwrap();
    for (x, y) in b.synth_content_src.iter().zip(&b2.synth_content_src) {
        assert_eq!(x.pixels, y.pixels);
    }
}

#[test]
fn real_branch_discards_labels() {
    let fx = make_fixture(6, 4);
    let s = sampler(&fx, 4, 2);
    let b = s.make_batch(0).unwrap();
    for img in &b.real_clean {
        assert!(img.label.is_none());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn codec_roundtrip(word in "[a-zA-Z0-9]{1,24}") {
        let codec = CharsetCodec::default_alphanumeric();
        let enc = codec.encode(&word).unwrap();
        prop_assert_eq!(enc.len(), 25);
        prop_assert_eq!(codec.decode(&enc), word);
    }

    #[test]
    fn codec_single_eos(word in "[a-zA-Z0-9]{0,24}") {
        let codec = CharsetCodec::default_alphanumeric();
        let enc = codec.encode(&word).unwrap();
        let eos_count = enc.iter().filter(|&&i| i == stedit_core::data::EOS).count();
        prop_assert_eq!(eos_count, 1);
        let eos_pos = enc.iter().position(|&i| i == stedit_core::data::EOS).unwrap();
        prop_assert!(enc[eos_pos + 1..].iter().all(|&i| i == stedit_core::data::PAD));
    }
}
