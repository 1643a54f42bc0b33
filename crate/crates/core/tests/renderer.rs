//! Renderer contracts: determinism, pairing, canonical content images,
//! dataset generation round trips.

use std::path::{Path, PathBuf};
use stedit_core::image::{TextImage, IMG_H, IMG_W};
use stedit_core::synth::{
    font::FontRegistry, generate_dataset, ink_fraction, render_content_image, render_pair,
    render_text, sample_style, style::StyleParams, BgKind, Manifest, SamplerProfile,
};

fn assets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets")
}

fn registry() -> FontRegistry {
    FontRegistry::load(&assets().join("fonts/registry.json")).unwrap()
}

fn neutral_style(seed: u64) -> StyleParams {
    StyleParams {
        font_id: 0,
        font_size_px: 20,
        fg_color: [0.05, 0.05, 0.1],
        bg_kind: BgKind::Solid,
        rotation_deg: 0.0,
        perspective: [[0.0, 0.0]; 4],
        curve_amplitude_px: 0.0,
        blur_sigma: 0.0,
        seed,
    }
}

#[test]
fn registry_has_at_least_ten_fonts() {
    assert!(registry().len() >= 10);
}

#[test]
fn render_is_deterministic() {
    let reg = registry();
    let mut style = neutral_style(7);
    style.rotation_deg = 8.0;
    style.blur_sigma = 0.7;
    style.curve_amplitude_px = 2.0;
    let a = render_text("cat", &style, &reg).unwrap();
    let b = render_text("cat", &style, &reg).unwrap();
    assert_eq!(a.pixels, b.pixels);
    assert_eq!(a.label.as_deref(), Some("cat"));
}

#[test]
fn render_marks_ink() {
    let reg = registry();
    let img = render_text("cat", &neutral_style(3), &reg).unwrap();
    assert!(ink_fraction(&img) > 0.0);
    assert!(img.in_range());
}

#[test]
fn rotation_changes_pixels() {
    let reg = registry();
    let base = neutral_style(3);
    let mut rot = base.clone();
    rot.rotation_deg = 10.0;
    let a = render_text("cat", &base, &reg).unwrap();
    let b = render_text("cat", &rot, &reg).unwrap();
    assert_ne!(a.pixels, b.pixels);
}

#[test]
fn pair_same_text_identical_different_text_differs() {
    let reg = registry();
    let s = neutral_style(11);
    let same = render_pair("dog", "dog", &s, &reg).unwrap();
    assert_eq!(same.image_a.pixels, same.image_b.pixels);
    let diff = render_pair("dog", "cat", &s, &reg).unwrap();
    assert_ne!(diff.image_a.pixels, diff.image_b.pixels);
    assert_eq!(diff.style, s);

    // Whole-pair determinism.
    let again = render_pair("dog", "cat", &s, &reg).unwrap();
    assert_eq!(diff.image_a.pixels, again.image_a.pixels);
    assert_eq!(diff.image_b.pixels, again.image_b.pixels);
}

#[test]
fn render_rejects_bad_text() {
    let reg = registry();
    let s = neutral_style(0);
    assert!(render_text("", &s, &reg).is_err());
    assert!(render_text("héllo", &s, &reg).is_err());
    assert!(render_text(&"a".repeat(25), &s, &reg).is_err());
}

#[test]
fn content_image_is_black_on_white_and_centered() {
    let reg = registry();
    let img = render_content_image("A", &reg).unwrap();
    // Corners are exactly white.
    for (y, x) in [(0, 0), (0, IMG_W - 1), (IMG_H - 1, 0), (IMG_H - 1, IMG_W - 1)] {
        for c in 0..3 {
            assert_eq!(img.get(c, y, x), 1.0);
        }
    }
    // Some pixel is near black.
    let mut min_v = 1.0f32;
    for y in 0..IMG_H {
        for x in 0..IMG_W {
            min_v = min_v.min(img.get(0, y, x) + img.get(1, y, x) + img.get(2, y, x));
        }
    }
    assert!(min_v < 0.15, "no dark glyph pixels, min sum {min_v}");
    // White-majority background.
    let white = img
        .pixels
        .chunks_exact(IMG_H * IMG_W)
        .next()
        .unwrap()
        .iter()
        .filter(|&&v| v == 1.0)
        .count();
    assert!(white as f32 / (IMG_H * IMG_W) as f32 > 0.6);
    // Determinism.
    let again = render_content_image("A", &reg).unwrap();
    assert_eq!(img.pixels, again.pixels);
}

#[test]
fn content_ink_grows_with_repetition() {
    let reg = registry();
    let count_non_white = |img: &TextImage| {
        let mut n = 0usize;
        for y in 0..IMG_H {
            for x in 0..IMG_W {
                if img.get(0, y, x) != 1.0 || img.get(1, y, x) != 1.0 || img.get(2, y, x) != 1.0 {
                    n += 1;
                }
            }
        }
        n
    };
    let one = render_content_image("A", &reg).unwrap();
    let four = render_content_image("AAAA", &reg).unwrap();
    assert!(count_non_white(&four) > count_non_white(&one));
}

#[test]
fn style_sampling_contracts() {
    let reg = registry();
    let a = sample_style(0, &reg);
    let b = sample_style(0, &reg);
    assert_eq!(a, b);
    let mut font_ids = std::collections::BTreeSet::new();
    for seed in 0..1000u64 {
        let s = sample_style(seed, &reg);
        assert!(s.rotation_deg >= -15.0 && s.rotation_deg <= 15.0);
        assert!(s.curve_amplitude_px >= 0.0 && s.curve_amplitude_px <= 4.0);
        assert!(s.blur_sigma >= 0.0 && s.blur_sigma <= 1.5);
        assert!((14..=26).contains(&s.font_size_px));
        for c in s.perspective.iter().flatten() {
            assert!(c.abs() <= 0.1);
        }
        s.validate().unwrap();
        font_ids.insert(s.font_id);
    }
    assert!(font_ids.len() >= 2);
}

#[test]
fn dataset_generation_and_pairing_roundtrip() {
    let reg = registry();
    let corpus: Vec<String> = ["cat", "dog", "sun", "map", "fox"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let profile = SamplerProfile::uniform(reg.ids());
    let m = generate_dataset(&corpus, 10, dir.path(), 42, &profile, &reg).unwrap();
    assert_eq!(m.entries.len(), 10);
    let images: Vec<_> = std::fs::read_dir(dir.path().join("images")).unwrap().collect();
    assert_eq!(images.len(), 20);

    // Same seed reproduces the manifest byte-for-byte.
    let dir2 = tempfile::tempdir().unwrap();
    generate_dataset(&corpus, 10, dir2.path(), 42, &profile, &reg).unwrap();
    let j1 = std::fs::read(dir.path().join("manifest.json")).unwrap();
    let j2 = std::fs::read(dir2.path().join("manifest.json")).unwrap();
    assert_eq!(j1, j2);

    // Reloading PNGs and re-rendering from stored params reproduces them
    // bit-exactly at 8-bit depth.
    let (loaded, base) = Manifest::load(&dir.path().join("manifest.json")).unwrap();
    for e in loaded.entries.iter().take(3) {
        let png_a = TextImage::load_png(&base.join(&e.path_a)).unwrap();
        let re_a = render_text(&e.text_a, &e.style, &reg).unwrap();
        assert_eq!(png_a.to_rgb8(), re_a.to_rgb8());
        let png_b = TextImage::load_png(&base.join(&e.path_b)).unwrap();
        let re_b = render_text(&e.text_b, &e.style, &reg).unwrap();
        assert_eq!(png_b.to_rgb8(), re_b.to_rgb8());
    }
}

#[test]
fn empty_dataset_is_valid() {
    let reg = registry();
    let corpus = vec!["cat".to_string()];
    let dir = tempfile::tempdir().unwrap();
    let m = generate_dataset(
        &corpus,
        0,
        dir.path(),
        1,
        &SamplerProfile::uniform(reg.ids()),
        &reg,
    )
    .unwrap();
    assert!(m.entries.is_empty());
    assert_eq!(
        std::fs::read_dir(dir.path().join("images")).unwrap().count(),
        0
    );
}

#[test]
fn empty_corpus_rejected() {
    let reg = registry();
    let dir = tempfile::tempdir().unwrap();
    let err = generate_dataset(
        &[],
        3,
        dir.path(),
        1,
        &SamplerProfile::uniform(reg.ids()),
        &reg,
    );
    assert!(err.is_err());
}

#[test]
fn png_roundtrip_preserves_quantized_pixels() {
    let reg = registry();
    let img = render_text("Zebra7", &sample_style(5, &reg), &reg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("x.png");
    img.save_png(&p).unwrap();
    let back = TextImage::load_png(&p).unwrap();
    assert_eq!(img.to_rgb8(), back.to_rgb8());
}
