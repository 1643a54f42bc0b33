//! Procedural backgrounds: solid fills, two-stop linear gradients and
//! value-noise textures, all derived from the style seed.

use crate::synth::style::BgKind;
use stedit_tensor::Rng;

pub fn luminance(c: [f32; 3]) -> f32 {
    0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]
}

fn base_color(kind: &BgKind, seed: u64) -> [f32; 3] {
    let mut rng = Rng::stream_tagged(seed, "bg-base", &[]);
    let mut c = [0f32; 3];
    for v in c.iter_mut() {
        *v = rng.next_f64() as f32;
    }
    match kind {
        BgKind::Solid | BgKind::Gradient | BgKind::Texture { .. } => c,
    }
}

pub fn base_luminance(kind: &BgKind, seed: u64) -> f32 {
    match kind {
        BgKind::Solid => luminance(base_color(kind, seed)),
        BgKind::Gradient => {
            let a = base_color(kind, seed);
            let b = second_color(seed);
            luminance([
                0.5 * (a[0] + b[0]),
                0.5 * (a[1] + b[1]),
                0.5 * (a[2] + b[2]),
            ])
        }
        BgKind::Texture { .. } => luminance(base_color(kind, seed)),
    }
}

fn second_color(seed: u64) -> [f32; 3] {
    let mut rng = Rng::stream_tagged(seed, "bg-second", &[]);
    let mut c = [0f32; 3];
    for v in c.iter_mut() {
        *v = rng.next_f64() as f32;
    }
    c
}

/// Smooth value noise in [0,1].
fn value_noise(seed: u64, octave: u64, x: f32, y: f32) -> f32 {
    let xi = x.floor() as i64;
    let yi = y.floor() as i64;
    let fx = x - xi as f32;
    let fy = y - yi as f32;
    let sx = fx * fx * (3.0 - 2.0 * fx);
    let sy = fy * fy * (3.0 - 2.0 * fy);
    let corner = |dx: i64, dy: i64| -> f32 {
        let mut r = Rng::stream_tagged(
            seed,
            "bg-noise",
            &[octave, (xi + dx) as u64, (yi + dy) as u64],
        );
        r.next_f64() as f32
    };
    let v00 = corner(0, 0);
    let v10 = corner(1, 0);
    let v01 = corner(0, 1);
    let v11 = corner(1, 1);
    let a = v00 + (v10 - v00) * sx;
    let b = v01 + (v11 - v01) * sx;
    a + (b - a) * sy
}

/// Render the background into a CHW f32 buffer.
pub fn render(kind: &BgKind, seed: u64, h: usize, w: usize) -> Vec<f32> {
    let mut out = vec![0f32; 3 * h * w];
    match kind {
        BgKind::Solid => {
            let c = base_color(kind, seed);
            for ch in 0..3 {
                out[ch * h * w..(ch + 1) * h * w].fill(c[ch]);
            }
        }
        BgKind::Gradient => {
            let c0 = base_color(kind, seed);
            let c1 = second_color(seed);
            let mut rng = Rng::stream_tagged(seed, "bg-angle", &[]);
            let theta = rng.range_f64(0.0, std::f64::consts::PI) as f32;
            let (dx, dy) = (theta.cos(), theta.sin());
            let diag = (w as f32 * dx.abs() + h as f32 * dy.abs()).max(1.0);
            for y in 0..h {
                for x in 0..w {
                    let proj = (x as f32 * dx + y as f32 * dy + diag) % diag / diag;
                    for ch in 0..3 {
                        out[(ch * h + y) * w + x] = c0[ch] + (c1[ch] - c0[ch]) * proj;
                    }
                }
            }
        }
        BgKind::Texture { id } => {
            let c = base_color(kind, seed);
            let scale = match id % 3 {
                0 => 12.0,
                1 => 24.0,
                _ => 48.0,
            };
            let amp = 0.28;
            for y in 0..h {
                for x in 0..w {
                    let n1 = value_noise(seed, 0, x as f32 / scale, y as f32 / scale);
                    let n2 = value_noise(seed, 1, x as f32 / scale * 2.0, y as f32 / scale * 2.0);
                    let n = (0.65 * n1 + 0.35 * n2 - 0.5) * 2.0;
                    for ch in 0..3 {
                        out[(ch * h + y) * w + x] = (c[ch] + amp * n).clamp(0.0, 1.0);
                    }
                }
            }
        }
    }
    out
}
