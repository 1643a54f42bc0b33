//! Glyph rasterization onto the working canvas: stroke-distance coverage,
//! advance-based layout and the sinusoidal baseline curve.

use crate::synth::font::FontSpec;
use crate::synth::glyphs;

/// Working canvas is 2x the final image in each dimension; the last render
/// stage box-filters it down.
pub const CANVAS_H: usize = 64;
pub const CANVAS_W: usize = 256;
/// Ratio of canvas resolution to final-image resolution.
pub const SUPERSAMPLE: f32 = 2.0;

const ADVANCE_EM: f32 = 1.0; // per glyph, in units of cap height
const AA_PX: f32 = 1.0;
const FIT_MARGIN: f32 = 0.94;

fn dist_to_segment(px: f32, py: f32, a: (f32, f32), b: (f32, f32)) -> f32 {
    let (ax, ay) = a;
    let (bx, by) = b;
    let (dx, dy) = (bx - ax, by - ay);
    let len2 = dx * dx + dy * dy;
    let t = if len2 <= 1e-12 {
        0.0
    } else {
        (((px - ax) * dx + (py - ay) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (ax + t * dx, ay + t * dy);
    ((px - cx).powi(2) + (py - cy).powi(2)).sqrt()
}

/// Rasterize `text` centered on the canvas, returning an ink-coverage map
/// (values in [0,1], canvas-sized). `cap_px` is the cap height in canvas
/// pixels; long words are shrunk uniformly to fit the canvas width.
pub fn rasterize_word(text: &str, font: &FontSpec, cap_px: f32) -> Vec<f32> {
    let n = text.chars().count() as f32;
    let natural_w = n * ADVANCE_EM * cap_px * font.width.max(0.2);
    let fit = (CANVAS_W as f32 * FIT_MARGIN / natural_w).min(1.0);
    let size = cap_px * fit;
    let unit = size / glyphs::CAP_HEIGHT;
    let advance = ADVANCE_EM * size * font.width.max(0.2);
    let total_w = n * advance;
    let x0 = (CANVAS_W as f32 - total_w) * 0.5;
    // Vertical centering on the mid-line between cap top and baseline.
    let mid_design = (glyphs::CAP_TOP + glyphs::BASELINE) * 0.5;
    let y_mid = CANVAS_H as f32 * 0.5;

    let mut alpha = vec![0f32; CANVAS_H * CANVAS_W];
    let radius = font.stroke_radius() * unit;
    for (gi, c) in text.chars().enumerate() {
        let Some(strokes) = font.styled_strokes(c) else {
            continue;
        };
        let gx = x0 + gi as f32 * advance;
        // Transform design coords to canvas coords.
        let segs: Vec<((f32, f32), (f32, f32))> = strokes
            .iter()
            .flat_map(|stroke| {
                stroke.windows(2).map(|wnd| {
                    let p = (
                        gx + wnd[0].0 * unit,
                        y_mid + (wnd[0].1 - mid_design) * unit,
                    );
                    let q = (
                        gx + wnd[1].0 * unit,
                        y_mid + (wnd[1].1 - mid_design) * unit,
                    );
                    (p, q)
                })
            })
            .collect();
        if segs.is_empty() {
            continue;
        }
        let mut min_x = f32::MAX;
        let mut max_x = f32::MIN;
        let mut min_y = f32::MAX;
        let mut max_y = f32::MIN;
        for &(p, q) in &segs {
            for (x, y) in [p, q] {
                min_x = min_x.min(x);
                max_x = max_x.max(x);
                min_y = min_y.min(y);
                max_y = max_y.max(y);
            }
        }
        let pad = radius + AA_PX;
        let xlo = ((min_x - pad).floor().max(0.0)) as usize;
        let xhi = ((max_x + pad).ceil().min(CANVAS_W as f32 - 1.0)) as usize;
        let ylo = ((min_y - pad).floor().max(0.0)) as usize;
        let yhi = ((max_y + pad).ceil().min(CANVAS_H as f32 - 1.0)) as usize;
        for y in ylo..=yhi {
            for x in xlo..=xhi {
                let (pxf, pyf) = (x as f32 + 0.5, y as f32 + 0.5);
                let mut d = f32::MAX;
                for &(p, q) in &segs {
                    d = d.min(dist_to_segment(pxf, pyf, p, q));
                    if d <= radius - AA_PX * 0.5 {
                        break;
                    }
                }
                let cov = ((radius + AA_PX * 0.5 - d) / AA_PX).clamp(0.0, 1.0);
                if cov > 0.0 {
                    let cell = &mut alpha[y * CANVAS_W + x];
                    *cell = cell.max(cov);
                }
            }
        }
    }
    alpha
}

/// Vertical sinusoidal baseline displacement: one half-period across the
/// width, amplitude given in canvas pixels. Samples the source column with
/// linear interpolation.
pub fn apply_curve(alpha: &[f32], amplitude_px: f32) -> Vec<f32> {
    if amplitude_px == 0.0 {
        return alpha.to_vec();
    }
    let mut out = vec![0f32; CANVAS_H * CANVAS_W];
    for x in 0..CANVAS_W {
        let t = x as f32 / (CANVAS_W - 1) as f32;
        let shift = amplitude_px * (std::f32::consts::PI * t).sin();
        for y in 0..CANVAS_H {
            let src = y as f32 - shift;
            let y0 = src.floor();
            let f = src - y0;
            let y0i = y0 as isize;
            let sample = |yy: isize| -> f32 {
                if yy < 0 || yy >= CANVAS_H as isize {
                    0.0
                } else {
                    alpha[yy as usize * CANVAS_W + x]
                }
            };
            out[y * CANVAS_W + x] = sample(y0i) * (1.0 - f) + sample(y0i + 1) * f;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::font::FontSpec;

    fn plain() -> FontSpec {
        FontSpec {
            name: "plain".into(),
            thickness: 1.0,
            slant: 0.0,
            width: 1.0,
            serif: false,
            omit: String::new(),
        }
    }

    #[test]
    fn word_marks_ink() {
        let a = rasterize_word("cat", &plain(), 40.0);
        assert!(a.iter().any(|&v| v > 0.5));
    }

    #[test]
    fn long_word_fits_canvas() {
        let a = rasterize_word("abcdefghijklmnopqrstuvwx", &plain(), 52.0);
        // No ink on the outermost columns.
        for y in 0..CANVAS_H {
            assert_eq!(a[y * CANVAS_W], 0.0);
            assert_eq!(a[y * CANVAS_W + CANVAS_W - 1], 0.0);
        }
        assert!(a.iter().any(|&v| v > 0.5));
    }

    #[test]
    fn curve_displaces_rows() {
        let a = rasterize_word("HHHH", &plain(), 40.0);
        let c = apply_curve(&a, 6.0);
        assert_ne!(a, c);
        // Zero amplitude is the identity.
        assert_eq!(apply_curve(&a, 0.0), a);
    }
}
