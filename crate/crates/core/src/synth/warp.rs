//! Geometric warps (rotation, perspective), Gaussian blur and the final
//! box-filter downscale.

/// Bilinear sample with zero outside the canvas.
fn sample(buf: &[f32], h: usize, w: usize, x: f32, y: f32) -> f32 {
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (x0, y0) = (x0 as isize, y0 as isize);
    let at = |xx: isize, yy: isize| -> f32 {
        if xx < 0 || yy < 0 || xx >= w as isize || yy >= h as isize {
            0.0
        } else {
            buf[yy as usize * w + xx as usize]
        }
    };
    let a = at(x0, y0) * (1.0 - fx) + at(x0 + 1, y0) * fx;
    let b = at(x0, y0 + 1) * (1.0 - fx) + at(x0 + 1, y0 + 1) * fx;
    a * (1.0 - fy) + b * fy
}

/// Rotate about the canvas center by `deg` (inverse mapping).
pub fn rotate(alpha: &[f32], h: usize, w: usize, deg: f32) -> Vec<f32> {
    if deg == 0.0 {
        return alpha.to_vec();
    }
    let rad = deg.to_radians();
    let (s, c) = rad.sin_cos();
    let (cx, cy) = (w as f32 * 0.5, h as f32 * 0.5);
    let mut out = vec![0f32; h * w];
    for y in 0..h {
        for x in 0..w {
            let dx = x as f32 + 0.5 - cx;
            let dy = y as f32 + 0.5 - cy;
            let sx = cx + c * dx + s * dy - 0.5;
            let sy = cy - s * dx + c * dy - 0.5;
            out[y * w + x] = sample(alpha, h, w, sx, sy);
        }
    }
    out
}

/// Solve the homography mapping the four `src` points to the four `dst`
/// points (normalized coordinates), via the standard 8x8 linear system.
fn homography(src: &[[f32; 2]; 4], dst: &[[f32; 2]; 4]) -> [f64; 9] {
    let mut a = [[0f64; 9]; 8];
    for i in 0..4 {
        let (x, y) = (src[i][0] as f64, src[i][1] as f64);
        let (u, v) = (dst[i][0] as f64, dst[i][1] as f64);
        a[2 * i] = [x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, u];
        a[2 * i + 1] = [0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y, v];
    }
    // Gaussian elimination on [A | b] where h22 = 1.
    let mut m = [[0f64; 9]; 8];
    for (row, arow) in m.iter_mut().zip(&a) {
        row[..8].copy_from_slice(&arow[..8]);
        row[8] = arow[8];
    }
    for col in 0..8 {
        let mut piv = col;
        for r in col + 1..8 {
            if m[r][col].abs() > m[piv][col].abs() {
                piv = r;
            }
        }
        m.swap(col, piv);
        let d = m[col][col];
        if d.abs() < 1e-12 {
            continue;
        }
        for r in 0..8 {
            if r == col {
                continue;
            }
            let f = m[r][col] / d;
            for k in col..9 {
                m[r][k] -= f * m[col][k];
            }
        }
    }
    let mut hvec = [0f64; 9];
    for i in 0..8 {
        hvec[i] = if m[i][i].abs() < 1e-12 {
            0.0
        } else {
            m[i][8] / m[i][i]
        };
    }
    hvec[8] = 1.0;
    hvec
}

fn invert3(h: &[f64; 9]) -> [f64; 9] {
    let (a, b, c, d, e, f, g, hh, i) =
        (h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let det = a * (e * i - f * hh) - b * (d * i - f * g) + c * (d * hh - e * g);
    let inv_det = if det.abs() < 1e-12 { 0.0 } else { 1.0 / det };
    [
        (e * i - f * hh) * inv_det,
        (c * hh - b * i) * inv_det,
        (b * f - c * e) * inv_det,
        (f * g - d * i) * inv_det,
        (a * i - c * g) * inv_det,
        (c * d - a * f) * inv_det,
        (d * hh - e * g) * inv_det,
        (b * g - a * hh) * inv_det,
        (a * e - b * d) * inv_det,
    ]
}

/// Perspective warp given corner offsets (fractions of dims, order TL TR BR
/// BL): the unit square is mapped onto the displaced quad.
pub fn perspective(alpha: &[f32], h: usize, w: usize, offsets: &[[f32; 2]; 4]) -> Vec<f32> {
    if offsets.iter().all(|c| c[0] == 0.0 && c[1] == 0.0) {
        return alpha.to_vec();
    }
    let unit = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    let mut moved = unit;
    for i in 0..4 {
        moved[i][0] += offsets[i][0];
        moved[i][1] += offsets[i][1];
    }
    let fwd = homography(&unit, &moved);
    let inv = invert3(&fwd);
    let mut out = vec![0f32; h * w];
    for y in 0..h {
        for x in 0..w {
            let u = (x as f32 + 0.5) / w as f32;
            let v = (y as f32 + 0.5) / h as f32;
            let (uf, vf) = (u as f64, v as f64);
            let den = inv[6] * uf + inv[7] * vf + inv[8];
            if den.abs() < 1e-9 {
                continue;
            }
            let sx = ((inv[0] * uf + inv[1] * vf + inv[2]) / den) as f32 * w as f32 - 0.5;
            let sy = ((inv[3] * uf + inv[4] * vf + inv[5]) / den) as f32 * h as f32 - 0.5;
            out[y * w + x] = sample(alpha, h, w, sx, sy);
        }
    }
    out
}

/// Separable Gaussian blur with edge replication, applied per channel of a
/// CHW buffer. Sigma in pixels of this buffer's scale.
pub fn gaussian_blur_chw(img: &[f32], c: usize, h: usize, w: usize, sigma: f32) -> Vec<f32> {
    if sigma <= 1e-4 {
        return img.to_vec();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel = Vec::with_capacity(2 * radius as usize + 1);
    let inv2s2 = 1.0 / (2.0 * sigma * sigma);
    let mut sum = 0f32;
    for i in -radius..=radius {
        let v = (-(i * i) as f32 * inv2s2).exp();
        kernel.push(v);
        sum += v;
    }
    for k in kernel.iter_mut() {
        *k /= sum;
    }
    let mut tmp = vec![0f32; img.len()];
    let mut out = vec![0f32; img.len()];
    for ch in 0..c {
        let src = &img[ch * h * w..(ch + 1) * h * w];
        let t = &mut tmp[ch * h * w..(ch + 1) * h * w];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0f32;
                for (ki, &kv) in kernel.iter().enumerate() {
                    let xx = (x as isize + ki as isize - radius).clamp(0, w as isize - 1);
                    acc += src[y * w + xx as usize] * kv;
                }
                t[y * w + x] = acc;
            }
        }
        let o = &mut out[ch * h * w..(ch + 1) * h * w];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0f32;
                for (ki, &kv) in kernel.iter().enumerate() {
                    let yy = (y as isize + ki as isize - radius).clamp(0, h as isize - 1);
                    acc += t[yy as usize * w + x] * kv;
                }
                o[y * w + x] = acc;
            }
        }
    }
    out
}

/// 2x2 box-filter downscale of a CHW buffer.
pub fn downscale2_chw(img: &[f32], c: usize, h: usize, w: usize) -> Vec<f32> {
    assert_eq!(h % 2, 0);
    assert_eq!(w % 2, 0);
    let (ho, wo) = (h / 2, w / 2);
    let mut out = vec![0f32; c * ho * wo];
    for ch in 0..c {
        let src = &img[ch * h * w..(ch + 1) * h * w];
        let dst = &mut out[ch * ho * wo..(ch + 1) * ho * wo];
        for y in 0..ho {
            for x in 0..wo {
                let s = src[2 * y * w + 2 * x]
                    + src[2 * y * w + 2 * x + 1]
                    + src[(2 * y + 1) * w + 2 * x]
                    + src[(2 * y + 1) * w + 2 * x + 1];
                dst[y * wo + x] = s * 0.25;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_homography_for_zero_offsets() {
        let mut buf = vec![0f32; 16 * 16];
        buf[5 * 16 + 7] = 1.0;
        let out = perspective(&buf, 16, 16, &[[0.0, 0.0]; 4]);
        assert_eq!(out, buf);
    }

    #[test]
    fn rotation_moves_mass() {
        let mut buf = vec![0f32; 32 * 32];
        for x in 4..28 {
            buf[8 * 32 + x] = 1.0;
        }
        let out = rotate(&buf, 32, 32, 15.0);
        assert_ne!(out, buf);
        let total_in: f32 = buf.iter().sum();
        let total_out: f32 = out.iter().sum();
        assert!((total_in - total_out).abs() / total_in < 0.25);
    }

    #[test]
    fn blur_preserves_constant_field() {
        let buf = vec![0.7f32; 3 * 8 * 8];
        let out = gaussian_blur_chw(&buf, 3, 8, 8, 1.2);
        for v in out {
            assert!((v - 0.7).abs() < 1e-5);
        }
    }

    #[test]
    fn downscale_averages() {
        let mut buf = vec![0f32; 4 * 4];
        buf[0] = 1.0;
        buf[1] = 1.0;
        buf[4] = 1.0;
        buf[5] = 1.0;
        let out = downscale2_chw(&buf, 1, 4, 4);
        assert_eq!(out[0], 1.0);
        assert_eq!(out[1], 0.0);
    }
}
