//! Pixel metrics: PSNR and single-scale SSIM for unit-range RGB images.

use crate::image::{TextImage, IMG_H, IMG_W};

/// Peak signal-to-noise ratio in dB for unit dynamic range; +inf for
/// identical images.
pub fn psnr(a: &TextImage, b: &TextImage) -> f64 {
    let mut se = 0f64;
    for (&x, &y) in a.pixels.iter().zip(&b.pixels) {
        let d = (x - y) as f64;
        se += d * d;
    }
    let mse = se / a.pixels.len() as f64;
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    }
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

fn gaussian_window() -> Vec<f64> {
    let r = SSIM_WINDOW / 2;
    let mut w = Vec::with_capacity(SSIM_WINDOW * SSIM_WINDOW);
    let mut sum = 0f64;
    for y in 0..SSIM_WINDOW {
        for x in 0..SSIM_WINDOW {
            let dy = y as f64 - r as f64;
            let dx = x as f64 - r as f64;
            let v = (-(dx * dx + dy * dy) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
            w.push(v);
            sum += v;
        }
    }
    for v in w.iter_mut() {
        *v /= sum;
    }
    w
}

/// Mean single-scale SSIM over valid window positions, averaged across the
/// three channels. SSIM(x, x) = 1 exactly.
pub fn ssim(a: &TextImage, b: &TextImage) -> f64 {
    let w = gaussian_window();
    let r = SSIM_WINDOW / 2;
    let mut total = 0f64;
    let mut count = 0usize;
    for c in 0..3 {
        for cy in r..IMG_H - r {
            for cx in r..IMG_W - r {
                let mut mx = 0f64;
                let mut my = 0f64;
                let mut mxx = 0f64;
                let mut myy = 0f64;
                let mut mxy = 0f64;
                let mut wi = 0usize;
                for dy in 0..SSIM_WINDOW {
                    for dx in 0..SSIM_WINDOW {
                        let y = cy + dy - r;
                        let x = cx + dx - r;
                        let ww = w[wi];
                        wi += 1;
                        let xv = a.get(c, y, x) as f64;
                        let yv = b.get(c, y, x) as f64;
                        mx += ww * xv;
                        my += ww * yv;
                        mxx += ww * xv * xv;
                        myy += ww * yv * yv;
                        mxy += ww * xv * yv;
                    }
                }
                let vx = mxx - mx * mx;
                let vy = myy - my * my;
                let cxy = mxy - mx * my;
                let s = ((2.0 * mx * my + SSIM_C1) * (2.0 * cxy + SSIM_C2))
                    / ((mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2));
                total += s;
                count += 1;
            }
        }
    }
    total / count as f64
}

/// Mean per-pixel variance across a set of images.
pub fn mean_pixel_variance(images: &[TextImage]) -> f64 {
    let n = images.len();
    if n < 2 {
        return 0.0;
    }
    let len = images[0].pixels.len();
    let mut total = 0f64;
    for i in 0..len {
        let mut mean = 0f64;
        for img in images {
            mean += img.pixels[i] as f64;
        }
        mean /= n as f64;
        let mut var = 0f64;
        for img in images {
            let d = img.pixels[i] as f64 - mean;
            var += d * d;
        }
        total += var / n as f64;
    }
    total / len as f64
}
