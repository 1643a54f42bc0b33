//! Fixed-size word images and PNG round-tripping.

use crate::error::DataError;
use std::io::BufWriter;
use std::path::Path;

pub const IMG_H: usize = 32;
pub const IMG_W: usize = 128;
pub const IMG_C: usize = 3;

/// A 32x128 RGB raster with values in [0,1], stored channel-major (CHW),
/// optionally carrying its ground-truth text.
#[derive(Clone, Debug, PartialEq)]
pub struct TextImage {
    pub pixels: Vec<f32>,
    pub label: Option<String>,
}

impl TextImage {
    pub fn new(pixels: Vec<f32>, label: Option<String>) -> Self {
        assert_eq!(pixels.len(), IMG_C * IMG_H * IMG_W);
        Self { pixels, label }
    }

    pub fn filled(v: f32) -> Self {
        Self {
            pixels: vec![v; IMG_C * IMG_H * IMG_W],
            label: None,
        }
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.pixels[(c * IMG_H + y) * IMG_W + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f32) {
        self.pixels[(c * IMG_H + y) * IMG_W + x] = v;
    }

    pub fn in_range(&self) -> bool {
        self.pixels.iter().all(|&v| (0.0..=1.0).contains(&v))
    }

    /// 8-bit quantization used for PNG output; deterministic.
    pub fn to_rgb8(&self) -> Vec<u8> {
        let mut out = vec![0u8; IMG_H * IMG_W * 3];
        for y in 0..IMG_H {
            for x in 0..IMG_W {
                for c in 0..3 {
                    let v = self.get(c, y, x).clamp(0.0, 1.0);
                    out[(y * IMG_W + x) * 3 + c] = (v * 255.0).round() as u8;
                }
            }
        }
        out
    }

    pub fn from_rgb8(data: &[u8], label: Option<String>) -> Self {
        assert_eq!(data.len(), IMG_H * IMG_W * 3);
        let mut px = vec![0f32; IMG_C * IMG_H * IMG_W];
        for y in 0..IMG_H {
            for x in 0..IMG_W {
                for c in 0..3 {
                    px[(c * IMG_H + y) * IMG_W + x] = data[(y * IMG_W + x) * 3 + c] as f32 / 255.0;
                }
            }
        }
        Self { pixels: px, label }
    }

    pub fn save_png(&self, path: &Path) -> Result<(), DataError> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let file = std::fs::File::create(path)?;
        let w = BufWriter::new(file);
        let mut enc = png::Encoder::new(w, IMG_W as u32, IMG_H as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc
            .write_header()
            .map_err(|e| DataError::Image(e.to_string()))?;
        writer
            .write_image_data(&self.to_rgb8())
            .map_err(|e| DataError::Image(e.to_string()))?;
        Ok(())
    }

    pub fn load_png(path: &Path) -> Result<Self, DataError> {
        let file = std::fs::File::open(path)?;
        let decoder = png::Decoder::new(file);
        let mut reader = decoder
            .read_info()
            .map_err(|e| DataError::Image(e.to_string()))?;
        let mut buf = vec![0u8; reader.output_buffer_size()];
        let info = reader
            .next_frame(&mut buf)
            .map_err(|e| DataError::Image(e.to_string()))?;
        if info.width as usize != IMG_W || info.height as usize != IMG_H {
            return Err(DataError::Image(format!(
                "expected {IMG_W}x{IMG_H}, got {}x{}",
                info.width, info.height
            )));
        }
        let rgb: Vec<u8> = match info.color_type {
            png::ColorType::Rgb => buf[..IMG_W * IMG_H * 3].to_vec(),
            png::ColorType::Rgba => buf[..IMG_W * IMG_H * 4]
                .chunks_exact(4)
                .flat_map(|p| [p[0], p[1], p[2]])
                .collect(),
            png::ColorType::Grayscale => buf[..IMG_W * IMG_H]
                .iter()
                .flat_map(|&v| [v, v, v])
                .collect(),
            other => {
                return Err(DataError::Image(format!(
                    "unsupported png color type {other:?}"
                )))
            }
        };
        Ok(Self::from_rgb8(&rgb, None))
    }

    /// Pixels as an NCHW slice for a batch of one.
    pub fn chw(&self) -> &[f32] {
        &self.pixels
    }
}

/// Pack images into one NCHW f32 buffer.
pub fn batch_chw(images: &[&TextImage]) -> Vec<f32> {
    let mut out = Vec::with_capacity(images.len() * IMG_C * IMG_H * IMG_W);
    for im in images {
        out.extend_from_slice(&im.pixels);
    }
    out
}
