//! Model hyperparameters shared by all four networks.

use serde::{Deserialize, Serialize};
use stedit_tensor::rng::fnv1a;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub in_channels: usize,
    pub image_h: usize,
    pub image_w: usize,
    /// Encoder stage widths.
    pub stage_channels: [usize; 4],
    /// (h, w) stride per encoder stage.
    pub stage_strides: [(usize, usize); 4],
    pub content_dim: usize,
    pub recurrent_hidden: usize,
    pub max_decode_len: usize,
    /// Character classes including GO/EOS/PAD.
    pub charset_size: usize,
    pub disc_patch_grid: (usize, usize),
    pub lambda_adv: f64,
    // Internal head sizes.
    pub attn_dim: usize,
    pub embed_dim: usize,
    pub disc_channels: [usize; 3],
    pub disc_cond_channels: usize,
    pub gen_fuse_channels: usize,
    pub gen_stage_channels: [usize; 3],
    pub gen_head_channels: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            in_channels: 3,
            image_h: 32,
            image_w: 128,
            stage_channels: [32, 64, 128, 256],
            stage_strides: [(2, 2), (2, 2), (2, 1), (2, 1)],
            content_dim: 256,
            recurrent_hidden: 256,
            max_decode_len: 25,
            charset_size: 65,
            disc_patch_grid: (4, 16),
            lambda_adv: 0.1,
            attn_dim: 128,
            embed_dim: 64,
            disc_channels: [32, 64, 128],
            disc_cond_channels: 16,
            gen_fuse_channels: 192,
            gen_stage_channels: [96, 64, 32],
            gen_head_channels: 12,
        }
    }
}

impl ModelConfig {
    /// A structurally complete but narrow configuration for numerical tests.
    pub fn tiny() -> Self {
        Self {
            stage_channels: [6, 8, 10, 12],
            content_dim: 16,
            recurrent_hidden: 14,
            attn_dim: 10,
            embed_dim: 8,
            disc_channels: [6, 8, 10],
            disc_cond_channels: 4,
            gen_fuse_channels: 12,
            gen_stage_channels: [10, 8, 6],
            gen_head_channels: 5,
            ..Self::default()
        }
    }

    pub fn stride_product(&self) -> (usize, usize) {
        self.stage_strides
            .iter()
            .fold((1, 1), |(h, w), &(sh, sw)| (h * sh, w * sw))
    }

    /// Content sequence length: final-stage width.
    pub fn content_len(&self) -> usize {
        self.image_w / self.stride_product().1
    }

    /// Spatial dims of the deepest stage map.
    pub fn bottleneck(&self) -> (usize, usize) {
        let (ph, pw) = self.stride_product();
        (self.image_h / ph, self.image_w / pw)
    }

    /// (channels, h, w) of each encoder stage map.
    pub fn stage_shapes(&self) -> [(usize, usize, usize); 4] {
        let mut out = [(0, 0, 0); 4];
        let (mut h, mut w) = (self.image_h, self.image_w);
        for i in 0..4 {
            h /= self.stage_strides[i].0;
            w /= self.stage_strides[i].1;
            out[i] = (self.stage_channels[i], h, w);
        }
        out
    }

    pub fn validate(&self) -> Result<(), String> {
        let (ph, pw) = self.stride_product();
        if self.image_h % ph != 0 || self.image_w % pw != 0 {
            return Err(format!(
                "image {}x{} not divisible by stride product {}x{}",
                self.image_h, self.image_w, ph, pw
            ));
        }
        let grid = (self.image_h / 8, self.image_w / 8);
        if grid != self.disc_patch_grid {
            return Err(format!(
                "disc_patch_grid {:?} inconsistent with image dims (expect {:?})",
                self.disc_patch_grid, grid
            ));
        }
        if self.charset_size < 4 {
            return Err("charset_size must cover specials plus one char".into());
        }
        Ok(())
    }

    /// Stable hash over the config and charset; stored in checkpoints and
    /// verified on load.
    pub fn config_hash(&self, charset: &[char]) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let cs: String = charset.iter().collect();
        format!("{:016x}", fnv1a(format!("{json}|{cs}").as_bytes()))
    }
}
