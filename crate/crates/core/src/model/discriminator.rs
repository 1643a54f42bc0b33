//! Patch discriminator conditioned on a style reference image (channel
//! concatenation) and on the pooled content vector (projected and
//! broadcast as extra input channels). Emits a grid of per-patch realness
//! probabilities plus its intermediate activation maps.

use crate::model::config::ModelConfig;
use crate::model::layers::{conv, linear, norm, ConvH, LinH, NormH};
use crate::model::params::{Network, ParamSink};
use stedit_tensor::{Scalar, Tape, VarId};

pub const PROB_EPS: f64 = 1e-6;
const LEAKY: f64 = 0.2;

pub struct DiscOut {
    /// (N, 1, gh, gw) probabilities in the open interval (0,1).
    pub probs: VarId,
    /// Post-activation maps of every block before the score layer.
    pub feats: Vec<VarId>,
}

pub struct DiscriminatorNet {
    cond: LinH,
    c1: ConvH,
    c2: ConvH,
    c2n: NormH,
    c3: ConvH,
    c3n: NormH,
    score: ConvH,
    image_hw: (usize, usize),
}

impl DiscriminatorNet {
    pub fn build<S: Scalar, P: ParamSink<S>>(p: &mut P, cfg: &ModelConfig) -> Self {
        const NET: Network = Network::Discriminator;
        let [d1, d2, d3] = cfg.disc_channels;
        let cin = 2 * cfg.in_channels + cfg.disc_cond_channels;
        Self {
            cond: linear(p, "disc.cond", NET, cfg.disc_cond_channels, cfg.content_dim, true),
            c1: conv(p, "disc.c1", NET, d1, cin, (3, 3), (2, 2), (1, 1), true),
            c2: conv(p, "disc.c2", NET, d2, d1, (3, 3), (2, 2), (1, 1), false),
            c2n: norm(p, "disc.c2n", NET, d2),
            c3: conv(p, "disc.c3", NET, d3, d2, (3, 3), (2, 2), (1, 1), false),
            c3n: norm(p, "disc.c3n", NET, d3),
            score: conv(p, "disc.score", NET, 1, d3, (1, 1), (1, 1), (0, 0), true),
            image_hw: (cfg.image_h, cfg.image_w),
        }
    }

    /// candidate/style_ref: image batches in [0,1]; content: (L,N,D) and is
    /// expected to already be gradient-blocked by the caller when the
    /// conditioning contract requires it.
    pub fn forward<S: Scalar>(
        &self,
        t: &mut Tape<S>,
        candidate01: VarId,
        style_ref01: VarId,
        content: VarId,
    ) -> DiscOut {
        let (h, w) = self.image_hw;
        let cand = t.affine_const(candidate01, 2.0, -1.0);
        let style = t.affine_const(style_ref01, 2.0, -1.0);
        let pooled = t.seq_mean(content); // (N,D)
        let cvec = self.cond.apply(t, pooled); // (N,cond)
        let cmap = t.broadcast_vec_map(cvec, h, w);
        let pair = t.concat_chan(cand, style);
        let x = t.concat_chan(pair, cmap);
        let f1 = self.c1.apply(t, x);
        let f1 = t.leaky_relu(f1, LEAKY);
        let f2 = self.c2.apply(t, f1);
        let f2 = self.c2n.apply(t, f2);
        let f2 = t.leaky_relu(f2, LEAKY);
        let f3 = self.c3.apply(t, f2);
        let f3 = self.c3n.apply(t, f3);
        let f3 = t.leaky_relu(f3, LEAKY);
        let s = self.score.apply(t, f3);
        let sig = t.sigmoid(s);
        let probs = t.clamp_probs(sig, PROB_EPS);
        DiscOut {
            probs,
            feats: vec![f1, f2, f3],
        }
    }
}
