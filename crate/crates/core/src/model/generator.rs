//! Conditional generator: the content sequence is resampled along the
//! width axis, projected and tiled into the bottleneck, then decoded
//! upward with skip connections from the encoder's style maps.
//!
//! Like the encoder trunk, the decoder carries no normalization layers:
//! absolute color levels from the skip maps must survive to the output.

use crate::model::config::ModelConfig;
use crate::model::layers::{conv, linear, ConvH, LinH};
use crate::model::params::{Network, ParamSink};
use stedit_tensor::{Scalar, Tape, VarId};

struct DecBlock {
    up: (usize, usize),
    reduce: ConvH,
    conv3: ConvH,
}

pub struct GeneratorNet {
    ct_proj: LinH,
    fuse: ConvH,
    blocks: Vec<DecBlock>,
    head_up: (usize, usize),
    head1: ConvH,
    head2: ConvH,
    bottleneck: (usize, usize),
}

impl GeneratorNet {
    pub fn build<S: Scalar, P: ParamSink<S>>(p: &mut P, cfg: &ModelConfig) -> Self {
        const NET: Network = Network::Generator;
        let d = cfg.content_dim;
        let s4 = cfg.stage_channels[3];
        let fuse_c = cfg.gen_fuse_channels;
        let ct_proj = linear(p, "gen.ct_proj", NET, s4, d, true);
        let fuse = conv(p, "gen.fuse", NET, fuse_c, s4 + s4, (1, 1), (1, 1), (0, 0), true);
        let mut blocks = Vec::new();
        let mut cin = fuse_c;
        for (i, &cout) in cfg.gen_stage_channels.iter().enumerate() {
            // Decoder block i undoes encoder stage 3-i and merges that
            // stage's skip map.
            let enc_stage = 3 - i;
            let skip_c = cfg.stage_channels[enc_stage - 1];
            let up = cfg.stage_strides[enc_stage];
            let base = format!("gen.dec{i}");
            blocks.push(DecBlock {
                up,
                reduce: conv(
                    p,
                    &format!("{base}.reduce"),
                    NET,
                    cout,
                    cin + skip_c,
                    (1, 1),
                    (1, 1),
                    (0, 0),
                    true,
                ),
                conv3: conv(
                    p,
                    &format!("{base}.conv"),
                    NET,
                    cout,
                    cout,
                    (3, 3),
                    (1, 1),
                    (1, 1),
                    true,
                ),
            });
            cin = cout;
        }
        let head_c = cfg.gen_head_channels;
        Self {
            ct_proj,
            fuse,
            blocks,
            head_up: cfg.stage_strides[0],
            head1: conv(p, "gen.head1", NET, head_c, cin, (3, 3), (1, 1), (1, 1), true),
            head2: conv(p, "gen.head2", NET, cfg.in_channels, head_c, (3, 3), (1, 1), (1, 1), true),
            bottleneck: cfg.bottleneck(),
        }
    }

    /// styles: the four encoder stage maps; content: (L,N,D).
    /// Returns an image batch in [0,1].
    pub fn forward<S: Scalar>(
        &self,
        t: &mut Tape<S>,
        styles: &[VarId; 4],
        content: VarId,
    ) -> VarId {
        let (bh, bw) = self.bottleneck;
        let sh = t.shape(content).to_vec();
        let (_, n, d) = (sh[0], sh[1], sh[2]);
        let resampled = t.seq_linterp(content, bw);
        let flat = t.reshape(resampled, vec![bw * n, d]);
        let proj = self.ct_proj.apply(t, flat);
        let pd = t.shape(proj)[1];
        let proj_seq = t.reshape(proj, vec![bw, n, pd]);
        let ct_map = t.seq_to_map(proj_seq, bh); // (N,S4,bh,bw)

        let cat = t.concat_chan(styles[3], ct_map);
        let x = self.fuse.apply(t, cat);
        let mut x = t.relu(x);
        for (i, b) in self.blocks.iter().enumerate() {
            let up = t.upsample_nearest(x, b.up.0, b.up.1);
            let skip = styles[2 - i];
            let cat = t.concat_chan(up, skip);
            let y = b.reduce.apply(t, cat);
            let y = t.relu(y);
            let y = b.conv3.apply(t, y);
            x = t.relu(y);
        }
        let up = t.upsample_nearest(x, self.head_up.0, self.head_up.1);
        let y = self.head1.apply(t, up);
        let y = t.relu(y);
        let y = self.head2.apply(t, y);
        let y = t.tanh(y);
        t.affine_const(y, 0.5, 0.5)
    }
}
