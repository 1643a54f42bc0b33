//! Style-content encoder: a strided residual convolutional trunk whose four
//! stage maps are the style feature, plus a height-collapsed bidirectional
//! recurrent head producing the content sequence.
//!
//! The trunk is deliberately normalization-free: stage maps must carry
//! absolute color and contrast for the generator's skip connections, and
//! per-instance normalization would flatten spatially constant signal
//! (solid backgrounds) to its bias term.

use crate::model::config::ModelConfig;
use crate::model::layers::{conv, linear, lstm, ConvH, LinH, LstmH};
use crate::model::params::{Network, ParamSink};
use stedit_tensor::{Scalar, Tape, Tensor, VarId};

struct Stage {
    down: ConvH,
    r1: ConvH,
    r2: ConvH,
    r3: ConvH,
}

pub struct EncoderNet {
    stages: Vec<Stage>,
    ct_fwd: LstmH,
    ct_bwd: LstmH,
    ct_proj: LinH,
    content_dim: usize,
}

impl EncoderNet {
    pub fn build<S: Scalar, P: ParamSink<S>>(p: &mut P, cfg: &ModelConfig) -> Self {
        const NET: Network = Network::Encoder;
        let mut stages = Vec::new();
        let mut cin = cfg.in_channels;
        for (i, (&cout, &stride)) in cfg
            .stage_channels
            .iter()
            .zip(&cfg.stage_strides)
            .enumerate()
        {
            let base = format!("enc.stage{i}");
            let mid = (cout / 4).max(2);
            stages.push(Stage {
                down: conv(p, &format!("{base}.down"), NET, cout, cin, (3, 3), stride, (1, 1), true),
                r1: conv(p, &format!("{base}.r1"), NET, mid, cout, (1, 1), (1, 1), (0, 0), true),
                r2: conv(p, &format!("{base}.r2"), NET, mid, mid, (3, 3), (1, 1), (1, 1), true),
                r3: conv(p, &format!("{base}.r3"), NET, cout, mid, (1, 1), (1, 1), (0, 0), true),
            });
            cin = cout;
        }
        let h = cfg.recurrent_hidden;
        Self {
            stages,
            ct_fwd: lstm(p, "enc.ct.fwd", NET, h, cfg.stage_channels[3]),
            ct_bwd: lstm(p, "enc.ct.bwd", NET, h, cfg.stage_channels[3]),
            ct_proj: linear(p, "enc.ct.proj", NET, cfg.content_dim, 2 * h, true),
            content_dim: cfg.content_dim,
        }
    }

    /// Style trunk over a batch of images in [0,1], NCHW. Returns the four
    /// stage maps.
    pub fn trunk<S: Scalar>(&self, t: &mut Tape<S>, imgs01: VarId) -> [VarId; 4] {
        let mut x = t.affine_const(imgs01, 2.0, -1.0);
        let mut maps = [x; 4];
        for (i, st) in self.stages.iter().enumerate() {
            let d = st.down.apply(t, x);
            let d = t.relu(d);
            let r = st.r1.apply(t, d);
            let r = t.relu(r);
            let r = st.r2.apply(t, r);
            let r = t.relu(r);
            let r = st.r3.apply(t, r);
            let s = t.add(d, r);
            x = t.relu(s);
            maps[i] = x;
        }
        maps
    }

    fn run_dir<S: Scalar>(
        &self,
        t: &mut Tape<S>,
        cell: &LstmH,
        gx_all: VarId,
        l: usize,
        n: usize,
        reverse: bool,
    ) -> Vec<VarId> {
        let mut h = t.constant(Tensor::zeros(vec![n, cell.hidden]));
        let mut c = t.constant(Tensor::zeros(vec![n, cell.hidden]));
        let mut outs: Vec<VarId> = Vec::with_capacity(l);
        let order: Vec<usize> = if reverse {
            (0..l).rev().collect()
        } else {
            (0..l).collect()
        };
        for &step in &order {
            let gx = t.slice_rows(gx_all, step * n, (step + 1) * n);
            let (h2, c2) = cell.step_pre(t, gx, h, c);
            h = h2;
            c = c2;
            outs.push(h);
        }
        if reverse {
            outs.reverse();
        }
        outs
    }

    /// Content head over the deepest stage map: mean-pool height, run both
    /// recurrent directions, project to the content dimension.
    /// Returns (L, N, content_dim).
    pub fn content<S: Scalar>(&self, t: &mut Tape<S>, s4: VarId) -> VarId {
        let sh = t.shape(s4).to_vec();
        let (n, c) = (sh[0], sh[1]);
        let pooled = t.mean_over_h(s4); // (N,C,W)
        let seq = t.ncw_to_lnc(pooled); // (L,N,C)
        let l = t.shape(seq)[0];
        let flat = t.reshape(seq, vec![l * n, c]);
        let gx_f = t.linear(flat, self.ct_fwd.wx, Some(self.ct_fwd.b));
        let gx_b = t.linear(flat, self.ct_bwd.wx, Some(self.ct_bwd.b));
        let hs_f = self.run_dir(t, &self.ct_fwd, gx_f, l, n, false);
        let hs_b = self.run_dir(t, &self.ct_bwd, gx_b, l, n, true);
        let f_stack = t.stack_rows(&hs_f); // (L*N, H)
        let b_stack = t.stack_rows(&hs_b);
        let cat = t.concat_cols(f_stack, b_stack); // (L*N, 2H)
        let proj = self.ct_proj.apply(t, cat); // (L*N, D)
        t.reshape(proj, vec![l, n, self.content_dim])
    }

    /// Trunk plus content in one call.
    pub fn encode<S: Scalar>(&self, t: &mut Tape<S>, imgs01: VarId) -> ([VarId; 4], VarId) {
        let maps = self.trunk(t, imgs01);
        let ct = self.content(t, maps[3]);
        (maps, ct)
    }
}
