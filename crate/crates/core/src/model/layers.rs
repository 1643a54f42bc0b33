//! Small layer handles: each owns its parameter leaf ids and knows how to
//! apply itself on a tape.

use crate::model::params::{Init, Network, ParamSink};
use stedit_tensor::{Scalar, Tape, VarId};

pub const NORM_EPS: f64 = 1e-5;

#[derive(Clone, Copy)]
pub struct ConvH {
    pub w: VarId,
    pub b: Option<VarId>,
    pub stride: (usize, usize),
    pub pad: (usize, usize),
}

impl ConvH {
    pub fn apply<S: Scalar>(&self, t: &mut Tape<S>, x: VarId) -> VarId {
        t.conv2d(x, self.w, self.b, self.stride, self.pad)
    }
}

#[allow(clippy::too_many_arguments)]
pub fn conv<S: Scalar, P: ParamSink<S>>(
    p: &mut P,
    name: &str,
    net: Network,
    cout: usize,
    cin: usize,
    k: (usize, usize),
    stride: (usize, usize),
    pad: (usize, usize),
    bias: bool,
) -> ConvH {
    let w = p.param(
        &format!("{name}.w"),
        net,
        &[cout, cin, k.0, k.1],
        Init::HeNormal {
            fan_in: cin * k.0 * k.1,
        },
    );
    let b = bias.then(|| p.param(&format!("{name}.b"), net, &[cout], Init::Zeros));
    ConvH {
        w,
        b,
        stride,
        pad,
    }
}

#[derive(Clone, Copy)]
pub struct NormH {
    pub g: VarId,
    pub b: VarId,
}

impl NormH {
    pub fn apply<S: Scalar>(&self, t: &mut Tape<S>, x: VarId) -> VarId {
        t.instance_norm(x, self.g, self.b, NORM_EPS)
    }
}

pub fn norm<S: Scalar, P: ParamSink<S>>(p: &mut P, name: &str, net: Network, c: usize) -> NormH {
    NormH {
        g: p.param(&format!("{name}.g"), net, &[c], Init::Ones),
        b: p.param(&format!("{name}.b"), net, &[c], Init::Zeros),
    }
}

#[derive(Clone, Copy)]
pub struct LinH {
    pub w: VarId,
    pub b: Option<VarId>,
}

impl LinH {
    pub fn apply<S: Scalar>(&self, t: &mut Tape<S>, x: VarId) -> VarId {
        t.linear(x, self.w, self.b)
    }
}

pub fn linear<S: Scalar, P: ParamSink<S>>(
    p: &mut P,
    name: &str,
    net: Network,
    dout: usize,
    din: usize,
    bias: bool,
) -> LinH {
    let w = p.param(
        &format!("{name}.w"),
        net,
        &[dout, din],
        Init::UniformFan(din),
    );
    let b = bias.then(|| p.param(&format!("{name}.b"), net, &[dout], Init::Zeros));
    LinH { w, b }
}

/// LSTM cell parameters; gate order i, f, g, o along the 4H axis.
#[derive(Clone, Copy)]
pub struct LstmH {
    pub wx: VarId,
    pub wh: VarId,
    pub b: VarId,
    pub hidden: usize,
}

pub fn lstm<S: Scalar, P: ParamSink<S>>(
    p: &mut P,
    name: &str,
    net: Network,
    hidden: usize,
    input: usize,
) -> LstmH {
    LstmH {
        wx: p.param(
            &format!("{name}.wx"),
            net,
            &[4 * hidden, input],
            Init::UniformFan(input),
        ),
        wh: p.param(
            &format!("{name}.wh"),
            net,
            &[4 * hidden, hidden],
            Init::UniformFan(hidden),
        ),
        b: p.param(
            &format!("{name}.b"),
            net,
            &[4 * hidden],
            Init::LstmBias { hidden },
        ),
        hidden,
    }
}

impl LstmH {
    /// One step given precomputed input-side gates (N,4H).
    pub fn step_pre<S: Scalar>(
        &self,
        t: &mut Tape<S>,
        gates_x: VarId,
        h: VarId,
        c: VarId,
    ) -> (VarId, VarId) {
        let hh = self.hidden;
        let gh = t.linear(h, self.wh, None);
        let g = t.add(gates_x, gh);
        let gi = t.slice_cols(g, 0, hh);
        let gf = t.slice_cols(g, hh, 2 * hh);
        let gg = t.slice_cols(g, 2 * hh, 3 * hh);
        let go = t.slice_cols(g, 3 * hh, 4 * hh);
        let i = t.sigmoid(gi);
        let f = t.sigmoid(gf);
        let gt = t.tanh(gg);
        let o = t.sigmoid(go);
        let fc = t.mul(f, c);
        let ig = t.mul(i, gt);
        let c_new = t.add(fc, ig);
        let ct = t.tanh(c_new);
        let h_new = t.mul(o, ct);
        (h_new, c_new)
    }

    /// One step from a raw input (N,Din).
    pub fn step<S: Scalar>(
        &self,
        t: &mut Tape<S>,
        x: VarId,
        h: VarId,
        c: VarId,
    ) -> (VarId, VarId) {
        let gx = t.linear(x, self.wx, Some(self.b));
        self.step_pre(t, gx, h, c)
    }
}
