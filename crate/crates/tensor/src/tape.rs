//! Tape-based reverse-mode autodiff over [`Tensor`].
//!
//! A [`Tape`] records the forward graph as nodes are created; `backward`
//! walks it in reverse creation order and returns one gradient slot per
//! node. Nodes that no gradient can reach (constants, detached values and
//! everything computed purely from them) are skipped, so inference passes
//! recorded on a tape cost nothing extra beyond the forward math.
//!
//! Parallel sections use fixed chunking by sample index and combine partial
//! results in index order, so results are bit-identical regardless of the
//! number of worker threads.

use crate::scalar::Scalar;
use crate::tensor::Tensor;
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VarId(pub usize);

pub(crate) enum Op<S> {
    Leaf,
    Add(VarId, VarId),
    Sub(VarId, VarId),
    Mul(VarId, VarId),
    Scale(VarId, f64),
    /// y = a*x + b elementwise with constants a, b.
    AffineConst(VarId, f64, f64),
    Relu(VarId),
    LeakyRelu(VarId, f64),
    Tanh(VarId),
    Sigmoid(VarId),
    /// Clamp into [eps, 1-eps]; gradient is zero in the clamped region.
    ClampProbs(VarId, f64),
    Ln(VarId),
    Reshape(VarId),
    SliceRows {
        x: VarId,
        lo: usize,
        hi: usize,
    },
    StackRows(Vec<VarId>),
    ConcatCols(VarId, VarId),
    SliceCols {
        x: VarId,
        lo: usize,
        hi: usize,
    },
    AddBiasRows(VarId, VarId),
    Linear {
        x: VarId,
        w: VarId,
        b: Option<VarId>,
    },
    Embedding {
        table: VarId,
        idx: Vec<usize>,
    },
    MeanAll(VarId),
    L1DiffMean(VarId, VarId),
    WeightedSumScalars(Vec<(VarId, f64)>),
    SoftmaxRows(VarId),
    CeLogitsMasked {
        logits: VarId,
        targets: Vec<usize>,
        mask: Vec<bool>,
        probs: Vec<S>,
    },
    Conv2d {
        x: VarId,
        w: VarId,
        b: Option<VarId>,
        stride: (usize, usize),
        pad: (usize, usize),
        cols: Vec<S>,
    },
    InstanceNorm {
        x: VarId,
        gamma: VarId,
        beta: VarId,
        xhat: Vec<S>,
        inv_std: Vec<S>,
    },
    UpsampleNearest {
        x: VarId,
        fh: usize,
        fw: usize,
    },
    ConcatChan(VarId, VarId),
    MeanOverH(VarId),
    /// (N,C,W) -> (W,N,C)
    NcwToLnc(VarId),
    /// (L,N,D) -> (N,D,H,L), content broadcast over height.
    SeqToMap {
        x: VarId,
        h: usize,
    },
    SeqMean(VarId),
    /// (N,D) -> (N,D,H,W)
    BroadcastVecMap {
        x: VarId,
        h: usize,
        w: usize,
    },
    /// Linear resample along the leading sequence axis.
    SeqLinterp {
        x: VarId,
        l_out: usize,
    },
    /// Softmax over dim 0 of an (L,N) tensor.
    SoftmaxDim0(VarId),
    /// keys (L,N,A) + query (N,A) broadcast over L.
    AddBroadcastSeq {
        keys: VarId,
        query: VarId,
    },
    /// sum_l alpha[l,n] * h[l,n,:] -> (N,D)
    WeightedCtx {
        h: VarId,
        alpha: VarId,
    },
}

pub(crate) struct Node<S> {
    pub value: Tensor<S>,
    pub op: Op<S>,
    pub need: bool,
}

pub struct Tape<S> {
    pub(crate) nodes: Vec<Node<S>>,
    /// Values to substitute for successive `detach` calls, in call order.
    /// Finite-difference checks pin these so the perturbed evaluation stays
    /// on the same function the backward pass differentiates.
    detach_pins: std::collections::VecDeque<Tensor<S>>,
    detach_record: Vec<Tensor<S>>,
}

impl<S: Scalar> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

fn conv_out(h: usize, k: usize, s: usize, p: usize) -> usize {
    (h + 2 * p - k) / s + 1
}

#[allow(clippy::too_many_arguments)]
fn im2col<S: Scalar>(
    x: &[S],
    c_in: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: (usize, usize),
    pad: (usize, usize),
    col: &mut [S],
) {
    let (sh, sw) = stride;
    let (ph, pw) = pad;
    let ho = conv_out(h, kh, sh, ph);
    let wo = conv_out(w, kw, sw, pw);
    let owo = ho * wo;
    debug_assert_eq!(col.len(), c_in * kh * kw * owo);
    let mut row = 0usize;
    for c in 0..c_in {
        let xc = &x[c * h * w..(c + 1) * h * w];
        for ki in 0..kh {
            for kj in 0..kw {
                let dst = &mut col[row * owo..(row + 1) * owo];
                row += 1;
                for oy in 0..ho {
                    let iy = (oy * sh + ki) as isize - ph as isize;
                    let dst_row = &mut dst[oy * wo..(oy + 1) * wo];
                    if iy < 0 || iy >= h as isize {
                        for v in dst_row.iter_mut() {
                            *v = S::ZERO;
                        }
                        continue;
                    }
                    let xr = &xc[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, v) in dst_row.iter_mut().enumerate() {
                        let ix = (ox * sw + kj) as isize - pw as isize;
                        *v = if ix < 0 || ix >= w as isize {
                            S::ZERO
                        } else {
                            xr[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn col2im_add<S: Scalar>(
    dcol: &[S],
    c_in: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: (usize, usize),
    pad: (usize, usize),
    dx: &mut [S],
) {
    let (sh, sw) = stride;
    let (ph, pw) = pad;
    let ho = conv_out(h, kh, sh, ph);
    let wo = conv_out(w, kw, sw, pw);
    let owo = ho * wo;
    let mut row = 0usize;
    for c in 0..c_in {
        let xc = &mut dx[c * h * w..(c + 1) * h * w];
        for ki in 0..kh {
            for kj in 0..kw {
                let src = &dcol[row * owo..(row + 1) * owo];
                row += 1;
                for oy in 0..ho {
                    let iy = (oy * sh + ki) as isize - ph as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let src_row = &src[oy * wo..(oy + 1) * wo];
                    let xr = &mut xc[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, &v) in src_row.iter_enumerate_fix() {
                        let ix = (ox * sw + kj) as isize - pw as isize;
                        if ix >= 0 && ix < w as isize {
                            xr[ix as usize] += v;
                        }
                    }
                }
            }
        }
    }
}

// Small shim so the inner loop reads cleanly above.
trait IterEnumFix<'a, S> {
    fn iter_enumerate_fix(self) -> std::iter::Enumerate<std::slice::Iter<'a, S>>;
}
impl<'a, S> IterEnumFix<'a, S> for &'a [S] {
    fn iter_enumerate_fix(self) -> std::iter::Enumerate<std::slice::Iter<'a, S>> {
        self.iter().enumerate()
    }
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            detach_pins: std::collections::VecDeque::new(),
            detach_record: Vec::new(),
        }
    }

    /// Install replacement values for the next `detach` calls.
    pub fn set_detach_pins(&mut self, pins: Vec<Tensor<S>>) {
        self.detach_pins = pins.into();
    }

    /// Values produced by every `detach` so far, in call order.
    pub fn detach_record(&self) -> &[Tensor<S>] {
        &self.detach_record
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn val(&self, v: VarId) -> &Tensor<S> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: VarId) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn needs_grad(&self, v: VarId) -> bool {
        self.nodes[v.0].need
    }

    fn push(&mut self, value: Tensor<S>, op: Op<S>, need: bool) -> VarId {
        self.nodes.push(Node { value, op, need });
        VarId(self.nodes.len() - 1)
    }

    fn need_of(&self, ids: &[VarId]) -> bool {
        ids.iter().any(|v| self.nodes[v.0].need)
    }

    /// Trainable leaf.
    pub fn leaf(&mut self, value: Tensor<S>, requires_grad: bool) -> VarId {
        self.push(value, Op::Leaf, requires_grad)
    }

    /// Non-trainable input.
    pub fn constant(&mut self, value: Tensor<S>) -> VarId {
        self.push(value, Op::Leaf, false)
    }

    /// Copy of `x`'s value that blocks all gradient flow. When pins are
    /// installed, the pinned value is used instead of `x`'s current value.
    pub fn detach(&mut self, x: VarId) -> VarId {
        let value = match self.detach_pins.pop_front() {
            Some(pin) => {
                assert_eq!(
                    pin.shape(),
                    self.nodes[x.0].value.shape(),
                    "detach pin shape mismatch"
                );
                pin
            }
            None => self.nodes[x.0].value.clone(),
        };
        self.detach_record.push(value.clone());
        self.push(value, Op::Leaf, false)
    }

    pub fn add(&mut self, a: VarId, b: VarId) -> VarId {
        assert_eq!(self.shape(a), self.shape(b), "add shape mismatch");
        let need = self.need_of(&[a, b]);
        let data = self
            .val(a)
            .data()
            .iter()
            .zip(self.val(b).data())
            .map(|(&x, &y)| x + y)
            .collect();
        let value = Tensor::new(self.shape(a).to_vec(), data);
        self.push(value, Op::Add(a, b), need)
    }

    pub fn sub(&mut self, a: VarId, b: VarId) -> VarId {
        assert_eq!(self.shape(a), self.shape(b), "sub shape mismatch");
        let need = self.need_of(&[a, b]);
        let data = self
            .val(a)
            .data()
            .iter()
            .zip(self.val(b).data())
            .map(|(&x, &y)| x - y)
            .collect();
        let value = Tensor::new(self.shape(a).to_vec(), data);
        self.push(value, Op::Sub(a, b), need)
    }

    pub fn mul(&mut self, a: VarId, b: VarId) -> VarId {
        assert_eq!(self.shape(a), self.shape(b), "mul shape mismatch");
        let need = self.need_of(&[a, b]);
        let data = self
            .val(a)
            .data()
            .iter()
            .zip(self.val(b).data())
            .map(|(&x, &y)| x * y)
            .collect();
        let value = Tensor::new(self.shape(a).to_vec(), data);
        self.push(value, Op::Mul(a, b), need)
    }

    pub fn scale(&mut self, x: VarId, k: f64) -> VarId {
        let need = self.nodes[x.0].need;
        let kk = S::from_f64(k);
        let data = self.val(x).data().iter().map(|&v| v * kk).collect();
        let value = Tensor::new(self.shape(x).to_vec(), data);
        self.push(value, Op::Scale(x, k), need)
    }

    pub fn affine_const(&mut self, x: VarId, a: f64, b: f64) -> VarId {
        let need = self.nodes[x.0].need;
        let (aa, bb) = (S::from_f64(a), S::from_f64(b));
        let data = self.val(x).data().iter().map(|&v| v * aa + bb).collect();
        let value = Tensor::new(self.shape(x).to_vec(), data);
        self.push(value, Op::AffineConst(x, a, b), need)
    }

    pub fn relu(&mut self, x: VarId) -> VarId {
        let need = self.nodes[x.0].need;
        let data = self.val(x).data().iter().map(|&v| v.maxs(S::ZERO)).collect();
        let value = Tensor::new(self.shape(x).to_vec(), data);
        self.push(value, Op::Relu(x), need)
    }

    pub fn leaky_relu(&mut self, x: VarId, slope: f64) -> VarId {
        let need = self.nodes[x.0].need;
        let s = S::from_f64(slope);
        let data = self
            .val(x)
            .data()
            .iter()
            .map(|&v| if v > S::ZERO { v } else { v * s })
            .collect();
        let value = Tensor::new(self.shape(x).to_vec(), data);
        self.push(value, Op::LeakyRelu(x, slope), need)
    }

    pub fn tanh(&mut self, x: VarId) -> VarId {
        let need = self.nodes[x.0].need;
        let data = self.val(x).data().iter().map(|&v| v.tanh()).collect();
        let value = Tensor::new(self.shape(x).to_vec(), data);
        self.push(value, Op::Tanh(x), need)
    }

    pub fn sigmoid(&mut self, x: VarId) -> VarId {
        let need = self.nodes[x.0].need;
        let one = S::ONE;
        let data = self
            .val(x)
            .data()
            .iter()
            .map(|&v| one / (one + (-v).exp()))
            .collect();
        let value = Tensor::new(self.shape(x).to_vec(), data);
        self.push(value, Op::Sigmoid(x), need)
    }

    pub fn clamp_probs(&mut self, x: VarId, eps: f64) -> VarId {
        let need = self.nodes[x.0].need;
        let lo = S::from_f64(eps);
        let hi = S::from_f64(1.0 - eps);
        let data = self
            .val(x)
            .data()
            .iter()
            .map(|&v| v.maxs(lo).mins(hi))
            .collect();
        let value = Tensor::new(self.shape(x).to_vec(), data);
        self.push(value, Op::ClampProbs(x, eps), need)
    }

    pub fn ln(&mut self, x: VarId) -> VarId {
        let need = self.nodes[x.0].need;
        let data = self.val(x).data().iter().map(|&v| v.ln()).collect();
        let value = Tensor::new(self.shape(x).to_vec(), data);
        self.push(value, Op::Ln(x), need)
    }

    pub fn reshape(&mut self, x: VarId, shape: Vec<usize>) -> VarId {
        assert_eq!(
            shape.iter().product::<usize>(),
            self.val(x).numel(),
            "reshape numel mismatch"
        );
        let need = self.nodes[x.0].need;
        let value = self.val(x).clone().reshaped(shape);
        self.push(value, Op::Reshape(x), need)
    }

    /// Rows lo..hi of a (R, C) tensor.
    pub fn slice_rows(&mut self, x: VarId, lo: usize, hi: usize) -> VarId {
        let sh = self.shape(x);
        assert_eq!(sh.len(), 2);
        let c = sh[1];
        assert!(lo <= hi && hi <= sh[0]);
        let need = self.nodes[x.0].need;
        let data = self.val(x).data()[lo * c..hi * c].to_vec();
        let value = Tensor::new(vec![hi - lo, c], data);
        self.push(value, Op::SliceRows { x, lo, hi }, need)
    }

    /// Stack 2-D tensors with identical column counts along rows.
    pub fn stack_rows(&mut self, parts: &[VarId]) -> VarId {
        assert!(!parts.is_empty());
        let c = self.shape(parts[0])[1];
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let sh = self.shape(p);
            assert_eq!(sh.len(), 2);
            assert_eq!(sh[1], c);
            rows += sh[0];
            data.extend_from_slice(self.val(p).data());
        }
        let need = self.need_of(parts);
        let value = Tensor::new(vec![rows, c], data);
        self.push(value, Op::StackRows(parts.to_vec()), need)
    }

    pub fn concat_cols(&mut self, a: VarId, b: VarId) -> VarId {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        assert_eq!(sa.len(), 2);
        assert_eq!(sb.len(), 2);
        assert_eq!(sa[0], sb[0]);
        let (r, ca, cb) = (sa[0], sa[1], sb[1]);
        let need = self.need_of(&[a, b]);
        let mut data = Vec::with_capacity(r * (ca + cb));
        for i in 0..r {
            data.extend_from_slice(&self.val(a).data()[i * ca..(i + 1) * ca]);
            data.extend_from_slice(&self.val(b).data()[i * cb..(i + 1) * cb]);
        }
        let value = Tensor::new(vec![r, ca + cb], data);
        self.push(value, Op::ConcatCols(a, b), need)
    }

    pub fn slice_cols(&mut self, x: VarId, lo: usize, hi: usize) -> VarId {
        let sh = self.shape(x);
        assert_eq!(sh.len(), 2);
        let (r, c) = (sh[0], sh[1]);
        assert!(lo <= hi && hi <= c);
        let need = self.nodes[x.0].need;
        let mut data = Vec::with_capacity(r * (hi - lo));
        for i in 0..r {
            data.extend_from_slice(&self.val(x).data()[i * c + lo..i * c + hi]);
        }
        let value = Tensor::new(vec![r, hi - lo], data);
        self.push(value, Op::SliceCols { x, lo, hi }, need)
    }

    /// x (R,C) + bias (C) broadcast over rows.
    pub fn add_bias_rows(&mut self, x: VarId, b: VarId) -> VarId {
        let sh = self.shape(x).to_vec();
        assert_eq!(sh.len(), 2);
        assert_eq!(self.shape(b), &[sh[1]]);
        let need = self.need_of(&[x, b]);
        let bd = self.val(b).data().to_vec();
        let data = self
            .val(x)
            .data()
            .chunks_exact(sh[1])
            .flat_map(|row| row.iter().zip(&bd).map(|(&v, &bv)| v + bv))
            .collect();
        let value = Tensor::new(sh, data);
        self.push(value, Op::AddBiasRows(x, b), need)
    }

    /// x (R, Din) * w^T (Din, Dout) + b  with w stored as (Dout, Din).
    pub fn linear(&mut self, x: VarId, w: VarId, b: Option<VarId>) -> VarId {
        let sx = self.shape(x).to_vec();
        let sw = self.shape(w).to_vec();
        assert_eq!(sx.len(), 2);
        assert_eq!(sw.len(), 2);
        assert_eq!(sx[1], sw[1], "linear dims: x {:?} w {:?}", sx, sw);
        let (r, din, dout) = (sx[0], sx[1], sw[0]);
        let mut ids = vec![x, w];
        if let Some(bb) = b {
            assert_eq!(self.shape(bb), &[dout]);
            ids.push(bb);
        }
        let need = self.need_of(&ids);
        let mut out = vec![S::ZERO; r * dout];
        S::gemm(
            r,
            din,
            dout,
            S::ONE,
            self.val(x).data(),
            din as isize,
            1,
            self.val(w).data(),
            1,
            din as isize,
            S::ZERO,
            &mut out,
            dout as isize,
            1,
        );
        if let Some(bb) = b {
            let bd = self.val(bb).data();
            for row in out.chunks_exact_mut(dout) {
                for (v, &bv) in row.iter_mut().zip(bd) {
                    *v += bv;
                }
            }
        }
        let value = Tensor::new(vec![r, dout], out);
        self.push(value, Op::Linear { x, w, b }, need)
    }

    pub fn embedding(&mut self, table: VarId, idx: &[usize]) -> VarId {
        let st = self.shape(table).to_vec();
        assert_eq!(st.len(), 2);
        let (v, e) = (st[0], st[1]);
        let need = self.nodes[table.0].need;
        let mut data = Vec::with_capacity(idx.len() * e);
        for &i in idx {
            assert!(i < v, "embedding index {i} out of range {v}");
            data.extend_from_slice(&self.val(table).data()[i * e..(i + 1) * e]);
        }
        let value = Tensor::new(vec![idx.len(), e], data);
        self.push(
            value,
            Op::Embedding {
                table,
                idx: idx.to_vec(),
            },
            need,
        )
    }

    pub fn mean_all(&mut self, x: VarId) -> VarId {
        let need = self.nodes[x.0].need;
        let n = self.val(x).numel().max(1);
        let mut acc = S::ZERO;
        for &v in self.val(x).data() {
            acc += v;
        }
        let value = Tensor::scalar(acc / S::from_f64(n as f64));
        self.push(value, Op::MeanAll(x), need)
    }

    /// mean(|a - b|)
    pub fn l1_diff_mean(&mut self, a: VarId, b: VarId) -> VarId {
        assert_eq!(self.shape(a), self.shape(b));
        let need = self.need_of(&[a, b]);
        let n = self.val(a).numel().max(1);
        let mut acc = S::ZERO;
        for (&x, &y) in self.val(a).data().iter().zip(self.val(b).data()) {
            acc += (x - y).abs();
        }
        let value = Tensor::scalar(acc / S::from_f64(n as f64));
        self.push(value, Op::L1DiffMean(a, b), need)
    }

    /// sum_i coeff_i * scalar_i
    pub fn weighted_sum_scalars(&mut self, terms: &[(VarId, f64)]) -> VarId {
        assert!(!terms.is_empty());
        let ids: Vec<VarId> = terms.iter().map(|t| t.0).collect();
        let need = self.need_of(&ids);
        let mut acc = S::ZERO;
        for &(id, c) in terms {
            assert_eq!(self.val(id).numel(), 1, "weighted_sum_scalars on non-scalar");
            acc += self.val(id).item() * S::from_f64(c);
        }
        let value = Tensor::scalar(acc);
        self.push(value, Op::WeightedSumScalars(terms.to_vec()), need)
    }

    /// Row-wise softmax of (N, V).
    pub fn softmax_rows(&mut self, x: VarId) -> VarId {
        let sh = self.shape(x).to_vec();
        assert_eq!(sh.len(), 2);
        let need = self.nodes[x.0].need;
        let v = sh[1];
        let mut data = vec![S::ZERO; sh[0] * v];
        for (out, row) in data.chunks_exact_mut(v).zip(self.val(x).data().chunks_exact(v)) {
            softmax_into(row, out);
        }
        let value = Tensor::new(sh, data);
        self.push(value, Op::SoftmaxRows(x), need)
    }

    /// Summed masked cross entropy from logits (N, V); normalize externally.
    pub fn ce_logits_masked(&mut self, logits: VarId, targets: &[usize], mask: &[bool]) -> VarId {
        let sh = self.shape(logits).to_vec();
        assert_eq!(sh.len(), 2);
        assert_eq!(targets.len(), sh[0]);
        assert_eq!(mask.len(), sh[0]);
        let v = sh[1];
        let need = self.nodes[logits.0].need;
        let mut probs = vec![S::ZERO; sh[0] * v];
        let mut acc = S::ZERO;
        for i in 0..sh[0] {
            let row = &self.val(logits).data()[i * v..(i + 1) * v];
            let p = &mut probs[i * v..(i + 1) * v];
            softmax_into(row, p);
            if mask[i] {
                assert!(targets[i] < v);
                let pi = p[targets[i]].maxs(S::from_f64(1e-300));
                acc += -pi.ln();
            }
        }
        let value = Tensor::scalar(acc);
        self.push(
            value,
            Op::CeLogitsMasked {
                logits,
                targets: targets.to_vec(),
                mask: mask.to_vec(),
                probs,
            },
            need,
        )
    }

    /// 2-D convolution, NCHW input, OIHW weight.
    pub fn conv2d(
        &mut self,
        x: VarId,
        w: VarId,
        b: Option<VarId>,
        stride: (usize, usize),
        pad: (usize, usize),
    ) -> VarId {
        let sx = self.shape(x).to_vec();
        let sw = self.shape(w).to_vec();
        assert_eq!(sx.len(), 4, "conv input must be NCHW");
        assert_eq!(sw.len(), 4, "conv weight must be OIHW");
        assert_eq!(sx[1], sw[1], "conv channel mismatch");
        let (n, c_in, h, wd) = (sx[0], sx[1], sx[2], sx[3]);
        let (c_out, kh, kw) = (sw[0], sw[2], sw[3]);
        let ho = conv_out(h, kh, stride.0, pad.0);
        let wo = conv_out(wd, kw, stride.1, pad.1);
        let ckk = c_in * kh * kw;
        let owo = ho * wo;
        let mut ids = vec![x, w];
        if let Some(bb) = b {
            assert_eq!(self.shape(bb), &[c_out]);
            ids.push(bb);
        }
        let need = self.need_of(&ids);
        let mut cols = vec![S::ZERO; n * ckk * owo];
        let mut out = vec![S::ZERO; n * c_out * owo];
        {
            let xd = self.val(x).data();
            let wdata = self.val(w).data();
            let xs = c_in * h * wd;
            out.par_chunks_exact_mut(c_out * owo)
                .zip(cols.par_chunks_exact_mut(ckk * owo))
                .enumerate()
                .for_each(|(i, (yo, col))| {
                    im2col(&xd[i * xs..(i + 1) * xs], c_in, h, wd, kh, kw, stride, pad, col);
                    S::gemm(
                        c_out,
                        ckk,
                        owo,
                        S::ONE,
                        wdata,
                        ckk as isize,
                        1,
                        col,
                        owo as isize,
                        1,
                        S::ZERO,
                        yo,
                        owo as isize,
                        1,
                    );
                });
            if let Some(bb) = b {
                let bd = self.val(bb).data().to_vec();
                for yo in out.chunks_exact_mut(c_out * owo) {
                    for (ci, yc) in yo.chunks_exact_mut(owo).enumerate() {
                        let bv = bd[ci];
                        for v in yc.iter_mut() {
                            *v += bv;
                        }
                    }
                }
            }
        }
        let value = Tensor::new(vec![n, c_out, ho, wo], out);
        self.push(
            value,
            Op::Conv2d {
                x,
                w,
                b,
                stride,
                pad,
                cols,
            },
            need,
        )
    }

    /// Instance normalization with affine parameters, NCHW.
    pub fn instance_norm(&mut self, x: VarId, gamma: VarId, beta: VarId, eps: f64) -> VarId {
        let sh = self.shape(x).to_vec();
        assert_eq!(sh.len(), 4);
        let (n, c, h, w) = (sh[0], sh[1], sh[2], sh[3]);
        assert_eq!(self.shape(gamma), &[c]);
        assert_eq!(self.shape(beta), &[c]);
        let need = self.need_of(&[x, gamma, beta]);
        let hw = h * w;
        let mut xhat = vec![S::ZERO; n * c * hw];
        let mut inv_std = vec![S::ZERO; n * c];
        let mut out = vec![S::ZERO; n * c * hw];
        {
            let xd = self.val(x).data();
            let g = self.val(gamma).data().to_vec();
            let bt = self.val(beta).data().to_vec();
            let epss = S::from_f64(eps);
            out.par_chunks_exact_mut(c * hw)
                .zip(xhat.par_chunks_exact_mut(c * hw))
                .zip(inv_std.par_chunks_exact_mut(c))
                .enumerate()
                .for_each(|(i, ((on, xn), isn))| {
                    let xin = &xd[i * c * hw..(i + 1) * c * hw];
                    for ci in 0..c {
                        let xs = &xin[ci * hw..(ci + 1) * hw];
                        let mut mean = S::ZERO;
                        for &v in xs {
                            mean += v;
                        }
                        mean = mean / S::from_f64(hw as f64);
                        let mut var = S::ZERO;
                        for &v in xs {
                            let d = v - mean;
                            var += d * d;
                        }
                        var = var / S::from_f64(hw as f64);
                        let istd = S::ONE / (var + epss).sqrt();
                        isn[ci] = istd;
                        let (gc, bc) = (g[ci], bt[ci]);
                        let xh = &mut xn[ci * hw..(ci + 1) * hw];
                        let oo = &mut on[ci * hw..(ci + 1) * hw];
                        for ((xv, hv), ov) in xs.iter().zip(xh.iter_mut()).zip(oo.iter_mut()) {
                            let hat = (*xv - mean) * istd;
                            *hv = hat;
                            *ov = gc * hat + bc;
                        }
                    }
                });
        }
        let value = Tensor::new(sh, out);
        self.push(
            value,
            Op::InstanceNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
            need,
        )
    }

    pub fn upsample_nearest(&mut self, x: VarId, fh: usize, fw: usize) -> VarId {
        let sh = self.shape(x).to_vec();
        assert_eq!(sh.len(), 4);
        let (n, c, h, w) = (sh[0], sh[1], sh[2], sh[3]);
        let need = self.nodes[x.0].need;
        let (ho, wo) = (h * fh, w * fw);
        let mut out = vec![S::ZERO; n * c * ho * wo];
        let xd = self.val(x).data();
        for nc in 0..n * c {
            let src = &xd[nc * h * w..(nc + 1) * h * w];
            let dst = &mut out[nc * ho * wo..(nc + 1) * ho * wo];
            for oy in 0..ho {
                let iy = oy / fh;
                for ox in 0..wo {
                    dst[oy * wo + ox] = src[iy * w + ox / fw];
                }
            }
        }
        let value = Tensor::new(vec![n, c, ho, wo], out);
        self.push(value, Op::UpsampleNearest { x, fh, fw }, need)
    }

    pub fn concat_chan(&mut self, a: VarId, b: VarId) -> VarId {
        let sa = self.shape(a).to_vec();
        let sb = self.shape(b).to_vec();
        assert_eq!(sa.len(), 4);
        assert_eq!(sb.len(), 4);
        assert_eq!(sa[0], sb[0]);
        assert_eq!(sa[2], sb[2]);
        assert_eq!(sa[3], sb[3]);
        let (n, ca, cb, hw) = (sa[0], sa[1], sb[1], sa[2] * sa[3]);
        let need = self.need_of(&[a, b]);
        let mut data = Vec::with_capacity(n * (ca + cb) * hw);
        for i in 0..n {
            data.extend_from_slice(&self.val(a).data()[i * ca * hw..(i + 1) * ca * hw]);
            data.extend_from_slice(&self.val(b).data()[i * cb * hw..(i + 1) * cb * hw]);
        }
        let value = Tensor::new(vec![n, ca + cb, sa[2], sa[3]], data);
        self.push(value, Op::ConcatChan(a, b), need)
    }

    /// (N,C,H,W) -> (N,C,W), mean over the height axis.
    pub fn mean_over_h(&mut self, x: VarId) -> VarId {
        let sh = self.shape(x).to_vec();
        assert_eq!(sh.len(), 4);
        let (n, c, h, w) = (sh[0], sh[1], sh[2], sh[3]);
        let need = self.nodes[x.0].need;
        let mut out = vec![S::ZERO; n * c * w];
        let xd = self.val(x).data();
        let inv = S::from_f64(1.0 / h as f64);
        for nc in 0..n * c {
            let src = &xd[nc * h * w..(nc + 1) * h * w];
            let dst = &mut out[nc * w..(nc + 1) * w];
            for row in src.chunks_exact(w) {
                for (d, &v) in dst.iter_mut().zip(row) {
                    *d += v;
                }
            }
            for d in dst.iter_mut() {
                *d *= inv;
            }
        }
        let value = Tensor::new(vec![n, c, w], out);
        self.push(value, Op::MeanOverH(x), need)
    }

    /// (N,C,W) -> (W,N,C)
    pub fn ncw_to_lnc(&mut self, x: VarId) -> VarId {
        let sh = self.shape(x).to_vec();
        assert_eq!(sh.len(), 3);
        let (n, c, w) = (sh[0], sh[1], sh[2]);
        let need = self.nodes[x.0].need;
        let xd = self.val(x).data();
        let mut out = vec![S::ZERO; n * c * w];
        for l in 0..w {
            for i in 0..n {
                let dst = &mut out[(l * n + i) * c..(l * n + i + 1) * c];
                for (ci, d) in dst.iter_mut().enumerate() {
                    *d = xd[(i * c + ci) * w + l];
                }
            }
        }
        let value = Tensor::new(vec![w, n, c], out);
        self.push(value, Op::NcwToLnc(x), need)
    }

    /// (L,N,D) -> (N,D,H,L), repeating the sequence over the height axis.
    pub fn seq_to_map(&mut self, x: VarId, h: usize) -> VarId {
        let sh = self.shape(x).to_vec();
        assert_eq!(sh.len(), 3);
        let (l, n, d) = (sh[0], sh[1], sh[2]);
        let need = self.nodes[x.0].need;
        let xd = self.val(x).data();
        let mut out = vec![S::ZERO; n * d * h * l];
        for i in 0..n {
            for di in 0..d {
                let base = (i * d + di) * h * l;
                for li in 0..l {
                    let v = xd[(li * n + i) * d + di];
                    for hi in 0..h {
                        out[base + hi * l + li] = v;
                    }
                }
            }
        }
        let value = Tensor::new(vec![n, d, h, l], out);
        self.push(value, Op::SeqToMap { x, h }, need)
    }

    /// (L,N,D) -> (N,D), mean over the sequence axis.
    pub fn seq_mean(&mut self, x: VarId) -> VarId {
        let sh = self.shape(x).to_vec();
        assert_eq!(sh.len(), 3);
        let (l, n, d) = (sh[0], sh[1], sh[2]);
        let need = self.nodes[x.0].need;
        let xd = self.val(x).data();
        let mut out = vec![S::ZERO; n * d];
        for li in 0..l {
            for (o, &v) in out.iter_mut().zip(&xd[li * n * d..(li + 1) * n * d]) {
                *o += v;
            }
        }
        let inv = S::from_f64(1.0 / l as f64);
        for o in out.iter_mut() {
            *o *= inv;
        }
        let value = Tensor::new(vec![n, d], out);
        self.push(value, Op::SeqMean(x), need)
    }

    /// (N,D) -> (N,D,H,W)
    pub fn broadcast_vec_map(&mut self, x: VarId, h: usize, w: usize) -> VarId {
        let sh = self.shape(x).to_vec();
        assert_eq!(sh.len(), 2);
        let (n, d) = (sh[0], sh[1]);
        let need = self.nodes[x.0].need;
        let xd = self.val(x).data();
        let mut out = vec![S::ZERO; n * d * h * w];
        for nd in 0..n * d {
            let v = xd[nd];
            for o in out[nd * h * w..(nd + 1) * h * w].iter_mut() {
                *o = v;
            }
        }
        let value = Tensor::new(vec![n, d, h, w], out);
        self.push(value, Op::BroadcastVecMap { x, h, w }, need)
    }

    /// Linear interpolation along the leading axis of (L,N,D), align-corners.
    pub fn seq_linterp(&mut self, x: VarId, l_out: usize) -> VarId {
        let sh = self.shape(x).to_vec();
        assert_eq!(sh.len(), 3);
        let (l_in, n, d) = (sh[0], sh[1], sh[2]);
        assert!(l_in >= 1 && l_out >= 1);
        let need = self.nodes[x.0].need;
        let xd = self.val(x).data();
        let nd = n * d;
        let mut out = vec![S::ZERO; l_out * nd];
        for j in 0..l_out {
            let pos = if l_out == 1 {
                0.0
            } else {
                j as f64 * (l_in - 1) as f64 / (l_out - 1) as f64
            };
            let i0 = pos.floor() as usize;
            let i1 = (i0 + 1).min(l_in - 1);
            let f = S::from_f64(pos - i0 as f64);
            let omf = S::ONE - f;
            let dst = &mut out[j * nd..(j + 1) * nd];
            let s0 = &xd[i0 * nd..(i0 + 1) * nd];
            let s1 = &xd[i1 * nd..(i1 + 1) * nd];
            for ((o, &a), &b) in dst.iter_mut().zip(s0).zip(s1) {
                *o = omf * a + f * b;
            }
        }
        let value = Tensor::new(vec![l_out, n, d], out);
        self.push(value, Op::SeqLinterp { x, l_out }, need)
    }

    /// Softmax over dim 0 of (L,N), one distribution per column.
    pub fn softmax_dim0(&mut self, x: VarId) -> VarId {
        let sh = self.shape(x).to_vec();
        assert_eq!(sh.len(), 2);
        let (l, n) = (sh[0], sh[1]);
        let need = self.nodes[x.0].need;
        let xd = self.val(x).data();
        let mut out = vec![S::ZERO; l * n];
        for col in 0..n {
            let mut mx = xd[col];
            for li in 1..l {
                mx = mx.maxs(xd[li * n + col]);
            }
            let mut sum = S::ZERO;
            for li in 0..l {
                let e = (xd[li * n + col] - mx).exp();
                out[li * n + col] = e;
                sum += e;
            }
            let inv = S::ONE / sum;
            for li in 0..l {
                out[li * n + col] *= inv;
            }
        }
        let value = Tensor::new(sh, out);
        self.push(value, Op::SoftmaxDim0(x), need)
    }

    /// keys (L,N,A) + query (N,A), broadcast over L.
    pub fn add_broadcast_seq(&mut self, keys: VarId, query: VarId) -> VarId {
        let sk = self.shape(keys).to_vec();
        let sq = self.shape(query).to_vec();
        assert_eq!(sk.len(), 3);
        assert_eq!(sq, vec![sk[1], sk[2]]);
        let (l, n, a) = (sk[0], sk[1], sk[2]);
        let need = self.need_of(&[keys, query]);
        let qd = self.val(query).data().to_vec();
        let mut out = self.val(keys).data().to_vec();
        for li in 0..l {
            for (o, &q) in out[li * n * a..(li + 1) * n * a].iter_mut().zip(&qd) {
                *o += q;
            }
        }
        let value = Tensor::new(vec![l, n, a], out);
        self.push(value, Op::AddBroadcastSeq { keys, query }, need)
    }

    /// ctx[n,:] = sum_l alpha[l,n] * h[l,n,:]
    pub fn weighted_ctx(&mut self, h: VarId, alpha: VarId) -> VarId {
        let sh = self.shape(h).to_vec();
        let sa = self.shape(alpha).to_vec();
        assert_eq!(sh.len(), 3);
        assert_eq!(sa, vec![sh[0], sh[1]]);
        let (l, n, d) = (sh[0], sh[1], sh[2]);
        let need = self.need_of(&[h, alpha]);
        let hd = self.val(h).data();
        let ad = self.val(alpha).data();
        let mut out = vec![S::ZERO; n * d];
        for li in 0..l {
            for i in 0..n {
                let a = ad[li * n + i];
                let src = &hd[(li * n + i) * d..(li * n + i + 1) * d];
                let dst = &mut out[i * d..(i + 1) * d];
                for (o, &v) in dst.iter_mut().zip(src) {
                    *o += a * v;
                }
            }
        }
        let value = Tensor::new(vec![n, d], out);
        self.push(value, Op::WeightedCtx { h, alpha }, need)
    }

    /// Reverse pass from a scalar root; returns per-node gradient slots.
    pub fn backward(&self, root: VarId) -> Vec<Option<Tensor<S>>> {
        assert_eq!(self.val(root).numel(), 1, "backward root must be scalar");
        let mut grads: Vec<Option<Tensor<S>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Tensor::scalar(S::ONE));
        for id in (0..=root.0).rev() {
            if grads[id].is_none() || !self.nodes[id].need {
                continue;
            }
            let g = grads[id].take().unwrap();
            self.backward_node(id, &g, &mut grads);
            grads[id] = Some(g);
        }
        grads
    }

    fn accum(&self, grads: &mut [Option<Tensor<S>>], target: VarId, delta: &Tensor<S>) {
        if !self.nodes[target.0].need {
            return;
        }
        match &mut grads[target.0] {
            Some(t) => {
                for (a, &b) in t.data_mut().iter_mut().zip(delta.data()) {
                    *a += b;
                }
            }
            slot @ None => *slot = Some(delta.clone()),
        }
    }

    fn accum_owned(&self, grads: &mut [Option<Tensor<S>>], target: VarId, delta: Tensor<S>) {
        if !self.nodes[target.0].need {
            return;
        }
        match &mut grads[target.0] {
            Some(t) => {
                for (a, &b) in t.data_mut().iter_mut().zip(delta.data()) {
                    *a += b;
                }
            }
            slot @ None => *slot = Some(delta),
        }
    }

    #[allow(clippy::too_many_lines)]
    fn backward_node(&self, id: usize, g: &Tensor<S>, grads: &mut Vec<Option<Tensor<S>>>) {
        let node = &self.nodes[id];
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accum(grads, *a, g);
                self.accum(grads, *b, g);
            }
            Op::Sub(a, b) => {
                self.accum(grads, *a, g);
                if self.nodes[b.0].need {
                    let neg = Tensor::new(g.shape().to_vec(), g.data().iter().map(|&v| -v).collect());
                    self.accum_owned(grads, *b, neg);
                }
            }
            Op::Mul(a, b) => {
                if self.nodes[a.0].need {
                    let d = Tensor::new(
                        g.shape().to_vec(),
                        g.data()
                            .iter()
                            .zip(self.val(*b).data())
                            .map(|(&gv, &bv)| gv * bv)
                            .collect(),
                    );
                    self.accum_owned(grads, *a, d);
                }
                if self.nodes[b.0].need {
                    let d = Tensor::new(
                        g.shape().to_vec(),
                        g.data()
                            .iter()
                            .zip(self.val(*a).data())
                            .map(|(&gv, &av)| gv * av)
                            .collect(),
                    );
                    self.accum_owned(grads, *b, d);
                }
            }
            Op::Scale(x, k) => {
                let kk = S::from_f64(*k);
                let d = Tensor::new(g.shape().to_vec(), g.data().iter().map(|&v| v * kk).collect());
                self.accum_owned(grads, *x, d);
            }
            Op::AffineConst(x, a, b) => {
                debug_assert!(b.is_finite());
                let aa = S::from_f64(*a);
                let d = Tensor::new(g.shape().to_vec(), g.data().iter().map(|&v| v * aa).collect());
                self.accum_owned(grads, *x, d);
            }
            Op::Relu(x) => {
                let d = Tensor::new(
                    g.shape().to_vec(),
                    g.data()
                        .iter()
                        .zip(self.val(*x).data())
                        .map(|(&gv, &xv)| if xv > S::ZERO { gv } else { S::ZERO })
                        .collect(),
                );
                self.accum_owned(grads, *x, d);
            }
            Op::LeakyRelu(x, slope) => {
                let s = S::from_f64(*slope);
                let d = Tensor::new(
                    g.shape().to_vec(),
                    g.data()
                        .iter()
                        .zip(self.val(*x).data())
                        .map(|(&gv, &xv)| if xv > S::ZERO { gv } else { gv * s })
                        .collect(),
                );
                self.accum_owned(grads, *x, d);
            }
            Op::Tanh(x) => {
                let d = Tensor::new(
                    g.shape().to_vec(),
                    g.data()
                        .iter()
                        .zip(node.value.data())
                        .map(|(&gv, &yv)| gv * (S::ONE - yv * yv))
                        .collect(),
                );
                self.accum_owned(grads, *x, d);
            }
            Op::Sigmoid(x) => {
                let d = Tensor::new(
                    g.shape().to_vec(),
                    g.data()
                        .iter()
                        .zip(node.value.data())
                        .map(|(&gv, &yv)| gv * yv * (S::ONE - yv))
                        .collect(),
                );
                self.accum_owned(grads, *x, d);
            }
            Op::ClampProbs(x, eps) => {
                let lo = S::from_f64(*eps);
                let hi = S::from_f64(1.0 - *eps);
                let d = Tensor::new(
                    g.shape().to_vec(),
                    g.data()
                        .iter()
                        .zip(self.val(*x).data())
                        .map(|(&gv, &xv)| if xv > lo && xv < hi { gv } else { S::ZERO })
                        .collect(),
                );
                self.accum_owned(grads, *x, d);
            }
            Op::Ln(x) => {
                let d = Tensor::new(
                    g.shape().to_vec(),
                    g.data()
                        .iter()
                        .zip(self.val(*x).data())
                        .map(|(&gv, &xv)| gv / xv)
                        .collect(),
                );
                self.accum_owned(grads, *x, d);
            }
            Op::Reshape(x) => {
                let d = g.clone().reshaped(self.shape(*x).to_vec());
                self.accum_owned(grads, *x, d);
            }
            Op::SliceRows { x, lo, hi } => {
                if self.nodes[x.0].need {
                    let c = self.shape(*x)[1];
                    debug_assert_eq!((hi - lo) * c, g.numel());
                    let mut d = Tensor::zeros(self.shape(*x).to_vec());
                    d.data_mut()[lo * c..lo * c + g.numel()].copy_from_slice(g.data());
                    self.accum_owned(grads, *x, d);
                }
            }
            Op::StackRows(parts) => {
                let mut off = 0usize;
                for &p in parts {
                    let cnt = self.val(p).numel();
                    if self.nodes[p.0].need {
                        let d = Tensor::new(
                            self.shape(p).to_vec(),
                            g.data()[off..off + cnt].to_vec(),
                        );
                        self.accum_owned(grads, p, d);
                    }
                    off += cnt;
                }
            }
            Op::ConcatCols(a, b) => {
                let (r, ca) = (self.shape(*a)[0], self.shape(*a)[1]);
                let cb = self.shape(*b)[1];
                if self.nodes[a.0].need {
                    let mut d = Tensor::zeros(vec![r, ca]);
                    for i in 0..r {
                        d.data_mut()[i * ca..(i + 1) * ca]
                            .copy_from_slice(&g.data()[i * (ca + cb)..i * (ca + cb) + ca]);
                    }
                    self.accum_owned(grads, *a, d);
                }
                if self.nodes[b.0].need {
                    let mut d = Tensor::zeros(vec![r, cb]);
                    for i in 0..r {
                        d.data_mut()[i * cb..(i + 1) * cb]
                            .copy_from_slice(&g.data()[i * (ca + cb) + ca..(i + 1) * (ca + cb)]);
                    }
                    self.accum_owned(grads, *b, d);
                }
            }
            Op::SliceCols { x, lo, hi } => {
                if self.nodes[x.0].need {
                    let (r, c) = (self.shape(*x)[0], self.shape(*x)[1]);
                    let cw = hi - lo;
                    let mut d = Tensor::zeros(vec![r, c]);
                    for i in 0..r {
                        d.data_mut()[i * c + lo..i * c + hi]
                            .copy_from_slice(&g.data()[i * cw..(i + 1) * cw]);
                    }
                    self.accum_owned(grads, *x, d);
                }
            }
            Op::AddBiasRows(x, b) => {
                self.accum(grads, *x, g);
                if self.nodes[b.0].need {
                    let c = self.shape(*b)[0];
                    let mut d = Tensor::zeros(vec![c]);
                    for row in g.data().chunks_exact(c) {
                        for (dv, &gv) in d.data_mut().iter_mut().zip(row) {
                            *dv += gv;
                        }
                    }
                    self.accum_owned(grads, *b, d);
                }
            }
            Op::Linear { x, w, b } => {
                let (r, din) = (self.shape(*x)[0], self.shape(*x)[1]);
                let dout = self.shape(*w)[0];
                if self.nodes[x.0].need {
                    // dX = dY (R,Dout) * W (Dout,Din)
                    let mut d = Tensor::zeros(vec![r, din]);
                    S::gemm(
                        r,
                        dout,
                        din,
                        S::ONE,
                        g.data(),
                        dout as isize,
                        1,
                        self.val(*w).data(),
                        din as isize,
                        1,
                        S::ZERO,
                        d.data_mut(),
                        din as isize,
                        1,
                    );
                    self.accum_owned(grads, *x, d);
                }
                if self.nodes[w.0].need {
                    // dW = dY^T (Dout,R) * X (R,Din)
                    let mut d = Tensor::zeros(vec![dout, din]);
                    S::gemm(
                        dout,
                        r,
                        din,
                        S::ONE,
                        g.data(),
                        1,
                        dout as isize,
                        self.val(*x).data(),
                        din as isize,
                        1,
                        S::ZERO,
                        d.data_mut(),
                        din as isize,
                        1,
                    );
                    self.accum_owned(grads, *w, d);
                }
                if let Some(bb) = b {
                    if self.nodes[bb.0].need {
                        let mut d = Tensor::zeros(vec![dout]);
                        for row in g.data().chunks_exact(dout) {
                            for (dv, &gv) in d.data_mut().iter_mut().zip(row) {
                                *dv += gv;
                            }
                        }
                        self.accum_owned(grads, *bb, d);
                    }
                }
            }
            Op::Embedding { table, idx } => {
                if self.nodes[table.0].need {
                    let e = self.shape(*table)[1];
                    let mut d = Tensor::zeros(self.shape(*table).to_vec());
                    for (row, &i) in idx.iter().enumerate() {
                        let dst = &mut d.data_mut()[i * e..(i + 1) * e];
                        for (dv, &gv) in dst.iter_mut().zip(&g.data()[row * e..(row + 1) * e]) {
                            *dv += gv;
                        }
                    }
                    self.accum_owned(grads, *table, d);
                }
            }
            Op::MeanAll(x) => {
                let n = self.val(*x).numel().max(1);
                let gv = g.item() / S::from_f64(n as f64);
                let d = Tensor::filled(self.shape(*x).to_vec(), gv);
                self.accum_owned(grads, *x, d);
            }
            Op::L1DiffMean(a, b) => {
                let n = self.val(*a).numel().max(1);
                let gv = g.item() / S::from_f64(n as f64);
                let signs: Vec<S> = self
                    .val(*a)
                    .data()
                    .iter()
                    .zip(self.val(*b).data())
                    .map(|(&x, &y)| {
                        if x > y {
                            gv
                        } else if x < y {
                            -gv
                        } else {
                            S::ZERO
                        }
                    })
                    .collect();
                if self.nodes[a.0].need {
                    let d = Tensor::new(self.shape(*a).to_vec(), signs.clone());
                    self.accum_owned(grads, *a, d);
                }
                if self.nodes[b.0].need {
                    let d = Tensor::new(
                        self.shape(*b).to_vec(),
                        signs.iter().map(|&v| -v).collect(),
                    );
                    self.accum_owned(grads, *b, d);
                }
            }
            Op::WeightedSumScalars(terms) => {
                for &(id_t, c) in terms {
                    if self.nodes[id_t.0].need {
                        let d = Tensor::scalar(g.item() * S::from_f64(c));
                        self.accum_owned(grads, id_t, d);
                    }
                }
            }
            Op::SoftmaxRows(x) => {
                let v = node.value.shape()[1];
                let mut d = Tensor::zeros(self.shape(*x).to_vec());
                for ((drow, yrow), grow) in d
                    .data_mut()
                    .chunks_exact_mut(v)
                    .zip(node.value.data().chunks_exact(v))
                    .zip(g.data().chunks_exact(v))
                {
                    let mut dot = S::ZERO;
                    for (&yv, &gv) in yrow.iter().zip(grow) {
                        dot += yv * gv;
                    }
                    for ((dv, &yv), &gv) in drow.iter_mut().zip(yrow).zip(grow) {
                        *dv = yv * (gv - dot);
                    }
                }
                self.accum_owned(grads, *x, d);
            }
            Op::CeLogitsMasked {
                logits,
                targets,
                mask,
                probs,
            } => {
                if self.nodes[logits.0].need {
                    let v = self.shape(*logits)[1];
                    let gv = g.item();
                    let mut d = Tensor::zeros(self.shape(*logits).to_vec());
                    for i in 0..targets.len() {
                        if !mask[i] {
                            continue;
                        }
                        let drow = &mut d.data_mut()[i * v..(i + 1) * v];
                        let prow = &probs[i * v..(i + 1) * v];
                        for (dv, &pv) in drow.iter_mut().zip(prow) {
                            *dv = gv * pv;
                        }
                        drow[targets[i]] -= gv;
                    }
                    self.accum_owned(grads, *logits, d);
                }
            }
            Op::Conv2d {
                x,
                w,
                b,
                stride,
                pad,
                cols,
            } => {
                let sx = self.shape(*x).to_vec();
                let sw = self.shape(*w).to_vec();
                let (n, c_in, h, wd) = (sx[0], sx[1], sx[2], sx[3]);
                let (c_out, kh, kw) = (sw[0], sw[2], sw[3]);
                let ho = conv_out(h, kh, stride.0, pad.0);
                let wo = conv_out(wd, kw, stride.1, pad.1);
                let ckk = c_in * kh * kw;
                let owo = ho * wo;
                if let Some(bb) = b {
                    if self.nodes[bb.0].need {
                        let mut d = Tensor::zeros(vec![c_out]);
                        for yo in g.data().chunks_exact(c_out * owo) {
                            for (ci, yc) in yo.chunks_exact(owo).enumerate() {
                                let mut acc = S::ZERO;
                                for &v in yc {
                                    acc += v;
                                }
                                d.data_mut()[ci] += acc;
                            }
                        }
                        self.accum_owned(grads, *bb, d);
                    }
                }
                if self.nodes[w.0].need {
                    // Fixed chunking over samples, combined in order.
                    let chunk = n.div_ceil(4).max(1);
                    let partials: Vec<Tensor<S>> = (0..n)
                        .collect::<Vec<_>>()
                        .par_chunks(chunk)
                        .map(|idxs| {
                            let mut dw = Tensor::zeros(vec![c_out, ckk]);
                            for &i in idxs {
                                let dy = &g.data()[i * c_out * owo..(i + 1) * c_out * owo];
                                let col = &cols[i * ckk * owo..(i + 1) * ckk * owo];
                                // dW += dY (Cout,OWO) * col^T (OWO,CKK)
                                S::gemm(
                                    c_out,
                                    owo,
                                    ckk,
                                    S::ONE,
                                    dy,
                                    owo as isize,
                                    1,
                                    col,
                                    1,
                                    owo as isize,
                                    S::ONE,
                                    dw.data_mut(),
                                    ckk as isize,
                                    1,
                                );
                            }
                            dw
                        })
                        .collect();
                    let mut dw = Tensor::zeros(vec![c_out, ckk]);
                    for p in partials {
                        for (a, &v) in dw.data_mut().iter_mut().zip(p.data()) {
                            *a += v;
                        }
                    }
                    self.accum_owned(grads, *w, dw.reshaped(sw.clone()));
                }
                if self.nodes[x.0].need {
                    let wdata = self.val(*w).data();
                    let mut dx = Tensor::zeros(sx.clone());
                    let xs = c_in * h * wd;
                    dx.data_mut()
                        .par_chunks_exact_mut(xs)
                        .enumerate()
                        .for_each(|(i, dxn)| {
                            let dy = &g.data()[i * c_out * owo..(i + 1) * c_out * owo];
                            let mut dcol = vec![S::ZERO; ckk * owo];
                            // dcol = W^T (CKK,Cout) * dY (Cout,OWO)
                            S::gemm(
                                ckk,
                                c_out,
                                owo,
                                S::ONE,
                                wdata,
                                1,
                                ckk as isize,
                                dy,
                                owo as isize,
                                1,
                                S::ZERO,
                                &mut dcol,
                                owo as isize,
                                1,
                            );
                            col2im_add(&dcol, c_in, h, wd, kh, kw, *stride, *pad, dxn);
                        });
                    self.accum_owned(grads, *x, dx);
                }
            }
            Op::InstanceNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            } => {
                let sh = self.shape(*x).to_vec();
                let (n, c, h, w) = (sh[0], sh[1], sh[2], sh[3]);
                let hw = h * w;
                let gd = self.val(*gamma).data();
                if self.nodes[beta.0].need {
                    let mut d = Tensor::zeros(vec![c]);
                    for i in 0..n {
                        for ci in 0..c {
                            let mut acc = S::ZERO;
                            for &gv in &g.data()[(i * c + ci) * hw..(i * c + ci + 1) * hw] {
                                acc += gv;
                            }
                            d.data_mut()[ci] += acc;
                        }
                    }
                    self.accum_owned(grads, *beta, d);
                }
                if self.nodes[gamma.0].need {
                    let mut d = Tensor::zeros(vec![c]);
                    for i in 0..n {
                        for ci in 0..c {
                            let base = (i * c + ci) * hw;
                            let mut acc = S::ZERO;
                            for (gv, hv) in g.data()[base..base + hw]
                                .iter()
                                .zip(&xhat[base..base + hw])
                            {
                                acc += *gv * *hv;
                            }
                            d.data_mut()[ci] += acc;
                        }
                    }
                    self.accum_owned(grads, *gamma, d);
                }
                if self.nodes[x.0].need {
                    let mut dx = Tensor::zeros(sh.clone());
                    let inv_hw = S::from_f64(1.0 / hw as f64);
                    dx.data_mut()
                        .par_chunks_exact_mut(c * hw)
                        .enumerate()
                        .for_each(|(i, dxn)| {
                            for ci in 0..c {
                                let base = (i * c + ci) * hw;
                                let gs = &g.data()[base..base + hw];
                                let hs = &xhat[base..base + hw];
                                let istd = inv_std[i * c + ci];
                                let gc = gd[ci];
                                let mut mean_g = S::ZERO;
                                let mut mean_gh = S::ZERO;
                                for (&gv, &hv) in gs.iter().zip(hs) {
                                    mean_g += gv;
                                    mean_gh += gv * hv;
                                }
                                mean_g *= inv_hw;
                                mean_gh *= inv_hw;
                                let dst = &mut dxn[ci * hw..(ci + 1) * hw];
                                for ((dv, &gv), &hv) in dst.iter_mut().zip(gs).zip(hs) {
                                    *dv = gc * istd * (gv - mean_g - hv * mean_gh);
                                }
                            }
                        });
                    self.accum_owned(grads, *x, dx);
                }
            }
            Op::UpsampleNearest { x, fh, fw } => {
                if self.nodes[x.0].need {
                    let sh = self.shape(*x).to_vec();
                    let (n, c, h, w) = (sh[0], sh[1], sh[2], sh[3]);
                    let (ho, wo) = (h * fh, w * fw);
                    let mut d = Tensor::zeros(sh.clone());
                    for nc in 0..n * c {
                        let src = &g.data()[nc * ho * wo..(nc + 1) * ho * wo];
                        let dst = &mut d.data_mut()[nc * h * w..(nc + 1) * h * w];
                        for oy in 0..ho {
                            let iy = oy / fh;
                            for ox in 0..wo {
                                dst[iy * w + ox / fw] += src[oy * wo + ox];
                            }
                        }
                    }
                    self.accum_owned(grads, *x, d);
                }
            }
            Op::ConcatChan(a, b) => {
                let sa = self.shape(*a).to_vec();
                let sb = self.shape(*b).to_vec();
                let (n, ca, cb, hw) = (sa[0], sa[1], sb[1], sa[2] * sa[3]);
                if self.nodes[a.0].need {
                    let mut d = Tensor::zeros(sa.clone());
                    for i in 0..n {
                        d.data_mut()[i * ca * hw..(i + 1) * ca * hw].copy_from_slice(
                            &g.data()[i * (ca + cb) * hw..i * (ca + cb) * hw + ca * hw],
                        );
                    }
                    self.accum_owned(grads, *a, d);
                }
                if self.nodes[b.0].need {
                    let mut d = Tensor::zeros(sb.clone());
                    for i in 0..n {
                        d.data_mut()[i * cb * hw..(i + 1) * cb * hw].copy_from_slice(
                            &g.data()
                                [i * (ca + cb) * hw + ca * hw..(i + 1) * (ca + cb) * hw],
                        );
                    }
                    self.accum_owned(grads, *b, d);
                }
            }
            Op::MeanOverH(x) => {
                if self.nodes[x.0].need {
                    let sh = self.shape(*x).to_vec();
                    let (n, c, h, w) = (sh[0], sh[1], sh[2], sh[3]);
                    let inv = S::from_f64(1.0 / h as f64);
                    let mut d = Tensor::zeros(sh.clone());
                    for nc in 0..n * c {
                        let src = &g.data()[nc * w..(nc + 1) * w];
                        let dst = &mut d.data_mut()[nc * h * w..(nc + 1) * h * w];
                        for row in dst.chunks_exact_mut(w) {
                            for (dv, &gv) in row.iter_mut().zip(src) {
                                *dv = gv * inv;
                            }
                        }
                    }
                    self.accum_owned(grads, *x, d);
                }
            }
            Op::NcwToLnc(x) => {
                if self.nodes[x.0].need {
                    let sh = self.shape(*x).to_vec();
                    let (n, c, w) = (sh[0], sh[1], sh[2]);
                    let mut d = Tensor::zeros(sh.clone());
                    for l in 0..w {
                        for i in 0..n {
                            let src = &g.data()[(l * n + i) * c..(l * n + i + 1) * c];
                            for (ci, &gv) in src.iter().enumerate() {
                                d.data_mut()[(i * c + ci) * w + l] += gv;
                            }
                        }
                    }
                    self.accum_owned(grads, *x, d);
                }
            }
            Op::SeqToMap { x, h } => {
                if self.nodes[x.0].need {
                    let sh = self.shape(*x).to_vec();
                    let (l, n, dd) = (sh[0], sh[1], sh[2]);
                    let mut d = Tensor::zeros(sh.clone());
                    for i in 0..n {
                        for di in 0..dd {
                            let base = (i * dd + di) * h * l;
                            for li in 0..l {
                                let mut acc = S::ZERO;
                                for hi in 0..*h {
                                    acc += g.data()[base + hi * l + li];
                                }
                                d.data_mut()[(li * n + i) * dd + di] += acc;
                            }
                        }
                    }
                    self.accum_owned(grads, *x, d);
                }
            }
            Op::SeqMean(x) => {
                if self.nodes[x.0].need {
                    let sh = self.shape(*x).to_vec();
                    let (l, n, dd) = (sh[0], sh[1], sh[2]);
                    let inv = S::from_f64(1.0 / l as f64);
                    let mut d = Tensor::zeros(sh.clone());
                    for li in 0..l {
                        let dst = &mut d.data_mut()[li * n * dd..(li + 1) * n * dd];
                        for (dv, &gv) in dst.iter_mut().zip(g.data()) {
                            *dv = gv * inv;
                        }
                    }
                    self.accum_owned(grads, *x, d);
                }
            }
            Op::BroadcastVecMap { x, h, w } => {
                if self.nodes[x.0].need {
                    let sh = self.shape(*x).to_vec();
                    let nd = sh[0] * sh[1];
                    let hw = h * w;
                    let mut d = Tensor::zeros(sh.clone());
                    for i in 0..nd {
                        let mut acc = S::ZERO;
                        for &gv in &g.data()[i * hw..(i + 1) * hw] {
                            acc += gv;
                        }
                        d.data_mut()[i] = acc;
                    }
                    self.accum_owned(grads, *x, d);
                }
            }
            Op::SeqLinterp { x, l_out } => {
                if self.nodes[x.0].need {
                    let sh = self.shape(*x).to_vec();
                    let (l_in, n, dd) = (sh[0], sh[1], sh[2]);
                    let nd = n * dd;
                    let mut d = Tensor::zeros(sh.clone());
                    for j in 0..*l_out {
                        let pos = if *l_out == 1 {
                            0.0
                        } else {
                            j as f64 * (l_in - 1) as f64 / (*l_out - 1) as f64
                        };
                        let i0 = pos.floor() as usize;
                        let i1 = (i0 + 1).min(l_in - 1);
                        let f = S::from_f64(pos - i0 as f64);
                        let omf = S::ONE - f;
                        let src = &g.data()[j * nd..(j + 1) * nd];
                        for (k, &gv) in src.iter().enumerate() {
                            d.data_mut()[i0 * nd + k] += omf * gv;
                            d.data_mut()[i1 * nd + k] += f * gv;
                        }
                    }
                    self.accum_owned(grads, *x, d);
                }
            }
            Op::SoftmaxDim0(x) => {
                if self.nodes[x.0].need {
                    let sh = self.shape(*x).to_vec();
                    let (l, n) = (sh[0], sh[1]);
                    let y = node.value.data();
                    let mut d = Tensor::zeros(sh.clone());
                    for col in 0..n {
                        let mut dot = S::ZERO;
                        for li in 0..l {
                            dot += y[li * n + col] * g.data()[li * n + col];
                        }
                        for li in 0..l {
                            d.data_mut()[li * n + col] =
                                y[li * n + col] * (g.data()[li * n + col] - dot);
                        }
                    }
                    self.accum_owned(grads, *x, d);
                }
            }
            Op::AddBroadcastSeq { keys, query } => {
                let sk = self.shape(*keys).to_vec();
                let (l, n, a) = (sk[0], sk[1], sk[2]);
                self.accum(grads, *keys, g);
                if self.nodes[query.0].need {
                    let mut d = Tensor::zeros(vec![n, a]);
                    for li in 0..l {
                        let src = &g.data()[li * n * a..(li + 1) * n * a];
                        for (dv, &gv) in d.data_mut().iter_mut().zip(src) {
                            *dv += gv;
                        }
                    }
                    self.accum_owned(grads, *query, d);
                }
            }
            Op::WeightedCtx { h, alpha } => {
                let sh = self.shape(*h).to_vec();
                let (l, n, dd) = (sh[0], sh[1], sh[2]);
                if self.nodes[alpha.0].need {
                    let hd = self.val(*h).data();
                    let mut d = Tensor::zeros(vec![l, n]);
                    for li in 0..l {
                        for i in 0..n {
                            let src = &hd[(li * n + i) * dd..(li * n + i + 1) * dd];
                            let gsl = &g.data()[i * dd..(i + 1) * dd];
                            let mut acc = S::ZERO;
                            for (&hv, &gv) in src.iter().zip(gsl) {
                                acc += hv * gv;
                            }
                            d.data_mut()[li * n + i] = acc;
                        }
                    }
                    self.accum_owned(grads, *alpha, d);
                }
                if self.nodes[h.0].need {
                    let ad = self.val(*alpha).data();
                    let mut d = Tensor::zeros(sh.clone());
                    for li in 0..l {
                        for i in 0..n {
                            let a = ad[li * n + i];
                            let dst =
                                &mut d.data_mut()[(li * n + i) * dd..(li * n + i + 1) * dd];
                            let gsl = &g.data()[i * dd..(i + 1) * dd];
                            for (dv, &gv) in dst.iter_mut().zip(gsl) {
                                *dv = a * gv;
                            }
                        }
                    }
                    self.accum_owned(grads, *h, d);
                }
            }
        }
    }
}

fn softmax_into<S: Scalar>(row: &[S], out: &mut [S]) {
    let mut mx = row[0];
    for &v in &row[1..] {
        mx = mx.maxs(v);
    }
    let mut sum = S::ZERO;
    for (o, &v) in out.iter_mut().zip(row) {
        let e = (v - mx).exp();
        *o = e;
        sum += e;
    }
    let inv = S::ONE / sum;
    for o in out.iter_mut() {
        *o *= inv;
    }
}
