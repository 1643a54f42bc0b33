//! Per-op verification: forward values against straightforward reference
//! implementations and analytic gradients against central finite differences
//! in f64.

use stedit_tensor::{Rng, Tape, Tensor, VarId};

type Build = dyn Fn(&mut Tape<f64>, &[VarId]) -> VarId;

fn rand_tensor(shape: Vec<usize>, rng: &mut Rng, lo: f64, hi: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.range_f64(lo, hi)).collect();
    Tensor::new(shape, data)
}

/// Scalar objective: mean(out * fixed random projection) so every output
/// element affects the loss.
fn objective(tape: &mut Tape<f64>, out: VarId, proj: &Tensor<f64>) -> VarId {
    if tape.val(out).numel() == 1 {
        return out;
    }
    let p = tape.constant(proj.clone());
    let prod = tape.mul(out, p);
    tape.mean_all(prod)
}

fn eval(values: &[Tensor<f64>], build: &Build, proj: &Tensor<f64>) -> f64 {
    let mut tape = Tape::new();
    let leaves: Vec<VarId> = values.iter().map(|v| tape.leaf(v.clone(), true)).collect();
    let out = build(&mut tape, &leaves);
    let loss = objective(&mut tape, out, proj);
    tape.val(loss).item()
}

fn fd_check(values: &[Tensor<f64>], build: &Build, tol: f64) {
    // Analytic gradients.
    let mut tape = Tape::new();
    let leaves: Vec<VarId> = values.iter().map(|v| tape.leaf(v.clone(), true)).collect();
    let out = build(&mut tape, &leaves);
    let proj = {
        let mut rng = Rng::new(0xFEED);
        rand_tensor(tape.val(out).shape().to_vec(), &mut rng, -1.0, 1.0)
    };
    let loss = objective(&mut tape, out, &proj);
    let grads = tape.backward(loss);

    let h = 1e-5;
    for (ti, v) in values.iter().enumerate() {
        let g = grads[leaves[ti].0]
            .as_ref()
            .unwrap_or_else(|| panic!("missing grad for input {ti}"));
        // Check every element for small tensors, a strided subset for big ones.
        let stride = (v.numel() / 64).max(1);
        for ei in (0..v.numel()).step_by(stride) {
            let mut vp = values.to_vec();
            vp[ti].data_mut()[ei] += h;
            let up = eval(&vp, build, &proj);
            vp[ti].data_mut()[ei] -= 2.0 * h;
            let dn = eval(&vp, build, &proj);
            let fd = (up - dn) / (2.0 * h);
            let an = g.data()[ei];
            let denom = an.abs().max(fd.abs()).max(1e-6);
            assert!(
                ((an - fd).abs() / denom) < tol,
                "input {ti} elem {ei}: analytic {an} vs fd {fd}"
            );
        }
    }
}

#[test]
fn grad_elementwise_ops() {
    let mut rng = Rng::new(1);
    let a = rand_tensor(vec![3, 4], &mut rng, -1.0, 1.0);
    let b = rand_tensor(vec![3, 4], &mut rng, -1.0, 1.0);
    fd_check(&[a.clone(), b.clone()], &|t, l| t.add(l[0], l[1]), 1e-6);
    fd_check(&[a.clone(), b.clone()], &|t, l| t.sub(l[0], l[1]), 1e-6);
    fd_check(&[a.clone(), b.clone()], &|t, l| t.mul(l[0], l[1]), 1e-6);
    fd_check(&[a.clone()], &|t, l| t.scale(l[0], -2.5), 1e-6);
    fd_check(&[a.clone()], &|t, l| t.affine_const(l[0], 0.5, 0.5), 1e-6);
    fd_check(&[a.clone()], &|t, l| t.tanh(l[0]), 1e-6);
    fd_check(&[a.clone()], &|t, l| t.sigmoid(l[0]), 1e-6);
    // Keep ReLU inputs away from the kink.
    let c = Tensor::new(
        vec![3, 4],
        a.data().iter().map(|&v| if v.abs() < 0.05 { v + 0.3 } else { v }).collect(),
    );
    fd_check(&[c.clone()], &|t, l| t.relu(l[0]), 1e-5);
    fd_check(&[c.clone()], &|t, l| t.leaky_relu(l[0], 0.2), 1e-5);
    let pos = rand_tensor(vec![3, 4], &mut rng, 0.1, 0.9);
    fd_check(&[pos.clone()], &|t, l| t.ln(l[0]), 1e-6);
    fd_check(&[pos], &|t, l| t.clamp_probs(l[0], 1e-6), 1e-6);
}

#[test]
fn grad_structural_ops() {
    let mut rng = Rng::new(2);
    let a = rand_tensor(vec![4, 6], &mut rng, -1.0, 1.0);
    let b = rand_tensor(vec![4, 3], &mut rng, -1.0, 1.0);
    fd_check(&[a.clone()], &|t, l| t.reshape(l[0], vec![2, 12]), 1e-6);
    fd_check(&[a.clone()], &|t, l| t.slice_rows(l[0], 1, 3), 1e-6);
    fd_check(&[a.clone()], &|t, l| t.slice_cols(l[0], 2, 5), 1e-6);
    fd_check(&[a.clone(), b.clone()], &|t, l| t.concat_cols(l[0], l[1]), 1e-6);
    fd_check(
        &[a.clone(), a.clone()],
        &|t, l| t.stack_rows(&[l[0], l[1]]),
        1e-6,
    );
    let bias = rand_tensor(vec![6], &mut rng, -1.0, 1.0);
    fd_check(&[a.clone(), bias], &|t, l| t.add_bias_rows(l[0], l[1]), 1e-6);
}

#[test]
fn linear_matches_reference_and_grads() {
    let mut rng = Rng::new(3);
    let x = rand_tensor(vec![5, 7], &mut rng, -1.0, 1.0);
    let w = rand_tensor(vec![4, 7], &mut rng, -1.0, 1.0);
    let b = rand_tensor(vec![4], &mut rng, -1.0, 1.0);

    let mut tape = Tape::new();
    let xi = tape.constant(x.clone());
    let wi = tape.constant(w.clone());
    let bi = tape.constant(b.clone());
    let y = tape.linear(xi, wi, Some(bi));
    for i in 0..5 {
        for o in 0..4 {
            let mut acc = b.data()[o];
            for k in 0..7 {
                acc += x.data()[i * 7 + k] * w.data()[o * 7 + k];
            }
            let got = tape.val(y).data()[i * 4 + o];
            assert!((got - acc).abs() < 1e-12);
        }
    }
    fd_check(&[x, w, b], &|t, l| t.linear(l[0], l[1], Some(l[2])), 1e-6);
}

#[test]
fn conv2d_matches_reference() {
    let mut rng = Rng::new(4);
    let x = rand_tensor(vec![2, 3, 5, 7], &mut rng, -1.0, 1.0);
    let w = rand_tensor(vec![4, 3, 3, 3], &mut rng, -1.0, 1.0);
    let b = rand_tensor(vec![4], &mut rng, -1.0, 1.0);
    let (stride, pad) = ((2usize, 1usize), (1usize, 1usize));

    let mut tape = Tape::new();
    let xi = tape.constant(x.clone());
    let wi = tape.constant(w.clone());
    let bi = tape.constant(b.clone());
    let y = tape.conv2d(xi, wi, Some(bi), stride, pad);
    assert_eq!(tape.shape(y), &[2, 4, 3, 7]);

    // Direct convolution.
    let (ho, wo) = (3usize, 7usize);
    for n in 0..2 {
        for o in 0..4 {
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut acc = b.data()[o];
                    for c in 0..3 {
                        for ki in 0..3 {
                            for kj in 0..3 {
                                let iy = (oy * stride.0 + ki) as isize - pad.0 as isize;
                                let ix = (ox * stride.1 + kj) as isize - pad.1 as isize;
                                if iy < 0 || iy >= 5 || ix < 0 || ix >= 7 {
                                    continue;
                                }
                                let xv = x.data()
                                    [((n * 3 + c) * 5 + iy as usize) * 7 + ix as usize];
                                let wv = w.data()[((o * 3 + c) * 3 + ki) * 3 + kj];
                                acc += xv * wv;
                            }
                        }
                    }
                    let got = tape.val(y).data()[((n * 4 + o) * ho + oy) * wo + ox];
                    assert!((got - acc).abs() < 1e-10, "conv mismatch {got} vs {acc}");
                }
            }
        }
    }
    fd_check(
        &[x, w, b],
        &|t, l| t.conv2d(l[0], l[1], Some(l[2]), (2, 1), (1, 1)),
        1e-5,
    );
}

#[test]
fn grad_instance_norm() {
    let mut rng = Rng::new(5);
    let x = rand_tensor(vec![2, 3, 4, 5], &mut rng, -1.0, 1.0);
    let g = rand_tensor(vec![3], &mut rng, 0.5, 1.5);
    let b = rand_tensor(vec![3], &mut rng, -0.5, 0.5);
    fd_check(
        &[x, g, b],
        &|t, l| t.instance_norm(l[0], l[1], l[2], 1e-5),
        1e-4,
    );
}

#[test]
fn instance_norm_normalizes() {
    let mut rng = Rng::new(6);
    let x = rand_tensor(vec![2, 2, 6, 6], &mut rng, -3.0, 5.0);
    let mut tape = Tape::new();
    let xi = tape.constant(x);
    let g = tape.constant(Tensor::filled(vec![2], 1.0));
    let b = tape.constant(Tensor::filled(vec![2], 0.0));
    let y = tape.instance_norm(xi, g, b, 1e-8);
    for nc in 0..4 {
        let sl = &tape.val(y).data()[nc * 36..(nc + 1) * 36];
        let mean: f64 = sl.iter().sum::<f64>() / 36.0;
        let var: f64 = sl.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 36.0;
        assert!(mean.abs() < 1e-9);
        assert!((var - 1.0).abs() < 1e-6);
    }
}

#[test]
fn grad_image_shape_ops() {
    let mut rng = Rng::new(7);
    let x = rand_tensor(vec![2, 3, 2, 4], &mut rng, -1.0, 1.0);
    fd_check(&[x.clone()], &|t, l| t.upsample_nearest(l[0], 2, 1), 1e-6);
    fd_check(&[x.clone()], &|t, l| t.upsample_nearest(l[0], 2, 2), 1e-6);
    fd_check(&[x.clone()], &|t, l| t.mean_over_h(l[0]), 1e-6);
    let y = rand_tensor(vec![2, 5, 2, 4], &mut rng, -1.0, 1.0);
    fd_check(&[x.clone(), y], &|t, l| t.concat_chan(l[0], l[1]), 1e-6);
    let ncw = rand_tensor(vec![2, 3, 4], &mut rng, -1.0, 1.0);
    fd_check(&[ncw], &|t, l| t.ncw_to_lnc(l[0]), 1e-6);
}

#[test]
fn grad_sequence_ops() {
    let mut rng = Rng::new(8);
    let seq = rand_tensor(vec![5, 2, 3], &mut rng, -1.0, 1.0);
    fd_check(&[seq.clone()], &|t, l| t.seq_to_map(l[0], 2), 1e-6);
    fd_check(&[seq.clone()], &|t, l| t.seq_mean(l[0]), 1e-6);
    fd_check(&[seq.clone()], &|t, l| t.seq_linterp(l[0], 8), 1e-6);
    fd_check(&[seq.clone()], &|t, l| t.seq_linterp(l[0], 3), 1e-6);
    let vecs = rand_tensor(vec![2, 3], &mut rng, -1.0, 1.0);
    fd_check(&[vecs], &|t, l| t.broadcast_vec_map(l[0], 2, 3), 1e-6);
    let scores = rand_tensor(vec![5, 2], &mut rng, -2.0, 2.0);
    fd_check(&[scores.clone()], &|t, l| t.softmax_dim0(l[0]), 1e-5);
    let q = rand_tensor(vec![2, 3], &mut rng, -1.0, 1.0);
    fd_check(
        &[seq.clone(), q],
        &|t, l| t.add_broadcast_seq(l[0], l[1]),
        1e-6,
    );
    let alpha = rand_tensor(vec![5, 2], &mut rng, 0.0, 1.0);
    fd_check(&[seq, alpha], &|t, l| t.weighted_ctx(l[0], l[1]), 1e-6);
}

#[test]
fn seq_linterp_identity_when_lengths_match() {
    let mut rng = Rng::new(9);
    let seq = rand_tensor(vec![6, 2, 3], &mut rng, -1.0, 1.0);
    let mut tape = Tape::new();
    let s = tape.constant(seq.clone());
    let out = tape.seq_linterp(s, 6);
    assert_eq!(tape.val(out).data(), seq.data());
}

#[test]
fn grad_reductions_and_losses() {
    let mut rng = Rng::new(10);
    let a = rand_tensor(vec![3, 4], &mut rng, -1.0, 1.0);
    // Keep |a-b| away from zero so the L1 kink does not bite.
    let b = Tensor::new(
        vec![3, 4],
        a.data().iter().map(|&v| v + 0.3).collect(),
    );
    fd_check(&[a.clone()], &|t, l| t.mean_all(l[0]), 1e-6);
    fd_check(&[a.clone(), b], &|t, l| t.l1_diff_mean(l[0], l[1]), 1e-5);
    fd_check(
        &[a.clone(), a.clone()],
        &|t, l| {
            let m1 = t.mean_all(l[0]);
            let m2 = t.mean_all(l[1]);
            t.weighted_sum_scalars(&[(m1, 0.3), (m2, -1.7)])
        },
        1e-6,
    );
    fd_check(&[a.clone()], &|t, l| t.softmax_rows(l[0]), 1e-5);

    let logits = rand_tensor(vec![4, 5], &mut rng, -2.0, 2.0);
    let targets = vec![0usize, 3, 2, 1];
    let mask = vec![true, true, false, true];
    fd_check(
        &[logits],
        &|t, l| t.ce_logits_masked(l[0], &[0, 3, 2, 1], &[true, true, false, true]),
        1e-5,
    );
    // CE value check: uniform logits over V classes -> ln V per masked row.
    let mut tape = Tape::new();
    let li = tape.constant(Tensor::filled(vec![4, 5], 0.7));
    let ce = tape.ce_logits_masked(li, &targets, &mask);
    assert!((tape.val(ce).item() - 3.0 * (5.0f64).ln()).abs() < 1e-12);
}

#[test]
fn grad_embedding() {
    let mut rng = Rng::new(11);
    let table = rand_tensor(vec![7, 4], &mut rng, -1.0, 1.0);
    fd_check(&[table], &|t, l| t.embedding(l[0], &[2, 2, 5, 0]), 1e-6);
}

#[test]
fn detach_blocks_gradient() {
    let mut rng = Rng::new(12);
    let a = rand_tensor(vec![3, 3], &mut rng, -1.0, 1.0);
    let mut tape = Tape::new();
    let ai = tape.leaf(a.clone(), true);
    let d = tape.detach(ai);
    let m = tape.mul(ai, d);
    let loss = tape.mean_all(m);
    let grads = tape.backward(loss);
    // d(mean(a * stopgrad(a)))/da = stopgrad(a)/n, not 2a/n.
    let g = grads[ai.0].as_ref().unwrap();
    for (gv, av) in g.data().iter().zip(a.data()) {
        assert!((gv - av / 9.0).abs() < 1e-12);
    }
    assert!(grads[d.0].is_none() || grads[d.0].as_ref().unwrap().data().iter().all(|&v| v == 0.0));
}

#[test]
fn constants_skip_backward_work() {
    let mut tape: Tape<f64> = Tape::new();
    let c = tape.constant(Tensor::filled(vec![2, 2], 1.0));
    let d = tape.constant(Tensor::filled(vec![2, 2], 2.0));
    let m = tape.mul(c, d);
    let loss = tape.mean_all(m);
    assert!(!tape.needs_grad(loss));
    let grads = tape.backward(loss);
    assert!(grads[c.0].is_none());
    assert!(grads[d.0].is_none());
}

#[test]
fn gradient_accumulates_over_shared_use() {
    let a = Tensor::filled(vec![2], 3.0);
    let mut tape = Tape::new();
    let ai = tape.leaf(a, true);
    let s = tape.add(ai, ai);
    let loss = tape.mean_all(s);
    let grads = tape.backward(loss);
    let g = grads[ai.0].as_ref().unwrap();
    assert_eq!(g.data(), &[1.0, 1.0]);
}
