//! Attention-based autoregressive text head over the content sequence:
//! additive attention, a single LSTM cell, greedy decoding at inference
//! and teacher forcing for the recognition loss.

use crate::data::codec::{CharsetCodec, EOS, GO, PAD};
use crate::model::config::ModelConfig;
use crate::model::layers::{linear, lstm, LinH, LstmH};
use crate::model::params::{Network, ParamSink};
use stedit_tensor::{Scalar, Tape, Tensor, VarId};

pub struct RecognizerNet {
    embed: VarId,
    key: LinH,
    query: LinH,
    score: LinH,
    cell: LstmH,
    out: LinH,
    hidden: usize,
    vocab: usize,
}

impl RecognizerNet {
    pub fn build<S: Scalar, P: ParamSink<S>>(p: &mut P, cfg: &ModelConfig) -> Self {
        const NET: Network = Network::Recognizer;
        let embed = p.param(
            "rec.embed",
            NET,
            &[cfg.charset_size, cfg.embed_dim],
            crate::model::params::Init::Normal(0.02),
        );
        Self {
            embed,
            key: linear(p, "rec.attn.key", NET, cfg.attn_dim, cfg.content_dim, true),
            query: linear(p, "rec.attn.query", NET, cfg.attn_dim, cfg.recurrent_hidden, false),
            score: linear(p, "rec.attn.score", NET, 1, cfg.attn_dim, false),
            cell: lstm(
                p,
                "rec.cell",
                NET,
                cfg.recurrent_hidden,
                cfg.embed_dim + cfg.content_dim,
            ),
            out: linear(p, "rec.out", NET, cfg.charset_size, cfg.recurrent_hidden, true),
            hidden: cfg.recurrent_hidden,
            vocab: cfg.charset_size,
        }
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    fn attend<S: Scalar>(
        &self,
        t: &mut Tape<S>,
        content: VarId,
        keys: VarId,
        h: VarId,
        l: usize,
        n: usize,
    ) -> VarId {
        let q = self.query.apply(t, h); // (N,A)
        let added = t.add_broadcast_seq(keys, q); // (L,N,A)
        let act = t.tanh(added);
        let a = t.shape(act)[2];
        let flat = t.reshape(act, vec![l * n, a]);
        let e = self.score.apply(t, flat); // (L*N,1)
        let e2 = t.reshape(e, vec![l, n]);
        let alpha = t.softmax_dim0(e2); // (L,N)
        t.weighted_ctx(content, alpha) // (N,D)
    }

    fn keys<S: Scalar>(&self, t: &mut Tape<S>, content: VarId) -> (VarId, usize, usize) {
        let sh = t.shape(content).to_vec();
        let (l, n, d) = (sh[0], sh[1], sh[2]);
        let flat = t.reshape(content, vec![l * n, d]);
        let k = self.key.apply(t, flat);
        let a = t.shape(k)[1];
        (t.reshape(k, vec![l, n, a]), l, n)
    }

    fn start_state<S: Scalar>(&self, t: &mut Tape<S>, n: usize) -> (VarId, VarId) {
        (
            t.constant(Tensor::zeros(vec![n, self.hidden])),
            t.constant(Tensor::zeros(vec![n, self.hidden])),
        )
    }

    fn step<S: Scalar>(
        &self,
        t: &mut Tape<S>,
        content: VarId,
        keys: VarId,
        prev: &[usize],
        h: VarId,
        c: VarId,
        l: usize,
        n: usize,
    ) -> (VarId, VarId, VarId) {
        let ctx = self.attend(t, content, keys, h, l, n);
        let emb = t.embedding(self.embed, prev);
        let x = t.concat_cols(emb, ctx);
        let (h2, c2) = self.cell.step(t, x, h, c);
        let logits = self.out.apply(t, h2);
        (logits, h2, c2)
    }

    /// Teacher-forced summed masked cross entropy plus the supervised step
    /// count; labels are codec-encoded rows.
    pub fn teacher_ce<S: Scalar>(
        &self,
        t: &mut Tape<S>,
        content: VarId,
        labels: &[Vec<usize>],
    ) -> (VarId, usize) {
        let (keys, l, n) = self.keys(t, content);
        assert_eq!(labels.len(), n, "labels/batch mismatch");
        let steps_per: Vec<usize> = labels.iter().map(|lb| CharsetCodec::step_count(lb)).collect();
        let max_steps = *steps_per.iter().max().unwrap_or(&1);
        let (mut h, mut c) = self.start_state(t, n);
        let mut ce_terms: Vec<(VarId, f64)> = Vec::with_capacity(max_steps);
        let mut total_count = 0usize;
        for s in 0..max_steps {
            let prev: Vec<usize> = labels
                .iter()
                .map(|lb| if s == 0 { GO } else { lb.get(s - 1).copied().unwrap_or(PAD) })
                .collect();
            let targets: Vec<usize> = labels
                .iter()
                .map(|lb| lb.get(s).copied().unwrap_or(PAD))
                .collect();
            let mask: Vec<bool> = steps_per.iter().map(|&sp| s < sp).collect();
            total_count += mask.iter().filter(|&&m| m).count();
            let (logits, h2, c2) = self.step(t, content, keys, &prev, h, c, l, n);
            h = h2;
            c = c2;
            let ce = t.ce_logits_masked(logits, &targets, &mask);
            ce_terms.push((ce, 1.0));
        }
        let sum = t.weighted_sum_scalars(&ce_terms);
        (sum, total_count.max(1))
    }

    /// Greedy decode: argmax chaining from GO, recording the per-step
    /// distributions for up to `max_len` steps. With `run_all_steps` the
    /// loop emits all `max_len` distributions even after every sequence hit
    /// EOS; decoded strings always stop at the first EOS.
    pub fn greedy<S: Scalar>(
        &self,
        t: &mut Tape<S>,
        content: VarId,
        max_len: usize,
        run_all_steps: bool,
    ) -> (Vec<Vec<usize>>, Vec<Tensor<S>>) {
        let (keys, l, n) = self.keys(t, content);
        let (mut h, mut c) = self.start_state(t, n);
        let mut prev = vec![GO; n];
        let mut seqs: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut done = vec![false; n];
        let mut dists: Vec<Tensor<S>> = Vec::with_capacity(max_len);
        for _ in 0..max_len {
            let (logits, h2, c2) = self.step(t, content, keys, &prev, h, c, l, n);
            h = h2;
            c = c2;
            let probs = t.softmax_rows(logits);
            dists.push(t.val(probs).clone());
            let v = self.vocab;
            let pd = t.val(probs).data();
            let mut next = vec![EOS; n];
            for i in 0..n {
                let row = &pd[i * v..(i + 1) * v];
                let mut best = 0usize;
                for (j, &x) in row.iter().enumerate() {
                    if x > row[best] {
                        best = j;
                    }
                }
                next[i] = best;
                if !done[i] {
                    if best == EOS {
                        done[i] = true;
                    } else {
                        seqs[i].push(best);
                    }
                }
            }
            prev = next;
            if !run_all_steps && done.iter().all(|&d| d) {
                break;
            }
        }
        (seqs, dists)
    }
}
