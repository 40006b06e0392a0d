//! A small pre-LayerNorm transformer encoder with hand-written backward
//! passes, over a flat `f64` parameter vector.
//!
//! Matrices are row-major. A sequence of `n` tokens produces an `n x d`
//! hidden state. Two heads sit on top: mean-pooled 3-way classification and
//! a masked-token head tied to the token embeddings.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::masking::MaskedSequence;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderShape {
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub d_ff: usize,
    pub max_len: usize,
    pub vocab_size: usize,
}

#[derive(Debug, Clone, Copy)]
struct Slot {
    off: usize,
    len: usize,
}

#[derive(Debug, Clone)]
struct LayerSlots {
    ln1_g: Slot,
    ln1_b: Slot,
    wq: Slot,
    bq: Slot,
    wk: Slot,
    bk: Slot,
    wv: Slot,
    bv: Slot,
    wo: Slot,
    bo: Slot,
    ln2_g: Slot,
    ln2_b: Slot,
    w1: Slot,
    b1: Slot,
    w2: Slot,
    b2: Slot,
}

#[derive(Debug, Clone)]
struct Layout {
    tok: Slot,
    pos: Slot,
    layers: Vec<LayerSlots>,
    lnf_g: Slot,
    lnf_b: Slot,
    cls_w: Slot,
    cls_b: Slot,
    mlm_b: Slot,
    total: usize,
}

impl Layout {
    fn new(s: &EncoderShape) -> Self {
        let mut off = 0;
        let mut take = |len: usize| {
            let slot = Slot { off, len };
            off += len;
            slot
        };
        let d = s.d_model;
        let tok = take(s.vocab_size * d);
        let pos = take(s.max_len * d);
        let layers = (0..s.n_layers)
            .map(|_| LayerSlots {
                ln1_g: take(d),
                ln1_b: take(d),
                wq: take(d * d),
                bq: take(d),
                wk: take(d * d),
                bk: take(d),
                wv: take(d * d),
                bv: take(d),
                wo: take(d * d),
                bo: take(d),
                ln2_g: take(d),
                ln2_b: take(d),
                w1: take(d * s.d_ff),
                b1: take(s.d_ff),
                w2: take(s.d_ff * d),
                b2: take(d),
            })
            .collect();
        let lnf_g = take(d);
        let lnf_b = take(d);
        let cls_w = take(d * 3);
        let cls_b = take(3);
        let mlm_b = take(s.vocab_size);
        Layout {
            tok,
            pos,
            layers,
            lnf_g,
            lnf_b,
            cls_w,
            cls_b,
            mlm_b,
            total: off,
        }
    }
}

fn get(p: &[f64], s: Slot) -> &[f64] {
    &p[s.off..s.off + s.len]
}

fn get_mut(p: &mut [f64], s: Slot) -> &mut [f64] {
    &mut p[s.off..s.off + s.len]
}

// ---- dense kernels -------------------------------------------------------

/// `a (n x k) * b (k x m) + bias`.
fn linear(a: &[f64], b: &[f64], bias: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * m);
    for _ in 0..n {
        out.extend_from_slice(bias);
    }
    for i in 0..n {
        let row = &mut out[i * m..(i + 1) * m];
        for (kk, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            for (o, &bv) in row.iter_mut().zip(&b[kk * m..(kk + 1) * m]) {
                *o += av * bv;
            }
        }
    }
    out
}

/// Backward of `linear`: accumulates `a^T dc` into `db`, column sums of `dc`
/// into `dbias`, and returns `dc b^T`.
#[allow(clippy::too_many_arguments)]
fn linear_backward(
    a: &[f64],
    b: &[f64],
    dc: &[f64],
    db: &mut [f64],
    dbias: &mut [f64],
    n: usize,
    k: usize,
    m: usize,
) -> Vec<f64> {
    let mut da = vec![0.0; n * k];
    for i in 0..n {
        let dc_row = &dc[i * m..(i + 1) * m];
        for (o, &g) in dbias.iter_mut().zip(dc_row) {
            *o += g;
        }
        for kk in 0..k {
            let av = a[i * k + kk];
            let b_row = &b[kk * m..(kk + 1) * m];
            let db_row = &mut db[kk * m..(kk + 1) * m];
            let mut acc = 0.0;
            for j in 0..m {
                db_row[j] += av * dc_row[j];
                acc += dc_row[j] * b_row[j];
            }
            da[i * k + kk] = acc;
        }
    }
    da
}

const LN_EPS: f64 = 1e-5;

struct LnCache {
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
}

fn layer_norm(x: &[f64], g: &[f64], b: &[f64], n: usize, d: usize) -> (Vec<f64>, LnCache) {
    let mut y = vec![0.0; n * d];
    let mut xhat = vec![0.0; n * d];
    let mut inv_std = vec![0.0; n];
    for i in 0..n {
        let row = &x[i * d..(i + 1) * d];
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let is = 1.0 / (var + LN_EPS).sqrt();
        inv_std[i] = is;
        for j in 0..d {
            let h = (row[j] - mean) * is;
            xhat[i * d + j] = h;
            y[i * d + j] = h * g[j] + b[j];
        }
    }
    (y, LnCache { xhat, inv_std })
}

fn layer_norm_backward(
    dy: &[f64],
    cache: &LnCache,
    g: &[f64],
    dg: &mut [f64],
    db: &mut [f64],
    n: usize,
    d: usize,
) -> Vec<f64> {
    let mut dx = vec![0.0; n * d];
    let mut dxhat = vec![0.0; d];
    for i in 0..n {
        let xh = &cache.xhat[i * d..(i + 1) * d];
        let dyr = &dy[i * d..(i + 1) * d];
        let mut sum = 0.0;
        let mut sum_x = 0.0;
        for j in 0..d {
            dg[j] += dyr[j] * xh[j];
            db[j] += dyr[j];
            dxhat[j] = dyr[j] * g[j];
            sum += dxhat[j];
            sum_x += dxhat[j] * xh[j];
        }
        let is = cache.inv_std[i];
        for j in 0..d {
            dx[i * d + j] = is * (dxhat[j] - sum / d as f64 - xh[j] * sum_x / d as f64);
        }
    }
    dx
}

fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

// ---- model -----------------------------------------------------------------

struct LayerCache {
    ln1: LnCache,
    a: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    /// per head, `n x n` attention weights
    att: Vec<Vec<f64>>,
    o: Vec<f64>,
    ln2: LnCache,
    b: Vec<f64>,
    hpre: Vec<f64>,
    hact: Vec<f64>,
}

struct Forward {
    ids: Vec<u32>,
    layers: Vec<LayerCache>,
    lnf: LnCache,
    out: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Encoder {
    pub shape: EncoderShape,
    layout: Layout,
    pub params: Vec<f64>,
}

impl Encoder {
    pub fn new<R: Rng>(shape: EncoderShape, rng: &mut R) -> Self {
        let layout = Layout::new(&shape);
        let mut params = vec![0.0; layout.total];
        let normal = Normal::new(0.0, 0.02).expect("valid std");
        let mut init = |p: &mut [f64], s: Slot| {
            for x in get_mut(p, s) {
                *x = normal.sample(rng);
            }
        };
        init(&mut params, layout.tok);
        init(&mut params, layout.pos);
        for l in &layout.layers {
            for s in [l.wq, l.wk, l.wv, l.wo, l.w1, l.w2] {
                init(&mut params, s);
            }
        }
        init(&mut params, layout.cls_w);
        for l in &layout.layers {
            get_mut(&mut params, l.ln1_g).fill(1.0);
            get_mut(&mut params, l.ln2_g).fill(1.0);
        }
        get_mut(&mut params, layout.lnf_g).fill(1.0);
        Encoder {
            shape,
            layout,
            params,
        }
    }

    pub fn from_params(shape: EncoderShape, params: Vec<f64>) -> Option<Self> {
        let layout = Layout::new(&shape);
        (params.len() == layout.total).then_some(Encoder {
            shape,
            layout,
            params,
        })
    }

    pub fn num_params(&self) -> usize {
        self.layout.total
    }

    /// Copies the body (embeddings and layers, not the heads' vocabulary
    /// bias) from a pretrained encoder of the same shape.
    pub fn load_body_from(&mut self, other: &Encoder) -> bool {
        if other.shape != self.shape {
            return false;
        }
        let body_end = self.layout.cls_w.off;
        self.params[..body_end].copy_from_slice(&other.params[..body_end]);
        let mb = self.layout.mlm_b;
        self.params[mb.off..mb.off + mb.len].copy_from_slice(&other.params[mb.off..mb.off + mb.len]);
        true
    }

    fn forward(&self, ids: &[u32]) -> Forward {
        let s = &self.shape;
        let p = &self.params;
        let d = s.d_model;
        let n = ids.len().min(s.max_len);
        let ids = ids[..n].to_vec();
        let tok = get(p, self.layout.tok);
        let pos = get(p, self.layout.pos);
        let mut x = vec![0.0; n * d];
        for (i, &id) in ids.iter().enumerate() {
            let id = id as usize;
            for j in 0..d {
                x[i * d + j] = tok[id * d + j] + pos[i * d + j];
            }
        }
        let dh = d / s.n_heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut caches = Vec::with_capacity(s.n_layers);
        for l in &self.layout.layers {
            let (a, ln1) = layer_norm(&x, get(p, l.ln1_g), get(p, l.ln1_b), n, d);
            let q = linear(&a, get(p, l.wq), get(p, l.bq), n, d, d);
            let k = linear(&a, get(p, l.wk), get(p, l.bk), n, d, d);
            let v = linear(&a, get(p, l.wv), get(p, l.bv), n, d, d);
            let mut o = vec![0.0; n * d];
            let mut att = Vec::with_capacity(s.n_heads);
            for h in 0..s.n_heads {
                let c0 = h * dh;
                let mut w = vec![0.0; n * n];
                for i in 0..n {
                    let row = &mut w[i * n..(i + 1) * n];
                    for (jj, r) in row.iter_mut().enumerate() {
                        let mut acc = 0.0;
                        for c in c0..c0 + dh {
                            acc += q[i * d + c] * k[jj * d + c];
                        }
                        *r = acc * scale;
                    }
                    softmax_in_place(row);
                    for jj in 0..n {
                        let wij = row[jj];
                        for c in c0..c0 + dh {
                            o[i * d + c] += wij * v[jj * d + c];
                        }
                    }
                }
                att.push(w);
            }
            let proj = linear(&o, get(p, l.wo), get(p, l.bo), n, d, d);
            for (xi, pi) in x.iter_mut().zip(&proj) {
                *xi += pi;
            }
            let (b, ln2) = layer_norm(&x, get(p, l.ln2_g), get(p, l.ln2_b), n, d);
            let hpre = linear(&b, get(p, l.w1), get(p, l.b1), n, d, s.d_ff);
            let hact: Vec<f64> = hpre.iter().map(|&v| v.max(0.0)).collect();
            let f = linear(&hact, get(p, l.w2), get(p, l.b2), n, s.d_ff, d);
            for (xi, fi) in x.iter_mut().zip(&f) {
                *xi += fi;
            }
            caches.push(LayerCache {
                ln1,
                a,
                q,
                k,
                v,
                att,
                o,
                ln2,
                b,
                hpre,
                hact,
            });
        }
        let (out, lnf) = layer_norm(&x, get(p, self.layout.lnf_g), get(p, self.layout.lnf_b), n, d);
        Forward {
            ids,
            layers: caches,
            lnf,
            out,
        }
    }

    /// Backpropagates `dout` (gradient w.r.t. the final hidden states) into
    /// `grad`.
    fn backward(&self, fw: &Forward, dout: &[f64], grad: &mut [f64]) {
        let s = &self.shape;
        let p = &self.params;
        let d = s.d_model;
        let n = fw.ids.len();
        let dh = d / s.n_heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let lo = &self.layout;

        let mut dx = {
            let (dg, db) = split_two(grad, lo.lnf_g, lo.lnf_b);
            layer_norm_backward(dout, &fw.lnf, get(p, lo.lnf_g), dg, db, n, d)
        };

        for (l, c) in lo.layers.iter().zip(&fw.layers).rev() {
            // feed-forward residual branch
            let dhact = {
                let (dw, db) = split_two(grad, l.w2, l.b2);
                linear_backward(&c.hact, get(p, l.w2), &dx, dw, db, n, s.d_ff, d)
            };
            let dhpre: Vec<f64> = dhact
                .iter()
                .zip(&c.hpre)
                .map(|(&g, &h)| if h > 0.0 { g } else { 0.0 })
                .collect();
            let dbb = {
                let (dw, db) = split_two(grad, l.w1, l.b1);
                linear_backward(&c.b, get(p, l.w1), &dhpre, dw, db, n, d, s.d_ff)
            };
            let dln2 = {
                let (dg, db) = split_two(grad, l.ln2_g, l.ln2_b);
                layer_norm_backward(&dbb, &c.ln2, get(p, l.ln2_g), dg, db, n, d)
            };
            for (a, b) in dx.iter_mut().zip(&dln2) {
                *a += b;
            }

            // attention residual branch
            let do_ = {
                let (dw, db) = split_two(grad, l.wo, l.bo);
                linear_backward(&c.o, get(p, l.wo), &dx, dw, db, n, d, d)
            };
            let mut dq = vec![0.0; n * d];
            let mut dk = vec![0.0; n * d];
            let mut dv = vec![0.0; n * d];
            let mut dw_row = vec![0.0; n];
            for h in 0..s.n_heads {
                let c0 = h * dh;
                let w = &c.att[h];
                for i in 0..n {
                    let wr = &w[i * n..(i + 1) * n];
                    // d(att) and d(v)
                    for jj in 0..n {
                        let mut acc = 0.0;
                        for cc in c0..c0 + dh {
                            acc += do_[i * d + cc] * c.v[jj * d + cc];
                            dv[jj * d + cc] += wr[jj] * do_[i * d + cc];
                        }
                        dw_row[jj] = acc;
                    }
                    // softmax backward
                    let dot: f64 = wr.iter().zip(&dw_row).map(|(a, b)| a * b).sum();
                    for jj in 0..n {
                        let ds = wr[jj] * (dw_row[jj] - dot) * scale;
                        if ds == 0.0 {
                            continue;
                        }
                        for cc in c0..c0 + dh {
                            dq[i * d + cc] += ds * c.k[jj * d + cc];
                            dk[jj * d + cc] += ds * c.q[i * d + cc];
                        }
                    }
                }
            }
            let mut da = {
                let (dw, db) = split_two(grad, l.wq, l.bq);
                linear_backward(&c.a, get(p, l.wq), &dq, dw, db, n, d, d)
            };
            for (src, (wslot, bslot)) in [(&dk, (l.wk, l.bk)), (&dv, (l.wv, l.bv))] {
                let (dw, db) = split_two(grad, wslot, bslot);
                let part = linear_backward(&c.a, get(p, wslot), src, dw, db, n, d, d);
                for (a, b) in da.iter_mut().zip(&part) {
                    *a += b;
                }
            }
            let dln1 = {
                let (dg, db) = split_two(grad, l.ln1_g, l.ln1_b);
                layer_norm_backward(&da, &c.ln1, get(p, l.ln1_g), dg, db, n, d)
            };
            for (a, b) in dx.iter_mut().zip(&dln1) {
                *a += b;
            }
        }

        let (dtok, dpos) = split_two(grad, lo.tok, lo.pos);
        for (i, &id) in fw.ids.iter().enumerate() {
            let id = id as usize;
            for j in 0..d {
                dtok[id * d + j] += dx[i * d + j];
                dpos[i * d + j] += dx[i * d + j];
            }
        }
    }

    fn mean_pool(&self, fw: &Forward) -> Vec<f64> {
        let d = self.shape.d_model;
        let n = fw.ids.len().max(1);
        let mut pooled = vec![0.0; d];
        for row in fw.out.chunks(d) {
            for (p, v) in pooled.iter_mut().zip(row) {
                *p += v;
            }
        }
        pooled.iter_mut().for_each(|p| *p /= n as f64);
        pooled
    }

    fn class_logits(&self, pooled: &[f64]) -> Vec<f64> {
        linear(
            pooled,
            get(&self.params, self.layout.cls_w),
            get(&self.params, self.layout.cls_b),
            1,
            self.shape.d_model,
            3,
        )
    }

    /// Class probabilities for a token id sequence (truncated to `max_len`).
    pub fn classify(&self, ids: &[u32]) -> [f64; 3] {
        let ids = non_empty(ids);
        let fw = self.forward(&ids);
        let mut logits = self.class_logits(&self.mean_pool(&fw));
        softmax_in_place(&mut logits);
        [logits[0], logits[1], logits[2]]
    }

    /// Cross-entropy loss of one labeled sequence; accumulates
    /// `weight * dloss/dparams` into `grad`.
    pub fn classify_loss_grad(&self, ids: &[u32], label: usize, weight: f64, grad: &mut [f64]) -> f64 {
        let ids = non_empty(ids);
        let fw = self.forward(&ids);
        let pooled = self.mean_pool(&fw);
        let mut probs = self.class_logits(&pooled);
        softmax_in_place(&mut probs);
        let loss = -probs[label].max(1e-300).ln();
        let mut dlogits = probs;
        dlogits[label] -= 1.0;
        dlogits.iter_mut().for_each(|g| *g *= weight);
        let d = self.shape.d_model;
        let dpooled = {
            let (dw, db) = split_two(grad, self.layout.cls_w, self.layout.cls_b);
            linear_backward(&pooled, get(&self.params, self.layout.cls_w), &dlogits, dw, db, 1, d, 3)
        };
        let n = fw.ids.len();
        let mut dout = vec![0.0; n * d];
        for row in dout.chunks_mut(d) {
            for (o, g) in row.iter_mut().zip(&dpooled) {
                *o = g / n as f64;
            }
        }
        self.backward(&fw, &dout, grad);
        loss
    }

    fn mlm_probs(&self, h: &[f64]) -> Vec<f64> {
        let d = self.shape.d_model;
        let tok = get(&self.params, self.layout.tok);
        let mut logits = get(&self.params, self.layout.mlm_b).to_vec();
        for (v, l) in logits.iter_mut().enumerate() {
            *l += tok[v * d..(v + 1) * d].iter().zip(h).map(|(a, b)| a * b).sum::<f64>();
        }
        softmax_in_place(&mut logits);
        logits
    }

    /// Summed masked-token cross-entropy and number of scored positions.
    pub fn mlm_loss(&self, seq: &MaskedSequence) -> (f64, usize) {
        let fw = self.forward(&seq.input);
        let d = self.shape.d_model;
        let mut total = 0.0;
        let mut count = 0;
        for (i, t) in seq.targets.iter().take(fw.ids.len()).enumerate() {
            if let Some(t) = t {
                let probs = self.mlm_probs(&fw.out[i * d..(i + 1) * d]);
                total -= probs[*t as usize].max(1e-300).ln();
                count += 1;
            }
        }
        (total, count)
    }

    /// Like `mlm_loss`, also accumulating `weight * dloss/dparams` (of the
    /// summed loss) into `grad`.
    pub fn mlm_loss_grad(&self, seq: &MaskedSequence, weight: f64, grad: &mut [f64]) -> (f64, usize) {
        let fw = self.forward(&seq.input);
        let d = self.shape.d_model;
        let n = fw.ids.len();
        let vsize = self.shape.vocab_size;
        let mut dout = vec![0.0; n * d];
        let mut total = 0.0;
        let mut count = 0;
        for (i, t) in seq.targets.iter().take(n).enumerate() {
            let Some(t) = t else { continue };
            let h = &fw.out[i * d..(i + 1) * d];
            let mut dlogits = self.mlm_probs(h);
            total -= dlogits[*t as usize].max(1e-300).ln();
            count += 1;
            dlogits[*t as usize] -= 1.0;
            let tok = get(&self.params, self.layout.tok);
            let dh_row = &mut dout[i * d..(i + 1) * d];
            for v in 0..vsize {
                let g = dlogits[v] * weight;
                for j in 0..d {
                    dh_row[j] += g * tok[v * d + j];
                }
            }
            {
                let dtok = get_mut(grad, self.layout.tok);
                for v in 0..vsize {
                    let g = dlogits[v] * weight;
                    for j in 0..d {
                        dtok[v * d + j] += g * h[j];
                    }
                }
            }
            let dmb = get_mut(grad, self.layout.mlm_b);
            for v in 0..vsize {
                dmb[v] += dlogits[v] * weight;
            }
        }
        if count > 0 {
            self.backward(&fw, &dout, grad);
        }
        (total, count)
    }
}

fn non_empty(ids: &[u32]) -> Vec<u32> {
    if ids.is_empty() {
        vec![super::text::UNK_ID]
    } else {
        ids.to_vec()
    }
}

/// Two disjoint mutable slot views into one gradient buffer.
fn split_two(buf: &mut [f64], a: Slot, b: Slot) -> (&mut [f64], &mut [f64]) {
    assert!(a.off + a.len <= b.off || b.off + b.len <= a.off, "overlapping slots");
    if a.off < b.off {
        let (lo, hi) = buf.split_at_mut(b.off);
        (&mut lo[a.off..a.off + a.len], &mut hi[..b.len])
    } else {
        let (lo, hi) = buf.split_at_mut(a.off);
        (&mut hi[..a.len], &mut lo[b.off..b.off + b.len])
    }
}
