//! A small reverse-mode autodiff tape over row-major `f64` matrices.
//!
//! Nodes are appended in evaluation order, so every node's inputs have
//! smaller ids and a single reverse sweep computes all adjoints. Only the
//! operations the policy network and its losses need are provided; several
//! (layer norm, tree attention, the clipped surrogate) are fused.

use std::sync::Arc;

use ndarray::{Array2, Axis};

pub type NodeId = usize;

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const LOG_RATIO_BOUND: f64 = 20.0;

/// Clipped surrogate `min(r A, clip(r, 1-eps, 1+eps) A)` with
/// `r = exp(new - old)`; the log-ratio is clamped to `[-20, 20]` first.
/// Returns the term and its derivative with respect to `new`.
pub fn clipped_surrogate(new_logprob: f64, old_logprob: f64, advantage: f64, eps: f64) -> (f64, f64) {
    let raw = new_logprob - old_logprob;
    let log_ratio = raw.clamp(-LOG_RATIO_BOUND, LOG_RATIO_BOUND);
    let ratio = log_ratio.exp();
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * advantage;
    if unclipped <= clipped {
        let grad = if raw == log_ratio { unclipped } else { 0.0 };
        (unclipped, grad)
    } else {
        (clipped, 0.0)
    }
}

/// Key/value visibility for tree attention: `visible[i]` lists the nodes
/// (ancestors and `i` itself) that node `i` attends to.
#[derive(Debug, Clone)]
pub struct Visibility {
    pub visible: Vec<Vec<u32>>,
}

enum Op {
    Constant,
    Param(usize),
    Gather {
        table: NodeId,
        rows: Vec<usize>,
    },
    MatMul(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    Add(NodeId, NodeId),
    LayerNorm {
        x: NodeId,
        gain: NodeId,
        bias: NodeId,
        xhat: Array2<f64>,
        rstd: Vec<f64>,
    },
    Gelu(NodeId),
    Attention {
        q: NodeId,
        k: NodeId,
        v: NodeId,
        heads: usize,
        vis: Arc<Visibility>,
        probs: Vec<f64>,
        offsets: Vec<usize>,
    },
    SelectRows {
        x: NodeId,
        rows: Vec<usize>,
    },
    LogSoftmax(NodeId),
    Pick {
        x: NodeId,
        at: Vec<(usize, usize)>,
    },
    Concat(Vec<NodeId>),
    Surrogate {
        x: NodeId,
        grads: Vec<f64>,
    },
    KlFromFixed {
        logq: NodeId,
        p: Array2<f64>,
    },
    Sum(NodeId),
    Scale(NodeId, f64),
}

pub struct Tape {
    ops: Vec<Op>,
    values: Vec<Array2<f64>>,
    fault: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            ops: Vec::new(),
            values: Vec::new(),
            fault: false,
        }
    }

    /// Tape whose GELU backward rule is deliberately wrong; used as the
    /// negative control of the gradient audit.
    #[doc(hidden)]
    pub fn with_faulty_backward() -> Self {
        Tape {
            fault: true,
            ..Self::new()
        }
    }

    fn push(&mut self, op: Op, value: Array2<f64>) -> NodeId {
        self.ops.push(op);
        self.values.push(value);
        self.values.len() - 1
    }

    pub fn value(&self, id: NodeId) -> &Array2<f64> {
        &self.values[id]
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.values[id][[0, 0]]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn constant(&mut self, value: Array2<f64>) -> NodeId {
        self.push(Op::Constant, value)
    }

    /// Leaf for parameter tensor `index`; gradients flow back to it.
    pub fn param(&mut self, index: usize, value: &Array2<f64>) -> NodeId {
        self.push(Op::Param(index), value.clone())
    }

    pub fn gather(&mut self, table: NodeId, rows: Vec<usize>) -> NodeId {
        let t = &self.values[table];
        let mut out = Array2::zeros((rows.len(), t.ncols()));
        for (i, &r) in rows.iter().enumerate() {
            out.row_mut(i).assign(&t.row(r));
        }
        self.push(Op::Gather { table, rows }, out)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let out = self.values[a].dot(&self.values[b]);
        self.push(Op::MatMul(a, b), out)
    }

    /// `x + row` with `row` (1 x m) broadcast over the rows of `x`.
    pub fn add_row(&mut self, x: NodeId, row: NodeId) -> NodeId {
        let out = &self.values[x] + &self.values[row];
        self.push(Op::AddRow(x, row), out)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let out = &self.values[a] + &self.values[b];
        self.push(Op::Add(a, b), out)
    }

    pub fn layer_norm(&mut self, x: NodeId, gain: NodeId, bias: NodeId) -> NodeId {
        let xv = &self.values[x];
        let (n, d) = xv.dim();
        let mut xhat = Array2::zeros((n, d));
        let mut rstd = Vec::with_capacity(n);
        for (i, row) in xv.rows().into_iter().enumerate() {
            let mean = row.sum() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let r = 1.0 / (var + LN_EPS).sqrt();
            rstd.push(r);
            for (o, v) in xhat.row_mut(i).iter_mut().zip(row.iter()) {
                *o = (v - mean) * r;
            }
        }
        let out = &(&xhat * &self.values[gain]) + &self.values[bias];
        self.push(
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                rstd,
            },
            out,
        )
    }

    pub fn gelu(&mut self, x: NodeId) -> NodeId {
        let out = self.values[x].mapv(|v| 0.5 * v * (1.0 + (GELU_C * (v + 0.044_715 * v * v * v)).tanh()));
        self.push(Op::Gelu(x), out)
    }

    /// Multi-head scaled dot-product attention where node `i` attends to
    /// `vis.visible[i]`.
    pub fn attention(&mut self, q: NodeId, k: NodeId, v: NodeId, heads: usize, vis: Arc<Visibility>) -> NodeId {
        let (n, d) = self.values[q].dim();
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let qs = self.values[q].as_slice().expect("standard layout");
        let ks = self.values[k].as_slice().expect("standard layout");
        let vs = self.values[v].as_slice().expect("standard layout");
        let mut offsets = Vec::with_capacity(n + 1);
        let mut total = 0;
        for list in &vis.visible {
            offsets.push(total);
            total += list.len() * heads;
        }
        offsets.push(total);
        let mut probs = vec![0.0; total];
        let mut out = vec![0.0; n * d];
        for i in 0..n {
            let list = &vis.visible[i];
            let m = list.len();
            for h in 0..heads {
                let p = &mut probs[offsets[i] + h * m..offsets[i] + (h + 1) * m];
                let qi = &qs[i * d + h * dh..i * d + (h + 1) * dh];
                let mut max = f64::NEG_INFINITY;
                for (slot, &j) in p.iter_mut().zip(list) {
                    let kj = &ks[j as usize * d + h * dh..j as usize * d + (h + 1) * dh];
                    let s = qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() * scale;
                    *slot = s;
                    max = max.max(s);
                }
                let mut z = 0.0;
                for s in p.iter_mut() {
                    *s = (*s - max).exp();
                    z += *s;
                }
                let o = &mut out[i * d + h * dh..i * d + (h + 1) * dh];
                for (s, &j) in p.iter_mut().zip(list) {
                    *s /= z;
                    let vj = &vs[j as usize * d + h * dh..j as usize * d + (h + 1) * dh];
                    for (oo, vv) in o.iter_mut().zip(vj) {
                        *oo += *s * vv;
                    }
                }
            }
        }
        let out = Array2::from_shape_vec((n, d), out).expect("shape");
        self.push(
            Op::Attention {
                q,
                k,
                v,
                heads,
                vis,
                probs,
                offsets,
            },
            out,
        )
    }

    pub fn select_rows(&mut self, x: NodeId, rows: Vec<usize>) -> NodeId {
        let xv = &self.values[x];
        let out = xv.select(Axis(0), &rows);
        self.push(Op::SelectRows { x, rows }, out)
    }

    pub fn log_softmax(&mut self, x: NodeId) -> NodeId {
        let mut out = self.values[x].clone();
        for mut row in out.rows_mut() {
            let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            row.mapv_inplace(|v| v - lse);
        }
        self.push(Op::LogSoftmax(x), out)
    }

    /// Picks elements `(row, col)` into a 1 x k vector.
    pub fn pick(&mut self, x: NodeId, at: Vec<(usize, usize)>) -> NodeId {
        let xv = &self.values[x];
        let vals: Vec<f64> = at.iter().map(|&(r, c)| xv[[r, c]]).collect();
        let out = Array2::from_shape_vec((1, vals.len()), vals).expect("shape");
        self.push(Op::Pick { x, at }, out)
    }

    /// Concatenates 1 x k_i vectors.
    pub fn concat(&mut self, parts: Vec<NodeId>) -> NodeId {
        let vals: Vec<f64> = parts.iter().flat_map(|&p| self.values[p].iter().copied()).collect();
        let out = Array2::from_shape_vec((1, vals.len()), vals).expect("shape");
        self.push(Op::Concat(parts), out)
    }

    /// Per-element clipped surrogate terms for a 1 x k vector of current
    /// log-probabilities.
    pub fn surrogate(&mut self, x: NodeId, old: &[f64], adv: &[f64], eps: f64) -> NodeId {
        let xv = &self.values[x];
        assert_eq!(xv.len(), old.len());
        assert_eq!(xv.len(), adv.len());
        let (terms, grads): (Vec<f64>, Vec<f64>) = xv
            .iter()
            .zip(old.iter().zip(adv))
            .map(|(&n, (&o, &a))| clipped_surrogate(n, o, a, eps))
            .unzip();
        let out = Array2::from_shape_vec((1, terms.len()), terms).expect("shape");
        self.push(Op::Surrogate { x, grads }, out)
    }

    /// `sum_rows sum_b p (ln p - ln q)` for fixed probabilities `p` and
    /// log-probabilities `logq`.
    pub fn kl_from_fixed(&mut self, logq: NodeId, p: Array2<f64>) -> NodeId {
        let lq = &self.values[logq];
        assert_eq!(lq.dim(), p.dim());
        let kl: f64 = p
            .iter()
            .zip(lq.iter())
            .map(|(&pp, &l)| if pp > 0.0 { pp * (pp.ln() - l) } else { 0.0 })
            .sum();
        self.push(Op::KlFromFixed { logq, p }, Array2::from_elem((1, 1), kl))
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let s = self.values[x].sum();
        self.push(Op::Sum(x), Array2::from_elem((1, 1), s))
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        let out = &self.values[x] * c;
        self.push(Op::Scale(x, c), out)
    }

    pub fn mean(&mut self, x: NodeId) -> NodeId {
        let n = self.values[x].len() as f64;
        let s = self.sum(x);
        self.scale(s, 1.0 / n)
    }

    /// Reverse sweep from the scalar `root`, accumulating parameter adjoints
    /// into `param_grads` (indexed like [`Tape::param`]).
    pub fn backward(&self, root: NodeId, param_grads: &mut [Array2<f64>]) {
        assert_eq!(self.values[root].dim(), (1, 1), "backward needs a scalar root");
        let mut grads: Vec<Option<Array2<f64>>> = (0..=root).map(|_| None).collect();
        grads[root] = Some(Array2::from_elem((1, 1), 1.0));
        for id in (0..=root).rev() {
            let Some(g) = grads[id].take() else { continue };
            match &self.ops[id] {
                Op::Constant => {}
                Op::Param(i) => param_grads[*i] += &g,
                Op::Gather { table, rows } => {
                    let mut dt = Array2::zeros(self.values[*table].dim());
                    for (i, &r) in rows.iter().enumerate() {
                        let mut dst = dt.row_mut(r);
                        dst += &g.row(i);
                    }
                    accumulate(&mut grads, *table, dt);
                }
                Op::MatMul(a, b) => {
                    let da = g.dot(&self.values[*b].t());
                    let db = self.values[*a].t().dot(&g);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::AddRow(x, row) => {
                    let dr = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    accumulate(&mut grads, *row, dr);
                    accumulate(&mut grads, *x, g);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *b, g.clone());
                    accumulate(&mut grads, *a, g);
                }
                Op::LayerNorm {
                    x,
                    gain,
                    bias,
                    xhat,
                    rstd,
                } => {
                    let gv = &self.values[*gain];
                    let db = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    let dg = (&g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
                    let dxhat = &g * gv;
                    let d = xhat.ncols() as f64;
                    let mut dx = Array2::zeros(xhat.dim());
                    for i in 0..xhat.nrows() {
                        let dh = dxhat.row(i);
                        let xh = xhat.row(i);
                        let m1 = dh.sum() / d;
                        let m2 = dh.iter().zip(xh.iter()).map(|(a, b)| a * b).sum::<f64>() / d;
                        for ((o, &a), &b) in dx.row_mut(i).iter_mut().zip(dh.iter()).zip(xh.iter()) {
                            *o = rstd[i] * (a - m1 - b * m2);
                        }
                    }
                    accumulate(&mut grads, *gain, dg);
                    accumulate(&mut grads, *bias, db);
                    accumulate(&mut grads, *x, dx);
                }
                Op::Gelu(x) => {
                    let fault = if self.fault { 1.1 } else { 1.0 };
                    let mut dx = self.values[*x].mapv(|v| {
                        let u = GELU_C * (v + 0.044_715 * v * v * v);
                        let t = u.tanh();
                        fault * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044_715 * v * v))
                    });
                    dx *= &g;
                    accumulate(&mut grads, *x, dx);
                }
                Op::Attention {
                    q,
                    k,
                    v,
                    heads,
                    vis,
                    probs,
                    offsets,
                } => {
                    let (dq, dk, dv) = self.attention_backward(*q, *k, *v, *heads, vis, probs, offsets, &g);
                    accumulate(&mut grads, *q, dq);
                    accumulate(&mut grads, *k, dk);
                    accumulate(&mut grads, *v, dv);
                }
                Op::SelectRows { x, rows } => {
                    let mut dx = Array2::zeros(self.values[*x].dim());
                    for (i, &r) in rows.iter().enumerate() {
                        let mut dst = dx.row_mut(r);
                        dst += &g.row(i);
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::LogSoftmax(x) => {
                    let y = &self.values[id];
                    let mut dx = g.clone();
                    for (mut row, yrow) in dx.rows_mut().into_iter().zip(y.rows()) {
                        let s = row.sum();
                        for (o, &yy) in row.iter_mut().zip(yrow.iter()) {
                            *o -= yy.exp() * s;
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::Pick { x, at } => {
                    let mut dx = Array2::zeros(self.values[*x].dim());
                    for (i, &(r, c)) in at.iter().enumerate() {
                        dx[[r, c]] += g[[0, i]];
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::Concat(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let n = self.values[p].len();
                        let piece = g.slice(ndarray::s![.., start..start + n]).to_owned();
                        start += n;
                        accumulate(&mut grads, p, piece);
                    }
                }
                Op::Surrogate { x, grads: local } => {
                    let dx = Array2::from_shape_fn((1, local.len()), |(_, i)| g[[0, i]] * local[i]);
                    accumulate(&mut grads, *x, dx);
                }
                Op::KlFromFixed { logq, p } => {
                    let s = g[[0, 0]];
                    accumulate(&mut grads, *logq, p.mapv(|pp| -pp * s));
                }
                Op::Sum(x) => {
                    let dx = Array2::from_elem(self.values[*x].dim(), g[[0, 0]]);
                    accumulate(&mut grads, *x, dx);
                }
                Op::Scale(x, c) => accumulate(&mut grads, *x, g * *c),
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn attention_backward(
        &self,
        q: NodeId,
        k: NodeId,
        v: NodeId,
        heads: usize,
        vis: &Visibility,
        probs: &[f64],
        offsets: &[usize],
        g: &Array2<f64>,
    ) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
        let (n, d) = self.values[q].dim();
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let qs = self.values[q].as_slice().expect("standard layout");
        let ks = self.values[k].as_slice().expect("standard layout");
        let vs = self.values[v].as_slice().expect("standard layout");
        let g = g.as_standard_layout();
        let gs = g.as_slice().expect("standard layout");
        let mut dq = vec![0.0; n * d];
        let mut dk = vec![0.0; n * d];
        let mut dv = vec![0.0; n * d];
        let mut dp = Vec::new();
        for i in 0..n {
            let list = &vis.visible[i];
            let m = list.len();
            for h in 0..heads {
                let p = &probs[offsets[i] + h * m..offsets[i] + (h + 1) * m];
                let go = &gs[i * d + h * dh..i * d + (h + 1) * dh];
                dp.clear();
                let mut dot = 0.0;
                for (&pj, &j) in p.iter().zip(list) {
                    let j = j as usize;
                    let vj = &vs[j * d + h * dh..j * d + (h + 1) * dh];
                    let val = go.iter().zip(vj).map(|(a, b)| a * b).sum::<f64>();
                    dp.push(val);
                    dot += pj * val;
                    for (o, &gg) in dv[j * d + h * dh..j * d + (h + 1) * dh].iter_mut().zip(go) {
                        *o += pj * gg;
                    }
                }
                let qi_start = i * d + h * dh;
                for ((&pj, &dpj), &j) in p.iter().zip(&dp).zip(list) {
                    let ds = pj * (dpj - dot) * scale;
                    if ds == 0.0 {
                        continue;
                    }
                    let j = j as usize;
                    for t in 0..dh {
                        dq[qi_start + t] += ds * ks[j * d + h * dh + t];
                        dk[j * d + h * dh + t] += ds * qs[qi_start + t];
                    }
                }
            }
        }
        let shape = (n, d);
        (
            Array2::from_shape_vec(shape, dq).expect("shape"),
            Array2::from_shape_vec(shape, dk).expect("shape"),
            Array2::from_shape_vec(shape, dv).expect("shape"),
        )
    }
}

fn accumulate(grads: &mut [Option<Array2<f64>>], id: NodeId, g: Array2<f64>) {
    match &mut grads[id] {
        Some(acc) => *acc += &g,
        slot @ None => *slot = Some(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    /// Central differences of `f` at `x` for every entry.
    fn numeric_grad(x: &Array2<f64>, f: impl Fn(&Array2<f64>) -> f64) -> Array2<f64> {
        let h = 1e-6;
        let mut out = Array2::zeros(x.dim());
        for idx in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp.as_slice_mut().unwrap()[idx] += h;
            xm.as_slice_mut().unwrap()[idx] -= h;
            out.as_slice_mut().unwrap()[idx] = (f(&xp) - f(&xm)) / (2.0 * h);
        }
        out
    }

    fn assert_close(a: &Array2<f64>, b: &Array2<f64>, tol: f64) {
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())), "{x} vs {y}");
        }
    }

    #[test]
    fn surrogate_worked_examples() {
        let ln = f64::ln;
        assert!((clipped_surrogate(0.0, 0.0, 0.5, 0.2).0 - 0.5).abs() < 1e-15);
        assert!((clipped_surrogate(ln(1.5), 0.0, 1.0, 0.2).0 - 1.2).abs() < 1e-12);
        assert!((clipped_surrogate(ln(0.5), 0.0, -1.0, 0.2).0 + 0.8).abs() < 1e-12);
        // Clipped branch carries no gradient.
        assert_eq!(clipped_surrogate(ln(1.5), 0.0, 1.0, 0.2).1, 0.0);
        // Extreme log-ratios are clamped rather than overflowing.
        let (t, g) = clipped_surrogate(1e6, 0.0, -1.0, 0.2);
        assert!(t.is_finite());
        assert_eq!(g, 0.0);
    }

    /// Chains every op into one scalar and checks all parameter adjoints.
    #[test]
    fn composite_graph_matches_finite_differences() {
        let x0 = array![[0.3, -0.2, 0.5, 0.1], [0.0, 0.4, -0.6, 0.2], [0.7, 0.1, 0.2, -0.3]];
        let w0 = array![[0.2, -0.1, 0.4, 0.0], [0.1, 0.3, -0.2, 0.5], [-0.3, 0.2, 0.1, 0.1], [0.05, -0.4, 0.3, 0.2]];
        let vis = Arc::new(Visibility {
            visible: vec![vec![0], vec![0, 1], vec![0, 2]],
        });
        let build = |tape: &mut Tape, x: &Array2<f64>, w: &Array2<f64>| -> NodeId {
            let xi = tape.param(0, x);
            let wi = tape.param(1, w);
            let g = tape.constant(Array2::from_elem((1, 4), 1.1));
            let b = tape.constant(Array2::from_elem((1, 4), -0.05));
            let n = tape.layer_norm(xi, g, b);
            let q = tape.matmul(n, wi);
            let a = tape.attention(q, n, xi, 2, vis.clone());
            let s = tape.add(a, xi);
            let e = tape.gelu(s);
            let sel = tape.select_rows(e, vec![2, 1]);
            let ls = tape.log_softmax(sel);
            let pk = tape.pick(ls, vec![(0, 1), (1, 3)]);
            let sur = tape.surrogate(pk, &[-1.3, -1.5], &[0.7, -0.4], 0.2);
            let kl = tape.kl_from_fixed(ls, array![[0.1, 0.2, 0.3, 0.4], [0.25, 0.25, 0.25, 0.25]]);
            let m = tape.mean(sur);
            let t = tape.add(m, kl);
            let g2 = tape.gather(wi, vec![0, 0, 3]);
            let sg = tape.sum(g2);
            let sg = tape.scale(sg, 0.01);
            tape.add(t, sg)
        };
        let eval = |x: &Array2<f64>, w: &Array2<f64>| {
            let mut tape = Tape::new();
            let r = build(&mut tape, x, w);
            tape.scalar(r)
        };
        let mut tape = Tape::new();
        let root = build(&mut tape, &x0, &w0);
        let mut grads = vec![Array2::zeros(x0.dim()), Array2::zeros(w0.dim())];
        tape.backward(root, &mut grads);
        assert_close(&grads[0], &numeric_grad(&x0, |x| eval(x, &w0)), 1e-6);
        assert_close(&grads[1], &numeric_grad(&w0, |w| eval(&x0, w)), 1e-6);
    }

    #[test]
    fn sum_of_leaf_has_unit_gradient() {
        let w = Array2::from_elem((3, 2), 0.7);
        let mut tape = Tape::new();
        let p = tape.param(0, &w);
        let s = tape.sum(p);
        let mut grads = vec![Array2::zeros((3, 2))];
        tape.backward(s, &mut grads);
        assert!(grads[0].iter().all(|&g| g == 1.0));
    }
}
