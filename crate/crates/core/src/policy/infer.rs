use ndarray::Array2;
use rand::Rng;

use super::{ActionLogProb, PolicyNet, TokenTree};
use crate::codec::EncodedState;
use crate::error::{Error, Result};
use crate::space::Configuration;

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4;

/// Incremental, gradient-free evaluation of the policy over a token tree.
///
/// Every node caches its per-layer keys and values and its final hidden
/// state, so extending a cached prefix costs one token per new node. Used for
/// sampling and exact log-probabilities; mathematically identical to the
/// taped forward pass.
pub struct Inference<'a> {
    net: &'a PolicyNet,
    w: &'a [Array2<f64>],
    tree: TokenTree,
    /// Per node, per layer: key row then value row.
    kv: Vec<f64>,
    hidden: Vec<f64>,
}

impl<'a> Inference<'a> {
    pub fn new(net: &'a PolicyNet, weights: &'a [Array2<f64>]) -> Self {
        Inference {
            net,
            w: weights,
            tree: TokenTree::new(),
            kv: Vec::new(),
            hidden: Vec::new(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.tree.len()
    }

    /// Evaluates a state chain and returns its last node.
    pub fn state(&mut self, tokens: &[u32]) -> Result<usize> {
        let mut node = None;
        for &t in tokens {
            node = Some(self.child(node, t)?);
        }
        node.ok_or_else(|| Error::Encoding("empty state".into()))
    }

    pub fn child(&mut self, parent: Option<usize>, token: u32) -> Result<usize> {
        if token as usize >= self.net.vocab.size() {
            return Err(Error::Shape(format!("token {token} outside vocabulary")));
        }
        let before = self.tree.len();
        let id = self.tree.child(parent, token);
        if self.tree.len() > before {
            let depth = self.tree.depths()[id];
            if depth >= self.net.config.context_length {
                return Err(Error::Shape(format!(
                    "sequence of {} tokens exceeds context length {}",
                    depth + 1,
                    self.net.config.context_length
                )));
            }
            self.compute(id, token, depth);
        }
        Ok(id)
    }

    fn compute(&mut self, id: usize, token: u32, depth: usize) {
        let cfg = &self.net.config;
        let l = &self.net.layout;
        let d = cfg.model_dim;
        let heads = cfg.heads;
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let nl = l.layers.len();
        let stride = nl * 2 * d;

        let mut ancestors = Vec::new();
        let mut cur = Some(id);
        while let Some(n) = cur {
            ancestors.push(n);
            cur = self.tree.parent(n);
        }
        ancestors.reverse();

        let tok = self.w[l.tok_emb].row(token as usize);
        let pos = self.w[l.pos_emb].row(depth);
        let mut x: Vec<f64> = tok.iter().zip(pos.iter()).map(|(a, b)| a + b).collect();
        self.kv.resize((id + 1) * stride, 0.0);

        for (li, s) in l.layers.iter().enumerate() {
            let h = layer_norm(&x, &self.w[s.ln1_g], &self.w[s.ln1_b]);
            let q = matvec(&h, &self.w[s.wq]);
            let k = matvec(&h, &self.w[s.wk]);
            let v = matvec(&h, &self.w[s.wv]);
            let base = id * stride + li * 2 * d;
            self.kv[base..base + d].copy_from_slice(&k);
            self.kv[base + d..base + 2 * d].copy_from_slice(&v);

            let mut att = vec![0.0; d];
            let mut scores = vec![0.0; ancestors.len()];
            for hh in 0..heads {
                let qh = &q[hh * dh..(hh + 1) * dh];
                let mut max = f64::NEG_INFINITY;
                for (s, &j) in scores.iter_mut().zip(&ancestors) {
                    let kb = j * stride + li * 2 * d + hh * dh;
                    let kj = &self.kv[kb..kb + dh];
                    *s = qh.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() * scale;
                    max = max.max(*s);
                }
                let mut z = 0.0;
                for s in scores.iter_mut() {
                    *s = (*s - max).exp();
                    z += *s;
                }
                let o = &mut att[hh * dh..(hh + 1) * dh];
                for (s, &j) in scores.iter().zip(&ancestors) {
                    let p = s / z;
                    let vb = j * stride + li * 2 * d + d + hh * dh;
                    for (oo, vv) in o.iter_mut().zip(&self.kv[vb..vb + dh]) {
                        *oo += p * vv;
                    }
                }
            }
            let o = matvec(&att, &self.w[s.wo]);
            for (xx, oo) in x.iter_mut().zip(&o) {
                *xx += oo;
            }
            let h = layer_norm(&x, &self.w[s.ln2_g], &self.w[s.ln2_b]);
            let mut f = matvec(&h, &self.w[s.w1]);
            for (ff, b) in f.iter_mut().zip(self.w[s.b1].iter()) {
                let v = *ff + b;
                *ff = 0.5 * v * (1.0 + (GELU_C * (v + 0.044_715 * v * v * v)).tanh());
            }
            let f = matvec(&f, &self.w[s.w2]);
            for ((xx, ff), b) in x.iter_mut().zip(&f).zip(self.w[s.b2].iter()) {
                *xx += ff + b;
            }
        }
        let h = layer_norm(&x, &self.w[l.lnf_g], &self.w[l.lnf_b]);
        self.hidden.resize(id * d, 0.0);
        self.hidden.extend_from_slice(&h);
    }

    /// Logits of parameter `p` at `node`.
    pub fn logits(&self, node: usize, p: usize) -> Vec<f64> {
        let d = self.net.config.model_dim;
        let (hw, hb) = self.net.layout.heads[p];
        let mut out = matvec(&self.hidden[node * d..(node + 1) * d], &self.w[hw]);
        for (o, b) in out.iter_mut().zip(self.w[hb].iter()) {
            *o += b;
        }
        out
    }

    /// Samples one configuration below `state_node`, parameter by parameter.
    pub fn sample_from(&mut self, state_node: usize, temperature: f64, rng: &mut impl Rng) -> Result<ActionLogProb> {
        if !(temperature > 0.0) {
            return Err(Error::Config("temperature must be positive".into()));
        }
        let net = self.net;
        let np = net.num_params();
        let mut node = state_node;
        let mut bins = Vec::with_capacity(np);
        let mut per_param = Vec::with_capacity(np);
        for p in 0..np {
            let logits = self.logits(node, p);
            let b = sample_index(&logits, temperature, rng.random::<f64>());
            per_param.push(log_softmax(&logits)[b]);
            bins.push(b);
            if p + 1 < np {
                node = self.child(Some(node), net.vocab.param_token(p, b))?;
            }
        }
        let config = net.space.config_from_bins(&bins)?;
        Ok(ActionLogProb {
            config,
            total: per_param.iter().sum(),
            bins,
            per_param_logprob: per_param,
        })
    }

    /// Per-parameter log-probabilities of `bins` below `state_node`.
    pub fn teacher_forced(&mut self, state_node: usize, bins: &[usize]) -> Result<Vec<f64>> {
        let net = self.net;
        let np = net.num_params();
        if bins.len() != np {
            return Err(Error::Arity {
                expected: np,
                got: bins.len(),
            });
        }
        let mut node = state_node;
        let mut out = Vec::with_capacity(np);
        for (p, &b) in bins.iter().enumerate() {
            if b >= net.vocab.param_width(p) {
                return Err(Error::Shape(format!("bin {b} out of range for parameter {p}")));
            }
            out.push(log_softmax(&self.logits(node, p))[b]);
            if p + 1 < np {
                node = self.child(Some(node), net.vocab.param_token(p, b))?;
            }
        }
        Ok(out)
    }

    /// Full distributions of every parameter along `bins` (teacher forcing),
    /// as probabilities.
    pub fn distributions(&mut self, state_node: usize, bins: &[usize]) -> Result<Vec<Vec<f64>>> {
        let net = self.net;
        let np = net.num_params();
        let mut node = state_node;
        let mut out = Vec::with_capacity(np);
        for p in 0..np {
            out.push(softmax(&self.logits(node, p)));
            if p + 1 < np {
                let &b = bins
                    .get(p)
                    .ok_or_else(|| Error::Shape("conditioning bins too short".into()))?;
                node = self.child(Some(node), net.vocab.param_token(p, b))?;
            }
        }
        Ok(out)
    }
}

impl PolicyNet {
    /// Teacher-forced logits for parameters `0..=conditioning.len()` (capped
    /// at the parameter count) given a state.
    pub fn forward(&self, weights: &[Array2<f64>], state: &EncodedState, conditioning: &[usize]) -> Result<Vec<Vec<f64>>> {
        let mut inf = Inference::new(self, weights);
        let mut node = inf.state(&state.tokens.ids)?;
        let n = (conditioning.len() + 1).min(self.num_params());
        let mut out = Vec::with_capacity(n);
        for p in 0..n {
            out.push(inf.logits(node, p));
            if p + 1 < n {
                node = inf.child(Some(node), self.vocab.param_token(p, conditioning[p]))?;
            }
        }
        Ok(out)
    }

    pub fn sample_config(
        &self,
        weights: &[Array2<f64>],
        state: &EncodedState,
        temperature: f64,
        rng: &mut impl Rng,
    ) -> Result<ActionLogProb> {
        let mut inf = Inference::new(self, weights);
        let node = inf.state(&state.tokens.ids)?;
        inf.sample_from(node, temperature, rng)
    }

    /// Exact `log pi(config | state)`.
    pub fn log_prob(&self, weights: &[Array2<f64>], state: &EncodedState, config: &Configuration) -> Result<f64> {
        let bins = self.space.bin_indices(config)?;
        let mut inf = Inference::new(self, weights);
        let node = inf.state(&state.tokens.ids)?;
        Ok(inf.teacher_forced(node, &bins)?.iter().sum())
    }
}

fn matvec(x: &[f64], w: &Array2<f64>) -> Vec<f64> {
    let cols = w.ncols();
    let ws = w.as_slice().expect("standard layout");
    let mut out = vec![0.0; cols];
    for (i, &xi) in x.iter().enumerate() {
        for (o, &wij) in out.iter_mut().zip(&ws[i * cols..(i + 1) * cols]) {
            *o += xi * wij;
        }
    }
    out
}

fn layer_norm(x: &[f64], g: &Array2<f64>, b: &Array2<f64>) -> Vec<f64> {
    let d = x.len() as f64;
    let mean = x.iter().sum::<f64>() / d;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
    let r = 1.0 / (var + LN_EPS).sqrt();
    x.iter()
        .zip(g.iter().zip(b.iter()))
        .map(|(v, (gg, bb))| (v - mean) * r * gg + bb)
        .collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    logits.iter().map(|v| v - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

/// Inverse-CDF draw from `softmax(logits / temperature)` using `u` in [0, 1).
fn sample_index(logits: &[f64], temperature: f64, u: f64) -> usize {
    let scaled: Vec<f64> = logits.iter().map(|l| l / temperature).collect();
    let probs = softmax(&scaled);
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}
