use ndarray::Array2;

use super::{PolicyNet, TokenTree};
use crate::autodiff::{NodeId, Tape};
use crate::error::{Error, Result};

/// A state plus the bins of an (optionally partial) configuration: asks for
/// every parameter's distribution under teacher forcing.
#[derive(Debug, Clone, Copy)]
pub struct Query<'a> {
    pub state: &'a [u32],
    pub bins: &'a [usize],
}

/// Tape leaves for one set of weights.
pub struct ParamNodes(Vec<NodeId>);

impl ParamNodes {
    /// Differentiable leaves: adjoints flow back to `weights`.
    pub fn bind(tape: &mut Tape, weights: &[Array2<f64>]) -> Self {
        ParamNodes(weights.iter().enumerate().map(|(i, w)| tape.param(i, w)).collect())
    }

    /// Constant leaves: values only, no gradient.
    pub fn frozen(tape: &mut Tape, weights: &[Array2<f64>]) -> Self {
        ParamNodes(weights.iter().map(|w| tape.constant(w.clone())).collect())
    }

    pub(crate) fn get(&self, i: usize) -> NodeId {
        self.0[i]
    }
}

impl PolicyNet {
    /// Final-layer-norm hidden states for every node of `tree`.
    pub fn tape_hidden(&self, tape: &mut Tape, w: &ParamNodes, tree: &TokenTree) -> Result<NodeId> {
        if let Some(&d) = tree.depths().iter().max() {
            if d >= self.config.context_length {
                return Err(Error::Shape(format!(
                    "sequence of {} tokens exceeds context length {}",
                    d + 1,
                    self.config.context_length
                )));
            }
        }
        if let Some(&t) = tree.tokens().iter().find(|&&t| t as usize >= self.vocab.size()) {
            return Err(Error::Shape(format!("token {t} outside vocabulary")));
        }
        let l = &self.layout;
        let tok = tape.gather(w.get(l.tok_emb), tree.tokens().iter().map(|&t| t as usize).collect());
        let pos = tape.gather(w.get(l.pos_emb), tree.depths().to_vec());
        let mut x = tape.add(tok, pos);
        let vis = tree.visibility();
        for s in &l.layers {
            let h = tape.layer_norm(x, w.get(s.ln1_g), w.get(s.ln1_b));
            let q = tape.matmul(h, w.get(s.wq));
            let k = tape.matmul(h, w.get(s.wk));
            let v = tape.matmul(h, w.get(s.wv));
            let a = tape.attention(q, k, v, self.config.heads, vis.clone());
            let o = tape.matmul(a, w.get(s.wo));
            x = tape.add(x, o);
            let h = tape.layer_norm(x, w.get(s.ln2_g), w.get(s.ln2_b));
            let f = tape.matmul(h, w.get(s.w1));
            let f = tape.add_row(f, w.get(s.b1));
            let f = tape.gelu(f);
            let f = tape.matmul(f, w.get(s.w2));
            let f = tape.add_row(f, w.get(s.b2));
            x = tape.add(x, f);
        }
        Ok(tape.layer_norm(x, w.get(l.lnf_g), w.get(l.lnf_b)))
    }

    /// Log-softmax distributions of parameter `p` at the given tree rows.
    pub fn tape_head(&self, tape: &mut Tape, w: &ParamNodes, hidden: NodeId, rows: Vec<usize>, p: usize) -> NodeId {
        let (hw, hb) = self.layout.heads[p];
        let h = tape.select_rows(hidden, rows);
        let logits = tape.matmul(h, w.get(hw));
        let logits = tape.add_row(logits, w.get(hb));
        tape.log_softmax(logits)
    }

    /// Evaluates all queries in one pass over a shared token tree. Returns,
    /// for each parameter `p`, a `queries x B_p` log-probability node whose
    /// row `q` conditions on `queries[q].bins[..p]`. Every query must carry
    /// at least `P - 1` bins.
    pub fn tape_logprobs(&self, tape: &mut Tape, w: &ParamNodes, queries: &[Query<'_>]) -> Result<Vec<NodeId>> {
        let np = self.num_params();
        let mut tree = TokenTree::new();
        // rows[p][q]: tree node whose hidden state yields parameter p for query q.
        let mut rows: Vec<Vec<usize>> = vec![Vec::with_capacity(queries.len()); np];
        for q in queries {
            let Some(mut node) = tree.insert(q.state) else {
                return Err(Error::Encoding("empty state".into()));
            };
            for (p, row) in rows.iter_mut().enumerate() {
                if p > 0 {
                    let Some(&b) = q.bins.get(p - 1) else {
                        return Err(Error::Shape(format!("query carries {} bins, parameter {p} needs {p}", q.bins.len())));
                    };
                    if b >= self.vocab.param_width(p - 1) {
                        return Err(Error::Shape(format!("bin {b} out of range for parameter {}", p - 1)));
                    }
                    node = tree.child(Some(node), self.vocab.param_token(p - 1, b));
                }
                row.push(node);
            }
        }
        let hidden = self.tape_hidden(tape, w, &tree)?;
        Ok(rows
            .into_iter()
            .enumerate()
            .map(|(p, r)| self.tape_head(tape, w, hidden, r, p))
            .collect())
    }

    /// Value-only evaluation of [`PolicyNet::tape_logprobs`].
    pub fn logprob_tables(&self, weights: &[Array2<f64>], queries: &[Query<'_>]) -> Result<Vec<Array2<f64>>> {
        let mut tape = Tape::new();
        let w = ParamNodes::frozen(&mut tape, weights);
        let nodes = self.tape_logprobs(&mut tape, &w, queries)?;
        Ok(nodes.into_iter().map(|n| tape.value(n).clone()).collect())
    }
}
