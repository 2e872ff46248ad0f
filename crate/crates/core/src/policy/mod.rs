//! The transformer policy: a small pre-norm causal decoder over the encoded
//! trajectory with one categorical output head per search-space parameter.
//!
//! Parameter `p`'s distribution is read at the last state token for `p = 0`
//! and at the bin token of parameter `p - 1` otherwise, so the heads factor
//! the joint distribution autoregressively.

mod checkpoint;
mod forward;
mod infer;
mod tree;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::codec::{CodecConfig, Vocabulary};
use crate::error::{Error, Result};
use crate::space::{Configuration, SearchSpace};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use forward::{ParamNodes, Query};
pub use infer::Inference;
pub use tree::TokenTree;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransformerConfig {
    pub layers: usize,
    pub heads: usize,
    pub model_dim: usize,
    pub ff_dim: usize,
    pub context_length: usize,
}

impl Default for TransformerConfig {
    fn default() -> Self {
        TransformerConfig {
            layers: 2,
            heads: 4,
            model_dim: 64,
            ff_dim: 256,
            context_length: 512,
        }
    }
}

impl TransformerConfig {
    /// One layer, width 16: the network used by the gradient audit.
    pub fn tiny() -> Self {
        TransformerConfig {
            layers: 1,
            heads: 2,
            model_dim: 16,
            ff_dim: 32,
            context_length: 128,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("layers", self.layers),
            ("heads", self.heads),
            ("model_dim", self.model_dim),
            ("ff_dim", self.ff_dim),
            ("context_length", self.context_length),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("transformer.{name} must be positive")));
        }
        if self.model_dim % self.heads != 0 {
            return Err(Error::Config(format!(
                "transformer.model_dim ({}) must be divisible by transformer.heads ({})",
                self.model_dim, self.heads
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct LayerSlots {
    ln1_g: usize,
    ln1_b: usize,
    wq: usize,
    wk: usize,
    wv: usize,
    wo: usize,
    ln2_g: usize,
    ln2_b: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

#[derive(Debug, Clone)]
struct Layout {
    tok_emb: usize,
    pos_emb: usize,
    layers: Vec<LayerSlots>,
    lnf_g: usize,
    lnf_b: usize,
    /// (weight, bias) per search-space parameter.
    heads: Vec<(usize, usize)>,
    shapes: Vec<(usize, usize)>,
    names: Vec<String>,
}

impl Layout {
    fn new(config: &TransformerConfig, vocab: &Vocabulary) -> Self {
        let d = config.model_dim;
        let mut shapes = Vec::new();
        let mut names = Vec::new();
        let mut slot = |name: String, shape: (usize, usize)| {
            shapes.push(shape);
            names.push(name);
            shapes.len() - 1
        };
        let tok_emb = slot("tok_emb".into(), (vocab.size(), d));
        let pos_emb = slot("pos_emb".into(), (config.context_length, d));
        let layers = (0..config.layers)
            .map(|l| LayerSlots {
                ln1_g: slot(format!("l{l}.ln1_g"), (1, d)),
                ln1_b: slot(format!("l{l}.ln1_b"), (1, d)),
                wq: slot(format!("l{l}.wq"), (d, d)),
                wk: slot(format!("l{l}.wk"), (d, d)),
                wv: slot(format!("l{l}.wv"), (d, d)),
                wo: slot(format!("l{l}.wo"), (d, d)),
                ln2_g: slot(format!("l{l}.ln2_g"), (1, d)),
                ln2_b: slot(format!("l{l}.ln2_b"), (1, d)),
                w1: slot(format!("l{l}.w1"), (d, config.ff_dim)),
                b1: slot(format!("l{l}.b1"), (1, config.ff_dim)),
                w2: slot(format!("l{l}.w2"), (config.ff_dim, d)),
                b2: slot(format!("l{l}.b2"), (1, d)),
            })
            .collect();
        let lnf_g = slot("lnf_g".into(), (1, d));
        let lnf_b = slot("lnf_b".into(), (1, d));
        let heads = (0..vocab.num_params())
            .map(|p| {
                let w = vocab.param_width(p);
                (slot(format!("head{p}.w"), (d, w)), slot(format!("head{p}.b"), (1, w)))
            })
            .collect();
        Layout {
            tok_emb,
            pos_emb,
            layers,
            lnf_g,
            lnf_b,
            heads,
            shapes,
            names,
        }
    }

    fn is_gain(&self, i: usize) -> bool {
        i == self.lnf_g || self.layers.iter().any(|l| l.ln1_g == i || l.ln2_g == i)
    }

    fn is_zero_init(&self, i: usize) -> bool {
        self.heads.iter().any(|&(w, b)| w == i || b == i)
            || i == self.lnf_b
            || self
                .layers
                .iter()
                .any(|l| [l.ln1_b, l.ln2_b, l.b1, l.b2].contains(&i))
    }
}

/// Architecture of a policy for one search space: transformer shape, token
/// vocabulary and the parameter layout.
#[derive(Debug, Clone)]
pub struct PolicyNet {
    config: TransformerConfig,
    vocab: Vocabulary,
    space: SearchSpace,
    layout: Layout,
}

/// Weight tensors and a gradient buffer of identical shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub weights: Vec<Array2<f64>>,
    pub grads: Vec<Array2<f64>>,
}

/// Frozen copy of the weights at the start of an update round.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySnapshot {
    weights: Vec<Array2<f64>>,
}

impl PolicySnapshot {
    pub fn of(params: &PolicyParams) -> Self {
        PolicySnapshot {
            weights: params.weights.clone(),
        }
    }

    pub fn of_weights(weights: Vec<Array2<f64>>) -> Self {
        PolicySnapshot { weights }
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }
}

/// A sampled configuration with its exact log-probability (temperature 1).
#[derive(Debug, Clone, PartialEq)]
pub struct ActionLogProb {
    pub config: Configuration,
    pub bins: Vec<usize>,
    pub per_param_logprob: Vec<f64>,
    pub total: f64,
}

impl PolicyNet {
    pub fn new(config: TransformerConfig, codec: CodecConfig, space: &SearchSpace) -> Result<Self> {
        config.validate()?;
        let vocab = Vocabulary::new(space, codec)?;
        if config.context_length < vocab.trial_width() + space.len() {
            return Err(Error::Config(format!(
                "transformer.context_length ({}) too small for this search space",
                config.context_length
            )));
        }
        let layout = Layout::new(&config, &vocab);
        Ok(PolicyNet {
            config,
            vocab,
            space: space.clone(),
            layout,
        })
    }

    pub fn config(&self) -> &TransformerConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn num_params(&self) -> usize {
        self.space.len()
    }

    /// Token budget for encoded states: the full context minus the bin
    /// tokens fed back while emitting a configuration.
    pub fn state_context_length(&self) -> usize {
        self.config.context_length - (self.space.len() - 1)
    }

    pub fn tensor_names(&self) -> &[String] {
        &self.layout.names
    }

    pub fn tensor_shapes(&self) -> &[(usize, usize)] {
        &self.layout.shapes
    }

    pub fn zeros(&self) -> Vec<Array2<f64>> {
        self.layout.shapes.iter().map(|&s| Array2::zeros(s)).collect()
    }

    /// N(0, 0.02) weights, unit layer-norm gains, zero biases and zero output
    /// heads; the initial policy is exactly uniform over every parameter's bins.
    pub fn init_params(&self, rng: &mut impl Rng) -> PolicyParams {
        let normal = Normal::new(0.0, 0.02).expect("valid std");
        let weights = self
            .layout
            .shapes
            .iter()
            .enumerate()
            .map(|(i, &shape)| {
                if self.layout.is_gain(i) {
                    Array2::ones(shape)
                } else if self.layout.is_zero_init(i) {
                    Array2::zeros(shape)
                } else {
                    Array2::from_shape_simple_fn(shape, || normal.sample(rng))
                }
            })
            .collect();
        PolicyParams {
            weights,
            grads: self.zeros(),
        }
    }

    pub fn check_params(&self, params: &PolicyParams) -> Result<()> {
        let ok = |ts: &[Array2<f64>]| {
            ts.len() == self.layout.shapes.len() && ts.iter().zip(&self.layout.shapes).all(|(t, &s)| t.dim() == s)
        };
        if !ok(&params.weights) || !ok(&params.grads) {
            return Err(Error::Shape("parameter tensors do not match the policy layout".into()));
        }
        Ok(())
    }

    /// Indices of the output-head tensors.
    pub fn head_tensors(&self) -> Vec<usize> {
        self.layout.heads.iter().flat_map(|&(w, b)| [w, b]).collect()
    }

    pub fn embedding_tensors(&self) -> [usize; 2] {
        [self.layout.tok_emb, self.layout.pos_emb]
    }
}

impl PolicyParams {
    pub fn zero_grad(&mut self) {
        for g in &mut self.grads {
            g.fill(0.0);
        }
    }

    pub fn grad_norm(&self) -> f64 {
        self.grads.iter().flat_map(|g| g.iter()).map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn num_scalars(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum()
    }

    /// Plain SGD, `theta -= lr * grad`, with the gradient rescaled to
    /// `max_norm` when its global norm exceeds it. Returns the norm of the
    /// applied update.
    pub fn sgd_step(&mut self, learning_rate: f64, max_norm: Option<f64>) -> Result<f64> {
        let norm = self.grad_norm();
        if !norm.is_finite() {
            return Err(Error::NonFinite("gradient"));
        }
        let scale = match max_norm {
            Some(m) if norm > m => m / norm,
            _ => 1.0,
        };
        let step = learning_rate * scale;
        if step != 0.0 {
            for (w, g) in self.weights.iter_mut().zip(&self.grads) {
                w.scaled_add(-step, g);
            }
        }
        Ok(step.abs() * norm)
    }
}
