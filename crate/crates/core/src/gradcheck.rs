//! Finite-difference audit of the policy-loss gradient.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::autodiff::Tape;
use crate::codec::{encode_context, CodecConfig};
use crate::error::Result;
use crate::grpo::{relative_advantage, select_reference_states, total_policy_loss, CandidateGroup, Member, PolicyBatch};
use crate::objectives::uniform_config;
use crate::policy::{Inference, ParamNodes, PolicyNet, PolicySnapshot, TransformerConfig};
use crate::space::{ParamSpec, SearchSpace};
use crate::trajectory::{TaskDescriptor, Trajectory};

pub const DEFAULT_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct GradcheckOptions {
    pub transformer: TransformerConfig,
    pub seed: u64,
    pub coordinates: usize,
    pub step: f64,
    pub clip_epsilon: f64,
    pub pcr_weight: f64,
    /// Negative control: run the analytic pass with a corrupted backward rule.
    pub corrupt_backward: bool,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        GradcheckOptions {
            transformer: TransformerConfig::tiny(),
            seed: 0,
            coordinates: 256,
            step: 1e-5,
            clip_epsilon: 0.2,
            pcr_weight: 0.1,
            corrupt_backward: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GradcheckReport {
    pub coordinates: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub loss_grpo: f64,
    pub loss_pc: f64,
    pub parameters: usize,
}

impl GradcheckReport {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_rel_error <= tolerance
    }
}

fn audit_space() -> Result<SearchSpace> {
    SearchSpace::new(vec![
        ParamSpec::continuous("x", 0.0, 1.0, 6)?,
        ParamSpec::categorical("c", ["a", "b", "c"])?,
        ParamSpec::integer("n", 1, 4, 16)?,
    ])
}

/// A non-trivial batch: random snapshot weights, a short synthetic
/// trajectory, two groups with zero-mean advantages and a few reference
/// states. Returns the network, snapshot and batch.
fn fixture(opts: &GradcheckOptions, rng: &mut ChaCha8Rng) -> Result<(PolicyNet, Vec<Array2<f64>>, PolicyBatch)> {
    let space = audit_space()?;
    let net = PolicyNet::new(opts.transformer, CodecConfig::default(), &space)?;
    let mut snapshot = net.init_params(rng).weights;
    for w in &mut snapshot {
        w.mapv_inplace(|v| v + 0.3 * (rng.random::<f64>() - 0.5));
    }
    let task = TaskDescriptor::new("audit", "audit", 16)?.with_tokens(vec![1, 3]);
    let mut traj = Trajectory::new("audit");
    let trials: Vec<_> = (0..6)
        .map(|_| Ok((uniform_config(&space, rng)?, rng.random::<f64>())))
        .collect::<Result<_>>()?;
    traj.push_all(trials)?;

    let mut inf = Inference::new(&net, &snapshot);
    let mut groups = Vec::new();
    for g in 0..2 {
        let state = encode_context(net.vocab(), &task, &space, &traj.prefix(4 + g), net.state_context_length())?;
        let node = inf.state(&state.tokens.ids)?;
        let actions = (0..4).map(|_| inf.sample_from(node, 1.0, rng)).collect::<Result<Vec<_>>>()?;
        let rewards: Vec<f64> = actions.iter().map(|_| rng.random::<f64>()).collect();
        let adv = relative_advantage(&rewards)?;
        let members = actions
            .into_iter()
            .zip(rewards)
            .zip(adv)
            .map(|((action, reward), advantage)| Member { action, reward, advantage })
            .collect();
        groups.push(CandidateGroup { state, members });
    }
    let refs = select_reference_states(&traj, &task, &net, 0.5, 3, rng)?;
    let batch = PolicyBatch::new(&net, &PolicySnapshot::of_weights(snapshot.clone()), groups, refs)?;
    Ok((net, snapshot, batch))
}

/// Compares the taped gradient of the full policy loss with central
/// differences on randomly chosen coordinates. The current parameters sit
/// away from the snapshot, so both the surrogate and the KL term are active;
/// no ratio lies within reach of a clip boundary.
pub fn gradient_audit(opts: &GradcheckOptions) -> Result<GradcheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (net, snapshot, batch) = fixture(opts, &mut rng)?;
    let (eps, lambda) = (opts.clip_epsilon, opts.pcr_weight);
    let loss = |w: &[Array2<f64>]| -> Result<(f64, f64, f64)> {
        let mut tape = Tape::new();
        let nodes = ParamNodes::frozen(&mut tape, w);
        let g = total_policy_loss(&mut tape, &net, &nodes, &batch, eps, lambda)?;
        let ratios: Vec<f64> = tape
            .value(g.logprobs)
            .iter()
            .zip(batch.groups.iter().flat_map(|g| &g.members))
            .map(|(&n, m)| (n - m.action.total).exp())
            .collect();
        let margin = ratios
            .iter()
            .map(|r| (r - (1.0 - eps)).abs().min((r - (1.0 + eps)).abs()))
            .fold(f64::INFINITY, f64::min);
        Ok((tape.scalar(g.total), g.pcr.map_or(0.0, |p| tape.scalar(p)), margin))
    };

    // Perturb away from the snapshot until every ratio is clear of a kink.
    let mut current = snapshot.clone();
    loop {
        for (w, s) in current.iter_mut().zip(&snapshot) {
            w.zip_mut_with(s, |c, &v| *c = v + 0.05 * (rng.random::<f64>() - 0.5));
        }
        if loss(&current)?.2 > 1e-3 {
            break;
        }
    }

    let mut tape = if opts.corrupt_backward { Tape::with_faulty_backward() } else { Tape::new() };
    let nodes = ParamNodes::bind(&mut tape, &current);
    let g = total_policy_loss(&mut tape, &net, &nodes, &batch, eps, lambda)?;
    let mut grads = net.zeros();
    tape.backward(g.total, &mut grads);
    let loss_grpo = tape.scalar(g.grpo);
    let loss_pc = g.pcr.map_or(0.0, |p| tape.scalar(p));

    // Coordinates are drawn from tensors with probability proportional to
    // size, skipping entries the batch cannot reach (unused token and
    // position rows have exactly zero gradient and zero sensitivity).
    let sizes: Vec<usize> = current.iter().map(|w| w.len()).collect();
    let total: usize = sizes.iter().sum();
    let (mut max_rel, mut max_abs) = (0.0f64, 0.0f64);
    let mut checked = 0;
    let mut attempts = 0;
    while checked < opts.coordinates && attempts < 100 * opts.coordinates {
        attempts += 1;
        let mut k = rng.random_range(0..total);
        let t = sizes
            .iter()
            .position(|&s| {
                if k < s {
                    true
                } else {
                    k -= s;
                    false
                }
            })
            .expect("index within total");
        let cols = current[t].ncols();
        let (i, j) = (k / cols, k % cols);
        let at = |d: f64| -> Result<f64> {
            let mut w = current.clone();
            w[t][[i, j]] += d;
            Ok(loss(&w)?.0)
        };
        let numeric = (at(opts.step)? - at(-opts.step)?) / (2.0 * opts.step);
        let analytic = grads[t][[i, j]];
        if numeric == 0.0 && analytic == 0.0 {
            continue;
        }
        let abs = (numeric - analytic).abs();
        let rel = abs / numeric.abs().max(analytic.abs()).max(1e-7);
        max_rel = max_rel.max(rel);
        max_abs = max_abs.max(abs);
        checked += 1;
    }
    Ok(GradcheckReport {
        coordinates: checked,
        max_rel_error: max_rel,
        max_abs_error: max_abs,
        loss_grpo,
        loss_pc,
        parameters: total,
    })
}
