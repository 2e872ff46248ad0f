//! Group-relative policy optimization with policy churn regularization.
//!
//! Each update round freezes the policy, samples groups of configurations
//! from the current trajectory state, evaluates them, appends every member
//! to the trajectory and then takes a few gradient steps on
//!
//! ```text
//! L = -mean_k min(r_k A_k, clip(r_k, 1-eps, 1+eps) A_k) + lambda * L_PC
//! ```
//!
//! where `A_k` is the member's reward minus its group mean, `r_k` the
//! probability ratio against the frozen policy and `L_PC` the mean KL from
//! the frozen to the current policy on states encoded from the early part of
//! the trajectory.

use log::{debug, warn};
use ndarray::Array2;
use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{clipped_surrogate, NodeId, Tape};
use crate::codec::{encode_context, CodecConfig, EncodedState};
use crate::error::{Error, Result};
use crate::objectives::Objective;
use crate::policy::{ActionLogProb, Inference, ParamNodes, PolicyNet, PolicyParams, PolicySnapshot, Query, TransformerConfig};
use crate::rng;
use crate::trajectory::{TaskDescriptor, TrialRecord, Trajectory};

/// Which rewards an advantage is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvantageScope {
    /// The member's own group.
    #[default]
    Group,
    /// Every member sampled in the update round.
    UpdateBatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrpoConfig {
    pub group_size: usize,
    pub groups_per_update: usize,
    pub clip_epsilon: f64,
    pub pcr_weight: f64,
    pub prefix_fraction: f64,
    pub reference_sample_count: usize,
    pub epochs_per_update: usize,
    pub learning_rate: f64,
    pub total_budget: usize,
    pub advantage_scope: AdvantageScope,
    /// Global gradient-norm clip; `None` disables clipping.
    pub max_grad_norm: Option<f64>,
    pub sampling_temperature: f64,
    /// Reward assigned when an evaluation fails; `None` uses the worst
    /// reward observed so far (or 0 before any observation).
    pub failure_reward: Option<f64>,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        GrpoConfig {
            group_size: 8,
            groups_per_update: 2,
            clip_epsilon: 0.2,
            pcr_weight: 0.1,
            prefix_fraction: 0.5,
            reference_sample_count: 8,
            epochs_per_update: 2,
            learning_rate: 1.0,
            total_budget: 120,
            advantage_scope: AdvantageScope::Group,
            max_grad_norm: Some(1.0),
            sampling_temperature: 1.0,
            failure_reward: None,
        }
    }
}

impl GrpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: &str| Err(Error::Config(format!("grpo.{field} {why}")));
        if self.group_size < 1 {
            return bad("group_size", "must be at least 1");
        }
        if self.groups_per_update < 1 {
            return bad("groups_per_update", "must be at least 1");
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return bad("clip_epsilon", "must lie in (0, 1)");
        }
        if !(self.pcr_weight >= 0.0 && self.pcr_weight.is_finite()) {
            return bad("pcr_weight", "must be finite and >= 0");
        }
        if !(self.prefix_fraction > 0.0 && self.prefix_fraction <= 1.0) {
            return bad("prefix_fraction", "must lie in (0, 1]");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", "must be finite and >= 0");
        }
        if self.total_budget < 1 {
            return bad("total_budget", "must be at least 1");
        }
        if let Some(m) = self.max_grad_norm {
            if !(m > 0.0 && m.is_finite()) {
                return bad("max_grad_norm", "must be positive");
            }
        }
        if !(self.sampling_temperature > 0.0 && self.sampling_temperature.is_finite()) {
            return bad("sampling_temperature", "must be positive");
        }
        if self.failure_reward.is_some_and(|r| !r.is_finite()) {
            return bad("failure_reward", "must be finite");
        }
        Ok(())
    }
}

/// `A_k = r_k - mean(r)`, with no variance scaling.
pub fn relative_advantage(rewards: &[f64]) -> Result<Vec<f64>> {
    if rewards.is_empty() {
        return Err(Error::Config("advantages of an empty group".into()));
    }
    if rewards.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite("group rewards"));
    }
    let mean = rewards.iter().sum::<f64>() / rewards.len() as f64;
    Ok(rewards.iter().map(|r| r - mean).collect())
}

/// `min(r A, clip(r, 1 - eps, 1 + eps) A)` with `r = exp(new - old)`; the
/// log-ratio is clamped to [-20, 20].
pub fn grpo_surrogate(new_logprob: f64, old_logprob: f64, advantage: f64, eps: f64) -> f64 {
    clipped_surrogate(new_logprob, old_logprob, advantage, eps).0
}

/// Exact `KL(p || q)` of two categorical distributions.
pub fn categorical_kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&pp, &qq)| if pp > 0.0 { pp * (pp / qq).ln() } else { 0.0 })
        .sum()
}

/// Mean over states and parameters of `KL(old || new)`, with
/// distributions indexed `[state][param][bin]`. Zero for no states.
pub fn pcr_value(old: &[Vec<Vec<f64>>], new: &[Vec<Vec<f64>>]) -> f64 {
    if old.is_empty() {
        return 0.0;
    }
    let per_state: f64 = old
        .iter()
        .zip(new)
        .map(|(o, n)| o.iter().zip(n).map(|(p, q)| categorical_kl(p, q)).sum::<f64>() / o.len() as f64)
        .sum();
    per_state / old.len() as f64
}

/// One configuration sampled from a group's state under the frozen policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub action: ActionLogProb,
    pub reward: f64,
    pub advantage: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateGroup {
    pub state: EncodedState,
    pub members: Vec<Member>,
}

/// A state from the early trajectory together with the configuration that
/// followed it, which supplies the conditioning bins for parameters `p >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceState {
    pub state: EncodedState,
    pub bins: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReferenceStateSet {
    pub states: Vec<ReferenceState>,
}

impl ReferenceStateSet {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    fn queries(&self) -> Vec<Query<'_>> {
        self.states
            .iter()
            .map(|r| Query {
                state: &r.state.tokens.ids,
                bins: &r.bins,
            })
            .collect()
    }
}

/// Samples up to `count` distinct cut points `t'` in
/// `[0, min(floor(rho * len), len - 1)]` and encodes the state after the
/// first `t'` trials.
pub fn select_reference_states(
    trajectory: &Trajectory,
    task: &TaskDescriptor,
    net: &PolicyNet,
    prefix_fraction: f64,
    count: usize,
    rng: &mut impl Rng,
) -> Result<ReferenceStateSet> {
    let len = trajectory.len();
    if len == 0 || count == 0 {
        return Ok(ReferenceStateSet::default());
    }
    let top = ((prefix_fraction * len as f64).floor() as usize).min(len - 1);
    let mut cuts = index::sample(rng, top + 1, count.min(top + 1)).into_vec();
    cuts.sort_unstable();
    let states = cuts
        .into_iter()
        .map(|t| {
            let state = encode_context(net.vocab(), task, net.space(), &trajectory.prefix(t), net.state_context_length())?;
            let bins = net.space().bin_indices(&trajectory.records()[t].config)?;
            Ok(ReferenceState { state, bins })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReferenceStateSet { states })
}

/// Per-parameter probability tables `[refs x B_p]` of a policy on `refs`.
pub fn reference_distributions(net: &PolicyNet, weights: &[Array2<f64>], refs: &ReferenceStateSet) -> Result<Vec<Array2<f64>>> {
    if refs.is_empty() {
        return Ok(Vec::new());
    }
    Ok(net
        .logprob_tables(weights, &refs.queries())?
        .into_iter()
        .map(|t| t.mapv(f64::exp))
        .collect())
}

/// `L_PC` between a snapshot and the current parameters on `refs`.
pub fn pcr_loss(net: &PolicyNet, old: &PolicySnapshot, current: &PolicyParams, refs: &ReferenceStateSet) -> Result<f64> {
    if refs.is_empty() {
        debug!("no reference states; PCR term is zero");
        return Ok(0.0);
    }
    let p = reference_distributions(net, old.weights(), refs)?;
    let q = reference_distributions(net, &current.weights, refs)?;
    let to_rows = |t: &[Array2<f64>]| -> Vec<Vec<Vec<f64>>> {
        (0..refs.len())
            .map(|r| t.iter().map(|tab| tab.row(r).to_vec()).collect())
            .collect()
    };
    Ok(pcr_value(&to_rows(&p), &to_rows(&q)))
}

/// Everything one update round optimizes over: the sampled groups, the
/// reference states and the frozen policy's distributions on them.
#[derive(Debug, Clone)]
pub struct PolicyBatch {
    pub groups: Vec<CandidateGroup>,
    pub refs: ReferenceStateSet,
    /// `[refs x B_p]` snapshot probabilities per parameter.
    pub ref_old: Vec<Array2<f64>>,
}

impl PolicyBatch {
    pub fn new(net: &PolicyNet, old: &PolicySnapshot, groups: Vec<CandidateGroup>, refs: ReferenceStateSet) -> Result<Self> {
        let ref_old = reference_distributions(net, old.weights(), &refs)?;
        Ok(PolicyBatch { groups, refs, ref_old })
    }

    pub fn num_members(&self) -> usize {
        self.groups.iter().map(|g| g.members.len()).sum()
    }

    fn member_queries(&self) -> Vec<Query<'_>> {
        self.groups
            .iter()
            .flat_map(|g| {
                g.members.iter().map(move |m| Query {
                    state: &g.state.tokens.ids,
                    bins: &m.action.bins,
                })
            })
            .collect()
    }

    fn members(&self) -> impl Iterator<Item = &Member> {
        self.groups.iter().flat_map(|g| &g.members)
    }
}

/// Nodes of the combined loss on a tape.
#[derive(Debug, Clone, Copy)]
pub struct LossGraph {
    pub total: NodeId,
    pub grpo: NodeId,
    pub pcr: Option<NodeId>,
    /// `1 x members` current log-probabilities.
    pub logprobs: NodeId,
}

/// Builds `L_GRPO + lambda * L_PC` on `tape`. Old log-probabilities,
/// advantages and snapshot distributions enter as constants.
pub fn total_policy_loss(
    tape: &mut Tape,
    net: &PolicyNet,
    w: &ParamNodes,
    batch: &PolicyBatch,
    eps: f64,
    lambda: f64,
) -> Result<LossGraph> {
    let m = batch.num_members();
    if m == 0 {
        return Err(Error::Config("policy loss over an empty batch".into()));
    }
    let use_refs = lambda > 0.0 && !batch.refs.is_empty();
    let mut queries = batch.member_queries();
    if use_refs {
        queries.extend(batch.refs.queries());
    }
    let tables = net.tape_logprobs(tape, w, &queries)?;
    let members: Vec<&Member> = batch.members().collect();

    let mut logprobs = None;
    for (p, &table) in tables.iter().enumerate() {
        let picked = tape.pick(table, members.iter().enumerate().map(|(q, mb)| (q, mb.action.bins[p])).collect());
        logprobs = Some(match logprobs {
            None => picked,
            Some(acc) => tape.add(acc, picked),
        });
    }
    let logprobs = logprobs.expect("at least one parameter");
    let old: Vec<f64> = members.iter().map(|mb| mb.action.total).collect();
    let adv: Vec<f64> = members.iter().map(|mb| mb.advantage).collect();
    let terms = tape.surrogate(logprobs, &old, &adv, eps);
    let mean = tape.mean(terms);
    let grpo = tape.scale(mean, -1.0);

    let (total, pcr) = if use_refs {
        let rows: Vec<usize> = (m..m + batch.refs.len()).collect();
        let mut kl = None;
        for (p, &table) in tables.iter().enumerate() {
            let sel = tape.select_rows(table, rows.clone());
            let k = tape.kl_from_fixed(sel, batch.ref_old[p].clone());
            kl = Some(match kl {
                None => k,
                Some(acc) => tape.add(acc, k),
            });
        }
        let norm = 1.0 / (batch.refs.len() * net.num_params()) as f64;
        let pcr = tape.scale(kl.expect("at least one parameter"), norm);
        let weighted = tape.scale(pcr, lambda);
        (tape.add(grpo, weighted), Some(pcr))
    } else {
        (grpo, None)
    };
    Ok(LossGraph {
        total,
        grpo,
        pcr,
        logprobs,
    })
}

/// Scalar values of one loss evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    pub total: f64,
    pub grpo: f64,
    pub pcr: f64,
    pub mean_ratio: f64,
    pub clip_fraction: f64,
}

/// Evaluates the loss at `params` and, when `grad` is set, overwrites
/// `params.grads` with its gradient.
pub fn evaluate_loss(net: &PolicyNet, params: &mut PolicyParams, batch: &PolicyBatch, eps: f64, lambda: f64, grad: bool) -> Result<LossTerms> {
    let mut tape = Tape::new();
    let w = if grad {
        ParamNodes::bind(&mut tape, &params.weights)
    } else {
        ParamNodes::frozen(&mut tape, &params.weights)
    };
    let g = total_policy_loss(&mut tape, net, &w, batch, eps, lambda)?;
    let total = tape.scalar(g.total);
    if !total.is_finite() {
        return Err(Error::NonFinite("policy loss"));
    }
    if grad {
        params.zero_grad();
        tape.backward(g.total, &mut params.grads);
    }
    let lp = tape.value(g.logprobs);
    let ratios: Vec<f64> = lp
        .iter()
        .zip(batch.members())
        .map(|(&n, mb)| (n - mb.action.total).clamp(-20.0, 20.0).exp())
        .collect();
    let n = ratios.len() as f64;
    Ok(LossTerms {
        total,
        grpo: tape.scalar(g.grpo),
        pcr: g.pcr.map_or(0.0, |p| tape.scalar(p)),
        mean_ratio: ratios.iter().sum::<f64>() / n,
        clip_fraction: ratios.iter().filter(|r| (*r - 1.0).abs() > eps).count() as f64 / n,
    })
}

/// One line of the diagnostics log, written after every update round.
/// Loss fields describe the last epoch and are absent when no update ran.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateRecord {
    pub iteration: usize,
    pub trials: usize,
    pub group_sizes: Vec<usize>,
    pub lambda_pc: f64,
    pub reference_states: usize,
    pub loss_grpo: Option<f64>,
    pub loss_pc: Option<f64>,
    pub loss_total: Option<f64>,
    pub mean_ratio: Option<f64>,
    pub clip_fraction: Option<f64>,
    pub kl_to_snapshot: Option<f64>,
    pub update_norm: Option<f64>,
    pub failures: usize,
    pub best_reward: f64,
}

/// Result of a complete run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub best: TrialRecord,
    pub trajectory: Trajectory,
    pub diagnostics: Vec<UpdateRecord>,
    pub initial: PolicyParams,
    pub params: PolicyParams,
    pub net: PolicyNet,
    pub evaluations: usize,
}

/// Group sizes of the next round given the remaining budget: `G` groups of
/// `K` while they fit, otherwise as many full groups as fit plus one smaller
/// remainder group.
pub fn plan_groups(remaining: usize, group_size: usize, groups_per_update: usize) -> Vec<usize> {
    if remaining >= group_size * groups_per_update {
        return vec![group_size; groups_per_update];
    }
    let mut plan = vec![group_size; remaining / group_size];
    if remaining % group_size > 0 {
        plan.push(remaining % group_size);
    }
    plan
}

/// State of one optimization run.
pub struct Engine<'a> {
    net: PolicyNet,
    params: PolicyParams,
    initial: PolicyParams,
    config: GrpoConfig,
    objective: &'a Objective,
    task: TaskDescriptor,
    trajectory: Trajectory,
    learn: bool,
    sample_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    ref_rng: ChaCha8Rng,
    evaluations: usize,
    iteration: usize,
    diagnostics: Vec<UpdateRecord>,
}

impl<'a> Engine<'a> {
    /// A fresh run from uniform-initialized parameters. Random streams are
    /// derived from `seed` and the task id, so variants of the method that
    /// share a seed share their initialization and sampling noise.
    pub fn new(
        task: TaskDescriptor,
        objective: &'a Objective,
        transformer: TransformerConfig,
        codec: CodecConfig,
        config: GrpoConfig,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        if task.budget != config.total_budget {
            return Err(Error::Config(format!(
                "task budget {} differs from grpo.total_budget {}",
                task.budget, config.total_budget
            )));
        }
        let net = PolicyNet::new(transformer, codec, objective.space())?;
        let stream = |purpose: &str| rng::stream(seed, &[&task.task_id, "policy", purpose]);
        let params = net.init_params(&mut stream("init"));
        Ok(Engine {
            initial: params.clone(),
            params,
            trajectory: Trajectory::new(task.task_id.clone()),
            sample_rng: stream("sample"),
            noise_rng: stream("noise"),
            ref_rng: stream("reference-states"),
            net,
            config,
            objective,
            task,
            learn: true,
            evaluations: 0,
            iteration: 0,
            diagnostics: Vec::new(),
        })
    }

    /// Disables parameter updates: the policy stays at its initialization and
    /// only the growing trajectory changes its behaviour.
    pub fn frozen(mut self) -> Self {
        self.learn = false;
        self
    }

    pub fn net(&self) -> &PolicyNet {
        &self.net
    }

    pub fn params(&self) -> &PolicyParams {
        &self.params
    }

    /// Replaces the current parameters, e.g. to start two engines from the
    /// same point.
    pub fn set_params(&mut self, params: PolicyParams) -> Result<()> {
        self.net.check_params(&params)?;
        self.params = params;
        Ok(())
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    pub fn diagnostics(&self) -> &[UpdateRecord] {
        &self.diagnostics
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn remaining(&self) -> usize {
        self.config.total_budget - self.evaluations
    }

    fn failure_reward(&self, pending: &[f64]) -> f64 {
        self.config.failure_reward.unwrap_or_else(|| {
            self.trajectory
                .records()
                .iter()
                .map(|r| r.reward)
                .chain(pending.iter().copied())
                .reduce(f64::min)
                .unwrap_or(0.0)
        })
    }

    /// One update round; a no-op once the budget is exhausted.
    pub fn run_iteration(&mut self) -> Result<()> {
        let plan = plan_groups(self.remaining(), self.config.group_size, self.config.groups_per_update);
        if plan.is_empty() {
            return Ok(());
        }
        let snapshot = PolicySnapshot::of(&self.params);
        let mut inf = Inference::new(&self.net, snapshot.weights());
        let mut groups = Vec::with_capacity(plan.len());
        let mut failures = 0;
        for &k in &plan {
            let state = encode_context(
                self.net.vocab(),
                &self.task,
                self.net.space(),
                &self.trajectory,
                self.net.state_context_length(),
            )?;
            let node = inf.state(&state.tokens.ids)?;
            let actions = (0..k)
                .map(|_| inf.sample_from(node, self.config.sampling_temperature, &mut self.sample_rng))
                .collect::<Result<Vec<_>>>()?;
            let mut rewards = Vec::with_capacity(k);
            for a in &actions {
                let r = match self.objective.evaluate(&a.config, &mut self.noise_rng) {
                    Ok(r) => r,
                    Err(e) => {
                        let r = self.failure_reward(&rewards);
                        warn!("evaluation failed on `{}` ({e}); assigning reward {r}", self.task.task_id);
                        failures += 1;
                        r
                    }
                };
                rewards.push(r);
            }
            self.evaluations += k;
            self.trajectory
                .push_all(actions.iter().map(|a| a.config.clone()).zip(rewards.iter().copied()))?;
            let advantages = relative_advantage(&rewards)?;
            let members = actions
                .into_iter()
                .zip(rewards)
                .zip(advantages)
                .map(|((action, reward), advantage)| Member { action, reward, advantage })
                .collect();
            groups.push(CandidateGroup { state, members });
        }
        drop(inf);
        if self.config.advantage_scope == AdvantageScope::UpdateBatch {
            let all: Vec<f64> = groups.iter().flat_map(|g| g.members.iter().map(|m| m.reward)).collect();
            let adv = relative_advantage(&all)?;
            for (m, a) in groups.iter_mut().flat_map(|g| g.members.iter_mut()).zip(adv) {
                m.advantage = a;
            }
        }

        let lambda = self.config.pcr_weight;
        let mut record = UpdateRecord {
            iteration: self.iteration,
            trials: self.trajectory.len(),
            group_sizes: plan,
            lambda_pc: if self.learn { lambda } else { 0.0 },
            reference_states: 0,
            loss_grpo: None,
            loss_pc: None,
            loss_total: None,
            mean_ratio: None,
            clip_fraction: None,
            kl_to_snapshot: None,
            update_norm: None,
            failures,
            best_reward: self.trajectory.best().map_or(f64::NAN, |b| b.reward),
        };
        if self.learn {
            let refs = if lambda > 0.0 {
                select_reference_states(
                    &self.trajectory,
                    &self.task,
                    &self.net,
                    self.config.prefix_fraction,
                    self.config.reference_sample_count,
                    &mut self.ref_rng,
                )?
            } else {
                ReferenceStateSet::default()
            };
            record.reference_states = refs.len();
            let batch = PolicyBatch::new(&self.net, &snapshot, groups, refs)?;
            let mut last = None;
            let mut moved = 0.0;
            for _ in 0..self.config.epochs_per_update {
                let terms = evaluate_loss(&self.net, &mut self.params, &batch, self.config.clip_epsilon, lambda, true)?;
                moved += self.params.sgd_step(self.config.learning_rate, self.config.max_grad_norm)?;
                last = Some(terms);
            }
            if let Some(t) = last {
                record.loss_grpo = Some(t.grpo);
                record.loss_pc = Some(t.pcr);
                record.loss_total = Some(t.total);
                record.mean_ratio = Some(t.mean_ratio);
                record.clip_fraction = Some(t.clip_fraction);
                record.update_norm = Some(moved);
                record.kl_to_snapshot = Some(self.kl_to_snapshot(&snapshot, &batch)?);
            }
        }
        debug!(
            "{} iteration {}: {} trials, best {}",
            self.task.task_id, self.iteration, record.trials, record.best_reward
        );
        self.diagnostics.push(record);
        self.iteration += 1;
        Ok(())
    }

    /// Mean KL from the snapshot to the current policy over the round's
    /// member queries and parameters.
    fn kl_to_snapshot(&self, snapshot: &PolicySnapshot, batch: &PolicyBatch) -> Result<f64> {
        let queries = batch.member_queries();
        let old = self.net.logprob_tables(snapshot.weights(), &queries)?;
        let new = self.net.logprob_tables(&self.params.weights, &queries)?;
        let mut total = 0.0;
        for (o, n) in old.iter().zip(&new) {
            for (ro, rn) in o.rows().into_iter().zip(n.rows()) {
                total += ro
                    .iter()
                    .zip(rn.iter())
                    .map(|(&lo, &ln)| lo.exp() * (lo - ln))
                    .sum::<f64>();
            }
        }
        Ok(total / (queries.len() * old.len()) as f64)
    }

    /// Runs update rounds until the budget is spent.
    pub fn run(mut self) -> Result<RunOutput> {
        while self.remaining() > 0 {
            self.run_iteration()?;
        }
        let best = self.trajectory.best().cloned().expect("budget >= 1");
        Ok(RunOutput {
            best,
            trajectory: self.trajectory,
            diagnostics: self.diagnostics,
            initial: self.initial,
            params: self.params,
            net: self.net,
            evaluations: self.evaluations,
        })
    }
}

/// Optimizes `objective` from a fresh policy with the default codec.
pub fn optimize(
    task: TaskDescriptor,
    objective: &Objective,
    transformer: TransformerConfig,
    config: GrpoConfig,
    seed: u64,
) -> Result<RunOutput> {
    Engine::new(task, objective, transformer, CodecConfig::default(), config, seed)?.run()
}
