//! Comparison methods: random search, a one-bin hill climber and the two
//! ablations of the policy optimizer.

use std::fmt;
use std::str::FromStr;

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codec::CodecConfig;
use crate::error::{Error, Result};
use crate::grpo::{Engine, GrpoConfig, RunOutput, UpdateRecord};
use crate::objectives::{uniform_config, Objective};
use crate::policy::{PolicyNet, PolicyParams, TransformerConfig};
use crate::rng;
use crate::space::Configuration;
use crate::trajectory::{TaskDescriptor, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodId {
    Grpoformer,
    GrpoformerNoPcr,
    GrpoformerNoGrpo,
    RandomSearch,
    HillClimb,
}

impl MethodId {
    pub const ALL: [MethodId; 5] = [
        MethodId::Grpoformer,
        MethodId::GrpoformerNoPcr,
        MethodId::GrpoformerNoGrpo,
        MethodId::RandomSearch,
        MethodId::HillClimb,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodId::Grpoformer => "grpoformer",
            MethodId::GrpoformerNoPcr => "grpoformer_no_pcr",
            MethodId::GrpoformerNoGrpo => "grpoformer_no_grpo",
            MethodId::RandomSearch => "random_search",
            MethodId::HillClimb => "hill_climb",
        }
    }

    /// Whether the method runs the transformer policy.
    pub fn uses_policy(self) -> bool {
        matches!(self, MethodId::Grpoformer | MethodId::GrpoformerNoPcr | MethodId::GrpoformerNoGrpo)
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodId::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

/// A method and its specific settings. In configuration files either a bare
/// name (`"hill_climb"`) or a table (`{ id = "hill_climb", step = 2 }`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(try_from = "RawMethod")]
pub struct MethodSpec {
    pub id: MethodId,
    /// Hill-climb step in bins.
    pub step: usize,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawMethod {
    Name(MethodId),
    Table {
        id: MethodId,
        #[serde(default)]
        step: Option<usize>,
    },
}

impl TryFrom<RawMethod> for MethodSpec {
    type Error = String;

    fn try_from(raw: RawMethod) -> std::result::Result<Self, String> {
        match raw {
            RawMethod::Name(id) => Ok(MethodSpec::new(id)),
            RawMethod::Table { id, step } => {
                if step.is_some() && id != MethodId::HillClimb {
                    return Err(format!("`step` applies only to hill_climb, not {id}"));
                }
                match step {
                    Some(0) => Err("hill_climb step must be at least 1".into()),
                    Some(s) => Ok(MethodSpec { id, step: s }),
                    None => Ok(MethodSpec::new(id)),
                }
            }
        }
    }
}

impl Serialize for MethodSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        if self.step == 1 {
            return self.id.serialize(s);
        }
        let mut st = s.serialize_struct("MethodSpec", 2)?;
        st.serialize_field("id", &self.id)?;
        st.serialize_field("step", &self.step)?;
        st.end()
    }
}

impl MethodSpec {
    pub fn new(id: MethodId) -> Self {
        MethodSpec { id, step: 1 }
    }
}

fn failure_reward(traj: &Trajectory) -> f64 {
    traj.records().iter().map(|r| r.reward).reduce(f64::min).unwrap_or(0.0)
}

/// Evaluates and appends one configuration, substituting the worst reward
/// so far on failure.
fn observe(objective: &Objective, traj: &mut Trajectory, config: Configuration, noise: &mut impl Rng) -> Result<f64> {
    let r = match objective.evaluate(&config, noise) {
        Ok(r) => r,
        Err(e) => {
            let r = failure_reward(traj);
            warn!("evaluation failed on `{}` ({e}); assigning reward {r}", objective.name());
            r
        }
    };
    traj.push_all([(config, r)])?;
    Ok(r)
}

/// `budget` independent uniform bin tuples.
pub fn run_random_search(objective: &Objective, task_id: &str, budget: usize, rng: &mut impl Rng) -> Result<Trajectory> {
    if budget == 0 {
        return Err(Error::Config("budget must be at least 1".into()));
    }
    let mut traj = Trajectory::new(task_id);
    for _ in 0..budget {
        let c = uniform_config(objective.space(), rng)?;
        observe(objective, &mut traj, c, rng)?;
    }
    Ok(traj)
}

/// Starts from a uniform bin tuple; each step moves one random parameter by
/// `step` bins in a random direction (clamped to the valid range) and keeps
/// the move only on strict improvement.
pub fn run_hill_climb(objective: &Objective, task_id: &str, budget: usize, step: usize, rng: &mut impl Rng) -> Result<Trajectory> {
    if budget == 0 {
        return Err(Error::Config("budget must be at least 1".into()));
    }
    if step == 0 {
        return Err(Error::Config("hill_climb step must be at least 1".into()));
    }
    let space = objective.space();
    let widths = space.bins();
    let mut traj = Trajectory::new(task_id);
    let mut current: Vec<usize> = widths.iter().map(|&b| rng.random_range(0..b)).collect();
    let mut best = observe(objective, &mut traj, space.config_from_bins(&current)?, rng)?;
    for _ in 1..budget {
        let p = rng.random_range(0..widths.len());
        let mut cand = current.clone();
        cand[p] = if rng.random::<bool>() {
            (cand[p] + step).min(widths[p] - 1)
        } else {
            cand[p].saturating_sub(step)
        };
        let r = observe(objective, &mut traj, space.config_from_bins(&cand)?, rng)?;
        if r > best {
            best = r;
            current = cand;
        }
    }
    Ok(traj)
}

/// The optimizer with the churn penalty removed.
pub fn run_ablation_no_pcr(
    task: TaskDescriptor,
    objective: &Objective,
    transformer: TransformerConfig,
    codec: CodecConfig,
    mut config: GrpoConfig,
    seed: u64,
) -> Result<RunOutput> {
    config.pcr_weight = 0.0;
    Engine::new(task, objective, transformer, codec, config, seed)?.run()
}

/// The policy samples and conditions on its growing trajectory, but its
/// parameters are never updated.
pub fn run_ablation_no_grpo(
    task: TaskDescriptor,
    objective: &Objective,
    transformer: TransformerConfig,
    codec: CodecConfig,
    config: GrpoConfig,
    seed: u64,
) -> Result<RunOutput> {
    Engine::new(task, objective, transformer, codec, config, seed)?.frozen().run()
}

/// Outcome of one (method, task, seed) run.
#[derive(Debug, Clone)]
pub struct MethodRun {
    pub method: MethodId,
    pub trajectory: Trajectory,
    pub diagnostics: Vec<UpdateRecord>,
    /// Network, initial and final parameters for policy methods.
    pub policy: Option<(PolicyNet, PolicyParams, PolicyParams)>,
}

impl MethodRun {
    pub fn evaluations(&self) -> usize {
        self.trajectory.len()
    }
}

/// Runs `spec` with streams derived from `seed`, the task id and the method
/// family. The three policy variants share their streams.
pub fn run_method(
    spec: MethodSpec,
    objective: &Objective,
    task: &TaskDescriptor,
    transformer: TransformerConfig,
    codec: CodecConfig,
    grpo: &GrpoConfig,
    seed: u64,
) -> Result<MethodRun> {
    let policy_run = |out: RunOutput| MethodRun {
        method: spec.id,
        trajectory: out.trajectory,
        diagnostics: out.diagnostics,
        policy: Some((out.net, out.initial, out.params)),
    };
    let plain = |trajectory: Trajectory| MethodRun {
        method: spec.id,
        trajectory,
        diagnostics: Vec::new(),
        policy: None,
    };
    let budget = task.budget;
    let mut cfg = grpo.clone();
    cfg.total_budget = budget;
    Ok(match spec.id {
        MethodId::Grpoformer => policy_run(Engine::new(task.clone(), objective, transformer, codec, cfg, seed)?.run()?),
        MethodId::GrpoformerNoPcr => policy_run(run_ablation_no_pcr(task.clone(), objective, transformer, codec, cfg, seed)?),
        MethodId::GrpoformerNoGrpo => policy_run(run_ablation_no_grpo(task.clone(), objective, transformer, codec, cfg, seed)?),
        MethodId::RandomSearch => {
            let mut r = rng::stream(seed, &[&task.task_id, "random_search"]);
            plain(run_random_search(objective, &task.task_id, budget, &mut r)?)
        }
        MethodId::HillClimb => {
            let mut r = rng::stream(seed, &[&task.task_id, "hill_climb"]);
            plain(run_hill_climb(objective, &task.task_id, budget, spec.step, &mut r)?)
        }
    })
}
