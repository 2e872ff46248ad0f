//! Evaluated trials and the append-only optimization history.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{Configuration, SearchSpace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub config: Configuration,
    /// Observed evaluation result; higher is better.
    pub reward: f64,
    pub trial_index: usize,
}

/// The ordered history `{(h_1, r_1), ..., (h_t, r_t)}` for one task.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    task_id: String,
    records: Vec<TrialRecord>,
}

impl Trajectory {
    pub fn new(task_id: impl Into<String>) -> Self {
        Trajectory {
            task_id: task_id.into(),
            records: Vec::new(),
        }
    }

    pub fn task_id(&self) -> &str {
        &self.task_id
    }

    pub fn records(&self) -> &[TrialRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Returns a new trajectory with `new` appended in order. The receiver is
    /// left untouched.
    pub fn append_trials(&self, new: &[(Configuration, f64)]) -> Result<Trajectory> {
        let mut next = self.clone();
        next.push_all(new.iter().cloned())?;
        Ok(next)
    }

    /// In-place form of [`Trajectory::append_trials`]; existing records are
    /// never touched. Nothing is appended if any reward is non-finite.
    pub fn push_all(&mut self, new: impl IntoIterator<Item = (Configuration, f64)>) -> Result<()> {
        let new: Vec<_> = new.into_iter().collect();
        if let Some((_, r)) = new.iter().find(|(_, r)| !r.is_finite()) {
            return Err(Error::NonFiniteReward(*r));
        }
        let start = self.records.len();
        self.records
            .extend(new.into_iter().enumerate().map(|(i, (config, reward))| TrialRecord {
                config,
                reward,
                trial_index: start + i,
            }));
        Ok(())
    }

    /// The first `n` records as a trajectory of their own.
    pub fn prefix(&self, n: usize) -> Trajectory {
        Trajectory {
            task_id: self.task_id.clone(),
            records: self.records[..n.min(self.records.len())].to_vec(),
        }
    }

    /// Highest-reward record; the earliest wins ties.
    pub fn best(&self) -> Option<&TrialRecord> {
        self.records
            .iter()
            .fold(None, |best: Option<&TrialRecord>, r| match best {
                Some(b) if b.reward >= r.reward => Some(b),
                _ => Some(r),
            })
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.reward).collect()
    }

    /// CSV rendering: `trial,<param names...>,reward`.
    pub fn to_csv(&self, space: &SearchSpace) -> String {
        let mut out = String::from("trial");
        for p in space.params() {
            out.push(',');
            out.push_str(p.name());
        }
        out.push_str(",reward\n");
        for r in &self.records {
            out.push_str(&r.trial_index.to_string());
            for v in &r.config.values {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push(',');
            out.push_str(&r.reward.to_string());
            out.push('\n');
        }
        out
    }
}

/// Task context the policy is conditioned on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskDescriptor {
    pub task_id: String,
    pub objective_name: String,
    /// Total trial count.
    pub budget: usize,
    /// Task-context prefix tokens, each below the codec's task token count.
    pub description_tokens: Vec<u32>,
}

impl TaskDescriptor {
    pub fn new(task_id: impl Into<String>, objective_name: impl Into<String>, budget: usize) -> Result<Self> {
        if budget == 0 {
            return Err(Error::Config("budget must be at least 1".into()));
        }
        Ok(TaskDescriptor {
            task_id: task_id.into(),
            objective_name: objective_name.into(),
            budget,
            description_tokens: Vec::new(),
        })
    }

    pub fn with_tokens(mut self, tokens: Vec<u32>) -> Self {
        self.description_tokens = tokens;
        self
    }
}
