//! Token layout for (task, space, trajectory) and per-parameter emissions.
//!
//! A state is `[BOS, task tokens..., trial_1, ..., trial_k]` where each trial
//! serializes as `[bin token per parameter..., reward token, SEP]`. The next
//! emission after a state is always the first parameter token of a new
//! configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{Configuration, SearchSpace};
use crate::trajectory::{TaskDescriptor, Trajectory};

pub const BOS: u32 = 0;
pub const SEP: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CodecConfig {
    /// Width of the task-context token range.
    pub task_token_count: usize,
    pub reward_bins: usize,
    pub reward_lo: f64,
    pub reward_hi: f64,
}

impl Default for CodecConfig {
    fn default() -> Self {
        CodecConfig {
            task_token_count: 4,
            reward_bins: 16,
            reward_lo: 0.0,
            reward_hi: 1.0,
        }
    }
}

/// Contiguous id ranges: BOS, SEP, task tokens, one range per parameter,
/// then reward bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    config: CodecConfig,
    param_offsets: Vec<u32>,
    param_widths: Vec<usize>,
    reward_offset: u32,
    size: usize,
    space_fingerprint: String,
}

impl Vocabulary {
    pub fn new(space: &SearchSpace, config: CodecConfig) -> Result<Self> {
        if config.reward_bins == 0 {
            return Err(Error::Config("reward_bins must be positive".into()));
        }
        if !(config.reward_lo < config.reward_hi) {
            return Err(Error::Config("reward range must satisfy lo < hi".into()));
        }
        let mut next = 2 + config.task_token_count as u32;
        let mut param_offsets = Vec::with_capacity(space.len());
        let param_widths = space.bins();
        for &w in &param_widths {
            param_offsets.push(next);
            next += w as u32;
        }
        let reward_offset = next;
        let size = (reward_offset as usize) + config.reward_bins;
        Ok(Vocabulary {
            config,
            param_offsets,
            param_widths,
            reward_offset,
            size,
            space_fingerprint: space.fingerprint().to_string(),
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn config(&self) -> &CodecConfig {
        &self.config
    }

    pub fn num_params(&self) -> usize {
        self.param_widths.len()
    }

    pub fn param_width(&self, p: usize) -> usize {
        self.param_widths[p]
    }

    /// Tokens per serialized trial.
    pub fn trial_width(&self) -> usize {
        self.param_widths.len() + 2
    }

    pub fn task_token(&self, t: u32) -> Result<u32> {
        if (t as usize) < self.config.task_token_count {
            Ok(2 + t)
        } else {
            Err(Error::Encoding(format!(
                "task token {t} outside range 0..{}",
                self.config.task_token_count
            )))
        }
    }

    pub fn param_token(&self, p: usize, bin: usize) -> u32 {
        debug_assert!(bin < self.param_widths[p]);
        self.param_offsets[p] + bin as u32
    }

    /// Inverse of [`Vocabulary::param_token`] for parameter `p`.
    pub fn param_bin(&self, p: usize, token: u32) -> Option<usize> {
        let off = self.param_offsets[p];
        (token >= off && ((token - off) as usize) < self.param_widths[p]).then(|| (token - off) as usize)
    }

    pub fn reward_bin(&self, reward: f64) -> usize {
        let CodecConfig {
            reward_bins,
            reward_lo,
            reward_hi,
            ..
        } = self.config;
        let r = reward.clamp(reward_lo, reward_hi);
        let b = ((r - reward_lo) / (reward_hi - reward_lo) * reward_bins as f64).floor();
        (b.max(0.0) as usize).min(reward_bins - 1)
    }

    pub fn reward_token(&self, reward: f64) -> u32 {
        self.reward_offset + self.reward_bin(reward) as u32
    }

    fn check_space(&self, space: &SearchSpace) -> Result<()> {
        if space.fingerprint() != self.space_fingerprint {
            return Err(Error::Encoding("search space does not match vocabulary".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Encoded context ending at a configuration boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedState {
    pub tokens: TokenSequence,
    /// Trajectory length the state was encoded from.
    pub trajectory_len_at_encoding: usize,
    /// Number of (most recent) trials that survived truncation.
    pub trials_encoded: usize,
}

/// Encodes the task prefix and as many of the most recent whole trials as fit
/// into `context_length` tokens.
pub fn encode_context(
    vocab: &Vocabulary,
    task: &TaskDescriptor,
    space: &SearchSpace,
    trajectory: &Trajectory,
    context_length: usize,
) -> Result<EncodedState> {
    vocab.check_space(space)?;
    let prefix_len = 1 + task.description_tokens.len();
    let width = vocab.trial_width();
    if context_length < prefix_len + width {
        return Err(Error::Encoding(format!(
            "context length {context_length} cannot hold the task prefix ({prefix_len}) and one trial ({width})"
        )));
    }
    let fit = (context_length - prefix_len) / width;
    let k = fit.min(trajectory.len());
    let mut ids = Vec::with_capacity(prefix_len + k * width);
    ids.push(BOS);
    for &t in &task.description_tokens {
        ids.push(vocab.task_token(t)?);
    }
    for rec in &trajectory.records()[trajectory.len() - k..] {
        ids.extend(encode_config(vocab, space, &rec.config)?);
        ids.push(vocab.reward_token(rec.reward));
        ids.push(SEP);
    }
    Ok(EncodedState {
        tokens: TokenSequence { ids },
        trajectory_len_at_encoding: trajectory.len(),
        trials_encoded: k,
    })
}

/// One bin token per parameter, in parameter order.
pub fn encode_config(vocab: &Vocabulary, space: &SearchSpace, config: &Configuration) -> Result<Vec<u32>> {
    vocab.check_space(space)?;
    let bins = space.bin_indices(config)?;
    Ok(bins
        .iter()
        .enumerate()
        .map(|(p, &b)| vocab.param_token(p, b))
        .collect())
}

/// Decodes parameter tokens into the configuration of bin representatives.
pub fn decode_config(vocab: &Vocabulary, space: &SearchSpace, ids: &[u32]) -> Result<Configuration> {
    vocab.check_space(space)?;
    if ids.len() != space.len() {
        return Err(Error::Arity {
            expected: space.len(),
            got: ids.len(),
        });
    }
    let bins = ids
        .iter()
        .enumerate()
        .map(|(p, &id)| {
            vocab.param_bin(p, id).ok_or_else(|| {
                Error::Encoding(format!(
                    "token {id} is not a bin token of parameter `{}`",
                    space.params()[p].name()
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    space.config_from_bins(&bins)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{ParamSpec, ParamValue};

    fn space2(b: usize) -> SearchSpace {
        SearchSpace::new(vec![
            ParamSpec::continuous("x", 0.0, 1.0, b).unwrap(),
            ParamSpec::continuous("y", -1.0, 1.0, b).unwrap(),
        ])
        .unwrap()
    }

    fn task() -> TaskDescriptor {
        TaskDescriptor::new("t", "o", 10).unwrap().with_tokens(vec![0, 1, 2, 3])
    }

    fn cfg(x: f64, y: f64) -> Configuration {
        Configuration::new(vec![ParamValue::Real(x), ParamValue::Real(y)])
    }

    #[test]
    fn vocabulary_layout() {
        let space = space2(4);
        let v = Vocabulary::new(&space, CodecConfig::default()).unwrap();
        assert_eq!(v.size(), 2 + 4 + 8 + 16);
        assert_eq!(v.param_token(0, 0), 6);
        assert_eq!(v.param_token(1, 0), 10);
        assert_eq!(v.reward_token(0.0), 14);
        assert_eq!(v.reward_token(1.0), 29);
        assert_eq!(v.reward_token(7.0), 29);
        assert_eq!(v.reward_token(-3.0), 14);
    }

    #[test]
    fn empty_trajectory_is_prefix_only() {
        let space = space2(4);
        let v = Vocabulary::new(&space, CodecConfig::default()).unwrap();
        let s = encode_context(&v, &task(), &space, &Trajectory::new("t"), 64).unwrap();
        assert_eq!(s.tokens.ids, vec![BOS, 2, 3, 4, 5]);
        assert_eq!(s.tokens.len(), 1 + 4);
    }

    #[test]
    fn single_trial_layout() {
        let space = space2(4);
        let v = Vocabulary::new(&space, CodecConfig::default()).unwrap();
        let traj = Trajectory::new("t").append_trials(&[(cfg(0.3, 0.9), 0.55)]).unwrap();
        let s = encode_context(&v, &task(), &space, &traj, 64).unwrap();
        let p0 = v.param_token(0, 1);
        let p1 = v.param_token(1, 3);
        let r = v.reward_token(0.55);
        assert_eq!(s.tokens.ids, vec![BOS, 2, 3, 4, 5, p0, p1, r, SEP]);
    }

    #[test]
    fn truncation_keeps_most_recent_whole_trials() {
        let space = space2(4);
        let v = Vocabulary::new(&space, CodecConfig::default()).unwrap();
        let trials: Vec<_> = (0..100).map(|i| (cfg((i % 10) as f64 / 10.0, 0.0), i as f64 / 100.0)).collect();
        let traj = Trajectory::new("t").append_trials(&trials).unwrap();
        let ctx = 103;
        // prefix 5 tokens, 4 tokens per trial: k = floor((103 - 5) / 4) = 24.
        let k = (ctx - 5) / 4;
        let s = encode_context(&v, &task(), &space, &traj, ctx).unwrap();
        assert_eq!(s.trials_encoded, k);
        assert_eq!(s.tokens.len(), 5 + 4 * k);
        let tail = traj.prefix(100);
        let expected = encode_context(
            &v,
            &task(),
            &space,
            &Trajectory::new("t")
                .append_trials(
                    &tail.records()[100 - k..]
                        .iter()
                        .map(|r| (r.config.clone(), r.reward))
                        .collect::<Vec<_>>(),
                )
                .unwrap(),
            ctx,
        )
        .unwrap();
        assert_eq!(s.tokens, expected.tokens);
        assert!(encode_context(&v, &task(), &space, &traj, 8).is_err());
    }

    #[test]
    fn config_roundtrip_exhaustive() {
        let space = space2(4);
        let v = Vocabulary::new(&space, CodecConfig::default()).unwrap();
        let mut seen = std::collections::HashSet::new();
        for a in 0..4 {
            for b in 0..4 {
                let c = space.config_from_bins(&[a, b]).unwrap();
                let ids = encode_config(&v, &space, &c).unwrap();
                assert_eq!(ids.len(), 2);
                assert!(seen.insert(ids.clone()));
                assert_eq!(decode_config(&v, &space, &ids).unwrap(), c);
            }
        }
    }

    #[test]
    fn decode_errors() {
        let space = space2(4);
        let v = Vocabulary::new(&space, CodecConfig::default()).unwrap();
        let ids = encode_config(&v, &space, &cfg(0.1, 0.1)).unwrap();
        assert!(decode_config(&v, &space, &[ids[1], ids[0]]).is_err());
        assert!(decode_config(&v, &space, &[]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn decode_encode_snaps(x in 0.0f64..=1.0, y in -1.0f64..=1.0, b in 2usize..20) {
                let space = space2(b);
                let v = Vocabulary::new(&space, CodecConfig::default()).unwrap();
                let c = cfg(x, y);
                let ids = encode_config(&v, &space, &c).unwrap();
                prop_assert_eq!(decode_config(&v, &space, &ids).unwrap(), space.snap(&c).unwrap());
            }
        }
    }
}
