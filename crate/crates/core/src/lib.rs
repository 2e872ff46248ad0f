//! Hyperparameter optimization with a transformer policy trained online by
//! group-relative policy optimization, regularized against policy churn.

pub mod autodiff;
pub mod baselines;
pub mod codec;
pub mod error;
pub mod experiment;
pub mod gradcheck;
pub mod grpo;
pub mod metrics;
pub mod objectives;
pub mod policy;
pub mod rng;
pub mod space;
pub mod trajectory;

pub use baselines::{MethodId, MethodSpec};
pub use codec::{CodecConfig, EncodedState, TokenSequence, Vocabulary};
pub use error::{Error, Result};
pub use experiment::ExperimentConfig;
pub use grpo::{optimize, AdvantageScope, Engine, GrpoConfig, RunOutput, UpdateRecord};
pub use metrics::{SuiteSummary, TaskResult};
pub use objectives::{builtin_suite, Objective, Statistic, TabularObjective};
pub use policy::{ActionLogProb, PolicyNet, PolicyParams, PolicySnapshot, TransformerConfig};
pub use space::{Configuration, Domain, ParamKind, ParamSpec, ParamValue, SearchSpace};
pub use trajectory::{TaskDescriptor, TrialRecord, Trajectory};
