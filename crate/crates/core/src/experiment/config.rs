use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{MethodId, MethodSpec};
use crate::codec::CodecConfig;
use crate::error::{Error, Result};
use crate::grpo::GrpoConfig;
use crate::objectives::{builtin, builtin_names, builtin_suite, load_tabular, Objective, Statistic};
use crate::policy::{PolicyNet, TransformerConfig};

/// Task entry expanding to every objective of the builtin suite.
pub const BUILTIN_SUITE: &str = "builtin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Builtin objective names, tabular file paths, or `"builtin"`.
    pub tasks: Vec<String>,
    pub methods: Vec<MethodSpec>,
    pub seeds: Vec<u64>,
    pub budget: usize,
    #[serde(default)]
    pub grpo: GrpoConfig,
    #[serde(default)]
    pub transformer: TransformerConfig,
    #[serde(default)]
    pub reference_statistic: Statistic,
    /// Random configurations behind each y_rand; defaults to the budget.
    #[serde(default)]
    pub reference_samples: Option<usize>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            tasks: vec![BUILTIN_SUITE.to_string()],
            methods: MethodId::ALL.into_iter().map(MethodSpec::new).collect(),
            seeds: vec![0, 1, 2, 3, 4],
            budget: 120,
            grpo: GrpoConfig::default(),
            transformer: TransformerConfig::default(),
            reference_statistic: Statistic::Best,
            reference_samples: None,
            output_dir: default_output_dir(),
        }
    }
}

/// A task ready to run.
#[derive(Debug, Clone)]
pub struct ResolvedTask {
    pub id: String,
    pub objective: Objective,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::FileNotFound(path.to_path_buf()));
        }
        Self::from_toml_str(&std::fs::read_to_string(path)?, &path.display().to_string())
    }

    pub fn reference_samples(&self) -> usize {
        self.reference_samples.unwrap_or(self.budget)
    }

    /// Engine settings with the experiment budget applied.
    pub fn grpo_config(&self) -> GrpoConfig {
        GrpoConfig {
            total_budget: self.budget,
            ..self.grpo.clone()
        }
    }

    pub fn method_names(&self) -> Vec<String> {
        self.methods.iter().map(|m| m.id.to_string()).collect()
    }

    /// Validates every field and resolves the task list. Reads tabular files
    /// but writes nothing.
    pub fn resolve(&self) -> Result<Vec<ResolvedTask>> {
        let bad = |m: String| Err(Error::Config(m));
        if self.tasks.is_empty() {
            return bad("tasks: at least one task is required".into());
        }
        if self.methods.is_empty() {
            return bad("methods: at least one method is required".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds: at least one seed is required".into());
        }
        if self.budget == 0 {
            return bad("budget: must be at least 1".into());
        }
        if self.reference_samples == Some(0) {
            return bad("reference_samples: must be at least 1".into());
        }
        if let Some(d) = first_duplicate(self.methods.iter().map(|m| m.id.to_string())) {
            return bad(format!("methods: `{d}` listed twice"));
        }
        if let Some(d) = first_duplicate(self.seeds.iter().map(|s| s.to_string())) {
            return bad(format!("seeds: {d} listed twice"));
        }
        self.grpo_config()
            .validate()
            .map_err(|e| Error::Config(format!("grpo: {}", strip(&e))))?;
        self.transformer.validate()?;

        let mut tasks = Vec::new();
        for entry in &self.tasks {
            if entry == BUILTIN_SUITE {
                tasks.extend(builtin_suite().into_iter().map(|o| ResolvedTask {
                    id: o.name().to_string(),
                    objective: o,
                }));
            } else if let Some(o) = builtin(entry) {
                tasks.push(ResolvedTask { id: entry.clone(), objective: o });
            } else if looks_like_path(entry) {
                let path = Path::new(entry);
                let table = load_tabular(path)?;
                let id = path
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .filter(|s| !s.is_empty())
                    .ok_or_else(|| Error::Config(format!("tasks: cannot derive a task id from `{entry}`")))?
                    .to_string();
                tasks.push(ResolvedTask {
                    objective: Objective::tabular(id.clone(), table),
                    id,
                });
            } else {
                return bad(format!(
                    "tasks: unknown objective `{entry}` (builtins: {}, {BUILTIN_SUITE}; or a tabular file path)",
                    builtin_names().join(", ")
                ));
            }
        }
        if let Some(d) = first_duplicate(tasks.iter().map(|t| t.id.clone())) {
            return bad(format!("tasks: task id `{d}` appears twice"));
        }
        if self.methods.iter().any(|m| m.id.uses_policy()) {
            for t in &tasks {
                let net = PolicyNet::new(self.transformer, CodecConfig::default(), t.objective.space())
                    .map_err(|e| Error::Config(format!("transformer: task `{}`: {}", t.id, strip(&e))))?;
                if net.state_context_length() < 2 {
                    return bad(format!("transformer.context_length too short for task `{}`", t.id));
                }
            }
        }
        Ok(tasks)
    }
}

fn strip(e: &Error) -> String {
    match e {
        Error::Config(m) => m.clone(),
        other => other.to_string(),
    }
}

fn looks_like_path(entry: &str) -> bool {
    entry.contains('/') || entry.contains('\\') || entry.contains('.')
}

fn first_duplicate(items: impl IntoIterator<Item = String>) -> Option<String> {
    let mut seen = BTreeSet::new();
    items.into_iter().find(|i| !seen.insert(i.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::from_toml_str(text, "test.toml")
    }

    const MINIMAL: &str = "tasks = [\"sphere6d\"]\nmethods = [\"grpoformer\", \"random_search\"]\nseeds = [0, 1]\nbudget = 16\n";

    #[test]
    fn minimal_config_resolves() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.output_dir, PathBuf::from("out"));
        assert_eq!(c.reference_samples(), 16);
        assert_eq!(c.grpo_config().total_budget, 16);
        let t = c.resolve().unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].id, "sphere6d");
    }

    #[test]
    fn builtin_entry_expands_to_the_suite() {
        let c = ExperimentConfig::default();
        assert_eq!(c.resolve().unwrap().len(), builtin_suite().len());
    }

    #[test]
    fn nested_sections_parse() {
        let c = parse(&format!(
            "{MINIMAL}reference_statistic = \"median\"\noutput_dir = \"x\"\n[grpo]\npcr_weight = 0.5\nadvantage_scope = \"update_batch\"\n[transformer]\nlayers = 1\nmodel_dim = 16\nheads = 2\nff_dim = 32\n"
        ))
        .unwrap();
        assert_eq!(c.reference_statistic, Statistic::Median);
        assert_eq!(c.grpo.pcr_weight, 0.5);
        assert_eq!(c.transformer.layers, 1);
        c.resolve().unwrap();
    }

    #[test]
    fn field_level_errors() {
        let err = |text: &str| match parse(text).and_then(|c| c.resolve().map(|_| ())) {
            Err(e) => e.to_string(),
            Ok(()) => panic!("accepted: {text}"),
        };
        assert!(err("tasks = []\nmethods = [\"grpoformer\"]\nseeds = [0]\nbudget = 4").contains("tasks"));
        assert!(err("tasks = [\"sphere6d\"]\nmethods = []\nseeds = [0]\nbudget = 4").contains("methods"));
        assert!(err("tasks = [\"sphere6d\"]\nmethods = [\"grpoformer\"]\nseeds = []\nbudget = 4").contains("seeds"));
        assert!(err("tasks = [\"sphere6d\"]\nmethods = [\"grpoformer\"]\nseeds = [0]\nbudget = 0").contains("budget"));
        assert!(err("tasks = [\"nope\"]\nmethods = [\"grpoformer\"]\nseeds = [0]\nbudget = 4").contains("unknown objective"));
        assert!(err("tasks = [\"sphere6d\"]\nmethods = [\"grpoformer\", \"grpoformer\"]\nseeds = [0]\nbudget = 4").contains("twice"));
        assert!(err(&format!("{MINIMAL}[grpo]\nclip_epsilon = -1.0\n")).contains("grpo"));
        assert!(err(&format!("{MINIMAL}[transformer]\nheads = 3\n")).contains("divisible"));
        assert!(err(&format!("{MINIMAL}colour = 1\n")).contains("unknown field"));
        assert_eq!(
            err("tasks = [\"missing/table.csv\"]\nmethods = [\"random_search\"]\nseeds = [0]\nbudget = 4"),
            "file not found: missing/table.csv"
        );
    }

    #[test]
    fn json_snapshot_roundtrips() {
        let mut c = ExperimentConfig::default();
        c.grpo.max_grad_norm = None;
        c.methods.push(MethodSpec { id: MethodId::HillClimb, step: 3 });
        c.methods.remove(4);
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
