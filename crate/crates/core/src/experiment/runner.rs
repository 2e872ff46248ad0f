use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::{error, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ResolvedTask};
use crate::baselines::{run_method, MethodId, MethodRun, MethodSpec};
use crate::codec::CodecConfig;
use crate::error::{Error, Result};
use crate::metrics::{curve_csv, SuiteSummary, TaskResult};
use crate::objectives::random_search_reference;
use crate::policy::{save_checkpoint, Checkpoint};
use crate::rng;
use crate::trajectory::TaskDescriptor;

pub const SNAPSHOT_FILE: &str = "experiment.json";
pub const REFERENCES_FILE: &str = "references.csv";

pub fn run_dir(out: &Path, task: &str, method: MethodId, seed: u64) -> PathBuf {
    out.join(task).join(method.as_str()).join(seed.to_string())
}

fn task_descriptor(task: &ResolvedTask, budget: usize) -> Result<TaskDescriptor> {
    TaskDescriptor::new(task.id.clone(), task.objective.name(), budget)
}

fn execute(cfg: &ExperimentConfig, task: &ResolvedTask, spec: MethodSpec, seed: u64) -> Result<MethodRun> {
    let desc = task_descriptor(task, cfg.budget)?;
    run_method(spec, &task.objective, &desc, cfg.transformer, CodecConfig::default(), &cfg.grpo_config(), seed)
}

/// Writes `trajectory.csv`, `diagnostics.jsonl` and, for policy methods,
/// `checkpoint.bin` plus `checkpoint_initial.bin`.
fn write_run(dir: &Path, task: &ResolvedTask, run: &MethodRun) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("trajectory.csv"), run.trajectory.to_csv(task.objective.space()))?;
    let mut diag = String::new();
    for d in &run.diagnostics {
        diag.push_str(&serde_json::to_string(d).map_err(|e| Error::Config(e.to_string()))?);
        diag.push('\n');
    }
    fs::write(dir.join("diagnostics.jsonl"), diag)?;
    if let Some((net, initial, last)) = &run.policy {
        save_checkpoint(&dir.join("checkpoint.bin"), &Checkpoint::new(net, &last.weights))?;
        save_checkpoint(&dir.join("checkpoint_initial.bin"), &Checkpoint::new(net, &initial.weights))?;
    }
    Ok(())
}

/// One (task, method, seed) run of a suite.
#[derive(Debug, Clone)]
pub struct CellRun {
    pub task: String,
    pub method: MethodId,
    pub seed: u64,
    pub outcome: std::result::Result<usize, String>,
}

/// Executes a single run and writes its artifacts; returns the run directory.
pub fn cmd_run(cfg: &ExperimentConfig, task: Option<&str>, method: Option<MethodId>, seed: Option<u64>) -> Result<PathBuf> {
    let tasks = cfg.resolve()?;
    let task = match task {
        None => &tasks[0],
        Some(name) => tasks
            .iter()
            .find(|t| t.id == name)
            .ok_or_else(|| Error::Config(format!("task `{name}` is not in the configuration")))?,
    };
    let spec = match method {
        None => cfg.methods[0],
        Some(id) => cfg.methods.iter().copied().find(|m| m.id == id).unwrap_or(MethodSpec::new(id)),
    };
    let seed = seed.unwrap_or(cfg.seeds[0]);
    let run = execute(cfg, task, spec, seed)?;
    let dir = run_dir(&cfg.output_dir, &task.id, spec.id, seed);
    write_run(&dir, task, &run)?;
    info!(
        "{} / {} / seed {}: best reward {:.6} after {} evaluations",
        task.id,
        spec.id,
        seed,
        run.trajectory.best().map_or(f64::NAN, |b| b.reward),
        run.evaluations()
    );
    Ok(dir)
}

/// Per-(task, seed) reference y_rand values, keyed by task order then seed
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub task: String,
    pub seed: u64,
    pub statistic: String,
    pub samples: usize,
    pub y_rand: f64,
}

fn references(cfg: &ExperimentConfig, tasks: &[ResolvedTask]) -> Result<Vec<ReferenceRow>> {
    let mut rows = Vec::new();
    for t in tasks {
        for &seed in &cfg.seeds {
            let mut r = rng::stream(seed, &[&t.id, "reference"]);
            let y_rand = random_search_reference(&t.objective, cfg.reference_samples(), cfg.reference_statistic, &mut r)?;
            rows.push(ReferenceRow {
                task: t.id.clone(),
                seed,
                statistic: cfg.reference_statistic.as_str().to_string(),
                samples: cfg.reference_samples(),
                y_rand,
            });
        }
    }
    Ok(rows)
}

/// Aggregated metrics of a suite.
#[derive(Debug, Clone)]
pub struct Report {
    pub methods: Vec<String>,
    /// Every (task, seed) pair counts as one task instance.
    pub pooled: SuiteSummary,
    pub per_seed: Vec<(u64, SuiteSummary)>,
    /// Mean best-normalized curve per method over the complete,
    /// non-degenerate instances.
    pub curves: Vec<Vec<f64>>,
    pub missing: Vec<String>,
}

fn cell_id(task: &str, seed: u64) -> String {
    format!("{task}@{seed}")
}

/// `rewards[task][method][seed]`, `None` marking a failed or absent run.
pub fn aggregate(
    methods: &[String],
    task_ids: &[String],
    seeds: &[u64],
    refs: &[ReferenceRow],
    rewards: &[Vec<Vec<Option<Vec<f64>>>>],
) -> Result<Report> {
    let y_rand: BTreeMap<(&str, u64), f64> = refs.iter().map(|r| ((r.task.as_str(), r.seed), r.y_rand)).collect();
    // results[method][instance], instances ordered task-major.
    let mut results: Vec<Vec<Option<TaskResult>>> = vec![Vec::new(); methods.len()];
    let mut seed_of = Vec::new();
    let mut missing = Vec::new();
    for (t, task) in task_ids.iter().enumerate() {
        for (s, &seed) in seeds.iter().enumerate() {
            let id = cell_id(task, seed);
            let yr = *y_rand
                .get(&(task.as_str(), seed))
                .ok_or_else(|| Error::Metric(format!("no reference for {id}")))?;
            // The reference draws count among "all algorithms", which keeps
            // every normalized score at or below one.
            let y_max = rewards[t]
                .iter()
                .filter_map(|m| m[s].as_ref())
                .flat_map(|r| r.iter().copied())
                .reduce(f64::max)
                .map(|y| y.max(yr));
            for (m, name) in methods.iter().enumerate() {
                let cell = match (&rewards[t][m][s], y_max) {
                    (Some(r), Some(y_max)) => Some(TaskResult::new(id.clone(), name.clone(), r.clone(), yr, y_max)?),
                    _ => {
                        missing.push(format!("{task}/{name}/{seed}"));
                        None
                    }
                };
                results[m].push(cell);
            }
            seed_of.push(seed);
        }
    }
    let pooled = SuiteSummary::compute(methods, &results)?;
    let mut per_seed = Vec::new();
    for &seed in seeds {
        let subset: Vec<Vec<Option<TaskResult>>> = results
            .iter()
            .map(|col| col.iter().zip(&seed_of).filter(|(_, &s)| s == seed).map(|(c, _)| c.clone()).collect())
            .collect();
        per_seed.push((seed, SuiteSummary::compute(methods, &subset)?));
    }
    let complete: Vec<&str> = pooled.per_task.iter().map(|r| r.task_id.as_str()).collect();
    let mut curves = Vec::new();
    for col in &results {
        let chosen: Vec<Vec<f64>> = col
            .iter()
            .flatten()
            .filter(|c| complete.contains(&c.task_id.as_str()))
            .map(|c| c.curve())
            .collect::<Result<_>>()?;
        let len = chosen.iter().map(|c| c.len()).min().unwrap_or(0);
        curves.push(
            (0..len)
                .map(|i| chosen.iter().map(|c| c[i]).sum::<f64>() / chosen.len() as f64)
                .collect(),
        );
    }
    Ok(Report {
        methods: methods.to_vec(),
        pooled,
        per_seed,
        curves,
        missing,
    })
}

fn write_report(out: &Path, report: &Report) -> Result<()> {
    fs::write(out.join("summary.csv"), report.pooled.to_csv())?;
    let mut by_seed = String::from("seed,method,BtR,MP,MnP,MnR\n");
    for (seed, s) in &report.per_seed {
        for line in s.to_csv().lines().skip(1) {
            by_seed.push_str(&format!("{seed},{line}\n"));
        }
    }
    fs::write(out.join("summary_by_seed.csv"), by_seed)?;
    let mut per_task = String::from("instance,method,score,rank\n");
    for row in &report.pooled.per_task {
        for (m, name) in report.methods.iter().enumerate() {
            per_task.push_str(&format!("{},{},{:.9},{}\n", row.task_id, name, row.scores[m], row.ranks[m]));
        }
    }
    for d in &report.pooled.degenerate {
        per_task.push_str(&format!("{d},degenerate,,\n"));
    }
    for m in &report.missing {
        per_task.push_str(&format!("{m},missing,,\n"));
    }
    fs::write(out.join("per_task.csv"), per_task)?;
    let curves = out.join("curves");
    fs::create_dir_all(&curves)?;
    for (name, c) in report.methods.iter().zip(&report.curves) {
        fs::write(curves.join(format!("{name}.csv")), curve_csv(c))?;
    }
    Ok(())
}

fn write_references(out: &Path, refs: &[ReferenceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in refs {
        w.serialize(r).map_err(|e| Error::Config(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    fs::write(out.join(REFERENCES_FILE), bytes)?;
    Ok(())
}

/// Outcome of a suite: the aggregated report plus per-run bookkeeping.
#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub report: Report,
    pub references: Vec<ReferenceRow>,
    pub cells: Vec<CellRun>,
}

impl SuiteOutcome {
    pub fn failures(&self) -> Vec<&CellRun> {
        self.cells.iter().filter(|c| c.outcome.is_err()).collect()
    }
}

fn worker_pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    if workers == Some(0) {
        return Err(Error::Config("workers: must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("workers: {e}")))
}

/// Runs every (task, method, seed) of a validated configuration over
/// `tasks`, then writes per-run artifacts and the reports.
pub fn run_suite_on(cfg: &ExperimentConfig, tasks: &[ResolvedTask], workers: Option<usize>) -> Result<SuiteOutcome> {
    let pool = worker_pool(workers)?;
    let refs = references(cfg, tasks)?;
    let jobs: Vec<(usize, usize, usize)> = (0..tasks.len())
        .flat_map(|t| (0..cfg.methods.len()).flat_map(move |m| (0..cfg.seeds.len()).map(move |s| (t, m, s))))
        .collect();
    let runs: Vec<Result<MethodRun>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(t, m, s)| execute(cfg, &tasks[t], cfg.methods[m], cfg.seeds[s]))
            .collect()
    });

    let out = &cfg.output_dir;
    fs::create_dir_all(out)?;
    let snapshot = serde_json::to_string_pretty(cfg).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(out.join(SNAPSHOT_FILE), snapshot + "\n")?;
    write_references(out, &refs)?;

    let mut rewards = vec![vec![vec![None; cfg.seeds.len()]; cfg.methods.len()]; tasks.len()];
    let mut cells = Vec::new();
    for (&(t, m, s), run) in jobs.iter().zip(runs) {
        let (task, spec, seed) = (&tasks[t], cfg.methods[m], cfg.seeds[s]);
        let outcome = match run {
            Ok(run) => {
                write_run(&run_dir(out, &task.id, spec.id, seed), task, &run)?;
                rewards[t][m][s] = Some(run.trajectory.rewards());
                Ok(run.evaluations())
            }
            Err(e) => {
                error!("{} / {} / seed {seed} failed: {e}", task.id, spec.id);
                Err(e.to_string())
            }
        };
        cells.push(CellRun {
            task: task.id.clone(),
            method: spec.id,
            seed,
            outcome,
        });
    }
    let ids: Vec<String> = tasks.iter().map(|t| t.id.clone()).collect();
    let report = aggregate(&cfg.method_names(), &ids, &cfg.seeds, &refs, &rewards)?;
    write_report(out, &report)?;
    Ok(SuiteOutcome {
        report,
        references: refs,
        cells,
    })
}

pub fn cmd_suite(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<SuiteOutcome> {
    let tasks = cfg.resolve()?;
    run_suite_on(cfg, &tasks, workers)
}

pub const ABLATION_METHODS: [MethodId; 3] = [MethodId::Grpoformer, MethodId::GrpoformerNoPcr, MethodId::GrpoformerNoGrpo];

/// The configuration restricted to the full optimizer and its two ablations.
pub fn ablation_config(cfg: &ExperimentConfig) -> ExperimentConfig {
    ExperimentConfig {
        methods: ABLATION_METHODS.into_iter().map(MethodSpec::new).collect(),
        ..cfg.clone()
    }
}

pub fn cmd_ablate(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<(SuiteOutcome, AblationCheck)> {
    let cfg = ablation_config(cfg);
    let outcome = cmd_suite(&cfg, workers)?;
    let check = AblationCheck::from_report(&outcome.report)?;
    Ok((outcome, check))
}

/// MnP of the three variants on one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedMargin {
    pub seed: u64,
    pub full: f64,
    pub no_pcr: f64,
    pub no_grpo: f64,
}

/// Seed-majority ordering checks between the full optimizer and its
/// ablations, plus its beat-the-random rate.
#[derive(Debug, Clone)]
pub struct AblationCheck {
    pub seeds: Vec<SeedMargin>,
    /// Seeds needed for a majority: four fifths, rounded up.
    pub required: usize,
    pub full_beats_no_grpo: usize,
    pub no_pcr_ahead: usize,
    /// Pooled BtR of the full optimizer, in percent.
    pub btr: f64,
    pub btr_threshold: f64,
}

impl AblationCheck {
    pub fn from_report(report: &Report) -> Result<Self> {
        let find = |s: &SuiteSummary, id: MethodId| {
            s.method(id.as_str())
                .map(|m| m.mnp)
                .ok_or_else(|| Error::Metric(format!("method {id} missing from the report")))
        };
        let seeds = report
            .per_seed
            .iter()
            .map(|(seed, s)| {
                Ok(SeedMargin {
                    seed: *seed,
                    full: find(s, MethodId::Grpoformer)?,
                    no_pcr: find(s, MethodId::GrpoformerNoPcr)?,
                    no_grpo: find(s, MethodId::GrpoformerNoGrpo)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let required = (4 * seeds.len()).div_ceil(5);
        // NaN margins (no usable task on a seed) count against the full
        // optimizer.
        let full_beats_no_grpo = seeds.iter().filter(|m| m.full > m.no_grpo).count();
        let no_pcr_ahead = seeds.iter().filter(|m| !(m.full >= m.no_pcr)).count();
        let btr = report
            .pooled
            .method(MethodId::Grpoformer.as_str())
            .map(|m| m.btr)
            .ok_or_else(|| Error::Metric("grpoformer missing from the report".into()))?;
        Ok(AblationCheck {
            seeds,
            required,
            full_beats_no_grpo,
            no_pcr_ahead,
            btr,
            btr_threshold: 80.0,
        })
    }

    pub fn beats_no_grpo(&self) -> bool {
        self.full_beats_no_grpo >= self.required
    }

    pub fn not_behind_no_pcr(&self) -> bool {
        self.no_pcr_ahead < self.required
    }

    pub fn beats_random(&self) -> bool {
        self.btr >= self.btr_threshold
    }

    pub fn passed(&self) -> bool {
        self.beats_no_grpo() && self.not_behind_no_pcr() && self.beats_random()
    }

    pub fn lines(&self) -> Vec<String> {
        let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
        let mut out: Vec<String> = self
            .seeds
            .iter()
            .map(|m| {
                format!(
                    "seed {}: MnP full {:.4}  no_pcr {:.4} (margin {:+.4})  no_grpo {:.4} (margin {:+.4})",
                    m.seed,
                    m.full,
                    m.no_pcr,
                    m.full - m.no_pcr,
                    m.no_grpo,
                    m.full - m.no_grpo
                )
            })
            .collect();
        out.push(format!(
            "{} full > no_grpo on {}/{} seeds (need {})",
            verdict(self.beats_no_grpo()),
            self.full_beats_no_grpo,
            self.seeds.len(),
            self.required
        ));
        out.push(format!(
            "{} full < no_pcr on {}/{} seeds (fails at {})",
            verdict(self.not_behind_no_pcr()),
            self.no_pcr_ahead,
            self.seeds.len(),
            self.required
        ));
        out.push(format!("{} full BtR {:.2}% (need {:.0}%)", verdict(self.beats_random()), self.btr, self.btr_threshold));
        out
    }
}

fn read_rewards(path: &Path) -> Result<Vec<f64>> {
    let parse = |message: String| Error::Parse {
        path: path.display().to_string(),
        message,
    };
    let mut rd = csv::Reader::from_path(path).map_err(|e| parse(e.to_string()))?;
    let col = rd
        .headers()
        .map_err(|e| parse(e.to_string()))?
        .iter()
        .position(|h| h == "reward")
        .ok_or_else(|| parse("no `reward` column".into()))?;
    rd.records()
        .map(|rec| {
            let rec = rec.map_err(|e| parse(e.to_string()))?;
            rec[col].parse::<f64>().map_err(|e| parse(e.to_string()))
        })
        .collect()
}

/// Re-aggregates the artifacts of an earlier suite under `out`.
pub fn cmd_report(out: &Path) -> Result<Report> {
    let snapshot = out.join(SNAPSHOT_FILE);
    if !snapshot.is_file() {
        return Err(Error::FileNotFound(snapshot));
    }
    let text = fs::read_to_string(&snapshot)?;
    let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: snapshot.display().to_string(),
        message: e.to_string(),
    })?;
    let refs_path = out.join(REFERENCES_FILE);
    if !refs_path.is_file() {
        return Err(Error::FileNotFound(refs_path));
    }
    let refs: Vec<ReferenceRow> = csv::Reader::from_path(&refs_path)
        .and_then(|mut r| r.deserialize().collect())
        .map_err(|e| Error::Parse {
            path: refs_path.display().to_string(),
            message: e.to_string(),
        })?;
    let mut ids: Vec<String> = Vec::new();
    for r in &refs {
        if !ids.contains(&r.task) {
            ids.push(r.task.clone());
        }
    }
    let mut rewards = vec![vec![vec![None; cfg.seeds.len()]; cfg.methods.len()]; ids.len()];
    for (t, task) in ids.iter().enumerate() {
        for (m, spec) in cfg.methods.iter().enumerate() {
            for (s, &seed) in cfg.seeds.iter().enumerate() {
                let path = run_dir(out, task, spec.id, seed).join("trajectory.csv");
                if path.is_file() {
                    rewards[t][m][s] = Some(read_rewards(&path)?);
                }
            }
        }
    }
    let report = aggregate(&cfg.method_names(), &ids, &cfg.seeds, &refs, &rewards)?;
    write_report(out, &report)?;
    Ok(report)
}
