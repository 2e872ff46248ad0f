use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::warn;

use grpoformer::experiment::{cmd_ablate, cmd_report, cmd_run, cmd_suite, ExperimentConfig, Report};
use grpoformer::gradcheck::{gradient_audit, GradcheckOptions, DEFAULT_TOLERANCE};
use grpoformer::{Error, MethodId, TransformerConfig};

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_ACCEPTANCE: u8 = 3;

#[derive(Parser)]
#[command(name = "grpoformer", version, about = "Hyperparameter search with a GRPO-trained transformer policy")]
struct Cli {
    /// Log verbosity (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML). Defaults to the builtin suite.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replaces the configured seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the evaluation budget.
    #[arg(long)]
    budget: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// One (task, method, seed) run.
    Run {
        #[command(flatten)]
        common: Common,
        /// Task id; defaults to the first configured task.
        #[arg(long)]
        task: Option<String>,
        /// Method; defaults to the first configured method.
        #[arg(long)]
        method: Option<String>,
        /// Use the one-layer width-16 network.
        #[arg(long)]
        tiny: bool,
    },
    /// Every configured (task, method, seed) plus the summary tables.
    Suite {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// The suite restricted to the full optimizer and its two ablations.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        workers: Option<usize>,
        /// Exit with status 3 when an ordering check fails.
        #[arg(long)]
        check: bool,
    },
    /// Finite-difference audit of the policy-loss gradient.
    Gradcheck {
        /// Takes the `[transformer]` section; defaults to the tiny network.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 256)]
        coordinates: usize,
        /// Negative control: corrupt one backward rule.
        #[arg(long, hide = true)]
        corrupt_backward: bool,
    },
    /// Recomputes the summary tables from an earlier suite's outputs.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
    Acceptance,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn load(common: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seeds = vec![s];
    }
    if let Some(o) = &common.out {
        cfg.output_dir = o.clone();
    }
    if let Some(b) = common.budget {
        cfg.budget = b;
    }
    cfg.resolve()?;
    Ok(cfg)
}

fn print_report(report: &Report) {
    print!("{}", report.pooled.to_csv());
    if !report.pooled.degenerate.is_empty() {
        println!("degenerate (excluded): {}", report.pooled.degenerate.join(", "));
    }
    if !report.missing.is_empty() {
        println!("missing runs: {}", report.missing.join(", "));
    }
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run {
            common,
            task,
            method,
            tiny,
        } => {
            let mut cfg = load(&common)?;
            if tiny {
                cfg.transformer = TransformerConfig::tiny();
            }
            let method = method.map(|m| m.parse::<MethodId>()).transpose()?;
            let dir = cmd_run(&cfg, task.as_deref(), method, common.seed)?;
            println!("{}", dir.display());
        }
        Command::Suite { common, workers } => {
            let cfg = load(&common)?;
            let outcome = cmd_suite(&cfg, workers)?;
            print_report(&outcome.report);
            let failed = outcome.failures();
            if !failed.is_empty() {
                for c in &failed {
                    warn!("{} / {} / seed {}: {}", c.task, c.method, c.seed, c.outcome.as_ref().unwrap_err());
                }
                return Err(Failure::Runtime(format!("{} run(s) failed", failed.len())));
            }
        }
        Command::Ablate { common, workers, check } => {
            let cfg = load(&common)?;
            let (outcome, verdict) = cmd_ablate(&cfg, workers)?;
            print_report(&outcome.report);
            for line in verdict.lines() {
                println!("{line}");
            }
            if !outcome.failures().is_empty() {
                return Err(Failure::Runtime(format!("{} run(s) failed", outcome.failures().len())));
            }
            if check && !verdict.passed() {
                return Err(Failure::Acceptance);
            }
        }
        Command::Gradcheck {
            config,
            seed,
            coordinates,
            corrupt_backward,
        } => {
            let transformer = match config {
                Some(p) => ExperimentConfig::load(&p)?.transformer,
                None => TransformerConfig::tiny(),
            };
            transformer.validate()?;
            let report = gradient_audit(&GradcheckOptions {
                transformer,
                seed,
                coordinates,
                corrupt_backward,
                ..GradcheckOptions::default()
            })?;
            let ok = report.passed(DEFAULT_TOLERANCE) && report.coordinates >= coordinates;
            println!(
                "{} coordinates {} of {} parameters, max relative error {:.3e} (tolerance {:.0e}), max absolute error {:.3e}, L_GRPO {:.6}, L_PC {:.6}",
                if ok { "PASS" } else { "FAIL" },
                report.coordinates,
                report.parameters,
                report.max_rel_error,
                DEFAULT_TOLERANCE,
                report.max_abs_error,
                report.loss_grpo,
                report.loss_pc
            );
            if !ok {
                return Err(Failure::Runtime("gradient check failed".into()));
            }
        }
        Command::Report { out } => print_report(&cmd_report(&out)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_RUNTIME)
        }
        Err(Failure::Acceptance) => {
            eprintln!("ablation check failed");
            ExitCode::from(EXIT_ACCEPTANCE)
        }
    }
}
