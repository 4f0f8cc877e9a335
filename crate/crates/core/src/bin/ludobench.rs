//! Command-line entry point.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use ludobench::agents::ToyPolicy;
use ludobench::harness::compare::{comparison_csv, comparison_markdown};
use ludobench::harness::report::summary_markdown;
use ludobench::harness::suite::resolve_out_dir;
use ludobench::harness::{compare_runs, emit_report, load_report, run_suite, RunConfig};
use ludobench::tasks::bank::Bank;
use ludobench::training::objective::choice_accuracy;
use ludobench::training::{finite_diff_check, train_toy_policy, AblationFlags, TrainingConfig};
use ludobench::{Error, Result};

const GRADCHECK_LIMIT: f64 = 1e-4;

#[derive(Debug, Parser)]
#[command(name = "ludobench", version, about = "Measure gambling-like risk behaviour in decision-making agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every configured task and write events, report and summaries.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replace the configured seed list with this single seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// Verify a run's event log, recompute its metrics and rewrite the summaries.
    Report {
        /// Run directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-metric deltas between a baseline run and a treatment run.
    Compare {
        baseline: PathBuf,
        treatment: PathBuf,
        /// Directory for comparison.csv and comparison.md.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a toy policy and save it as JSON.
    TrainToy {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare analytic and finite-difference gradients over random initialisations.
    Gradcheck {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 20)]
        inits: u64,
        #[arg(long, default_value_t = 1e-5)]
        epsilon: f64,
    },
    /// Validate a scenario bank file.
    ValidateBank {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Settings for `train-toy` and `gradcheck`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct TrainToyConfig {
    bank: Option<PathBuf>,
    training: TrainingConfig,
    ablation: AblationFlags,
}

fn load_train_config(path: Option<&Path>) -> Result<(TrainToyConfig, Bank)> {
    let config = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?;
            let de = &mut serde_json::Deserializer::from_str(&text);
            let mut c: TrainToyConfig = serde_path_to_error::deserialize(de)
                .map_err(|e| {
                    let path = e.path().to_string();
                    Error::Config(format!("at `{path}`: {}", e.into_inner()))
                })?;
            if let Some(b) = &mut c.bank {
                if b.is_relative() {
                    *b = p.parent().unwrap_or(Path::new(".")).join(&*b);
                }
            }
            c
        }
        None => TrainToyConfig::default(),
    };
    let bank = match &config.bank {
        Some(b) if !b.is_file() => return Err(Error::Config(format!("bank file {} does not exist", b.display()))),
        Some(b) => Bank::load(b)?,
        None => Bank::default_bank(),
    };
    config.training.validate().map_err(|e| Error::Config(e.to_string()))?;
    Ok((config, bank))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run {
            config,
            out,
            seed,
            parallel,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seeds = vec![s];
            }
            if let Some(p) = parallel {
                cfg.parallelism = p;
            }
            cfg.validate()?;
            let dir = resolve_out_dir(&cfg, out.as_deref())?;
            let report = run_suite(&cfg, &dir)?;
            print!("{}", summary_markdown(&report));
            println!("\nwrote {}", dir.display());
        }
        Command::Report { out } => {
            let report = emit_report(&out)?;
            print!("{}", summary_markdown(&report));
        }
        Command::Compare {
            baseline,
            treatment,
            out,
        } => {
            let c = compare_runs(&load_report(&baseline)?, &load_report(&treatment)?)?;
            let md = comparison_markdown(&c);
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                write_file(&dir.join("comparison.csv"), &comparison_csv(&c))?;
                write_file(&dir.join("comparison.md"), &md)?;
            }
            print!("{md}");
        }
        Command::TrainToy { config, out, seed } => {
            let (mut cfg, bank) = load_train_config(config.as_deref())?;
            if let Some(s) = seed {
                cfg.training.seed = s;
            }
            let outcome = train_toy_policy(&bank, &cfg.training, &cfg.ablation)?;
            outcome.policy.save(&out)?;
            let losses = outcome.losses();
            let history = out.with_extension("loss.csv");
            let mut csv = String::from("epoch,total\n");
            for (i, l) in losses.iter().enumerate() {
                csv.push_str(&format!("{i},{l}\n"));
            }
            write_file(&history, &csv)?;
            println!(
                "trained {} epochs; final loss {}; choice accuracy {:.3}; wrote {}",
                losses.len(),
                losses.last().map_or("n/a".into(), |l| format!("{l:.6}")),
                choice_accuracy(&outcome.policy, &bank.scenarios, &cfg.training.risk_weights),
                out.display()
            );
        }
        Command::Gradcheck {
            config,
            seed,
            inits,
            epsilon,
        } => {
            let (cfg, bank) = load_train_config(config.as_deref())?;
            let start = seed.unwrap_or(cfg.training.seed);
            let mut worst = 0.0f64;
            for s in start..start + inits {
                let err = finite_diff_check(&ToyPolicy::pretrained(s), &bank, &cfg.training, epsilon)?;
                println!("seed {s}: max relative error {err:.3e}");
                worst = worst.max(err);
            }
            println!("worst {worst:.3e} (limit {GRADCHECK_LIMIT:e})");
            if worst >= GRADCHECK_LIMIT {
                return Err(Error::Estimation(format!("gradient check failed: {worst:.3e}")));
            }
        }
        Command::ValidateBank { config } => {
            if !config.is_file() {
                return Err(Error::Config(format!("bank file {} does not exist", config.display())));
            }
            let bank = Bank::load(&config)?;
            println!(
                "ok: {} scenarios, {} probability items, {} interval items, {} gamble pairs; digest {}",
                bank.scenarios.len(),
                bank.probability_items.len(),
                bank.interval_items.len(),
                bank.gamble_pairs.len(),
                bank.digest()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
