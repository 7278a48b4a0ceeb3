use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tensor_bandit_harness::config::{load, load_experiment, load_lasso};
use tensor_bandit_harness::{compare_lasso, plan_setting, run_experiment, selftest, HarnessError};

/// Explore-then-commit tensor bandit experiments.
#[derive(Parser)]
#[command(name = "tbandit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every setting of an experiment config.
    Run {
        config: PathBuf,
        /// Only run this variant.
        #[arg(long)]
        variant: Option<String>,
        /// Directory that a relative `output_dir` resolves against.
        #[arg(long, default_value = ".")]
        root: PathBuf,
    },
    /// Parse a config and print the derived exploration length, λ and width.
    Validate { config: PathBuf },
    /// Sparse linear head-to-head against the doubly-robust Lasso bandit.
    CompareLasso {
        config: PathBuf,
        #[arg(long, default_value = ".")]
        root: PathBuf,
    },
    /// Fast invariant suite.
    Selftest,
}

fn run(config: &Path, variant: Option<&str>, root: &Path) -> Result<(), HarnessError> {
    let mut cfg = load_experiment(config)?;
    if let Some(v) = variant {
        cfg.select_variant(v)?;
    }
    println!("{:<24} {:>6} {:>10} {:>14} {:>12} {:>12}", "setting", "T1", "lambda", "final regret", "std", "R_T/B_T");
    for s in run_experiment(&cfg, root)? {
        println!(
            "{:<24} {:>6} {:>10.4} {:>14.3} {:>12.3} {:>12.4}",
            s.id, s.t1, s.lambda, s.mean_final_regret, s.std_final_regret, s.mean_final_ratio
        );
        let unconverged = s.replications.iter().filter(|r| !r.fit_converged).count();
        if unconverged > 0 {
            println!("  {unconverged} replication fit(s) hit the iteration limit");
        }
        println!("  wrote {}", s.summary_csv.display());
    }
    Ok(())
}

fn validate(config: &Path) -> Result<(), HarnessError> {
    // Comparison configs are recognized by their `dim` key.
    let raw: serde_json::Value = load(config)?;
    if raw.get("dim").is_some() {
        let cfg = load_lasso(config)?;
        println!(
            "{}: comparison config ok ({} arms, dim {}, {} rounds, {} replications)",
            cfg.id, cfg.arms, cfg.dim, cfg.horizon, cfg.replications
        );
        return Ok(());
    }
    let cfg = load_experiment(config)?;
    for setting in cfg.settings() {
        let plan = plan_setting(&cfg, &setting)?;
        println!(
            "{}: T1={} lambda={} width={} (se {}, {} samples) phi={}",
            setting.id, plan.t1, plan.lambda, plan.width.mean, plan.width.std_error, plan.width.samples, plan.phi
        );
    }
    Ok(())
}

fn compare(config: &Path, root: &Path) -> Result<(), HarnessError> {
    let cfg = load_lasso(config)?;
    let s = compare_lasso(&cfg, root)?;
    println!("{:<10} {:>14} {:>12}", "algorithm", "final regret", "std");
    for a in [&s.geltc, &s.drlasso] {
        println!("{:<10} {:>14.3} {:>12.3}", a.algorithm, a.mean_final_regret, a.std_final_regret);
    }
    println!("T1={} lambda={} pooled std={:.3}", s.t1, s.lambda, s.pooled_std);
    println!("wrote {}", s.summary_csv.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, variant, root } => run(config, variant.as_deref(), root),
        Command::Validate { config } => validate(config),
        Command::CompareLasso { config, root } => compare(config, root),
        Command::Selftest => {
            let checks = selftest::run_selftest();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            return if checks.iter().all(|c| c.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            };
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
