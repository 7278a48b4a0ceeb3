//! Head-to-head on a sparse linear bandit: the penalized explore-then-commit
//! agent with an entrywise L1 penalty against the doubly-robust Lasso bandit.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use tensor_bandit::bandit::{gen_lasso_comparison_env, run_drlasso, run_geltc, RunRecord};
use tensor_bandit::RegularizerSpec;

use crate::config::LassoComparisonConfig;
use crate::experiment::{bound_curve, build_pool, replication_seed, replication_seeds, SEED_DERIVATION};
use crate::output::{mean_std, summary_header, write_json, CsvSink, RoundStats};
use crate::HarnessError;

pub const GELTC: &str = "geltc";
pub const DRLASSO: &str = "drlasso";

#[derive(Debug, Clone, Serialize)]
pub struct AlgorithmSummary {
    pub algorithm: &'static str,
    pub final_regrets: Vec<f64>,
    pub mean_final_regret: f64,
    pub std_final_regret: f64,
    #[serde(skip)]
    pub curve: RoundStats,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonSummary {
    pub id: String,
    pub geltc: AlgorithmSummary,
    pub drlasso: AlgorithmSummary,
    /// `sqrt((s_a² + s_b²) / 2)` of the final regrets.
    pub pooled_std: f64,
    pub t1: usize,
    pub lambda: f64,
    pub summary_csv: PathBuf,
    pub reps_csv: PathBuf,
    pub manifest: PathBuf,
    pub wall_clock_secs: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a LassoComparisonConfig,
    seed_derivation: &'static str,
    summary: &'a ComparisonSummary,
}

fn summarize(algorithm: &'static str, runs: &[RunRecord], bounds: &[f64]) -> AlgorithmSummary {
    let curves: Vec<Vec<f64>> = runs.iter().map(RunRecord::cumulative).collect();
    let finals: Vec<f64> = runs.iter().map(RunRecord::final_regret).collect();
    let (mean, std) = mean_std(&finals);
    AlgorithmSummary {
        algorithm,
        final_regrets: finals,
        mean_final_regret: mean,
        std_final_regret: std,
        curve: RoundStats::from_curves(&curves, bounds),
    }
}

/// Both algorithms see the same environment and context stream in each
/// replication. Writes `<id>_summary.csv` (with an `algorithm` column),
/// `<id>_reps.csv` and `<id>_manifest.json`.
pub fn compare_lasso(cfg: &LassoComparisonConfig, root: &Path) -> Result<ComparisonSummary, HarnessError> {
    cfg.validate()?;
    let started = Instant::now();
    let out_dir = root.join(&cfg.output_dir);
    std::fs::create_dir_all(&out_dir).map_err(|source| HarnessError::Io {
        path: out_dir.clone(),
        source,
    })?;
    let spec = RegularizerSpec::entry_l1(cfg.sparsity);
    let bounds = bound_curve(&spec, &[cfg.dim], cfg.horizon, cfg.geltc.delta)?;
    let pool = build_pool(cfg.workers)?;
    let runs: Vec<Result<(RunRecord, RunRecord), HarnessError>> = pool.install(|| {
        (0..cfg.replications)
            .into_par_iter()
            .map(|k| {
                let env = gen_lasso_comparison_env(
                    cfg.arms,
                    cfg.dim,
                    cfg.sparsity,
                    cfg.rho2,
                    cfg.noise,
                    cfg.horizon,
                    replication_seeds(cfg.base_seed, k),
                )?;
                let ours = run_geltc(&env, &spec, &cfg.geltc)?;
                let baseline = run_drlasso(&env, &cfg.drlasso)?;
                Ok((ours, baseline))
            })
            .collect()
    });
    let (ours, baseline): (Vec<_>, Vec<_>) = runs.into_iter().collect::<Result<Vec<_>, _>>()?.into_iter().unzip();

    let geltc = summarize(GELTC, &ours, &bounds);
    let drlasso = summarize(DRLASSO, &baseline, &bounds);
    let summary_csv = out_dir.join(format!("{}_summary.csv", cfg.id));
    let reps_csv = out_dir.join(format!("{}_reps.csv", cfg.id));
    let manifest = out_dir.join(format!("{}_manifest.json", cfg.id));

    let mut sink = CsvSink::create(&summary_csv)?;
    sink.row(summary_header(true))?;
    geltc.curve.write_rows(&mut sink, Some(GELTC))?;
    drlasso.curve.write_rows(&mut sink, Some(DRLASSO))?;
    sink.finish()?;

    let mut sink = CsvSink::create(&reps_csv)?;
    sink.row(["algorithm", "replication", "seed", "t1", "lambda", "final_regret", "fit_converged", "unconverged_fits"])?;
    for (name, runs) in [(GELTC, &ours), (DRLASSO, &baseline)] {
        for (k, run) in runs.iter().enumerate() {
            sink.row([
                name.to_string(),
                k.to_string(),
                replication_seed(cfg.base_seed, k).to_string(),
                run.t1.to_string(),
                run.lambda.to_string(),
                run.final_regret().to_string(),
                run.fit.as_ref().is_none_or(|f| f.converged).to_string(),
                run.unconverged_fits.to_string(),
            ])?;
        }
    }
    sink.finish()?;

    let pooled_std = ((geltc.std_final_regret.powi(2) + drlasso.std_final_regret.powi(2)) / 2.0).sqrt();
    let summary = ComparisonSummary {
        id: cfg.id.clone(),
        pooled_std,
        t1: ours[0].t1,
        lambda: ours[0].lambda,
        geltc,
        drlasso,
        summary_csv,
        reps_csv,
        manifest: manifest.clone(),
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    write_json(
        &manifest,
        &Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            config: cfg,
            seed_derivation: SEED_DERIVATION,
            summary: &summary,
        },
    )?;
    Ok(summary)
}
