//! Seeded replications, aggregation and output files for tensor experiments.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use tensor_bandit::bandit::{
    plan_exploration, run_geltc, splitmix64, theoretical_bound, BanditInstance, ExplorationPlan, RunRecord, Seeds,
};
use tensor_bandit::estimator::FitDiagnostics;
use tensor_bandit::RegularizerSpec;

use crate::config::{ExperimentConfig, Setting};
use crate::output::{write_json, CsvSink, RoundStats};
use crate::HarnessError;

/// Master seed of replication `k`: the `k`-th output of a SplitMix64 stream
/// started at `base`. Any single replication can be rerun in isolation.
pub fn replication_seed(base: u64, k: usize) -> u64 {
    splitmix64(base.wrapping_add((k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

/// Stream seeds of replication `k`. The width stream is shared by all
/// replications of a setting so they use one exploration length.
pub fn replication_seeds(base: u64, k: usize) -> Seeds {
    let mut seeds = Seeds::derive(replication_seed(base, k));
    seeds.width = Seeds::derive(base).width;
    seeds
}

pub(crate) fn build_pool(workers: Option<usize>) -> Result<rayon::ThreadPool, HarnessError> {
    let n = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| HarnessError::Invalid(format!("cannot start worker pool: {e}")))
}

fn instance(cfg: &ExperimentConfig, setting: &Setting, seeds: Seeds) -> Result<BanditInstance, HarnessError> {
    Ok(BanditInstance::generate(
        setting.structure,
        &setting.dims,
        cfg.arms,
        cfg.horizon,
        cfg.family,
        cfg.contexts,
        seeds,
    )?)
}

/// Exploration length, λ and width for a setting, without running anything.
pub fn plan_setting(cfg: &ExperimentConfig, setting: &Setting) -> Result<ExplorationPlan, HarnessError> {
    let env = instance(cfg, setting, replication_seeds(cfg.base_seed, 0))?;
    Ok(plan_exploration(&env, &setting.structure, &cfg.agent())?)
}

/// Per-round bound `B_t = B_1 · t^{2/3}`.
pub(crate) fn bound_curve(spec: &RegularizerSpec, dims: &[usize], horizon: usize, delta: f64) -> Result<Vec<f64>, HarnessError> {
    let unit = theoretical_bound(spec, dims, 1.0, delta)?;
    Ok((1..=horizon).map(|t| unit * (t as f64).powf(2.0 / 3.0)).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplicationSummary {
    pub replication: usize,
    pub seed: u64,
    pub t1: usize,
    pub lambda: f64,
    pub width: f64,
    pub width_std_error: f64,
    pub final_regret: f64,
    pub final_ratio: f64,
    pub fit_converged: bool,
    pub fit_iterations: usize,
    pub fit_objective: f64,
    pub fit_restarts: usize,
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SettingSummary {
    pub id: String,
    pub structure: RegularizerSpec,
    pub dims: Vec<usize>,
    pub t1: usize,
    pub lambda: f64,
    pub phi: f64,
    pub width: f64,
    pub mean_final_regret: f64,
    pub std_final_regret: f64,
    pub mean_final_ratio: f64,
    pub summary_csv: PathBuf,
    pub reps_csv: PathBuf,
    pub manifest: PathBuf,
    /// Mean cumulative regret and mean ratio per round (index `t − 1`).
    #[serde(skip)]
    pub curve: RoundStats,
    pub replications: Vec<ReplicationSummary>,
    pub wall_clock_secs: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a ExperimentConfig,
    setting: &'a Setting,
    seed_derivation: &'static str,
    t1: usize,
    lambda: f64,
    phi: f64,
    width: f64,
    mean_final_regret: f64,
    std_final_regret: f64,
    mean_final_ratio: f64,
    replications: Vec<ManifestReplication<'a>>,
    wall_clock_secs: f64,
}

#[derive(Serialize)]
struct ManifestReplication<'a> {
    #[serde(flatten)]
    summary: &'a ReplicationSummary,
    seeds: Seeds,
    fit: Option<FitDiagnostics>,
    wall_clock_secs: f64,
}

pub(crate) const SEED_DERIVATION: &str =
    "replication k: master = splitmix64(base_seed + k * 0x9E3779B97F4A7C15); stream i = splitmix64(master ^ splitmix64(i + 1)) for truth, context, reward, policy; width stream from base_seed";

/// Runs every setting of `cfg`, writing `<setting id>_summary.csv`,
/// `<setting id>_reps.csv` and `<setting id>_manifest.json` under
/// `output_dir` (relative paths resolve against `root`).
pub fn run_experiment(cfg: &ExperimentConfig, root: &Path) -> Result<Vec<SettingSummary>, HarnessError> {
    cfg.validate()?;
    let out_dir = root.join(&cfg.output_dir);
    std::fs::create_dir_all(&out_dir).map_err(|source| HarnessError::Io {
        path: out_dir.clone(),
        source,
    })?;
    let pool = build_pool(cfg.workers)?;
    cfg.settings()
        .iter()
        .map(|setting| run_setting(cfg, setting, &out_dir, &pool))
        .collect()
}

fn run_setting(
    cfg: &ExperimentConfig,
    setting: &Setting,
    out_dir: &Path,
    pool: &rayon::ThreadPool,
) -> Result<SettingSummary, HarnessError> {
    let started = Instant::now();
    let agent = cfg.agent();
    let bounds = bound_curve(&setting.structure, &setting.dims, cfg.horizon, cfg.delta)?;
    let runs: Vec<Result<RunRecord, HarnessError>> = pool.install(|| {
        (0..cfg.replications)
            .into_par_iter()
            .map(|k| {
                let env = instance(cfg, setting, replication_seeds(cfg.base_seed, k))?;
                Ok(run_geltc(&env, &setting.structure, &agent)?)
            })
            .collect()
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;

    let curves: Vec<Vec<f64>> = runs.iter().map(RunRecord::cumulative).collect();
    let stats = RoundStats::from_curves(&curves, &bounds);
    let reps: Vec<ReplicationSummary> = runs
        .iter()
        .enumerate()
        .map(|(k, run)| {
            let fit = diag_fields(&run.fit);
            ReplicationSummary {
                replication: k,
                seed: replication_seed(cfg.base_seed, k),
                t1: run.t1,
                lambda: run.lambda,
                width: run.width.map_or(f64::NAN, |w| w.mean),
                width_std_error: run.width.map_or(f64::NAN, |w| w.std_error),
                final_regret: run.final_regret(),
                final_ratio: run.final_regret() / bounds[bounds.len() - 1],
                fit_converged: fit.0,
                fit_iterations: fit.1,
                fit_objective: fit.2,
                fit_restarts: fit.3,
                wall_clock_secs: run.wall_clock_secs,
            }
        })
        .collect();

    let summary_csv = out_dir.join(format!("{}_summary.csv", setting.id));
    let reps_csv = out_dir.join(format!("{}_reps.csv", setting.id));
    let manifest_path = out_dir.join(format!("{}_manifest.json", setting.id));
    stats.write_csv(&summary_csv, None)?;
    write_reps(&reps_csv, &reps)?;

    let first = &runs[0];
    let finals: Vec<f64> = reps.iter().map(|r| r.final_regret).collect();
    let (mean_final, std_final) = crate::output::mean_std(&finals);
    let wall = started.elapsed().as_secs_f64();
    let summary = SettingSummary {
        id: setting.id.clone(),
        structure: setting.structure,
        dims: setting.dims.clone(),
        t1: first.t1,
        lambda: first.lambda,
        phi: first.phi.unwrap_or(f64::NAN),
        width: first.width.map_or(f64::NAN, |w| w.mean),
        mean_final_regret: mean_final,
        std_final_regret: std_final,
        mean_final_ratio: stats.mean_ratio[stats.mean_ratio.len() - 1],
        summary_csv,
        reps_csv,
        manifest: manifest_path.clone(),
        curve: stats,
        replications: reps,
        wall_clock_secs: wall,
    };
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        setting,
        seed_derivation: SEED_DERIVATION,
        t1: summary.t1,
        lambda: summary.lambda,
        phi: summary.phi,
        width: summary.width,
        mean_final_regret: summary.mean_final_regret,
        std_final_regret: summary.std_final_regret,
        mean_final_ratio: summary.mean_final_ratio,
        replications: summary
            .replications
            .iter()
            .zip(&runs)
            .map(|(s, run)| ManifestReplication {
                summary: s,
                seeds: run.seeds,
                fit: run.fit.clone(),
                wall_clock_secs: run.wall_clock_secs,
            })
            .collect(),
        wall_clock_secs: wall,
    };
    write_json(&manifest_path, &manifest)?;
    Ok(summary)
}

/// `(converged, iterations, objective, restarts)`
fn diag_fields(fit: &Option<FitDiagnostics>) -> (bool, usize, f64, usize) {
    fit.as_ref()
        .map_or((false, 0, f64::NAN, 0), |d| (d.converged, d.iterations, d.objective, d.restarts))
}

fn write_reps(path: &Path, reps: &[ReplicationSummary]) -> Result<(), HarnessError> {
    let mut sink = CsvSink::create(path)?;
    sink.row([
        "replication",
        "seed",
        "t1",
        "lambda",
        "width",
        "width_std_error",
        "final_regret",
        "final_ratio",
        "fit_converged",
        "fit_iterations",
        "fit_objective",
        "fit_restarts",
    ])?;
    for r in reps {
        sink.row(&[
            r.replication.to_string(),
            r.seed.to_string(),
            r.t1.to_string(),
            r.lambda.to_string(),
            r.width.to_string(),
            r.width_std_error.to_string(),
            r.final_regret.to_string(),
            r.final_ratio.to_string(),
            r.fit_converged.to_string(),
            r.fit_iterations.to_string(),
            r.fit_objective.to_string(),
            r.fit_restarts.to_string(),
        ])?;
    }
    sink.finish()
}
