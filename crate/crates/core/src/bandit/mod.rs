//! Synthetic bandit environments, the explore-then-commit agent, the
//! doubly-robust Lasso baseline, and regret bookkeeping.

mod agent;
mod drlasso;
mod env;

pub use agent::{plan_exploration, run_geltc, run_geltc_with_estimator, AgentConfig, ExplorationPlan};
pub use drlasso::{lasso_coordinate_descent, run_drlasso, DrLassoConfig, LassoOptions};
pub use env::{
    gen_context_set, gen_lasso_comparison_env, gen_true_parameter, verify_structure, BanditInstance,
    ContextDistribution, Environment, LassoEnvironment,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{FitDiagnostics, WidthEstimate};
use crate::regularizers::{eta, RegularizerKind, RegularizerSpec};
use crate::tensor::{dot, DenseTensor};

/// SplitMix64 finalizer; the building block of every seed derivation.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent RNG seeds for each random stream of one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub truth: u64,
    pub context: u64,
    pub reward: u64,
    pub policy: u64,
    pub width: u64,
}

impl Seeds {
    /// Stream `i` gets `splitmix64(master ^ splitmix64(i + 1))`.
    pub fn derive(master: u64) -> Self {
        let stream = |i: u64| splitmix64(master ^ splitmix64(i + 1));
        Self {
            truth: stream(0),
            context: stream(1),
            reward: stream(2),
            policy: stream(3),
            width: stream(4),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub arm: usize,
    /// `⟨X_chosen, Θ*⟩`
    pub inner: f64,
    pub regret: f64,
    pub cumulative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: String,
    pub rounds: Vec<RoundRecord>,
    /// Exploration length (forced-exploration rounds for the baseline).
    pub t1: usize,
    pub lambda: f64,
    pub phi: Option<f64>,
    pub width: Option<WidthEstimate>,
    pub fit: Option<FitDiagnostics>,
    /// Baseline Lasso refits that hit their sweep limit.
    pub unconverged_fits: usize,
    pub wall_clock_secs: f64,
    pub seeds: Seeds,
}

impl RunRecord {
    pub fn final_regret(&self) -> f64 {
        self.rounds.last().map_or(0.0, |r| r.cumulative)
    }

    pub fn cumulative(&self) -> Vec<f64> {
        self.rounds.iter().map(|r| r.cumulative).collect()
    }

    /// Equality ignoring wall-clock time.
    pub fn same_outcome(&self, other: &Self) -> bool {
        let mut a = self.clone();
        a.wall_clock_secs = other.wall_clock_secs;
        &a == other
    }
}

/// Index of the largest `⟨row, theta⟩` over `arms` rows of width `theta.len()`,
/// lowest index on ties. Also fills `scores`.
pub(crate) fn argmax_rows(rows: &[f64], theta: &[f64], scores: &mut Vec<f64>) -> usize {
    scores.clear();
    scores.extend(rows.chunks_exact(theta.len()).map(|r| dot(r, theta)));
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Arm maximizing `⟨X, Θ*⟩`; ties go to the lowest index.
pub fn optimal_arm(contexts: &[DenseTensor], theta_star: &DenseTensor) -> Result<usize> {
    if contexts.is_empty() {
        return Err(Error::EmptyData);
    }
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, x) in contexts.iter().enumerate() {
        let v = crate::tensor::inner(x, theta_star)?;
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    Ok(best)
}

/// Growth rate `B_T` of the regret bound for each structure, with constants
/// and logarithmic factors in `T` dropped. Used as a ratio denominator.
pub fn theoretical_bound(spec: &RegularizerSpec, dims: &[usize], horizon: f64, delta: f64) -> Result<f64> {
    spec.check_dims(dims)?;
    let d = *dims.iter().max().ok_or(Error::EmptyData)? as f64;
    let t23 = horizon.powf(2.0 / 3.0);
    let rank = || spec.rank.ok_or(Error::MissingParameter("rank")).map(|r| r as f64);
    let sparsity = || spec.sparsity.ok_or(Error::MissingParameter("sparsity")).map(|s| s as f64);
    Ok(match spec.kind {
        RegularizerKind::OverlappedNuclear => d.powf(dims.len() as f64 / 3.0) * rank()?.cbrt() * t23,
        RegularizerKind::SliceNuclear { .. } => d * rank()?.cbrt() * t23,
        RegularizerKind::EntryL1 => {
            let size = dims.iter().product::<usize>() as f64;
            sparsity()?.cbrt() * t23 * size.ln().cbrt()
        }
        RegularizerKind::FiberGroup { mode, q } => {
            if !(delta > 0.0 && delta < 1.0) {
                return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
            }
            let d1 = dims[mode] as f64;
            let rest = dims.iter().product::<usize>() as f64 / d1;
            eta(d1, 1.0 / q - 0.5).powf(4.0 / 3.0)
                * d1.max((4.0 * rest / delta).ln()).cbrt()
                * sparsity()?.cbrt()
                * t23
        }
    })
}
