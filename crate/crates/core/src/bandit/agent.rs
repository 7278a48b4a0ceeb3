use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax_rows, Environment, RoundRecord, RunRecord};
use crate::error::{Error, Result};
use crate::estimator::{
    exploration_length, fit, gaussian_width_estimate, FitDiagnostics, FitOptions, LambdaSchedule, WidthEstimate,
};
use crate::glm::Design;
use crate::regularizers::RegularizerSpec;
use crate::tensor::DenseTensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    /// Multiplier `c` in `T1 = ceil(c·φ·w²)`.
    pub c_explore: f64,
    /// Multiplier on the theoretical regularization level.
    pub c_lambda: f64,
    pub delta: f64,
    pub width_samples: usize,
    pub fit: FitOptions,
    /// Overrides the computed exploration length.
    pub fixed_exploration: Option<usize>,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            c_explore: 1.0,
            c_lambda: 1.0,
            delta: 0.01,
            width_samples: 200,
            fit: FitOptions::default(),
            fixed_exploration: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplorationPlan {
    pub width: WidthEstimate,
    pub phi: f64,
    pub t1: usize,
    pub lambda: f64,
}

/// Width estimate (from the environment's width seed), exploration length and
/// regularization level for one run.
pub fn plan_exploration<E: Environment + ?Sized>(
    env: &E,
    spec: &RegularizerSpec,
    config: &AgentConfig,
) -> Result<ExplorationPlan> {
    if !(config.c_explore > 0.0) || !config.c_explore.is_finite() {
        return Err(Error::InvalidParameter(format!("c_explore must be positive, got {}", config.c_explore)));
    }
    let dims = env.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(env.seeds().width);
    let width = gaussian_width_estimate(spec, dims, config.width_samples, &mut rng)?;
    let phi = spec.compatibility_phi(dims)?;
    let t1 = match config.fixed_exploration {
        Some(t) => t.clamp(1, env.horizon()),
        None => exploration_length(config.c_explore, phi, width.mean, env.horizon()),
    };
    let schedule = LambdaSchedule {
        spec: *spec,
        delta: config.delta,
        noise_scale: env.family().noise_scale,
        c_lambda: config.c_lambda,
    };
    let lambda = schedule.lambda(dims, t1)?;
    Ok(ExplorationPlan { width, phi, t1, lambda })
}

/// Explore-then-commit with the penalized estimator.
pub fn run_geltc<E: Environment + ?Sized>(env: &E, spec: &RegularizerSpec, config: &AgentConfig) -> Result<RunRecord> {
    run_geltc_with_estimator(env, spec, config, |design, lambda| {
        let res = fit(design, spec, lambda, env.family(), &config.fit)?;
        Ok((res.theta, Some(res.diagnostics)))
    })
}

/// Same loop as [`run_geltc`] with a caller-supplied estimator, which maps the
/// exploration data and `λ` to a parameter estimate.
pub fn run_geltc_with_estimator<E, F>(
    env: &E,
    spec: &RegularizerSpec,
    config: &AgentConfig,
    mut estimate: F,
) -> Result<RunRecord>
where
    E: Environment + ?Sized,
    F: FnMut(&Design, f64) -> Result<(DenseTensor, Option<FitDiagnostics>)>,
{
    let started = Instant::now();
    let plan = plan_exploration(env, spec, config)?;
    let seeds = env.seeds();
    let dims = env.dims().to_vec();
    let family = *env.family();
    let theta_star = env.theta_star().data().to_vec();
    let p = theta_star.len();
    let arms = env.arms();
    let horizon = env.horizon();

    let mut context_rng = ChaCha8Rng::seed_from_u64(seeds.context);
    let mut reward_rng = ChaCha8Rng::seed_from_u64(seeds.reward);
    let mut policy_rng = ChaCha8Rng::seed_from_u64(seeds.policy);

    let mut contexts = vec![0.0; arms * p];
    let mut true_scores = Vec::with_capacity(arms);
    let mut est_scores = Vec::with_capacity(arms);
    let mut design = Design::new(&dims);
    let mut rounds = Vec::with_capacity(horizon);
    let mut cumulative = 0.0;
    let mut theta_hat: Option<Vec<f64>> = None;
    let mut fit_diag = None;

    for t in 0..horizon {
        env.sample_contexts(&mut context_rng, &mut contexts);
        let best = argmax_rows(&contexts, &theta_star, &mut true_scores);
        let arm = if t < plan.t1 {
            policy_rng.random_range(0..arms)
        } else {
            let theta = theta_hat.as_ref().expect("estimate computed after exploration");
            argmax_rows(&contexts, theta, &mut est_scores)
        };
        let inner = true_scores[arm];
        let regret = family.mu(true_scores[best]) - family.mu(inner);
        cumulative += regret;
        rounds.push(RoundRecord {
            arm,
            inner,
            regret,
            cumulative,
        });
        if t < plan.t1 {
            let reward = family.sample_reward(inner, &mut reward_rng);
            design.push(&contexts[arm * p..(arm + 1) * p], reward);
            if t + 1 == plan.t1 {
                let (theta, diag) = estimate(&design, plan.lambda)?;
                if theta.dims() != dims.as_slice() {
                    return Err(Error::Shape(format!(
                        "estimator returned dims {:?}, expected {:?}",
                        theta.dims(),
                        dims
                    )));
                }
                theta_hat = Some(theta.into_data());
                fit_diag = diag;
            }
        }
    }

    Ok(RunRecord {
        algorithm: "geltc".into(),
        rounds,
        t1: plan.t1,
        lambda: plan.lambda,
        phi: Some(plan.phi),
        width: Some(plan.width),
        fit: fit_diag,
        unconverged_fits: 0,
        wall_clock_secs: started.elapsed().as_secs_f64(),
        seeds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandit::{BanditInstance, ContextDistribution, Seeds};
    use crate::glm::GlmFamily;

    fn small_instance(seed: u64) -> (BanditInstance, RegularizerSpec) {
        let spec = RegularizerSpec::entry_l1(3);
        let env = BanditInstance::generate(
            spec,
            &[3, 3, 2],
            5,
            300,
            GlmFamily::logistic(),
            ContextDistribution::StandardGaussian,
            Seeds::derive(seed),
        )
        .unwrap();
        (env, spec)
    }

    #[test]
    fn oracle_estimate_has_no_regret_after_exploration() {
        let (env, spec) = small_instance(5);
        let truth = env.theta_star.clone();
        let cfg = AgentConfig {
            fixed_exploration: Some(40),
            ..AgentConfig::default()
        };
        let run = run_geltc_with_estimator(&env, &spec, &cfg, |_, _| Ok((truth.clone(), None))).unwrap();
        assert_eq!(run.t1, 40);
        assert_eq!(run.rounds.len(), 300);
        assert!(run.rounds[40..].iter().all(|r| r.regret == 0.0));
        let explore: f64 = run.rounds[..40].iter().map(|r| r.regret).sum();
        assert!((run.rounds[39].cumulative - explore).abs() < 1e-12);
    }

    #[test]
    fn runs_are_reproducible() {
        let (env, spec) = small_instance(9);
        let cfg = AgentConfig {
            fixed_exploration: Some(60),
            c_lambda: 0.2,
            ..AgentConfig::default()
        };
        let a = run_geltc(&env, &spec, &cfg).unwrap();
        let b = run_geltc(&env, &spec, &cfg).unwrap();
        assert!(a.same_outcome(&b));
        assert!(a.rounds.iter().all(|r| r.regret >= 0.0));
    }

    #[test]
    fn wrong_estimate_shape_is_an_error() {
        let (env, spec) = small_instance(1);
        let cfg = AgentConfig {
            fixed_exploration: Some(5),
            ..AgentConfig::default()
        };
        let bad = DenseTensor::zeros(&[2]).unwrap();
        assert!(run_geltc_with_estimator(&env, &spec, &cfg, |_, _| Ok((bad.clone(), None))).is_err());
    }
}
