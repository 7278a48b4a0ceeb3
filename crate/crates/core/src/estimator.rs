//! Penalized GLM estimation, Gaussian-width estimates, exploration budgets
//! and regularization schedules.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{Design, GlmFamily};
use crate::regularizers::{eta, ConsensusWarmStart, ProxOptions, RegularizerKind, RegularizerSpec};
use crate::tensor::{dot, DenseTensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub max_iters: usize,
    /// Relative change of the composite objective below which the solver stops.
    pub tol: f64,
    pub initial_step: f64,
    pub shrink: f64,
    pub sufficient_decrease: f64,
    /// Restart momentum whenever the objective goes up.
    pub restart: bool,
    pub prox: ProxOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            tol: 1e-8,
            initial_step: 1.0,
            shrink: 0.5,
            sufficient_decrease: 1e-4,
            restart: true,
            prox: ProxOptions::default(),
        }
    }
}

impl FitOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "shrink must lie in (0, 1), got {}",
                self.shrink
            )));
        }
        if !(self.initial_step > 0.0) || self.max_iters == 0 {
            return Err(Error::InvalidParameter("initial step and max_iters must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.sufficient_decrease) {
            return Err(Error::InvalidParameter("sufficient_decrease must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub objective: f64,
    pub objective_at_zero: f64,
    pub relative_change: f64,
    pub converged: bool,
    /// Largest residual of the iterative prox over the last accepted step.
    pub prox_residual: f64,
    pub step: f64,
    pub restarts: usize,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub theta: DenseTensor,
    pub diagnostics: FitDiagnostics,
}

/// Minimizes `loss(θ) + λ·R(θ)` by accelerated proximal gradient with
/// backtracking, starting from zero. Non-convergence is reported in the
/// diagnostics; the best iterate seen is returned either way.
pub fn fit(
    design: &Design,
    spec: &RegularizerSpec,
    lambda: f64,
    family: &GlmFamily,
    opts: &FitOptions,
) -> Result<FitResult> {
    opts.validate()?;
    if design.is_empty() {
        return Err(Error::EmptyData);
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda must be finite and non-negative, got {lambda}")));
    }
    let dims = design.dims().to_vec();
    spec.check_dims(&dims)?;
    let p = dims.iter().product::<usize>();

    let mut eta_buf = Vec::with_capacity(design.len());
    let mut grad = vec![0.0; p];
    let mut warm = ConsensusWarmStart::default();
    let penalty = |theta: &DenseTensor| -> Result<f64> {
        if lambda == 0.0 {
            Ok(0.0)
        } else {
            Ok(lambda * spec.value(theta)?)
        }
    };

    let mut x = DenseTensor::zeros(&dims)?;
    design.predict(x.data(), &mut eta_buf);
    let objective_at_zero = design.loss_from_predictions(family, &eta_buf);
    let mut fx = objective_at_zero;
    let mut best = (x.clone(), fx);

    let mut y = x.clone();
    let mut y_is_x = true;
    let mut momentum = 1.0;
    let mut step = opts.initial_step;
    let mut last_step = step;
    let mut clean_steps = 0usize;
    let mut diag = FitDiagnostics {
        objective_at_zero,
        ..FitDiagnostics::default()
    };
    let mut rel_change = f64::INFINITY;

    for iter in 1..=opts.max_iters {
        diag.iterations = iter;
        design.predict(y.data(), &mut eta_buf);
        let fy = design.loss_from_predictions(family, &eta_buf);
        design.gradient_from_predictions(family, &eta_buf, &mut grad);

        if clean_steps >= 10 {
            step /= opts.shrink;
            clean_steps = 0;
        }
        let mut backtracked = false;
        let (z, fz_smooth, prox_residual) = loop {
            let shifted: Vec<f64> = y.data().iter().zip(&grad).map(|(v, g)| v - step * g).collect();
            let shifted = DenseTensor::from_vec(&dims, shifted)?;
            let (z, residual) = if lambda == 0.0 {
                (shifted, 0.0)
            } else {
                let out = spec.prox_report(&shifted, step * lambda, &opts.prox, Some(&mut warm))?;
                (out.point, out.residual)
            };
            design.predict(z.data(), &mut eta_buf);
            let fz = design.loss_from_predictions(family, &eta_buf);
            let diff: Vec<f64> = z.data().iter().zip(y.data()).map(|(a, b)| a - b).collect();
            let model = fy + dot(&grad, &diff) + (1.0 - opts.sufficient_decrease) * dot(&diff, &diff) / (2.0 * step);
            if fz.is_finite() && fz <= model + 1e-15 * fy.abs().max(1.0) {
                break (z, fz, residual);
            }
            backtracked = true;
            step *= opts.shrink;
            if step < 1e-30 {
                return Err(Error::InvalidParameter("step size underflow in backtracking".into()));
            }
        };
        clean_steps = if backtracked { 0 } else { clean_steps + 1 };
        diag.prox_residual = prox_residual;

        let fz = fz_smooth + penalty(&z)?;
        if opts.restart && fz > fx && !y_is_x {
            y = x.clone();
            y_is_x = true;
            momentum = 1.0;
            diag.restarts += 1;
            continue;
        }

        let next_momentum = (1.0 + (1.0 + 4.0 * (last_step / step) * momentum * momentum).sqrt()) / 2.0;
        let beta = (momentum - 1.0) / next_momentum;
        let extrapolated: Vec<f64> = z
            .data()
            .iter()
            .zip(x.data())
            .map(|(zn, xo)| zn + beta * (zn - xo))
            .collect();
        y = DenseTensor::from_vec(&dims, extrapolated)?;
        y_is_x = beta == 0.0;
        momentum = next_momentum;
        last_step = step;

        rel_change = (fx - fz).abs() / fz.abs().max(1.0);
        x = z;
        fx = fz;
        if fx < best.1 {
            best = (x.clone(), fx);
        }
        if rel_change < opts.tol {
            diag.converged = true;
            break;
        }
    }

    diag.objective = best.1;
    diag.relative_change = rel_change;
    diag.step = step;
    Ok(FitResult {
        theta: best.0,
        diagnostics: diag,
    })
}

/// Monte-Carlo estimate of the Gaussian width of the unit ball `{R ≤ 1}`,
/// i.e. `E[R*(G)]` for a standard Gaussian tensor `G`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Averages `R*(G)` over `n_samples` draws, doubling the sample count (up to
/// 16×) while the standard error exceeds 5% of the mean.
pub fn gaussian_width_estimate<R: Rng + ?Sized>(
    spec: &RegularizerSpec,
    dims: &[usize],
    n_samples: usize,
    rng: &mut R,
) -> Result<WidthEstimate> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("need at least one width sample".into()));
    }
    spec.check_dims(dims)?;
    let len: usize = dims.iter().product();
    let mut values = Vec::with_capacity(n_samples);
    let mut target = n_samples;
    loop {
        while values.len() < target {
            let g: Vec<f64> = (0..len).map(|_| StandardNormal.sample(rng)).collect();
            values.push(spec.dual(&DenseTensor::from_vec(dims, g)?)?);
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let std_error = (var / n).sqrt();
        if std_error < 0.05 * mean || target >= 16 * n_samples {
            return Ok(WidthEstimate {
                mean,
                std_error,
                samples: values.len(),
            });
        }
        target *= 2;
    }
}

/// `T1 = ceil(c·φ·w²)` clamped to `[1, floor(0.9·T)]`.
pub fn exploration_length(c_explore: f64, phi: f64, width: f64, horizon: usize) -> usize {
    let cap = ((0.9 * horizon as f64).floor() as usize).max(1);
    let raw = (c_explore * phi * width * width).ceil();
    if !raw.is_finite() || raw < 1.0 {
        return 1;
    }
    (raw as usize).min(cap)
}

/// Regularization level after `T1` exploration rounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaSchedule {
    pub spec: RegularizerSpec,
    /// Failure probability δ.
    pub delta: f64,
    /// Sub-Gaussian scale `R` of the reward noise.
    pub noise_scale: f64,
    /// Multiplier on the theoretical level.
    pub c_lambda: f64,
}

impl LambdaSchedule {
    pub fn new(spec: RegularizerSpec, delta: f64, noise_scale: f64) -> Self {
        Self {
            spec,
            delta,
            noise_scale,
            c_lambda: 1.0,
        }
    }

    /// Sub-Gaussian scale of the vectorized contexts, `1/sqrt(∏ d_n)`.
    pub fn context_scale(dims: &[usize]) -> f64 {
        1.0 / (dims.iter().product::<usize>() as f64).sqrt()
    }

    pub fn alpha(&self) -> f64 {
        self.spec.alpha()
    }

    pub fn lambda(&self, dims: &[usize], t1: usize) -> Result<f64> {
        lambda_for(self, dims, t1)
    }
}

pub fn lambda_for(schedule: &LambdaSchedule, dims: &[usize], t1: usize) -> Result<f64> {
    let delta = schedule.delta;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    if t1 == 0 {
        return Err(Error::InvalidParameter("exploration length must be at least 1".into()));
    }
    if !(schedule.noise_scale > 0.0) || !(schedule.c_lambda > 0.0) {
        return Err(Error::InvalidParameter("noise scale and c_lambda must be positive".into()));
    }
    let spec = &schedule.spec;
    spec.check_dims(dims)?;
    let r = schedule.noise_scale;
    let t = t1 as f64;
    let c_r = spec.c_r();
    let alpha = spec.alpha();
    let k = LambdaSchedule::context_scale(dims);

    let base = match spec.kind {
        RegularizerKind::OverlappedNuclear => {
            let n = dims.len() as f64;
            let d = *dims.iter().max().expect("non-empty dims") as f64;
            alpha * r * n / t.sqrt()
                * (2.0 * (4.0 * t * n / delta).ln() * (2.0 * n * (d + d.powf(n - 1.0)) / delta).ln()).sqrt()
        }
        RegularizerKind::SliceNuclear { modes } => {
            let d1 = dims[modes[0]] as f64;
            let d2 = dims[modes[1]] as f64;
            let d3 = dims[3 - modes[0] - modes[1]] as f64;
            r * (c_r + 3.0) / (c_r * t.sqrt())
                * ((4.0 * t * d3 / delta).ln() * (2.0 * d3 * (d1 + d2) / delta).ln()).sqrt()
        }
        RegularizerKind::EntryL1 => {
            let size = dims.iter().product::<usize>() as f64;
            (c_r + 3.0) * r * k / (2.0 * c_r * t.sqrt()) * (2.0 * size / delta).ln().sqrt()
        }
        RegularizerKind::FiberGroup { mode, q } => {
            let d1 = dims[mode] as f64;
            let rest = dims.iter().product::<usize>() as f64 / d1;
            alpha * r * k * (d1.sqrt() + (4.0 * rest / delta).ln().sqrt()) / t.sqrt()
                * (2.0 * (4.0 * t * rest / delta).ln()).sqrt()
                * eta(d1, 0.5 - 1.0 / q)
        }
    };
    Ok(schedule.c_lambda * base)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exploration_length_examples() {
        assert_eq!(exploration_length(1.0, 4.0, 3.0, 100), 36);
        assert_eq!(exploration_length(1.0, 4.0, 3.0, 30), 27);
        assert_eq!(exploration_length(1e-9, 4.0, 3.0, 100), 1);
        for horizon in 2..200 {
            let t1 = exploration_length(50.0, 6.0, 7.0, horizon);
            assert!(t1 >= 1 && t1 as f64 <= (0.9 * horizon as f64).max(1.0));
        }
    }

    #[test]
    fn lambda_rejects_bad_inputs() {
        let s = LambdaSchedule::new(RegularizerSpec::entry_l1(3), 0.01, 0.5);
        assert!(lambda_for(&s, &[4, 4, 4], 0).is_err());
        let bad = LambdaSchedule { delta: 1.0, ..s };
        assert!(lambda_for(&bad, &[4, 4, 4], 10).is_err());
        let slice = LambdaSchedule::new(RegularizerSpec::slice_nuclear(1, 1), 0.01, 0.5);
        assert!(lambda_for(&slice, &[4, 4], 10).is_err());
    }

    #[test]
    fn fit_options_validation() {
        let design = {
            let mut d = Design::new(&[2]);
            d.push(&[1.0, 0.0], 1.0);
            d
        };
        let spec = RegularizerSpec::entry_l1(1);
        let fam = GlmFamily::gaussian(1.0);
        let bad = FitOptions {
            shrink: 1.5,
            ..FitOptions::default()
        };
        assert!(fit(&design, &spec, 0.1, &fam, &bad).is_err());
        assert!(fit(&design, &spec, -0.1, &fam, &FitOptions::default()).is_err());
        assert!(matches!(
            fit(&Design::new(&[2]), &spec, 0.1, &fam, &FitOptions::default()),
            Err(Error::EmptyData)
        ));
    }

    #[test]
    fn width_rejects_zero_samples() {
        let mut rng = rand::rng();
        assert!(gaussian_width_estimate(&RegularizerSpec::entry_l1(1), &[3], 0, &mut rng).is_err());
    }
}
