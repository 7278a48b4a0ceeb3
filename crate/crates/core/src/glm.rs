//! Canonical-link generalized linear reward families and the penalized
//! estimator's data term.

use rand::Rng;
use rand_distr::{Bernoulli, Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{dot, DenseTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlmKind {
    BernoulliLogistic,
    Poisson,
    GaussianIdentity,
}

/// A reward family plus the sub-Gaussian scale `R` of its noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlmFamily {
    pub kind: GlmKind,
    pub noise_scale: f64,
}

impl GlmFamily {
    /// Bernoulli rewards with logistic mean. The noise `y − μ` lives in
    /// `[-1, 1]`; its sub-Gaussian scale defaults to 1/2.
    pub fn logistic() -> Self {
        Self {
            kind: GlmKind::BernoulliLogistic,
            noise_scale: 0.5,
        }
    }

    pub fn poisson(noise_scale: f64) -> Self {
        Self {
            kind: GlmKind::Poisson,
            noise_scale,
        }
    }

    pub fn gaussian(noise_scale: f64) -> Self {
        Self {
            kind: GlmKind::GaussianIdentity,
            noise_scale,
        }
    }

    /// Inverse link `μ = b'`.
    pub fn mu(&self, x: f64) -> f64 {
        match self.kind {
            GlmKind::BernoulliLogistic => {
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            }
            GlmKind::Poisson => x.exp(),
            GlmKind::GaussianIdentity => x,
        }
    }

    pub fn mu_prime(&self, x: f64) -> f64 {
        match self.kind {
            GlmKind::BernoulliLogistic => {
                let m = self.mu(x);
                m * (1.0 - m)
            }
            GlmKind::Poisson => x.exp(),
            GlmKind::GaussianIdentity => 1.0,
        }
    }

    /// Log-partition `b`.
    pub fn cumulant(&self, x: f64) -> f64 {
        match self.kind {
            GlmKind::BernoulliLogistic => {
                if x > 0.0 {
                    x + (-x).exp().ln_1p()
                } else {
                    x.exp().ln_1p()
                }
            }
            GlmKind::Poisson => x.exp(),
            GlmKind::GaussianIdentity => 0.5 * x * x,
        }
    }

    /// Bound on `|μ'(x)|` over `|x| ≤ 1`.
    pub fn k_mu(&self) -> f64 {
        match self.kind {
            GlmKind::BernoulliLogistic => 0.25,
            GlmKind::Poisson => std::f64::consts::E,
            GlmKind::GaussianIdentity => 1.0,
        }
    }

    /// Draws a reward with mean `μ(mean_arg)`.
    pub fn sample_reward<R: Rng + ?Sized>(&self, mean_arg: f64, rng: &mut R) -> f64 {
        match self.kind {
            GlmKind::BernoulliLogistic => {
                let p = self.mu(mean_arg).clamp(0.0, 1.0);
                let coin = Bernoulli::new(p).expect("probability in [0, 1]");
                if coin.sample(rng) {
                    1.0
                } else {
                    0.0
                }
            }
            GlmKind::Poisson => {
                let rate = self.mu(mean_arg);
                if rate <= 0.0 {
                    return 0.0;
                }
                Poisson::new(rate).map(|d| d.sample(rng)).unwrap_or(0.0)
            }
            GlmKind::GaussianIdentity => {
                if self.noise_scale == 0.0 {
                    mean_arg
                } else {
                    let z: f64 = StandardNormal.sample(rng);
                    mean_arg + self.noise_scale * z
                }
            }
        }
    }
}

/// Contexts stacked row-wise with their observed rewards.
#[derive(Debug, Clone)]
pub struct Design {
    dims: Vec<usize>,
    width: usize,
    rows: Vec<f64>,
    rewards: Vec<f64>,
}

impl Design {
    pub fn new(dims: &[usize]) -> Self {
        Self {
            dims: dims.to_vec(),
            width: dims.iter().product(),
            rows: Vec::new(),
            rewards: Vec::new(),
        }
    }

    pub fn from_samples(contexts: &[DenseTensor], rewards: &[f64]) -> Result<Self> {
        let first = contexts.first().ok_or(Error::EmptyData)?;
        if contexts.len() != rewards.len() {
            return Err(Error::Shape(format!(
                "{} contexts but {} rewards",
                contexts.len(),
                rewards.len()
            )));
        }
        let mut design = Self::new(first.dims());
        for (x, &y) in contexts.iter().zip(rewards) {
            if x.dims() != first.dims() {
                return Err(Error::Shape(format!(
                    "context dims {:?} differ from {:?}",
                    x.dims(),
                    first.dims()
                )));
            }
            design.push(x.data(), y);
        }
        Ok(design)
    }

    pub fn push(&mut self, context: &[f64], reward: f64) {
        debug_assert_eq!(context.len(), self.width);
        self.rows.extend_from_slice(context);
        self.rewards.push(reward);
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.rows[t * self.width..(t + 1) * self.width]
    }

    /// `⟨X_t, θ⟩` for every sample.
    pub fn predict(&self, theta: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.rows.chunks_exact(self.width).map(|r| dot(r, theta)));
    }

    fn check(&self, theta: &DenseTensor) -> Result<()> {
        if self.is_empty() {
            return Err(Error::EmptyData);
        }
        if theta.dims() != self.dims.as_slice() {
            return Err(Error::Shape(format!(
                "parameter dims {:?} differ from context dims {:?}",
                theta.dims(),
                self.dims
            )));
        }
        Ok(())
    }

    /// Mean negative log-likelihood `(1/T) Σ b(⟨X_t,θ⟩) − y_t⟨X_t,θ⟩`.
    pub fn loss(&self, family: &GlmFamily, theta: &DenseTensor) -> Result<f64> {
        self.check(theta)?;
        let mut eta = Vec::new();
        self.predict(theta.data(), &mut eta);
        Ok(self.loss_from_predictions(family, &eta))
    }

    pub(crate) fn loss_from_predictions(&self, family: &GlmFamily, eta: &[f64]) -> f64 {
        let total: f64 = eta
            .iter()
            .zip(&self.rewards)
            .map(|(&e, &y)| family.cumulant(e) - y * e)
            .sum();
        total / self.len() as f64
    }

    /// `(1/T) Σ (μ(⟨X_t,θ⟩) − y_t) X_t`
    pub fn gradient(&self, family: &GlmFamily, theta: &DenseTensor) -> Result<DenseTensor> {
        self.check(theta)?;
        let mut eta = Vec::new();
        self.predict(theta.data(), &mut eta);
        let mut grad = vec![0.0; self.width];
        self.gradient_from_predictions(family, &eta, &mut grad);
        DenseTensor::from_vec(&self.dims, grad)
    }

    pub(crate) fn gradient_from_predictions(&self, family: &GlmFamily, eta: &[f64], grad: &mut [f64]) {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let scale = 1.0 / self.len() as f64;
        for ((row, &e), &y) in self.rows.chunks_exact(self.width).zip(eta).zip(&self.rewards) {
            let w = (family.mu(e) - y) * scale;
            if w != 0.0 {
                for (g, x) in grad.iter_mut().zip(row) {
                    *g += w * x;
                }
            }
        }
    }
}

pub fn glm_loss(
    theta: &DenseTensor,
    contexts: &[DenseTensor],
    rewards: &[f64],
    family: &GlmFamily,
) -> Result<f64> {
    Design::from_samples(contexts, rewards)?.loss(family, theta)
}

pub fn glm_loss_gradient(
    theta: &DenseTensor,
    contexts: &[DenseTensor],
    rewards: &[f64],
    family: &GlmFamily,
) -> Result<DenseTensor> {
    Design::from_samples(contexts, rewards)?.gradient(family, theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mu_examples() {
        let lg = GlmFamily::logistic();
        assert_eq!(lg.mu(0.0), 0.5);
        assert!((lg.mu(3f64.ln()) - 0.75).abs() < 1e-15);
        assert_eq!(GlmFamily::poisson(1.0).mu(0.0), 1.0);
        assert_eq!(GlmFamily::gaussian(1.0).mu(-2.5), -2.5);
        assert!(lg.mu(-800.0) >= 0.0 && lg.mu(800.0) == 1.0);
    }

    #[test]
    fn cumulant_examples() {
        let lg = GlmFamily::logistic();
        assert!((lg.cumulant(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(GlmFamily::gaussian(1.0).cumulant(2.0), 2.0);
        let big = lg.cumulant(30.0);
        assert!((big - (30.0 + (-30f64).exp().ln_1p())).abs() < 1e-12);
        assert!(lg.cumulant(800.0).is_finite());
        assert!(lg.cumulant(-800.0) >= 0.0);
    }

    #[test]
    fn sampler_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let lg = GlmFamily::logistic();
        for _ in 0..1000 {
            assert_eq!(lg.sample_reward(-1e9, &mut rng), 0.0);
        }
        let g = GlmFamily::gaussian(0.0);
        assert_eq!(g.sample_reward(1.25, &mut rng), 1.25);
        let p = GlmFamily::poisson(1.0).sample_reward(0.5, &mut rng);
        assert!(p >= 0.0 && p.fract() == 0.0);
    }

    #[test]
    fn logistic_sample_mean_at_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let lg = GlmFamily::logistic();
        let n = 100_000;
        let mean = (0..n).map(|_| lg.sample_reward(0.0, &mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.005, "{mean}");
    }

    #[test]
    fn loss_examples() {
        let x = DenseTensor::from_vec(&[2], vec![1.0, -1.0]).unwrap();
        let zero = DenseTensor::zeros(&[2]).unwrap();
        let lg = GlmFamily::logistic();
        let l = glm_loss(&zero, std::slice::from_ref(&x), &[0.0], &lg).unwrap();
        assert!((l - 2f64.ln()).abs() < 1e-15);

        let ctx = vec![x.clone(), DenseTensor::from_vec(&[2], vec![0.5, 2.0]).unwrap()];
        let theta = DenseTensor::from_vec(&[2], vec![0.3, -0.2]).unwrap();
        let y = [1.0, 0.0];
        let once = glm_loss(&theta, &ctx, &y, &lg).unwrap();
        let doubled_ctx: Vec<_> = ctx.iter().chain(&ctx).cloned().collect();
        let twice = glm_loss(&theta, &doubled_ctx, &[1.0, 0.0, 1.0, 0.0], &lg).unwrap();
        assert!((once - twice).abs() < 1e-15);
    }

    #[test]
    fn loss_errors() {
        let lg = GlmFamily::logistic();
        let theta = DenseTensor::zeros(&[2]).unwrap();
        assert_eq!(glm_loss(&theta, &[], &[], &lg), Err(Error::EmptyData));
        let x = DenseTensor::zeros(&[3]).unwrap();
        assert!(matches!(glm_loss(&theta, std::slice::from_ref(&x), &[1.0], &lg), Err(Error::Shape(_))));
        assert!(matches!(glm_loss_gradient(&theta, &[x], &[1.0, 2.0], &lg), Err(Error::Shape(_))));
    }

    #[test]
    fn gradient_vanishes_at_half_rewards() {
        let lg = GlmFamily::logistic();
        let ctx = vec![
            DenseTensor::from_vec(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap(),
            DenseTensor::from_vec(&[2, 2], vec![-1.0, 0.5, 0.0, 2.0]).unwrap(),
        ];
        let g = glm_loss_gradient(&DenseTensor::zeros(&[2, 2]).unwrap(), &ctx, &[0.5, 0.5], &lg).unwrap();
        assert!(g.is_zero());
    }
}
