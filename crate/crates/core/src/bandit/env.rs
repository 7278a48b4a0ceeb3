use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Seeds;
use crate::error::{Error, Result};
use crate::glm::GlmFamily;
use crate::linalg;
use crate::regularizers::{slices, RegularizerKind, RegularizerSpec};
use crate::tensor::{frob_norm, hosvd_truncate, matricize, DenseTensor};

/// A stochastic context source with a fixed true parameter.
pub trait Environment {
    fn dims(&self) -> &[usize];
    fn arms(&self) -> usize;
    fn horizon(&self) -> usize;
    fn family(&self) -> &GlmFamily;
    fn theta_star(&self) -> &DenseTensor;
    fn seeds(&self) -> Seeds;
    /// Overwrites `out` (`arms × ∏dims`, one context per row) with a fresh
    /// context set.
    fn sample_contexts(&self, rng: &mut ChaCha8Rng, out: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextDistribution {
    /// Gaussian tensors rescaled to unit Frobenius norm.
    #[default]
    UnitSphere,
    /// Raw i.i.d. standard normal entries.
    StandardGaussian,
}

impl ContextDistribution {
    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, row: &mut [f64]) {
        for v in row.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        if *self == ContextDistribution::UnitSphere {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|v| *v /= norm);
            }
        }
    }
}

/// `arms` independent contexts drawn uniformly from the unit Frobenius sphere.
pub fn gen_context_set<R: Rng + ?Sized>(arms: usize, dims: &[usize], rng: &mut R) -> Result<Vec<DenseTensor>> {
    let len = DenseTensor::zeros(dims)?.len();
    (0..arms)
        .map(|_| {
            let mut row = vec![0.0; len];
            ContextDistribution::UnitSphere.fill(rng, &mut row);
            DenseTensor::from_vec(dims, row)
        })
        .collect()
}

fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

fn normalize(t: DenseTensor) -> Result<DenseTensor> {
    let norm = frob_norm(&t);
    if norm == 0.0 {
        return Err(Error::InvalidParameter("generated parameter is zero".into()));
    }
    Ok(t.scale(1.0 / norm))
}

fn numerical_rank(m: &nalgebra::DMatrix<f64>) -> usize {
    linalg::singular_values(m).iter().filter(|&&s| s > 1e-8).count()
}

/// Checks that `theta` has the structure `spec` declares (ranks, nonzero
/// slice/entry/fiber counts).
pub fn verify_structure(spec: &RegularizerSpec, theta: &DenseTensor) -> Result<()> {
    spec.check_dims(theta.dims())?;
    let fail = |msg: String| Err(Error::InvalidParameter(msg));
    match spec.kind {
        RegularizerKind::OverlappedNuclear => {
            let r = spec.rank.ok_or(Error::MissingParameter("rank"))?;
            for n in 0..theta.order() {
                let got = numerical_rank(&matricize(theta, n)?.matrix);
                if got > r {
                    return fail(format!("mode-{n} unfolding has rank {got} > {r}"));
                }
            }
        }
        RegularizerKind::SliceNuclear { modes } => {
            let r = spec.rank.ok_or(Error::MissingParameter("rank"))?;
            let s = spec.sparsity.ok_or(Error::MissingParameter("sparsity"))?;
            let mut nonzero = 0;
            for m in slices(theta, modes) {
                if m.iter().any(|&v| v != 0.0) {
                    nonzero += 1;
                    let got = numerical_rank(&m);
                    if got > r {
                        return fail(format!("slice has rank {got} > {r}"));
                    }
                }
            }
            if nonzero != s {
                return fail(format!("{nonzero} nonzero slices, expected {s}"));
            }
        }
        RegularizerKind::EntryL1 => {
            let s = spec.sparsity.ok_or(Error::MissingParameter("sparsity"))?;
            let nonzero = theta.data().iter().filter(|&&v| v != 0.0).count();
            if nonzero != s {
                return fail(format!("{nonzero} nonzero entries, expected {s}"));
            }
        }
        RegularizerKind::FiberGroup { mode, .. } => {
            let s = spec.sparsity.ok_or(Error::MissingParameter("sparsity"))?;
            let nonzero = count_nonzero_fibers(theta, mode);
            if nonzero != s {
                return fail(format!("{nonzero} nonzero fibers, expected {s}"));
            }
        }
    }
    Ok(())
}

fn fiber_layout(dims: &[usize], mode: usize) -> (usize, usize, usize) {
    let before: usize = dims[..mode].iter().product();
    let after: usize = dims[mode + 1..].iter().product();
    (before, dims[mode], after)
}

fn count_nonzero_fibers(theta: &DenseTensor, mode: usize) -> usize {
    let (before, dn, after) = fiber_layout(theta.dims(), mode);
    let data = theta.data();
    (0..after * before)
        .filter(|&f| {
            let (k, j) = (f / before, f % before);
            (0..dn).any(|i| data[k * dn * before + j + i * before] != 0.0)
        })
        .count()
}

/// Draws a unit-Frobenius-norm truth with the structure of `spec`:
/// HOSVD-projected Gaussian (overlapped), `s` random rank-`r` slices,
/// `s` Uniform(0, 1] entries, or `s` Gaussian fibers.
pub fn gen_true_parameter<R: Rng + ?Sized>(spec: &RegularizerSpec, dims: &[usize], rng: &mut R) -> Result<DenseTensor> {
    spec.check_dims(dims)?;
    let len: usize = DenseTensor::zeros(dims)?.len();
    let theta = match spec.kind {
        RegularizerKind::OverlappedNuclear => {
            let r = spec.rank.ok_or(Error::MissingParameter("rank"))?;
            let min_dim = *dims.iter().min().expect("non-empty");
            if r == 0 || r > min_dim {
                return Err(Error::InvalidParameter(format!("rank {r} must lie in [1, {min_dim}]")));
            }
            let g = DenseTensor::from_vec(dims, gaussian_vec(rng, len))?;
            hosvd_truncate(&g, &vec![r; dims.len()])?
        }
        RegularizerKind::SliceNuclear { modes } => {
            let r = spec.rank.ok_or(Error::MissingParameter("rank"))?;
            let s = spec.sparsity.ok_or(Error::MissingParameter("sparsity"))?;
            let (rows, cols) = (dims[modes[0]], dims[modes[1]]);
            let count = dims[3 - modes[0] - modes[1]];
            if r == 0 || r > rows.min(cols) {
                return Err(Error::InvalidParameter(format!("slice rank {r} must lie in [1, {}]", rows.min(cols))));
            }
            if s == 0 || s > count {
                return Err(Error::InvalidParameter(format!("{s} nonzero slices requested out of {count}")));
            }
            let chosen = sample_indices(rng, count, s).into_vec();
            let mut mats = vec![nalgebra::DMatrix::zeros(rows, cols); count];
            for k in chosen {
                let left = nalgebra::DMatrix::from_vec(rows, r, gaussian_vec(rng, rows * r));
                let right = nalgebra::DMatrix::from_vec(cols, r, gaussian_vec(rng, cols * r));
                mats[k] = left * right.transpose();
            }
            let mut t = DenseTensor::zeros(dims)?;
            crate::regularizers::write_slices(&mut t, modes, &mats);
            t
        }
        RegularizerKind::EntryL1 => {
            let s = spec.sparsity.ok_or(Error::MissingParameter("sparsity"))?;
            if s == 0 || s > len {
                return Err(Error::InvalidParameter(format!("{s} nonzero entries requested out of {len}")));
            }
            let mut data = vec![0.0; len];
            for i in sample_indices(rng, len, s) {
                // (0, 1]
                data[i] = 1.0 - rng.random::<f64>();
            }
            DenseTensor::from_vec(dims, data)?
        }
        RegularizerKind::FiberGroup { mode, .. } => {
            let s = spec.sparsity.ok_or(Error::MissingParameter("sparsity"))?;
            let (before, dn, after) = fiber_layout(dims, mode);
            let count = before * after;
            if s == 0 || s > count {
                return Err(Error::InvalidParameter(format!("{s} nonzero fibers requested out of {count}")));
            }
            let mut data = vec![0.0; len];
            for f in sample_indices(rng, count, s) {
                let (k, j) = (f / before, f % before);
                for i in 0..dn {
                    data[k * dn * before + j + i * before] = StandardNormal.sample(rng);
                }
            }
            DenseTensor::from_vec(dims, data)?
        }
    };
    let theta = normalize(theta)?;
    verify_structure(spec, &theta)?;
    Ok(theta)
}

/// Tensor environment: structured unit-norm truth, i.i.d. context sets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BanditInstance {
    pub dims: Vec<usize>,
    pub structure: RegularizerSpec,
    pub arms: usize,
    pub horizon: usize,
    pub family: GlmFamily,
    pub contexts: ContextDistribution,
    pub theta_star: DenseTensor,
    pub seeds: Seeds,
}

impl BanditInstance {
    /// Draws the truth from `seeds.truth`.
    pub fn generate(
        structure: RegularizerSpec,
        dims: &[usize],
        arms: usize,
        horizon: usize,
        family: GlmFamily,
        contexts: ContextDistribution,
        seeds: Seeds,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seeds.truth);
        let theta_star = gen_true_parameter(&structure, dims, &mut rng)?;
        Self::with_truth(structure, theta_star, arms, horizon, family, contexts, seeds)
    }

    pub fn with_truth(
        structure: RegularizerSpec,
        theta_star: DenseTensor,
        arms: usize,
        horizon: usize,
        family: GlmFamily,
        contexts: ContextDistribution,
        seeds: Seeds,
    ) -> Result<Self> {
        if arms == 0 {
            return Err(Error::InvalidParameter("need at least one arm".into()));
        }
        if horizon < 2 {
            return Err(Error::InvalidParameter(format!("horizon must be at least 2, got {horizon}")));
        }
        if frob_norm(&theta_star) > 1.0 + 1e-12 {
            return Err(Error::InvalidParameter("true parameter must have Frobenius norm at most 1".into()));
        }
        Ok(Self {
            dims: theta_star.dims().to_vec(),
            structure,
            arms,
            horizon,
            family,
            contexts,
            theta_star,
            seeds,
        })
    }
}

impl Environment for BanditInstance {
    fn dims(&self) -> &[usize] {
        &self.dims
    }

    fn arms(&self) -> usize {
        self.arms
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn family(&self) -> &GlmFamily {
        &self.family
    }

    fn theta_star(&self) -> &DenseTensor {
        &self.theta_star
    }

    fn seeds(&self) -> Seeds {
        self.seeds
    }

    fn sample_contexts(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        let p = self.theta_star.len();
        for row in out.chunks_exact_mut(p) {
            self.contexts.fill(rng, row);
        }
    }
}

/// Sparse linear bandit with equicorrelated arms: every feature column of
/// the `arms × dim` context matrix is `N(0, V)` with unit variances and
/// cross-arm covariance `rho2`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LassoEnvironment {
    pub arms: usize,
    pub dim: usize,
    pub rho2: f64,
    pub horizon: usize,
    pub family: GlmFamily,
    pub theta_star: DenseTensor,
    pub seeds: Seeds,
}

/// Truth with `sparsity` Uniform(0, 1] entries (not normalized), Gaussian
/// rewards with standard deviation `noise`.
pub fn gen_lasso_comparison_env(
    arms: usize,
    dim: usize,
    sparsity: usize,
    rho2: f64,
    noise: f64,
    horizon: usize,
    seeds: Seeds,
) -> Result<LassoEnvironment> {
    if !(0.0..1.0).contains(&rho2) {
        return Err(Error::InvalidParameter(format!("rho2 must lie in [0, 1), got {rho2}")));
    }
    if arms == 0 || dim == 0 || horizon < 2 {
        return Err(Error::InvalidParameter("arms, dim must be positive and horizon at least 2".into()));
    }
    if sparsity == 0 || sparsity > dim {
        return Err(Error::InvalidParameter(format!("sparsity {sparsity} must lie in [1, {dim}]")));
    }
    if !(noise >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise must be non-negative, got {noise}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seeds.truth);
    let mut theta = vec![0.0; dim];
    for i in sample_indices(&mut rng, dim, sparsity) {
        theta[i] = 1.0 - rng.random::<f64>();
    }
    Ok(LassoEnvironment {
        arms,
        dim,
        rho2,
        horizon,
        family: GlmFamily::gaussian(noise),
        theta_star: DenseTensor::from_vec(&[dim], theta)?,
        seeds,
    })
}

impl Environment for LassoEnvironment {
    fn dims(&self) -> &[usize] {
        self.theta_star.dims()
    }

    fn arms(&self) -> usize {
        self.arms
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn family(&self) -> &GlmFamily {
        &self.family
    }

    fn theta_star(&self) -> &DenseTensor {
        &self.theta_star
    }

    fn seeds(&self) -> Seeds {
        self.seeds
    }

    fn sample_contexts(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        let shared = self.rho2.sqrt();
        let own = (1.0 - self.rho2).sqrt();
        let d = self.dim;
        for j in 0..d {
            let common: f64 = StandardNormal.sample(rng);
            for i in 0..self.arms {
                let e: f64 = StandardNormal.sample(rng);
                out[i * d + j] = shared * common + own * e;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infeasible_parameters_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(gen_true_parameter(&RegularizerSpec::overlapped_nuclear(4), &[3, 3, 3], &mut rng).is_err());
        assert!(gen_true_parameter(&RegularizerSpec::slice_nuclear(1, 5), &[3, 3, 4], &mut rng).is_err());
        assert!(gen_true_parameter(&RegularizerSpec::entry_l1(28), &[3, 3, 3], &mut rng).is_err());
        assert!(gen_true_parameter(&RegularizerSpec::fiber_group(0, 2.0, 10), &[3, 3, 3], &mut rng).is_err());
        assert!(gen_lasso_comparison_env(10, 5, 2, 1.0, 0.05, 10, Seeds::derive(1)).is_err());
        assert!(gen_lasso_comparison_env(10, 5, 6, 0.5, 0.05, 10, Seeds::derive(1)).is_err());
    }

    #[test]
    fn instance_rejects_large_truth() {
        let theta = DenseTensor::filled(&[2, 2], 1.0).unwrap();
        let r = BanditInstance::with_truth(
            RegularizerSpec::entry_l1(4),
            theta,
            3,
            10,
            GlmFamily::logistic(),
            ContextDistribution::UnitSphere,
            Seeds::derive(0),
        );
        assert!(r.is_err());
    }

    #[test]
    fn lasso_truth_has_unit_interval_support() {
        let env = gen_lasso_comparison_env(10, 50, 5, 0.3, 0.05, 10, Seeds::derive(3)).unwrap();
        let nz: Vec<f64> = env.theta_star.data().iter().copied().filter(|&v| v != 0.0).collect();
        assert_eq!(nz.len(), 5);
        assert!(nz.iter().all(|&v| v > 0.0 && v <= 1.0));
    }
}
