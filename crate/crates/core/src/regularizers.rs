//! Weakly decomposable norms used as penalties: value, dual norm, proximal
//! map, and the structural constants that feed the exploration length.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::tensor::{frob_norm, matricize, tensorize, DenseTensor, Matricization};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegularizerKind {
    /// Average of the nuclear norms of all mode unfoldings.
    OverlappedNuclear,
    /// Sum of nuclear norms of the slices spanned by `modes` (third-order only).
    SliceNuclear {
        #[serde(default = "default_slice_modes")]
        modes: [usize; 2],
    },
    EntryL1,
    /// Sum over mode-`mode` fibers of their `q`-norms.
    FiberGroup {
        #[serde(default)]
        mode: usize,
        #[serde(default = "default_q")]
        q: f64,
    },
}

fn default_slice_modes() -> [usize; 2] {
    [0, 1]
}

fn default_q() -> f64 {
    2.0
}

/// A penalty together with the structure parameters of the truth it targets:
/// `rank` for the nuclear kinds, `sparsity` for the sparse kinds (and the
/// number of nonzero slices for [`RegularizerKind::SliceNuclear`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizerSpec {
    #[serde(flatten)]
    pub kind: RegularizerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sparsity: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProxOptions {
    pub max_iters: usize,
    pub tol: f64,
    /// ADMM penalty parameter of the overlapped-nuclear consensus solver.
    pub penalty: f64,
}

impl Default for ProxOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            tol: 1e-8,
            penalty: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProxOutcome {
    pub point: DenseTensor,
    pub iterations: usize,
    /// Zero for closed forms.
    pub residual: f64,
    pub converged: bool,
}

/// Splitting variables of the consensus solver, reusable across calls with
/// nearby inputs.
#[derive(Debug, Clone, Default)]
pub struct ConsensusWarmStart {
    parts: Vec<DenseTensor>,
    duals: Vec<DenseTensor>,
}

/// `η(x, m) = max{1, x^m}`
pub fn eta(x: f64, m: f64) -> f64 {
    x.powf(m).max(1.0)
}

impl RegularizerSpec {
    pub fn new(kind: RegularizerKind) -> Self {
        Self {
            kind,
            rank: None,
            sparsity: None,
        }
    }

    pub fn overlapped_nuclear(rank: usize) -> Self {
        Self {
            rank: Some(rank),
            ..Self::new(RegularizerKind::OverlappedNuclear)
        }
    }

    pub fn slice_nuclear(rank: usize, nonzero_slices: usize) -> Self {
        Self {
            rank: Some(rank),
            sparsity: Some(nonzero_slices),
            ..Self::new(RegularizerKind::SliceNuclear { modes: [0, 1] })
        }
    }

    pub fn entry_l1(sparsity: usize) -> Self {
        Self {
            sparsity: Some(sparsity),
            ..Self::new(RegularizerKind::EntryL1)
        }
    }

    pub fn fiber_group(mode: usize, q: f64, sparsity: usize) -> Self {
        Self {
            sparsity: Some(sparsity),
            ..Self::new(RegularizerKind::FiberGroup { mode, q })
        }
    }

    /// Weak-decomposability constant `c_R`.
    pub fn c_r(&self) -> f64 {
        match self.kind {
            RegularizerKind::OverlappedNuclear => 0.5,
            _ => 1.0,
        }
    }

    /// `(c_R + 3) / (2 c_R)`
    pub fn alpha(&self) -> f64 {
        let c = self.c_r();
        (c + 3.0) / (2.0 * c)
    }

    /// Checks that a tensor shape is admissible for this penalty.
    pub fn check_dims(&self, dims: &[usize]) -> Result<()> {
        match self.kind {
            RegularizerKind::OverlappedNuclear | RegularizerKind::EntryL1 => Ok(()),
            RegularizerKind::SliceNuclear { modes } => {
                if dims.len() != 3 {
                    return Err(Error::Shape(format!(
                        "slice nuclear norm needs a third-order tensor, got dims {dims:?}"
                    )));
                }
                if modes[0] == modes[1] || modes[0] > 2 || modes[1] > 2 {
                    return Err(Error::InvalidParameter(format!(
                        "slice modes {modes:?} must be two distinct modes of 0..3"
                    )));
                }
                Ok(())
            }
            RegularizerKind::FiberGroup { mode, q } => {
                if dims.len() != 3 {
                    return Err(Error::Shape(format!(
                        "fiber group norm needs a third-order tensor, got dims {dims:?}"
                    )));
                }
                if mode >= 3 {
                    return Err(Error::ModeOutOfRange { mode, order: 3 });
                }
                if !(q > 1.0) || !q.is_finite() {
                    return Err(Error::InvalidParameter(format!("fiber norm needs finite q > 1, got {q}")));
                }
                Ok(())
            }
        }
    }

    pub fn value(&self, a: &DenseTensor) -> Result<f64> {
        self.check_dims(a.dims())?;
        Ok(match self.kind {
            RegularizerKind::OverlappedNuclear => {
                let n = a.order();
                let mut total = 0.0;
                for j in 0..n {
                    total += linalg::nuclear_norm(&matricize(a, j)?.matrix);
                }
                total / n as f64
            }
            RegularizerKind::SliceNuclear { modes } => slices(a, modes)
                .iter()
                .map(linalg::nuclear_norm)
                .sum(),
            RegularizerKind::EntryL1 => a.data().iter().map(|v| v.abs()).sum(),
            RegularizerKind::FiberGroup { mode, q } => fibers(a, mode)
                .map(|f| lp_norm(&f, q))
                .sum(),
        })
    }

    pub fn dual(&self, a: &DenseTensor) -> Result<f64> {
        self.check_dims(a.dims())?;
        Ok(match self.kind {
            RegularizerKind::OverlappedNuclear => {
                let n = a.order();
                let mut worst: f64 = 0.0;
                for j in 0..n {
                    worst = worst.max(linalg::spectral_norm(&matricize(a, j)?.matrix));
                }
                n as f64 * worst
            }
            RegularizerKind::SliceNuclear { modes } => slices(a, modes)
                .iter()
                .map(linalg::spectral_norm)
                .fold(0.0, f64::max),
            RegularizerKind::EntryL1 => a.max_abs(),
            RegularizerKind::FiberGroup { mode, q } => {
                let p = q / (q - 1.0);
                fibers(a, mode).map(|f| lp_norm(&f, p)).fold(0.0, f64::max)
            }
        })
    }

    /// `argmin_z tau·R(z) + ½‖z − a‖²`; fails if the iterative solver of the
    /// overlapped norm stops short of `opts.tol`.
    pub fn prox(&self, a: &DenseTensor, tau: f64, opts: &ProxOptions) -> Result<DenseTensor> {
        let out = self.prox_report(a, tau, opts, None)?;
        if !out.converged {
            return Err(Error::Convergence {
                iterations: out.iterations,
                residual: out.residual,
            });
        }
        Ok(out.point)
    }

    /// Like [`prox`](Self::prox) but reports non-convergence instead of
    /// failing, and optionally warm-starts the consensus solver.
    pub fn prox_report(
        &self,
        a: &DenseTensor,
        tau: f64,
        opts: &ProxOptions,
        warm: Option<&mut ConsensusWarmStart>,
    ) -> Result<ProxOutcome> {
        self.check_dims(a.dims())?;
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidParameter(format!("prox weight must be positive, got {tau}")));
        }
        let closed = |point| ProxOutcome {
            point,
            iterations: 0,
            residual: 0.0,
            converged: true,
        };
        match self.kind {
            RegularizerKind::EntryL1 => Ok(closed(a.map(|v| soft_threshold(v, tau)))),
            RegularizerKind::SliceNuclear { modes } => {
                let mut out = a.clone();
                let shrunk: Vec<_> = slices(a, modes)
                    .iter()
                    .map(|s| linalg::singular_value_threshold(s, tau))
                    .collect();
                write_slices(&mut out, modes, &shrunk);
                Ok(closed(out))
            }
            RegularizerKind::FiberGroup { mode, q } => {
                if q != 2.0 {
                    return Err(Error::Unsupported(format!(
                        "proximal map of the fiber norm is only available for q = 2 (got {q})"
                    )));
                }
                let mut out = a.clone();
                let (before, dn, after) = strides(a.dims(), mode);
                let data = out.data_mut();
                for k in 0..after {
                    for j in 0..before {
                        let base = k * dn * before + j;
                        let norm = (0..dn)
                            .map(|i| data[base + i * before].powi(2))
                            .sum::<f64>()
                            .sqrt();
                        let factor = if norm > tau { 1.0 - tau / norm } else { 0.0 };
                        for i in 0..dn {
                            data[base + i * before] *= factor;
                        }
                    }
                }
                Ok(closed(out))
            }
            RegularizerKind::OverlappedNuclear => consensus_prox(a, tau, opts, warm),
        }
    }

    /// Compatibility constant `φ` of the structure subspace.
    pub fn compatibility_phi(&self, dims: &[usize]) -> Result<f64> {
        self.check_dims(dims)?;
        match self.kind {
            RegularizerKind::OverlappedNuclear | RegularizerKind::SliceNuclear { .. } => {
                let r = self.rank.ok_or(Error::MissingParameter("rank"))?;
                Ok(2.0 * r as f64)
            }
            RegularizerKind::EntryL1 => {
                let s = self.sparsity.ok_or(Error::MissingParameter("sparsity"))?;
                Ok(s as f64)
            }
            RegularizerKind::FiberGroup { mode, q } => {
                let s = self.sparsity.ok_or(Error::MissingParameter("sparsity"))?;
                let d1 = dims[mode] as f64;
                Ok(eta(d1, 1.0 / q - 0.5).powi(2) * s as f64)
            }
        }
    }
}

pub fn soft_threshold(v: f64, tau: f64) -> f64 {
    if v > tau {
        v - tau
    } else if v < -tau {
        v + tau
    } else {
        0.0
    }
}

fn lp_norm(v: &[f64], p: f64) -> f64 {
    if p == 2.0 {
        return v.iter().map(|x| x * x).sum::<f64>().sqrt();
    }
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    scale * v.iter().map(|x| (x.abs() / scale).powf(p)).sum::<f64>().powf(1.0 / p)
}

fn strides(dims: &[usize], mode: usize) -> (usize, usize, usize) {
    let before: usize = dims[..mode].iter().product();
    let after: usize = dims[mode + 1..].iter().product();
    (before, dims[mode], after)
}

/// Mode-`mode` fibers in storage order of their base index.
fn fibers(a: &DenseTensor, mode: usize) -> impl Iterator<Item = Vec<f64>> + '_ {
    let (before, dn, after) = strides(a.dims(), mode);
    let data = a.data();
    (0..after).flat_map(move |k| {
        (0..before).map(move |j| {
            let base = k * dn * before + j;
            (0..dn).map(|i| data[base + i * before]).collect()
        })
    })
}

fn slice_layout(dims: &[usize], modes: [usize; 2]) -> ([usize; 3], [usize; 3]) {
    let third = 3 - modes[0] - modes[1];
    let stride = [1, dims[0], dims[0] * dims[1]];
    (
        [dims[modes[0]], dims[modes[1]], dims[third]],
        [stride[modes[0]], stride[modes[1]], stride[third]],
    )
}

/// Matrices `Θ[.., .., k]` spanned by `modes`, indexed by the remaining mode.
pub(crate) fn slices(a: &DenseTensor, modes: [usize; 2]) -> Vec<nalgebra::DMatrix<f64>> {
    let ([rows, cols, count], [sr, sc, sk]) = slice_layout(a.dims(), modes);
    let data = a.data();
    (0..count)
        .map(|k| nalgebra::DMatrix::from_fn(rows, cols, |i, j| data[i * sr + j * sc + k * sk]))
        .collect()
}

pub(crate) fn write_slices(a: &mut DenseTensor, modes: [usize; 2], mats: &[nalgebra::DMatrix<f64>]) {
    let ([rows, cols, count], [sr, sc, sk]) = slice_layout(a.dims(), modes);
    let data = a.data_mut();
    for k in 0..count {
        for j in 0..cols {
            for i in 0..rows {
                data[i * sr + j * sc + k * sk] = mats[k][(i, j)];
            }
        }
    }
}

// Consensus ADMM for τ·(1/N)Σ_j ‖M_j(z)‖_* + ½‖z − a‖²: one copy z_j per mode
// constrained to z_j = z. Scaled duals u_j.
fn consensus_prox(
    a: &DenseTensor,
    tau: f64,
    opts: &ProxOptions,
    warm: Option<&mut ConsensusWarmStart>,
) -> Result<ProxOutcome> {
    let order = a.order();
    let rho = opts.penalty;
    if !(rho > 0.0) {
        return Err(Error::InvalidParameter(format!("ADMM penalty must be positive, got {rho}")));
    }
    let mut local = ConsensusWarmStart::default();
    let state = warm.unwrap_or(&mut local);
    if state.parts.len() != order || state.parts[0].dims() != a.dims() {
        state.parts = vec![a.clone(); order];
        state.duals = vec![DenseTensor::zeros(a.dims())?; order];
    }
    let threshold = tau / (order as f64 * rho);
    let mut z = state.parts[0].clone();
    let mut residual = f64::INFINITY;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        iterations += 1;
        for j in 0..order {
            let target = z.sub(&state.duals[j])?;
            let m = matricize(&target, j)?;
            let shrunk = Matricization {
                mode: j,
                matrix: linalg::singular_value_threshold(&m.matrix, threshold),
            };
            state.parts[j] = tensorize(&shrunk, a.dims())?;
        }
        let mut next = a.clone();
        for j in 0..order {
            next.axpy(rho, &state.parts[j])?;
            next.axpy(rho, &state.duals[j])?;
        }
        next = next.scale(1.0 / (1.0 + order as f64 * rho));

        let mut primal: f64 = 0.0;
        for j in 0..order {
            let gap = state.parts[j].sub(&next)?;
            primal = primal.max(frob_norm(&gap));
            state.duals[j].axpy(1.0, &gap)?;
        }
        let change = frob_norm(&next.sub(&z)?);
        z = next;
        residual = change.max(primal);
        if residual < opts.tol {
            break;
        }
    }
    Ok(ProxOutcome {
        point: z,
        iterations,
        converged: residual < opts.tol,
        residual,
    })
}
