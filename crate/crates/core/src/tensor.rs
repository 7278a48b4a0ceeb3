//! Dense N-order tensors and the multilinear operations built on them.
//!
//! Storage is a flat `Vec<f64>` in mode-0-fastest order: the entry at index
//! tuple `(i_0, i_1, .., i_{N-1})` lives at
//! `i_0 + d_0 * (i_1 + d_1 * (i_2 + ..))`. This is the column-major
//! generalization, and every unfolding in this module is defined relative to it.
//!
//! Modes are numbered from zero throughout the crate.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

fn check_dims(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() {
        return Err(Error::Shape("a tensor needs at least one mode".into()));
    }
    if let Some(pos) = dims.iter().position(|&d| d == 0) {
        return Err(Error::Shape(format!("dimension of mode {pos} is zero")));
    }
    Ok(dims.iter().product())
}

impl DenseTensor {
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        let len = check_dims(dims)?;
        Ok(Self {
            dims: dims.to_vec(),
            data: vec![0.0; len],
        })
    }

    pub fn filled(dims: &[usize], value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::NonFinite);
        }
        let len = check_dims(dims)?;
        Ok(Self {
            dims: dims.to_vec(),
            data: vec![value; len],
        })
    }

    /// Wraps `data` (mode-0-fastest) as a tensor of shape `dims`.
    pub fn from_vec(dims: &[usize], data: Vec<f64>) -> Result<Self> {
        let len = check_dims(dims)?;
        if data.len() != len {
            return Err(Error::Shape(format!(
                "{} values do not fill dims {:?} ({} entries)",
                data.len(),
                dims,
                len
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            dims: dims.to_vec(),
            data,
        })
    }

    /// Builds a tensor by evaluating `f` at every index tuple.
    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let len = check_dims(dims)?;
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0usize; dims.len()];
        for _ in 0..len {
            data.push(f(&idx));
            for (i, d) in idx.iter_mut().zip(dims) {
                *i += 1;
                if *i < *d {
                    break;
                }
                *i = 0;
            }
        }
        Self::from_vec(dims, data)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        let mut lin = 0;
        for (i, d) in idx.iter().zip(&self.dims).rev() {
            debug_assert!(i < d);
            lin = lin * d + i;
        }
        lin
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.linear_index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        let lin = self.linear_index(idx);
        self.data[lin] = value;
    }

    fn same_dims(&self, other: &Self) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::Shape(format!(
                "dims {:?} and {:?} differ",
                self.dims, other.dims
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_dims(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Self {
            dims: self.dims.clone(),
            data,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_dims(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self {
            dims: self.dims.clone(),
            data,
        })
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            dims: self.dims.clone(),
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &Self) -> Result<()> {
        self.same_dims(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }
}

/// Sum of elementwise products.
pub fn inner(a: &DenseTensor, b: &DenseTensor) -> Result<f64> {
    a.same_dims(b)?;
    Ok(dot(&a.data, &b.data))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn frob_norm(a: &DenseTensor) -> f64 {
    dot(&a.data, &a.data).sqrt()
}

/// Flat copy in the storage order, so `inner(a, b) == dot(vectorize(a), vectorize(b))`.
pub fn vectorize(a: &DenseTensor) -> Vec<f64> {
    a.data.clone()
}

/// Mode-`n` unfolding `M_n(A)`.
///
/// Row `i` collects every entry whose mode-`n` index is `i`. Columns run over
/// the remaining modes in increasing order, the lowest remaining mode fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Matricization {
    pub mode: usize,
    pub matrix: DMatrix<f64>,
}

impl Matricization {
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }
}

fn check_mode(order: usize, mode: usize) -> Result<()> {
    if mode >= order {
        return Err(Error::ModeOutOfRange { mode, order });
    }
    Ok(())
}

// Strides of the storage layout: `before` entries per step along mode n,
// `dn * before` per step of the trailing block.
fn unfold_strides(dims: &[usize], mode: usize) -> (usize, usize, usize) {
    let before: usize = dims[..mode].iter().product();
    let after: usize = dims[mode + 1..].iter().product();
    (before, dims[mode], after)
}

pub fn matricize(a: &DenseTensor, mode: usize) -> Result<Matricization> {
    check_mode(a.order(), mode)?;
    let (before, dn, after) = unfold_strides(&a.dims, mode);
    let cols = before * after;
    let mut m = DMatrix::<f64>::zeros(dn, cols);
    for k in 0..after {
        for i in 0..dn {
            let src = &a.data[(k * dn + i) * before..(k * dn + i + 1) * before];
            for (j, v) in src.iter().enumerate() {
                m[(i, k * before + j)] = *v;
            }
        }
    }
    Ok(Matricization { mode, matrix: m })
}

/// Inverse of [`matricize`].
pub fn tensorize(m: &Matricization, dims: &[usize]) -> Result<DenseTensor> {
    let len = check_dims(dims)?;
    check_mode(dims.len(), m.mode)?;
    let (before, dn, after) = unfold_strides(dims, m.mode);
    if m.rows() != dn || m.cols() != before * after {
        return Err(Error::Shape(format!(
            "{}x{} unfolding is inconsistent with dims {:?} at mode {}",
            m.rows(),
            m.cols(),
            dims,
            m.mode
        )));
    }
    let mut data = vec![0.0; len];
    for k in 0..after {
        for i in 0..dn {
            let dst = &mut data[(k * dn + i) * before..(k * dn + i + 1) * before];
            for (j, v) in dst.iter_mut().enumerate() {
                *v = m.matrix[(i, k * before + j)];
            }
        }
    }
    DenseTensor::from_vec(dims, data)
}

/// `A ×_n B` for `B` of shape `d_n' × d_n`.
pub fn mode_product(a: &DenseTensor, b: &DMatrix<f64>, mode: usize) -> Result<DenseTensor> {
    check_mode(a.order(), mode)?;
    if b.ncols() != a.dims[mode] {
        return Err(Error::Shape(format!(
            "matrix with {} columns cannot act on mode {} of size {}",
            b.ncols(),
            mode,
            a.dims[mode]
        )));
    }
    let unfolded = matricize(a, mode)?;
    let product = Matricization {
        mode,
        matrix: b * &unfolded.matrix,
    };
    let mut dims = a.dims.clone();
    dims[mode] = b.nrows();
    tensorize(&product, &dims)
}

/// Truncated higher-order SVD: projects every mode onto the top `ranks[n]`
/// left singular vectors of `M_n(a)`.
pub fn hosvd_truncate(a: &DenseTensor, ranks: &[usize]) -> Result<DenseTensor> {
    if ranks.len() != a.order() {
        return Err(Error::Shape(format!(
            "{} ranks given for a tensor of order {}",
            ranks.len(),
            a.order()
        )));
    }
    for (n, (&r, &d)) in ranks.iter().zip(&a.dims).enumerate() {
        if r == 0 || r > d {
            return Err(Error::InvalidParameter(format!(
                "rank {r} for mode {n} must lie in [1, {d}]"
            )));
        }
    }
    let factors = ranks
        .iter()
        .enumerate()
        .map(|(n, &r)| {
            let m = matricize(a, n)?;
            Ok(linalg::left_singular_vectors(&m.matrix, r))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut core = a.clone();
    for (n, u) in factors.iter().enumerate() {
        core = mode_product(&core, &u.transpose(), n)?;
    }
    let mut out = core;
    for (n, u) in factors.iter().enumerate() {
        out = mode_product(&out, u, n)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(dims: &[usize]) -> DenseTensor {
        let len: usize = dims.iter().product();
        DenseTensor::from_vec(dims, (0..len).map(|v| v as f64 + 1.0).collect()).unwrap()
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(DenseTensor::zeros(&[]).is_err());
        assert!(DenseTensor::zeros(&[2, 0]).is_err());
        assert!(DenseTensor::from_vec(&[2, 2], vec![1.0; 3]).is_err());
        assert_eq!(
            DenseTensor::from_vec(&[2], vec![1.0, f64::NAN]),
            Err(Error::NonFinite)
        );
    }

    #[test]
    fn inner_examples() {
        let ones = DenseTensor::filled(&[2, 2, 2], 1.0).unwrap();
        assert_eq!(inner(&ones, &ones).unwrap(), 8.0);
        let zero = DenseTensor::zeros(&[2, 2, 2]).unwrap();
        assert_eq!(inner(&ones, &zero).unwrap(), 0.0);
        // [1,2;3,4] and [5,6;7,8] as 2x2x1
        let a = DenseTensor::from_fn(&[2, 2, 1], |i| [[1.0, 2.0], [3.0, 4.0]][i[0]][i[1]]).unwrap();
        let b = DenseTensor::from_fn(&[2, 2, 1], |i| [[5.0, 6.0], [7.0, 8.0]][i[0]][i[1]]).unwrap();
        assert_eq!(inner(&a, &b).unwrap(), 70.0);
        assert!(inner(&a, &ones).is_err());
    }

    #[test]
    fn frob_examples() {
        assert_eq!(frob_norm(&DenseTensor::zeros(&[3, 4]).unwrap()), 0.0);
        assert_eq!(frob_norm(&DenseTensor::filled(&[3, 3], 1.0).unwrap()), 3.0);
        assert_eq!(frob_norm(&DenseTensor::from_vec(&[2], vec![3.0, 4.0]).unwrap()), 5.0);
    }

    #[test]
    fn storage_order_is_mode0_fastest() {
        let t = seq(&[2, 3, 4]);
        assert_eq!(t.get(&[1, 0, 0]), 2.0);
        assert_eq!(t.get(&[0, 1, 0]), 3.0);
        assert_eq!(t.get(&[0, 0, 1]), 7.0);
        let eye = DenseTensor::from_fn(&[2, 2], |i| if i[0] == i[1] { 1.0 } else { 0.0 }).unwrap();
        assert_eq!(vectorize(&eye), vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn matricize_matrix_cases() {
        let a = DenseTensor::from_fn(&[2, 3], |i| (10 * i[0] + i[1]) as f64).unwrap();
        let m0 = matricize(&a, 0).unwrap().matrix;
        let m1 = matricize(&a, 1).unwrap().matrix;
        let expected = DMatrix::from_fn(2, 3, |r, c| (10 * r + c) as f64);
        assert_eq!(m0, expected);
        assert_eq!(m1, expected.transpose());
        assert!(matches!(
            matricize(&a, 2),
            Err(Error::ModeOutOfRange { mode: 2, order: 2 })
        ));
    }

    #[test]
    fn unfolding_column_order() {
        // column index of (i0, i2) in M_1 of a 2x3x4 tensor is i0 + 2*i2
        let t = seq(&[2, 3, 4]);
        let m = matricize(&t, 1).unwrap().matrix;
        assert_eq!(m[(2, 1 + 2 * 3)], t.get(&[1, 2, 3]));
    }

    #[test]
    fn tensorize_roundtrip_degenerate_mode() {
        let t = seq(&[5, 1, 5]);
        for n in 0..3 {
            let back = tensorize(&matricize(&t, n).unwrap(), t.dims()).unwrap();
            assert_eq!(back, t);
        }
        let z = Matricization {
            mode: 1,
            matrix: DMatrix::zeros(3, 8),
        };
        assert!(tensorize(&z, &[2, 3, 4]).unwrap().is_zero());
        assert!(tensorize(&z, &[2, 4, 3]).is_err());
    }

    #[test]
    fn mode_product_fiber_sums() {
        let t = seq(&[2, 3, 2]);
        let ones = DMatrix::from_element(1, 3, 1.0);
        let p = mode_product(&t, &ones, 1).unwrap();
        assert_eq!(p.dims(), &[2, 1, 2]);
        for i in 0..2 {
            for k in 0..2 {
                let direct: f64 = (0..3).map(|j| t.get(&[i, j, k])).sum();
                assert_eq!(p.get(&[i, 0, k]), direct);
            }
        }
        let id = DMatrix::<f64>::identity(3, 3);
        assert_eq!(mode_product(&t, &id, 1).unwrap(), t);
        assert!(mode_product(&t, &id, 0).is_err());
    }

    #[test]
    fn hosvd_without_truncation_is_identity() {
        let t = seq(&[3, 2, 4]);
        let h = hosvd_truncate(&t, &[3, 2, 4]).unwrap();
        let err = frob_norm(&h.sub(&t).unwrap()) / frob_norm(&t);
        assert!(err < 1e-12, "{err}");
        assert!(hosvd_truncate(&t, &[4, 2, 4]).is_err());
        assert!(hosvd_truncate(&t, &[0, 2, 4]).is_err());
        assert!(hosvd_truncate(&t, &[1, 1]).is_err());
    }

    #[test]
    fn hosvd_rank_above_unfolding_rank_keeps_tensor() {
        // Mode-0 unfolding is 4 × 1, so only one singular vector exists.
        let t = seq(&[4, 1, 1]);
        let h = hosvd_truncate(&t, &[2, 1, 1]).unwrap();
        assert!(frob_norm(&h.sub(&t).unwrap()) < 1e-12 * frob_norm(&t));
    }
}
