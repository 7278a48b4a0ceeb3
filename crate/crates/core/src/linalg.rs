//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Thin SVD with singular values sorted in decreasing order and each left
/// singular vector signed so that its largest-magnitude entry is positive
/// (first such entry on ties). Right singular vectors flip with their left
/// partners, so `u * diag(s) * v_t` still reproduces the input.
pub struct SortedSvd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v_t: DMatrix<f64>,
}

pub fn svd_sorted(m: &DMatrix<f64>) -> SortedSvd {
    // nalgebra's bidiagonal SVD occasionally returns wrong singular vectors
    // for rank-deficient inputs (its singular values stay correct), so the
    // vectors come from one-sided Jacobi instead.
    let (u, s, v_t) = if m.nrows() <= m.ncols() {
        jacobi_rows(m)
    } else {
        let (u, s, v_t) = jacobi_rows(&m.transpose());
        (v_t.transpose(), s, u.transpose())
    };
    let k = s.len();

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));

    let mut u_sorted = DMatrix::zeros(u.nrows(), k);
    let mut v_sorted = DMatrix::zeros(k, v_t.ncols());
    let mut s_sorted = DVector::zeros(k);
    for (dst, &src) in order.iter().enumerate() {
        let col = u.column(src);
        let mut pivot = 0;
        for i in 1..col.len() {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        u_sorted.set_column(dst, &(col * sign));
        v_sorted.set_row(dst, &(v_t.row(src) * sign));
        s_sorted[dst] = s[src];
    }
    SortedSvd {
        u: u_sorted,
        singular_values: s_sorted,
        v_t: v_sorted,
    }
}

/// One-sided (Hestenes) Jacobi on the rows of a wide matrix: rotates row
/// pairs until all rows are orthogonal, so `G·m = Σ·Vᵀ` with `G` orthogonal
/// and `m = Gᵀ Σ Vᵀ`. Rows of `Vᵀ` for zero singular values are filled in
/// to keep them orthonormal.
fn jacobi_rows(m: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let (r, c) = m.shape();
    // Row-major copy so each row is contiguous.
    let mut w: Vec<f64> = m.transpose().as_slice().to_vec();
    let mut g = DMatrix::<f64>::identity(r, r);
    let row_dot = |w: &[f64], p: usize, q: usize| -> f64 { (0..c).map(|j| w[p * c + j] * w[q * c + j]).sum() };
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..r {
            for q in p + 1..r {
                let alpha = row_dot(&w, p, p);
                let beta = row_dot(&w, q, q);
                let gamma = row_dot(&w, p, q);
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for j in 0..c {
                    let (a, b) = (w[p * c + j], w[q * c + j]);
                    w[p * c + j] = cs * a - sn * b;
                    w[q * c + j] = sn * a + cs * b;
                }
                for j in 0..r {
                    let (a, b) = (g[(p, j)], g[(q, j)]);
                    g[(p, j)] = cs * a - sn * b;
                    g[(q, j)] = sn * a + cs * b;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut s = DVector::zeros(r);
    let mut v_t = DMatrix::zeros(r, c);
    for i in 0..r {
        let norm = row_dot(&w, i, i).sqrt();
        s[i] = norm;
        if norm > 0.0 {
            for j in 0..c {
                v_t[(i, j)] = w[i * c + j] / norm;
            }
        }
    }
    complete_rows(&mut v_t, &s);
    (g.transpose(), s, v_t)
}

/// Replaces the rows of `v_t` whose singular value is zero by unit vectors
/// orthogonal to every other row, taken from the standard basis by
/// Gram–Schmidt.
fn complete_rows(v_t: &mut DMatrix<f64>, s: &DVector<f64>) {
    let (r, c) = v_t.shape();
    let mut candidate = 0;
    for i in 0..r {
        if s[i] > 0.0 {
            continue;
        }
        while candidate < c {
            let mut e = DVector::<f64>::zeros(c);
            e[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for k in 0..r {
                    if k != i && (s[k] > 0.0 || k < i) {
                        let row = v_t.row(k).transpose();
                        e -= &row * row.dot(&e);
                    }
                }
            }
            let norm = e.norm();
            if norm > 0.5 {
                v_t.set_row(i, &(e / norm).transpose());
                break;
            }
        }
    }
}

pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// First `r` left singular vectors as columns. A thin SVD has only
/// `min(rows, cols)` of them; asking for more returns all of them, which
/// already span the column space.
pub fn left_singular_vectors(m: &DMatrix<f64>, r: usize) -> DMatrix<f64> {
    let svd = svd_sorted(m);
    let r = r.min(svd.u.ncols());
    svd.u.columns(0, r).into_owned()
}

pub fn nuclear_norm(m: &DMatrix<f64>) -> f64 {
    m.singular_values().iter().sum()
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.singular_values().iter().fold(0.0, |a, &b| a.max(b))
}

/// Singular-value soft-thresholding: `U diag(max(σ - tau, 0)) Vᵀ`.
///
/// Works from the eigendecomposition of the smaller Gram matrix, so the
/// right factor never has to be formed: the result is `U W Uᵀ M` with
/// `W = diag(max(σ - tau, 0) / σ)` (or the mirrored form for tall inputs).
pub fn singular_value_threshold(m: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    let wide = m.nrows() <= m.ncols();
    let gram = if wide { m * m.transpose() } else { m.transpose() * m };
    let eig = SymmetricEigen::new(gram);
    let weights = eig.eigenvalues.map(|lam| {
        let sigma = lam.max(0.0).sqrt();
        if sigma > tau {
            (sigma - tau) / sigma
        } else {
            0.0
        }
    });
    let q = &eig.eigenvectors;
    let mut scaled = q.clone();
    for (j, w) in weights.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*w);
    }
    let proj = scaled * q.transpose();
    if wide {
        proj * m
    } else {
        m * proj
    }
}
