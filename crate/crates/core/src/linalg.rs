//! Small dense symmetric linear algebra used by the solvers.
//!
//! Matrices here are at most a few dozen rows, so everything is plain
//! row-major `Vec<f64>` or `nalgebra::DMatrix`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Pivots (diagonal of the Cholesky factor, squared) below this are treated as singular.
pub const SINGULAR_PIVOT: f64 = 1e-300;

/// Relative tolerance for negative eigenvalues of a nonnegative definite matrix.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// Lower Cholesky factor of a symmetric positive definite matrix, row-major.
/// Returns `None` when a pivot is not positive or falls below [`SINGULAR_PIVOT`].
pub fn cholesky(a: &[f64], m: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..=i {
            let mut s = a[i * m + j];
            for p in 0..j {
                s -= l[i * m + p] * l[j * m + p];
            }
            if i == j {
                if !(s > SINGULAR_PIVOT) || !s.is_finite() {
                    return None;
                }
                l[i * m + i] = s.sqrt();
            } else {
                l[i * m + j] = s / l[j * m + j];
            }
        }
    }
    Some(l)
}

/// `log det A` from a Cholesky factor.
pub fn chol_logdet(l: &[f64], m: usize) -> f64 {
    2.0 * (0..m).map(|i| l[i * m + i].ln()).sum::<f64>()
}

/// Inverse of `A = L Lᵀ`, row-major and exactly symmetric.
pub fn chol_inverse(l: &[f64], m: usize) -> Vec<f64> {
    // invert L (lower triangular) column by column
    let mut linv = vec![0.0; m * m];
    for j in 0..m {
        linv[j * m + j] = 1.0 / l[j * m + j];
        for i in (j + 1)..m {
            let mut s = 0.0;
            for p in j..i {
                s -= l[i * m + p] * linv[p * m + j];
            }
            linv[i * m + j] = s / l[i * m + i];
        }
    }
    // A⁻¹ = L⁻ᵀ L⁻¹
    let mut inv = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..=i {
            let mut s = 0.0;
            for p in i..m {
                s += linv[p * m + i] * linv[p * m + j];
            }
            inv[i * m + j] = s;
            inv[j * m + i] = s;
        }
    }
    inv
}

/// Quadratic form `fᵀ A f` for a symmetric row-major `A`.
#[inline]
pub fn quad_form(a: &[f64], f: &[f64]) -> f64 {
    let m = f.len();
    let mut s = 0.0;
    for i in 0..m {
        let row = &a[i * m..i * m + m];
        let mut r = 0.5 * row[i] * f[i];
        for j in (i + 1)..m {
            r += row[j] * f[j];
        }
        s += r * f[i];
    }
    2.0 * s
}

/// `out = A f`.
#[inline]
pub fn mat_vec(a: &[f64], f: &[f64], out: &mut [f64]) {
    let m = f.len();
    for i in 0..m {
        out[i] = a[i * m..i * m + m].iter().zip(f).map(|(x, y)| x * y).sum();
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Adds `w f fᵀ` to the row-major symmetric matrix `a`.
#[inline]
pub fn add_outer(a: &mut [f64], f: &[f64], w: f64) {
    let m = f.len();
    for i in 0..m {
        let wi = w * f[i];
        for j in 0..m {
            a[i * m + j] += wi * f[j];
        }
    }
}

pub fn to_dmatrix(a: &[f64], m: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(m, m, a)
}

pub fn from_dmatrix(a: &DMatrix<f64>) -> Vec<f64> {
    let m = a.nrows();
    let mut v = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            v[i * m + j] = a[(i, j)];
        }
    }
    v
}

/// Symmetric inverse square root `A^{-1/2}` through an eigendecomposition.
///
/// Fails when a computed eigenvalue is not positive. For nearly singular `A`
/// the result only whitens approximately but is still nonsingular.
pub fn inverse_sqrt(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = a.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| !(l > SINGULAR_PIVOT) || !l.is_finite()) {
        return Err(Error::Singular);
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let r = &eig.eigenvectors * d * eig.eigenvectors.transpose();
    Ok((&r + r.transpose()) * 0.5)
}

/// `ln |det A|` through an LU factorization.
pub fn log_abs_det(a: &DMatrix<f64>) -> f64 {
    let lu = a.clone().lu();
    lu.u().diagonal().iter().map(|u| u.abs().ln()).sum()
}

/// Max-abs entry of `A B - I`.
pub fn inverse_residual(a: &[f64], b: &[f64], m: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m {
        for j in 0..m {
            let mut s = 0.0;
            for p in 0..m {
                s += a[i * m + p] * b[p * m + j];
            }
            if i == j {
                s -= 1.0;
            }
            worst = worst.max(s.abs());
        }
    }
    worst
}
