//! Information matrices, the D-criterion and the variance function.

use std::sync::OnceLock;

use nalgebra::DMatrix;

use crate::design::Design;
use crate::error::{Error, Result};
use crate::linalg::{self, PSD_TOLERANCE};
use crate::models::Model;

#[derive(Debug, Clone)]
struct Factorization {
    logdet: f64,
    inverse: Vec<f64>,
}

/// Symmetric nonnegative definite `m × m` information matrix with a lazily
/// computed Cholesky factorization (log-determinant and inverse).
#[derive(Debug)]
pub struct InfoMatrix {
    m: usize,
    entries: Vec<f64>,
    factor: OnceLock<Option<Factorization>>,
}

impl Clone for InfoMatrix {
    fn clone(&self) -> Self {
        Self {
            m: self.m,
            entries: self.entries.clone(),
            factor: self.factor.clone(),
        }
    }
}

impl InfoMatrix {
    /// Wraps a row-major `m × m` matrix after checking symmetry (relative 1e-12).
    pub fn new(m: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != m * m {
            return Err(Error::DimensionMismatch {
                expected: m * m,
                got: entries.len(),
            });
        }
        let scale = entries.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for i in 0..m {
            for j in 0..i {
                let (a, b) = (entries[i * m + j], entries[j * m + i]);
                if (a - b).abs() > 1e-12 * scale {
                    return Err(Error::InvalidArgument(format!(
                        "matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
        }
        Ok(Self::from_raw(m, entries))
    }

    pub(crate) fn from_raw(m: usize, entries: Vec<f64>) -> Self {
        Self {
            m,
            entries,
            factor: OnceLock::new(),
        }
    }

    pub fn zeros(m: usize) -> Self {
        Self::from_raw(m, vec![0.0; m * m])
    }

    pub fn identity(m: usize) -> Self {
        let mut e = vec![0.0; m * m];
        for i in 0..m {
            e[i * m + i] = 1.0;
        }
        Self::from_raw(m, e)
    }

    pub fn from_dmatrix(a: &DMatrix<f64>) -> Result<Self> {
        Self::new(a.nrows(), linalg::from_dmatrix(a))
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.m + j]
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        linalg::to_dmatrix(&self.entries, self.m)
    }

    /// Adds `w f fᵀ`, invalidating the cached factorization.
    pub fn add_outer(&mut self, f: &[f64], w: f64) {
        linalg::add_outer(&mut self.entries, f, w);
        self.factor = OnceLock::new();
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::from_raw(self.m, self.entries.iter().map(|v| v * c).collect())
    }

    fn factorization(&self) -> Option<&Factorization> {
        self.factor
            .get_or_init(|| {
                linalg::cholesky(&self.entries, self.m).map(|l| Factorization {
                    logdet: linalg::chol_logdet(&l, self.m),
                    inverse: linalg::chol_inverse(&l, self.m),
                })
            })
            .as_ref()
    }

    pub fn is_nonsingular(&self) -> bool {
        self.factorization().is_some()
    }

    /// `log det M`, or `None` when the Cholesky factorization breaks down.
    pub fn log_det(&self) -> Option<f64> {
        self.factorization().map(|f| f.logdet)
    }

    /// Row-major `M⁻¹`.
    pub fn inverse(&self) -> Result<&[f64]> {
        self.factorization()
            .map(|f| f.inverse.as_slice())
            .ok_or(Error::Singular)
    }

    /// `fᵀ M⁻¹ f`.
    pub fn variance(&self, f: &[f64]) -> Result<f64> {
        if f.len() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                got: f.len(),
            });
        }
        Ok(linalg::quad_form(self.inverse()?, f).max(0.0))
    }

    /// Smallest eigenvalue and spectral scale, used for the definiteness check.
    fn eigen_log_det(&self) -> Result<Option<f64>> {
        let eig = self.to_dmatrix().symmetric_eigen();
        let scale = eig.eigenvalues.amax();
        let min = eig.eigenvalues.min();
        if min < -PSD_TOLERANCE * scale {
            return Err(Error::Indefinite { min_eigenvalue: min });
        }
        let mut logdet = 0.0;
        for &l in eig.eigenvalues.iter() {
            if !(l > linalg::SINGULAR_PIVOT) || l <= PSD_TOLERANCE * scale {
                return Ok(None);
            }
            logdet += l.ln();
        }
        Ok(Some(logdet))
    }

    pub fn condition_number(&self) -> f64 {
        let eig = self.to_dmatrix().symmetric_eigen();
        let max = eig.eigenvalues.amax();
        let min = eig.eigenvalues.min();
        if min <= 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }
}

/// An optimality criterion: a concave, positively homogeneous function of `M`.
pub trait Criterion: Send + Sync {
    fn name(&self) -> &'static str;
    fn value(&self, m: &InfoMatrix) -> Result<f64>;
}

/// `Φ(M) = det(M)^{1/m}`.
#[derive(Debug, Clone, Copy, Default)]
pub struct DOptimality;

impl Criterion for DOptimality {
    fn name(&self) -> &'static str {
        "D"
    }

    fn value(&self, m: &InfoMatrix) -> Result<f64> {
        d_criterion(m)
    }
}

/// `det(M)^{1/m}` through the log-determinant; 0 for singular `M`.
///
/// When Cholesky fails, negative eigenvalues within `1e-10·‖M‖` are clamped
/// to zero (giving 0); larger ones are reported as [`Error::Indefinite`].
pub fn d_criterion(m: &InfoMatrix) -> Result<f64> {
    if let Some(ld) = m.log_det() {
        return Ok((ld / m.m() as f64).exp());
    }
    match m.eigen_log_det()? {
        Some(ld) => Ok((ld / m.m() as f64).exp()),
        None => Ok(0.0),
    }
}

/// `log Φ(M)`, `-∞` for singular matrices.
pub fn log_d_criterion(m: &InfoMatrix) -> f64 {
    match m.log_det() {
        Some(ld) => ld / m.m() as f64,
        None => f64::NEG_INFINITY,
    }
}

/// `M(ξ) = Σ ξ(x) f(x) f(x)ᵀ`.
pub fn information_matrix(design: &Design, model: &Model) -> Result<InfoMatrix> {
    if design.k() != model.k() {
        return Err(Error::DimensionMismatch {
            expected: model.k(),
            got: design.k(),
        });
    }
    let m = model.m();
    let mut a = vec![0.0; m * m];
    let mut f = vec![0.0; m];
    for (p, &w) in design.iter() {
        model.regression(p.coords(), &mut f)?;
        linalg::add_outer(&mut a, &f, w);
    }
    symmetrize(&mut a, m);
    Ok(InfoMatrix::from_raw(m, a))
}

pub(crate) fn symmetrize(a: &mut [f64], m: usize) {
    for i in 0..m {
        for j in 0..i {
            let v = 0.5 * (a[i * m + j] + a[j * m + i]);
            a[i * m + j] = v;
            a[j * m + i] = v;
        }
    }
}

/// `Φ(M(ξ))`.
pub fn design_criterion(design: &Design, model: &Model) -> Result<f64> {
    d_criterion(&information_matrix(design, model)?)
}

/// `d_ξ(x) = f(x)ᵀ M(ξ)⁻¹ f(x)`.
pub fn variance_function(design: &Design, model: &Model, x: &[f64]) -> Result<f64> {
    let info = information_matrix(design, model)?;
    info.variance(&model.regression_vec(x)?)
}

/// Efficiency bound `m / max d_ξ`, where `candidate_max` is the largest
/// variance found on whatever points were probed. It is only a certified
/// bound when the probed set is the whole design space.
pub fn efficiency_lower_bound(m: usize, candidate_max: f64) -> Result<f64> {
    if !(candidate_max > 0.0) || !candidate_max.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "variance maximum must be positive, got {candidate_max}"
        )));
    }
    Ok(m as f64 / candidate_max)
}

/// `eff(ξ|ζ) = Φ(M(ξ)) / Φ(M(ζ))`.
pub fn relative_efficiency(xi: &Design, zeta: &Design, model: &Model) -> Result<f64> {
    let base = design_criterion(zeta, model)?;
    if !(base > 0.0) {
        return Err(Error::Singular);
    }
    Ok(design_criterion(xi, model)? / base)
}
