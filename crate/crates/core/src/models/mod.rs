//! Regression models: maps from design points to regression vectors `f(x)`.

mod benchmarks;
mod glm;
mod nonlinear;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;

pub use benchmarks::{benchmark, BenchmarkProblem, BENCHMARK_COUNT};
pub use glm::{probit_log_weight, GlmFamily, GlmModel};
pub use nonlinear::NonlinearModel;

/// Shared closure computing a vector-valued function of the factors.
pub type VectorFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Anything that produces the regression vector `f(x)` of an `m`-parameter model.
pub trait Regressor: Send + Sync {
    /// Parameter dimension `m`.
    fn dim(&self) -> usize;
    /// Number of factors `k` the model expects.
    fn factors(&self) -> usize;
    /// Writes `f(x)` into `out` (length `m`).
    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<()>;
}

/// Linear regression `E y = h(x)ᵀ θ`, so `f = h`.
#[derive(Clone)]
pub struct LinearModel {
    m: usize,
    k: usize,
    h: VectorFn,
}

impl LinearModel {
    pub fn new(k: usize, m: usize, h: VectorFn) -> Self {
        Self { m, k, h }
    }
}

impl Regressor for LinearModel {
    fn dim(&self) -> usize {
        self.m
    }
    fn factors(&self) -> usize {
        self.k
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        (self.h)(x, out);
        Ok(())
    }
}

/// A regression model, optionally reparametrized as `f̃ = R f`.
#[derive(Clone)]
pub struct Model {
    inner: Arc<dyn Regressor>,
    reparam: Option<Arc<Vec<f64>>>,
    name: String,
}

impl fmt::Debug for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Model")
            .field("name", &self.name)
            .field("m", &self.m())
            .field("k", &self.k())
            .field("reparametrized", &self.reparam.is_some())
            .finish()
    }
}

impl Model {
    pub fn new(name: impl Into<String>, inner: impl Regressor + 'static) -> Result<Self> {
        Self::from_arc(name, Arc::new(inner))
    }

    pub fn from_arc(name: impl Into<String>, inner: Arc<dyn Regressor>) -> Result<Self> {
        if inner.dim() < 2 {
            return Err(Error::InvalidArgument(format!(
                "parameter dimension m = {} < 2",
                inner.dim()
            )));
        }
        Ok(Self {
            inner,
            reparam: None,
            name: name.into(),
        })
    }

    pub fn linear(name: &str, k: usize, m: usize, h: VectorFn) -> Result<Self> {
        Self::new(name, LinearModel::new(k, m, h))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn m(&self) -> usize {
        self.inner.dim()
    }

    pub fn k(&self) -> usize {
        self.inner.factors()
    }

    pub fn is_reparametrized(&self) -> bool {
        self.reparam.is_some()
    }

    /// Writes `f(x)` (or `R f(x)` when reparametrized) into `out`.
    pub fn regression(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let m = self.m();
        if out.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: out.len(),
            });
        }
        if x.len() != self.k() {
            return Err(Error::DimensionMismatch {
                expected: self.k(),
                got: x.len(),
            });
        }
        self.inner.eval(x, out)?;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Model(format!("non-finite regression vector at {x:?}")));
        }
        if let Some(r) = &self.reparam {
            let mut buf = [0.0f64; 64];
            let mut heap;
            let tmp: &mut [f64] = if m <= 64 {
                &mut buf[..m]
            } else {
                heap = vec![0.0; m];
                &mut heap
            };
            tmp.copy_from_slice(out);
            linalg::mat_vec(r, tmp, out);
        }
        Ok(())
    }

    pub fn regression_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.m()];
        self.regression(x, &mut out)?;
        Ok(out)
    }

    /// The same model with regression vectors `R f(x)`; `R` must be nonsingular.
    /// Applying twice composes the transforms.
    pub fn reparametrized(&self, r: &DMatrix<f64>) -> Result<Self> {
        let m = self.m();
        if r.nrows() != m || r.ncols() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: r.nrows(),
            });
        }
        if r.clone().lu().determinant().abs() <= 0.0 || !r.iter().all(|v| v.is_finite()) {
            return Err(Error::Singular);
        }
        let total = match &self.reparam {
            Some(prev) => r * linalg::to_dmatrix(prev, m),
            None => r.clone(),
        };
        Ok(Self {
            inner: self.inner.clone(),
            reparam: Some(Arc::new(linalg::from_dmatrix(&total))),
            name: self.name.clone(),
        })
    }

    /// The model without any reparametrization.
    pub fn original(&self) -> Self {
        Self {
            inner: self.inner.clone(),
            reparam: None,
            name: self.name.clone(),
        }
    }

    pub fn reparametrization(&self) -> Option<DMatrix<f64>> {
        self.reparam.as_ref().map(|r| linalg::to_dmatrix(r, self.m()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> Model {
        Model::linear(
            "line",
            1,
            2,
            Arc::new(|x: &[f64], f: &mut [f64]| {
                f[0] = 1.0;
                f[1] = x[0];
            }),
        )
        .unwrap()
    }

    #[test]
    fn rejects_scalar_models() {
        let h: VectorFn = Arc::new(|_, f| f[0] = 1.0);
        assert!(Model::linear("c", 1, 1, h).is_err());
    }

    #[test]
    fn reparametrization_applies_r() {
        let model = line();
        let r = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 1.0]);
        let rep = model.reparametrized(&r).unwrap();
        assert_eq!(rep.regression_vec(&[3.0]).unwrap(), vec![2.0, 4.0]);
        assert_eq!(rep.original().regression_vec(&[3.0]).unwrap(), vec![1.0, 3.0]);
        let twice = rep.reparametrized(&r).unwrap();
        assert_eq!(twice.regression_vec(&[3.0]).unwrap(), vec![4.0, 6.0]);
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(model.reparametrized(&singular).unwrap_err(), Error::Singular);
    }

    #[test]
    fn dimension_checks() {
        let model = line();
        assert!(model.regression_vec(&[1.0, 2.0]).is_err());
        let mut out = [0.0; 3];
        assert!(model.regression(&[1.0], &mut out).is_err());
    }
}
