use std::sync::Arc;

use super::Regressor;
use crate::error::{Error, Result};

pub type MeanFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
pub type GradFn = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;

/// Normal-error model with a mean `η(x, θ)` nonlinear in `θ`, linearized at `θ₀`:
/// `f(x) = ∂η(x, θ)/∂θ` at `θ = θ₀`.
#[derive(Clone)]
pub struct NonlinearModel {
    k: usize,
    eta: MeanFn,
    grad: GradFn,
    theta0: Vec<f64>,
}

impl NonlinearModel {
    pub fn new(k: usize, eta: MeanFn, grad: GradFn, theta0: Vec<f64>) -> Self {
        Self {
            k,
            eta,
            grad,
            theta0,
        }
    }

    pub fn theta0(&self) -> &[f64] {
        &self.theta0
    }

    pub fn mean(&self, x: &[f64], theta: &[f64]) -> f64 {
        (self.eta)(x, theta)
    }

    pub fn gradient(&self, x: &[f64], theta: &[f64], out: &mut [f64]) {
        (self.grad)(x, theta, out)
    }
}

impl Regressor for NonlinearModel {
    fn dim(&self) -> usize {
        self.theta0.len()
    }

    fn factors(&self) -> usize {
        self.k
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        (self.grad)(x, &self.theta0, out);
        if let Some(i) = out.iter().position(|v| !v.is_finite()) {
            return Err(Error::Model(format!(
                "non-finite gradient component {} at x = {x:?}",
                i + 1
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_mean_reduces_to_h() {
        let nl = NonlinearModel::new(
            1,
            Arc::new(|x: &[f64], t: &[f64]| t[0] + t[1] * x[0]),
            Arc::new(|x: &[f64], _t: &[f64], g: &mut [f64]| {
                g[0] = 1.0;
                g[1] = x[0];
            }),
            vec![0.3, -2.0],
        );
        let mut f = [0.0; 2];
        for x in [-1.0, 0.0, 2.5] {
            nl.eval(&[x], &mut f).unwrap();
            assert_eq!(f, [1.0, x]);
        }
        assert_eq!(nl.mean(&[2.0], &[1.0, 1.0]), 3.0);
    }

    #[test]
    fn non_finite_gradient_is_an_error() {
        let nl = NonlinearModel::new(
            1,
            Arc::new(|x: &[f64], t: &[f64]| t[0] / x[0]),
            Arc::new(|x: &[f64], t: &[f64], g: &mut [f64]| {
                g[0] = 1.0 / x[0];
                g[1] = t[1];
            }),
            vec![1.0, 1.0],
        );
        let mut f = [0.0; 2];
        assert!(nl.eval(&[0.0], &mut f).is_err());
    }
}
