//! The ten benchmark problems: models, nominal parameters and design spaces.

use std::sync::Arc;

use super::{GlmFamily, GlmModel, Model, NonlinearModel};
use crate::error::{Error, Result};
use crate::grid::{FactorGrid, LevelSpec};

pub const BENCHMARK_COUNT: usize = 10;

/// A registered benchmark: a grid, a model and a short description.
#[derive(Debug, Clone)]
pub struct BenchmarkProblem {
    pub id: usize,
    pub grid: FactorGrid,
    pub model: Model,
    pub description: &'static str,
    /// Nominal parameter, when the model has one.
    pub theta0: Option<Vec<f64>>,
}

pub(crate) const THETA1: [f64; 4] = [-2.0, 0.5, 0.5, 0.1];
pub(crate) const THETA2: [f64; 5] = [1.0, 1.0, 2.0, 0.7, 0.2];
pub(crate) const THETA4: [f64; 10] = [0.5, -0.2, 0.5, -0.2, -0.1, 0.2, -0.1, 0.2, -0.1, 0.2];
pub(crate) const THETA5: [f64; 6] = [-1.0, 2.0, 0.5, -1.0, -0.25, 0.13];
pub(crate) const THETA6: [f64; 6] = [0.5, 0.7, 0.18, -0.2, -0.58, 0.51];
pub(crate) const THETA8: [f64; 8] = [
    -0.4926, -0.628, -0.3283, 0.4378, 0.5283, -0.612, -0.6837, -0.2061,
];
pub(crate) const THETA9: [f64; 11] = [3.0, 0.5, 0.75, 1.25, 0.8, 0.5, 0.8, -0.4, -1.0, 2.65, 0.65];
pub(crate) const THETA10: [f64; 16] = [
    3.0, 0.5, 0.75, 1.25, 0.8, 0.5, 0.8, -0.4, -1.0, 2.65, 0.65, 0.01, -0.02, 0.03, -0.04, 0.05,
];

fn ranges(specs: &[(f64, f64, f64)]) -> Vec<LevelSpec> {
    specs
        .iter()
        .map(|&(lo, hi, step)| LevelSpec::range(lo, hi, step))
        .collect()
}

fn binary() -> LevelSpec {
    LevelSpec::List(vec![-1.0, 1.0])
}

fn intercept_linear(x: &[f64], f: &mut [f64]) {
    f[0] = 1.0;
    f[1..=x.len()].copy_from_slice(x);
}

fn mixed_grid(step9: f64) -> Vec<LevelSpec> {
    let mut specs = vec![binary(), binary(), binary(), binary()];
    specs.extend(ranges(&[
        (50.0, 90.0, 0.01),
        (30.0, 55.0, 0.01),
        (0.0, 10.0, 0.01),
        (18.0, 48.0, 0.01),
        (0.125, 0.425, step9),
        (5.0, 15.0, 0.01),
    ]));
    specs
}

/// Problem 2's mean `θ₁ + θ₂e^{-θ₃x₁} + θ₄/(θ₄-θ₅)(e^{-θ₅x₂} - e^{-θ₄x₂})`.
pub(crate) fn compartmental_mean(x: &[f64], t: &[f64]) -> f64 {
    t[0] + t[1] * (-t[2] * x[0]).exp()
        + t[3] / (t[3] - t[4]) * ((-t[4] * x[1]).exp() - (-t[3] * x[1]).exp())
}

pub(crate) fn compartmental_grad(x: &[f64], t: &[f64], g: &mut [f64]) {
    let e3 = (-t[2] * x[0]).exp();
    let e4 = (-t[3] * x[1]).exp();
    let e5 = (-t[4] * x[1]).exp();
    let diff = t[3] - t[4];
    let c = t[3] / diff;
    let bracket = e5 - e4;
    g[0] = 1.0;
    g[1] = e3;
    g[2] = -t[1] * x[0] * e3;
    g[3] = -t[4] / (diff * diff) * bracket + c * x[1] * e4;
    g[4] = t[3] / (diff * diff) * bracket - c * x[1] * e5;
}

/// Problem 1's mean `1/(1 + exp(h(x)ᵀθ))` with `h = (1, x₁, x₂, x₁x₂)`.
pub(crate) fn logistic_decay_mean(x: &[f64], t: &[f64]) -> f64 {
    let h = [1.0, x[0], x[1], x[0] * x[1]];
    let z: f64 = h.iter().zip(t).map(|(a, b)| a * b).sum();
    1.0 / (1.0 + z.exp())
}

pub(crate) fn logistic_decay_grad(x: &[f64], t: &[f64], g: &mut [f64]) {
    let h = [1.0, x[0], x[1], x[0] * x[1]];
    let z: f64 = h.iter().zip(t).map(|(a, b)| a * b).sum();
    let eta = 1.0 / (1.0 + z.exp());
    let s = -eta * (1.0 - eta);
    for (gi, hi) in g.iter_mut().zip(h) {
        *gi = s * hi;
    }
}

/// Returns benchmark problem `id` (1-based).
pub fn benchmark(id: usize) -> Result<BenchmarkProblem> {
    let logistic = |k: usize, theta: &[f64]| {
        Model::new(
            format!("problem {id}"),
            GlmModel::new(GlmFamily::Logistic, k, Arc::new(intercept_linear), theta.to_vec()),
        )
    };
    let (specs, model, description, theta0): (Vec<LevelSpec>, Model, &'static str, Option<Vec<f64>>) =
        match id {
            1 => (
                ranges(&[(0.0, 5.0, 0.001), (0.0, 1.0, 0.001)]),
                Model::new(
                    "problem 1",
                    NonlinearModel::new(
                        2,
                        Arc::new(logistic_decay_mean),
                        Arc::new(logistic_decay_grad),
                        THETA1.to_vec(),
                    ),
                )?,
                "normal errors, mean 1/(1+exp(h'θ)), h = (1, x1, x2, x1x2)",
                Some(THETA1.to_vec()),
            ),
            2 => (
                ranges(&[(0.0, 2.0, 0.001), (0.0, 10.0, 0.001)]),
                Model::new(
                    "problem 2",
                    NonlinearModel::new(
                        2,
                        Arc::new(compartmental_mean),
                        Arc::new(compartmental_grad),
                        THETA2.to_vec(),
                    ),
                )?,
                "normal errors, two-part compartmental mean",
                Some(THETA2.to_vec()),
            ),
            3 => (
                ranges(&[(-1.0, 1.0, 0.001), (-1.0, 1.0, 0.001)]),
                Model::linear(
                    "problem 3",
                    2,
                    7,
                    Arc::new(|x: &[f64], f: &mut [f64]| {
                        let (a, b) = (x[0], x[1]);
                        f.copy_from_slice(&[1.0, a, b, a * a, b * b, a * a * a, b * b * b]);
                    }),
                )?,
                "linear regression, additive cubic in two factors",
                None,
            ),
            4 => (
                ranges(&[(-1.0, 1.0, 0.001); 3]),
                Model::new(
                    "problem 4",
                    GlmModel::new(
                        GlmFamily::Poisson,
                        3,
                        Arc::new(|x: &[f64], f: &mut [f64]| {
                            let (a, b, c) = (x[0], x[1], x[2]);
                            f.copy_from_slice(&[
                                1.0,
                                a,
                                b,
                                c,
                                a * a,
                                b * b,
                                c * c,
                                a * b,
                                a * c,
                                b * c,
                            ]);
                        }),
                        THETA4.to_vec(),
                    ),
                )?,
                "Poisson regression, full quadratic in three factors",
                Some(THETA4.to_vec()),
            ),
            5 => {
                let mut specs = vec![binary(), binary(), binary(), binary()];
                specs.extend(ranges(&[(5.0, 35.0, 0.001)]));
                (
                    specs,
                    logistic(5, &THETA5)?,
                    "logistic regression, four binary factors and one continuous",
                    Some(THETA5.to_vec()),
                )
            }
            6 => (
                ranges(&[(-2.0, 2.0, 0.001); 5]),
                Model::new(
                    "problem 6",
                    GlmModel::new(GlmFamily::Probit, 5, Arc::new(intercept_linear), THETA6.to_vec()),
                )?,
                "probit regression, five continuous factors",
                Some(THETA6.to_vec()),
            ),
            7 => (
                ranges(&[(-2.0, 2.0, 0.001); 5]),
                logistic(5, &THETA6)?,
                "logistic regression, five continuous factors",
                Some(THETA6.to_vec()),
            ),
            8 => (
                ranges(&[(-3.0, 3.0, 0.01); 7]),
                logistic(7, &THETA8)?,
                "logistic regression, seven continuous factors",
                Some(THETA8.to_vec()),
            ),
            9 => (
                mixed_grid(0.001),
                logistic(10, &THETA9)?,
                "logistic regression, four binary and six continuous factors",
                Some(THETA9.to_vec()),
            ),
            10 => (
                mixed_grid(0.01),
                Model::new(
                    "problem 10",
                    GlmModel::new(
                        GlmFamily::Logistic,
                        10,
                        Arc::new(|x: &[f64], f: &mut [f64]| {
                            intercept_linear(x, f);
                            f[11] = x[0] * x[8];
                            f[12] = x[1] * x[4];
                            f[13] = x[2] * x[3];
                            f[14] = x[5] * x[6];
                            f[15] = x[7] * x[9];
                        }),
                        THETA10.to_vec(),
                    ),
                )?,
                "logistic regression with five two-factor interactions",
                Some(THETA10.to_vec()),
            ),
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "benchmark id {id} out of range 1..={BENCHMARK_COUNT}"
                )))
            }
        };
    Ok(BenchmarkProblem {
        id,
        grid: FactorGrid::from_specs(&specs)?,
        model,
        description,
        theta0,
    })
}
