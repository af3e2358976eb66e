use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Regressor, VectorFn};
use crate::error::{Error, Result};
use crate::normal;

/// GLM classes with their information weights `w(z)`, `z = h(x)ᵀθ₀`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GlmFamily {
    Logistic,
    Probit,
    Poisson,
}

impl GlmFamily {
    /// `log w(z)`; finite for every finite `z`.
    pub fn log_weight(self, z: f64) -> f64 {
        match self {
            GlmFamily::Logistic => {
                let t = -z.abs();
                t - 2.0 * t.exp().ln_1p()
            }
            GlmFamily::Probit => probit_log_weight(z),
            GlmFamily::Poisson => z,
        }
    }

    pub fn weight(self, z: f64) -> f64 {
        match self {
            GlmFamily::Logistic => {
                let e = (-z.abs()).exp();
                e / ((1.0 + e) * (1.0 + e))
            }
            GlmFamily::Probit => probit_log_weight(z).exp(),
            GlmFamily::Poisson => z.exp(),
        }
    }

    /// `√w(z)`, evaluated in log space so it stays representable where `w` underflows.
    pub fn sqrt_weight(self, z: f64) -> f64 {
        match self {
            GlmFamily::Logistic => {
                let e = (-z.abs()).exp();
                e.sqrt() / (1.0 + e)
            }
            _ => (0.5 * self.log_weight(z)).exp(),
        }
    }
}

/// `log(φ²(z) / (Φ(z)(1 − Φ(z))))`, symmetric in `z`.
///
/// For `|z| > 8` the tail probability is replaced by `φ(t) R(t)` with the
/// Mills ratio `R`, which avoids the underflowing `0/0` of the direct form.
pub fn probit_log_weight(z: f64) -> f64 {
    let t = z.abs();
    if t <= 8.0 {
        let p = normal::cdf(-t);
        let q = 1.0 - p;
        2.0 * normal::log_pdf(t) - p.ln() - q.ln()
    } else {
        let r = normal::mills_ratio(t);
        let p = normal::pdf(t) * r;
        normal::log_pdf(t) - r.ln() - (-p).ln_1p()
    }
}

impl fmt::Display for GlmFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GlmFamily::Logistic => "logistic",
            GlmFamily::Probit => "probit",
            GlmFamily::Poisson => "poisson",
        })
    }
}

impl FromStr for GlmFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(GlmFamily::Logistic),
            "probit" => Ok(GlmFamily::Probit),
            "poisson" => Ok(GlmFamily::Poisson),
            other => Err(Error::InvalidArgument(format!("unknown GLM family `{other}`"))),
        }
    }
}

/// Locally linearized GLM: `f(x) = √w(h(x)ᵀθ₀) h(x)`.
#[derive(Clone)]
pub struct GlmModel {
    family: GlmFamily,
    k: usize,
    h: VectorFn,
    theta0: Vec<f64>,
}

impl GlmModel {
    pub fn new(family: GlmFamily, k: usize, h: VectorFn, theta0: Vec<f64>) -> Self {
        Self {
            family,
            k,
            h,
            theta0,
        }
    }

    pub fn family(&self) -> GlmFamily {
        self.family
    }

    pub fn theta0(&self) -> &[f64] {
        &self.theta0
    }
}

impl Regressor for GlmModel {
    fn dim(&self) -> usize {
        self.theta0.len()
    }

    fn factors(&self) -> usize {
        self.k
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        (self.h)(x, out);
        let z: f64 = out.iter().zip(&self.theta0).map(|(a, b)| a * b).sum();
        let s = self.family.sqrt_weight(z);
        for v in out.iter_mut() {
            *v *= s;
        }
        Ok(())
    }
}
