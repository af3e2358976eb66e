//! Standard normal density and distribution function.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// `1/√(2π)`
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn log_pdf(x: f64) -> f64 {
    -0.5 * x * x - 0.5 * (2.0 * PI).ln()
}

/// `Φ(x)`, accurate in both tails (computed through `erfc`).
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Mills ratio `R(t) = Φ(-t) / φ(t)` for `t ≥ 0`.
///
/// Uses the continued fraction `1/(t+1/(t+2/(t+3/(t+…))))` for large `t`,
/// where the direct ratio would underflow.
pub fn mills_ratio(t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if t < 6.0 {
        return cdf(-t) / pdf(t);
    }
    // modified Lentz evaluation of t + 1/(t + 2/(t + 3/(t + ...)))
    let tiny = 1e-300;
    let mut f = t;
    let mut c = t;
    let mut d = 0.0;
    for n in 1..200 {
        let a = n as f64;
        d = t + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = t + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / f
}
