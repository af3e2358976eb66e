//! A small expression language for user-defined models.
//!
//! Expressions range over factors `x1..xk`, parameters `th1..thm`, numeric
//! literals, `+ - * / ^` and the functions `exp`, `log`, `sqrt`, `normcdf`,
//! `normpdf`. Parameter gradients are computed by forward-mode dual numbers.

mod expr;
mod model_file;
mod parser;

pub use expr::{diff_theta, diff_theta_into, DomainError, Dual, Expr, Func};
pub use model_file::{parse, Family, ModelBody, ModelFile};
pub use parser::{parse_expr, parse_expr_at, ParseError, Scope};

/// Evaluates `e` at `(x, θ)`.
pub fn eval(e: &Expr, x: &[f64], theta: &[f64]) -> Result<f64, DomainError> {
    e.eval(x, theta)
}
