use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::normal;

/// Built-in functions of the expression language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    NormCdf,
    NormPdf,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::NormCdf => "normcdf",
            Func::NormPdf => "normpdf",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "normcdf" => Func::NormCdf,
            "normpdf" => Func::NormPdf,
            _ => return None,
        })
    }

    pub const ALL: [Func; 5] = [Func::Exp, Func::Log, Func::Sqrt, Func::NormCdf, Func::NormPdf];
}

/// Expression tree. Variable indices are 0-based (`x1` is `X(0)`).
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    X(usize),
    Theta(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Evaluation failure: a domain violation or a non-finite intermediate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{reason} in `{subexpr}`")]
pub struct DomainError {
    pub reason: &'static str,
    pub subexpr: String,
}

impl Expr {
    pub fn max_x(&self) -> Option<usize> {
        self.fold_vars(&|e| match e {
            Expr::X(i) => Some(*i),
            _ => None,
        })
    }

    pub fn max_theta(&self) -> Option<usize> {
        self.fold_vars(&|e| match e {
            Expr::Theta(i) => Some(*i),
            _ => None,
        })
    }

    fn fold_vars(&self, pick: &dyn Fn(&Expr) -> Option<usize>) -> Option<usize> {
        match self {
            Expr::Num(_) | Expr::X(_) | Expr::Theta(_) => pick(self),
            Expr::Neg(a) | Expr::Call(_, a) => a.fold_vars(pick),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => match (a.fold_vars(pick), b.fold_vars(pick)) {
                (Some(p), Some(q)) => Some(p.max(q)),
                (p, q) => p.or(q),
            },
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::X(_) | Expr::Theta(_) => 1,
            Expr::Neg(a) | Expr::Call(_, a) => 1 + a.depth(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    /// Value at `(x, θ)`.
    pub fn eval(&self, x: &[f64], theta: &[f64]) -> Result<f64, DomainError> {
        self.walk(&mut |e| match e {
            Leaf::Num(v) => Real(v),
            Leaf::X(i) => Real(x[i]),
            Leaf::Theta(i) => Real(theta[i]),
        })
        .map(|r| r.0)
    }

    /// Value and derivative with respect to `θ_j` in one forward sweep.
    pub fn eval_dual(&self, x: &[f64], theta: &[f64], j: usize) -> Result<Dual, DomainError> {
        self.walk(&mut |e| match e {
            Leaf::Num(v) => Dual::constant(v),
            Leaf::X(i) => Dual::constant(x[i]),
            Leaf::Theta(i) => Dual {
                v: theta[i],
                d: if i == j { 1.0 } else { 0.0 },
            },
        })
    }

    fn walk<T: Scalar>(&self, leaf: &mut impl FnMut(Leaf) -> T) -> Result<T, DomainError> {
        let fail = |reason: &'static str, e: &Expr| DomainError {
            reason,
            subexpr: e.to_string(),
        };
        let out = match self {
            Expr::Num(v) => leaf(Leaf::Num(*v)),
            Expr::X(i) => leaf(Leaf::X(*i)),
            Expr::Theta(i) => leaf(Leaf::Theta(*i)),
            Expr::Neg(a) => -a.walk(leaf)?,
            Expr::Add(a, b) => a.walk(leaf)? + b.walk(leaf)?,
            Expr::Sub(a, b) => a.walk(leaf)? - b.walk(leaf)?,
            Expr::Mul(a, b) => a.walk(leaf)? * b.walk(leaf)?,
            Expr::Div(a, b) => {
                let (p, q) = (a.walk(leaf)?, b.walk(leaf)?);
                if q.value() == 0.0 {
                    return Err(fail("division by zero", self));
                }
                p / q
            }
            Expr::Pow(a, b) => {
                let (p, q) = (a.walk(leaf)?, b.walk(leaf)?);
                let base = p.value();
                if base < 0.0 && q.value().fract() != 0.0 {
                    return Err(fail("negative base with non-integer exponent", self));
                }
                if base == 0.0 && q.value() < 0.0 {
                    return Err(fail("zero raised to a negative power", self));
                }
                p.pow(q).ok_or_else(|| fail("power with variable exponent of a non-positive base", self))?
            }
            Expr::Call(f, a) => {
                let p = a.walk(leaf)?;
                match f {
                    Func::Exp => p.exp(),
                    Func::Log => {
                        if p.value() <= 0.0 {
                            return Err(fail("log of a non-positive value", self));
                        }
                        p.ln()
                    }
                    Func::Sqrt => {
                        if p.value() < 0.0 {
                            return Err(fail("sqrt of a negative value", self));
                        }
                        if p.value() == 0.0 && p.has_tangent() {
                            return Err(fail("sqrt is not differentiable at 0", self));
                        }
                        p.sqrt()
                    }
                    Func::NormCdf => p.normcdf(),
                    Func::NormPdf => p.normpdf(),
                }
            }
        };
        if !out.is_finite() {
            return Err(fail("non-finite value", self));
        }
        Ok(out)
    }
}

#[derive(Clone, Copy)]
enum Leaf {
    Num(f64),
    X(usize),
    Theta(usize),
}

trait Scalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    fn value(self) -> f64;
    fn has_tangent(self) -> bool;
    fn is_finite(self) -> bool;
    fn pow(self, e: Self) -> Option<Self>;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn normcdf(self) -> Self;
    fn normpdf(self) -> Self;
}

#[derive(Clone, Copy, Debug)]
struct Real(f64);

impl Add for Real {
    type Output = Real;
    fn add(self, o: Real) -> Real {
        Real(self.0 + o.0)
    }
}
impl Sub for Real {
    type Output = Real;
    fn sub(self, o: Real) -> Real {
        Real(self.0 - o.0)
    }
}
impl Mul for Real {
    type Output = Real;
    fn mul(self, o: Real) -> Real {
        Real(self.0 * o.0)
    }
}
impl Div for Real {
    type Output = Real;
    fn div(self, o: Real) -> Real {
        Real(self.0 / o.0)
    }
}
impl Neg for Real {
    type Output = Real;
    fn neg(self) -> Real {
        Real(-self.0)
    }
}

impl Scalar for Real {
    fn value(self) -> f64 {
        self.0
    }
    fn has_tangent(self) -> bool {
        false
    }
    fn is_finite(self) -> bool {
        self.0.is_finite()
    }
    fn pow(self, e: Real) -> Option<Real> {
        Some(Real(self.0.powf(e.0)))
    }
    fn exp(self) -> Real {
        Real(self.0.exp())
    }
    fn ln(self) -> Real {
        Real(self.0.ln())
    }
    fn sqrt(self) -> Real {
        Real(self.0.sqrt())
    }
    fn normcdf(self) -> Real {
        Real(normal::cdf(self.0))
    }
    fn normpdf(self) -> Real {
        Real(normal::pdf(self.0))
    }
}

/// Forward-mode dual number `v + d·ε`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual {
    pub v: f64,
    pub d: f64,
}

impl Dual {
    pub fn constant(v: f64) -> Self {
        Self { v, d: 0.0 }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual {
            v: self.v + o.v,
            d: self.d + o.d,
        }
    }
}
impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual {
            v: self.v - o.v,
            d: self.d - o.d,
        }
    }
}
impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual {
            v: self.v * o.v,
            d: self.d * o.v + self.v * o.d,
        }
    }
}
impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        let v = self.v / o.v;
        Dual {
            v,
            d: (self.d - v * o.d) / o.v,
        }
    }
}
impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual {
            v: -self.v,
            d: -self.d,
        }
    }
}

impl Scalar for Dual {
    fn value(self) -> f64 {
        self.v
    }
    fn has_tangent(self) -> bool {
        self.d != 0.0
    }
    fn is_finite(self) -> bool {
        self.v.is_finite() && self.d.is_finite()
    }
    fn pow(self, e: Dual) -> Option<Dual> {
        let v = self.v.powf(e.v);
        if e.d == 0.0 {
            // constant exponent: b a^{b-1} a'
            let d = if self.d == 0.0 {
                0.0
            } else {
                e.v * self.v.powf(e.v - 1.0) * self.d
            };
            Some(Dual { v, d })
        } else {
            if self.v <= 0.0 {
                return None;
            }
            Some(Dual {
                v,
                d: v * (e.d * self.v.ln() + e.v * self.d / self.v),
            })
        }
    }
    fn exp(self) -> Dual {
        let v = self.v.exp();
        Dual { v, d: v * self.d }
    }
    fn ln(self) -> Dual {
        Dual {
            v: self.v.ln(),
            d: self.d / self.v,
        }
    }
    fn sqrt(self) -> Dual {
        let v = self.v.sqrt();
        Dual {
            v,
            d: if self.d == 0.0 { 0.0 } else { self.d / (2.0 * v) },
        }
    }
    fn normcdf(self) -> Dual {
        Dual {
            v: normal::cdf(self.v),
            d: normal::pdf(self.v) * self.d,
        }
    }
    fn normpdf(self) -> Dual {
        let p = normal::pdf(self.v);
        Dual {
            v: p,
            d: -self.v * p * self.d,
        }
    }
}

/// Fully parenthesized form that parses back to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::X(i) => write!(f, "x{}", i + 1),
            Expr::Theta(i) => write!(f, "th{}", i + 1),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

/// `∂e/∂θ` at `(x, θ)`, one dual sweep per parameter.
pub fn diff_theta(e: &Expr, x: &[f64], theta: &[f64]) -> Result<Vec<f64>, DomainError> {
    let mut out = vec![0.0; theta.len()];
    diff_theta_into(e, x, theta, &mut out)?;
    Ok(out)
}

pub fn diff_theta_into(
    e: &Expr,
    x: &[f64],
    theta: &[f64],
    out: &mut [f64],
) -> Result<(), DomainError> {
    for (j, o) in out.iter_mut().enumerate() {
        *o = e.eval_dual(x, theta, j)?.d;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_expr;

    const P2_ETA: &str = "th1 + th2*exp(-th3*x1) + th4/(th4-th5) * (exp(-th5*x2) - exp(-th4*x2))";
    const P2_THETA: [f64; 5] = [1.0, 1.0, 2.0, 0.7, 0.2];

    #[test]
    fn evaluation_examples() {
        assert_eq!(Expr::Num(3.5).eval(&[], &[]).unwrap(), 3.5);
        assert_eq!(parse_expr("x1*x2", 2, 2).unwrap().eval(&[2.0, 3.0], &[]).unwrap(), 6.0);
        let pdf0 = parse_expr("normpdf(0)", 1, 2).unwrap().eval(&[0.0], &[]).unwrap();
        assert!((pdf0 - 0.3989422804014327).abs() < 1e-16);
        let eta = parse_expr(P2_ETA, 2, 5).unwrap();
        assert_eq!(eta.eval(&[0.0, 0.0], &P2_THETA).unwrap(), 2.0);
    }

    #[test]
    fn domain_errors_name_the_subexpression() {
        let e = parse_expr("1 + 1/(x1 - 1)", 1, 2).unwrap();
        let err = e.eval(&[1.0], &[]).unwrap_err();
        assert_eq!(err.reason, "division by zero");
        assert_eq!(err.subexpr, "(1.0 / (x1 - 1.0))");
        let err = parse_expr("log(x1)", 1, 2).unwrap().eval(&[0.0], &[]).unwrap_err();
        assert_eq!(err.reason, "log of a non-positive value");
        assert!(parse_expr("sqrt(x1)", 1, 2).unwrap().eval(&[-1.0], &[]).is_err());
        assert!(parse_expr("x1^0.5", 1, 2).unwrap().eval(&[-1.0], &[]).is_err());
        assert!(parse_expr("x1^-1", 1, 2).unwrap().eval(&[0.0], &[]).is_err());
        assert!(parse_expr("exp(x1)", 1, 2).unwrap().eval(&[1000.0], &[]).is_err());
        assert_eq!(parse_expr("x1^3", 1, 2).unwrap().eval(&[-2.0], &[]).unwrap(), -8.0);
    }

    #[test]
    fn derivative_examples() {
        let e = parse_expr("th1 + th2*x1", 1, 2).unwrap();
        assert_eq!(diff_theta(&e, &[5.0], &[0.3, -0.7]).unwrap(), vec![1.0, 5.0]);
        let e = parse_expr("exp(th1)", 1, 1).unwrap();
        assert_eq!(diff_theta(&e, &[0.0], &[0.0]).unwrap(), vec![1.0]);
        let e = parse_expr("x1^th1", 1, 1).unwrap();
        let g = diff_theta(&e, &[2.0], &[3.0]).unwrap();
        assert!((g[0] - 8.0 * 2f64.ln()).abs() < 1e-14);
        let e = parse_expr("normcdf(th1*x1) + sqrt(th2) + log(th2)", 1, 2).unwrap();
        let g = diff_theta(&e, &[2.0], &[0.5, 4.0]).unwrap();
        assert!((g[0] - 2.0 * normal::pdf(1.0)).abs() < 1e-15);
        assert!((g[1] - (0.25 + 0.25)).abs() < 1e-15);
    }

    #[test]
    fn problem2_gradient_matches_central_differences() {
        let eta = parse_expr(P2_ETA, 2, 5).unwrap();
        let x = [1.0, 1.0];
        let g = diff_theta(&eta, &x, &P2_THETA).unwrap();
        for j in 0..5 {
            let h = 1e-6 * P2_THETA[j].abs().max(1.0);
            let mut tp = P2_THETA;
            let mut tm = P2_THETA;
            tp[j] += h;
            tm[j] -= h;
            let fd = (eta.eval(&x, &tp).unwrap() - eta.eval(&x, &tm).unwrap()) / (2.0 * h);
            assert!((g[j] - fd).abs() <= 1e-6 * g[j].abs().max(1e-3), "θ{}: {} vs {}", j + 1, g[j], fd);
        }
    }

    #[test]
    fn gradient_at_origin_matches_hand_derivation() {
        let eta = parse_expr(P2_ETA, 2, 5).unwrap();
        let g = diff_theta(&eta, &[0.0, 0.0], &P2_THETA).unwrap();
        assert_eq!(g, vec![1.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn printing_is_parseable() {
        let src = "-(x1 - 2.5e-7) ^ 2 / th1 + normcdf(-th2)";
        let e = parse_expr(src, 1, 2).unwrap();
        assert_eq!(parse_expr(&e.to_string(), 1, 2).unwrap(), e);
        assert_eq!(e.max_x(), Some(0));
        assert_eq!(e.max_theta(), Some(1));
    }
}
