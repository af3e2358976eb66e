//! Text model files.
//!
//! ```text
//! # quadratic regression on three levels
//! k = 1
//! m = 3
//! family = linear
//! factor 1: {-1, 0, 1}
//! h1 = 1
//! h2 = x1
//! h3 = x1^2
//! ```
//!
//! Directives: `k = <int>`, `m = <int>`, `family = linear|nonlinear|logistic|probit|poisson`,
//! `theta0 = [..]`, `factor <i>: <lo> <hi> <step>` or `factor <i>: {l1, l2, ...}`,
//! and either `h1 = <expr>` … `hm = <expr>` or `eta = <expr>` (nonlinear family).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use super::expr::{diff_theta_into, Expr};
use super::parser::{parse_expr_at, ParseError, Scope};
use crate::error::{Error, Result};
use crate::grid::{FactorGrid, LevelSpec};
use crate::models::{GlmFamily, Model, Regressor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Linear,
    Nonlinear,
    Glm(GlmFamily),
}

impl FromStr for Family {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "linear" => Ok(Family::Linear),
            "nonlinear" => Ok(Family::Nonlinear),
            other => other
                .parse::<GlmFamily>()
                .map(Family::Glm)
                .map_err(|_| format!("unknown family `{other}`")),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Linear => f.write_str("linear"),
            Family::Nonlinear => f.write_str("nonlinear"),
            Family::Glm(g) => write!(f, "{g}"),
        }
    }
}

/// Either the `m` components of `h`, or the mean function `η`.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelBody {
    Components(Vec<Expr>),
    Mean(Expr),
}

/// A parsed model file.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub k: usize,
    pub m: usize,
    pub family: Family,
    pub theta0: Option<Vec<f64>>,
    pub factors: Vec<LevelSpec>,
    pub body: ModelBody,
}

fn err(line: usize, col: usize, message: impl Into<String>, expected: &[&str]) -> ParseError {
    ParseError {
        line,
        col,
        message: message.into(),
        expected: expected.iter().map(|s| s.to_string()).collect(),
    }
}

fn parse_number(text: &str, line: usize, col: usize) -> std::result::Result<f64, ParseError> {
    text.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| err(line, col, format!("expected a number, found `{}`", text.trim()), &["number"]))
}

fn parse_list(text: &str, open: char, close: char, line: usize, col: usize) -> std::result::Result<Vec<f64>, ParseError> {
    let t = text.trim();
    let inner = t
        .strip_prefix(open)
        .and_then(|s| s.strip_suffix(close))
        .ok_or_else(|| err(line, col, format!("expected `{open}...{close}`"), &[&format!("`{open}`")]))?;
    if inner.trim().is_empty() {
        return Ok(vec![]);
    }
    inner
        .split(',')
        .map(|v| parse_number(v, line, col))
        .collect()
}

struct Pending {
    line: usize,
    col: usize,
    text: String,
}

/// Parses a model file.
pub fn parse(source: &str) -> std::result::Result<ModelFile, ParseError> {
    let mut k = None;
    let mut m = None;
    let mut family = None;
    let mut theta0 = None;
    let mut factors: BTreeMap<usize, (LevelSpec, usize)> = BTreeMap::new();
    let mut hs: BTreeMap<usize, Pending> = BTreeMap::new();
    let mut eta: Option<Pending> = None;

    for (ln0, raw) in source.lines().enumerate() {
        let line = ln0 + 1;
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let indent = content.len() - content.trim_start().len();
        let content = content.trim();

        if let Some(rest) = content.strip_prefix("factor") {
            let (idx, spec) = rest.split_once(':').ok_or_else(|| {
                err(line, indent + 1, "factor directive needs `:`", &["factor <i>: ..."])
            })?;
            let idx: usize = idx.trim().parse().map_err(|_| {
                err(line, indent + 7, format!("bad factor index `{}`", idx.trim()), &["integer"])
            })?;
            let spec_col = indent + content.find(':').unwrap_or(0) + 2;
            let spec = spec.trim();
            let level_spec = if spec.starts_with('{') {
                LevelSpec::List(parse_list(spec, '{', '}', line, spec_col)?)
            } else {
                let nums = spec
                    .split_whitespace()
                    .map(|v| parse_number(v, line, spec_col))
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                if nums.len() != 3 {
                    return Err(err(line, spec_col, "expected `lo hi step`", &["lo hi step", "{levels}"]));
                }
                LevelSpec::range(nums[0], nums[1], nums[2])
            };
            if factors.insert(idx, (level_spec, line)).is_some() {
                return Err(err(line, indent + 1, format!("factor {idx} declared twice"), &[]));
            }
            continue;
        }

        let (key, _) = content
            .split_once('=')
            .ok_or_else(|| err(line, indent + 1, "expected a directive", &["<name> = <value>", "factor <i>: ..."]))?;
        let key = key.trim();
        let value_col = indent + content.find('=').unwrap_or(0) + 2;
        let value_text = &content[content.find('=').unwrap_or(0) + 1..];
        match key {
            "k" | "m" => {
                let v: usize = value_text.trim().parse().map_err(|_| {
                    err(line, value_col, format!("expected an integer for `{key}`"), &["integer"])
                })?;
                let slot = if key == "k" { &mut k } else { &mut m };
                if slot.replace((v, line)).is_some() {
                    return Err(err(line, indent + 1, format!("`{key}` given twice"), &[]));
                }
            }
            "family" => {
                let f = value_text.trim().parse::<Family>().map_err(|e| {
                    err(line, value_col, e, &["linear", "nonlinear", "logistic", "probit", "poisson"])
                })?;
                family = Some(f);
            }
            "theta0" => {
                theta0 = Some((parse_list(value_text, '[', ']', line, value_col)?, line));
            }
            "eta" => {
                eta = Some(Pending {
                    line,
                    col: value_col - 1,
                    text: value_text.to_string(),
                });
            }
            _ if key.starts_with('h') && key[1..].parse::<usize>().is_ok() => {
                let i: usize = key[1..].parse().unwrap_or(0);
                let p = Pending {
                    line,
                    col: value_col - 1,
                    text: value_text.to_string(),
                };
                if i == 0 || hs.insert(i, p).is_some() {
                    return Err(err(line, indent + 1, format!("bad or repeated component `{key}`"), &[]));
                }
            }
            other => {
                return Err(err(
                    line,
                    indent + 1,
                    format!("unknown directive `{other}`"),
                    &["k", "m", "family", "theta0", "factor", "h<i>", "eta"],
                ))
            }
        }
    }

    let end = source.lines().count().max(1);
    let (k, _) = k.ok_or_else(|| err(end, 1, "missing `k`", &["k = <int>"]))?;
    let (m, m_line) = m.ok_or_else(|| err(end, 1, "missing `m`", &["m = <int>"]))?;
    let family = family.ok_or_else(|| err(end, 1, "missing `family`", &["family = <tag>"]))?;
    if k == 0 {
        return Err(err(end, 1, "k must be at least 1", &[]));
    }
    if m < 2 {
        return Err(err(m_line, 1, "m must be at least 2", &[]));
    }
    for i in 1..=k {
        if !factors.contains_key(&i) {
            return Err(err(end, 1, format!("missing `factor {i}`"), &["factor <i>: ..."]));
        }
    }
    if let Some((&i, &(_, line))) = factors.iter().find(|(&i, _)| i == 0 || i > k) {
        return Err(err(line, 1, format!("factor {i} outside 1..={k}"), &[]));
    }
    let theta0 = match (family, theta0) {
        (Family::Linear, t) => t.map(|(v, _)| v),
        (_, None) => return Err(err(end, 1, format!("family {family} needs `theta0`"), &["theta0 = [..]"])),
        (_, Some((v, line))) => {
            if v.len() != m {
                return Err(err(line, 1, format!("theta0 has {} entries, m = {m}", v.len()), &[]));
            }
            Some(v)
        }
    };

    let body = match family {
        Family::Nonlinear => {
            if let Some((_, p)) = hs.iter().next() {
                return Err(err(p.line, 1, "nonlinear family takes `eta`, not `h` components", &["eta = <expr>"]));
            }
            let p = eta.ok_or_else(|| err(end, 1, "missing `eta`", &["eta = <expr>"]))?;
            ModelBody::Mean(parse_expr_at(&p.text, Scope { k, m: Some(m) }, p.line, p.col)?)
        }
        _ => {
            if let Some(p) = eta {
                return Err(err(p.line, 1, format!("family {family} takes `h` components, not `eta`"), &["h<i> = <expr>"]));
            }
            let mut comps = Vec::with_capacity(m);
            for i in 1..=m {
                let p = hs
                    .remove(&i)
                    .ok_or_else(|| err(end, 1, format!("missing `h{i}` (m = {m})"), &[&format!("h{i} = <expr>")]))?;
                comps.push(parse_expr_at(&p.text, Scope { k, m: None }, p.line, p.col)?);
            }
            if let Some((i, p)) = hs.into_iter().next() {
                return Err(err(p.line, 1, format!("component h{i} exceeds m = {m}"), &[]));
            }
            ModelBody::Components(comps)
        }
    };

    Ok(ModelFile {
        k,
        m,
        family,
        theta0,
        factors: factors.into_values().map(|(s, _)| s).collect(),
        body,
    })
}

impl ModelFile {
    pub fn grid(&self) -> Result<FactorGrid> {
        FactorGrid::from_specs(&self.factors)
    }

    pub fn model(&self, name: &str) -> Result<Model> {
        let regressor: Arc<dyn Regressor> = match (&self.body, self.family) {
            (ModelBody::Mean(eta), _) => Arc::new(DslMean {
                k: self.k,
                eta: eta.clone(),
                theta0: self.theta0.clone().unwrap_or_default(),
            }),
            (ModelBody::Components(h), Family::Glm(fam)) => Arc::new(DslComponents {
                k: self.k,
                h: h.clone(),
                glm: Some((fam, self.theta0.clone().unwrap_or_default())),
            }),
            (ModelBody::Components(h), _) => Arc::new(DslComponents {
                k: self.k,
                h: h.clone(),
                glm: None,
            }),
        };
        Model::from_arc(name, regressor)
    }

    /// Renders the file back to text.
    pub fn to_text(&self) -> String {
        let mut s = format!("k = {}\nm = {}\nfamily = {}\n", self.k, self.m, self.family);
        if let Some(t) = &self.theta0 {
            let v: Vec<String> = t.iter().map(|x| format!("{x:?}")).collect();
            s.push_str(&format!("theta0 = [{}]\n", v.join(", ")));
        }
        for (i, f) in self.factors.iter().enumerate() {
            match f {
                LevelSpec::Range { lo, hi, step } => {
                    s.push_str(&format!("factor {}: {lo:?} {hi:?} {step:?}\n", i + 1))
                }
                LevelSpec::List(v) => {
                    let v: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
                    s.push_str(&format!("factor {}: {{{}}}\n", i + 1, v.join(", ")));
                }
            }
        }
        match &self.body {
            ModelBody::Mean(e) => s.push_str(&format!("eta = {e}\n")),
            ModelBody::Components(h) => {
                for (i, e) in h.iter().enumerate() {
                    s.push_str(&format!("h{} = {e}\n", i + 1));
                }
            }
        }
        s
    }
}

/// `f = h` (linear) or `f = √w(hᵀθ₀) h` (GLM) with textual components.
struct DslComponents {
    k: usize,
    h: Vec<Expr>,
    glm: Option<(GlmFamily, Vec<f64>)>,
}

impl Regressor for DslComponents {
    fn dim(&self) -> usize {
        self.h.len()
    }

    fn factors(&self) -> usize {
        self.k
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        for (o, e) in out.iter_mut().zip(&self.h) {
            *o = e.eval(x, &[]).map_err(|e| Error::Model(e.to_string()))?;
        }
        if let Some((fam, theta0)) = &self.glm {
            let z: f64 = out.iter().zip(theta0).map(|(a, b)| a * b).sum();
            let s = fam.sqrt_weight(z);
            out.iter_mut().for_each(|v| *v *= s);
        }
        Ok(())
    }
}

/// `f = ∂η/∂θ` at `θ₀` by forward-mode differentiation.
struct DslMean {
    k: usize,
    eta: Expr,
    theta0: Vec<f64>,
}

impl Regressor for DslMean {
    fn dim(&self) -> usize {
        self.theta0.len()
    }

    fn factors(&self) -> usize {
        self.k
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        diff_theta_into(&self.eta, x, &self.theta0, out).map_err(|e| Error::Model(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = "# quadratic regression on three levels
k = 1
m = 3
family = linear
factor 1: {-1, 0, 1}
h1 = 1
h2 = x1
h3 = x1^2
";

    #[test]
    fn toy_file_parses_and_evaluates() {
        let mf = parse(TOY).unwrap();
        assert_eq!((mf.k, mf.m, mf.family), (1, 3, Family::Linear));
        assert_eq!(mf.grid().unwrap().levels(0), &[-1.0, 0.0, 1.0]);
        let model = mf.model("toy").unwrap();
        let mut f = [0.0; 3];
        model.regression(&[-1.0], &mut f).unwrap();
        assert_eq!(f, [1.0, -1.0, 1.0]);
    }

    #[test]
    fn text_roundtrip() {
        let mf = parse(TOY).unwrap();
        assert_eq!(parse(&mf.to_text()).unwrap(), mf);
        let src = "k = 2\nm = 2\nfamily = nonlinear\ntheta0 = [1, 0.5]\nfactor 1: 0 1 0.25\nfactor 2: {3, 1, 2}\neta = th1*exp(-th2*x1) + x2\n";
        let mf = parse(src).unwrap();
        assert_eq!(parse(&mf.to_text()).unwrap(), mf);
        assert_eq!(mf.grid().unwrap().levels(1), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn glm_components_are_weighted() {
        let src = "k = 1\nm = 2\nfamily = logistic\ntheta0 = [0, 0]\nfactor 1: -1 1 1\nh1 = 1\nh2 = x1\n";
        let model = parse(src).unwrap().model("glm").unwrap();
        let mut f = [0.0; 2];
        model.regression(&[1.0], &mut f).unwrap();
        assert_eq!(f, [0.5, 0.5]);
    }

    #[test]
    fn errors_point_at_the_offending_line() {
        let cases: &[(&str, usize, &str)] = &[
            ("k = 1\nm = 2\nfamily = linear\nfactor 1: {0, 1}\nh1 = 1\nh2 = x2\n", 6, "out of range"),
            ("k = 1\nm = 2\nfamily = linear\nfactor 1: {0, 1}\nh1 = 1\nh2 = th1\n", 6, "not allowed"),
            ("k = 1\nm = 2\nfamily = cauchy\n", 3, "unknown family"),
            ("k = 1\nm = 2\nfamily = linear\nfactor 1: 0 1\n", 4, "lo hi step"),
            ("k = 1\nm = 2\nfamily = linear\nfoo = 3\n", 4, "unknown directive"),
            ("k = 1\nm = 2\nfamily = logistic\ntheta0 = [1]\nfactor 1: {0, 1}\nh1 = 1\nh2 = x1\n", 4, "theta0 has 1"),
            ("k = 1\nm = 2\nfamily = linear\nfactor 1: {0, 1}\nh1 = 1\n", 5, "missing `h2`"),
            ("k = 1\nm = 2\nfamily = linear\nfactor 1: {0, 1}\nh1 = 1\nh2 = x1\nh3 = x1\n", 7, "exceeds"),
            ("k = 2\nm = 2\nfamily = linear\nfactor 1: {0, 1}\nh1 = 1\nh2 = x1\n", 6, "missing `factor 2`"),
            ("k = 1\nm = 2\nfamily = logistic\nfactor 1: {0, 1}\nh1 = 1\nh2 = x1\n", 6, "needs `theta0`"),
            ("k = 1\nm = 1\nfamily = linear\nfactor 1: {0, 1}\nh1 = 1\n", 2, "at least 2"),
            ("k = 1\nm = 2\nfamily = nonlinear\ntheta0 = [1, 1]\nfactor 1: {0, 1}\nh1 = 1\n", 6, "takes `eta`"),
        ];
        for (src, line, needle) in cases {
            let e = parse(src).unwrap_err();
            assert_eq!(e.line, *line, "{src:?}: {e}");
            assert!(e.message.contains(needle), "{src:?}: {e}");
        }
    }

    #[test]
    fn expression_errors_report_file_columns() {
        let e = parse("k = 1\nm = 2\nfamily = linear\nfactor 1: {0, 1}\nh1 = 1\nh2 =   x1 +\n").unwrap_err();
        assert_eq!((e.line, e.col), (6, 12));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let src = "\n# header\nk = 1 # factors\n\nm = 3\nfamily = linear\nfactor 1: {-1, 0, 1}\nh1 = 1\nh2 = x1 # slope\nh3 = x1^2\n";
        assert_eq!(parse(src).unwrap(), parse(TOY).unwrap());
    }
}
