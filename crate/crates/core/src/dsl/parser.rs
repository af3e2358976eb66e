//! Tokenizer and recursive-descent parser for expressions.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := '-' term | product
//! product := factor (('*' | '/') factor)*
//! factor  := '-' factor | power
//! power   := atom ('^' factor)?          // right-associative
//! atom    := number | x<i> | th<j> | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! A leading minus applies to the whole product that follows it, so
//! `-a*b` is `-(a*b)` and `-x^2` is `-(x^2)`.

use std::fmt;

use super::expr::{Expr, Func};

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
    pub expected: Vec<String>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected.join(", "))?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(v) => write!(f, "number {v}"),
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Op(c) => write!(f, "`{c}`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::End => f.write_str("end of input"),
        }
    }
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col0: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str, line: usize, col0: usize) -> Result<Vec<(Tok, usize)>, ParseError> {
        let mut lx = Lexer {
            src: src.as_bytes(),
            pos: 0,
            line,
            col0,
        };
        let mut out = Vec::new();
        loop {
            while lx.pos < lx.src.len() && lx.src[lx.pos].is_ascii_whitespace() {
                lx.pos += 1;
            }
            let col = lx.col0 + lx.pos + 1;
            let Some(&c) = lx.src.get(lx.pos) else {
                out.push((Tok::End, col));
                return Ok(out);
            };
            let tok = match c {
                b'0'..=b'9' | b'.' => lx.number()?,
                b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                    let start = lx.pos;
                    while lx.pos < lx.src.len()
                        && (lx.src[lx.pos].is_ascii_alphanumeric() || lx.src[lx.pos] == b'_')
                    {
                        lx.pos += 1;
                    }
                    Tok::Ident(src[start..lx.pos].to_string())
                }
                b'+' | b'-' | b'*' | b'/' | b'^' => {
                    lx.pos += 1;
                    Tok::Op(c as char)
                }
                b'(' => {
                    lx.pos += 1;
                    Tok::LParen
                }
                b')' => {
                    lx.pos += 1;
                    Tok::RParen
                }
                _ => {
                    return Err(ParseError {
                        line: lx.line,
                        col,
                        message: format!("unexpected character `{}`", c as char),
                        expected: vec![],
                    })
                }
            };
            out.push((tok, col));
        }
    }

    fn number(&mut self) -> Result<Tok, ParseError> {
        let start = self.pos;
        let s = self.src;
        let digits = |p: &mut usize| {
            while *p < s.len() && s[*p].is_ascii_digit() {
                *p += 1;
            }
        };
        digits(&mut self.pos);
        if self.pos < s.len() && s[self.pos] == b'.' {
            self.pos += 1;
            digits(&mut self.pos);
        }
        if self.pos < s.len() && (s[self.pos] == b'e' || s[self.pos] == b'E') {
            let mut p = self.pos + 1;
            if p < s.len() && (s[p] == b'+' || s[p] == b'-') {
                p += 1;
            }
            if p < s.len() && s[p].is_ascii_digit() {
                digits(&mut p);
                self.pos = p;
            }
        }
        let text = std::str::from_utf8(&s[start..self.pos]).unwrap_or_default();
        text.parse::<f64>().map(Tok::Num).map_err(|_| ParseError {
            line: self.line,
            col: self.col0 + start + 1,
            message: format!("malformed number `{text}`"),
            expected: vec!["number".into()],
        })
    }
}

/// Declared variable ranges; `None` disallows the variable kind entirely.
#[derive(Debug, Clone, Copy)]
pub struct Scope {
    pub k: usize,
    pub m: Option<usize>,
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    line: usize,
    scope: Scope,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn col(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: String, expected: &[&str]) -> ParseError {
        ParseError {
            line: self.line,
            col: self.col(),
            message,
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Op('+') => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Op('-') => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.term()?)));
        }
        self.product()
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Tok::Op('*') => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Tok::Op('/') => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            let exp = self.factor()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        const EXPECTED: &[&str] = &["number", "variable", "function", "`(`", "`-`"];
        let col = self.col();
        match self.bump() {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if let Some(func) = Func::from_name(&name) {
                    if *self.peek() != Tok::LParen {
                        return Err(self.error(
                            format!("function `{name}` needs an argument"),
                            &["`(`"],
                        ));
                    }
                    self.bump();
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                self.variable(&name, col)
            }
            tok => Err(ParseError {
                line: self.line,
                col,
                message: format!("unexpected {tok}"),
                expected: EXPECTED.iter().map(|s| s.to_string()).collect(),
            }),
        }
    }

    fn variable(&self, name: &str, col: usize) -> Result<Expr, ParseError> {
        let err = |message: String, expected: Vec<String>| ParseError {
            line: self.line,
            col,
            message,
            expected,
        };
        let (kind, digits) = if let Some(d) = name.strip_prefix("th") {
            ("th", d)
        } else if let Some(d) = name.strip_prefix('x') {
            ("x", d)
        } else {
            return Err(err(
                format!("unknown identifier `{name}`"),
                vec!["x<i>".into(), "th<j>".into(), "function name".into()],
            ));
        };
        let idx: usize = match digits.parse() {
            Ok(i) if i >= 1 && !digits.starts_with('0') => i,
            _ => {
                return Err(err(
                    format!("unknown identifier `{name}`"),
                    vec![format!("{kind}<index ≥ 1>")],
                ))
            }
        };
        match kind {
            "x" if idx <= self.scope.k => Ok(Expr::X(idx - 1)),
            "x" => Err(err(
                format!("`{name}` out of range: k = {}", self.scope.k),
                vec![format!("x1..x{}", self.scope.k)],
            )),
            _ => match self.scope.m {
                Some(m) if idx <= m => Ok(Expr::Theta(idx - 1)),
                Some(m) => Err(err(
                    format!("`{name}` out of range: m = {m}"),
                    vec![format!("th1..th{m}")],
                )),
                None => Err(err(
                    format!("parameter `{name}` not allowed here"),
                    vec!["x<i>".into()],
                )),
            },
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if *self.peek() == Tok::RParen {
            self.bump();
            Ok(())
        } else {
            let t = self.peek().clone();
            Err(self.error(format!("unexpected {t}"), &["`)`", "operator"]))
        }
    }
}

/// Parses one expression; `line` and `col0` locate it within a larger file.
pub fn parse_expr_at(src: &str, scope: Scope, line: usize, col0: usize) -> Result<Expr, ParseError> {
    let toks = Lexer::tokens(src, line, col0)?;
    let mut p = Parser {
        toks,
        pos: 0,
        line,
        scope,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        let t = p.peek().clone();
        return Err(p.error(format!("unexpected {t}"), &["operator", "end of input"]));
    }
    Ok(e)
}

/// Parses an expression over `x1..xk` and `th1..thm`.
pub fn parse_expr(src: &str, k: usize, m: usize) -> Result<Expr, ParseError> {
    parse_expr_at(src, Scope { k, m: Some(m) }, 1, 0)
}
