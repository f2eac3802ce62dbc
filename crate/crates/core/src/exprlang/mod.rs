//! The small expression language in which all chart data is written.
//!
//! Expressions are real-valued formulas over the fixed chart variables
//! `x1..xn` (base), `y0, y1..ym` (fibre), `v1..vk` (anchored bundle) and `t`
//! (curve parameter). They can be parsed, printed, evaluated and
//! differentiated exactly:
//!
//! ```
//! use rhoconn::exprlang::{Env, Expr, Var};
//!
//! let e: Expr = "sin(x1)*v1".parse().unwrap();
//! let d = e.diff(Var::X(1));
//! let env = Env::new().with(Var::X(1), 0.0).with(Var::V(1), 2.0);
//! assert_eq!(d.eval(&env).unwrap(), 2.0);
//! ```
//!
//! Grammar, loosest binding first: `+ -` (left), `* /` (left), unary `-`,
//! `^` (right). Unary minus binds looser than `^`, so `-x1^2` is `-(x1^2)`.

mod diff;
mod eval;
mod parse;
mod poly;
mod print;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use parse::parse;

/// A chart variable. Indices are 1-based, except `Y(0)` which is the extra
/// bidual coordinate `y0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    X(usize),
    Y(usize),
    V(usize),
    T,
}

impl Var {
    /// Parses a variable name such as `x3`, `y0` or `t`.
    pub fn from_name(name: &str) -> Option<Var> {
        if name == "t" {
            return Some(Var::T);
        }
        let (head, digits) = name.split_at(1.min(name.len()));
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        // no leading zeros, so every variable has exactly one spelling
        if digits.len() > 1 && digits.starts_with('0') {
            return None;
        }
        let index: usize = digits.parse().ok()?;
        match (head, index) {
            ("x", i) if i >= 1 => Some(Var::X(i)),
            ("y", i) => Some(Var::Y(i)),
            ("v", i) if i >= 1 => Some(Var::V(i)),
            _ => None,
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::X(i) => write!(f, "x{i}"),
            Var::Y(i) => write!(f, "y{i}"),
            Var::V(i) => write!(f, "v{i}"),
            Var::T => f.write_str("t"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }
}

/// Expression tree. Literals are always non-negative when produced by the
/// parser or by the folding constructors; a negative constant is `Neg(Num)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    /// Constant with the sign carried by a `Neg` node.
    pub fn constant(c: f64) -> Expr {
        if c < 0.0 {
            Expr::Neg(Box::new(Expr::Num(-c)))
        } else {
            // normalises -0.0
            Expr::Num(c.abs())
        }
    }

    pub fn zero() -> Expr {
        Expr::Num(0.0)
    }

    /// The value of a literal or a negated literal.
    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Num(c) => Some(*c),
            Expr::Neg(inner) => match inner.as_ref() {
                Expr::Num(c) => Some(-c),
                _ => None,
            },
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    /// Every variable mentioned in the tree.
    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(v) => {
                out.insert(*v);
            }
            Expr::Neg(a) | Expr::Call(_, a) => a.collect_vars(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn depends_on(&self, var: Var) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(a) | Expr::Call(_, a) => a.depends_on(var),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.depends_on(var) || b.depends_on(var)
            }
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::Call(_, a) => 1 + a.size(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                1 + a.size() + b.size()
            }
        }
    }
}

impl FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Self {
        Expr::constant(c)
    }
}

impl From<Var> for Expr {
    fn from(v: Var) -> Self {
        Expr::Var(v)
    }
}

/// Variable bindings for evaluation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Env {
    values: BTreeMap<Var, f64>,
}

impl Env {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, var: Var, value: f64) -> Self {
        self.set(var, value);
        self
    }

    pub fn set(&mut self, var: Var, value: f64) {
        self.values.insert(var, value);
    }

    pub fn get(&self, var: Var) -> Option<f64> {
        self.values.get(&var).copied()
    }

    /// Binds `x1..xn` from a slice.
    pub fn with_x(mut self, x: &[f64]) -> Self {
        for (i, &xi) in x.iter().enumerate() {
            self.set(Var::X(i + 1), xi);
        }
        self
    }

    /// Binds `y1..ym` from a slice.
    pub fn with_y(mut self, y: &[f64]) -> Self {
        for (i, &yi) in y.iter().enumerate() {
            self.set(Var::Y(i + 1), yi);
        }
        self
    }

    /// Binds `v1..vk` from a slice.
    pub fn with_v(mut self, v: &[f64]) -> Self {
        for (i, &vi) in v.iter().enumerate() {
            self.set(Var::V(i + 1), vi);
        }
        self
    }

    pub fn with_t(self, t: f64) -> Self {
        self.with(Var::T, t)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function `{name}` at byte {offset}")]
    UnknownFunction { offset: usize, name: String },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. } | ParseError::UnknownFunction { offset, .. } => *offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(Var),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("non-finite result in {0}")]
    NonFinite(&'static str),
}
