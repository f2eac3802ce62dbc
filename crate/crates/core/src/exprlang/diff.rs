//! Symbolic differentiation and the folding constructors it builds with.

use super::{Expr, Func, Var};

fn both_const(a: &Expr, b: &Expr, op: impl Fn(f64, f64) -> f64) -> Option<Expr> {
    let r = op(a.as_const()?, b.as_const()?);
    r.is_finite().then(|| Expr::constant(r))
}

impl Expr {
    pub fn add(a: Expr, b: Expr) -> Expr {
        if let Some(c) = both_const(&a, &b, |x, y| x + y) {
            return c;
        }
        if a.is_zero() {
            return b;
        }
        if b.is_zero() {
            return a;
        }
        Expr::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        if let Some(c) = both_const(&a, &b, |x, y| x - y) {
            return c;
        }
        if b.is_zero() {
            return a;
        }
        if a.is_zero() {
            return Expr::neg(b);
        }
        Expr::Sub(Box::new(a), Box::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        if let Some(c) = both_const(&a, &b, |x, y| x * y) {
            return c;
        }
        if a.is_zero() || b.is_zero() {
            return Expr::zero();
        }
        if a.as_const() == Some(1.0) {
            return b;
        }
        if b.as_const() == Some(1.0) {
            return a;
        }
        Expr::Mul(Box::new(a), Box::new(b))
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        if b.as_const().is_some_and(|c| c != 0.0) {
            if let Some(c) = both_const(&a, &b, |x, y| x / y) {
                return c;
            }
        }
        if b.as_const() == Some(1.0) {
            return a;
        }
        if a.is_zero() {
            return Expr::zero();
        }
        Expr::Div(Box::new(a), Box::new(b))
    }

    pub fn neg(a: Expr) -> Expr {
        if let Some(c) = a.as_const() {
            return Expr::constant(-c);
        }
        match a {
            Expr::Neg(inner) => *inner,
            other => Expr::Neg(Box::new(other)),
        }
    }

    pub fn pow(a: Expr, b: Expr) -> Expr {
        match b.as_const() {
            Some(c) if c == 0.0 => return Expr::Num(1.0),
            Some(c) if c == 1.0 => return a,
            Some(c) if c.fract() == 0.0 => {
                if let Some(base) = a.as_const() {
                    let r = base.powi(c as i32);
                    if r.is_finite() {
                        return Expr::constant(r);
                    }
                }
            }
            _ => {}
        }
        Expr::Pow(Box::new(a), Box::new(b))
    }

    pub fn call(func: Func, a: Expr) -> Expr {
        Expr::Call(func, Box::new(a))
    }

    /// Sum of an iterator of terms, folding zeros away.
    pub fn sum(terms: impl IntoIterator<Item = Expr>) -> Expr {
        terms.into_iter().fold(Expr::zero(), Expr::add)
    }

    /// Exact partial derivative with respect to `var`.
    pub fn diff(&self, var: Var) -> Expr {
        match self {
            Expr::Num(_) => Expr::zero(),
            Expr::Var(v) => Expr::Num(if *v == var { 1.0 } else { 0.0 }),
            Expr::Neg(a) => Expr::neg(a.diff(var)),
            Expr::Add(a, b) => Expr::add(a.diff(var), b.diff(var)),
            Expr::Sub(a, b) => Expr::sub(a.diff(var), b.diff(var)),
            Expr::Mul(a, b) => Expr::add(
                Expr::mul(a.diff(var), (**b).clone()),
                Expr::mul((**a).clone(), b.diff(var)),
            ),
            Expr::Div(a, b) => Expr::div(
                Expr::sub(
                    Expr::mul(a.diff(var), (**b).clone()),
                    Expr::mul((**a).clone(), b.diff(var)),
                ),
                Expr::pow((**b).clone(), Expr::Num(2.0)),
            ),
            Expr::Pow(a, b) => {
                let da = a.diff(var);
                if !b.depends_on(var) {
                    let lowered = match b.as_const() {
                        Some(c) if c.fract() == 0.0 => Expr::constant(c - 1.0),
                        _ => Expr::sub((**b).clone(), Expr::Num(1.0)),
                    };
                    return Expr::mul(
                        Expr::mul((**b).clone(), Expr::pow((**a).clone(), lowered)),
                        da,
                    );
                }
                // a^b (b' log a + b a'/a), only defined for a > 0 anyway
                let db = b.diff(var);
                Expr::mul(
                    self.clone(),
                    Expr::add(
                        Expr::mul(db, Expr::call(Func::Log, (**a).clone())),
                        Expr::div(Expr::mul((**b).clone(), da), (**a).clone()),
                    ),
                )
            }
            Expr::Call(func, a) => {
                let da = a.diff(var);
                if da.is_zero() {
                    return Expr::zero();
                }
                let inner = (**a).clone();
                let outer = match func {
                    Func::Sin => Expr::call(Func::Cos, inner),
                    Func::Cos => Expr::neg(Expr::call(Func::Sin, inner)),
                    Func::Exp => Expr::call(Func::Exp, inner),
                    Func::Log => return Expr::div(da, inner),
                    Func::Sqrt => {
                        return Expr::div(da, Expr::mul(Expr::Num(2.0), Expr::call(Func::Sqrt, inner)))
                    }
                };
                Expr::mul(outer, da)
            }
        }
    }

    /// Replaces variables according to `f`, folding the result. Returning
    /// `None` keeps the variable.
    pub fn substitute(&self, f: &impl Fn(Var) -> Option<Expr>) -> Expr {
        match self {
            Expr::Num(c) => Expr::Num(*c),
            Expr::Var(v) => f(*v).unwrap_or(Expr::Var(*v)),
            Expr::Neg(a) => Expr::neg(a.substitute(f)),
            Expr::Add(a, b) => Expr::add(a.substitute(f), b.substitute(f)),
            Expr::Sub(a, b) => Expr::sub(a.substitute(f), b.substitute(f)),
            Expr::Mul(a, b) => Expr::mul(a.substitute(f), b.substitute(f)),
            Expr::Div(a, b) => Expr::div(a.substitute(f), b.substitute(f)),
            Expr::Pow(a, b) => Expr::pow(a.substitute(f), b.substitute(f)),
            Expr::Call(func, a) => Expr::call(*func, a.substitute(f)),
        }
    }

    /// Renames variables, leaving the tree shape untouched.
    pub fn rename(&self, f: &impl Fn(Var) -> Var) -> Expr {
        match self {
            Expr::Num(c) => Expr::Num(*c),
            Expr::Var(v) => Expr::Var(f(*v)),
            Expr::Neg(a) => Expr::Neg(Box::new(a.rename(f))),
            Expr::Add(a, b) => Expr::Add(Box::new(a.rename(f)), Box::new(b.rename(f))),
            Expr::Sub(a, b) => Expr::Sub(Box::new(a.rename(f)), Box::new(b.rename(f))),
            Expr::Mul(a, b) => Expr::Mul(Box::new(a.rename(f)), Box::new(b.rename(f))),
            Expr::Div(a, b) => Expr::Div(Box::new(a.rename(f)), Box::new(b.rename(f))),
            Expr::Pow(a, b) => Expr::Pow(Box::new(a.rename(f)), Box::new(b.rename(f))),
            Expr::Call(func, a) => Expr::Call(*func, Box::new(a.rename(f))),
        }
    }
}
