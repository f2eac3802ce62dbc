//! Expansion into a sum of monomials. Subtrees that are not polynomial
//! (function calls, division by non-constants, non-integer powers) are kept
//! whole and treated as opaque atoms.

use std::collections::BTreeMap;

use super::{Expr, Var};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Atom {
    Var(Var),
    Opaque(String),
}

type Monomial = Vec<(Atom, u32)>;

#[derive(Default)]
struct Poly {
    terms: BTreeMap<Monomial, f64>,
    opaque: BTreeMap<String, Expr>,
}

// largest integer power expanded term by term
const MAX_POWER: f64 = 16.0;

impl Poly {
    fn constant(c: f64) -> Poly {
        let mut p = Poly::default();
        p.terms.insert(Vec::new(), c);
        p
    }

    fn atom(atom: Atom) -> Poly {
        let mut p = Poly::default();
        p.terms.insert(vec![(atom, 1)], 1.0);
        p
    }

    fn opaque(e: &Expr) -> Poly {
        let key = e.to_string();
        let mut p = Poly::atom(Atom::Opaque(key.clone()));
        p.opaque.insert(key, e.clone());
        p
    }

    fn scale(mut self, c: f64) -> Poly {
        for v in self.terms.values_mut() {
            *v *= c;
        }
        self
    }

    fn plus(mut self, other: Poly) -> Poly {
        for (m, c) in other.terms {
            *self.terms.entry(m).or_insert(0.0) += c;
        }
        self.opaque.extend(other.opaque);
        self
    }

    fn times(self, other: &Poly) -> Poly {
        let mut out = Poly { terms: BTreeMap::new(), opaque: self.opaque };
        out.opaque.extend(other.opaque.clone());
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                *out.terms.entry(multiply(ma, mb)).or_insert(0.0) += ca * cb;
            }
        }
        out
    }

    fn as_constant(&self) -> Option<f64> {
        match self.terms.len() {
            0 => Some(0.0),
            1 => self.terms.get(&Vec::new()).copied(),
            _ => None,
        }
    }

    fn into_expr(self) -> Expr {
        let mut terms: Vec<(Monomial, f64)> = self.terms.into_iter().filter(|(_, c)| *c != 0.0).collect();
        terms.sort_by(|(a, _), (b, _)| degree(a).cmp(&degree(b)).then_with(|| a.cmp(b)));
        let mut out: Option<Expr> = None;
        for (m, c) in terms {
            let factors = m.iter().map(|(atom, p)| {
                let base = match atom {
                    Atom::Var(v) => Expr::Var(*v),
                    Atom::Opaque(key) => self.opaque[key].clone(),
                };
                Expr::pow(base, Expr::Num(f64::from(*p)))
            });
            let product = factors.reduce(Expr::mul).unwrap_or(Expr::Num(1.0));
            out = Some(match out {
                None => Expr::mul(Expr::constant(c), product),
                Some(acc) if c < 0.0 => Expr::sub(acc, Expr::mul(Expr::Num(-c), product)),
                Some(acc) => Expr::add(acc, Expr::mul(Expr::Num(c), product)),
            });
        }
        out.unwrap_or_else(Expr::zero)
    }
}

fn degree(m: &Monomial) -> u32 {
    m.iter().map(|(_, p)| p).sum()
}

fn multiply(a: &Monomial, b: &Monomial) -> Monomial {
    let mut merged: BTreeMap<Atom, u32> = a.iter().cloned().collect();
    for (atom, p) in b {
        *merged.entry(atom.clone()).or_insert(0) += p;
    }
    merged.into_iter().collect()
}

fn to_poly(e: &Expr) -> Poly {
    match e {
        Expr::Num(c) => Poly::constant(*c),
        Expr::Var(v) => Poly::atom(Atom::Var(*v)),
        Expr::Neg(a) => to_poly(a).scale(-1.0),
        Expr::Add(a, b) => to_poly(a).plus(to_poly(b)),
        Expr::Sub(a, b) => to_poly(a).plus(to_poly(b).scale(-1.0)),
        Expr::Mul(a, b) => to_poly(a).times(&to_poly(b)),
        Expr::Div(a, b) => {
            let denominator = to_poly(b);
            match denominator.as_constant() {
                Some(c) if c != 0.0 => to_poly(a).scale(1.0 / c),
                _ => Poly::opaque(e),
            }
        }
        Expr::Pow(a, b) => match b.as_const() {
            Some(n) if n >= 0.0 && n.fract() == 0.0 && n <= MAX_POWER => {
                let base = to_poly(a);
                (0..n as u32).fold(Poly::constant(1.0), |acc, _| acc.times(&base))
            }
            _ => Poly::opaque(e),
        },
        Expr::Call(..) => Poly::opaque(e),
    }
}

impl Expr {
    /// Expands into a sum of monomials ordered by degree, collecting like
    /// terms. The result evaluates to the same value up to rounding.
    pub fn expand(&self) -> Expr {
        to_poly(self).into_expr()
    }
}
