//! Seeded sampling of chart points, random polynomial data and random
//! expression trees.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::exprlang::{Env, Expr, Func, Var};

/// Sample count used by the randomized checks unless told otherwise.
pub const DEFAULT_SAMPLES: usize = 64;
/// Seed used by the randomized checks unless told otherwise.
pub const DEFAULT_SEED: u64 = 1;
/// Coordinates are drawn uniformly from `[-COORD_RANGE, COORD_RANGE]`.
pub const COORD_RANGE: f64 = 2.0;

#[derive(Debug, Clone)]
pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.random_range(lo..hi)
    }

    pub fn coord(&mut self) -> f64 {
        self.uniform(-COORD_RANGE, COORD_RANGE)
    }

    pub fn coords(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.coord()).collect()
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn chance(&mut self, p: f64) -> bool {
        self.rng.random_bool(p)
    }

    /// A random polynomial of total degree at most `degree` in `vars`, with
    /// coefficients in `[-1, 1]` rounded to three decimals.
    pub fn poly(&mut self, vars: &[Var], degree: u32) -> Expr {
        let mut monomials: Vec<Vec<Var>> = vec![vec![]];
        let mut layer: Vec<Vec<Var>> = vec![vec![]];
        for _ in 0..degree {
            // non-decreasing variable order, so each monomial appears once
            layer = layer
                .iter()
                .flat_map(|m| {
                    vars.iter()
                        .filter(|v| m.last().is_none_or(|last| last <= *v))
                        .map(|v| {
                            let mut grown = m.clone();
                            grown.push(*v);
                            grown
                        })
                        .collect::<Vec<_>>()
                })
                .collect();
            monomials.extend(layer.iter().cloned());
        }
        let terms = monomials.into_iter().map(|m| {
            let c = (self.uniform(-1.0, 1.0) * 1000.0).round() / 1000.0;
            m.into_iter().fold(Expr::constant(c), |acc, v| Expr::mul(acc, Expr::var(v)))
        });
        Expr::sum(terms)
    }

    /// A random expression tree of depth at most `depth` over `vars`, built
    /// without folding so every node kind and printing case shows up.
    pub fn expr(&mut self, vars: &[Var], depth: u32) -> Expr {
        if depth == 0 || self.chance(0.25) {
            return if self.chance(0.6) {
                Expr::Var(vars[self.index(vars.len())])
            } else {
                Expr::constant((self.uniform(-3.0, 3.0) * 100.0).round() / 100.0)
            };
        }
        let sub = |s: &mut Self| Box::new(s.expr(vars, depth - 1));
        match self.index(9) {
            0 => Expr::Neg(sub(self)),
            1 => Expr::Add(sub(self), sub(self)),
            2 => Expr::Sub(sub(self), sub(self)),
            3 | 4 => Expr::Mul(sub(self), sub(self)),
            5 => Expr::Div(sub(self), sub(self)),
            6 => {
                let exponent = match self.index(3) {
                    0 => Expr::Num(self.index(5) as f64),
                    1 => Expr::Num([0.5, 1.5, 2.5][self.index(3)]),
                    _ => self.expr(vars, depth - 1),
                };
                Expr::Pow(sub(self), Box::new(exponent))
            }
            _ => {
                let func = [Func::Sin, Func::Cos, Func::Exp, Func::Log, Func::Sqrt][self.index(5)];
                Expr::Call(func, sub(self))
            }
        }
    }
}

/// Denominators, `log`/`sqrt` arguments and bases of non-integer powers
/// must stay at least this far from their singular values.
pub const SINGULAR_MARGIN: f64 = 0.1;
/// Largest magnitude any subexpression may take in a well-conditioned point.
pub const VALUE_BOUND: f64 = 1e4;

/// Whether `e` is comfortably away from every singularity at `env`: all
/// subexpressions evaluate, stay within [`VALUE_BOUND`], and keep
/// [`SINGULAR_MARGIN`] from poles and branch points. Points that pass are
/// safe for finite-difference comparisons.
pub fn well_conditioned(e: &Expr, env: &Env) -> bool {
    fn value(e: &Expr, env: &Env) -> Option<f64> {
        let v = e.eval(env).ok()?;
        (v.abs() <= VALUE_BOUND).then_some(v)
    }
    let ok = match e {
        Expr::Num(_) | Expr::Var(_) => true,
        Expr::Neg(a) => well_conditioned(a, env),
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => well_conditioned(a, env) && well_conditioned(b, env),
        Expr::Div(a, b) => {
            well_conditioned(a, env)
                && well_conditioned(b, env)
                && value(b, env).is_some_and(|d| d.abs() >= SINGULAR_MARGIN)
        }
        Expr::Pow(a, b) => {
            let integer = b.as_const().is_some_and(|c| c.fract() == 0.0);
            well_conditioned(a, env)
                && well_conditioned(b, env)
                && (integer || value(a, env).is_some_and(|base| base >= SINGULAR_MARGIN))
        }
        Expr::Call(func, a) => {
            let arg = value(a, env);
            well_conditioned(a, env)
                && match func {
                    Func::Log | Func::Sqrt => arg.is_some_and(|x| x >= SINGULAR_MARGIN),
                    Func::Exp => arg.is_some_and(|x| x <= 10.0),
                    Func::Sin | Func::Cos => true,
                }
        }
    };
    ok && value(e, env).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprlang::Env;

    #[test]
    fn same_seed_same_stream() {
        let mut a = Sampler::new(7);
        let mut b = Sampler::new(7);
        assert_eq!(a.coords(10), b.coords(10));
        let vars = [Var::X(1), Var::X(2)];
        assert_eq!(a.poly(&vars, 2), b.poly(&vars, 2));
    }

    #[test]
    fn coords_stay_in_range() {
        let mut s = Sampler::new(3);
        assert!(s.coords(1000).iter().all(|c| c.abs() <= COORD_RANGE));
    }

    #[test]
    fn poly_has_bounded_degree() {
        let mut s = Sampler::new(11);
        let p = s.poly(&[Var::X(1)], 2);
        // third derivative of a quadratic vanishes identically
        let d3 = p.diff(Var::X(1)).diff(Var::X(1)).diff(Var::X(1));
        assert_eq!(d3.eval(&Env::new().with(Var::X(1), 0.3)).unwrap(), 0.0);
        assert!(p.vars().iter().all(|v| *v == Var::X(1)));
    }

    #[test]
    fn random_expressions_are_seeded_and_bounded() {
        let vars = [Var::X(1), Var::Y(1)];
        let mut a = Sampler::new(5);
        let mut b = Sampler::new(5);
        for _ in 0..50 {
            let e = a.expr(&vars, 4);
            assert_eq!(e, b.expr(&vars, 4));
            assert!(e.vars().iter().all(|v| vars.contains(v)));
        }
    }

    #[test]
    fn conditioning() {
        let env = Env::new().with(Var::X(1), 0.05);
        assert!(!well_conditioned(&"1/x1".parse().unwrap(), &env));
        assert!(!well_conditioned(&"log(x1)".parse().unwrap(), &env));
        assert!(well_conditioned(&"x1^2".parse().unwrap(), &env));
        assert!(!well_conditioned(&"x1^0.5".parse().unwrap(), &env));
        assert!(well_conditioned(&"sin(1/(x1 + 1))".parse().unwrap(), &env));
    }
}
