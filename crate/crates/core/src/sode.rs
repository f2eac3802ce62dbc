//! The connection of a second-order equation field
//! `d/dt + v^i d/dx^i + f^i(t, x, v) d/dv^i`, with coefficients
//! `Gamma^i_j = -1/2 df^i/dv^j` and
//! `Gamma^i_0 = -f^i + 1/2 (df^i/dv^j) v^j`.
//!
//! To reuse [`check_affine`] the coefficients are placed in a [`BundleSpec`]
//! with base `(x1..xd, x_{d+1} = t)`, identity anchor of rank `d + 1` and
//! fibre `y_j = v^j`. Columns `1..d` hold `Gamma^i_j`, column `d + 1` holds
//! `Gamma^i_0`.

use crate::connection::{check_affine, AffineVerdict};
use crate::error::{Error, Result};
use crate::exprlang::{Env, Expr, Var};
use crate::geometry::BundleSpec;
use crate::sampling::Sampler;

/// Absolute tolerance on third velocity derivatives of the forces.
pub const TOL_CUBIC: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct SodeSpec {
    pub dof: usize,
    pub forces: Vec<Expr>,
}

impl SodeSpec {
    /// Forces may use `t`, `x1..xd` and `v1..vd`.
    pub fn new(dof: usize, forces: Vec<Expr>) -> Result<Self> {
        if dof == 0 {
            return Err(Error::Invalid("a second-order equation needs at least one degree of freedom".into()));
        }
        crate::error::expect_len("forces", dof, forces.len())?;
        for f in &forces {
            let bad = f.vars().into_iter().find(|v| match v {
                Var::T => false,
                Var::X(i) | Var::V(i) => *i > dof,
                Var::Y(_) => true,
            });
            if let Some(v) = bad {
                return Err(Error::Invalid(format!("force `{f}` uses {v}, allowed are t, x1..x{dof}, v1..v{dof}")));
            }
        }
        Ok(Self { dof, forces })
    }

    pub fn parse(dof: usize, forces: &[&str]) -> Result<Self> {
        let forces = forces.iter().map(|s| Ok(s.parse::<Expr>()?)).collect::<Result<Vec<_>>>()?;
        Self::new(dof, forces)
    }
}

/// Connection coefficients as expressions in `(t, x, v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SodeConnection {
    /// `gamma_j[i][j]` is `Gamma^{i+1}_{j+1}`.
    pub gamma_j: Vec<Vec<Expr>>,
    /// `gamma_0[i]` is `Gamma^{i+1}_0`.
    pub gamma_0: Vec<Expr>,
}

impl SodeConnection {
    /// The coefficients as a [`BundleSpec`], with `t` renamed to `x_{d+1}`
    /// and `v_j` to `y_j`.
    pub fn to_bundle_spec(&self) -> Result<BundleSpec> {
        let d = self.gamma_0.len();
        let rename = |v: Var| match v {
            Var::T => Var::X(d + 1),
            Var::V(j) => Var::Y(j),
            other => other,
        };
        let anchor = (0..=d)
            .map(|i| (0..=d).map(|j| Expr::Num(if i == j { 1.0 } else { 0.0 })).collect())
            .collect();
        let gamma = self
            .gamma_j
            .iter()
            .zip(&self.gamma_0)
            .map(|(row, g0)| row.iter().chain(std::iter::once(g0)).map(|g| g.rename(&rename)).collect())
            .collect();
        BundleSpec::new(d + 1, d + 1, d, anchor, gamma)
    }
}

/// Coefficients by exact differentiation, expanded into monomials.
pub fn sode_connection(ss: &SodeSpec) -> SodeConnection {
    let d = ss.dof;
    let half = || Expr::Num(0.5);
    let mut gamma_j = Vec::with_capacity(d);
    let mut gamma_0 = Vec::with_capacity(d);
    for f in &ss.forces {
        let df: Vec<Expr> = (1..=d).map(|j| f.diff(Var::V(j))).collect();
        gamma_j.push(df.iter().map(|g| Expr::neg(Expr::mul(half(), g.clone())).expand()).collect());
        let contracted = Expr::sum(df.iter().enumerate().map(|(j, g)| Expr::mul(g.clone(), Expr::Var(Var::V(j + 1)))));
        gamma_0.push(Expr::add(Expr::neg(f.clone()), Expr::mul(half(), contracted)).expand());
    }
    SodeConnection { gamma_j, gamma_0 }
}

/// `f^i = f^i_0 + f^i_j v^j + f^i_{jk} v^j v^k`, coefficients in `(t, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForce {
    pub f0: Vec<Expr>,
    /// `f1[i][j]` is `f^i_j`.
    pub f1: Vec<Vec<Expr>>,
    /// `f2[i][j][k]` is `f^i_{jk}`, symmetric in `j, k`.
    pub f2: Vec<Vec<Vec<Expr>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CubicWitness {
    /// Force index and the three velocity indices, all 1-based.
    pub force: usize,
    pub indices: [usize; 3],
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticVerdict {
    pub seed: u64,
    pub samples: usize,
    pub tolerance: f64,
    pub quadratic: bool,
    pub max_third_derivative: f64,
    pub witness: Option<CubicWitness>,
    pub coefficients: Option<QuadraticForce>,
    /// Affineness of the induced connection, checked at the same seed.
    pub affine: AffineVerdict,
}

impl QuadraticVerdict {
    pub fn passed(&self) -> bool {
        self.quadratic && self.affine.passed()
    }
}

/// Whether the forces are at most quadratic in the velocities. Third
/// velocity derivatives are evaluated at random `(t, x, v)`; on success the
/// quadratic coefficients are extracted at `v = 0`.
pub fn quadratic_force_check(ss: &SodeSpec, samples: usize, seed: u64) -> Result<QuadraticVerdict> {
    let d = ss.dof;
    let mut third = Vec::new();
    for (i, f) in ss.forces.iter().enumerate() {
        for j in 1..=d {
            let fj = f.diff(Var::V(j));
            for k in j..=d {
                let fjk = fj.diff(Var::V(k));
                for l in k..=d {
                    third.push((i + 1, [j, k, l], fjk.diff(Var::V(l))));
                }
            }
        }
    }

    let mut sampler = Sampler::new(seed);
    let mut max_third: f64 = 0.0;
    let mut witness = None;
    for _ in 0..samples {
        let t = sampler.coord();
        let x = sampler.coords(d);
        let v = sampler.coords(d);
        let env = Env::new().with_t(t).with_x(&x).with_v(&v);
        for (force, indices, e) in &third {
            let value = e.eval(&env)?;
            max_third = max_third.max(value.abs());
            if value.abs() > TOL_CUBIC && witness.is_none() {
                witness = Some(CubicWitness { force: *force, indices: *indices, t, x: x.clone(), v: v.clone(), value });
            }
        }
    }

    let quadratic = witness.is_none();
    let coefficients = quadratic.then(|| {
        let at_rest = |v: Var| matches!(v, Var::V(_)).then(Expr::zero);
        let f0 = ss.forces.iter().map(|f| f.substitute(&at_rest).expand()).collect();
        let f1 = ss
            .forces
            .iter()
            .map(|f| (1..=d).map(|j| f.diff(Var::V(j)).substitute(&at_rest).expand()).collect())
            .collect();
        let f2 = ss
            .forces
            .iter()
            .map(|f| {
                (1..=d)
                    .map(|j| {
                        (1..=d)
                            .map(|k| Expr::mul(Expr::Num(0.5), f.diff(Var::V(j)).diff(Var::V(k)).substitute(&at_rest)).expand())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        QuadraticForce { f0, f1, f2 }
    });

    let induced = sode_connection(ss).to_bundle_spec()?;
    let affine = check_affine(&induced, samples, seed)?;
    Ok(QuadraticVerdict {
        seed,
        samples,
        tolerance: TOL_CUBIC,
        quadratic,
        max_third_derivative: max_third,
        witness,
        coefficients,
        affine,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::f3;
    use crate::sampling::{DEFAULT_SAMPLES, DEFAULT_SEED};

    fn env(t: f64, x: f64, v: f64) -> Env {
        Env::new().with_t(t).with_x(&[x]).with_v(&[v])
    }

    #[test]
    fn f3_coefficients() {
        let conn = sode_connection(&f3());
        assert_eq!(conn.gamma_j[0][0].to_string(), "-1 - 3*v1");
        assert_eq!(conn.gamma_0[0].to_string(), "-1 - v1");
        for v in [-1.5, 0.0, 0.3, 2.0] {
            let e = env(0.0, 0.0, v);
            assert_eq!(conn.gamma_j[0][0].eval(&e).unwrap(), -(1.0 + 3.0 * v));
            assert_eq!(conn.gamma_0[0].eval(&e).unwrap(), -(1.0 + v));
        }
    }

    #[test]
    fn oscillator_and_free_particle() {
        let conn = sode_connection(&SodeSpec::parse(1, &["-x1"]).unwrap());
        assert!(conn.gamma_j[0][0].is_zero());
        assert_eq!(conn.gamma_0[0].to_string(), "x1");
        let conn = sode_connection(&SodeSpec::parse(1, &["0"]).unwrap());
        assert!(conn.gamma_j[0][0].is_zero() && conn.gamma_0[0].is_zero());
    }

    #[test]
    fn velocity_independent_forces() {
        // Gamma_0 + Gamma_j v^j = -f exactly when f does not depend on v
        let ss = SodeSpec::parse(2, &["sin(x1) + t", "x1*x2"]).unwrap();
        let conn = sode_connection(&ss);
        let e = Env::new().with_t(0.4).with_x(&[0.2, -1.1]).with_v(&[0.7, 1.3]);
        for i in 0..2 {
            let sum = conn.gamma_0[i].eval(&e).unwrap()
                + (0..2).map(|j| conn.gamma_j[i][j].eval(&e).unwrap() * [0.7, 1.3][j]).sum::<f64>();
            assert_eq!(sum, -ss.forces[i].eval(&e).unwrap());
        }
    }

    #[test]
    fn quadratic_check_examples() {
        let v = quadratic_force_check(&f3(), DEFAULT_SAMPLES, DEFAULT_SEED).unwrap();
        assert!(v.passed());
        let q = v.coefficients.unwrap();
        assert_eq!((q.f0[0].to_string(), q.f1[0][0].to_string(), q.f2[0][0][0].to_string()), ("1".into(), "2".into(), "3".into()));

        let v = quadratic_force_check(&SodeSpec::parse(1, &["v1^3"]).unwrap(), DEFAULT_SAMPLES, DEFAULT_SEED).unwrap();
        assert!(!v.quadratic && !v.affine.passed());
        assert_eq!(v.witness.unwrap().value, 6.0);
        assert_eq!(sode_connection(&SodeSpec::parse(1, &["v1^3"]).unwrap()).gamma_j[0][0].to_string(), "-1.5*v1^2");

        let v = quadratic_force_check(&SodeSpec::parse(1, &["sin(x1)"]).unwrap(), DEFAULT_SAMPLES, DEFAULT_SEED).unwrap();
        assert!(v.passed());
    }

    #[test]
    fn renamed_spec_shape() {
        let spec = sode_connection(&f3()).to_bundle_spec().unwrap();
        assert_eq!((spec.base_dim, spec.v_rank, spec.e_dim), (2, 2, 1));
        assert_eq!(spec.gamma[0][0].to_string(), "-1 - 3*y1");
        assert_eq!(spec.gamma[0][1].to_string(), "-1 - y1");
        assert!(SodeSpec::parse(1, &["v2"]).is_err());
        assert!(SodeSpec::parse(1, &["y1"]).is_err());
    }
}
