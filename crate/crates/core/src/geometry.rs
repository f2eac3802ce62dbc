//! Single-chart description of the base `M`, the anchored bundle `V` and the
//! bundle `E`, plus the anchor map and tangent maps of sections.

use std::fmt;

use crate::error::{expect_len, Result};
use crate::exprlang::{Env, Expr, Var};
use crate::linalg::mat_vec;

/// Chart data: dimensions, anchor `rho^i_a(x)` (n x k) and connection
/// coefficients `Gamma^alpha_a(x, y)` (m x k).
#[derive(Debug, Clone, PartialEq)]
pub struct BundleSpec {
    pub base_dim: usize,
    pub v_rank: usize,
    pub e_dim: usize,
    pub anchor: Vec<Vec<Expr>>,
    pub gamma: Vec<Vec<Expr>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Matrix {
    Anchor,
    Gamma,
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Matrix::Anchor => "anchor",
            Matrix::Gamma => "gamma",
        })
    }
}

/// A rule broken by a [`BundleSpec`]. Row and column indices are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    ZeroDimension(&'static str),
    Shape { matrix: Matrix, expected: (usize, usize), rows: usize, cols: Vec<usize> },
    AnchorDependsOnFiber { row: usize, col: usize, var: Var },
    ForbiddenVariable { matrix: Matrix, row: usize, col: usize, var: Var },
    IndexOutOfRange { matrix: Matrix, row: usize, col: usize, var: Var },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ZeroDimension(name) => write!(f, "{name} must be at least 1"),
            Violation::Shape { matrix, expected, rows, cols } => write!(
                f,
                "{matrix} has shape {rows}x{cols:?}, expected {}x{}",
                expected.0, expected.1
            ),
            Violation::AnchorDependsOnFiber { row, col, var } => {
                write!(f, "anchor depends on fiber variable {var} at [{row}][{col}]")
            }
            Violation::ForbiddenVariable { matrix, row, col, var } => {
                write!(f, "{matrix} entry [{row}][{col}] may not depend on {var}")
            }
            Violation::IndexOutOfRange { matrix, row, col, var } => {
                write!(f, "{matrix} entry [{row}][{col}] uses {var}, which is outside the chart dimensions")
            }
        }
    }
}

impl BundleSpec {
    /// Builds a spec and rejects it unless [`BundleSpec::validate`] is clean.
    pub fn new(
        base_dim: usize,
        v_rank: usize,
        e_dim: usize,
        anchor: Vec<Vec<Expr>>,
        gamma: Vec<Vec<Expr>>,
    ) -> Result<Self> {
        let spec = Self { base_dim, v_rank, e_dim, anchor, gamma };
        let violations = spec.validate();
        if violations.is_empty() {
            Ok(spec)
        } else {
            Err(crate::Error::InvalidSpec(violations))
        }
    }

    /// Like [`BundleSpec::new`] but parsing the entries.
    pub fn parse(base_dim: usize, v_rank: usize, e_dim: usize, anchor: &[&[&str]], gamma: &[&[&str]]) -> Result<Self> {
        let parse_matrix = |rows: &[&[&str]]| -> Result<Vec<Vec<Expr>>> {
            rows.iter()
                .map(|row| row.iter().map(|s| Ok(s.parse::<Expr>()?)).collect())
                .collect()
        };
        Self::new(base_dim, v_rank, e_dim, parse_matrix(anchor)?, parse_matrix(gamma)?)
    }

    /// Dimension and variable-usage rules. An empty list means valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (name, dim) in [("base_dim", self.base_dim), ("v_rank", self.v_rank), ("e_dim", self.e_dim)] {
            if dim == 0 {
                out.push(Violation::ZeroDimension(name));
            }
        }
        for (matrix, rows, expected) in [
            (Matrix::Anchor, &self.anchor, (self.base_dim, self.v_rank)),
            (Matrix::Gamma, &self.gamma, (self.e_dim, self.v_rank)),
        ] {
            if rows.len() != expected.0 || rows.iter().any(|r| r.len() != expected.1) {
                out.push(Violation::Shape {
                    matrix,
                    expected,
                    rows: rows.len(),
                    cols: rows.iter().map(Vec::len).collect(),
                });
            }
            for (row, entries) in rows.iter().enumerate() {
                for (col, e) in entries.iter().enumerate() {
                    for var in e.vars() {
                        if let Some(v) = self.check_var(matrix, row, col, var) {
                            out.push(v);
                        }
                    }
                }
            }
        }
        out
    }

    fn check_var(&self, matrix: Matrix, row: usize, col: usize, var: Var) -> Option<Violation> {
        match (matrix, var) {
            (_, Var::X(i)) if i > self.base_dim => Some(Violation::IndexOutOfRange { matrix, row, col, var }),
            (_, Var::X(_)) => None,
            (Matrix::Anchor, Var::Y(_)) => Some(Violation::AnchorDependsOnFiber { row, col, var }),
            (Matrix::Gamma, Var::Y(i)) if i == 0 => Some(Violation::ForbiddenVariable { matrix, row, col, var }),
            (Matrix::Gamma, Var::Y(i)) if i > self.e_dim => {
                Some(Violation::IndexOutOfRange { matrix, row, col, var })
            }
            (Matrix::Gamma, Var::Y(_)) => None,
            (_, Var::V(_) | Var::T) => Some(Violation::ForbiddenVariable { matrix, row, col, var }),
        }
    }

    pub fn check_base(&self, x: &[f64]) -> Result<()> {
        expect_len("base point", self.base_dim, x.len())
    }

    pub fn check_e_point(&self, e: &EPoint) -> Result<()> {
        self.check_base(&e.x)?;
        expect_len("fibre coordinates", self.e_dim, e.y.len())
    }

    pub fn check_v(&self, v: &[f64]) -> Result<()> {
        expect_len("V fibre coordinates", self.v_rank, v.len())
    }

    /// `rho^i_a(x)` as an n x k matrix.
    pub fn anchor_at(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_base(x)?;
        let env = Env::new().with_x(x);
        eval_matrix(&self.anchor, &env)
    }

    /// `Gamma^alpha_a(x, y)` as an m x k matrix.
    pub fn gamma_at(&self, e: &EPoint) -> Result<Vec<Vec<f64>>> {
        self.check_e_point(e)?;
        let env = Env::new().with_x(&e.x).with_y(&e.y);
        eval_matrix(&self.gamma, &env)
    }

    /// `Gamma^alpha_a(x, y) v^a`.
    pub fn gamma_apply(&self, e: &EPoint, v: &[f64]) -> Result<Vec<f64>> {
        self.check_v(v)?;
        Ok(mat_vec(&self.gamma_at(e)?, v))
    }

    /// `rho^i_a(x) v^a`.
    pub fn anchor_apply(&self, w: &VVector) -> Result<Vec<f64>> {
        self.check_v(&w.v)?;
        Ok(mat_vec(&self.anchor_at(&w.x)?, &w.v))
    }
}

pub(crate) fn eval_matrix(m: &[Vec<Expr>], env: &Env) -> Result<Vec<Vec<f64>>> {
    m.iter()
        .map(|row| row.iter().map(|e| Ok(e.eval(env)?)).collect())
        .collect()
}

pub(crate) fn eval_vec(v: &[Expr], env: &Env) -> Result<Vec<f64>> {
    v.iter().map(|e| Ok(e.eval(env)?)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasePoint {
    pub x: Vec<f64>,
}

impl BasePoint {
    pub fn new(x: impl Into<Vec<f64>>) -> Self {
        Self { x: x.into() }
    }
}

/// A point of `E`: base coordinates and fibre coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct EPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl EPoint {
    pub fn new(x: impl Into<Vec<f64>>, y: impl Into<Vec<f64>>) -> Self {
        Self { x: x.into(), y: y.into() }
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.y).all(|c| c.is_finite())
    }
}

/// A point of `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct VVector {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl VVector {
    pub fn new(x: impl Into<Vec<f64>>, v: impl Into<Vec<f64>>) -> Self {
        Self { x: x.into(), v: v.into() }
    }
}

/// A tangent vector to `E` at `at`, with base part `dx` and fibre part `dy`.
#[derive(Debug, Clone, PartialEq)]
pub struct ETangent {
    pub at: EPoint,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
}

impl ETangent {
    pub fn is_vertical(&self) -> bool {
        self.dx.iter().all(|c| *c == 0.0)
    }
}

/// Local section of `E`, written `e_0 + sigma^alpha(x) e_alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionE {
    pub components: Vec<Expr>,
}

/// Local section of `V`, written `zeta^a(x) v_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionV {
    pub components: Vec<Expr>,
}

fn parse_components(src: &[&str]) -> Result<Vec<Expr>> {
    src.iter().map(|s| Ok(s.parse::<Expr>()?)).collect()
}

fn check_x_only(components: &[Expr], what: &str) -> Result<()> {
    for e in components {
        if let Some(v) = e.vars().into_iter().find(|v| !matches!(v, Var::X(_))) {
            return Err(crate::Error::Invalid(format!("{what} component `{e}` depends on {v}")));
        }
    }
    Ok(())
}

impl SectionE {
    pub fn new(components: Vec<Expr>) -> Result<Self> {
        check_x_only(&components, "section of E")?;
        Ok(Self { components })
    }

    pub fn parse(src: &[&str]) -> Result<Self> {
        Self::new(parse_components(src)?)
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        eval_vec(&self.components, &Env::new().with_x(x))
    }

    pub fn point(&self, x: &[f64]) -> Result<EPoint> {
        Ok(EPoint::new(x, self.eval(x)?))
    }

    /// The tangent map `T sigma` applied to `dx` at `x`: the tangent vector
    /// at `sigma(x)` with `dy^alpha = d sigma^alpha / d x^i dx^i`.
    pub fn tangent(&self, x: &BasePoint, dx: &[f64]) -> Result<ETangent> {
        expect_len("tangent direction", x.x.len(), dx.len())?;
        let env = Env::new().with_x(&x.x);
        let mut dy = Vec::with_capacity(self.components.len());
        for sigma in &self.components {
            let mut acc = 0.0;
            for (i, dxi) in dx.iter().enumerate() {
                if *dxi != 0.0 {
                    acc += sigma.diff(Var::X(i + 1)).eval(&env)? * dxi;
                }
            }
            dy.push(acc);
        }
        Ok(ETangent { at: self.point(&x.x)?, dx: dx.to_vec(), dy })
    }
}

/// Free-function form of [`SectionE::tangent`].
pub fn tangent_section(sigma: &SectionE, x: &BasePoint, dx: &[f64]) -> Result<ETangent> {
    sigma.tangent(x, dx)
}

impl SectionV {
    pub fn new(components: Vec<Expr>) -> Result<Self> {
        check_x_only(&components, "section of V")?;
        Ok(Self { components })
    }

    pub fn parse(src: &[&str]) -> Result<Self> {
        Self::new(parse_components(src)?)
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        eval_vec(&self.components, &Env::new().with_x(x))
    }

    pub fn value(&self, x: &[f64]) -> Result<VVector> {
        Ok(VVector::new(x, self.eval(x)?))
    }

    /// `f * zeta` for a function `f` on the base.
    pub fn scaled(&self, f: &Expr) -> SectionV {
        SectionV { components: self.components.iter().map(|z| Expr::mul(f.clone(), z.clone())).collect() }
    }
}

/// `rho(zeta)(f) = df/dx^i rho^i_a zeta^a`, the derivative of a base function
/// along the anchored image of a section.
pub fn anchored_derivative(spec: &BundleSpec, zeta: &SectionV, f: &Expr, x: &BasePoint) -> Result<f64> {
    let direction = spec.anchor_apply(&zeta.value(&x.x)?)?;
    let env = Env::new().with_x(&x.x);
    let mut acc = 0.0;
    for (i, d) in direction.iter().enumerate() {
        acc += f.diff(Var::X(i + 1)).eval(&env)? * d;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn fixtures_are_valid() {
        for spec in [fixtures::f1(), fixtures::f2(), fixtures::f4()] {
            assert!(spec.validate().is_empty());
        }
    }

    #[test]
    fn anchor_on_fiber_is_rejected() {
        let spec = BundleSpec {
            anchor: vec![vec!["y1".parse().unwrap()]],
            ..fixtures::f1()
        };
        let violations = spec.validate();
        assert_eq!(violations.len(), 1);
        assert!(violations[0].to_string().contains("anchor depends on fiber variable"));
    }

    #[test]
    fn gamma_shape_is_checked() {
        let spec = BundleSpec {
            gamma: vec![vec![Expr::Num(1.0), Expr::Num(2.0)]],
            ..fixtures::f1()
        };
        assert!(matches!(
            spec.validate().as_slice(),
            [Violation::Shape { matrix: Matrix::Gamma, expected: (1, 1), .. }]
        ));
    }

    #[test]
    fn other_violations() {
        let spec = BundleSpec {
            base_dim: 0,
            anchor: vec![vec!["v1 + x2".parse().unwrap()]],
            gamma: vec![vec!["y2 + y0 + t".parse().unwrap()]],
            ..fixtures::f1()
        };
        let v = spec.validate();
        assert!(v.contains(&Violation::ZeroDimension("base_dim")));
        assert!(v.iter().any(|v| matches!(v, Violation::ForbiddenVariable { var: Var::V(1), .. })));
        assert!(v.iter().any(|v| matches!(v, Violation::ForbiddenVariable { var: Var::T, .. })));
        assert!(v.iter().any(|v| matches!(v, Violation::ForbiddenVariable { var: Var::Y(0), .. })));
        assert!(v.iter().any(|v| matches!(v, Violation::IndexOutOfRange { var: Var::Y(2), .. })));
        assert!(v.iter().any(|v| matches!(v, Violation::IndexOutOfRange { var: Var::X(2), .. })));
        assert!(BundleSpec::new(0, 1, 1, vec![], vec![]).is_err());
    }

    #[test]
    fn anchor_apply_examples() {
        assert_eq!(fixtures::f1().anchor_apply(&VVector::new([0.0], [2.0])).unwrap(), vec![2.0]);
        let f4 = fixtures::f4();
        assert_eq!(f4.anchor_apply(&VVector::new([0.0], [0.0, 1.0])).unwrap(), vec![0.0]);
        assert_eq!(f4.anchor_apply(&VVector::new([0.0], [3.0, 5.0])).unwrap(), vec![3.0]);
        assert!(f4.anchor_apply(&VVector::new([0.0], [3.0])).is_err());
    }

    #[test]
    fn tangent_section_examples() {
        let x = BasePoint::new([3.0]);
        let sigma = SectionE::parse(&["x1^2"]).unwrap();
        let t = sigma.tangent(&x, &[1.0]).unwrap();
        assert_eq!(t.at, EPoint::new([3.0], [9.0]));
        assert_eq!(t.dy, vec![6.0]);
        // finite-difference oracle
        let h = 1e-6;
        let fd = (sigma.eval(&[3.0 + h]).unwrap()[0] - sigma.eval(&[3.0 - h]).unwrap()[0]) / (2.0 * h);
        assert!((fd - 6.0).abs() < 1e-5);

        let constant = SectionE::parse(&["4"]).unwrap();
        assert_eq!(constant.tangent(&x, &[2.5]).unwrap().dy, vec![0.0]);
        let linear = SectionE::parse(&["x1"]).unwrap();
        assert_eq!(linear.tangent(&x, &[0.0]).unwrap().dy, vec![0.0]);
    }

    #[test]
    fn sections_must_live_on_the_base() {
        assert!(SectionE::parse(&["y1"]).is_err());
        assert!(SectionV::parse(&["t"]).is_err());
    }
}
