//! The rho-prolongation of `E`: pairs `(v, X)` of an element of `V` and a
//! tangent vector to `E` whose base part is `rho(v)`.
//!
//! A point is stored as `(x, y, v, Z)`; the base part of `X` is always
//! `rho(x) v` and is rebuilt on demand by [`rho1`], so the defining
//! constraint cannot be violated once a vector has been admitted.

use crate::error::{expect_len, Error, Result};
use crate::exprlang::Expr;
use crate::geometry::{eval_vec, BundleSpec, EPoint, ETangent, VVector};
use crate::exprlang::Env;
use crate::linalg::max_abs_diff;

/// Default absolute tolerance on `|dx - rho(x) v|` for admission.
pub const TOL_MEMBERSHIP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ProlongedVector {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub v: Vec<f64>,
    pub z: Vec<f64>,
}

impl ProlongedVector {
    pub fn new(x: impl Into<Vec<f64>>, y: impl Into<Vec<f64>>, v: impl Into<Vec<f64>>, z: impl Into<Vec<f64>>) -> Self {
        Self { x: x.into(), y: y.into(), v: v.into(), z: z.into() }
    }

    pub fn zero(e: &EPoint, v_rank: usize) -> Self {
        Self::new(e.x.clone(), e.y.clone(), vec![0.0; v_rank], vec![0.0; e.y.len()])
    }

    pub fn base_point(&self) -> EPoint {
        EPoint::new(self.x.clone(), self.y.clone())
    }

    pub fn is_vertical(&self) -> bool {
        self.v.iter().all(|c| *c == 0.0)
    }

    fn same_fibre(&self, other: &Self) -> Result<()> {
        if self.x != other.x || self.y != other.y {
            return Err(Error::BasePointMismatch);
        }
        expect_len("V part", self.v.len(), other.v.len())?;
        expect_len("vertical part", self.z.len(), other.z.len())
    }

    /// `self + lambda * other` in the fibre over the shared point of `E`.
    pub fn combine(&self, lambda: f64, other: &Self) -> Result<Self> {
        self.same_fibre(other)?;
        let lin = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p + lambda * q).collect::<Vec<_>>();
        Ok(Self::new(self.x.clone(), self.y.clone(), lin(&self.v, &other.v), lin(&self.z, &other.z)))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(1.0, other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(-1.0, other)
    }

    pub fn scale(&self, lambda: f64) -> Self {
        Self::new(
            self.x.clone(),
            self.y.clone(),
            self.v.iter().map(|c| lambda * c).collect::<Vec<_>>(),
            self.z.iter().map(|c| lambda * c).collect::<Vec<_>>(),
        )
    }

    /// Largest coordinate difference; infinite when the base points or
    /// shapes disagree.
    pub fn distance(&self, other: &Self) -> f64 {
        if self.x != other.x || self.y != other.y {
            return f64::INFINITY;
        }
        max_abs_diff(&self.v, &other.v).max(max_abs_diff(&self.z, &other.z))
    }

    /// Largest coordinate magnitude of the fibre part.
    pub fn norm(&self) -> f64 {
        self.v.iter().chain(&self.z).fold(0.0, |acc, c| acc.max(c.abs()))
    }
}

/// Admits `(w, tangent)` into the prolongation when `tangent.dx` matches
/// `rho(x) w.v` within `tol`.
pub fn make_prolonged(spec: &BundleSpec, w: &VVector, tangent: &ETangent, tol: f64) -> Result<ProlongedVector> {
    if w.x != tangent.at.x {
        return Err(Error::BasePointMismatch);
    }
    spec.check_e_point(&tangent.at)?;
    expect_len("tangent base part", spec.base_dim, tangent.dx.len())?;
    expect_len("tangent fibre part", spec.e_dim, tangent.dy.len())?;
    let forced = spec.anchor_apply(w)?;
    let residual = max_abs_diff(&forced, &tangent.dx);
    if residual > tol {
        return Err(Error::NotInProlongation { residual, tol });
    }
    Ok(ProlongedVector::new(
        tangent.at.x.clone(),
        tangent.at.y.clone(),
        w.v.clone(),
        tangent.dy.clone(),
    ))
}

/// The projection `j: (v, X) -> (tau(X), v)` onto the pullback of `V`.
pub fn project_j(pv: &ProlongedVector) -> (EPoint, VVector) {
    (pv.base_point(), VVector::new(pv.x.clone(), pv.v.clone()))
}

/// Vertical lift of `w` in the model fibre to the prolongation at `e`.
pub fn vertical_lift(spec: &BundleSpec, e: &EPoint, w: &[f64]) -> Result<ProlongedVector> {
    spec.check_e_point(e)?;
    expect_len("vertical vector", spec.e_dim, w.len())?;
    Ok(ProlongedVector::new(e.x.clone(), e.y.clone(), vec![0.0; spec.v_rank], w.to_vec()))
}

/// The anchor-like map onto `TE`: reattaches the base part `rho(x) v`.
pub fn rho1(spec: &BundleSpec, pv: &ProlongedVector) -> Result<ETangent> {
    let dx = spec.anchor_apply(&VVector::new(pv.x.clone(), pv.v.clone()))?;
    Ok(ETangent { at: pv.base_point(), dx, dy: pv.z.clone() })
}

/// A local section `zeta^a(x, y) X_a + Z^alpha(x, y) V_alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProlongedSection {
    pub zeta: Vec<Expr>,
    pub z: Vec<Expr>,
}

impl ProlongedSection {
    pub fn eval_at(&self, spec: &BundleSpec, e: &EPoint) -> Result<ProlongedVector> {
        spec.check_e_point(e)?;
        expect_len("section V part", spec.v_rank, self.zeta.len())?;
        expect_len("section vertical part", spec.e_dim, self.z.len())?;
        let env = Env::new().with_x(&e.x).with_y(&e.y);
        Ok(ProlongedVector::new(e.x.clone(), e.y.clone(), eval_vec(&self.zeta, &env)?, eval_vec(&self.z, &env)?))
    }
}
