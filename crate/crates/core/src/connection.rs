//! A rho-connection both as the map `h(x, y, v) = (rho(x) v, -Gamma(x, y) v)`
//! and as the splitting of the prolongation it induces: horizontal lift,
//! complementary projectors, the connection map `K`, and the randomized
//! linearity and affineness classifiers.

use std::fmt;

use crate::affine::{self, AffineCoeffs};
use crate::error::{expect_len, Result};
use crate::exprlang::{Env, Expr, Var};
use crate::geometry::{BasePoint, BundleSpec, EPoint, ETangent, SectionE, SectionV};
use crate::linalg::{kernel_basis, mat_vec, max_abs, PIVOT_TOL};
use crate::prolong::{self, ProlongedVector, TOL_MEMBERSHIP};
use crate::sampling::Sampler;

/// Relative tolerance of the linearity and affineness classifiers.
pub const TOL_CLASSIFY: f64 = 1e-8;
/// Tolerance of the `h(e + w, v) = h(e, v) + hbar(w, v)` check.
pub const TOL_HHBAR: f64 = 1e-10;

/// The horizontal/vertical splitting defined by the coefficients of a spec.
#[derive(Debug, Clone, Copy)]
pub struct Splitting<'a> {
    spec: &'a BundleSpec,
}

impl<'a> Splitting<'a> {
    pub fn new(spec: &'a BundleSpec) -> Self {
        Self { spec }
    }

    pub fn spec(&self) -> &'a BundleSpec {
        self.spec
    }

    /// `h(e, v)`: the tangent vector `(rho(x) v, -Gamma(x, y) v)` at `e`.
    pub fn h_apply(&self, e: &EPoint, v: &[f64]) -> Result<ETangent> {
        let gv = self.spec.gamma_apply(e, v)?;
        let dx = mat_vec(&self.spec.anchor_at(&e.x)?, v);
        Ok(ETangent { at: e.clone(), dx, dy: gv.iter().map(|c| -c).collect() })
    }

    /// The horizontal lift `(e, v)^H`, whose `rho1`-image is `h(e, v)` and
    /// whose `V` part is `v`.
    pub fn horizontal_lift(&self, e: &EPoint, v: &[f64]) -> Result<ProlongedVector> {
        let h = self.h_apply(e, v)?;
        Ok(ProlongedVector::new(e.x.clone(), e.y.clone(), v.to_vec(), h.dy))
    }

    pub fn projector_h(&self, pv: &ProlongedVector) -> Result<ProlongedVector> {
        self.horizontal_lift(&pv.base_point(), &pv.v)
    }

    pub fn projector_v(&self, pv: &ProlongedVector) -> Result<ProlongedVector> {
        pv.sub(&self.projector_h(pv)?)
    }

    /// The connection map `K = rho1 - h o j`, read as an element of the model
    /// fibre: `Z + Gamma(x, y) v`.
    pub fn connection_map(&self, pv: &ProlongedVector) -> Result<Vec<f64>> {
        let direct = prolong::rho1(self.spec, pv)?;
        let (e, w) = prolong::project_j(pv);
        let through_h = self.h_apply(&e, &w.v)?;
        Ok(direct.dy.iter().zip(&through_h.dy).map(|(a, b)| a - b).collect())
    }

    /// Recovers `Gamma(x, y)` from the splitting alone: lift each basis
    /// vector of `V`, push it to `TE` with `rho1` and read off the fibre part.
    pub fn recover_gamma(&self, e: &EPoint) -> Result<Vec<Vec<f64>>> {
        let k = self.spec.v_rank;
        let mut gamma = vec![vec![0.0; k]; self.spec.e_dim];
        for a in 0..k {
            let mut unit = vec![0.0; k];
            unit[a] = 1.0;
            let lifted = self.horizontal_lift(e, &unit)?;
            let h = prolong::rho1(self.spec, &lifted)?;
            for (alpha, dy) in h.dy.iter().enumerate() {
                gamma[alpha][a] = -dy;
            }
        }
        Ok(gamma)
    }
}

/// `Gamma(x, y1 + lambda y2) v` against `Gamma(x, y1) v + lambda Gamma(x, y2) v`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearityCounterexample {
    pub x: Vec<f64>,
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
    pub lambda: f64,
    pub v: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearityVerdict {
    pub seed: u64,
    pub samples: usize,
    pub tolerance: f64,
    pub max_residual: f64,
    pub counterexample: Option<LinearityCounterexample>,
}

impl LinearityVerdict {
    pub fn passed(&self) -> bool {
        self.counterexample.is_none()
    }
}

/// Randomized check that the connection is linear in the fibre coordinates.
pub fn check_linear(spec: &BundleSpec, samples: usize, seed: u64) -> Result<LinearityVerdict> {
    let mut sampler = Sampler::new(seed);
    let mut max_residual: f64 = 0.0;
    let mut counterexample = None;
    for _ in 0..samples {
        let x = sampler.coords(spec.base_dim);
        let y1 = sampler.coords(spec.e_dim);
        let y2 = sampler.coords(spec.e_dim);
        let lambda = sampler.coord();
        let v = sampler.coords(spec.v_rank);
        let combined: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| a + lambda * b).collect();
        let lhs = spec.gamma_apply(&EPoint::new(x.clone(), combined), &v)?;
        let g1 = spec.gamma_apply(&EPoint::new(x.clone(), y1.clone()), &v)?;
        let g2 = spec.gamma_apply(&EPoint::new(x.clone(), y2.clone()), &v)?;
        let rhs: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a + lambda * b).collect();
        let scale = 1.0 + max_abs(&lhs).max(max_abs(&g1)).max(max_abs(&g2) * lambda.abs());
        let residual = lhs.iter().zip(&rhs).fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs())) / scale;
        max_residual = max_residual.max(residual);
        if residual > TOL_CLASSIFY && counterexample.is_none() {
            counterexample = Some(LinearityCounterexample { x, y1, y2, lambda, v, lhs, rhs, residual });
        }
    }
    Ok(LinearityVerdict { seed, samples, tolerance: TOL_CLASSIFY, max_residual, counterexample })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AffineFailure {
    /// `Gamma(y + w) - 2 Gamma(y) + Gamma(y - w)` does not vanish.
    SecondDifference,
    /// `dGamma/dy^beta` changes between two fibre points (0-based `beta`).
    NonConstantDerivative { beta: usize },
}

/// Witness that a coefficient `Gamma^row_col` is not affine in `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineCounterexample {
    pub kind: AffineFailure,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Second-difference step, or the second fibre point for derivative failures.
    pub w: Vec<f64>,
    pub row: usize,
    pub col: usize,
    pub residual: f64,
}

impl fmt::Display for AffineCounterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            AffineFailure::SecondDifference => write!(
                f,
                "second difference of Gamma[{}][{}] at x={:?}, y={:?}, w={:?} is {:e}",
                self.row, self.col, self.x, self.y, self.w, self.residual
            ),
            AffineFailure::NonConstantDerivative { beta } => write!(
                f,
                "dGamma[{}][{}]/dy{} differs between y={:?} and y={:?} at x={:?} by {:e}",
                self.row,
                self.col,
                beta + 1,
                self.y,
                self.w,
                self.x,
                self.residual
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffineVerdict {
    pub seed: u64,
    pub samples: usize,
    pub tolerance: f64,
    /// Largest scaled second difference seen.
    pub max_second_difference: f64,
    pub coeffs: Option<AffineCoeffs>,
    pub counterexample: Option<AffineCounterexample>,
    /// Residual of `h(e + w, v) = h(e, v) + hbar(w, v)` at fresh samples,
    /// present when the coefficients were extracted.
    pub hhbar_residual: Option<f64>,
}

impl AffineVerdict {
    pub fn passed(&self) -> bool {
        self.counterexample.is_none() && self.hhbar_residual.is_some_and(|r| r <= TOL_HHBAR)
    }
}

/// Randomized check that `Gamma(x, y) = Gamma_0(x) + Gamma_1(x) y`. On success
/// the coefficients are extracted symbolically: `Gamma_0 = Gamma(x, 0)` and
/// `Gamma_1 = dGamma/dy` at `y = 0`.
pub fn check_affine(spec: &BundleSpec, samples: usize, seed: u64) -> Result<AffineVerdict> {
    let m = spec.e_dim;
    let derivatives: Vec<Vec<Vec<Expr>>> = spec
        .gamma
        .iter()
        .map(|row| row.iter().map(|g| (1..=m).map(|b| g.diff(Var::Y(b))).collect()).collect())
        .collect();

    let mut sampler = Sampler::new(seed);
    let mut max_second: f64 = 0.0;
    let mut counterexample = None;
    for _ in 0..samples {
        let x = sampler.coords(spec.base_dim);
        let y = sampler.coords(m);
        let w = sampler.coords(m);
        let y_other = sampler.coords(m);
        let shifted = |sign: f64| -> Vec<f64> { y.iter().zip(&w).map(|(a, b)| a + sign * b).collect() };
        let g_plus = spec.gamma_at(&EPoint::new(x.clone(), shifted(1.0)))?;
        let g_mid = spec.gamma_at(&EPoint::new(x.clone(), y.clone()))?;
        let g_minus = spec.gamma_at(&EPoint::new(x.clone(), shifted(-1.0)))?;
        let env = Env::new().with_x(&x).with_y(&y);
        let env_other = Env::new().with_x(&x).with_y(&y_other);
        for (row, g_row) in g_mid.iter().enumerate() {
            for col in 0..g_row.len() {
                let (p, c, q) = (g_plus[row][col], g_mid[row][col], g_minus[row][col]);
                let scale = 1.0 + p.abs().max(c.abs()).max(q.abs());
                let second = (p - 2.0 * c + q).abs() / scale;
                max_second = max_second.max(second);
                if second > TOL_CLASSIFY && counterexample.is_none() {
                    counterexample = Some(AffineCounterexample {
                        kind: AffineFailure::SecondDifference,
                        x: x.clone(),
                        y: y.clone(),
                        w: w.clone(),
                        row,
                        col,
                        residual: p - 2.0 * c + q,
                    });
                }
                for (beta, d) in derivatives[row][col].iter().enumerate() {
                    let here = d.eval(&env)?;
                    let there = d.eval(&env_other)?;
                    let residual = (here - there).abs() / (1.0 + here.abs().max(there.abs()));
                    if residual > TOL_CLASSIFY && counterexample.is_none() {
                        counterexample = Some(AffineCounterexample {
                            kind: AffineFailure::NonConstantDerivative { beta },
                            x: x.clone(),
                            y: y.clone(),
                            w: y_other.clone(),
                            row,
                            col,
                            residual: here - there,
                        });
                    }
                }
            }
        }
    }

    let mut verdict = AffineVerdict {
        seed,
        samples,
        tolerance: TOL_CLASSIFY,
        max_second_difference: max_second,
        coeffs: None,
        counterexample,
        hhbar_residual: None,
    };
    if verdict.counterexample.is_none() {
        let at_origin = |v: Var| matches!(v, Var::Y(_)).then(Expr::zero);
        let gamma0 = spec.gamma.iter().map(|row| row.iter().map(|g| g.substitute(&at_origin)).collect()).collect();
        let gamma1 = derivatives
            .iter()
            .map(|row| row.iter().map(|ds| ds.iter().map(|d| d.substitute(&at_origin)).collect()).collect())
            .collect();
        let coeffs = AffineCoeffs::new(gamma0, gamma1)?;
        verdict.hhbar_residual = Some(affine::hhbar_residual(spec, &coeffs, &mut sampler, samples)?);
        verdict.coeffs = Some(coeffs);
    }
    Ok(verdict)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelDiagnostic {
    pub x: Vec<f64>,
    /// Basis of `ker rho(x)`, each a vector in the `V` fibre.
    pub kernel_basis: Vec<Vec<f64>>,
    /// Whether `Im h` meets the vertical vectors nontrivially at `x`.
    pub meets_vertical: bool,
    /// `(y, basis index, |Gamma(x, y) b|)` for the first kernel vector with a
    /// nonzero vertical image.
    pub witness: Option<(Vec<f64>, usize, f64)>,
}

/// Kernel of the anchor at `x` and whether some kernel direction is lifted
/// by `h` to a nonzero vertical vector at sampled fibre points.
pub fn kernel_diagnostic(spec: &BundleSpec, x: &BasePoint, samples: usize, seed: u64) -> Result<KernelDiagnostic> {
    let rho = spec.anchor_at(&x.x)?;
    let basis = kernel_basis(&rho, spec.v_rank, PIVOT_TOL);
    let mut sampler = Sampler::new(seed);
    let mut witness = None;
    'outer: for _ in 0..samples.max(1) {
        let y = sampler.coords(spec.e_dim);
        let e = EPoint::new(x.x.clone(), y.clone());
        for (i, b) in basis.iter().enumerate() {
            let image = max_abs(&spec.gamma_apply(&e, b)?);
            if image > PIVOT_TOL {
                witness = Some((y, i, image));
                break 'outer;
            }
        }
    }
    Ok(KernelDiagnostic { x: x.x.clone(), kernel_basis: basis, meets_vertical: witness.is_some(), witness })
}

/// `nabla_zeta sigma (x) = K(zeta(x), T sigma(rho(zeta(x))))`, defined for any
/// connection, affine or not.
pub fn cov_deriv_intrinsic(spec: &BundleSpec, zeta: &SectionV, sigma: &SectionE, x: &BasePoint) -> Result<Vec<f64>> {
    expect_len("section of V", spec.v_rank, zeta.components.len())?;
    expect_len("section of E", spec.e_dim, sigma.components.len())?;
    let w = zeta.value(&x.x)?;
    let direction = spec.anchor_apply(&w)?;
    let tangent = sigma.tangent(x, &direction)?;
    let pv = prolong::make_prolonged(spec, &w, &tangent, TOL_MEMBERSHIP)?;
    Splitting::new(spec).connection_map(&pv)
}
