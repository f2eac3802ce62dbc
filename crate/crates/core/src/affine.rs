//! Affine connections through the bidual `E~`, into which `E` embeds at
//! `y0 = 1` (via `iota`) and the model bundle `Ebar` at `y0 = 0` (via
//! `iota_bar`).
//!
//! Coefficients are ordered `(y0, y1..ym)` in the bidual, index 0 first.
//! Every matrix here is indexed `[fibre row][V column]...`, so
//! `gamma1[alpha][a][beta]` is `Gamma^alpha_{a beta}` and
//! `gamma_t[A][a][B]` is `Gamma~^A_{aB}`, all 0-based.

use crate::connection::{self, Splitting};
use crate::error::{expect_len, Error, Result};
use crate::exprlang::{Env, Expr, Var};
use crate::geometry::{anchored_derivative, eval_matrix, BasePoint, BundleSpec, EPoint, ETangent, SectionE, SectionV};
use crate::linalg::{mat_vec, max_abs, max_abs_diff};
use crate::prolong::ProlongedVector;
use crate::sampling::Sampler;

/// Tolerance on the vanishing of `Gamma~^0_{aB}`.
pub const TOL_E0: f64 = 1e-10;

fn x_only(e: &Expr) -> Result<()> {
    match e.vars().into_iter().find(|v| !matches!(v, Var::X(_))) {
        Some(v) => Err(Error::Invalid(format!("coefficient `{e}` depends on {v}, expected x only"))),
        None => Ok(()),
    }
}

/// `Gamma^alpha_{a0}(x)` and `Gamma^alpha_{a beta}(x)` of an affine connection.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineCoeffs {
    gamma0: Vec<Vec<Expr>>,
    gamma1: Vec<Vec<Vec<Expr>>>,
}

impl AffineCoeffs {
    /// Checks shapes (`m x k` and `m x k x m`) and that entries depend on `x` only.
    pub fn new(gamma0: Vec<Vec<Expr>>, gamma1: Vec<Vec<Vec<Expr>>>) -> Result<Self> {
        let m = gamma0.len();
        let k = gamma0.first().map_or(0, Vec::len);
        if m == 0 || k == 0 {
            return Err(Error::Invalid("affine coefficients need m, k >= 1".into()));
        }
        expect_len("gamma1 rows", m, gamma1.len())?;
        for (row0, row1) in gamma0.iter().zip(&gamma1) {
            expect_len("gamma0 columns", k, row0.len())?;
            expect_len("gamma1 columns", k, row1.len())?;
            for cell in row1 {
                expect_len("gamma1 depth", m, cell.len())?;
            }
        }
        for e in gamma0.iter().flatten().chain(gamma1.iter().flatten().flatten()) {
            x_only(e)?;
        }
        Ok(Self { gamma0, gamma1 })
    }

    pub fn zero(e_dim: usize, v_rank: usize) -> Self {
        Self {
            gamma0: vec![vec![Expr::zero(); v_rank]; e_dim],
            gamma1: vec![vec![vec![Expr::zero(); e_dim]; v_rank]; e_dim],
        }
    }

    pub fn parse(gamma0: &[&[&str]], gamma1: &[&[&[&str]]]) -> Result<Self> {
        let g0 = gamma0
            .iter()
            .map(|row| row.iter().map(|s| Ok(s.parse::<Expr>()?)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let g1 = gamma1
            .iter()
            .map(|row| {
                row.iter()
                    .map(|cell| cell.iter().map(|s| Ok(s.parse::<Expr>()?)).collect::<Result<Vec<_>>>())
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(g0, g1)
    }

    pub fn e_dim(&self) -> usize {
        self.gamma0.len()
    }

    pub fn v_rank(&self) -> usize {
        self.gamma0[0].len()
    }

    pub fn gamma0(&self) -> &[Vec<Expr>] {
        &self.gamma0
    }

    pub fn gamma1(&self) -> &[Vec<Vec<Expr>>] {
        &self.gamma1
    }

    pub fn gamma0_at(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        eval_matrix(&self.gamma0, &Env::new().with_x(x))
    }

    pub fn gamma1_at(&self, x: &[f64]) -> Result<Vec<Vec<Vec<f64>>>> {
        let env = Env::new().with_x(x);
        self.gamma1.iter().map(|row| eval_matrix(row, &env)).collect()
    }

    /// The full coefficients `Gamma_0 + Gamma_1 y` as expressions in `(x, y)`.
    pub fn to_gamma(&self) -> Vec<Vec<Expr>> {
        self.gamma0
            .iter()
            .zip(&self.gamma1)
            .map(|(row0, row1)| {
                row0.iter()
                    .zip(row1)
                    .map(|(g0, cell)| {
                        let linear = cell
                            .iter()
                            .enumerate()
                            .map(|(b, g)| Expr::mul(g.clone(), Expr::var(Var::Y(b + 1))));
                        Expr::add(g0.clone(), Expr::sum(linear))
                    })
                    .collect()
            })
            .collect()
    }
}

/// `Gammabar^alpha_{a beta}(x)` of a linear connection on the model bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearCoeffs {
    pub gamma1: Vec<Vec<Vec<Expr>>>,
}

impl LinearCoeffs {
    pub fn gamma1_at(&self, x: &[f64]) -> Result<Vec<Vec<Vec<f64>>>> {
        let env = Env::new().with_x(x);
        self.gamma1.iter().map(|row| eval_matrix(row, &env)).collect()
    }

    /// `Gammabar(x) w` contracted with `v`: `Gamma^alpha_{a beta} w^beta v^a`.
    pub fn apply(&self, x: &[f64], w: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        Ok(contract(&self.gamma1_at(x)?, w, v))
    }

    /// `hbar(w, v)`: base part `rho(x) v`, fibre part `-Gammabar w v`.
    pub fn h_apply(&self, spec: &BundleSpec, x: &[f64], w: &[f64], v: &[f64]) -> Result<ETangent> {
        let dx = mat_vec(&spec.anchor_at(x)?, v);
        let dy = self.apply(x, w, v)?.into_iter().map(|c| -c).collect();
        Ok(ETangent { at: EPoint::new(x, w), dx, dy })
    }

    /// The coefficients as a spec-style matrix `Gammabar w`, linear in `y`.
    pub fn to_gamma(&self) -> Vec<Vec<Expr>> {
        let m = self.gamma1.len();
        let k = self.gamma1.first().map_or(0, Vec::len);
        AffineCoeffs { gamma0: vec![vec![Expr::zero(); k]; m], gamma1: self.gamma1.clone() }.to_gamma()
    }
}

// sum over a, beta of g[alpha][a][beta] w^beta v^a
fn contract(g: &[Vec<Vec<f64>>], w: &[f64], v: &[f64]) -> Vec<f64> {
    g.iter()
        .map(|row| {
            row.iter()
                .zip(v)
                .map(|(cell, va)| cell.iter().zip(w).map(|(gab, wb)| gab * wb).sum::<f64>() * va)
                .sum()
        })
        .collect()
}

/// The restriction `hbar` of the extension to the model bundle.
pub fn restrict_to_linear(ac: &AffineCoeffs) -> LinearCoeffs {
    LinearCoeffs { gamma1: ac.gamma1.clone() }
}

/// `Gamma~^A_{aB}(x)` of a linear connection on the bidual.
#[derive(Debug, Clone, PartialEq)]
pub struct BidualCoeffs {
    gamma_t: Vec<Vec<Vec<Expr>>>,
}

impl BidualCoeffs {
    /// Checks the `(m+1) x k x (m+1)` shape and that entries depend on `x` only.
    pub fn new(gamma_t: Vec<Vec<Vec<Expr>>>) -> Result<Self> {
        let rows = gamma_t.len();
        if rows < 2 {
            return Err(Error::Invalid("bidual coefficients need m + 1 >= 2 rows".into()));
        }
        let k = gamma_t[0].len();
        for row in &gamma_t {
            expect_len("bidual columns", k, row.len())?;
            for cell in row {
                expect_len("bidual depth", rows, cell.len())?;
                for e in cell {
                    x_only(e)?;
                }
            }
        }
        Ok(Self { gamma_t })
    }

    pub fn gamma_t(&self) -> &[Vec<Vec<Expr>>] {
        &self.gamma_t
    }

    pub fn e_dim(&self) -> usize {
        self.gamma_t.len() - 1
    }

    pub fn v_rank(&self) -> usize {
        self.gamma_t[0].len()
    }

    pub fn at(&self, x: &[f64]) -> Result<Vec<Vec<Vec<f64>>>> {
        let env = Env::new().with_x(x);
        self.gamma_t.iter().map(|row| eval_matrix(row, &env)).collect()
    }

    /// Replaces one coefficient, keeping the x-only rule.
    pub fn with_entry(mut self, a_row: usize, col: usize, b: usize, value: Expr) -> Result<Self> {
        x_only(&value)?;
        self.gamma_t[a_row][col][b] = value;
        Ok(self)
    }
}

/// A point of the bidual.
#[derive(Debug, Clone, PartialEq)]
pub struct TildeEPoint {
    pub x: Vec<f64>,
    pub y0: f64,
    pub y: Vec<f64>,
}

impl TildeEPoint {
    /// All fibre coordinates `(y0, y1..ym)`.
    pub fn fibre(&self) -> Vec<f64> {
        std::iter::once(self.y0).chain(self.y.iter().copied()).collect()
    }
}

/// A tangent vector to the bidual, fibre part ordered `(dy0, dy1..dym)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TildeTangent {
    pub at: TildeEPoint,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
}

/// `iota: E -> E~`, `(x, y) -> (x, 1, y)`.
pub fn iota(e: &EPoint) -> TildeEPoint {
    TildeEPoint { x: e.x.clone(), y0: 1.0, y: e.y.clone() }
}

/// `iota_bar: Ebar -> E~`, `(x, w) -> (x, 0, w)`.
pub fn iota_bar(x: &BasePoint, w: &[f64]) -> TildeEPoint {
    TildeEPoint { x: x.x.clone(), y0: 0.0, y: w.to_vec() }
}

/// Tangent map of `iota`: the fibre part gains a zero `dy0`.
pub fn t_iota(t: &ETangent) -> TildeTangent {
    TildeTangent {
        at: iota(&t.at),
        dx: t.dx.clone(),
        dy: std::iter::once(0.0).chain(t.dy.iter().copied()).collect(),
    }
}

/// The linear extension to the bidual: `Gamma~^0_{aB} = 0`,
/// `Gamma~^alpha_{a0} = Gamma^alpha_{a0}`, `Gamma~^alpha_{a beta} = Gamma^alpha_{a beta}`.
pub fn extend_to_bidual(ac: &AffineCoeffs) -> BidualCoeffs {
    let (m, k) = (ac.e_dim(), ac.v_rank());
    let mut gamma_t = vec![vec![vec![Expr::zero(); m + 1]; k]; m + 1];
    for alpha in 0..m {
        for a in 0..k {
            gamma_t[alpha + 1][a][0] = ac.gamma0[alpha][a].clone();
            for beta in 0..m {
                gamma_t[alpha + 1][a][beta + 1] = ac.gamma1[alpha][a][beta].clone();
            }
        }
    }
    BidualCoeffs { gamma_t }
}

/// `h~(p, v)`: base part `rho(x) v`, fibre part `-Gamma~^A_{aB}(x) y^B v^a`.
pub fn h_tilde(spec: &BundleSpec, bc: &BidualCoeffs, p: &TildeEPoint, v: &[f64]) -> Result<TildeTangent> {
    spec.check_v(v)?;
    expect_len("bidual fibre", bc.e_dim(), p.y.len())?;
    let dx = mat_vec(&spec.anchor_at(&p.x)?, v);
    let dy = contract(&bc.at(&p.x)?, &p.fibre(), v).into_iter().map(|c| -c).collect();
    Ok(TildeTangent { at: p.clone(), dx, dy })
}

/// Largest `|h~(iota(e), v) - T iota(h(e, v))|` over random samples.
pub fn verify_extension(spec: &BundleSpec, bc: &BidualCoeffs, samples: usize, seed: u64) -> Result<f64> {
    let split = Splitting::new(spec);
    let mut sampler = Sampler::new(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let e = EPoint::new(sampler.coords(spec.base_dim), sampler.coords(spec.e_dim));
        let v = sampler.coords(spec.v_rank);
        let lhs = h_tilde(spec, bc, &iota(&e), &v)?;
        let rhs = t_iota(&split.h_apply(&e, &v)?);
        worst = worst.max(max_abs_diff(&lhs.dx, &rhs.dx)).max(max_abs_diff(&lhs.dy, &rhs.dy));
    }
    Ok(worst)
}

/// Scaled residual of `h(e + w, v) = h(e, v) + hbar(w, v)` (fibre parts; the
/// base parts agree identically) at `samples` points drawn from `sampler`.
pub fn hhbar_residual(spec: &BundleSpec, ac: &AffineCoeffs, sampler: &mut Sampler, samples: usize) -> Result<f64> {
    let lin = restrict_to_linear(ac);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let x = sampler.coords(spec.base_dim);
        let y = sampler.coords(spec.e_dim);
        let w = sampler.coords(spec.e_dim);
        let v = sampler.coords(spec.v_rank);
        let shifted: Vec<f64> = y.iter().zip(&w).map(|(a, b)| a + b).collect();
        let lhs = spec.gamma_apply(&EPoint::new(x.clone(), shifted), &v)?;
        let base = spec.gamma_apply(&EPoint::new(x.clone(), y), &v)?;
        let bar = lin.apply(&x, &w, &v)?;
        let scale = 1.0 + max_abs(&lhs).max(max_abs(&base)).max(max_abs(&bar));
        let residual = lhs.iter().zip(base.iter().zip(&bar)).fold(0.0_f64, |acc, (l, (b, r))| acc.max((l - b - r).abs()));
        worst = worst.max(residual / scale);
    }
    Ok(worst)
}

/// A spec together with verified affine coefficients for it.
#[derive(Debug, Clone)]
pub struct AffineConnection<'a> {
    spec: &'a BundleSpec,
    coeffs: AffineCoeffs,
}

impl<'a> AffineConnection<'a> {
    /// Runs [`connection::check_affine`] and fails with its counterexample
    /// when the coefficients are not affine in `y`.
    pub fn from_spec(spec: &'a BundleSpec, samples: usize, seed: u64) -> Result<Self> {
        let verdict = connection::check_affine(spec, samples, seed)?;
        if let Some(ce) = verdict.counterexample {
            return Err(Error::NotAffine(Box::new(ce)));
        }
        match verdict.coeffs {
            Some(coeffs) if verdict.hhbar_residual.is_some_and(|r| r <= connection::TOL_HHBAR) => {
                Ok(Self { spec, coeffs })
            }
            _ => Err(Error::Invalid(format!(
                "affine decomposition does not reproduce the connection (residual {:?})",
                verdict.hhbar_residual
            ))),
        }
    }

    pub fn spec(&self) -> &'a BundleSpec {
        self.spec
    }

    pub fn coeffs(&self) -> &AffineCoeffs {
        &self.coeffs
    }

    pub fn bidual(&self) -> BidualCoeffs {
        extend_to_bidual(&self.coeffs)
    }

    pub fn linear(&self) -> LinearCoeffs {
        restrict_to_linear(&self.coeffs)
    }
}

fn check_sections(spec: &BundleSpec, zeta: &SectionV, fibre: usize, sigma: &[Expr]) -> Result<()> {
    expect_len("section of V", spec.v_rank, zeta.components.len())?;
    expect_len("section components", fibre, sigma.len())
}

// d sigma^alpha / dx^i rho^i_a zeta^a, for every alpha
fn derivative_along_anchor(spec: &BundleSpec, zeta: &SectionV, sigma: &[Expr], x: &[f64]) -> Result<Vec<f64>> {
    let direction = spec.anchor_apply(&zeta.value(x)?)?;
    let env = Env::new().with_x(x);
    sigma
        .iter()
        .map(|s| {
            let mut acc = 0.0;
            for (i, d) in direction.iter().enumerate() {
                acc += s.diff(Var::X(i + 1)).eval(&env)? * d;
            }
            Ok(acc)
        })
        .collect()
}

/// Coordinate covariant derivative of a section of `E`:
/// `(d sigma^alpha/dx^i rho^i_a + Gamma^alpha_{a0} + Gamma^alpha_{a beta} sigma^beta) zeta^a`.
pub fn cov_deriv(spec: &BundleSpec, ac: &AffineCoeffs, zeta: &SectionV, sigma: &SectionE, x: &BasePoint) -> Result<Vec<f64>> {
    check_sections(spec, zeta, spec.e_dim, &sigma.components)?;
    let along = derivative_along_anchor(spec, zeta, &sigma.components, &x.x)?;
    let z = zeta.eval(&x.x)?;
    let s = sigma.eval(&x.x)?;
    let offset = mat_vec(&ac.gamma0_at(&x.x)?, &z);
    let linear = contract(&ac.gamma1_at(&x.x)?, &s, &z);
    Ok(along.iter().zip(offset.iter().zip(&linear)).map(|(a, (b, c))| a + b + c).collect())
}

/// Linear covariant derivative of a section of the model bundle:
/// `(d eta^alpha/dx^i rho^i_a + Gamma^alpha_{a beta} eta^beta) zeta^a`.
pub fn cov_deriv_linear(spec: &BundleSpec, lin: &LinearCoeffs, zeta: &SectionV, eta: &SectionE, x: &BasePoint) -> Result<Vec<f64>> {
    check_sections(spec, zeta, spec.e_dim, &eta.components)?;
    let along = derivative_along_anchor(spec, zeta, &eta.components, &x.x)?;
    let linear = lin.apply(&x.x, &eta.eval(&x.x)?, &zeta.eval(&x.x)?)?;
    Ok(along.iter().zip(&linear).map(|(a, b)| a + b).collect())
}

/// Linear covariant derivative on the bidual of a section with components
/// `sigma_t = (sigma^0, sigma^1..sigma^m)`, all functions of `x`.
pub fn cov_deriv_bidual(spec: &BundleSpec, bc: &BidualCoeffs, zeta: &SectionV, sigma_t: &[Expr], x: &BasePoint) -> Result<Vec<f64>> {
    check_sections(spec, zeta, bc.e_dim() + 1, sigma_t)?;
    let along = derivative_along_anchor(spec, zeta, sigma_t, &x.x)?;
    let env = Env::new().with_x(&x.x);
    let values = sigma_t.iter().map(|s| Ok(s.eval(&env)?)).collect::<Result<Vec<_>>>()?;
    let linear = contract(&bc.at(&x.x)?, &values, &zeta.eval(&x.x)?);
    Ok(along.iter().zip(&linear).map(|(a, b)| a + b).collect())
}

/// Covariant derivatives of the dual basis: row `A` holds the coefficients
/// of `nabla~_zeta e^A = -zeta^a Gamma~^A_{aB} e^B`.
pub fn dual_basis_derivative(bc: &BidualCoeffs, zeta: &SectionV, x: &BasePoint) -> Result<Vec<Vec<f64>>> {
    expect_len("section of V", bc.v_rank(), zeta.components.len())?;
    let g = bc.at(&x.x)?;
    let z = zeta.eval(&x.x)?;
    Ok(g.iter()
        .map(|row| {
            (0..row[0].len())
                .map(|b| -row.iter().zip(&z).map(|(cell, za)| cell[b] * za).sum::<f64>())
                .collect()
        })
        .collect())
}

/// The extension of the pair `(nabla, nablabar)` to the bidual evaluated on
/// `f iota(sigma)`: `f iota_bar(nabla_zeta sigma) + rho(zeta)(f) iota(sigma)`.
pub fn bidual_from_pair(
    spec: &BundleSpec,
    ac: &AffineCoeffs,
    zeta: &SectionV,
    f: &Expr,
    sigma: &SectionE,
    x: &BasePoint,
) -> Result<Vec<f64>> {
    let nabla = cov_deriv(spec, ac, zeta, sigma, x)?;
    let fx = f.eval(&Env::new().with_x(&x.x))?;
    let df = anchored_derivative(spec, zeta, f, x)?;
    let s = sigma.eval(&x.x)?;
    Ok(std::iter::once(df)
        .chain(nabla.iter().zip(&s).map(|(n, si)| fx * n + df * si))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct E0Verdict {
    pub seed: u64,
    pub samples: usize,
    pub tolerance: f64,
    pub parallel: bool,
    pub max_abs: f64,
    /// `(x, a, B, Gamma~^0_{aB}(x))` for the first nonzero entry found.
    pub witness: Option<(Vec<f64>, usize, usize, f64)>,
    /// When parallel: whether the connection induced on `iota(E)` passes
    /// the affineness check.
    pub induced_affine: Option<bool>,
}

/// Whether `e^0` is parallel, i.e. `Gamma~^0_{aB}` vanishes at all samples.
pub fn check_e0_parallel(spec: &BundleSpec, bc: &BidualCoeffs, samples: usize, seed: u64) -> Result<E0Verdict> {
    expect_len("bidual fibre", spec.e_dim, bc.e_dim())?;
    expect_len("bidual columns", spec.v_rank, bc.v_rank())?;
    let mut sampler = Sampler::new(seed);
    let mut max_abs_seen: f64 = 0.0;
    let mut witness = None;
    for _ in 0..samples {
        let x = sampler.coords(spec.base_dim);
        let g = bc.at(&x)?;
        for (a, cell) in g[0].iter().enumerate() {
            for (b, value) in cell.iter().enumerate() {
                max_abs_seen = max_abs_seen.max(value.abs());
                if value.abs() > TOL_E0 && witness.is_none() {
                    witness = Some((x.clone(), a, b, *value));
                }
            }
        }
    }
    let parallel = witness.is_none();
    let induced_affine = if parallel {
        // Gamma^alpha_a(x, y) = Gamma~^alpha_{a0} + Gamma~^alpha_{a beta} y^beta
        let gamma0 = bc.gamma_t[1..].iter().map(|row| row.iter().map(|cell| cell[0].clone()).collect()).collect();
        let gamma1 = bc.gamma_t[1..].iter().map(|row| row.iter().map(|cell| cell[1..].to_vec()).collect()).collect();
        let induced = AffineCoeffs::new(gamma0, gamma1)?;
        let induced_spec = BundleSpec::new(spec.base_dim, spec.v_rank, spec.e_dim, spec.anchor.clone(), induced.to_gamma())?;
        Some(connection::check_affine(&induced_spec, samples, seed)?.passed())
    } else {
        None
    };
    Ok(E0Verdict { seed, samples, tolerance: TOL_E0, parallel, max_abs: max_abs_seen, witness, induced_affine })
}

/// `K~ = rho1 - h~ o j~` on a prolonged vector of the bidual given by its
/// point, `V` part and vertical part: `Z^A + Gamma~^A_{aB} y^B v^a`.
pub fn connection_map_tilde(bc: &BidualCoeffs, p: &TildeEPoint, v: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    expect_len("bidual vertical part", bc.e_dim() + 1, z.len())?;
    let g = contract(&bc.at(&p.x)?, &p.fibre(), v);
    Ok(z.iter().zip(&g).map(|(a, b)| a + b).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommutationResidual {
    /// `|iota_bar(K(pv)) - K~(T iota(pv))|`
    pub affine: f64,
    /// `|iota_bar(Kbar(pv)) - K~(T iota_bar(pv))|`, reading `pv` as a
    /// prolonged vector of the model bundle.
    pub linear: f64,
}

impl CommutationResidual {
    pub fn max(&self) -> f64 {
        self.affine.max(self.linear)
    }
}

/// Compares the connection maps through the embeddings of `E` and `Ebar`
/// into the bidual.
pub fn commutation_check(conn: &AffineConnection<'_>, pv: &ProlongedVector) -> Result<CommutationResidual> {
    let spec = conn.spec;
    let bc = conn.bidual();
    let lifted_z: Vec<f64> = std::iter::once(0.0).chain(pv.z.iter().copied()).collect();

    let k = Splitting::new(spec).connection_map(pv)?;
    let lhs: Vec<f64> = std::iter::once(0.0).chain(k).collect();
    let rhs = connection_map_tilde(&bc, &iota(&pv.base_point()), &pv.v, &lifted_z)?;
    let affine = max_abs_diff(&lhs, &rhs);

    let lin = conn.linear();
    let kbar: Vec<f64> = pv.z.iter().zip(lin.apply(&pv.x, &pv.y, &pv.v)?).map(|(a, b)| a + b).collect();
    let lhs: Vec<f64> = std::iter::once(0.0).chain(kbar).collect();
    let rhs = connection_map_tilde(&bc, &iota_bar(&BasePoint::new(pv.x.clone()), &pv.y), &pv.v, &lifted_z)?;
    let linear = max_abs_diff(&lhs, &rhs);

    Ok(CommutationResidual { affine, linear })
}

/// Rebuilds the connection coefficients from the covariant derivative with
/// the chart-constant section through each point: `h(e, v) = T psi(rho(v)) -
/// (nabla_v psi)^V`, whose fibre part is `-(Gamma_0 + Gamma_1 y) v`.
pub fn reconstruct_h(spec: &BundleSpec, ac: &AffineCoeffs) -> Result<Vec<Vec<Expr>>> {
    let (m, k) = (ac.e_dim(), ac.v_rank());
    expect_len("fibre dimension", spec.e_dim, m)?;
    expect_len("V rank", spec.v_rank, k)?;
    // psi^beta(x) = y^beta: constant along the base
    let psi: Vec<Expr> = (1..=m).map(|b| Expr::var(Var::Y(b))).collect();
    let mut gamma = vec![vec![Expr::zero(); k]; m];
    for a in 0..k {
        for alpha in 0..m {
            let tangent = Expr::sum(
                (0..spec.base_dim).map(|i| Expr::mul(psi[alpha].diff(Var::X(i + 1)), spec.anchor[i][a].clone())),
            );
            let nabla = Expr::add(
                Expr::add(tangent.clone(), ac.gamma0[alpha][a].clone()),
                Expr::sum((0..m).map(|b| Expr::mul(ac.gamma1[alpha][a][b].clone(), psi[b].clone()))),
            );
            // fibre part of h is tangent - nabla, and equals -Gamma v
            gamma[alpha][a] = Expr::sub(nabla, tangent);
        }
    }
    Ok(gamma)
}

/// Numeric form of the reconstruction with an arbitrary section `psi`
/// through `e`; the result does not depend on which section is chosen.
pub fn h_from_covariant(
    spec: &BundleSpec,
    ac: &AffineCoeffs,
    psi: &SectionE,
    e: &EPoint,
    v: &[f64],
) -> Result<ETangent> {
    spec.check_e_point(e)?;
    let through = psi.eval(&e.x)?;
    if max_abs_diff(&through, &e.y) > 1e-12 {
        return Err(Error::Invalid(format!("section passes through {through:?}, not {:?}", e.y)));
    }
    let x = BasePoint::new(e.x.clone());
    let direction = spec.anchor_apply(&crate::VVector::new(e.x.clone(), v.to_vec()))?;
    let tangent = psi.tangent(&x, &direction)?;
    let constant_zeta = SectionV { components: v.iter().map(|c| Expr::constant(*c)).collect() };
    let nabla = cov_deriv(spec, ac, &constant_zeta, psi, &x)?;
    let dy = tangent.dy.iter().zip(&nabla).map(|(a, b)| a - b).collect();
    Ok(ETangent { at: e.clone(), dx: direction, dy })
}
