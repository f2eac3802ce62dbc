//! Admissible curves and parallel transport.
//!
//! A curve is given by its `V` part `c(t)`; the base path solves
//! `x' = rho(x) c(t)`. Transport solves `psi' = -Gamma(x, psi) c(t)` jointly
//! with it, by classical RK4 on a fixed grid. Connections need not be
//! affine, so finite-time escape is an ordinary outcome reported through
//! [`Status::BlowUp`].

use crate::affine::{AffineCoeffs, LinearCoeffs};
use crate::error::{expect_len, Error, Result};
use crate::exprlang::{Env, EvalError, Expr, Var};
use crate::geometry::{eval_vec, BundleSpec, EPoint};
use crate::linalg::mat_vec;

pub const DEFAULT_STEPS: usize = 1000;
/// Any state component beyond this magnitude counts as blow-up.
pub const BLOWUP_THRESHOLD: f64 = 1e12;

/// The `V` part of an admissible curve together with its start point.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSpecV {
    pub c: Vec<Expr>,
    pub x0: Vec<f64>,
    pub t0: f64,
    pub t1: f64,
}

impl CurveSpecV {
    pub fn new(c: Vec<Expr>, x0: Vec<f64>, t0: f64, t1: f64) -> Result<Self> {
        if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
            return Err(Error::Invalid(format!("curve interval [{t0}, {t1}] is empty")));
        }
        for e in &c {
            if let Some(v) = e.vars().into_iter().find(|v| *v != Var::T) {
                return Err(Error::Invalid(format!("curve component `{e}` depends on {v}, expected t only")));
            }
        }
        Ok(Self { c, x0, t0, t1 })
    }

    pub fn parse(c: &[&str], x0: &[f64], t0: f64, t1: f64) -> Result<Self> {
        let c = c.iter().map(|s| Ok(s.parse::<Expr>()?)).collect::<Result<Vec<_>>>()?;
        Self::new(c, x0.to_vec(), t0, t1)
    }

    pub fn c_at(&self, t: f64) -> Result<Vec<f64>> {
        eval_vec(&self.c, &Env::new().with_t(t))
    }

    fn check(&self, spec: &BundleSpec) -> Result<()> {
        expect_len("curve V part", spec.v_rank, self.c.len())?;
        spec.check_base(&self.x0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Status {
    Completed,
    /// `t_star` is the end of the first step whose state left the finite
    /// region or exceeded [`BLOWUP_THRESHOLD`].
    BlowUp { t_star: f64 },
}

struct Solution {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    status: Status,
}

fn escaped(state: &[f64]) -> bool {
    state.iter().any(|s| !s.is_finite() || s.abs() > BLOWUP_THRESHOLD)
}

fn axpy(a: &[f64], h: f64, k: &[f64]) -> Vec<f64> {
    a.iter().zip(k).map(|(p, q)| p + h * q).collect()
}

/// Classical RK4 with `steps` equal steps. Non-finite evaluations and
/// oversized states end the integration with a blow-up status; other
/// evaluation errors are returned.
fn rk4(
    rhs: impl Fn(f64, &[f64]) -> Result<Vec<f64>>,
    t0: f64,
    t1: f64,
    steps: usize,
    y0: Vec<f64>,
) -> Result<Solution> {
    if steps == 0 {
        return Err(Error::Invalid("at least one integration step is needed".into()));
    }
    let h = (t1 - t0) / steps as f64;
    let mut times = vec![t0];
    let mut states = vec![y0];
    for n in 0..steps {
        let t = t0 + n as f64 * h;
        let t_next = if n + 1 == steps { t1 } else { t0 + (n + 1) as f64 * h };
        let y = &states[n];
        let step = (|| -> Result<Vec<f64>> {
            let k1 = rhs(t, y)?;
            let k2 = rhs(t + h / 2.0, &axpy(y, h / 2.0, &k1))?;
            let k3 = rhs(t + h / 2.0, &axpy(y, h / 2.0, &k2))?;
            let k4 = rhs(t + h, &axpy(y, h, &k3))?;
            Ok(y.iter()
                .enumerate()
                .map(|(i, yi)| yi + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                .collect())
        })();
        let next = match step {
            Ok(next) if !escaped(&next) => next,
            Ok(_) | Err(Error::Eval(EvalError::NonFinite(_))) => {
                return Ok(Solution { times, states, status: Status::BlowUp { t_star: t_next } })
            }
            Err(e) => return Err(e),
        };
        times.push(t_next);
        states.push(next);
    }
    Ok(Solution { times, states, status: Status::Completed })
}

/// Lagrange interpolation through (up to) four grid samples around `t`.
fn interpolate(times: &[f64], values: &[Vec<f64>], t: f64) -> Vec<f64> {
    let n = times.len();
    let width = n.min(4);
    let idx = times.partition_point(|s| *s <= t).saturating_sub(1);
    let start = idx.saturating_sub(1).min(n - width);
    let window = start..start + width;
    let mut out = vec![0.0; values[0].len()];
    for j in window.clone() {
        let mut weight = 1.0;
        for m in window.clone() {
            if m != j {
                weight *= (t - times[m]) / (times[j] - times[m]);
            }
        }
        for (o, v) in out.iter_mut().zip(&values[j]) {
            *o += weight * v;
        }
    }
    out
}

/// A sampled base path `x(t)` of an admissible curve.
#[derive(Debug, Clone, PartialEq)]
pub struct BasePath {
    pub times: Vec<f64>,
    pub x: Vec<Vec<f64>>,
}

impl BasePath {
    /// Cubic interpolation between grid samples.
    pub fn at(&self, t: f64) -> Vec<f64> {
        interpolate(&self.times, &self.x, t)
    }

    pub fn end(&self) -> &[f64] {
        self.x.last().expect("paths are never empty")
    }
}

/// Integrates `x' = rho(x) c(t)` from `c.x0` over `[c.t0, c.t1]`.
pub fn integrate_base(spec: &BundleSpec, c: &CurveSpecV, steps: usize) -> Result<BasePath> {
    c.check(spec)?;
    let sol = rk4(|t, x| Ok(mat_vec(&spec.anchor_at(x)?, &c.c_at(t)?)), c.t0, c.t1, steps, c.x0.clone())?;
    match sol.status {
        Status::Completed => Ok(BasePath { times: sol.times, x: sol.states }),
        Status::BlowUp { t_star } => Err(Error::BlowUp { t_star }),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportResult {
    pub times: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub psi: Vec<Vec<f64>>,
    pub status: Status,
}

impl TransportResult {
    pub fn is_completed(&self) -> bool {
        self.status == Status::Completed
    }

    /// The last computed fibre value (at `t1` when completed).
    pub fn final_psi(&self) -> &[f64] {
        self.psi.last().expect("results are never empty")
    }

    pub fn x_at(&self, t: f64) -> Vec<f64> {
        interpolate(&self.times, &self.x, t)
    }

    pub fn psi_at(&self, t: f64) -> Vec<f64> {
        interpolate(&self.times, &self.psi, t)
    }

    pub fn psi_path(&self) -> PsiPath {
        PsiPath::Sampled { times: self.times.clone(), values: self.psi.clone() }
    }
}

// joint integration of (x, psi) with the given fibre right-hand side
fn transport_with(
    spec: &BundleSpec,
    c: &CurveSpecV,
    psi0: &[f64],
    steps: usize,
    fibre: impl Fn(&[f64], &[f64], &[f64]) -> Result<Vec<f64>>,
) -> Result<TransportResult> {
    c.check(spec)?;
    expect_len("initial fibre value", spec.e_dim, psi0.len())?;
    let n = spec.base_dim;
    let state0: Vec<f64> = c.x0.iter().chain(psi0).copied().collect();
    let sol = rk4(
        |t, s| {
            let (x, psi) = s.split_at(n);
            let cv = c.c_at(t)?;
            let mut out = mat_vec(&spec.anchor_at(x)?, &cv);
            out.extend(fibre(x, psi, &cv)?);
            Ok(out)
        },
        c.t0,
        c.t1,
        steps,
        state0,
    )?;
    let (x, psi) = sol.states.into_iter().map(|s| (s[..n].to_vec(), s[n..].to_vec())).unzip();
    Ok(TransportResult { times: sol.times, x, psi, status: sol.status })
}

/// The horizontal lift of the curve through `(x0, psi0)`:
/// `psi' = -Gamma(x, psi) c(t)` for any (possibly nonlinear) connection.
pub fn parallel_transport(spec: &BundleSpec, c: &CurveSpecV, psi0: &[f64], steps: usize) -> Result<TransportResult> {
    transport_with(spec, c, psi0, steps, |x, psi, cv| {
        Ok(spec.gamma_apply(&EPoint::new(x, psi), cv)?.into_iter().map(|g| -g).collect())
    })
}

/// Transport in the model bundle: `w' = -Gammabar(x) w c(t)`.
pub fn transport_linear(
    spec: &BundleSpec,
    lin: &LinearCoeffs,
    c: &CurveSpecV,
    w0: &[f64],
    steps: usize,
) -> Result<TransportResult> {
    transport_with(spec, c, w0, steps, |x, w, cv| Ok(lin.apply(x, w, cv)?.into_iter().map(|g| -g).collect()))
}

/// A fibre path to differentiate along a curve.
#[derive(Debug, Clone, PartialEq)]
pub enum PsiPath {
    /// Components as expressions in `t`, differentiated exactly.
    Expr(Vec<Expr>),
    /// Grid samples, interpolated and differentiated by finite differences.
    Sampled { times: Vec<f64>, values: Vec<Vec<f64>> },
}

impl PsiPath {
    pub fn parse(src: &[&str]) -> Result<Self> {
        let comps = src.iter().map(|s| Ok(s.parse::<Expr>()?)).collect::<Result<Vec<_>>>()?;
        for e in &comps {
            if let Some(v) = e.vars().into_iter().find(|v| *v != Var::T) {
                return Err(Error::Invalid(format!("path component `{e}` depends on {v}, expected t only")));
            }
        }
        Ok(PsiPath::Expr(comps))
    }

    fn len(&self) -> usize {
        match self {
            PsiPath::Expr(c) => c.len(),
            PsiPath::Sampled { values, .. } => values.first().map_or(0, Vec::len),
        }
    }

    // (psi(t), psi'(t)); sampled paths use step `delta` clipped to the samples
    fn value_and_rate(&self, t: f64, delta: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        match self {
            PsiPath::Expr(comps) => {
                let env = Env::new().with_t(t);
                let value = eval_vec(comps, &env)?;
                let rate = comps.iter().map(|e| Ok(e.diff(Var::T).eval(&env)?)).collect::<Result<Vec<_>>>()?;
                Ok((value, rate))
            }
            PsiPath::Sampled { times, values } => {
                if times.len() < 2 {
                    return Err(Error::Invalid("a sampled path needs at least two samples".into()));
                }
                let (first, last) = (times[0], times[times.len() - 1]);
                let at = |s: f64| interpolate(times, values, s);
                let value = at(t);
                // second-order stencils throughout; one-sided at the ends
                let rate = if t - delta < first {
                    let (a, b) = (at(t + delta), at(t + 2.0 * delta));
                    (0..value.len()).map(|i| (-3.0 * value[i] + 4.0 * a[i] - b[i]) / (2.0 * delta)).collect()
                } else if t + delta > last {
                    let (a, b) = (at(t - delta), at(t - 2.0 * delta));
                    (0..value.len()).map(|i| (3.0 * value[i] - 4.0 * a[i] + b[i]) / (2.0 * delta)).collect()
                } else {
                    let (a, b) = (at(t - delta), at(t + delta));
                    a.iter().zip(&b).map(|(p, q)| (q - p) / (2.0 * delta)).collect()
                };
                Ok((value, rate))
            }
        }
    }
}

/// `nabla_c psi (t) = psi'(t) + Gamma(x(t), psi(t)) c(t)`, an element of the
/// model fibre. The base path is integrated with `steps` steps.
pub fn cov_deriv_along(spec: &BundleSpec, c: &CurveSpecV, psi: &PsiPath, t: f64, steps: usize) -> Result<Vec<f64>> {
    expect_len("fibre path", spec.e_dim, psi.len())?;
    if t < c.t0 || t > c.t1 {
        return Err(Error::Invalid(format!("t = {t} lies outside [{}, {}]", c.t0, c.t1)));
    }
    let base = integrate_base(spec, c, steps)?;
    let delta = (c.t1 - c.t0) / (10.0 * steps as f64);
    let (value, rate) = psi.value_and_rate(t, delta)?;
    let g = spec.gamma_apply(&EPoint::new(base.at(t), value), &c.c_at(t)?)?;
    Ok(rate.iter().zip(&g).map(|(r, gi)| r + gi).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffineAction {
    /// `max_t |T(psi0 + w0) - T(psi0) - Tbar(w0)|` over the grid.
    pub max_residual: f64,
    /// `T(psi0 + w0) - T(psi0)` at `t1`.
    pub difference: Vec<f64>,
    /// `Tbar(w0)` at `t1`.
    pub linear: Vec<f64>,
}

/// Checks that transport acts affinely between fibres with linear part the
/// transport of the restricted linear connection.
pub fn transport_affine_action(
    spec: &BundleSpec,
    ac: &AffineCoeffs,
    c: &CurveSpecV,
    psi0: &[f64],
    w0: &[f64],
    steps: usize,
) -> Result<AffineAction> {
    expect_len("model fibre vector", spec.e_dim, w0.len())?;
    let shifted: Vec<f64> = psi0.iter().zip(w0).map(|(a, b)| a + b).collect();
    let lin = crate::affine::restrict_to_linear(ac);
    let runs = [
        parallel_transport(spec, c, psi0, steps)?,
        parallel_transport(spec, c, &shifted, steps)?,
        transport_linear(spec, &lin, c, w0, steps)?,
    ];
    for run in &runs {
        if let Status::BlowUp { t_star } = run.status {
            return Err(Error::BlowUp { t_star });
        }
    }
    let [base, moved, linear] = runs;
    let mut max_residual: f64 = 0.0;
    for ((p, q), w) in base.psi.iter().zip(&moved.psi).zip(&linear.psi) {
        for ((a, b), c) in p.iter().zip(q).zip(w) {
            max_residual = max_residual.max((b - a - c).abs());
        }
    }
    let difference = moved.final_psi().iter().zip(base.final_psi()).map(|(b, a)| b - a).collect();
    Ok(AffineAction { max_residual, difference, linear: linear.final_psi().to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{f1, f2, f4, flat};

    fn f1_oracle(t: f64) -> f64 {
        // psi' = -(2 + 3 psi), psi(0) = 1
        5.0 / 3.0 * (-3.0 * t).exp() - 2.0 / 3.0
    }

    #[test]
    fn base_paths() {
        let c = CurveSpecV::parse(&["1"], &[0.0], 0.0, 1.0).unwrap();
        assert!((integrate_base(&f1(), &c, DEFAULT_STEPS).unwrap().end()[0] - 1.0).abs() < 1e-12);
        let c = CurveSpecV::parse(&["0", "1"], &[0.0], 0.0, 1.0).unwrap();
        let path = integrate_base(&f4(), &c, DEFAULT_STEPS).unwrap();
        assert!(path.x.iter().all(|x| x[0] == 0.0));
        let c = CurveSpecV::parse(&["t"], &[0.0], 0.0, 1.0).unwrap();
        let path = integrate_base(&f1(), &c, DEFAULT_STEPS).unwrap();
        assert!((path.end()[0] - 0.5).abs() < 1e-10);
        assert!((path.at(0.3)[0] - 0.045).abs() < 1e-10);
    }

    #[test]
    fn curve_validation() {
        assert!(CurveSpecV::parse(&["1"], &[0.0], 1.0, 1.0).is_err());
        assert!(CurveSpecV::parse(&["x1"], &[0.0], 0.0, 1.0).is_err());
        let c = CurveSpecV::parse(&["1", "1"], &[0.0], 0.0, 1.0).unwrap();
        assert!(integrate_base(&f1(), &c, 10).is_err());
    }

    #[test]
    fn transport_oracles() {
        let c = CurveSpecV::parse(&["1"], &[0.0], 0.0, 1.0).unwrap();
        let r = parallel_transport(&f1(), &c, &[1.0], DEFAULT_STEPS).unwrap();
        assert!(r.is_completed());
        assert!((r.final_psi()[0] - f1_oracle(1.0)).abs() <= 1e-8);
        assert!((r.final_psi()[0] + 0.583688).abs() < 1e-6);

        let r = parallel_transport(&flat(), &c, &[1.7], DEFAULT_STEPS).unwrap();
        assert!(r.psi.iter().all(|p| p[0] == 1.7));

        let r = parallel_transport(&f2(), &c, &[1.0], DEFAULT_STEPS).unwrap();
        assert!((r.final_psi()[0] - 0.5).abs() <= 1e-8);
    }

    #[test]
    fn fourth_order_convergence() {
        let c = CurveSpecV::parse(&["1"], &[0.0], 0.0, 1.0).unwrap();
        let err = |n| (parallel_transport(&f1(), &c, &[1.0], n).unwrap().final_psi()[0] - f1_oracle(1.0)).abs();
        let ratio = err(50) / err(100);
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn blow_up_is_reported() {
        let spec = BundleSpec::parse(1, 1, 1, &[&["1"]], &[&["-y1^2"]]).unwrap();
        let c = CurveSpecV::parse(&["1"], &[0.0], 0.0, 1.0).unwrap();
        let r = parallel_transport(&spec, &c, &[2.0], DEFAULT_STEPS).unwrap();
        match r.status {
            Status::BlowUp { t_star } => assert!((t_star - 0.5).abs() < 0.01, "t* = {t_star}"),
            Status::Completed => panic!("expected blow-up"),
        }
        assert!(r.psi.iter().all(|p| p[0].is_finite()));
    }

    #[test]
    fn covariant_derivative_along_curves() {
        let c = CurveSpecV::parse(&["1"], &[0.0], 0.0, 1.0).unwrap();
        let d = cov_deriv_along(&f1(), &c, &PsiPath::parse(&["1"]).unwrap(), 0.0, DEFAULT_STEPS).unwrap();
        assert_eq!(d, vec![5.0]);
        let d = cov_deriv_along(&flat(), &c, &PsiPath::parse(&["t"]).unwrap(), 0.4, DEFAULT_STEPS).unwrap();
        assert_eq!(d, vec![1.0]);

        let lift = parallel_transport(&f1(), &c, &[1.0], DEFAULT_STEPS).unwrap();
        for t in [0.0, 0.1234, 0.5, 0.9, 1.0] {
            let d = cov_deriv_along(&f1(), &c, &lift.psi_path(), t, DEFAULT_STEPS).unwrap();
            assert!(d[0].abs() <= 1e-6, "t = {t}: {d:?}");
        }
    }

    #[test]
    fn affine_action() {
        let ac = AffineCoeffs::parse(&[&["2"]], &[&[&["3"]]]).unwrap();
        let c = CurveSpecV::parse(&["1"], &[0.0], 0.0, 1.0).unwrap();
        let a = transport_affine_action(&f1(), &ac, &c, &[1.0], &[1.0], DEFAULT_STEPS).unwrap();
        assert!(a.max_residual <= 1e-7);
        assert!((a.difference[0] - (-3.0f64).exp()).abs() <= 1e-8);
        assert!((a.linear[0] - (-3.0f64).exp()).abs() <= 1e-8);

        let a = transport_affine_action(&f1(), &ac, &c, &[1.0], &[0.0], DEFAULT_STEPS).unwrap();
        assert_eq!(a.max_residual, 0.0);
        let a = transport_affine_action(&flat(), &AffineCoeffs::zero(1, 1), &c, &[0.3], &[2.0], DEFAULT_STEPS).unwrap();
        assert!(a.max_residual <= 1e-15);
    }
}
