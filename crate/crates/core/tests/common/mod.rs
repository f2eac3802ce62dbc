#![allow(dead_code)]

use rhoconn::affine::AffineCoeffs;
use rhoconn::connection::check_affine;
use rhoconn::fixtures;
use rhoconn::sampling::Sampler;
use rhoconn::{BundleSpec, EPoint, Expr, ProlongedVector, Var};

pub fn xs(n: usize) -> Vec<Var> {
    (1..=n).map(Var::X).collect()
}

/// Anchor and coefficients of degree two in `x`, affine in `y`.
pub fn random_affine_spec(s: &mut Sampler, n: usize, k: usize, m: usize) -> BundleSpec {
    let vars = xs(n);
    let anchor = (0..n).map(|_| (0..k).map(|_| s.poly(&vars, 2)).collect()).collect();
    let gamma = (0..m)
        .map(|_| {
            (0..k)
                .map(|_| {
                    let offset = s.poly(&vars, 2);
                    let linear: Vec<Expr> =
                        (1..=m).map(|b| Expr::mul(s.poly(&vars, 2), Expr::Var(Var::Y(b)))).collect();
                    Expr::add(offset, Expr::sum(linear))
                })
                .collect()
        })
        .collect();
    BundleSpec::new(n, k, m, anchor, gamma).unwrap()
}

/// Like [`random_affine_spec`] but with a `y1^2` term in one entry.
pub fn random_quadratic_spec(s: &mut Sampler, n: usize, k: usize, m: usize) -> BundleSpec {
    let mut spec = random_affine_spec(s, n, k, m);
    let (row, col) = (s.index(m), s.index(k));
    let bump = Expr::pow(Expr::Var(Var::Y(1)), Expr::Num(2.0));
    spec.gamma[row][col] = Expr::add(spec.gamma[row][col].clone(), bump);
    BundleSpec::new(n, k, m, spec.anchor, spec.gamma).unwrap()
}

pub fn affine_coeffs(spec: &BundleSpec) -> AffineCoeffs {
    check_affine(spec, 16, 1).unwrap().coeffs.expect("spec is affine")
}

pub fn random_prolonged(s: &mut Sampler, spec: &BundleSpec) -> ProlongedVector {
    ProlongedVector::new(
        s.coords(spec.base_dim),
        s.coords(spec.e_dim),
        s.coords(spec.v_rank),
        s.coords(spec.e_dim),
    )
}

pub fn random_point(s: &mut Sampler, spec: &BundleSpec) -> EPoint {
    EPoint::new(s.coords(spec.base_dim), s.coords(spec.e_dim))
}

pub fn fixture_specs() -> Vec<BundleSpec> {
    vec![fixtures::f1(), fixtures::f2(), fixtures::f4(), fixtures::flat()]
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    rhoconn::linalg::max_abs_diff(a, b)
}
