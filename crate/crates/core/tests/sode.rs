mod common;

use proptest::prelude::*;
use rhoconn::connection::check_affine;
use rhoconn::sampling::Sampler;
use rhoconn::sode::{quadratic_force_check, sode_connection, SodeSpec};
use rhoconn::{Env, Expr, Var};

fn vars(d: usize) -> Vec<Var> {
    std::iter::once(Var::T).chain((1..=d).map(Var::X)).chain((1..=d).map(Var::V)).collect()
}

fn env(s: &mut Sampler, d: usize) -> Env {
    Env::new().with_t(s.coord()).with_x(&s.coords(d)).with_v(&s.coords(d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn coefficients_match_finite_differences(seed in any::<u64>()) {
        let mut s = Sampler::new(seed);
        let d = 2;
        let forces: Vec<Expr> = (0..d).map(|_| s.poly(&vars(d), 3)).collect();
        let ss = SodeSpec::new(d, forces.clone()).unwrap();
        let conn = sode_connection(&ss);
        let at = env(&mut s, d);
        let v: Vec<f64> = (1..=d).map(|j| at.get(Var::V(j)).unwrap()).collect();
        let h = 1e-6;
        for i in 0..d {
            let mut contracted = 0.0;
            for j in 0..d {
                let plus = forces[i].eval(&at.clone().with(Var::V(j + 1), v[j] + h)).unwrap();
                let minus = forces[i].eval(&at.clone().with(Var::V(j + 1), v[j] - h)).unwrap();
                let dfdv = (plus - minus) / (2.0 * h);
                contracted += dfdv * v[j];
                let exact = conn.gamma_j[i][j].eval(&at).unwrap();
                prop_assert!((exact + 0.5 * dfdv).abs() <= 1e-5);
            }
            let f = forces[i].eval(&at).unwrap();
            let exact = conn.gamma_0[i].eval(&at).unwrap();
            prop_assert!((exact - (-f + 0.5 * contracted)).abs() <= 1e-5);
        }
    }

    #[test]
    fn quadratic_iff_affine(seed in any::<u64>(), degree in 0u32..4) {
        let mut s = Sampler::new(seed);
        let d = 2;
        let forces: Vec<Expr> = (0..d).map(|_| s.poly(&vars(d), degree)).collect();
        let ss = SodeSpec::new(d, forces).unwrap();
        let verdict = quadratic_force_check(&ss, 32, seed).unwrap();
        let induced = sode_connection(&ss).to_bundle_spec().unwrap();
        prop_assert_eq!(verdict.quadratic, check_affine(&induced, 32, seed).unwrap().passed());
        prop_assert_eq!(verdict.quadratic, degree <= 2);
    }

    #[test]
    fn velocity_free_forces_sum_to_minus_f(seed in any::<u64>()) {
        let mut s = Sampler::new(seed);
        let d = 2;
        let base: Vec<Var> = std::iter::once(Var::T).chain((1..=d).map(Var::X)).collect();
        let forces: Vec<Expr> = (0..d).map(|_| s.poly(&base, 2)).collect();
        let conn = sode_connection(&SodeSpec::new(d, forces.clone()).unwrap());
        let at = env(&mut s, d);
        for i in 0..d {
            let mut sum = conn.gamma_0[i].eval(&at).unwrap();
            for j in 0..d {
                sum += conn.gamma_j[i][j].eval(&at).unwrap() * at.get(Var::V(j + 1)).unwrap();
            }
            prop_assert!((sum + forces[i].eval(&at).unwrap()).abs() <= 1e-12);
        }
    }
}
