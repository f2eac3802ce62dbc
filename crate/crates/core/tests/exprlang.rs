use proptest::prelude::*;
use rhoconn::exprlang::{parse, Env, Expr, Var};
use rhoconn::sampling::{well_conditioned, Sampler};

const VARS: [Var; 4] = [Var::X(1), Var::X(2), Var::Y(1), Var::V(1)];

fn env_from(s: &mut Sampler) -> Env {
    VARS.iter().fold(Env::new(), |env, v| env.with(*v, s.coord()))
}

fn central(e: &Expr, var: Var, env: &Env, h: f64) -> Option<f64> {
    let at = env.get(var)?;
    let plus = e.eval(&env.clone().with(var, at + h)).ok()?;
    let minus = e.eval(&env.clone().with(var, at - h)).ok()?;
    Some((plus - minus) / (2.0 * h))
}

proptest! {
    #[test]
    fn print_then_parse_is_identity(seed in any::<u64>()) {
        let e = Sampler::new(seed).expr(&VARS, 5);
        let printed = e.to_string();
        prop_assert_eq!(parse(&printed).unwrap(), e, "{}", printed);
    }

    #[test]
    fn derivative_matches_finite_differences(seed in any::<u64>()) {
        let mut s = Sampler::new(seed);
        let e = s.expr(&VARS, 5);
        let var = VARS[s.index(VARS.len())];
        let env = env_from(&mut s);
        prop_assume!(well_conditioned(&e, &env));
        let exact = e.diff(var).eval(&env).unwrap();
        let fd = central(&e, var, &env, 1e-6).unwrap();
        prop_assert!((exact - fd).abs() <= 1e-5 * (1.0 + fd.abs()), "{e} d/d{var}: {exact} vs {fd}");
    }

    #[test]
    fn derivative_is_linear(seed in any::<u64>(), c in -3.0f64..3.0) {
        let mut s = Sampler::new(seed);
        let (a, b) = (s.expr(&VARS, 3), s.expr(&VARS, 3));
        let env = env_from(&mut s);
        prop_assume!(well_conditioned(&a, &env) && well_conditioned(&b, &env));
        let combined = Expr::Add(Box::new(a.clone()), Box::new(Expr::Mul(Box::new(Expr::constant(c)), Box::new(b.clone()))));
        let lhs = combined.diff(Var::X(1)).eval(&env).unwrap();
        let rhs = a.diff(Var::X(1)).eval(&env).unwrap() + c * b.diff(Var::X(1)).eval(&env).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
    }

    #[test]
    fn expansion_preserves_values(seed in any::<u64>()) {
        let mut s = Sampler::new(seed);
        let e = s.expr(&VARS, 4);
        let env = env_from(&mut s);
        prop_assume!(well_conditioned(&e, &env));
        let (a, b) = (e.eval(&env).unwrap(), e.expand().eval(&env).unwrap());
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{e}: {a} vs {b}");
    }

    #[test]
    fn variables_outside_the_env_are_reported(seed in any::<u64>()) {
        let e = Sampler::new(seed).expr(&[Var::X(1), Var::T], 4);
        prop_assume!(e.depends_on(Var::T));
        let err = e.eval(&Env::new().with(Var::X(1), 0.5));
        prop_assert!(err.is_err());
    }
}

#[test]
fn error_offsets_point_at_the_problem() {
    assert_eq!(parse("2 + * 3").unwrap_err().offset(), 4);
    assert_eq!(parse("x1 + foo(2)").unwrap_err().offset(), 5);
    assert_eq!(parse("x1 + z3").unwrap_err().offset(), 5);
    assert!(parse("sin").is_err());
    assert!(parse("(x1").is_err());
}
