use super::{Env, EvalError, Expr, Func};

fn finite(op: &'static str, value: f64) -> Result<f64, EvalError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(EvalError::NonFinite(op))
    }
}

/// Exponents that are integral literals are evaluated by repeated
/// multiplication and accept any base.
fn integer_exponent(e: &Expr) -> Option<i32> {
    let c = e.as_const()?;
    (c.fract() == 0.0 && c.abs() <= i32::MAX as f64).then_some(c as i32)
}

impl Expr {
    /// Evaluates the expression in IEEE double precision.
    pub fn eval(&self, env: &Env) -> Result<f64, EvalError> {
        match self {
            Expr::Num(c) => Ok(*c),
            Expr::Var(v) => env.get(*v).ok_or(EvalError::UnboundVariable(*v)),
            Expr::Neg(a) => Ok(-a.eval(env)?),
            Expr::Add(a, b) => finite("+", a.eval(env)? + b.eval(env)?),
            Expr::Sub(a, b) => finite("-", a.eval(env)? - b.eval(env)?),
            Expr::Mul(a, b) => finite("*", a.eval(env)? * b.eval(env)?),
            Expr::Div(a, b) => {
                let num = a.eval(env)?;
                let den = b.eval(env)?;
                if den == 0.0 {
                    return Err(EvalError::Domain(format!("division by zero in `{self}`")));
                }
                finite("/", num / den)
            }
            Expr::Pow(a, b) => {
                let base = a.eval(env)?;
                if let Some(n) = integer_exponent(b) {
                    if base == 0.0 && n < 0 {
                        return Err(EvalError::Domain(format!("zero to a negative power in `{self}`")));
                    }
                    return finite("^", base.powi(n));
                }
                let exponent = b.eval(env)?;
                if base <= 0.0 {
                    return Err(EvalError::Domain(format!(
                        "non-positive base {base} with non-integer-literal exponent in `{self}`"
                    )));
                }
                finite("^", (exponent * base.ln()).exp())
            }
            Expr::Call(func, a) => {
                let x = a.eval(env)?;
                match func {
                    Func::Sin => Ok(x.sin()),
                    Func::Cos => Ok(x.cos()),
                    Func::Exp => finite("exp", x.exp()),
                    Func::Log => {
                        if x <= 0.0 {
                            return Err(EvalError::Domain(format!("log of non-positive argument {x}")));
                        }
                        Ok(x.ln())
                    }
                    Func::Sqrt => {
                        if x < 0.0 {
                            return Err(EvalError::Domain(format!("sqrt of negative argument {x}")));
                        }
                        Ok(x.sqrt())
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::exprlang::{parse, Env, EvalError, Var};

    fn eval(src: &str, env: &Env) -> Result<f64, EvalError> {
        parse(src).unwrap().eval(env)
    }

    #[test]
    fn examples() {
        assert_eq!(eval("2 + 3*y1", &Env::new().with(Var::Y(1), 1.0)), Ok(5.0));
        assert_eq!(eval("sin(x1)", &Env::new().with(Var::X(1), 0.0)), Ok(0.0));
        assert_eq!(eval("y1^2", &Env::new().with(Var::Y(1), 3.0)), Ok(9.0));
        assert_eq!(eval("exp(0) + v1", &Env::new().with(Var::V(1), 2.0)), Ok(3.0));
        assert!(matches!(eval("1/x1", &Env::new().with(Var::X(1), 0.0)), Err(EvalError::Domain(_))));
    }

    #[test]
    fn unbound_variables_fail() {
        assert_eq!(eval("x1 + x2", &Env::new().with(Var::X(1), 1.0)), Err(EvalError::UnboundVariable(Var::X(2))));
        assert_eq!(eval("t", &Env::new()), Err(EvalError::UnboundVariable(Var::T)));
    }

    #[test]
    fn power_domain() {
        let at = |x: f64| Env::new().with(Var::X(1), x);
        assert_eq!(eval("x1^3", &at(-2.0)), Ok(-8.0));
        assert_eq!(eval("x1^-2", &at(-2.0)), Ok(0.25));
        assert_eq!(eval("x1^0", &at(0.0)), Ok(1.0));
        assert!(matches!(eval("x1^-1", &at(0.0)), Err(EvalError::Domain(_))));
        assert!(matches!(eval("x1^0.5", &at(-1.0)), Err(EvalError::Domain(_))));
        assert!(matches!(eval("x1^(1+1)", &at(-1.0)), Err(EvalError::Domain(_))));
        assert!((eval("x1^0.5", &at(4.0)).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn log_sqrt_domain() {
        let at = |x: f64| Env::new().with(Var::X(1), x);
        assert!(matches!(eval("log(x1)", &at(-1.0)), Err(EvalError::Domain(_))));
        assert!(matches!(eval("log(x1)", &at(0.0)), Err(EvalError::Domain(_))));
        assert!(matches!(eval("sqrt(x1)", &at(-1e-9)), Err(EvalError::Domain(_))));
        assert_eq!(eval("sqrt(x1)", &at(0.0)), Ok(0.0));
    }

    #[test]
    fn overflow_is_reported() {
        let env = Env::new().with(Var::X(1), 1000.0);
        assert_eq!(eval("exp(x1)", &env), Err(EvalError::NonFinite("exp")));
    }
}
