use std::fmt;

use super::Expr;

// binding strength of the node as printed
fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Neg(_) => 3,
        Expr::Pow(..) => 4,
        Expr::Num(c) if *c < 0.0 || !c.is_finite() => 0,
        Expr::Num(_) | Expr::Var(_) | Expr::Call(..) => 5,
    }
}

fn child(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
    if prec(e) < min {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(c) => write!(f, "{c}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(a) => {
                f.write_str("-")?;
                child(f, a, 3)
            }
            Expr::Add(a, b) => {
                child(f, a, 1)?;
                f.write_str(" + ")?;
                child(f, b, 2)
            }
            Expr::Sub(a, b) => {
                child(f, a, 1)?;
                f.write_str(" - ")?;
                child(f, b, 2)
            }
            Expr::Mul(a, b) => {
                child(f, a, 2)?;
                f.write_str("*")?;
                child(f, b, 3)
            }
            Expr::Div(a, b) => {
                child(f, a, 2)?;
                f.write_str("/")?;
                child(f, b, 3)
            }
            Expr::Pow(a, b) => {
                child(f, a, 5)?;
                f.write_str("^")?;
                child(f, b, 3)
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::exprlang::parse;

    #[test]
    fn minimal_parentheses() {
        for (src, printed) in [
            ("2 + 3*y1", "2 + 3*y1"),
            ("(2 + 3)*y1", "(2 + 3)*y1"),
            ("1 - (2 - 3)", "1 - (2 - 3)"),
            ("(1 - 2) - 3", "1 - 2 - 3"),
            ("-x1^2", "-x1^2"),
            ("(-x1)^2", "(-x1)^2"),
            ("(x1^2)^3", "(x1^2)^3"),
            ("x1^2^3", "x1^2^3"),
            ("x1/(x2*x3)", "x1/(x2*x3)"),
            ("x1*-x2", "x1*-x2"),
            ("-(x1*x2)", "-(x1*x2)"),
            ("sin(x1 + 1)^2", "sin(x1 + 1)^2"),
        ] {
            assert_eq!(parse(src).unwrap().to_string(), printed, "{src}");
        }
    }
}
