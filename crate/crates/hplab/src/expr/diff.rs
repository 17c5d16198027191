//! Symbolic differentiation.
//!
//! `diff` produces an unsimplified tree; callers normalize with
//! [`super::simplify`]. Parameters are treated as constants. The special
//! kernels `mlf` and `c0` have no in-system closed-form derivative (that
//! would need the two-parameter Mittag-Leffler family), so differentiating
//! them with respect to a variable they depend on is reported as
//! [`ExprError::UnsupportedDerivative`]; the time-operator tables in
//! `timeops` handle those profiles without ever taking this path.

use super::{Expr, ExprError, Func, Var};

pub fn diff(e: &Expr, v: Var) -> Result<Expr, ExprError> {
    Ok(match e {
        Expr::Const(_) | Expr::Param(_) => Expr::num(0.0),
        Expr::Var(w) => {
            if *w == v {
                Expr::num(1.0)
            } else {
                Expr::num(0.0)
            }
        }
        Expr::Add(ts) => Expr::Add(ts.iter().map(|t| diff(t, v)).collect::<Result<_, _>>()?),
        Expr::Mul(fs) => {
            // Product rule over the n-ary factor list.
            let mut terms = Vec::with_capacity(fs.len());
            for k in 0..fs.len() {
                let mut factors = Vec::with_capacity(fs.len());
                for (j, f) in fs.iter().enumerate() {
                    if j == k {
                        factors.push(diff(f, v)?);
                    } else {
                        factors.push(f.clone());
                    }
                }
                terms.push(Expr::mul(factors));
            }
            Expr::add(terms)
        }
        Expr::Neg(x) => Expr::Neg(Box::new(diff(x, v)?)),
        Expr::Pow(b, ex) => {
            if let Expr::Const(c) = &**ex {
                // d (b^c) = c b^(c-1) b'
                let cm1 = match c {
                    super::Scalar::Real(x) => Expr::num(x - 1.0),
                    super::Scalar::Complex(z) => Expr::Const(super::Scalar::Complex(z - 1.0)),
                };
                Expr::Mul(vec![
                    Expr::Const(*c),
                    Expr::Pow(b.clone(), Box::new(cm1)),
                    diff(b, v)?,
                ])
            } else {
                // General power: b^e (e' ln b + e b' / b).
                Expr::Mul(vec![
                    e.clone(),
                    Expr::Add(vec![
                        Expr::Mul(vec![diff(ex, v)?, Expr::ln((**b).clone())]),
                        Expr::Mul(vec![
                            (**ex).clone(),
                            diff(b, v)?,
                            Expr::powf((**b).clone(), -1.0),
                        ]),
                    ]),
                ])
            }
        }
        Expr::Fun(f, args) => {
            let arg = &args[if *f == Func::MittagLeffler { 1 } else { 0 }];
            match f {
                Func::Sinh => chain(Expr::cosh(arg.clone()), arg, v)?,
                Func::Cosh => chain(Expr::sinh(arg.clone()), arg, v)?,
                Func::Tanh => chain(Expr::powf(Expr::cosh(arg.clone()), -2.0), arg, v)?,
                Func::Ln => chain(Expr::powf(arg.clone(), -1.0), arg, v)?,
                Func::Exp => chain(Expr::exp(arg.clone()), arg, v)?,
                Func::Sqrt => chain(
                    Expr::Mul(vec![Expr::num(0.5), Expr::powf(arg.clone(), -0.5)]),
                    arg,
                    v,
                )?,
                Func::MittagLeffler | Func::C0 | Func::Lap => {
                    if args.iter().any(|a| a.depends_on(v)) {
                        return Err(ExprError::UnsupportedDerivative(format!(
                            "{}(.) with respect to {}",
                            f.name(),
                            v.name()
                        )));
                    }
                    Expr::num(0.0)
                }
            }
        }
    })
}

fn chain(outer: Expr, arg: &Expr, v: Var) -> Result<Expr, ExprError> {
    Ok(Expr::Mul(vec![outer, diff(arg, v)?]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{evaluate, parse, simplify, Bindings, EvalMode, EvalPoint, Scalar};

    /// Central finite-difference oracle with Richardson refinement.
    fn fd_oracle(e: &Expr, v: Var, p: EvalPoint, bind: &Bindings) -> f64 {
        let f = |eta: f64, t: f64| {
            evaluate(e, EvalPoint::new(eta, t).unwrap(), bind, EvalMode::Real)
                .unwrap()
                .re()
        };
        let h = 1e-5 * (1.0 + p.eta.abs().max(p.t.abs()));
        let (d1, d2) = match v {
            Var::Eta => (
                (f(p.eta + h, p.t) - f(p.eta - h, p.t)) / (2.0 * h),
                (f(p.eta + 0.5 * h, p.t) - f(p.eta - 0.5 * h, p.t)) / h,
            ),
            Var::T => (
                (f(p.eta, p.t + h) - f(p.eta, p.t - h)) / (2.0 * h),
                (f(p.eta, p.t + 0.5 * h) - f(p.eta, p.t - 0.5 * h)) / h,
            ),
        };
        (4.0 * d2 - d1) / 3.0
    }

    fn check_against_fd(src: &str, pts: &[(f64, f64)]) {
        let e = parse(src, EvalMode::Real).unwrap();
        let mut bind = Bindings::new();
        bind.insert("c1".into(), Scalar::Real(0.7));
        bind.insert("c2".into(), Scalar::Real(1.3));
        for v in [Var::Eta, Var::T] {
            let d = simplify(&diff(&e, v).unwrap());
            for &(eta, t) in pts {
                let p = EvalPoint::new(eta, t).unwrap();
                let got = evaluate(&d, p, &bind, EvalMode::Real).unwrap().re();
                let want = fd_oracle(&e, v, p, &bind);
                let scale = got.abs().max(want.abs()).max(1.0);
                assert!(
                    (got - want).abs() <= 1e-7 * scale,
                    "d/d{} {src} at ({eta}, {t}): symbolic {got} vs fd {want}",
                    v.name()
                );
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let pts = [(0.4, 0.3), (1.0, 1.0), (2.7, 0.1), (6.0, 2.0)];
        for src in [
            "ln(sinh(eta))",
            "ln(tanh(0.5*eta))",
            "sinh(eta)*exp(-t)",
            "sqrt(c1*eta + c2)",
            "(c1*ln(tanh(0.5*eta)) + c2)^0.5",
            "eta^3 + t^2*eta",
            "tanh(eta*t)",
            "exp(c1*t)*cosh(eta)",
            "1/(c2 - t)",
        ] {
            check_against_fd(src, &pts);
        }
    }

    #[test]
    fn ln_sinh_derivative_closed_form() {
        let e = Expr::log_sinh_eta();
        let d = simplify(&diff(&e, Var::Eta).unwrap());
        let p = EvalPoint::new(2.0, 0.0).unwrap();
        let got = evaluate(&d, p, &Bindings::new(), EvalMode::Real)
            .unwrap()
            .re();
        let want = 2.0f64.cosh() / 2.0f64.sinh();
        assert!((got - want).abs() < 1e-14, "{got} vs coth(2) = {want}");
    }

    #[test]
    fn parameters_are_constants() {
        let e = parse("c1*c2 + c1", EvalMode::Real).unwrap();
        let d = simplify(&diff(&e, Var::Eta).unwrap());
        assert_eq!(d, Expr::num(0.0));
    }

    #[test]
    fn special_kernels_refuse_variable_derivatives() {
        let e = parse("mlf(0.5, -t)", EvalMode::Real).unwrap();
        assert!(matches!(
            diff(&e, Var::T),
            Err(ExprError::UnsupportedDerivative(_))
        ));
        // ... but are constants with respect to the other variable.
        let d = simplify(&diff(&e, Var::Eta).unwrap());
        assert_eq!(d, Expr::num(0.0));
        let c = parse("c0(-t)", EvalMode::Real).unwrap();
        assert!(matches!(
            diff(&c, Var::T),
            Err(ExprError::UnsupportedDerivative(_))
        ));
    }
}
