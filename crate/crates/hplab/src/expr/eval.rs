//! Real and complex evaluation of expression trees.
//!
//! Real mode enforces strict domains: `ln` of a nonpositive value, fractional
//! powers of negative bases, and negative radicands are errors rather than
//! NaNs. Complex mode uses principal branches throughout. Both modes refuse
//! to evaluate an unresolved `lap(.)` node; operator trees must go through
//! [`super::apply_operator`] first.

use super::{Expr, ExprError, Func, Scalar, Var};
use crate::specfun;
use num_complex::Complex64;
use std::collections::BTreeMap;

/// Whether evaluation (and parsing) works over the reals or the complex
/// plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    Real,
    Complex,
}

/// Parameter bindings by name.
pub type Bindings = BTreeMap<String, Scalar>;

/// A point of the half plane cross time: `eta > 0`, both coordinates finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalPoint {
    pub eta: f64,
    pub t: f64,
}

impl EvalPoint {
    pub fn new(eta: f64, t: f64) -> Result<EvalPoint, ExprError> {
        if !eta.is_finite() || !t.is_finite() {
            return Err(ExprError::Domain(format!(
                "evaluation point must be finite, got eta = {eta}, t = {t}"
            )));
        }
        if eta <= 0.0 {
            return Err(ExprError::Domain(format!(
                "radial coordinate must be positive, got eta = {eta}"
            )));
        }
        Ok(EvalPoint { eta, t })
    }
}

/// Evaluates `e` at `p` with the given parameter bindings. Real mode yields
/// `Scalar::Real`, complex mode `Scalar::Complex`.
pub fn evaluate(
    e: &Expr,
    p: EvalPoint,
    bindings: &Bindings,
    mode: EvalMode,
) -> Result<Scalar, ExprError> {
    match mode {
        EvalMode::Real => eval_real(e, p, bindings).map(Scalar::Real),
        EvalMode::Complex => eval_complex(e, p, bindings).map(Scalar::Complex),
    }
}

/// Extracts a real argument from a complex intermediate, tolerating only
/// rounding-level imaginary parts. `mlf` and `c0` are real-analytic kernels;
/// feeding them genuinely complex arguments is a modeling error.
fn require_real(z: Complex64, what: &str) -> Result<f64, ExprError> {
    if z.im.abs() <= 1e-12 * (1.0 + z.re.abs()) {
        Ok(z.re)
    } else {
        Err(ExprError::Domain(format!(
            "{what} requires a real argument, got {z}"
        )))
    }
}

fn eval_real(e: &Expr, p: EvalPoint, bindings: &Bindings) -> Result<f64, ExprError> {
    Ok(match e {
        Expr::Const(Scalar::Real(x)) => *x,
        Expr::Const(Scalar::Complex(z)) => {
            if z.im == 0.0 {
                z.re
            } else {
                return Err(ExprError::Domain(format!(
                    "complex constant {z} in real evaluation"
                )));
            }
        }
        Expr::Var(Var::Eta) => p.eta,
        Expr::Var(Var::T) => p.t,
        Expr::Param(name) => match bindings.get(name) {
            Some(Scalar::Real(x)) => *x,
            Some(Scalar::Complex(z)) if z.im == 0.0 => z.re,
            Some(Scalar::Complex(z)) => {
                return Err(ExprError::Domain(format!(
                    "parameter `{name}` = {z} is complex in real evaluation"
                )))
            }
            None => return Err(ExprError::UnboundParameter(name.clone())),
        },
        Expr::Add(ts) => {
            let mut sum = 0.0;
            for t in ts {
                sum += eval_real(t, p, bindings)?;
            }
            sum
        }
        Expr::Mul(fs) => {
            let mut prod = 1.0;
            for f in fs {
                prod *= eval_real(f, p, bindings)?;
            }
            prod
        }
        Expr::Neg(x) => -eval_real(x, p, bindings)?,
        Expr::Pow(b, ex) => {
            let base = eval_real(b, p, bindings)?;
            let expo = eval_real(ex, p, bindings)?;
            if base > 0.0 {
                base.powf(expo)
            } else if base == 0.0 {
                if expo > 0.0 {
                    0.0
                } else if expo == 0.0 {
                    1.0
                } else {
                    return Err(ExprError::Domain("zero base with negative exponent".into()));
                }
            } else if expo.fract() == 0.0 && expo.abs() < 9e15 {
                base.powf(expo)
            } else {
                return Err(ExprError::Domain(format!(
                    "fractional power {expo} of negative base {base}"
                )));
            }
        }
        Expr::Fun(Func::Lap, _) => {
            return Err(ExprError::Domain(
                "unresolved lap(.) node; substitute the field first".into(),
            ))
        }
        Expr::Fun(f, args) => {
            let x = if *f == Func::MittagLeffler {
                eval_real(&args[1], p, bindings)?
            } else {
                eval_real(&args[0], p, bindings)?
            };
            match f {
                Func::Sinh => x.sinh(),
                Func::Cosh => x.cosh(),
                Func::Tanh => x.tanh(),
                Func::Exp => x.exp(),
                Func::Ln => {
                    if x > 0.0 {
                        x.ln()
                    } else {
                        return Err(ExprError::Domain(format!("ln of nonpositive value {x}")));
                    }
                }
                Func::Sqrt => {
                    if x >= 0.0 {
                        x.sqrt()
                    } else {
                        return Err(ExprError::Domain(format!("sqrt of negative value {x}")));
                    }
                }
                Func::MittagLeffler => {
                    let beta = eval_real(&args[0], p, bindings)?;
                    specfun::mittag_leffler(beta, x)
                        .map_err(|err| ExprError::Domain(err.to_string()))?
                }
                // The series kernel is entire, so the expression layer
                // accepts any finite argument (temporal profiles compose it
                // with -t); the standalone specfun entry point keeps its
                // nonnegative guard.
                Func::C0 => specfun::c0_series(x),
                Func::Lap => unreachable!("handled above"),
            }
        }
    })
}

fn eval_complex(e: &Expr, p: EvalPoint, bindings: &Bindings) -> Result<Complex64, ExprError> {
    Ok(match e {
        Expr::Const(s) => s.as_complex(),
        Expr::Var(Var::Eta) => Complex64::new(p.eta, 0.0),
        Expr::Var(Var::T) => Complex64::new(p.t, 0.0),
        Expr::Param(name) => bindings
            .get(name)
            .ok_or_else(|| ExprError::UnboundParameter(name.clone()))?
            .as_complex(),
        Expr::Add(ts) => {
            let mut sum = Complex64::new(0.0, 0.0);
            for t in ts {
                sum += eval_complex(t, p, bindings)?;
            }
            sum
        }
        Expr::Mul(fs) => {
            let mut prod = Complex64::new(1.0, 0.0);
            for f in fs {
                prod *= eval_complex(f, p, bindings)?;
            }
            prod
        }
        Expr::Neg(x) => -eval_complex(x, p, bindings)?,
        Expr::Pow(b, ex) => {
            let base = eval_complex(b, p, bindings)?;
            let expo = eval_complex(ex, p, bindings)?;
            if base.re == 0.0 && base.im == 0.0 {
                if expo.im == 0.0 && expo.re > 0.0 {
                    Complex64::new(0.0, 0.0)
                } else if expo.im == 0.0 && expo.re == 0.0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    return Err(ExprError::Domain(
                        "zero base with nonpositive exponent".into(),
                    ));
                }
            } else {
                base.powc(expo)
            }
        }
        Expr::Fun(Func::Lap, _) => {
            return Err(ExprError::Domain(
                "unresolved lap(.) node; substitute the field first".into(),
            ))
        }
        Expr::Fun(f, args) => {
            let z = if *f == Func::MittagLeffler {
                eval_complex(&args[1], p, bindings)?
            } else {
                eval_complex(&args[0], p, bindings)?
            };
            match f {
                Func::Sinh => z.sinh(),
                Func::Cosh => z.cosh(),
                Func::Tanh => z.tanh(),
                Func::Exp => z.exp(),
                Func::Ln => {
                    if z.re == 0.0 && z.im == 0.0 {
                        return Err(ExprError::Domain("ln of zero".into()));
                    }
                    z.ln()
                }
                Func::Sqrt => z.sqrt(),
                Func::MittagLeffler => {
                    let beta = require_real(eval_complex(&args[0], p, bindings)?, "mlf order")?;
                    let x = require_real(z, "mlf")?;
                    Complex64::new(
                        specfun::mittag_leffler(beta, x)
                            .map_err(|err| ExprError::Domain(err.to_string()))?,
                        0.0,
                    )
                }
                Func::C0 => Complex64::new(specfun::c0_series(require_real(z, "c0")?), 0.0),
                Func::Lap => unreachable!("handled above"),
            }
        }
    })
}
