//! Symbolic expression engine for radial profiles and temporal factors.
//!
//! Expressions are small immutable trees over two variables (`eta`, `t`),
//! named parameters, and the function set needed by the solution catalog:
//! hyperbolics, `ln`/`exp`/`sqrt`, the Mittag-Leffler function `mlf`, the
//! squared-factorial series `c0`, and (in operator specifications only) the
//! radial hyperbolic Laplacian `lap`.
//!
//! The layer provides parsing, printing, real and complex evaluation,
//! symbolic differentiation, a normalizing simplifier, and the hyperbolic
//! Laplacian `lap f = sinh(eta)^-1 d/deta (sinh(eta) d/deta f)`. The
//! simplifier is strong enough to reduce `lap` of the two radial kernels,
//! `ln tanh(eta/2)` and `ln sinh(eta)`, to the literal constants 0 and 1.

pub mod diff;
pub mod eval;
pub mod parse;
pub mod simplify;

pub use diff::diff;
pub use eval::{evaluate, Bindings, EvalMode, EvalPoint};
pub use parse::{parse, parse_operator};
pub use simplify::simplify;

use num_complex::Complex64;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Errors shared by the expression layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: expected {expected}, found {found}")]
    Syntax {
        offset: usize,
        expected: String,
        found: String,
    },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("function `{name}` at byte {offset} takes {expected} argument(s), got {got}")]
    Arity {
        offset: usize,
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parameter `{0}` is unbound")]
    UnboundParameter(String),
    #[error("no closed-form derivative for {0}")]
    UnsupportedDerivative(String),
}

/// A numeric literal, real or complex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scalar {
    Real(f64),
    Complex(Complex64),
}

impl Scalar {
    pub fn as_complex(self) -> Complex64 {
        match self {
            Scalar::Real(x) => Complex64::new(x, 0.0),
            Scalar::Complex(z) => z,
        }
    }

    /// Real part; the imaginary part is ignored.
    pub fn re(self) -> f64 {
        match self {
            Scalar::Real(x) => x,
            Scalar::Complex(z) => z.re,
        }
    }

    pub fn is_zero(self) -> bool {
        match self {
            Scalar::Real(x) => x == 0.0,
            Scalar::Complex(z) => z.re == 0.0 && z.im == 0.0,
        }
    }

    pub fn is_one(self) -> bool {
        match self {
            Scalar::Real(x) => x == 1.0,
            Scalar::Complex(z) => z.re == 1.0 && z.im == 0.0,
        }
    }

    /// Exact real value, if this scalar carries no imaginary part.
    pub fn as_real(self) -> Option<f64> {
        match self {
            Scalar::Real(x) => Some(x),
            Scalar::Complex(z) if z.im == 0.0 => Some(z.re),
            Scalar::Complex(_) => None,
        }
    }

    fn add(self, other: Scalar) -> Scalar {
        match (self, other) {
            (Scalar::Real(a), Scalar::Real(b)) => Scalar::Real(a + b),
            (a, b) => Scalar::Complex(a.as_complex() + b.as_complex()),
        }
    }

    fn mul(self, other: Scalar) -> Scalar {
        match (self, other) {
            (Scalar::Real(a), Scalar::Real(b)) => Scalar::Real(a * b),
            (a, b) => Scalar::Complex(a.as_complex() * b.as_complex()),
        }
    }
}

/// The two independent variables: radial coordinate and time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Var {
    Eta,
    T,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::Eta => "eta",
            Var::T => "t",
        }
    }
}

/// Function identifiers. `Lap` is only valid inside operator specifications
/// and is resolved away by [`apply_operator`]; evaluating it is an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Func {
    Sinh,
    Cosh,
    Tanh,
    Ln,
    Exp,
    Sqrt,
    MittagLeffler,
    C0,
    Lap,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Ln => "ln",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::MittagLeffler => "mlf",
            Func::C0 => "c0",
            Func::Lap => "lap",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::MittagLeffler => 2,
            _ => 1,
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            "ln" => Func::Ln,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "mlf" => Func::MittagLeffler,
            "c0" => Func::C0,
            "lap" => Func::Lap,
            _ => return None,
        })
    }
}

/// Expression tree. `Add` and `Mul` are n-ary so the simplifier can flatten
/// and reorder; `Pow` keeps a constant exponent by construction (the
/// [`Expr::pow`] constructor rewrites non-constant exponents through
/// `exp(e * ln b)`), though raw trees with other shapes still evaluate.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(Scalar),
    Var(Var),
    Param(String),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Fun(Func, Vec<Expr>),
}

impl Expr {
    pub fn num(x: f64) -> Expr {
        Expr::Const(Scalar::Real(x))
    }

    pub fn complex(re: f64, im: f64) -> Expr {
        Expr::Const(Scalar::Complex(Complex64::new(re, im)))
    }

    pub fn param(name: &str) -> Expr {
        Expr::Param(name.to_owned())
    }

    pub fn eta() -> Expr {
        Expr::Var(Var::Eta)
    }

    pub fn t() -> Expr {
        Expr::Var(Var::T)
    }

    pub fn add(terms: Vec<Expr>) -> Expr {
        match terms.len() {
            0 => Expr::num(0.0),
            1 => terms.into_iter().next().unwrap(),
            _ => Expr::Add(terms),
        }
    }

    pub fn mul(factors: Vec<Expr>) -> Expr {
        match factors.len() {
            0 => Expr::num(1.0),
            1 => factors.into_iter().next().unwrap(),
            _ => Expr::Mul(factors),
        }
    }

    // Constant-folding constructor, not an operator impl.
    #[allow(clippy::should_implement_trait)]
    pub fn neg(e: Expr) -> Expr {
        match e {
            Expr::Const(Scalar::Real(x)) => Expr::num(-x),
            Expr::Const(Scalar::Complex(z)) => Expr::Const(Scalar::Complex(-z)),
            other => Expr::Neg(Box::new(other)),
        }
    }

    // Constant-folding constructor, not an operator impl.
    #[allow(clippy::should_implement_trait)]
    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Add(vec![a, Expr::neg(b)])
    }

    /// Power with the constant-exponent invariant: exponents that involve a
    /// variable or parameter are rewritten through `exp(e * ln b)`. Closed
    /// constant exponents (for example `3^2` in exponent position) keep the
    /// `Pow` node and fold under simplification.
    pub fn pow(base: Expr, expo: Expr) -> Expr {
        if expo.is_closed_constant() {
            Expr::Pow(Box::new(base), Box::new(expo))
        } else {
            Expr::Fun(
                Func::Exp,
                vec![Expr::Mul(vec![expo, Expr::Fun(Func::Ln, vec![base])])],
            )
        }
    }

    pub fn powf(base: Expr, k: f64) -> Expr {
        Expr::Pow(Box::new(base), Box::new(Expr::num(k)))
    }

    // Constant-folding constructor, not an operator impl.
    #[allow(clippy::should_implement_trait)]
    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::Mul(vec![a, Expr::powf(b, -1.0)])
    }

    pub fn fun(f: Func, arg: Expr) -> Expr {
        Expr::Fun(f, vec![arg])
    }

    pub fn sinh(e: Expr) -> Expr {
        Expr::fun(Func::Sinh, e)
    }

    pub fn cosh(e: Expr) -> Expr {
        Expr::fun(Func::Cosh, e)
    }

    pub fn tanh(e: Expr) -> Expr {
        Expr::fun(Func::Tanh, e)
    }

    pub fn ln(e: Expr) -> Expr {
        Expr::fun(Func::Ln, e)
    }

    pub fn exp(e: Expr) -> Expr {
        Expr::fun(Func::Exp, e)
    }

    /// `mlf(beta, arg)`, the Mittag-Leffler function of constant order.
    pub fn mlf(beta: f64, arg: Expr) -> Expr {
        Expr::Fun(Func::MittagLeffler, vec![Expr::num(beta), arg])
    }

    pub fn c0(arg: Expr) -> Expr {
        Expr::fun(Func::C0, arg)
    }

    /// `ln tanh(eta/2)`, the kernel annihilated by the hyperbolic Laplacian.
    pub fn log_tanh_half_eta() -> Expr {
        Expr::ln(Expr::tanh(Expr::Mul(vec![Expr::num(0.5), Expr::eta()])))
    }

    /// `ln sinh(eta)`, the kernel mapped to 1 by the hyperbolic Laplacian.
    pub fn log_sinh_eta() -> Expr {
        Expr::ln(Expr::sinh(Expr::eta()))
    }

    /// True when the expression contains no variables and no parameters.
    pub fn is_closed_constant(&self) -> bool {
        match self {
            Expr::Const(_) => true,
            Expr::Var(_) | Expr::Param(_) => false,
            Expr::Add(xs) | Expr::Mul(xs) | Expr::Fun(_, xs) => {
                xs.iter().all(Expr::is_closed_constant)
            }
            Expr::Pow(b, e) => b.is_closed_constant() && e.is_closed_constant(),
            Expr::Neg(x) => x.is_closed_constant(),
        }
    }

    /// Does the expression mention `v` anywhere?
    pub fn depends_on(&self, v: Var) -> bool {
        match self {
            Expr::Const(_) | Expr::Param(_) => false,
            Expr::Var(w) => *w == v,
            Expr::Add(xs) | Expr::Mul(xs) | Expr::Fun(_, xs) => xs.iter().any(|x| x.depends_on(v)),
            Expr::Pow(b, e) => b.depends_on(v) || e.depends_on(v),
            Expr::Neg(x) => x.depends_on(v),
        }
    }

    /// Collects parameter names into `out` (deduplicated, sorted).
    pub fn collect_params(&self, out: &mut Vec<String>) {
        match self {
            Expr::Param(name) => {
                if !out.iter().any(|p| p == name) {
                    out.push(name.clone());
                }
            }
            Expr::Add(xs) | Expr::Mul(xs) | Expr::Fun(_, xs) => {
                for x in xs {
                    x.collect_params(out);
                }
            }
            Expr::Pow(b, e) => {
                b.collect_params(out);
                e.collect_params(out);
            }
            Expr::Neg(x) => x.collect_params(out),
            _ => {}
        }
        out.sort();
    }
}

/// Replaces every `Param(name)` applied in `map` by its expression.
pub fn substitute_params(e: &Expr, map: &BTreeMap<String, Expr>) -> Expr {
    match e {
        Expr::Param(name) => map.get(name).cloned().unwrap_or_else(|| e.clone()),
        Expr::Const(_) | Expr::Var(_) => e.clone(),
        Expr::Add(xs) => Expr::Add(xs.iter().map(|x| substitute_params(x, map)).collect()),
        Expr::Mul(xs) => Expr::Mul(xs.iter().map(|x| substitute_params(x, map)).collect()),
        Expr::Fun(f, xs) => Expr::Fun(*f, xs.iter().map(|x| substitute_params(x, map)).collect()),
        Expr::Pow(b, ex) => Expr::Pow(
            Box::new(substitute_params(b, map)),
            Box::new(substitute_params(ex, map)),
        ),
        Expr::Neg(x) => Expr::Neg(Box::new(substitute_params(x, map))),
    }
}

/// Radial hyperbolic Laplacian `sinh(eta)^-1 d/deta (sinh(eta) d/deta f)`,
/// simplified at each stage so kernel cancellations happen before the outer
/// derivative is taken.
pub fn hyperbolic_laplacian(e: &Expr) -> Result<Expr, ExprError> {
    let df = simplify(&diff(e, Var::Eta)?);
    let inner = simplify(&Expr::Mul(vec![Expr::sinh(Expr::eta()), df]));
    let outer = diff(&inner, Var::Eta)?;
    Ok(simplify(&Expr::Mul(vec![
        Expr::powf(Expr::sinh(Expr::eta()), -1.0),
        outer,
    ])))
}

/// Resolves an operator specification against a concrete field `u`:
/// `Param("u")` becomes `u` and `lap(g)` becomes the hyperbolic Laplacian
/// of the resolved `g`.
pub fn apply_operator(op: &Expr, u: &Expr) -> Result<Expr, ExprError> {
    Ok(match op {
        Expr::Param(name) if name == "u" => u.clone(),
        Expr::Fun(Func::Lap, args) => hyperbolic_laplacian(&apply_operator(&args[0], u)?)?,
        Expr::Const(_) | Expr::Var(_) | Expr::Param(_) => op.clone(),
        Expr::Add(xs) => Expr::Add(
            xs.iter()
                .map(|x| apply_operator(x, u))
                .collect::<Result<_, _>>()?,
        ),
        Expr::Mul(xs) => Expr::Mul(
            xs.iter()
                .map(|x| apply_operator(x, u))
                .collect::<Result<_, _>>()?,
        ),
        Expr::Fun(f, xs) => Expr::Fun(
            *f,
            xs.iter()
                .map(|x| apply_operator(x, u))
                .collect::<Result<_, _>>()?,
        ),
        Expr::Pow(b, e) => Expr::Pow(
            Box::new(apply_operator(b, u)?),
            Box::new(apply_operator(e, u)?),
        ),
        Expr::Neg(x) => Expr::Neg(Box::new(apply_operator(x, u)?)),
    })
}

/// Total order on expressions used for canonical sorting of sums and
/// products. Groups by node kind, then compares contents.
pub(crate) fn cmp_expr(a: &Expr, b: &Expr) -> std::cmp::Ordering {
    use std::cmp::Ordering;
    fn rank(e: &Expr) -> u8 {
        match e {
            Expr::Const(_) => 0,
            Expr::Var(_) => 1,
            Expr::Param(_) => 2,
            Expr::Fun(..) => 3,
            Expr::Pow(..) => 4,
            Expr::Neg(_) => 5,
            Expr::Mul(_) => 6,
            Expr::Add(_) => 7,
        }
    }
    fn cmp_scalar(a: &Scalar, b: &Scalar) -> Ordering {
        let (ar, ai) = (a.as_complex().re, a.as_complex().im);
        let (br, bi) = (b.as_complex().re, b.as_complex().im);
        ar.total_cmp(&br).then(ai.total_cmp(&bi))
    }
    fn cmp_list(xs: &[Expr], ys: &[Expr]) -> Ordering {
        for (x, y) in xs.iter().zip(ys) {
            let c = cmp_expr(x, y);
            if c != Ordering::Equal {
                return c;
            }
        }
        xs.len().cmp(&ys.len())
    }
    rank(a).cmp(&rank(b)).then_with(|| match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => cmp_scalar(x, y),
        (Expr::Var(x), Expr::Var(y)) => x.cmp(y),
        (Expr::Param(x), Expr::Param(y)) => x.cmp(y),
        (Expr::Fun(f, xs), Expr::Fun(g, ys)) => f.cmp(g).then_with(|| cmp_list(xs, ys)),
        (Expr::Pow(xb, xe), Expr::Pow(yb, ye)) => cmp_expr(xb, yb).then_with(|| cmp_expr(xe, ye)),
        (Expr::Neg(x), Expr::Neg(y)) => cmp_expr(x, y),
        (Expr::Mul(xs), Expr::Mul(ys)) | (Expr::Add(xs), Expr::Add(ys)) => cmp_list(xs, ys),
        _ => Ordering::Equal,
    })
}

fn fmt_f64(x: f64, out: &mut fmt::Formatter<'_>) -> fmt::Result {
    if x == x.trunc() && x.abs() < 1e15 {
        write!(out, "{}", x as i64)
    } else {
        write!(out, "{x}")
    }
}

/// Operator precedence levels for printing: additive 1, multiplicative 2,
/// unary minus 3, power 4, atoms 5.
fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Add(_) => 1,
        Expr::Mul(_) => 2,
        Expr::Neg(_) => 3,
        Expr::Const(Scalar::Real(x)) if *x < 0.0 => 3,
        Expr::Pow(..) => 4,
        _ => 5,
    }
}

fn fmt_prec(e: &Expr, ctx: u8, out: &mut fmt::Formatter<'_>) -> fmt::Result {
    let own = precedence(e);
    if own < ctx {
        write!(out, "(")?;
        fmt_node(e, out)?;
        write!(out, ")")
    } else {
        fmt_node(e, out)
    }
}

fn fmt_node(e: &Expr, out: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e {
        Expr::Const(Scalar::Real(x)) => fmt_f64(*x, out),
        Expr::Const(Scalar::Complex(z)) => {
            if z.im == 0.0 {
                fmt_f64(z.re, out)
            } else {
                write!(out, "(")?;
                fmt_f64(z.re, out)?;
                write!(out, " + ")?;
                fmt_f64(z.im, out)?;
                write!(out, "*i)")
            }
        }
        Expr::Var(v) => write!(out, "{}", v.name()),
        Expr::Param(name) => write!(out, "{name}"),
        Expr::Add(ts) => {
            for (k, term) in ts.iter().enumerate() {
                if k == 0 {
                    fmt_prec(term, 1, out)?;
                    continue;
                }
                // Render additive inverses with a binary minus.
                match term {
                    Expr::Neg(inner) => {
                        write!(out, " - ")?;
                        fmt_prec(inner, 2, out)?;
                    }
                    Expr::Const(Scalar::Real(x)) if *x < 0.0 => {
                        write!(out, " - ")?;
                        fmt_f64(-x, out)?;
                    }
                    Expr::Mul(fs) if matches!(fs.first(), Some(Expr::Const(Scalar::Real(c))) if *c < 0.0) =>
                    {
                        write!(out, " - ")?;
                        let mut rest = fs.clone();
                        if let Some(Expr::Const(Scalar::Real(c))) = rest.first_mut() {
                            *c = -*c;
                        }
                        let flipped = if rest.len() == 1
                            && matches!(rest[0], Expr::Const(Scalar::Real(x)) if x == 1.0)
                        {
                            Expr::num(1.0)
                        } else if matches!(rest.first(), Some(Expr::Const(Scalar::Real(c))) if *c == 1.0)
                        {
                            Expr::Mul(rest[1..].to_vec())
                        } else {
                            Expr::Mul(rest)
                        };
                        fmt_prec(&flipped, 2, out)?;
                    }
                    _ => {
                        write!(out, " + ")?;
                        fmt_prec(term, 2, out)?;
                    }
                }
            }
            Ok(())
        }
        Expr::Mul(fs) => {
            for (k, f) in fs.iter().enumerate() {
                if k > 0 {
                    write!(out, "*")?;
                }
                fmt_prec(f, 3, out)?;
            }
            Ok(())
        }
        Expr::Neg(x) => {
            write!(out, "-")?;
            fmt_prec(x, 4, out)
        }
        Expr::Pow(b, ex) => {
            if matches!(**ex, Expr::Const(Scalar::Real(x)) if x == 0.5) {
                write!(out, "sqrt(")?;
                fmt_node(b, out)?;
                return write!(out, ")");
            }
            fmt_prec(b, 5, out)?;
            write!(out, "^")?;
            // Exponents parse as a unary expression: bare constants
            // (including negative ones) are fine, anything else gets parens.
            match &**ex {
                Expr::Const(Scalar::Real(_)) | Expr::Var(_) | Expr::Param(_) => fmt_node(ex, out),
                other => {
                    write!(out, "(")?;
                    fmt_node(other, out)?;
                    write!(out, ")")
                }
            }
        }
        Expr::Fun(f, args) => {
            write!(out, "{}(", f.name())?;
            for (k, a) in args.iter().enumerate() {
                if k > 0 {
                    write!(out, ", ")?;
                }
                fmt_node(a, out)?;
            }
            write!(out, ")")
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_node(self, out)
    }
}
