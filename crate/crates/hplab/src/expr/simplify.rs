//! Normalizing simplifier.
//!
//! `simplify` repeatedly applies a bottom-up normalization pass until the
//! tree stops changing (bounded by 64 passes). The normal form is a sum of
//! products: constants folded and hoisted to the front of each product,
//! like terms collected by structural equality, like factors merged by
//! adding real exponents, factors and terms sorted canonically.
//!
//! Domain-sensitive rewrites are deliberately narrow:
//! - `tanh(u)` splits into `sinh(u) cosh(u)^-1` only where it occurs as a
//!   product factor or power base, so `ln(tanh(u))` keeps its shape;
//! - `sinh(a)` doubles down to `2 sinh(a/2) cosh(a/2)` only when another
//!   factor of the same product already has argument `a/2`, which is what
//!   cancels the radial kernels against the metric factor `sinh(eta)`;
//! - products distribute over sums only below a term-count budget.
//!
//! Merged exponents are snapped to the nearest integer when within a few
//! ulps, so chains like `(x^(1/3))^3` return to `x` exactly.

use super::{cmp_expr, Expr, Func, Scalar};

/// Simplifies to the canonical normal form. Value-preserving on the domain
/// where the input evaluates (positive radial arguments).
pub fn simplify(e: &Expr) -> Expr {
    let mut cur = normalize(e);
    for _ in 0..64 {
        let next = normalize(&cur);
        if next == cur {
            break;
        }
        cur = next;
    }
    cur
}

/// Max number of terms a product is allowed to expand into.
const DISTRIBUTE_BUDGET: usize = 64;

fn normalize(e: &Expr) -> Expr {
    match e {
        Expr::Const(_) | Expr::Var(_) | Expr::Param(_) => e.clone(),
        Expr::Neg(x) => {
            let nx = normalize(x);
            normalize_mul(vec![Expr::num(-1.0), nx])
        }
        Expr::Add(ts) => {
            let nts: Vec<Expr> = ts.iter().map(normalize).collect();
            normalize_add(nts)
        }
        Expr::Mul(fs) => {
            let nfs: Vec<Expr> = fs.iter().map(normalize).collect();
            let budget: usize = nfs
                .iter()
                .map(|f| match f {
                    Expr::Add(ts) => ts.len(),
                    _ => 1,
                })
                .product();
            if budget > 1
                && budget <= DISTRIBUTE_BUDGET
                && nfs.iter().any(|f| matches!(f, Expr::Add(_)))
            {
                let mut combos: Vec<Vec<Expr>> = vec![Vec::new()];
                for f in &nfs {
                    let choices: Vec<Expr> = match f {
                        Expr::Add(ts) => ts.clone(),
                        other => vec![other.clone()],
                    };
                    let mut next = Vec::with_capacity(combos.len() * choices.len());
                    for combo in &combos {
                        for c in &choices {
                            let mut ext = combo.clone();
                            ext.push(c.clone());
                            next.push(ext);
                        }
                    }
                    combos = next;
                }
                let terms: Vec<Expr> = combos.into_iter().map(Expr::Mul).collect();
                normalize(&Expr::Add(terms))
            } else {
                normalize_mul(nfs)
            }
        }
        Expr::Pow(b, ex) => {
            let nb = normalize(b);
            let ne = normalize(ex);
            match ne {
                Expr::Const(Scalar::Real(k)) => normalize_pow(nb, k),
                Expr::Const(Scalar::Complex(z)) if z.im == 0.0 => normalize_pow(nb, z.re),
                Expr::Const(Scalar::Complex(z)) => {
                    if let Expr::Const(c) = &nb {
                        Expr::Const(Scalar::Complex(c.as_complex().powc(z)))
                    } else {
                        Expr::Pow(Box::new(nb), Box::new(ne))
                    }
                }
                // Restore the constant-exponent invariant for exponents that
                // did not fold to a constant.
                other => normalize(&Expr::Fun(
                    Func::Exp,
                    vec![Expr::Mul(vec![other, Expr::Fun(Func::Ln, vec![nb])])],
                )),
            }
        }
        Expr::Fun(f, args) => {
            let nargs: Vec<Expr> = args.iter().map(normalize).collect();
            normalize_fun(*f, nargs)
        }
    }
}

fn normalize_fun(f: Func, args: Vec<Expr>) -> Expr {
    match f {
        Func::Sqrt => return normalize_pow(args.into_iter().next().unwrap(), 0.5),
        Func::Ln => {
            let a = &args[0];
            if let Expr::Fun(Func::Exp, inner) = a {
                return inner[0].clone();
            }
            if let Expr::Const(c) = a {
                match c {
                    Scalar::Real(x) if *x > 0.0 => return Expr::num(x.ln()),
                    Scalar::Complex(z) if !(z.re == 0.0 && z.im == 0.0) => {
                        return Expr::Const(Scalar::Complex(z.ln()))
                    }
                    _ => {}
                }
            }
        }
        Func::Exp => {
            let a = &args[0];
            if let Expr::Fun(Func::Ln, inner) = a {
                return inner[0].clone();
            }
            if let Expr::Const(c) = a {
                match c {
                    Scalar::Real(x) => return Expr::num(x.exp()),
                    Scalar::Complex(z) => return Expr::Const(Scalar::Complex(z.exp())),
                }
            }
            // exp(k * ln(x)) is the parser's encoding of x^k with symbolic
            // exponent; once k has become a constant, return to power form.
            if let Expr::Mul(fs) = a {
                if fs.len() == 2 {
                    if let (Expr::Const(Scalar::Real(k)), Expr::Fun(Func::Ln, inner)) =
                        (&fs[0], &fs[1])
                    {
                        return normalize_pow(inner[0].clone(), *k);
                    }
                }
            }
        }
        Func::Sinh => {
            if let Expr::Const(Scalar::Real(x)) = &args[0] {
                return Expr::num(x.sinh());
            }
        }
        Func::Cosh => {
            if let Expr::Const(Scalar::Real(x)) = &args[0] {
                return Expr::num(x.cosh());
            }
        }
        Func::Tanh => {
            if let Expr::Const(Scalar::Real(x)) = &args[0] {
                return Expr::num(x.tanh());
            }
        }
        _ => {}
    }
    Expr::Fun(f, args)
}

/// Powers with a real constant exponent.
fn normalize_pow(base: Expr, k: f64) -> Expr {
    if k == 0.0 {
        return Expr::num(1.0);
    }
    if k == 1.0 {
        return base;
    }
    match base {
        Expr::Const(Scalar::Real(c)) => {
            if c > 0.0 || (c != 0.0 && k.fract() == 0.0) {
                return Expr::num(c.powf(k));
            }
            if c == 0.0 && k > 0.0 {
                return Expr::num(0.0);
            }
            // Out-of-domain fold (negative base, fractional power) stays
            // symbolic so complex evaluation can still resolve it.
            Expr::Pow(Box::new(Expr::num(c)), Box::new(Expr::num(k)))
        }
        Expr::Const(Scalar::Complex(z)) => Expr::Const(Scalar::Complex(z.powf(k))),
        Expr::Pow(inner, expo) => {
            if let Expr::Const(Scalar::Real(k2)) = *expo {
                normalize_pow(*inner, snap(k * k2))
            } else {
                Expr::Pow(Box::new(Expr::Pow(inner, expo)), Box::new(Expr::num(k)))
            }
        }
        // Integer powers distribute over products without branch or sign
        // hazards; fractional powers of a product stay opaque because the
        // factors could be individually negative.
        Expr::Mul(fs) if k.fract() == 0.0 && k.abs() < 64.0 => {
            normalize_mul(fs.into_iter().map(|f| normalize_pow(f, k)).collect())
        }
        Expr::Fun(Func::Tanh, args) => {
            let u = args.into_iter().next().unwrap();
            normalize_mul(vec![
                Expr::powf(Expr::sinh(u.clone()), k),
                Expr::powf(Expr::cosh(u), -k),
            ])
        }
        Expr::Fun(Func::Exp, args) => {
            let x = args.into_iter().next().unwrap();
            normalize(&Expr::Fun(
                Func::Exp,
                vec![Expr::Mul(vec![Expr::num(k), x])],
            ))
        }
        other => Expr::Pow(Box::new(other), Box::new(Expr::num(k))),
    }
}

/// Snaps a merged exponent or coefficient to the nearest integer when the
/// difference is rounding noise.
fn snap(x: f64) -> f64 {
    let r = x.round();
    if x != r && (x - r).abs() <= 1e-12 * x.abs().max(1.0) {
        r
    } else {
        x
    }
}

/// Product normalization over already-normalized factors.
fn normalize_mul(factors: Vec<Expr>) -> Expr {
    let mut coeff = Scalar::Real(1.0);
    let mut entries: Vec<(Expr, f64)> = Vec::new();

    fn push_factor(entries: &mut Vec<(Expr, f64)>, coeff: &mut Scalar, base: Expr, k: f64) {
        if let Expr::Const(c) = &base {
            let folded = match c {
                Scalar::Real(x) if *x > 0.0 || (*x != 0.0 && k.fract() == 0.0) => {
                    Some(Scalar::Real(x.powf(k)))
                }
                Scalar::Real(x) if *x == 0.0 && k > 0.0 => Some(Scalar::Real(0.0)),
                Scalar::Real(_) => None,
                Scalar::Complex(z) => Some(Scalar::Complex(z.powf(k))),
            };
            if let Some(c) = folded {
                *coeff = coeff.mul(c);
                return;
            }
        }
        for (b, e) in entries.iter_mut() {
            if cmp_expr(b, &base) == std::cmp::Ordering::Equal {
                *e = snap(*e + k);
                return;
            }
        }
        entries.push((base, k));
    }

    let mut stack: Vec<Expr> = factors;
    stack.reverse();
    while let Some(f) = stack.pop() {
        match f {
            Expr::Const(c) => coeff = coeff.mul(c),
            Expr::Mul(inner) => {
                for x in inner.into_iter().rev() {
                    stack.push(x);
                }
            }
            Expr::Neg(x) => {
                coeff = coeff.mul(Scalar::Real(-1.0));
                stack.push(*x);
            }
            Expr::Pow(b, ex) => match *ex {
                Expr::Const(Scalar::Real(k)) => push_factor(&mut entries, &mut coeff, *b, k),
                other => push_factor(&mut entries, &mut coeff, Expr::Pow(b, Box::new(other)), 1.0),
            },
            Expr::Fun(Func::Tanh, args) => {
                let u = args.into_iter().next().unwrap();
                push_factor(&mut entries, &mut coeff, Expr::sinh(u.clone()), 1.0);
                push_factor(&mut entries, &mut coeff, Expr::cosh(u), -1.0);
            }
            other => push_factor(&mut entries, &mut coeff, other, 1.0),
        }
    }

    // Half-angle contraction: replace sinh(a)^k by
    // (2 sinh(a/2) cosh(a/2))^k whenever a factor with argument a/2 is
    // already present, then remerge. This is what cancels sinh(eta) against
    // kernels built from eta/2.
    loop {
        let mut fired = false;
        'search: for idx in 0..entries.len() {
            let (a, k) = match &entries[idx] {
                (Expr::Fun(Func::Sinh, args), k) => (args[0].clone(), *k),
                _ => continue,
            };
            let half = normalize(&Expr::Mul(vec![Expr::num(0.5), a]));
            let partner_exists = entries.iter().enumerate().any(|(j, (b, _))| {
                j != idx
                    && matches!(
                        b,
                        Expr::Fun(Func::Sinh, args) | Expr::Fun(Func::Cosh, args)
                            if cmp_expr(&args[0], &half) == std::cmp::Ordering::Equal
                    )
            });
            if partner_exists {
                entries.remove(idx);
                coeff = coeff.mul(Scalar::Real(2f64.powf(k)));
                push_factor(&mut entries, &mut coeff, Expr::sinh(half.clone()), k);
                push_factor(&mut entries, &mut coeff, Expr::cosh(half), k);
                fired = true;
                break 'search;
            }
        }
        if !fired {
            break;
        }
    }

    entries.retain(|(_, k)| *k != 0.0);
    if coeff.is_zero() {
        return Expr::num(0.0);
    }
    entries.sort_by(|(a, _), (b, _)| cmp_expr(a, b));

    let mut items: Vec<Expr> = Vec::with_capacity(entries.len() + 1);
    if !coeff.is_one() {
        items.push(Expr::Const(coeff));
    }
    for (b, k) in entries {
        if k == 1.0 {
            items.push(b);
        } else {
            items.push(Expr::Pow(Box::new(b), Box::new(Expr::num(k))));
        }
    }
    match items.len() {
        0 => Expr::num(1.0),
        1 => items.into_iter().next().unwrap(),
        _ => Expr::Mul(items),
    }
}

/// Sum normalization over already-normalized terms.
fn normalize_add(terms: Vec<Expr>) -> Expr {
    let mut csum = Scalar::Real(0.0);
    // (core, coefficient), insertion-ordered; sorted at rebuild.
    let mut entries: Vec<(Expr, Scalar)> = Vec::new();

    let mut stack: Vec<Expr> = terms;
    stack.reverse();
    while let Some(t) = stack.pop() {
        match t {
            Expr::Add(inner) => {
                for x in inner.into_iter().rev() {
                    stack.push(x);
                }
            }
            Expr::Const(c) => csum = csum.add(c),
            other => {
                let (coeff, core) = split_coefficient(other);
                match entries
                    .iter_mut()
                    .find(|(b, _)| cmp_expr(b, &core) == std::cmp::Ordering::Equal)
                {
                    Some((_, c)) => *c = c.add(coeff),
                    None => entries.push((core, coeff)),
                }
            }
        }
    }

    entries.retain(|(_, c)| !c.is_zero());
    entries.sort_by(|(a, _), (b, _)| cmp_expr(a, b));

    let mut items: Vec<Expr> = Vec::with_capacity(entries.len() + 1);
    if !csum.is_zero() {
        items.push(Expr::Const(csum));
    }
    for (core, coeff) in entries {
        if coeff.is_one() {
            items.push(core);
        } else {
            items.push(normalize_mul(vec![Expr::Const(coeff), core]));
        }
    }
    match items.len() {
        0 => Expr::num(0.0),
        1 => items.into_iter().next().unwrap(),
        _ => Expr::Add(items),
    }
}

/// Splits a normalized non-constant term into (constant coefficient, core).
fn split_coefficient(t: Expr) -> (Scalar, Expr) {
    match t {
        Expr::Mul(fs) => {
            if let Some(Expr::Const(c)) = fs.first() {
                let c = *c;
                let rest: Vec<Expr> = fs.into_iter().skip(1).collect();
                (c, Expr::mul(rest))
            } else {
                (Scalar::Real(1.0), Expr::Mul(fs))
            }
        }
        other => (Scalar::Real(1.0), other),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{
        diff, evaluate, hyperbolic_laplacian, parse, Bindings, EvalMode, EvalPoint, Var,
    };
    use proptest::prelude::*;

    fn simp(src: &str) -> Expr {
        simplify(&parse(src, EvalMode::Real).unwrap())
    }

    #[test]
    fn constant_folding_and_collection() {
        assert_eq!(simp("1 + 2 + 3"), Expr::num(6.0));
        assert_eq!(simp("2*eta - eta - eta"), Expr::num(0.0));
        assert_eq!(simp("eta*eta"), Expr::powf(Expr::eta(), 2.0));
        assert_eq!(simp("eta/eta"), Expr::num(1.0));
        assert_eq!(simp("0*sinh(eta)"), Expr::num(0.0));
        assert_eq!(simp("sinh(eta)^2/sinh(eta)^2"), Expr::num(1.0));
        assert_eq!(simp("exp(ln(eta))"), Expr::eta());
        assert_eq!(simp("ln(exp(t))"), Expr::t());
        assert_eq!(simp("ln(1)"), Expr::num(0.0));
        assert_eq!(simp("sqrt(eta)*sqrt(eta)"), Expr::eta());
    }

    #[test]
    fn fractional_exponent_chains_snap_back() {
        // (x^(1/3))^3 accumulates 3 * (1/3) = 1 + 1 ulp without snapping.
        let e = Expr::powf(Expr::powf(Expr::eta(), 1.0 / 3.0), 3.0);
        assert_eq!(simplify(&e), Expr::eta());
    }

    #[test]
    fn symbolic_exponent_becomes_power_once_constant() {
        // Parsing u^n encodes exp(n ln u); substituting n = 2 must recover
        // the plain square.
        let e = parse("u^n", EvalMode::Real).unwrap();
        let mut map = std::collections::BTreeMap::new();
        map.insert("n".to_string(), Expr::num(2.0));
        let s = simplify(&crate::expr::substitute_params(&e, &map));
        assert_eq!(s, Expr::powf(Expr::param("u"), 2.0));
    }

    #[test]
    fn laplacian_annihilates_log_tanh_half_kernel() {
        // lap(c1 ln tanh(eta/2) + c2) reduces to the literal constant 0.
        let f = parse("c1*ln(tanh(0.5*eta)) + c2", EvalMode::Real).unwrap();
        let lap = hyperbolic_laplacian(&f).unwrap();
        assert_eq!(lap, Expr::num(0.0), "got {lap}");
    }

    #[test]
    fn laplacian_maps_log_sinh_kernel_to_one() {
        let f = parse("ln(sinh(eta))", EvalMode::Real).unwrap();
        let lap = hyperbolic_laplacian(&f).unwrap();
        assert_eq!(lap, Expr::num(1.0), "got {lap}");
    }

    #[test]
    fn laplacian_of_generic_profile_matches_finite_differences() {
        // lap(eta^2) = 2 + 2 eta coth(eta), checked numerically.
        let f = parse("eta^2", EvalMode::Real).unwrap();
        let lap = hyperbolic_laplacian(&f).unwrap();
        let bind = Bindings::new();
        for &eta in &[0.3, 1.0, 2.4, 7.0] {
            let got = evaluate(
                &lap,
                EvalPoint::new(eta, 0.0).unwrap(),
                &bind,
                EvalMode::Real,
            )
            .unwrap()
            .re();
            let want = 2.0 + 2.0 * eta * eta.cosh() / eta.sinh();
            assert!(
                (got - want).abs() <= 1e-11 * want.abs(),
                "lap(eta^2)({eta}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn half_angle_contraction_requires_a_partner() {
        // Without a half-argument partner, sinh stays put.
        let alone = simp("sinh(eta)");
        assert_eq!(alone, Expr::sinh(Expr::eta()));
        // With one, the product contracts and cancels.
        let pair = simp("sinh(eta)/(sinh(0.5*eta)*cosh(0.5*eta))");
        assert_eq!(pair, Expr::num(2.0), "got {pair}");
    }

    #[test]
    fn tanh_splits_only_in_products() {
        let inside_ln = simp("ln(tanh(0.5*eta))");
        assert!(
            matches!(&inside_ln, Expr::Fun(Func::Ln, args)
                if matches!(args[0], Expr::Fun(Func::Tanh, _))),
            "ln(tanh(.)) must keep its shape, got {inside_ln}"
        );
        let product = simp("sinh(eta)*tanh(0.5*eta)");
        // sinh(eta) tanh(eta/2) = 2 sinh(eta/2)^2.
        let want = Expr::Mul(vec![
            Expr::num(2.0),
            Expr::powf(
                Expr::sinh(Expr::Mul(vec![Expr::num(0.5), Expr::eta()])),
                2.0,
            ),
        ]);
        assert_eq!(product, want, "got {product}");
    }

    #[test]
    fn distribution_is_applied_within_budget() {
        let e = simp("(eta + 1)*(eta - 1) - eta^2 + 1");
        assert_eq!(e, Expr::num(0.0), "got {e}");
    }

    #[test]
    fn theorem22_style_laplacian_reduces_to_temporal_factor() {
        // lap(f1 ln sinh(eta) + f2 ln tanh(eta/2) + f3) = f1 for any
        // eta-independent coefficients.
        let u = parse(
            "f1*ln(sinh(eta)) + f2*ln(tanh(0.5*eta)) + f3",
            EvalMode::Real,
        )
        .unwrap();
        let lap = hyperbolic_laplacian(&u).unwrap();
        assert_eq!(lap, Expr::param("f1"), "got {lap}");
    }

    #[test]
    fn simplified_derivative_of_kernel_has_closed_form() {
        // d/deta ln tanh(eta/2) = 1/sinh(eta); after contraction the
        // simplifier leaves (2 sinh cosh of half-angle)^-1 equivalents.
        let d = simplify(&diff(&Expr::log_tanh_half_eta(), Var::Eta).unwrap());
        let bind = Bindings::new();
        for &eta in &[0.2, 1.0, 3.0] {
            let got = evaluate(&d, EvalPoint::new(eta, 0.0).unwrap(), &bind, EvalMode::Real)
                .unwrap()
                .re();
            let want = 1.0 / eta.sinh();
            assert!(
                (got - want).abs() <= 1e-13 * want.abs().max(1.0),
                "{got} vs {want}"
            );
        }
    }

    /// Random expression trees for the value-preservation property.
    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (-3.0f64..3.0).prop_map(Expr::num),
            Just(Expr::eta()),
            Just(Expr::t()),
        ];
        leaf.prop_recursive(4, 24, 3, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(vec![a, b])),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(vec![a, b])),
                inner.clone().prop_map(Expr::neg),
                (inner.clone(), -2i32..3).prop_map(|(a, k)| Expr::powf(a, k as f64)),
                inner.clone().prop_map(Expr::sinh),
                inner.clone().prop_map(Expr::cosh),
                inner.clone().prop_map(Expr::tanh),
                inner.clone().prop_map(Expr::exp),
            ]
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(160))]

        /// Normalization never changes values (where both sides evaluate).
        #[test]
        fn simplify_preserves_values(e in arb_expr(), eta in 0.1f64..4.0, t in -1.0f64..2.0) {
            let s = simplify(&e);
            let p = EvalPoint::new(eta, t).unwrap();
            let bind = Bindings::new();
            let before = evaluate(&e, p, &bind, EvalMode::Real);
            let after = evaluate(&s, p, &bind, EvalMode::Real);
            if let (Ok(x), Ok(y)) = (before, after) {
                let (x, y) = (x.re(), y.re());
                if x.is_finite() && y.is_finite() {
                    let scale = x.abs().max(y.abs()).max(1.0);
                    prop_assert!(
                        (x - y).abs() <= 1e-9 * scale,
                        "{e} -> {s}: {x} vs {y}"
                    );
                }
            }
        }

        /// Simplification is idempotent.
        #[test]
        fn simplify_is_idempotent(e in arb_expr()) {
            let s1 = simplify(&e);
            let s2 = simplify(&s1);
            prop_assert_eq!(&s1, &s2, "not a fixed point: {} vs {}", s1, s2);
        }
    }
}
