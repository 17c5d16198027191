//! Time operators: symbolic action on temporal profiles and the discrete
//! schemes used by the solver.
//!
//! Four operators act on the temporal factor of separable solutions:
//! - `Classical`: `d/dt`
//! - `Caputo { beta }`: the Caputo fractional derivative of order
//!   `beta` in `(0, 1]`
//! - `Laguerre`: `d/dt (t d/dt .)`
//! - `ShiftedClassical { lambda }`: `d/dt - lambda`, with complex shift
//!   (oscillatory forcing uses `lambda = i omega / alpha`)
//!
//! The Caputo action is a closed-form table. It knows exactly the profiles
//! the catalog produces: constants, integer-or-higher powers `t^k` with
//! `k >= 1` (`Gamma(k+1)/Gamma(k+1-beta) t^(k-beta)`), and the eigenprofile
//! `mlf(beta, -t^beta)` (eigenvalue -1), extended linearly. Anything else is
//! an `UnsupportedCaputoForm` error rather than a silent wrong answer; in
//! particular `exp(a t)` is not Caputo-diagonal and is deliberately absent.
//!
//! The Laguerre action likewise uses an eigenprofile table for `c0(t)`
//! (eigenvalue +1) and `c0(-t)` (eigenvalue -1) before falling back to the
//! literal composition `d/dt (t d/dt f)` for differentiable profiles.

use crate::expr::{diff, simplify, Expr, ExprError, Func, Scalar, Var};
use num_complex::Complex64;
use statrs::function::gamma::gamma;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TimeOpError {
    #[error("fractional order beta = {0} outside (0, 1]")]
    InvalidOrder(f64),
    #[error("shift denominator alpha must be nonzero and finite, got {0}")]
    InvalidShift(f64),
    #[error("no closed-form Caputo action for `{0}`")]
    UnsupportedCaputoForm(String),
    #[error("no closed-form Laguerre action for `{0}`")]
    UnsupportedLaguerreForm(String),
    #[error("Laguerre step state grew past the overflow guard: |w|/t = {0:.3e}")]
    Overflow(f64),
    #[error("step size must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// A time operator `O_t` acting on temporal profiles `f(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeOperator {
    Classical,
    Caputo { beta: f64 },
    Laguerre,
    ShiftedClassical { lambda: Complex64 },
}

impl TimeOperator {
    /// Caputo operator of order `beta` in `(0, 1]`. At `beta = 1` every
    /// discrete and symbolic action here degenerates to the classical
    /// derivative.
    pub fn caputo(beta: f64) -> Result<TimeOperator, TimeOpError> {
        if !beta.is_finite() || beta <= 0.0 || beta > 1.0 {
            return Err(TimeOpError::InvalidOrder(beta));
        }
        Ok(TimeOperator::Caputo { beta })
    }

    /// `d/dt - i omega / alpha`, the shift produced by oscillatory forcing.
    pub fn shifted(omega: f64, alpha: f64) -> Result<TimeOperator, TimeOpError> {
        if !alpha.is_finite() || alpha == 0.0 {
            return Err(TimeOpError::InvalidShift(alpha));
        }
        Ok(TimeOperator::ShiftedClassical {
            lambda: Complex64::new(0.0, omega / alpha),
        })
    }

    /// Short name for reports.
    pub fn name(&self) -> String {
        match self {
            TimeOperator::Classical => "classical".into(),
            TimeOperator::Caputo { beta } => format!("caputo(beta={beta})"),
            TimeOperator::Laguerre => "laguerre".into(),
            TimeOperator::ShiftedClassical { lambda } => {
                format!("shifted(lambda={}+{}i)", lambda.re, lambda.im)
            }
        }
    }

    /// Symbolic action `O_t f` on a temporal profile, simplified.
    pub fn apply_symbolic(&self, f: &Expr) -> Result<Expr, TimeOpError> {
        match self {
            TimeOperator::Classical => Ok(simplify(&diff(f, Var::T)?)),
            TimeOperator::ShiftedClassical { lambda } => {
                let shifted = Expr::sub(
                    diff(f, Var::T)?,
                    Expr::Mul(vec![Expr::Const(Scalar::Complex(*lambda)), f.clone()]),
                );
                Ok(simplify(&shifted))
            }
            TimeOperator::Laguerre => laguerre_symbolic(f),
            TimeOperator::Caputo { beta } => {
                let nf = simplify(f);
                match caputo_table(&nf, *beta) {
                    Some(result) => Ok(simplify(&result)),
                    None => Err(TimeOpError::UnsupportedCaputoForm(nf.to_string())),
                }
            }
        }
    }
}

/// Laguerre action: eigenprofile table, then the literal composition.
fn laguerre_symbolic(f: &Expr) -> Result<Expr, TimeOpError> {
    let nf = simplify(f);
    if let Some(result) = laguerre_table(&nf) {
        return Ok(simplify(&result));
    }
    let inner = diff(&nf, Var::T).map_err(|e| match e {
        ExprError::UnsupportedDerivative(_) => TimeOpError::UnsupportedLaguerreForm(nf.to_string()),
        other => TimeOpError::Expr(other),
    })?;
    let outer =
        diff(&simplify(&Expr::Mul(vec![Expr::t(), inner])), Var::T).map_err(|e| match e {
            ExprError::UnsupportedDerivative(_) => {
                TimeOpError::UnsupportedLaguerreForm(nf.to_string())
            }
            other => TimeOpError::Expr(other),
        })?;
    Ok(simplify(&outer))
}

/// Eigenprofile table for the Laguerre operator, linear over sums and
/// constant multiples: `c0(t) -> c0(t)`, `c0(-t) -> -c0(-t)`.
fn laguerre_table(e: &Expr) -> Option<Expr> {
    if !e.depends_on(Var::T) {
        return Some(Expr::num(0.0));
    }
    match e {
        Expr::Add(ts) => {
            let parts: Option<Vec<Expr>> = ts.iter().map(laguerre_table).collect();
            Some(Expr::Add(parts?))
        }
        Expr::Mul(fs) => {
            // Time-constant coefficient times a table profile.
            let (consts, rest): (Vec<&Expr>, Vec<&Expr>) =
                fs.iter().partition(|f| !f.depends_on(Var::T));
            if rest.len() != 1 {
                return None;
            }
            let inner = laguerre_table(rest[0])?;
            let mut factors: Vec<Expr> = consts.into_iter().cloned().collect();
            factors.push(inner);
            Some(Expr::Mul(factors))
        }
        Expr::Fun(Func::C0, args) => {
            let arg = simplify(&args[0]);
            if arg == Expr::t() {
                Some(e.clone())
            } else if arg == simplify(&Expr::neg(Expr::t())) {
                Some(Expr::Mul(vec![Expr::num(-1.0), e.clone()]))
            } else {
                None
            }
        }
        _ => None,
    }
}

/// Closed-form Caputo table. Returns `None` for profiles outside it.
fn caputo_table(e: &Expr, beta: f64) -> Option<Expr> {
    if !e.depends_on(Var::T) {
        return Some(Expr::num(0.0));
    }
    match e {
        Expr::Add(ts) => {
            let parts: Option<Vec<Expr>> = ts.iter().map(|t| caputo_table(t, beta)).collect();
            Some(Expr::Add(parts?))
        }
        Expr::Mul(fs) => {
            let (consts, rest): (Vec<&Expr>, Vec<&Expr>) =
                fs.iter().partition(|f| !f.depends_on(Var::T));
            if rest.len() != 1 {
                return None;
            }
            let inner = caputo_table(rest[0], beta)?;
            let mut factors: Vec<Expr> = consts.into_iter().cloned().collect();
            factors.push(inner);
            Some(Expr::Mul(factors))
        }
        Expr::Var(Var::T) => Some(power_rule(1.0, beta)),
        Expr::Pow(b, ex) => match (&**b, &**ex) {
            (Expr::Var(Var::T), Expr::Const(Scalar::Real(k))) if *k >= 1.0 => {
                Some(power_rule(*k, beta))
            }
            _ => None,
        },
        Expr::Fun(Func::MittagLeffler, args) => {
            let order = match &args[0] {
                Expr::Const(Scalar::Real(b)) => *b,
                _ => return None,
            };
            if order != beta {
                return None;
            }
            // Eigenprofile: argument must be exactly -t^beta.
            let want = simplify(&Expr::neg(Expr::powf(Expr::t(), beta)));
            if simplify(&args[1]) == want {
                Some(Expr::Mul(vec![Expr::num(-1.0), e.clone()]))
            } else {
                None
            }
        }
        _ => None,
    }
}

/// Caputo power rule `t^k -> Gamma(k+1)/Gamma(k+1-beta) t^(k-beta)` for
/// `k >= 1`. At `beta = 1` this is the classical `k t^(k-1)`.
fn power_rule(k: f64, beta: f64) -> Expr {
    let coeff = gamma(k + 1.0) / gamma(k + 1.0 - beta);
    Expr::Mul(vec![Expr::num(coeff), Expr::powf(Expr::t(), k - beta)])
}

/// L1 quadrature weights `b_j = (j+1)^(1-beta) - j^(1-beta)` for the
/// discrete Caputo operator. `b_0 = 1` always; at `beta = 1` every later
/// weight vanishes and the scheme collapses to backward differences.
pub fn caputo_l1_weights(beta: f64, n: usize) -> Result<Vec<f64>, TimeOpError> {
    if !beta.is_finite() || beta <= 0.0 || beta > 1.0 {
        return Err(TimeOpError::InvalidOrder(beta));
    }
    let p = 1.0 - beta;
    let mut w = Vec::with_capacity(n);
    for j in 0..n {
        if j == 0 {
            w.push(1.0);
        } else {
            w.push(((j + 1) as f64).powf(p) - (j as f64).powf(p));
        }
    }
    Ok(w)
}

/// Rolling state history for the discrete (L1) Caputo derivative of a
/// nodal field. The operator at step `n+1` splits into an implicit part
/// `mu (v - u^n)` and an explicit memory term over the stored levels.
#[derive(Debug, Clone)]
pub struct CaputoHistory {
    beta: f64,
    dt: f64,
    states: Vec<Vec<f64>>,
}

impl CaputoHistory {
    pub fn new(beta: f64, dt: f64, u0: Vec<f64>) -> Result<CaputoHistory, TimeOpError> {
        if !beta.is_finite() || beta <= 0.0 || beta > 1.0 {
            return Err(TimeOpError::InvalidOrder(beta));
        }
        if !dt.is_finite() || dt <= 0.0 {
            return Err(TimeOpError::InvalidStep(dt));
        }
        Ok(CaputoHistory {
            beta,
            dt,
            states: vec![u0],
        })
    }

    pub fn push(&mut self, state: Vec<f64>) {
        self.states.push(state);
    }

    /// Number of stored levels (initial state included).
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn latest(&self) -> &[f64] {
        self.states
            .last()
            .expect("history holds at least the initial state")
    }

    /// Scale factor `mu = dt^-beta / Gamma(2 - beta)` multiplying the L1 sum.
    pub fn mu(&self) -> f64 {
        self.dt.powf(-self.beta) / gamma(2.0 - self.beta)
    }

    /// Explicit memory term: `sum_{j>=1} b_j (u^(n+1-j) - u^(n-j))` per
    /// node, where `u^n` is the newest stored level. Costs O(levels) per
    /// node, which is what makes long fractional runs quadratic overall.
    pub fn memory_term(&self) -> Vec<f64> {
        let n = self.states.len() - 1;
        let nodes = self.states[0].len();
        let mut h = vec![0.0; nodes];
        if n == 0 {
            return h;
        }
        let w = caputo_l1_weights(self.beta, n + 1).expect("order validated at construction");
        // b_1 pairs with the newest difference, so the level windows run
        // in reverse.
        for (&bj, pair) in w[1..=n].iter().zip(self.states.windows(2).rev()) {
            if bj == 0.0 {
                continue;
            }
            let (older, newer) = (&pair[0], &pair[1]);
            for i in 0..nodes {
                h[i] += bj * (newer[i] - older[i]);
            }
        }
        h
    }

    /// Full discrete Caputo value for a candidate next level `v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mu = self.mu();
        let latest = self.latest();
        let mem = self.memory_term();
        v.iter()
            .zip(latest)
            .zip(&mem)
            .map(|((vi, ui), mi)| mu * ((vi - ui) + mi))
            .collect()
    }
}

/// Nodal state for Laguerre-operator marching: the field `u` and the
/// auxiliary flux `w = t u'`.
#[derive(Debug, Clone)]
pub struct LaguerreState {
    pub t: f64,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
}

impl LaguerreState {
    /// Regularized start at `t = dt`: `d/dt (t d/dt u) = r` near `t = 0`
    /// gives `u' -> r(0)` and `w -> r(0) t`, so the first level is taken as
    /// `u(dt) = u0 + r dt`, `w(dt) = r dt`.
    pub fn initial(u0: Vec<f64>, rhs0: &[f64], dt: f64) -> Result<LaguerreState, TimeOpError> {
        if !dt.is_finite() || dt <= 0.0 {
            return Err(TimeOpError::InvalidStep(dt));
        }
        let u = u0.iter().zip(rhs0).map(|(u, r)| u + r * dt).collect();
        let w = rhs0.iter().map(|r| r * dt).collect();
        Ok(LaguerreState { t: dt, u, w })
    }

    /// One step of the frozen-source exact integrator for
    /// `d/dt (t d/dt u) = r`: with `r` held at its start-of-step value,
    /// `w(s) = w + r (s - t)` integrates `u' = w(s)/s` exactly to
    /// `u_next = u + (w - r t) ln((t + dt)/t) + r dt`.
    pub fn step(&self, rhs: &[f64], dt: f64) -> Result<LaguerreState, TimeOpError> {
        if !dt.is_finite() || dt <= 0.0 {
            return Err(TimeOpError::InvalidStep(dt));
        }
        let grow = (self.t + dt) / self.t;
        let log_grow = grow.ln();
        let mut u = Vec::with_capacity(self.u.len());
        let mut w = Vec::with_capacity(self.w.len());
        for ((&ui, &wi), &ri) in self.u.iter().zip(&self.w).zip(rhs) {
            let slope = wi / self.t;
            if slope.abs() > 1e12 {
                return Err(TimeOpError::Overflow(slope.abs()));
            }
            u.push(ui + (wi - ri * self.t) * log_grow + ri * dt);
            w.push(wi + ri * dt);
        }
        Ok(LaguerreState {
            t: self.t + dt,
            u,
            w,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{evaluate, parse, Bindings, EvalMode, EvalPoint};
    use crate::specfun;

    fn real_at(e: &Expr, t: f64) -> f64 {
        evaluate(
            e,
            EvalPoint::new(1.0, t).unwrap(),
            &Bindings::new(),
            EvalMode::Real,
        )
        .unwrap()
        .re()
    }

    #[test]
    fn classical_derivative_of_decay_profile() {
        let f = parse("exp(-t)", EvalMode::Real).unwrap();
        let got = TimeOperator::Classical.apply_symbolic(&f).unwrap();
        let want = simplify(&parse("-exp(-t)", EvalMode::Real).unwrap());
        assert_eq!(got, want, "got {got}");
    }

    #[test]
    fn caputo_of_constant_is_literal_zero() {
        let op = TimeOperator::caputo(0.5).unwrap();
        let f = parse("3", EvalMode::Real).unwrap();
        assert_eq!(op.apply_symbolic(&f).unwrap(), Expr::num(0.0));
        let f = parse("c2", EvalMode::Real).unwrap();
        assert_eq!(op.apply_symbolic(&f).unwrap(), Expr::num(0.0));
    }

    #[test]
    fn caputo_power_rule_matches_gamma_ratio() {
        let op = TimeOperator::caputo(0.5).unwrap();
        let f = parse("t^2", EvalMode::Real).unwrap();
        let got = op.apply_symbolic(&f).unwrap();
        for &t in &[0.3f64, 1.0, 2.5] {
            let want = gamma(3.0) / gamma(2.5) * t.powf(1.5);
            assert!(
                (real_at(&got, t) - want).abs() <= 1e-14 * want,
                "t={t}: {} vs {want}",
                real_at(&got, t)
            );
        }
    }

    #[test]
    fn caputo_eigenprofile_flips_sign() {
        let op = TimeOperator::caputo(0.5).unwrap();
        let f = parse("mlf(0.5, -t^0.5)", EvalMode::Real).unwrap();
        let got = op.apply_symbolic(&f).unwrap();
        let want = simplify(&parse("-mlf(0.5, -t^0.5)", EvalMode::Real).unwrap());
        assert_eq!(got, want, "got {got}");
        // Linearity over constant multiples and sums.
        let f = parse("2*mlf(0.5, -t^0.5) + 1", EvalMode::Real).unwrap();
        let got = op.apply_symbolic(&f).unwrap();
        let want = simplify(&parse("-2*mlf(0.5, -t^0.5)", EvalMode::Real).unwrap());
        assert_eq!(got, want, "got {got}");
    }

    #[test]
    fn caputo_rejects_foreign_profiles() {
        let op = TimeOperator::caputo(0.5).unwrap();
        for src in [
            "exp(-t)",
            "mlf(0.6, -t^0.6)",
            "mlf(0.5, -t)",
            "t^0.25",
            "sinh(t)",
        ] {
            let f = parse(src, EvalMode::Real).unwrap();
            let r = op.apply_symbolic(&f);
            assert!(
                matches!(r, Err(TimeOpError::UnsupportedCaputoForm(_))),
                "{src} should be unsupported, got {r:?}"
            );
        }
    }

    #[test]
    fn shifted_operator_annihilates_oscillatory_profile() {
        // (d/dt - i omega/alpha) exp(i omega t / alpha) = 0.
        let op = TimeOperator::shifted(2.0, 1.0).unwrap();
        let f = parse("exp(2*i*t)", EvalMode::Complex).unwrap();
        let got = op.apply_symbolic(&f).unwrap();
        assert_eq!(got, Expr::num(0.0), "got {got}");
    }

    #[test]
    fn laguerre_eigenprofiles_have_unit_eigenvalues() {
        let plus = parse("c0(t)", EvalMode::Real).unwrap();
        let got = TimeOperator::Laguerre.apply_symbolic(&plus).unwrap();
        assert_eq!(got, simplify(&plus), "c0(t) eigenvalue +1, got {got}");

        let minus = parse("c0(-t)", EvalMode::Real).unwrap();
        let got = TimeOperator::Laguerre.apply_symbolic(&minus).unwrap();
        let want = simplify(&parse("-c0(-t)", EvalMode::Real).unwrap());
        assert_eq!(got, want, "c0(-t) eigenvalue -1, got {got}");
    }

    #[test]
    fn laguerre_eigen_identity_against_termwise_series() {
        // Independent oracle: applying d/dt (t d/dt .) to the series
        // sum t^k/(k!)^2 term by term gives sum k^2 t^(k-1)/(k!)^2, which
        // re-indexes to the series itself.
        for &t in &[0.3f64, 1.0, 2.0] {
            let mut termwise = 0.0;
            let mut fact2 = 1.0;
            for k in 1..60u32 {
                fact2 *= f64::from(k * k);
                termwise += f64::from(k * k) * t.powi(k as i32 - 1) / fact2;
            }
            let direct = specfun::c0(t).unwrap();
            assert!(
                (termwise - direct).abs() <= 1e-12 * direct,
                "t={t}: termwise {termwise} vs c0 {direct}"
            );
        }
    }

    #[test]
    fn laguerre_generic_profile_falls_back_to_composition() {
        // d/dt (t d/dt t^2) = d/dt (2 t^2) = 4 t.
        let f = parse("t^2", EvalMode::Real).unwrap();
        let got = TimeOperator::Laguerre.apply_symbolic(&f).unwrap();
        let want = simplify(&parse("4*t", EvalMode::Real).unwrap());
        assert_eq!(got, want, "got {got}");
        // Composite c0 arguments have no closed form here.
        let f = parse("c0(2*t)", EvalMode::Real).unwrap();
        assert!(matches!(
            TimeOperator::Laguerre.apply_symbolic(&f),
            Err(TimeOpError::UnsupportedLaguerreForm(_))
        ));
    }

    #[test]
    fn l1_weights_closed_forms() {
        let w = caputo_l1_weights(0.5, 4).unwrap();
        assert_eq!(w[0], 1.0);
        assert!((w[1] - (2f64.powf(0.5) - 1.0)).abs() < 1e-15);
        assert!((w[2] - (3f64.powf(0.5) - 2f64.powf(0.5))).abs() < 1e-15);
        // Telescoping: partial sums collapse to n^(1-beta).
        let w = caputo_l1_weights(0.3, 50).unwrap();
        let sum: f64 = w.iter().sum();
        assert!(
            (sum - 50f64.powf(0.7)).abs() < 1e-12,
            "telescoped sum {sum}"
        );
        // Monotone decreasing positive weights.
        assert!(w.windows(2).all(|p| p[0] >= p[1] && p[1] > 0.0));
    }

    #[test]
    fn l1_weights_collapse_at_beta_one() {
        let w = caputo_l1_weights(1.0, 6).unwrap();
        assert_eq!(w[0], 1.0);
        assert!(w[1..].iter().all(|&x| x == 0.0), "{w:?}");
        assert!(caputo_l1_weights(0.0, 3).is_err());
        assert!(caputo_l1_weights(1.5, 3).is_err());
    }

    #[test]
    fn discrete_caputo_tracks_power_rule() {
        // u(t) = t^2, exact Caputo = Gamma(3)/Gamma(2.5) t^1.5 at beta = 0.5.
        let beta = 0.5;
        let exact = |t: f64| gamma(3.0) / gamma(2.5) * t.powf(1.5);
        let mut errs = Vec::new();
        for &dt in &[1e-2f64, 5e-3, 2.5e-3, 1.25e-3] {
            let steps = (1.0 / dt).round() as usize;
            let mut hist = CaputoHistory::new(beta, dt, vec![0.0]).unwrap();
            for s in 1..steps {
                hist.push(vec![(s as f64 * dt).powi(2)]);
            }
            let v = vec![1.0];
            let got = hist.apply(&v)[0];
            errs.push((got - exact(1.0)).abs());
        }
        assert!(errs[3] <= 1e-3, "finest error {:.3e}", errs[3]);
        // Observed order should be near 2 - beta = 1.5.
        let order = (errs[0] / errs[3]).log2() / 3.0;
        assert!(order >= 1.3, "L1 order {order:.2} from errors {errs:?}");
    }

    #[test]
    fn discrete_caputo_at_beta_one_is_backward_difference() {
        let dt = 1e-3;
        let mut hist = CaputoHistory::new(1.0, dt, vec![5.0]).unwrap();
        hist.push(vec![5.5]);
        let got = hist.apply(&[6.2])[0];
        assert!((got - (6.2 - 5.5) / dt).abs() < 1e-10, "got {got}");
    }

    #[test]
    fn laguerre_march_tracks_growing_eigenprofile() {
        // d/dt (t d/dt u) = u with u(0) = 1 has solution c0(t).
        let dt = 1e-4;
        let mut state = LaguerreState::initial(vec![1.0], &[1.0], dt).unwrap();
        while state.t < 1.0 - 0.5 * dt {
            let rhs: Vec<f64> = state.u.clone();
            state = state.step(&rhs, dt).unwrap();
        }
        let want = specfun::c0(1.0).unwrap();
        assert!(
            (state.u[0] - want).abs() <= 1e-4,
            "u(1) = {} vs c0(1) = {want}",
            state.u[0]
        );
    }

    #[test]
    fn laguerre_march_tracks_decaying_eigenprofile() {
        // d/dt (t d/dt u) = -u with u(0) = 1 has solution c0(-t).
        let dt = 1e-4;
        let mut state = LaguerreState::initial(vec![1.0], &[-1.0], dt).unwrap();
        while state.t < 1.0 - 0.5 * dt {
            let rhs: Vec<f64> = state.u.iter().map(|x| -x).collect();
            state = state.step(&rhs, dt).unwrap();
        }
        let want = specfun::c0_series(-1.0);
        assert!(
            (state.u[0] - want).abs() <= 1e-4,
            "u(1) = {} vs c0(-1) = {want}",
            state.u[0]
        );
    }

    #[test]
    fn laguerre_step_guards_against_blowup() {
        let state = LaguerreState {
            t: 1e-14,
            u: vec![1.0],
            w: vec![1.0],
        };
        assert!(matches!(
            state.step(&[0.0], 1e-3),
            Err(TimeOpError::Overflow(_))
        ));
    }
}
