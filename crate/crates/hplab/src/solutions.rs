//! Catalog of exact solution families for the radial evolution equations,
//! stored as sums of separated (temporal, spatial) factor pairs together
//! with the governing operator and the region where the domain guards hold.
//!
//! Two structural shapes appear:
//! - a power-root family `u = f(t) * (c1 ln tanh(eta/2) + c2)^(1/n)` whose
//!   spatial base lies in the kernel of the radial Laplacian, with the
//!   temporal profile chosen per time operator (`exp(-t)`, `mlf(beta, -t^beta)`,
//!   `c0(-t)`, or `exp(i omega t / alpha)`);
//! - a logarithmic-sum family `u = f1(t) ln sinh(eta) + f2(t) ln tanh(eta/2)
//!   + f3(t)` for the quasilinear equation `u_t = u lap(u)`, with the
//!   closed-form blow-up coefficients `f_i = const / (t0 - t)`.
//!
//! Families are admitted to [`catalog`] only if their symbolic residual
//! stays at or below 1e-9 on a 40x40 sample of the validity region.

use crate::expr::{
    apply_operator, evaluate, parse_operator, simplify, substitute_params, Bindings, EvalMode,
    EvalPoint, Expr, ExprError, Scalar, Var,
};
use crate::timeops::{TimeOpError, TimeOperator};
use crate::util::linspace;
use serde_json::json;
use std::cmp::Ordering;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolutionError {
    #[error("exponent n must be a finite real > 1, got {0}")]
    InvalidExponent(f64),
    #[error("blow-up time t0 must be positive and finite, got {0}")]
    InvalidBlowupTime(f64),
    #[error(
        "empty validity region: c1 = {c1}, c2 = {c2} leave no eta with c1*ln(tanh(eta/2)) + c2 > 0"
    )]
    EmptyValidity { c1: f64, c2: f64 },
    #[error("operator text binds parameter `{0}` with no supplied value")]
    UnboundOperatorParam(String),
    #[error("term {index}: temporal factors may depend only on t, spatial factors only on eta")]
    MixedTerm { index: usize },
    #[error("temporal coefficient f{index} violates its governing identity: max deviation {max_err:.3e}")]
    TemporalConditionViolated { index: usize, max_err: f64 },
    #[error("family `{0}` has no parametric rebuild")]
    NotRebuildable(String),
    #[error("missing parameter `{0}`")]
    MissingParam(String),
    #[error("family `{family}` failed catalog admission: {detail}")]
    AdmissionFailed { family: String, detail: String },
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    TimeOp(#[from] TimeOpError),
}

/// Open eta-interval and time horizon on which a family's domain guards hold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Validity {
    pub eta_lo: f64,
    pub eta_hi: f64,
    /// Blow-up horizon: the family is defined for t in [0, t_end).
    /// `None` means every t >= 0 is admissible.
    pub t_end: Option<f64>,
}

impl Validity {
    pub fn eta_is_empty(&self) -> bool {
        // NaN bounds count as empty, hence not a plain `>=`.
        self.eta_lo.partial_cmp(&self.eta_hi) != Some(Ordering::Less)
    }

    pub fn contains(&self, eta: f64, t: f64) -> bool {
        self.eta_lo < eta && eta < self.eta_hi && t >= 0.0 && self.t_end.is_none_or(|t0| t < t0)
    }
}

/// Structural shape of a family; used to rebuild it under perturbed
/// parameters for negative-control residuals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    /// `u = f(t) * (c1 ln tanh(eta/2) + c2)^(1/n)`.
    SeparableRoot,
    /// Same shape with the growing `c0(t)` profile; excluded from the
    /// catalog (see [`family_theorem21_laguerre_growth`]).
    SeparableRootGrowth,
    /// `u = f1 ln sinh(eta) + f2 ln tanh(eta/2) + f3` with the closed-form
    /// blow-up coefficients.
    LogSum,
    /// LogSum with caller-supplied temporal coefficients.
    LogSumCustom,
}

/// Governing equation: a time operator on the left and a spatial operator
/// text F[u] (tokens `u` and `lap(.)`) on the right.
#[derive(Debug, Clone)]
pub struct OperatorSpec {
    pub time: TimeOperator,
    pub spatial_src: String,
    pub mode: EvalMode,
    spatial: Expr,
}

impl OperatorSpec {
    /// Parses the spatial operator text and resolves every parameter except
    /// the field placeholder `u` from the supplied numeric bindings.
    pub fn new(
        time: TimeOperator,
        spatial_src: &str,
        params: &BTreeMap<String, f64>,
        mode: EvalMode,
    ) -> Result<OperatorSpec, SolutionError> {
        let raw = parse_operator(spatial_src, mode)?;
        let map: BTreeMap<String, Expr> = params
            .iter()
            .map(|(k, v)| (k.clone(), Expr::num(*v)))
            .collect();
        let spatial = substitute_params(&raw, &map);
        let mut free = Vec::new();
        spatial.collect_params(&mut free);
        if let Some(p) = free.into_iter().find(|p| p != "u") {
            return Err(SolutionError::UnboundOperatorParam(p));
        }
        Ok(OperatorSpec {
            time,
            spatial_src: spatial_src.to_owned(),
            mode,
            spatial,
        })
    }

    /// F[u] with `lap` resolved through the symbolic radial Laplacian.
    pub fn apply_spatial(&self, u: &Expr) -> Result<Expr, ExprError> {
        Ok(simplify(&apply_operator(&self.spatial, u)?))
    }

    pub fn describe(&self) -> String {
        format!("{}[u] = {}", self.time.name(), self.spatial_src)
    }
}

/// An exact solution family `u(eta, t) = sum_i f_i(t) g_i(eta)`.
#[derive(Debug, Clone)]
pub struct SolutionFamily {
    pub name: String,
    pub kind: FamilyKind,
    /// Separated product terms `(temporal, spatial)`; zero terms are dropped.
    pub terms: Vec<(Expr, Expr)>,
    pub params: BTreeMap<String, f64>,
    pub equation: OperatorSpec,
    pub validity: Validity,
    full: Expr,
}

impl SolutionFamily {
    fn assemble(
        name: &str,
        kind: FamilyKind,
        terms: Vec<(Expr, Expr)>,
        params: BTreeMap<String, f64>,
        equation: OperatorSpec,
        validity: Validity,
    ) -> Result<SolutionFamily, SolutionError> {
        let mut kept = Vec::new();
        for (i, (f, g)) in terms.into_iter().enumerate() {
            let f = simplify(&f);
            let g = simplify(&g);
            if f.depends_on(Var::Eta) || g.depends_on(Var::T) {
                return Err(SolutionError::MixedTerm { index: i });
            }
            if f == Expr::num(0.0) || g == Expr::num(0.0) {
                continue;
            }
            kept.push((f, g));
        }
        let full = simplify(&Expr::add(
            kept.iter()
                .map(|(f, g)| Expr::mul(vec![f.clone(), g.clone()]))
                .collect(),
        ));
        Ok(SolutionFamily {
            name: name.to_owned(),
            kind,
            terms: kept,
            params,
            equation,
            validity,
            full,
        })
    }

    pub fn mode(&self) -> EvalMode {
        self.equation.mode
    }

    /// The assembled solution expression `u(eta, t)`.
    pub fn expression(&self) -> &Expr {
        &self.full
    }

    pub fn evaluate(&self, eta: f64, t: f64) -> Result<Scalar, ExprError> {
        evaluate(
            &self.full,
            EvalPoint::new(eta, t)?,
            &Bindings::new(),
            self.mode(),
        )
    }

    /// Rebuilds the same structural family under different parameters.
    pub fn with_params(
        &self,
        params: &BTreeMap<String, f64>,
    ) -> Result<SolutionFamily, SolutionError> {
        let req = |k: &str| {
            params
                .get(k)
                .copied()
                .ok_or_else(|| SolutionError::MissingParam(k.to_owned()))
        };
        match self.kind {
            FamilyKind::SeparableRoot => {
                // Operator-level parameters are authoritative too, so a
                // perturbed `beta` or `lambda_im` rebuilds the operator.
                let time = match self.equation.time {
                    TimeOperator::Caputo { .. } => TimeOperator::caputo(req("beta")?)?,
                    TimeOperator::ShiftedClassical { .. } => TimeOperator::ShiftedClassical {
                        lambda: num_complex::Complex64::new(0.0, req("lambda_im")?),
                    },
                    ref t => t.clone(),
                };
                family_theorem21(time, req("n")?, req("c1")?, req("c2")?)
            }
            FamilyKind::SeparableRootGrowth => {
                family_theorem21_laguerre_growth(req("n")?, req("c1")?, req("c2")?)
            }
            FamilyKind::LogSum => family_theorem22(req("t0")?, req("c1")?, req("c2")?),
            FamilyKind::LogSumCustom => Err(SolutionError::NotRebuildable(self.name.clone())),
        }
    }

    /// Serializable description of the family.
    pub fn manifest(&self) -> serde_json::Value {
        json!({
            "name": self.name,
            "params": self.params,
            "time_operator": self.equation.time.name(),
            "equation_src": self.equation.spatial_src,
            "temporal_src": self.terms.iter().map(|(f, _)| f.to_string()).collect::<Vec<_>>(),
            "spatial_src": self.terms.iter().map(|(_, g)| g.to_string()).collect::<Vec<_>>(),
            "validity": {
                // Non-finite bounds serialize as null, meaning unbounded.
                "eta": [self.validity.eta_lo, self.validity.eta_hi],
                "t": [0.0, self.validity.t_end],
            },
        })
    }
}

/// Largest open eta-interval where `c1 ln(tanh(eta/2)) + c2 > 0`.
///
/// `ln tanh(eta/2)` increases monotonically from -inf (eta -> 0) to 0
/// (eta -> inf), so the guard flips sign at most once:
/// - `c1 = 0`: everything or nothing depending on the sign of c2;
/// - `c1 > 0`: the guard needs `ln tanh(eta/2) > -c2/c1`, an upper tail,
///   nonempty only when c2 > 0;
/// - `c1 < 0`: the guard needs `ln tanh(eta/2) < c2/(-c1)`, so all eta when
///   c2 >= 0 and a bounded interval near the axis otherwise.
///
/// An empty interval is returned as `(0, 0)`.
pub fn validity_region(c1: f64, c2: f64) -> (f64, f64) {
    const EMPTY: (f64, f64) = (0.0, 0.0);
    if c1 == 0.0 {
        if c2 > 0.0 {
            (0.0, f64::INFINITY)
        } else {
            EMPTY
        }
    } else if c1 > 0.0 {
        if c2 <= 0.0 {
            EMPTY
        } else {
            (2.0 * (-c2 / c1).exp().atanh(), f64::INFINITY)
        }
    } else {
        let r = c2 / -c1;
        if r >= 0.0 {
            (0.0, f64::INFINITY)
        } else {
            (0.0, 2.0 * r.exp().atanh())
        }
    }
}

fn root_argument(c1: f64, c2: f64) -> Expr {
    Expr::add(vec![
        Expr::Mul(vec![Expr::num(c1), Expr::log_tanh_half_eta()]),
        Expr::num(c2),
    ])
}

/// Power-root family `u = f(t) (c1 ln tanh(eta/2) + c2)^(1/n)` with the
/// temporal profile selected by the time operator.
pub fn family_theorem21(
    op: TimeOperator,
    n: f64,
    c1: f64,
    c2: f64,
) -> Result<SolutionFamily, SolutionError> {
    if !n.is_finite() || n <= 1.0 {
        return Err(SolutionError::InvalidExponent(n));
    }
    if let TimeOperator::Caputo { beta } = op {
        if !beta.is_finite() || beta <= 0.0 || beta > 1.0 {
            return Err(TimeOpError::InvalidOrder(beta).into());
        }
    }
    let (lo, hi) = validity_region(c1, c2);
    if lo.partial_cmp(&hi) != Some(Ordering::Less) {
        return Err(SolutionError::EmptyValidity { c1, c2 });
    }

    let mut params = BTreeMap::from([
        ("n".to_owned(), n),
        ("c1".to_owned(), c1),
        ("c2".to_owned(), c2),
    ]);
    let (name, temporal, src, mode) = match &op {
        TimeOperator::Classical => (
            "theorem21-classical",
            Expr::exp(Expr::neg(Expr::t())),
            "lap(u^n) - u",
            EvalMode::Real,
        ),
        TimeOperator::Caputo { beta } => {
            params.insert("beta".to_owned(), *beta);
            (
                "theorem21-caputo",
                Expr::mlf(*beta, Expr::neg(Expr::powf(Expr::t(), *beta))),
                "lap(u^n) - u",
                EvalMode::Real,
            )
        }
        TimeOperator::Laguerre => (
            "theorem21-laguerre",
            Expr::c0(Expr::neg(Expr::t())),
            "lap(u^n) - u",
            EvalMode::Real,
        ),
        TimeOperator::ShiftedClassical { lambda } => {
            params.insert("lambda_im".to_owned(), lambda.im);
            (
                "theorem21-periodic",
                Expr::exp(Expr::Mul(vec![
                    Expr::Const(Scalar::Complex(*lambda)),
                    Expr::t(),
                ])),
                "lap(u^n)",
                EvalMode::Complex,
            )
        }
    };
    let spatial = Expr::powf(root_argument(c1, c2), 1.0 / n);
    let equation = OperatorSpec::new(op, src, &params, mode)?;
    SolutionFamily::assemble(
        name,
        FamilyKind::SeparableRoot,
        vec![(temporal, spatial)],
        params,
        equation,
        Validity {
            eta_lo: lo,
            eta_hi: hi,
            t_end: None,
        },
    )
}

/// Variant of the Laguerre-operator family carrying the growing profile
/// `c0(t)` instead of `c0(-t)`. The Laguerre operator maps `c0(t)` to
/// `+c0(t)`, so this profile does not satisfy the decay equation
/// `O_t u = lap(u^n) - u`; it is excluded from the catalog and exists so
/// the signed residuals of both profiles can be reported side by side.
pub fn family_theorem21_laguerre_growth(
    n: f64,
    c1: f64,
    c2: f64,
) -> Result<SolutionFamily, SolutionError> {
    if !n.is_finite() || n <= 1.0 {
        return Err(SolutionError::InvalidExponent(n));
    }
    let (lo, hi) = validity_region(c1, c2);
    if lo.partial_cmp(&hi) != Some(Ordering::Less) {
        return Err(SolutionError::EmptyValidity { c1, c2 });
    }
    let params = BTreeMap::from([
        ("n".to_owned(), n),
        ("c1".to_owned(), c1),
        ("c2".to_owned(), c2),
    ]);
    let equation = OperatorSpec::new(
        TimeOperator::Laguerre,
        "lap(u^n) - u",
        &params,
        EvalMode::Real,
    )?;
    SolutionFamily::assemble(
        "theorem21-laguerre-growth",
        FamilyKind::SeparableRootGrowth,
        vec![(
            Expr::c0(Expr::t()),
            Expr::powf(root_argument(c1, c2), 1.0 / n),
        )],
        params,
        equation,
        Validity {
            eta_lo: lo,
            eta_hi: hi,
            t_end: None,
        },
    )
}

/// Logarithmic-sum family for the quasilinear equation `u_t = u lap(u)`,
/// with closed-form coefficients `f1 = 1/(t0-t)`, `f2 = c1/(t0-t)`,
/// `f3 = c2/(t0-t)`. The amplitude blows up as t -> t0.
pub fn family_theorem22(t0: f64, c1: f64, c2: f64) -> Result<SolutionFamily, SolutionError> {
    if !t0.is_finite() || t0 <= 0.0 {
        return Err(SolutionError::InvalidBlowupTime(t0));
    }
    let params = BTreeMap::from([
        ("t0".to_owned(), t0),
        ("c1".to_owned(), c1),
        ("c2".to_owned(), c2),
    ]);
    let horizon = Expr::powf(Expr::sub(Expr::num(t0), Expr::t()), -1.0);
    let terms = vec![
        (horizon.clone(), Expr::log_sinh_eta()),
        (
            Expr::Mul(vec![Expr::num(c1), horizon.clone()]),
            Expr::log_tanh_half_eta(),
        ),
        (Expr::Mul(vec![Expr::num(c2), horizon]), Expr::num(1.0)),
    ];
    let equation = OperatorSpec::new(TimeOperator::Classical, "u*lap(u)", &params, EvalMode::Real)?;
    SolutionFamily::assemble(
        "theorem22-general",
        FamilyKind::LogSum,
        terms,
        params,
        equation,
        Validity {
            eta_lo: 0.0,
            eta_hi: f64::INFINITY,
            t_end: Some(t0),
        },
    )
}

/// Logarithmic-sum family with caller-supplied temporal coefficients.
/// The coefficients must satisfy the governing system
/// `O_t f1 = f1^2`, `O_t f2 = f1 f2`, `O_t f3 = f1 f3`; the identities are
/// checked numerically on a time sample before the family is accepted.
pub fn family_theorem22_custom(
    op: TimeOperator,
    f1: Expr,
    f2: Expr,
    f3: Expr,
    t_end: Option<f64>,
) -> Result<SolutionFamily, SolutionError> {
    check_coefficient_system(&op, &[f1.clone(), f2.clone(), f3.clone()], t_end)?;
    let terms = vec![
        (f1, Expr::log_sinh_eta()),
        (f2, Expr::log_tanh_half_eta()),
        (f3, Expr::num(1.0)),
    ];
    let equation = OperatorSpec::new(op, "u*lap(u)", &BTreeMap::new(), EvalMode::Real)?;
    SolutionFamily::assemble(
        "theorem22-custom",
        FamilyKind::LogSumCustom,
        terms,
        BTreeMap::new(),
        equation,
        Validity {
            eta_lo: 0.0,
            eta_hi: f64::INFINITY,
            t_end,
        },
    )
}

fn check_coefficient_system(
    op: &TimeOperator,
    fs: &[Expr],
    t_end: Option<f64>,
) -> Result<(), SolutionError> {
    let horizon = t_end.map_or(4.0, |t0| 0.9 * t0);
    let ts = linspace(horizon / 30.0, horizon, 24);
    let rhs = [
        Expr::Mul(vec![fs[0].clone(), fs[0].clone()]),
        Expr::Mul(vec![fs[0].clone(), fs[1].clone()]),
        Expr::Mul(vec![fs[0].clone(), fs[2].clone()]),
    ];
    for i in 0..3 {
        let lhs = op.apply_symbolic(&fs[i])?;
        let mut max_err = 0.0f64;
        for &t in &ts {
            let p = EvalPoint::new(1.0, t)?;
            let l = evaluate(&lhs, p, &Bindings::new(), EvalMode::Complex)?.as_complex();
            let r = evaluate(&rhs[i], p, &Bindings::new(), EvalMode::Complex)?.as_complex();
            max_err = max_err.max((l - r).norm() / r.norm().max(1.0));
        }
        if max_err > 1e-9 {
            return Err(SolutionError::TemporalConditionViolated {
                index: i + 1,
                max_err,
            });
        }
    }
    Ok(())
}

/// The six admitted families with their default parameter sets. Admission
/// asserts the residual gate: every family's governing-equation residual
/// must stay at or below 1e-9 on a 40x40 sample of its validity region.
pub fn catalog() -> Result<Vec<SolutionFamily>, SolutionError> {
    // c1 = -1 keeps the profile ln(2 cosh^2(eta/2)) strictly positive, so
    // the default blow-up member doubles as a well-posed quasilinear run.
    let mut blowup = family_theorem22(1.0, -1.0, 0.0)?;
    blowup.name = "theorem22-blowup".to_owned();
    let fams = vec![
        family_theorem21(TimeOperator::Classical, 2.0, -1.0, 0.1)?,
        family_theorem21(TimeOperator::caputo(0.5)?, 3.0, -1.0, 1.0)?,
        family_theorem21(TimeOperator::Laguerre, 2.0, -1.0, 0.1)?,
        family_theorem21(TimeOperator::shifted(2.0, 1.0)?, 2.0, -1.0, 0.1)?,
        family_theorem22(1.0, 0.5, 0.25)?,
        blowup,
    ];
    for fam in &fams {
        let rep = crate::verify::residual(fam).map_err(|e| SolutionError::AdmissionFailed {
            family: fam.name.clone(),
            detail: e.to_string(),
        })?;
        if !rep.max_abs_residual.is_finite() || rep.max_abs_residual > 1e-9 {
            return Err(SolutionError::AdmissionFailed {
                family: fam.name.clone(),
                detail: format!(
                    "max residual {:.3e} exceeds the 1e-9 admission gate",
                    rep.max_abs_residual
                ),
            });
        }
    }
    Ok(fams)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Bisection root of `c1 ln(tanh(eta/2)) + c2` on (0, 60), independent
    /// of the closed-form boundary.
    fn boundary_oracle(c1: f64, c2: f64) -> f64 {
        let g = |eta: f64| c1 * (0.5 * eta).tanh().ln() + c2;
        let (mut a, mut b) = (1e-9f64, 60.0f64);
        assert!(
            g(a) * g(b) < 0.0,
            "oracle needs a sign change for c1={c1}, c2={c2}"
        );
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if g(a) * g(m) <= 0.0 {
                b = m;
            } else {
                a = m;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn validity_region_sign_analysis() {
        assert_eq!(validity_region(-1.0, 0.0), (0.0, f64::INFINITY));
        assert_eq!(validity_region(-1.0, 0.3), (0.0, f64::INFINITY));
        assert_eq!(validity_region(0.0, 1.0), (0.0, f64::INFINITY));
        assert_eq!(validity_region(0.0, -1.0), (0.0, 0.0));
        assert_eq!(validity_region(1.0, 0.0), (0.0, 0.0));
        assert_eq!(validity_region(1.0, -2.0), (0.0, 0.0));

        // Lower threshold case against the bisection oracle.
        let (lo, hi) = validity_region(1.0, 1.0);
        assert!(hi.is_infinite());
        assert!((lo - 2.0 * (-1.0f64).exp().atanh()).abs() < 1e-14);
        assert!((lo - boundary_oracle(1.0, 1.0)).abs() < 1e-9);

        // Upper threshold case.
        let (lo, hi) = validity_region(-1.0, -0.5);
        assert_eq!(lo, 0.0);
        assert!((hi - boundary_oracle(-1.0, -0.5)).abs() < 1e-9);
    }

    #[test]
    fn family_construction_rejects_bad_inputs() {
        assert!(matches!(
            family_theorem21(TimeOperator::Classical, 2.0, 1.0, 0.0),
            Err(SolutionError::EmptyValidity { .. })
        ));
        assert!(matches!(
            family_theorem21(TimeOperator::Classical, 1.0, -1.0, 0.1),
            Err(SolutionError::InvalidExponent(_))
        ));
        assert!(matches!(
            family_theorem21(TimeOperator::Caputo { beta: 1.5 }, 2.0, -1.0, 0.1),
            Err(SolutionError::TimeOp(TimeOpError::InvalidOrder(_)))
        ));
        assert!(matches!(
            family_theorem22(-1.0, 1.0, 0.0),
            Err(SolutionError::InvalidBlowupTime(_))
        ));
    }

    #[test]
    fn classical_family_matches_hand_formula() {
        let fam = family_theorem21(TimeOperator::Classical, 2.0, -1.0, 0.1).unwrap();
        let points: [(f64, f64); 3] = [(0.5, 0.0), (1.0, 1.0), (3.0, 2.5)];
        for &(eta, t) in &points {
            let want = (-t).exp() * (0.1 - (0.5 * eta).tanh().ln()).sqrt();
            let got = fam.evaluate(eta, t).unwrap().re();
            assert!(
                (got - want).abs() <= 1e-14 * want.abs(),
                "u({eta},{t}) = {got} vs {want}"
            );
        }
    }

    #[test]
    fn constant_in_eta_member_is_pure_decay() {
        let fam = family_theorem21(TimeOperator::Classical, 2.0, 0.0, 1.0).unwrap();
        let points: [(f64, f64); 3] = [(0.3, 0.0), (0.7, 1.3), (9.0, 1.3)];
        for &(eta, t) in &points {
            let got = fam.evaluate(eta, t).unwrap().re();
            assert!(((-t).exp() - got).abs() < 1e-15);
        }
    }

    #[test]
    fn periodic_family_has_unit_modulus_in_time() {
        let fam =
            family_theorem21(TimeOperator::shifted(2.0, 1.0).unwrap(), 2.0, -1.0, 0.1).unwrap();
        assert_eq!(fam.mode(), EvalMode::Complex);
        let at = |t: f64| fam.evaluate(1.3, t).unwrap().as_complex().norm();
        let m0 = at(0.0);
        for &t in &[0.5, 1.0, 2.75] {
            assert!((at(t) - m0).abs() < 1e-14 * m0, "modulus drifts at t={t}");
        }
        // And the phase actually advances: lambda = 2i, so a quarter turn
        // takes t = pi/4.
        let z0 = fam.evaluate(1.3, 0.0).unwrap().as_complex();
        let z1 = fam
            .evaluate(1.3, std::f64::consts::FRAC_PI_4)
            .unwrap()
            .as_complex();
        assert!((z1 / z0 - num_complex::Complex64::new(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn blowup_amplitude_scales_inversely_with_time_to_horizon() {
        let mut fam = family_theorem22(1.0, -1.0, 0.0).unwrap();
        fam.name = "theorem22-blowup".to_owned();
        let base = fam.evaluate(2.0, 0.9).unwrap().re() * (1.0 - 0.9);
        for &t in &[0.99, 0.999] {
            let scaled = fam.evaluate(2.0, t).unwrap().re() * (1.0 - t);
            assert!(
                (scaled - base).abs() <= 1e-11 * base.abs(),
                "t={t}: {scaled} vs {base}"
            );
        }
        assert!(!fam.validity.contains(2.0, 1.0));
        assert!(fam.validity.contains(2.0, 0.999));
    }

    #[test]
    fn monotone_decay_in_time_for_decaying_profiles() {
        for fam in [
            family_theorem21(TimeOperator::Classical, 2.0, -1.0, 0.1).unwrap(),
            family_theorem21(TimeOperator::caputo(0.5).unwrap(), 3.0, -1.0, 1.0).unwrap(),
        ] {
            for &eta in &[0.3, 1.5, 6.0] {
                let mut prev = f64::INFINITY;
                for &t in &linspace(0.0, 5.0, 11) {
                    let v = fam.evaluate(eta, t).unwrap().re();
                    assert!(
                        v <= prev + 1e-12,
                        "{}: u({eta},{t}) = {v} rose above {prev}",
                        fam.name
                    );
                    prev = v;
                }
            }
        }
    }

    #[test]
    fn custom_log_sum_accepts_static_and_closed_form_coefficients() {
        // Static member: f1 = 0 puts the field in the operator kernel.
        let fam = family_theorem22_custom(
            TimeOperator::Classical,
            Expr::num(0.0),
            Expr::num(1.5),
            Expr::num(-2.0),
            None,
        )
        .unwrap();
        assert_eq!(fam.terms.len(), 2, "zero temporal coefficient is dropped");

        // The closed forms pass their own identity check.
        let horizon = Expr::powf(Expr::sub(Expr::num(1.0), Expr::t()), -1.0);
        family_theorem22_custom(
            TimeOperator::Classical,
            horizon.clone(),
            Expr::Mul(vec![Expr::num(0.5), horizon.clone()]),
            Expr::Mul(vec![Expr::num(0.25), horizon]),
            Some(1.0),
        )
        .unwrap();
    }

    #[test]
    fn custom_log_sum_rejects_non_solutions() {
        // d/dt t = 1, but the identity would need t^2.
        let r = family_theorem22_custom(
            TimeOperator::Classical,
            Expr::t(),
            Expr::num(0.0),
            Expr::num(0.0),
            None,
        );
        assert!(matches!(
            r,
            Err(SolutionError::TemporalConditionViolated { index: 1, .. })
        ));

        // Spatial leak: an eta-dependent "temporal" factor slips past the
        // identity check (it is constant in t) but must be caught.
        let r = family_theorem22_custom(
            TimeOperator::Classical,
            Expr::num(0.0),
            Expr::sinh(Expr::eta()),
            Expr::num(0.0),
            None,
        );
        assert!(matches!(r, Err(SolutionError::MixedTerm { .. })));
    }

    #[test]
    fn rebuild_with_perturbed_parameters() {
        let fam = family_theorem21(TimeOperator::Classical, 2.0, -1.0, 0.1).unwrap();
        let mut p = fam.params.clone();
        p.insert("c2".to_owned(), 0.11);
        let pert = fam.with_params(&p).unwrap();
        assert_eq!(pert.params["c2"], 0.11);
        let a = fam.evaluate(1.0, 0.0).unwrap().re();
        let b = pert.evaluate(1.0, 0.0).unwrap().re();
        assert!(b > a, "larger offset under the root must raise the value");

        let custom = family_theorem22_custom(
            TimeOperator::Classical,
            Expr::num(0.0),
            Expr::num(1.0),
            Expr::num(0.0),
            None,
        )
        .unwrap();
        assert!(matches!(
            custom.with_params(&p),
            Err(SolutionError::NotRebuildable(_))
        ));
    }

    #[test]
    fn manifest_lists_sources_and_validity() {
        let fam = family_theorem21(TimeOperator::caputo(0.5).unwrap(), 3.0, -1.0, 1.0).unwrap();
        let m = fam.manifest();
        assert_eq!(m["name"], "theorem21-caputo");
        assert_eq!(m["params"]["beta"], 0.5);
        assert_eq!(m["equation_src"], "lap(u^n) - u");
        assert_eq!(m["temporal_src"].as_array().unwrap().len(), 1);
        assert!(m["validity"]["eta"][1].is_null(), "infinite bound -> null");
        assert!(m["validity"]["t"][1].is_null());
    }

    #[test]
    fn operator_spec_rejects_unbound_parameters() {
        let r = OperatorSpec::new(
            TimeOperator::Classical,
            "lap(u^n) - q*u",
            &BTreeMap::from([("n".to_owned(), 2.0)]),
            EvalMode::Real,
        );
        assert!(matches!(r, Err(SolutionError::UnboundOperatorParam(p)) if p == "q"));
    }
}
