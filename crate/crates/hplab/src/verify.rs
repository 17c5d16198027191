//! Residual engine and convergence analytics.
//!
//! The residual of a family is `O_t u - F[u]`, assembled symbolically: the
//! time operator acts term by term on the separated temporal factors while
//! `F` is applied to the full field with `lap` resolved through the
//! symbolic radial Laplacian. For every exact family this collapses to the
//! literal zero expression, so the sampled residual measures algebraic
//! correctness of the whole pipeline rather than floating-point luck.
//! Negative controls feed a parameter-perturbed field to the time-operator
//! side only, which breaks exactness mechanically and must light up well
//! above tolerance.

use crate::expr::{evaluate, simplify, Bindings, EvalPoint, Expr, ExprError};
use crate::quad;
use crate::solutions::{SolutionError, SolutionFamily, Validity};
use crate::specfun::{self, SpecFunError};
use crate::timeops::{TimeOpError, TimeOperator};
use crate::util::{linspace, logspace};
use num_complex::Complex64;
use serde_json::json;
use statrs::function::gamma::gamma;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("residual sample grid is empty (validity region vanishes after clipping)")]
    EmptyGrid,
    #[error("all {0} residual sample points failed to evaluate")]
    AllPointsFailed(usize),
    #[error("convergence fit needs at least 3 resolutions, got {0}")]
    TooFewResolutions(usize),
    #[error("spacings must be positive, strictly decreasing, and match the error lists")]
    BadResolutions,
    #[error("errors must be positive and finite for a log-log fit, got {0}")]
    BadErrorValue(f64),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    TimeOp(#[from] TimeOpError),
    #[error(transparent)]
    Solution(#[from] SolutionError),
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
}

/// Sampled magnitude of `O_t u - F[u]` over a validity-region grid.
#[derive(Debug, Clone)]
pub struct ResidualReport {
    pub family: String,
    pub equation: String,
    pub eta_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub max_abs_residual: f64,
    pub mean_abs_residual: f64,
    pub argmax: (f64, f64),
    /// Sample points dropped because evaluation left the expression's
    /// domain; nonzero values flag a validity region that had to shrink.
    pub skipped_points: usize,
}

impl ResidualReport {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "family": self.family,
            "equation": self.equation,
            "grid": { "eta": self.eta_grid, "t": self.t_grid },
            "max_abs_residual": self.max_abs_residual,
            "mean_abs_residual": self.mean_abs_residual,
            "argmax": { "eta": self.argmax.0, "t": self.argmax.1 },
            "skipped_points": self.skipped_points,
        })
    }
}

/// `O_t u - F[u]` as a simplified expression.
pub fn residual_expression(fam: &SolutionFamily) -> Result<Expr, VerifyError> {
    mixed_residual_expression(fam, fam, fam)
}

/// Residual of `op_from`'s equation with the time-operator side built from
/// `time_field` and the spatial side from `space_field`. Equal arguments
/// give the honest residual; distinct ones give the deliberately
/// inconsistent expressions used by negative controls.
fn mixed_residual_expression(
    op_from: &SolutionFamily,
    time_field: &SolutionFamily,
    space_field: &SolutionFamily,
) -> Result<Expr, VerifyError> {
    let op = &op_from.equation;
    let mut lhs_terms = Vec::new();
    for (f, g) in &time_field.terms {
        lhs_terms.push(Expr::Mul(vec![op.time.apply_symbolic(f)?, g.clone()]));
    }
    let lhs = Expr::add(lhs_terms);
    let rhs = op.apply_spatial(space_field.expression())?;
    Ok(simplify(&Expr::sub(lhs, rhs)))
}

fn sample_grids(
    v: &Validity,
    n_eta: usize,
    n_t: usize,
    t_max: Option<f64>,
) -> Result<(Vec<f64>, Vec<f64>), VerifyError> {
    // Stay away from the log singularity at the axis and cap the far field.
    let lo = v.eta_lo.max(0.05);
    let hi = v.eta_hi.min(20.0);
    if lo >= hi {
        return Err(VerifyError::EmptyGrid);
    }
    let etas = logspace(lo, hi, n_eta);
    // Near a blow-up horizon, stop 1e-3 * t0 short of it.
    let default_hi = match v.t_end {
        Some(t0) => t0 * (1.0 - 1e-3),
        None => 5.0,
    };
    let t_hi = t_max.map_or(default_hi, |m| m.min(default_hi));
    if t_hi.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(VerifyError::EmptyGrid);
    }
    let ts = linspace(0.0, t_hi, n_t);
    Ok((etas, ts))
}

fn grid_report(
    family: String,
    equation: String,
    exprs: &[&Expr],
    fam: &SolutionFamily,
    etas: Vec<f64>,
    ts: Vec<f64>,
) -> Result<ResidualReport, VerifyError> {
    let mut max_abs = 0.0f64;
    let mut argmax = (etas[0], ts[0]);
    let mut sum = 0.0f64;
    let mut count = 0usize;
    let mut skipped = 0usize;
    for &eta in &etas {
        'point: for &t in &ts {
            let p = EvalPoint::new(eta, t)?;
            let mut a = 0.0f64;
            for expr in exprs {
                match evaluate(expr, p, &Bindings::new(), fam.mode()) {
                    Ok(s) => a = a.max(s.as_complex().norm()),
                    Err(ExprError::Domain(_)) => {
                        skipped += 1;
                        continue 'point;
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            if a > max_abs {
                max_abs = a;
                argmax = (eta, t);
            }
            sum += a;
            count += 1;
        }
    }
    if count == 0 {
        return Err(VerifyError::AllPointsFailed(skipped));
    }
    Ok(ResidualReport {
        family,
        equation,
        eta_grid: etas,
        t_grid: ts,
        max_abs_residual: max_abs,
        mean_abs_residual: sum / count as f64,
        argmax,
        skipped_points: skipped,
    })
}

/// Residual magnitudes on the default 40x40 validity sample.
pub fn residual(fam: &SolutionFamily) -> Result<ResidualReport, VerifyError> {
    residual_sampled(fam, 40, 40, None)
}

/// Residual magnitudes on an `n_eta x n_t` sample, optionally capping the
/// time range below the validity horizon.
pub fn residual_sampled(
    fam: &SolutionFamily,
    n_eta: usize,
    n_t: usize,
    t_max: Option<f64>,
) -> Result<ResidualReport, VerifyError> {
    let expr = residual_expression(fam)?;
    let (etas, ts) = sample_grids(&fam.validity, n_eta, n_t, t_max)?;
    grid_report(
        fam.name.clone(),
        fam.equation.describe(),
        &[&expr],
        fam,
        etas,
        ts,
    )
}

/// Signed residual value at a single point (imaginary part is zero for
/// real-mode families).
pub fn residual_at(fam: &SolutionFamily, eta: f64, t: f64) -> Result<Complex64, VerifyError> {
    let expr = residual_expression(fam)?;
    Ok(evaluate(&expr, EvalPoint::new(eta, t)?, &Bindings::new(), fam.mode())?.as_complex())
}

/// One-sided perturbation controls. Each rebuildable parameter is scaled by
/// 1.1 (or offset by +0.1 from zero) and the perturbed field replaces `u` on
/// one side of the equation at a time, first under the time operator, then
/// under `F`; the larger discrepancy at each sample point is reported.
/// Perturbing both sides together would be useless as a control: the
/// perturbed parameters select another exact member of the same family, so
/// the honest residual stays zero.
///
/// Two perturbations are structurally silent and stay at zero even
/// one-sided: `c1` and `c2` of the shifted-operator family. There both
/// sides of `O_t u = lap(u^n)` vanish separately for every `c1, c2` (the
/// root argument is a Laplacian kernel element and the operator annihilates
/// the temporal factor), so no mixing of members can leave the solution
/// set. That family's detectable controls are `n` and `lambda_im`.
///
/// `beta` of the Caputo family is not swept: applying the original-order
/// symbolic table to a foreign-order profile is an unsupported form (an
/// error), not a number.
pub fn negative_controls(
    fam: &SolutionFamily,
) -> Result<Vec<(String, ResidualReport)>, VerifyError> {
    let mut out = Vec::new();
    for key in ["n", "c1", "c2", "t0", "lambda_im"] {
        let Some(&v) = fam.params.get(key) else {
            continue;
        };
        let mut p = fam.params.clone();
        p.insert(key.to_owned(), if v == 0.0 { 0.1 } else { 1.1 * v });
        let pert = fam.with_params(&p)?;
        let time_side = mixed_residual_expression(fam, &pert, fam)?;
        let space_side = mixed_residual_expression(fam, fam, &pert)?;
        let joint = Validity {
            eta_lo: fam.validity.eta_lo.max(pert.validity.eta_lo),
            eta_hi: fam.validity.eta_hi.min(pert.validity.eta_hi),
            t_end: match (fam.validity.t_end, pert.validity.t_end) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            },
        };
        let (etas, ts) = sample_grids(&joint, 40, 40, None)?;
        out.push((
            key.to_owned(),
            grid_report(
                format!("{} [{key} +10%]", fam.name),
                fam.equation.describe(),
                &[&time_side, &space_side],
                fam,
                etas,
                ts,
            )?,
        ));
    }
    Ok(out)
}

/// Side-by-side residual reports for the two Laguerre-operator temporal
/// profiles: the decaying `c0(-t)` (which satisfies the equation) and the
/// growing `c0(t)` (which has residual exactly `2 c0(t) g(eta)`).
pub fn laguerre_profile_discrepancy(
    n: f64,
    c1: f64,
    c2: f64,
) -> Result<(ResidualReport, ResidualReport), VerifyError> {
    let decaying = crate::solutions::family_theorem21(TimeOperator::Laguerre, n, c1, c2)?;
    let growing = crate::solutions::family_theorem21_laguerre_growth(n, c1, c2)?;
    Ok((residual(&decaying)?, residual(&growing)?))
}

/// Independent check of the symbolic Caputo table. For
/// `f(t) = E_beta(-t^beta)` the memory integral
/// `(1/Gamma(1-beta)) int_0^t (t-tau)^(-beta) f'(tau) dtau`
/// is evaluated by adaptive quadrature and compared against the table's
/// closed answer `-f(t)` at five times; the worst absolute deviation is
/// returned. Both endpoint singularities are removed by substitution:
/// `tau = y^(1/beta)` flattens the `tau^{beta-1}` factor hiding in `f'`
/// on the left half, and `w = (t-tau)^(1-beta)` absorbs the `(t-tau)^{-beta}`
/// weight on the right half.
pub fn caputo_spot_check(beta: f64) -> Result<f64, VerifyError> {
    if !beta.is_finite() || beta <= 0.0 || beta >= 1.0 {
        return Err(TimeOpError::InvalidOrder(beta).into());
    }
    let mut worst = 0.0f64;
    for &t in &[0.25, 0.5, 1.0, 2.0, 4.0] {
        let integral = caputo_integral_of_eigenprofile(beta, t);
        let table = -specfun::mittag_leffler(beta, -t.powf(beta))?;
        worst = worst.max((integral - table).abs());
    }
    Ok(worst)
}

fn caputo_integral_of_eigenprofile(beta: f64, t: f64) -> f64 {
    // f'(tau) = E_beta'(-tau^beta) * (-beta tau^(beta-1)).
    let half = 0.5 * t;

    // Left half, tau in [0, t/2]: with tau = y^(1/beta) the Jacobian
    // cancels tau^(beta-1) exactly, leaving
    //   -int_0^{(t/2)^beta} (t - y^(1/beta))^(-beta) E_beta'(-y) dy.
    let y_hi = half.powf(beta);
    let left_f = |y: f64| {
        let tau = y.powf(1.0 / beta);
        -(t - tau).powf(-beta) * specfun::mittag_leffler_deriv_series(beta, -y)
    };
    let left = quad::adaptive(&left_f, &[0.0, 0.5 * y_hi, y_hi], 1e-12, 40);

    // Right half, tau in [t/2, t]: with w = (t-tau)^(1-beta) the weight and
    // Jacobian collapse to the constant 1/(1-beta), leaving
    //   (1/(1-beta)) int_0^{(t/2)^(1-beta)} f'(t - w^(1/(1-beta))) dw.
    let w_hi = half.powf(1.0 - beta);
    let right_f = |w: f64| {
        let tau = t - w.powf(1.0 / (1.0 - beta));
        let z = -tau.powf(beta);
        -beta * tau.powf(beta - 1.0) * specfun::mittag_leffler_deriv_series(beta, z) / (1.0 - beta)
    };
    let right = quad::adaptive(&right_f, &[0.0, 0.5 * w_hi, w_hi], 1e-12, 40);

    (left.value + right.value) / gamma(1.0 - beta)
}

/// Measured orders of accuracy from a refinement sweep.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    /// Grid spacings (or time steps), strictly decreasing.
    pub spacings: Vec<f64>,
    pub errors_linf: Vec<f64>,
    pub errors_l2: Vec<f64>,
    /// Order measured from each adjacent resolution pair (max-norm errors).
    pub pairwise_orders: Vec<f64>,
    /// Least-squares slope of log(error) against log(spacing).
    pub global_order: f64,
}

impl ConvergenceReport {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "spacings": self.spacings,
            "errors_linf": self.errors_linf,
            "errors_l2": self.errors_l2,
            "pairwise_orders": self.pairwise_orders,
            "global_order": self.global_order,
        })
    }
}

/// Fits convergence orders from errors measured at three or more
/// resolutions with strictly decreasing spacing.
pub fn fit_order(
    spacings: &[f64],
    errors_linf: &[f64],
    errors_l2: &[f64],
) -> Result<ConvergenceReport, VerifyError> {
    let n = spacings.len();
    if n < 3 {
        return Err(VerifyError::TooFewResolutions(n));
    }
    if errors_linf.len() != n || errors_l2.len() != n {
        return Err(VerifyError::BadResolutions);
    }
    if !spacings.windows(2).all(|w| w[1] > 0.0 && w[0] > w[1]) || !spacings[0].is_finite() {
        return Err(VerifyError::BadResolutions);
    }
    for &e in errors_linf.iter().chain(errors_l2) {
        if !e.is_finite() || e <= 0.0 {
            return Err(VerifyError::BadErrorValue(e));
        }
    }
    let pairwise: Vec<f64> = (0..n - 1)
        .map(|k| (errors_linf[k] / errors_linf[k + 1]).ln() / (spacings[k] / spacings[k + 1]).ln())
        .collect();
    let xs: Vec<f64> = spacings.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors_linf.iter().map(|e| e.ln()).collect();
    Ok(ConvergenceReport {
        spacings: spacings.to_vec(),
        errors_linf: errors_linf.to_vec(),
        errors_l2: errors_l2.to_vec(),
        pairwise_orders: pairwise,
        global_order: lsq_slope(&xs, &ys),
    })
}

fn lsq_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solutions::{
        catalog, family_theorem21, family_theorem21_laguerre_growth, family_theorem22,
        family_theorem22_custom,
    };

    #[test]
    fn catalog_passes_admission_and_has_six_members() {
        let fams = catalog().unwrap();
        let names: Vec<&str> = fams.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "theorem21-classical",
                "theorem21-caputo",
                "theorem21-laguerre",
                "theorem21-periodic",
                "theorem22-general",
                "theorem22-blowup"
            ]
        );
    }

    #[test]
    fn exact_families_reduce_to_literal_zero_residuals() {
        for fam in [
            family_theorem21(TimeOperator::Classical, 2.0, -1.0, 0.1).unwrap(),
            family_theorem21(TimeOperator::caputo(0.5).unwrap(), 3.0, -1.0, 1.0).unwrap(),
            family_theorem21(TimeOperator::Laguerre, 2.0, -1.0, 0.1).unwrap(),
            family_theorem21(TimeOperator::shifted(2.0, 1.0).unwrap(), 2.0, -1.0, 0.1).unwrap(),
            family_theorem22(1.0, 0.5, 0.25).unwrap(),
            family_theorem22(1.0, 1.0, 0.0).unwrap(),
        ] {
            let r = residual_expression(&fam).unwrap();
            assert_eq!(r, Expr::num(0.0), "{}: residual {r}", fam.name);
            let rep = residual(&fam).unwrap();
            assert_eq!(rep.max_abs_residual, 0.0, "{}", fam.name);
            assert_eq!(rep.skipped_points, 0);
        }
    }

    #[test]
    fn degenerate_constant_member_has_zero_residual() {
        let fam = family_theorem21(TimeOperator::Classical, 2.0, 0.0, 1.0).unwrap();
        assert_eq!(residual(&fam).unwrap().max_abs_residual, 0.0);
    }

    #[test]
    fn static_log_sum_member_has_zero_residual() {
        let fam = family_theorem22_custom(
            TimeOperator::Classical,
            Expr::num(0.0),
            Expr::num(1.5),
            Expr::num(-2.0),
            None,
        )
        .unwrap();
        assert_eq!(residual(&fam).unwrap().max_abs_residual, 0.0);
    }

    #[test]
    fn negative_controls_light_up_for_every_family() {
        for fam in catalog().unwrap() {
            let base = residual(&fam).unwrap().max_abs_residual;
            let controls = negative_controls(&fam).unwrap();
            assert!(!controls.is_empty(), "{} has no controls", fam.name);
            let mut detectable = 0;
            for (key, rep) in controls {
                if fam.name == "theorem21-periodic" && (key == "c1" || key == "c2") {
                    // Structurally silent: every root argument is a kernel
                    // element and the operator kills the temporal factor,
                    // so both equation sides stay at zero under mixing.
                    assert_eq!(
                        rep.max_abs_residual, 0.0,
                        "{} perturbed in {key} should be exact",
                        fam.name
                    );
                    continue;
                }
                detectable += 1;
                assert!(
                    rep.max_abs_residual > 1e-6,
                    "{} perturbed in {key}: residual {:.3e} too quiet",
                    fam.name,
                    rep.max_abs_residual
                );
                assert!(
                    rep.max_abs_residual >= 1e3 * base.max(1e-300),
                    "{} perturbed in {key}: {:.3e} not well above base {base:.3e}",
                    fam.name,
                    rep.max_abs_residual
                );
            }
            assert!(detectable >= 2, "{}: too few detectable controls", fam.name);
        }
    }

    #[test]
    fn laguerre_profiles_report_opposite_verdicts() {
        let (decaying, growing) = laguerre_profile_discrepancy(2.0, -1.0, 0.1).unwrap();
        assert_eq!(decaying.max_abs_residual, 0.0);
        assert!(
            growing.max_abs_residual > 1.0,
            "growing profile residual {:.3e}",
            growing.max_abs_residual
        );
        // The sign is positive: the growing profile misses by +2 c0(t) g.
        let fam = family_theorem21_laguerre_growth(2.0, -1.0, 0.1).unwrap();
        let r = residual_at(&fam, 1.0, 0.0).unwrap();
        let g = fam.evaluate(1.0, 0.0).unwrap().re();
        assert!((r.re - 2.0 * g).abs() < 1e-12 && r.im == 0.0, "r = {r}");
    }

    #[test]
    fn caputo_table_agrees_with_direct_quadrature() {
        for &beta in &[0.5, 0.7] {
            let worst = caputo_spot_check(beta).unwrap();
            assert!(worst <= 1e-6, "beta={beta}: worst deviation {worst:.3e}");
        }
        assert!(caputo_spot_check(1.0).is_err());
    }

    #[test]
    fn fit_order_recovers_exact_geometric_decay() {
        let h = [1.0, 0.5, 0.25];
        let linf = [1e-2, 2.5e-3, 6.25e-4];
        let rep = fit_order(&h, &linf, &linf).unwrap();
        assert!(rep.pairwise_orders.iter().all(|&p| (p - 2.0).abs() < 1e-12));
        assert!((rep.global_order - 2.0).abs() < 1e-12);

        let linf = [1e-3, 5e-4, 2.5e-4];
        let rep = fit_order(&h, &linf, &linf).unwrap();
        assert!((rep.pairwise_orders[0] - 1.0).abs() < 1e-12);
        assert!((rep.global_order - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_order_recovers_synthetic_powers_exactly() {
        let h: Vec<f64> = (0..6).map(|k| 0.4 / (1.7f64).powi(k)).collect();
        for &p in &[0.5, 1.0, 1.5, 2.0] {
            let e: Vec<f64> = h.iter().map(|&x| 3.7 * x.powf(p)).collect();
            let rep = fit_order(&h, &e, &e).unwrap();
            assert!(
                (rep.global_order - p).abs() < 1e-10,
                "p={p}: fitted {}",
                rep.global_order
            );
            assert!(rep.pairwise_orders.iter().all(|&q| (q - p).abs() < 1e-10));
        }
    }

    #[test]
    fn fit_order_rejects_malformed_sweeps() {
        let e = [1e-2, 5e-3];
        assert!(matches!(
            fit_order(&[0.1, 0.05], &e, &e),
            Err(VerifyError::TooFewResolutions(2))
        ));
        let e3 = [1e-2, 5e-3, 2.5e-3];
        assert!(matches!(
            fit_order(&[0.1, 0.2, 0.05], &e3, &e3),
            Err(VerifyError::BadResolutions)
        ));
        assert!(matches!(
            fit_order(&[0.1, 0.05, 0.025], &[1e-2, 0.0, 1e-3], &e3),
            Err(VerifyError::BadErrorValue(_))
        ));
    }

    #[test]
    fn residual_report_serializes_the_documented_schema() {
        let fam = family_theorem21(TimeOperator::Classical, 2.0, -1.0, 0.1).unwrap();
        let j = residual(&fam).unwrap().to_json();
        for key in [
            "family",
            "equation",
            "grid",
            "max_abs_residual",
            "mean_abs_residual",
            "argmax",
            "skipped_points",
        ] {
            assert!(j.get(key).is_some(), "missing key {key}");
        }
        assert_eq!(j["grid"]["eta"].as_array().unwrap().len(), 40);
        assert_eq!(j["grid"]["t"].as_array().unwrap().len(), 40);
    }
}
