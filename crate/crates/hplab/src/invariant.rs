//! Randomized invariant-subspace checker for nonlinear spatial operators.
//!
//! A subspace `span(phi_1, ..., phi_k)` is invariant under `F` when
//! `F[sum c_j phi_j]` lands back in the span for every coefficient vector.
//! The checker operationalizes this with random draws: build the field
//! symbolically, push it through `F` (with `lap` resolved to the radial
//! hyperbolic Laplacian), sample the result, and least-squares fit it onto
//! the sampled basis. A verdict of "invariant" means every trial fit closed
//! to tolerance; it is numerical evidence, not proof.

use crate::expr::{
    apply_operator, evaluate, parse_operator, Bindings, EvalMode, EvalPoint, Expr, ExprError, Var,
};
use crate::util::logspace;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InvariantError {
    #[error("basis must contain at least one function")]
    EmptyBasis,
    #[error("basis function `{0}` depends on t; only spatial subspaces are supported")]
    TimeDependentBasis(String),
    #[error("{m} sample points cannot resolve a {k}-dimensional basis (need at least 2k)")]
    TooFewSamples { m: usize, k: usize },
    #[error(
        "basis is numerically dependent on the sample: smallest singular value {sigma_min:.3e}"
    )]
    IllConditioned { sigma_min: f64 },
    #[error("operator `{src}` uses unknown parameters {params:?}; only `u` is allowed")]
    ForeignParams { src: String, params: Vec<String> },
    #[error("least-squares solve failed: {0}")]
    FitFailed(&'static str),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// A candidate invariant subspace plus the sampling protocol used to test
/// it.
#[derive(Debug, Clone)]
pub struct SubspaceSpec {
    pub basis: Vec<Expr>,
    pub sample_points: Vec<f64>,
    pub trials: usize,
    pub coeff_range: (f64, f64),
}

impl SubspaceSpec {
    /// Default protocol: `8k` sample points log-uniform on `[0.1, 10]`,
    /// 20 trials, coefficients uniform in `[-2, 2]`.
    pub fn with_defaults(basis: Vec<Expr>) -> Self {
        let k = basis.len();
        SubspaceSpec {
            basis,
            sample_points: logspace(0.1, 10.0, 8 * k.max(1)),
            trials: 20,
            coeff_range: (-2.0, 2.0),
        }
    }
}

/// The span of `ln sinh(eta)`, `ln tanh(eta/2)`, and `1`, ordered so the
/// first coefficient multiplies the only basis function with a nonzero
/// Laplacian.
pub fn w3_basis() -> Vec<Expr> {
    vec![
        Expr::log_sinh_eta(),
        Expr::log_tanh_half_eta(),
        Expr::num(1.0),
    ]
}

/// Outcome of a randomized invariance check.
#[derive(Debug, Clone)]
pub struct InvarianceVerdict {
    pub operator: String,
    pub basis: Vec<String>,
    /// True when every trial's relative fit residual stayed below the
    /// threshold ("invariant to tolerance").
    pub invariant: bool,
    pub worst_relative_residual: f64,
    pub per_trial: Vec<f64>,
    /// The induced map on coefficients, one `(c, a)` pair per trial.
    pub coefficient_maps: Vec<(Vec<f64>, Vec<f64>)>,
    pub threshold: f64,
    pub smallest_singular_value: f64,
    pub sample_count: usize,
}

impl InvarianceVerdict {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "operator": self.operator,
            "basis": self.basis,
            "sample_points": self.sample_count,
            "trials": self.per_trial.len(),
            "threshold": self.threshold,
            "verdict": if self.invariant { "invariant to tolerance" } else { "not invariant" },
            "worst_residual": self.worst_relative_residual,
            "smallest_singular_value": self.smallest_singular_value,
        })
    }
}

/// Precomputed least-squares context for one `(basis, sample)` pair: the
/// column-normalized sample matrix and its SVD.
struct FitContext {
    phi_normalized: DMatrix<f64>,
    svd: nalgebra::linalg::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
    column_norms: Vec<f64>,
    sigma_min: f64,
}

impl FitContext {
    fn build(sub: &SubspaceSpec) -> Result<FitContext, InvariantError> {
        let k = sub.basis.len();
        let m = sub.sample_points.len();
        if k == 0 {
            return Err(InvariantError::EmptyBasis);
        }
        if m < 2 * k {
            return Err(InvariantError::TooFewSamples { m, k });
        }
        for phi in &sub.basis {
            if phi.depends_on(Var::T) {
                return Err(InvariantError::TimeDependentBasis(phi.to_string()));
            }
        }
        let mut phi = DMatrix::zeros(m, k);
        for (j, basis_fn) in sub.basis.iter().enumerate() {
            for (i, &eta) in sub.sample_points.iter().enumerate() {
                phi[(i, j)] = eval_spatial(basis_fn, eta)?;
            }
        }
        // Log-type bases are mildly ill-conditioned; normalizing columns
        // keeps the singular-value gate meaningful across scales.
        let mut column_norms = vec![0.0f64; k];
        for (j, column_norm) in column_norms.iter_mut().enumerate() {
            let norm = phi.column(j).norm();
            *column_norm = norm;
            if norm > 0.0 {
                let mut col = phi.column_mut(j);
                col /= norm;
            }
        }
        let svd = phi.clone().svd(true, true);
        let sigma_min = svd.singular_values.iter().copied().fold(f64::MAX, f64::min);
        if !sigma_min.is_finite() || sigma_min <= 1e-8 {
            return Err(InvariantError::IllConditioned { sigma_min });
        }
        Ok(FitContext {
            phi_normalized: phi,
            svd,
            column_norms,
            sigma_min,
        })
    }

    /// Least-squares fit of `w` onto the basis sample. Returns the
    /// coefficients in the original (unnormalized) basis and the relative
    /// residual `|phi a - w| / max(1, |w|)`.
    fn fit(&self, w: &DVector<f64>) -> Result<(Vec<f64>, f64), InvariantError> {
        let a_normalized = self
            .svd
            .solve(w, 1e-14)
            .map_err(InvariantError::FitFailed)?;
        let residual = (&self.phi_normalized * &a_normalized - w).norm() / w.norm().max(1.0);
        let a = a_normalized
            .iter()
            .zip(&self.column_norms)
            .map(|(&an, &nn)| if nn > 0.0 { an / nn } else { 0.0 })
            .collect();
        Ok((a, residual))
    }
}

fn eval_spatial(e: &Expr, eta: f64) -> Result<f64, ExprError> {
    Ok(evaluate(
        e,
        EvalPoint::new(eta, 0.0)?,
        &Bindings::new(),
        EvalMode::Real,
    )?
    .re())
}

fn parse_spatial_operator(op_src: &str) -> Result<Expr, InvariantError> {
    let op = parse_operator(op_src, EvalMode::Real)?;
    let mut params = Vec::new();
    op.collect_params(&mut params);
    params.retain(|p| p != "u");
    if !params.is_empty() {
        return Err(InvariantError::ForeignParams {
            src: op_src.to_owned(),
            params,
        });
    }
    Ok(op)
}

/// Applies `F` to the combination `sum c_j phi_j` and samples the result.
fn operator_image(
    op: &Expr,
    sub: &SubspaceSpec,
    coeffs: &[f64],
) -> Result<DVector<f64>, InvariantError> {
    let field = Expr::add(
        coeffs
            .iter()
            .zip(&sub.basis)
            .map(|(&c, phi)| Expr::Mul(vec![Expr::num(c), phi.clone()]))
            .collect(),
    );
    let image = apply_operator(op, &field)?;
    let mut w = DVector::zeros(sub.sample_points.len());
    for (i, &eta) in sub.sample_points.iter().enumerate() {
        w[i] = eval_spatial(&image, eta)?;
    }
    Ok(w)
}

/// Randomized invariance check of the spatial operator `op_src` (grammar:
/// `u`, `lap(.)`, arithmetic) against the subspace `sub`.
///
/// Each trial draws coefficients, pushes the combination through the
/// operator, and fits the sampled image back onto the basis; the verdict is
/// "invariant" exactly when the worst relative residual stays below
/// `threshold`. Trials run in parallel; the coefficient stream depends only
/// on `seed`.
pub fn check_invariance(
    op_src: &str,
    sub: &SubspaceSpec,
    threshold: f64,
    seed: u64,
) -> Result<InvarianceVerdict, InvariantError> {
    let op = parse_spatial_operator(op_src)?;
    let ctx = FitContext::build(sub)?;
    let k = sub.basis.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<Vec<f64>> = (0..sub.trials)
        .map(|_| {
            (0..k)
                .map(|_| rng.random_range(sub.coeff_range.0..sub.coeff_range.1))
                .collect()
        })
        .collect();

    let outcomes: Vec<(Vec<f64>, Vec<f64>, f64)> = draws
        .into_par_iter()
        .map(|c| {
            let w = operator_image(&op, sub, &c)?;
            let (a, residual) = ctx.fit(&w)?;
            Ok((c, a, residual))
        })
        .collect::<Result<_, InvariantError>>()?;

    let worst = outcomes.iter().map(|o| o.2).fold(0.0f64, f64::max);
    Ok(InvarianceVerdict {
        operator: op_src.to_owned(),
        basis: sub.basis.iter().map(|b| b.to_string()).collect(),
        invariant: worst < threshold,
        worst_relative_residual: worst,
        per_trial: outcomes.iter().map(|o| o.2).collect(),
        coefficient_maps: outcomes.into_iter().map(|(c, a, _)| (c, a)).collect(),
        threshold,
        smallest_singular_value: ctx.sigma_min,
        sample_count: sub.sample_points.len(),
    })
}

/// The induced coefficient map `c -> a` for a single coefficient vector,
/// meaningful once `check_invariance` has returned yes for `(op, sub)`.
pub fn induced_coefficient_map(
    op_src: &str,
    sub: &SubspaceSpec,
    coeffs: &[f64],
) -> Result<Vec<f64>, InvariantError> {
    let op = parse_spatial_operator(op_src)?;
    let ctx = FitContext::build(sub)?;
    let w = operator_image(&op, sub, coeffs)?;
    Ok(ctx.fit(&w)?.0)
}

/// Worst relative deviation, over random draws, between the fitted map for
/// `u*lap(u)` on the standard three-dimensional log subspace and the closed
/// form `(c1^2, c1 c2, c1 c3)`.
pub fn quadratic_map_deviation(draws: usize, seed: u64) -> Result<f64, InvariantError> {
    let sub = SubspaceSpec::with_defaults(w3_basis());
    let op = parse_spatial_operator("u*lap(u)")?;
    let ctx = FitContext::build(&sub)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let c: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let w = operator_image(&op, &sub, &c)?;
        let (a, _) = ctx.fit(&w)?;
        let expected = [c[0] * c[0], c[0] * c[1], c[0] * c[2]];
        let scale = expected.iter().fold(1.0f64, |m, e| m.max(e.abs()));
        for (got, want) in a.iter().zip(expected) {
            worst = worst.max((got - want).abs() / scale);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quasilinear_operator_keeps_the_log_subspace() {
        let sub = SubspaceSpec::with_defaults(w3_basis());
        let verdict = check_invariance("u*lap(u)", &sub, 1e-7, 7).unwrap();
        assert!(verdict.invariant);
        assert!(
            verdict.worst_relative_residual < 1e-8,
            "worst {:.3e}",
            verdict.worst_relative_residual
        );
        assert_eq!(verdict.per_trial.len(), 20);
        assert_eq!(verdict.coefficient_maps.len(), 20);
    }

    #[test]
    fn constants_sit_in_the_laplacian_kernel() {
        let sub = SubspaceSpec::with_defaults(vec![Expr::num(1.0)]);
        let verdict = check_invariance("lap(u)", &sub, 1e-7, 0).unwrap();
        assert!(verdict.invariant);
        assert_eq!(verdict.worst_relative_residual, 0.0);
    }

    #[test]
    fn cubic_reaction_term_leaves_the_span() {
        let sub = SubspaceSpec::with_defaults(w3_basis());
        let verdict = check_invariance("lap(u) + u^3", &sub, 1e-7, 7).unwrap();
        assert!(!verdict.invariant);
        assert!(
            verdict.worst_relative_residual >= 1e-2,
            "worst {:.3e}",
            verdict.worst_relative_residual
        );

        // Tightening the sample does not rescue it.
        let tight = SubspaceSpec {
            sample_points: logspace(0.1, 10.0, 60),
            ..SubspaceSpec::with_defaults(w3_basis())
        };
        let verdict = check_invariance("lap(u) + u^3", &tight, 1e-7, 7).unwrap();
        assert!(!verdict.invariant);
        assert!(verdict.worst_relative_residual >= 1e-2);
    }

    #[test]
    fn refining_the_sample_keeps_the_positive_verdict() {
        let coarse = SubspaceSpec::with_defaults(w3_basis());
        let fine = SubspaceSpec {
            sample_points: logspace(0.1, 10.0, 48),
            ..SubspaceSpec::with_defaults(w3_basis())
        };
        for sub in [coarse, fine] {
            let verdict = check_invariance("u*lap(u)", &sub, 1e-7, 11).unwrap();
            assert!(verdict.invariant);
        }
    }

    #[test]
    fn induced_map_matches_the_quadratic_closed_form() {
        let sub = SubspaceSpec::with_defaults(w3_basis());
        let a = induced_coefficient_map("u*lap(u)", &sub, &[1.0, 0.0, 0.0]).unwrap();
        assert!((a[0] - 1.0).abs() < 1e-10 && a[1].abs() < 1e-10 && a[2].abs() < 1e-10);

        let a = induced_coefficient_map("u*lap(u)", &sub, &[2.0, 3.0, 5.0]).unwrap();
        for (got, want) in a.iter().zip([4.0, 6.0, 10.0]) {
            assert!((got - want).abs() < 1e-8 * want, "got {got}, want {want}");
        }

        // Kernel combinations are annihilated outright.
        let a = induced_coefficient_map("u*lap(u)", &sub, &[0.0, 1.3, -0.4]).unwrap();
        assert!(a.iter().all(|x| x.abs() < 1e-10), "a = {a:?}");

        assert!(quadratic_map_deviation(100, 3).unwrap() < 1e-8);
    }

    #[test]
    fn verdict_is_stable_under_basis_rescaling() {
        let scales = [2.0, -0.5, 3.0];
        let scaled: Vec<Expr> = w3_basis()
            .into_iter()
            .zip(scales)
            .map(|(phi, s)| Expr::Mul(vec![Expr::num(s), phi]))
            .collect();
        let plain = SubspaceSpec::with_defaults(w3_basis());
        let rescaled = SubspaceSpec::with_defaults(scaled);

        let v1 = check_invariance("u*lap(u)", &plain, 1e-7, 5).unwrap();
        let v2 = check_invariance("u*lap(u)", &rescaled, 1e-7, 5).unwrap();
        assert_eq!(v1.invariant, v2.invariant);

        // Compensating the coefficients selects the identical field, so the
        // fitted images agree and the maps differ only by the scales.
        let c = [1.1, -0.7, 0.4];
        let compensated: Vec<f64> = c.iter().zip(scales).map(|(&ci, s)| ci / s).collect();
        let a1 = induced_coefficient_map("u*lap(u)", &plain, &c).unwrap();
        let a2 = induced_coefficient_map("u*lap(u)", &rescaled, &compensated).unwrap();
        for ((x, y), s) in a1.iter().zip(&a2).zip(scales) {
            assert!((x - y * s).abs() < 1e-10, "{x} vs {} (scale {s})", y * s);
        }
    }

    #[test]
    fn dependent_basis_trips_the_conditioning_gate() {
        let basis = vec![
            Expr::log_sinh_eta(),
            Expr::Mul(vec![Expr::num(2.0), Expr::log_sinh_eta()]),
        ];
        let sub = SubspaceSpec::with_defaults(basis);
        match check_invariance("lap(u)", &sub, 1e-7, 0) {
            Err(InvariantError::IllConditioned { sigma_min }) => {
                assert!(sigma_min < 1e-8);
            }
            other => panic!("expected conditioning failure, got {other:?}"),
        }
    }

    #[test]
    fn malformed_specs_are_rejected() {
        assert!(matches!(
            check_invariance("lap(u)", &SubspaceSpec::with_defaults(vec![]), 1e-7, 0),
            Err(InvariantError::EmptyBasis)
        ));

        let sub = SubspaceSpec {
            sample_points: vec![0.5, 1.0, 2.0],
            ..SubspaceSpec::with_defaults(w3_basis())
        };
        assert!(matches!(
            check_invariance("lap(u)", &sub, 1e-7, 0),
            Err(InvariantError::TooFewSamples { m: 3, k: 3 })
        ));

        let sub = SubspaceSpec::with_defaults(vec![Expr::Mul(vec![Expr::t(), Expr::eta()])]);
        assert!(matches!(
            check_invariance("lap(u)", &sub, 1e-7, 0),
            Err(InvariantError::TimeDependentBasis(_))
        ));

        let sub = SubspaceSpec::with_defaults(w3_basis());
        assert!(matches!(
            check_invariance("q*lap(u)", &sub, 1e-7, 0),
            Err(InvariantError::ForeignParams { .. })
        ));
    }

    #[test]
    fn verdict_serializes_the_cli_report_fields() {
        let sub = SubspaceSpec::with_defaults(w3_basis());
        let verdict = check_invariance("u*lap(u)", &sub, 1e-7, 0).unwrap();
        let j = verdict.to_json();
        assert_eq!(j["verdict"], "invariant to tolerance");
        assert_eq!(j["trials"], 20);
        assert_eq!(j["sample_points"], 24);
        assert!(j["worst_residual"].as_f64().unwrap() < 1e-7);
    }
}
