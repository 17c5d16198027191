//! Special functions behind the exact-solution catalog.
//!
//! Three items live here:
//! - the one-parameter Mittag-Leffler function `E_beta` on the real axis,
//!   which supplies temporal decay profiles for Caputo-fractional equations;
//! - `c0(t) = sum_k t^k / (k!)^2`, the eigenprofile of the Laguerre time
//!   operator `d/dt (t d/dt .)`;
//! - overflow-safe logarithms of `sinh` and `tanh(./2)`, the radial kernels
//!   every spatial profile is built from.
//!
//! `E_beta(z)` is evaluated by regime. Near the origin the defining power
//! series is summed in log space. On the negative axis the series suffers
//! catastrophic cancellation once `|z|^(1/beta)` is more than a few units,
//! so a mid-range band switches to an integral representation with a
//! positive integrand, and the far tail uses the algebraic asymptotic
//! expansion truncated at its smallest term. Adjacent regimes are tested to
//! agree to 1e-11 at the switch points.

use crate::quad;
use statrs::function::gamma::ln_gamma;
use std::f64::consts::{LN_2, PI};
use thiserror::Error;

/// Errors for the special-function layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecFunError {
    #[error("order beta = {0} outside (0, 1]")]
    BetaOutOfRange(f64),
    #[error("argument must be finite, got {0}")]
    NonFiniteArgument(f64),
    #[error("argument must be nonnegative, got {0}")]
    NegativeArgument(f64),
    #[error("argument must be positive, got {0}")]
    NonPositiveArgument(f64),
}

/// Largest `|z|` for which the power series of `E_beta` is summed directly.
/// Keeps the largest series term near `exp(2.3) ~ 10`, so alternating sums
/// lose at most two digits to cancellation.
fn series_limit(beta: f64) -> f64 {
    2.3f64.powf(beta)
}

/// Smallest `x` for which the asymptotic expansion of `E_beta(-x)` reaches
/// roughly `exp(-34)` truncation error at its smallest term.
fn asymptotic_limit(beta: f64) -> f64 {
    34.0f64.powf(beta)
}

/// One-parameter Mittag-Leffler function `E_beta(z)` for real `z` and
/// `beta` in `(0, 1]`.
///
/// `beta = 1` falls through to `exp`. Results on the negative axis are
/// finite, positive, and bounded by 1. Large positive arguments whose value
/// exceeds the f64 range return `+inf` rather than an error.
pub fn mittag_leffler(beta: f64, z: f64) -> Result<f64, SpecFunError> {
    if !beta.is_finite() || beta <= 0.0 || beta > 1.0 {
        return Err(SpecFunError::BetaOutOfRange(beta));
    }
    if !z.is_finite() {
        return Err(SpecFunError::NonFiniteArgument(z));
    }
    if beta == 1.0 {
        return Ok(z.exp());
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    if z > 0.0 {
        // All series terms are positive: no cancellation at any magnitude.
        // The sum is ~ exp(z^(1/beta))/beta, so detect overflow first.
        if z.powf(1.0 / beta) > 700.0 {
            return Ok(f64::INFINITY);
        }
        return Ok(ml_series(beta, z));
    }
    let x = -z;
    if x <= series_limit(beta) {
        Ok(ml_series(beta, z))
    } else if x >= asymptotic_limit(beta) {
        Ok(ml_asymptotic_neg(beta, x))
    } else {
        Ok(ml_integral_neg(beta, x))
    }
}

/// Power series `sum_k z^k / Gamma(beta k + 1)`, terms formed in log space
/// so that `|z| > 1` cannot overflow intermediate powers.
fn ml_series(beta: f64, z: f64) -> f64 {
    let ln_az = z.abs().ln();
    let negative = z < 0.0;
    let mut sum = 1.0;
    for k in 1..40_000u32 {
        let ln_term = f64::from(k) * ln_az - ln_gamma(beta * f64::from(k) + 1.0);
        let mut term = ln_term.exp();
        if negative && k % 2 == 1 {
            term = -term;
        }
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) && k > 3 {
            break;
        }
    }
    sum
}

/// Derivative series `E'_beta(z) = sum_{k>=1} k z^(k-1) / Gamma(beta k + 1)`.
///
/// Accurate in the same cancellation-safe region as `ml_series`; used by the
/// quadrature cross-check of the discrete Caputo operator, which only needs
/// moderate arguments.
pub(crate) fn mittag_leffler_deriv_series(beta: f64, z: f64) -> f64 {
    let mut sum = 1.0 / ln_gamma(beta + 1.0).exp();
    if z == 0.0 {
        return sum;
    }
    let ln_az = z.abs().ln();
    let negative = z < 0.0;
    for k in 2..40_000u32 {
        let kf = f64::from(k);
        let ln_term = kf.ln() + (kf - 1.0) * ln_az - ln_gamma(beta * kf + 1.0);
        let mut term = ln_term.exp();
        if negative && k % 2 == 0 {
            term = -term;
        }
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) && k > 3 {
            break;
        }
    }
    sum
}

/// Integral representation of `E_beta(-x)` for `x > 0`, `0 < beta < 1`:
///
/// `E_beta(-x) = sin(beta pi)/(beta pi) * I`,
/// `I = int_0^inf exp(-(s x)^(1/beta)) / (s^2 + 2 s cos(beta pi) + 1) ds`.
///
/// The integrand is positive, so the evaluation is cancellation-free. The
/// exponential kills everything past `(s x)^(1/beta) ~ 50`, and for beta
/// near 1 the denominator has a Lorentzian dip at `s = -cos(beta pi)` of
/// width `sin(beta pi)`; both features are seeded as knots.
fn ml_integral_neg(beta: f64, x: f64) -> f64 {
    let cosb = (beta * PI).cos();
    let sinb = (beta * PI).sin();
    let p = 1.0 / beta;
    let f = |s: f64| {
        if s <= 0.0 {
            return 1.0; // limit of the integrand at s = 0
        }
        (-((s * x).powf(p))).exp() / (s * (s + 2.0 * cosb) + 1.0)
    };
    let cutoff = 50.0f64.powf(beta) / x;
    let mut knots = vec![0.0, cutoff];
    for scale in [0.25, 1.0, 4.0] {
        knots.push(scale / x);
    }
    if cosb < 0.0 {
        let peak = -cosb;
        for offset in [-3.0, -1.0, 0.0, 1.0, 3.0] {
            knots.push(peak + offset * sinb);
        }
    }
    knots.retain(|&s| s > 0.0 && s < cutoff);
    knots.push(0.0);
    knots.push(cutoff);
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let prefactor = sinb / (beta * PI);
    // Absolute tolerance on E itself ~ 1e-14; translate to the raw integral.
    let tol = (1e-14 / prefactor).clamp(1e-15, 1e-9);
    let result = quad::adaptive(&f, &knots, tol, 48);
    prefactor * result.value
}

/// Asymptotic expansion on the far negative axis:
///
/// `E_beta(-x) ~ sum_{k>=1} (-1)^(k-1) x^(-k) / Gamma(1 - beta k)`,
///
/// truncated at the smallest term. The reciprocal gamma of the (often
/// negative) argument comes from the reflection formula,
/// `1/Gamma(1 - beta k) = Gamma(beta k) sin(pi beta k) / pi`, evaluated in
/// log space. The stopping rule tracks the envelope `x^-k Gamma(beta k)/pi`
/// rather than the term itself, because `sin(pi beta k)` passes through
/// zero at integer `beta k` and would end the sweep early.
fn ml_asymptotic_neg(beta: f64, x: f64) -> f64 {
    let ln_x = x.ln();
    let mut sum = 0.0;
    let mut prev_envelope = f64::INFINITY;
    for k in 1..200u32 {
        let bk = beta * f64::from(k);
        let ln_envelope = -f64::from(k) * ln_x + ln_gamma(bk) - PI.ln();
        let envelope = ln_envelope.exp();
        if envelope > prev_envelope {
            break;
        }
        prev_envelope = envelope;
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        sum += sign * envelope * (PI * bk).sin();
        if envelope < 1e-22 {
            break;
        }
    }
    sum
}

/// `c0(t) = sum_k t^k / (k!)^2`, the entire series with squared factorials.
///
/// Satisfies `d/dt (t d/dt c0)(t) = c0(t)`, and `c0(-t)` is the
/// eigenfunction with eigenvalue -1 used by decaying Laguerre profiles.
/// Requires `t >= 0`; the sign-flipped profile is reached through
/// expression-level composition, not by calling this with negative input.
pub fn c0(t: f64) -> Result<f64, SpecFunError> {
    if !t.is_finite() {
        return Err(SpecFunError::NonFiniteArgument(t));
    }
    if t < 0.0 {
        return Err(SpecFunError::NegativeArgument(t));
    }
    Ok(c0_series(t))
}

/// Series core of [`c0`], valid for any finite real argument. Negative
/// arguments alternate (`c0_series(-t)` equals the Bessel function
/// `J_0(2 sqrt t)`) but stay cancellation-safe for the moderate `|t|`
/// used by temporal profiles.
pub(crate) fn c0_series(t: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    for k in 1..=400u32 {
        term *= t / f64::from(k * k);
        sum += term;
        if term.abs() < 1e-16 * sum.abs().max(1e-300) && k >= 5 {
            break;
        }
    }
    sum
}

/// `ln tanh(eta/2)` without loss of significance for large `eta`.
///
/// For `eta > 1` uses `ln(1 - q) - ln(1 + q)` with `q = exp(-eta)`, keeping
/// the value distinguishable from zero (about `-2 exp(-eta)`) long after
/// `tanh(eta/2)` itself rounds to 1. Requires `eta > 0`.
pub fn log_tanh_half(eta: f64) -> Result<f64, SpecFunError> {
    if !eta.is_finite() {
        return Err(SpecFunError::NonFiniteArgument(eta));
    }
    if eta <= 0.0 {
        return Err(SpecFunError::NonPositiveArgument(eta));
    }
    if eta > 1.0 {
        let q = (-eta).exp();
        Ok((-q).ln_1p() - q.ln_1p())
    } else {
        Ok((0.5 * eta).tanh().ln())
    }
}

/// `ln sinh(eta)` without overflow for large `eta`.
///
/// For `eta > 1` uses `eta - ln 2 + ln(1 - exp(-2 eta))`, which stays finite
/// for arguments far past the point where `sinh(eta)` overflows. Requires
/// `eta > 0`.
pub fn log_sinh(eta: f64) -> Result<f64, SpecFunError> {
    if !eta.is_finite() {
        return Err(SpecFunError::NonFiniteArgument(eta));
    }
    if eta <= 0.0 {
        return Err(SpecFunError::NonPositiveArgument(eta));
    }
    if eta > 1.0 {
        Ok(eta - LN_2 + (-(-2.0 * eta).exp()).ln_1p())
    } else {
        Ok(eta.sinh().ln())
    }
}
