//! Finite-difference initial-boundary-value solver on a truncated radial
//! grid, used to cross-validate the exact catalog families.
//!
//! The continuous problems pose no boundary conditions, so runs are
//! manufactured-solution style: initial data and Dirichlet traces at both
//! ends of the grid come from the exact family being tested, which isolates
//! scheme error. Three marchers are provided: explicit RK4 (with a
//! recomputed parabolic stability guard), damped-Newton implicit Euler, and
//! the L1 discretization for Caputo time derivatives (implicit in the new
//! level, explicit in the memory sum). Runs fail loudly on positivity or
//! maximum-principle violations instead of clipping; silent repair would
//! defeat the point of a verification tool.

use crate::expr::{evaluate, Bindings, EvalMode, EvalPoint, Expr, ExprError};
use crate::solutions::{SolutionError, SolutionFamily};
use crate::timeops::{CaputoHistory, TimeOpError, TimeOperator};
use num_complex::Complex64;
use std::time::Instant;
use thiserror::Error;

/// Explicit-step stability factor: `dt <= CFL_FACTOR h^2 / D` with `D` the
/// linearized diffusivity. RK4's real-axis stability interval allows up to
/// about 0.69 for the sharpest grid mode; 0.6 keeps a margin while still
/// admitting the reference blow-up run.
const CFL_FACTOR: f64 = 0.6;

/// Nodes of `u^n`'s base below this abort a porous-medium run.
const POSITIVITY_FLOOR: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("grid needs at least 8 nodes, got {0}")]
    GridTooSmall(usize),
    #[error("grid interval [{eta_min}, {eta_max}] is not an admissible radial range")]
    BadInterval { eta_min: f64, eta_max: f64 },
    #[error("grid [{eta_min}, {eta_max}] leaves the family's validity region [{lo}, {hi}]")]
    OutsideValidity {
        eta_min: f64,
        eta_max: f64,
        lo: f64,
        hi: f64,
    },
    #[error("field has {got} values but the grid has {expected} nodes")]
    SizeMismatch { expected: usize, got: usize },
    #[error("time step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("final time must be nonnegative and finite, got {0}")]
    InvalidFinalTime(f64),
    #[error("run to t = {t_end} crosses the family's blow-up horizon t0 = {horizon}")]
    BeyondHorizon { t_end: f64, horizon: f64 },
    #[error("equation `{0}` is outside solver scope")]
    UnsupportedOperator(String),
    #[error("scheme {scheme:?} cannot integrate this problem: {reason}")]
    UnsupportedScheme { scheme: Scheme, reason: String },
    #[error("explicit stability violated at t = {t:.6}: dt = {dt:.3e} exceeds limit {limit:.3e}")]
    CflViolation { t: f64, dt: f64, limit: f64 },
    #[error("positivity lost at node {node} (eta = {eta:.4}), t = {t:.6}: u = {value:.3e}")]
    PositivityLoss {
        node: usize,
        eta: f64,
        t: f64,
        value: f64,
    },
    #[error(
        "maximum principle violated at node {node}, t = {t:.6}: u = {value:.6e} > bound {bound:.6e}"
    )]
    MaxPrincipleViolation {
        node: usize,
        t: f64,
        value: f64,
        bound: f64,
    },
    #[error("Newton stalled at t = {t:.6} after {iters} iterations, residual {residual:.3e}")]
    NewtonDivergence { t: f64, iters: u32, residual: f64 },
    #[error("tridiagonal solve hit a zero pivot at t = {t:.6}")]
    SingularJacobian { t: f64 },
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    TimeOp(#[from] TimeOpError),
    #[error(transparent)]
    Solution(#[from] SolutionError),
}

/// Uniform grid on `[eta_min, eta_max]` with the conservative-form face
/// factors `sinh(eta_i +- h/2)` precomputed.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    pub eta_min: f64,
    pub eta_max: f64,
    pub h: f64,
    pub eta: Vec<f64>,
    s_center: Vec<f64>,
    s_plus: Vec<f64>,
    s_minus: Vec<f64>,
}

impl RadialGrid {
    pub fn new(eta_min: f64, eta_max: f64, nodes: usize) -> Result<RadialGrid, SolverError> {
        if !eta_min.is_finite() || eta_min <= 0.0 || !eta_max.is_finite() || eta_max <= eta_min {
            return Err(SolverError::BadInterval { eta_min, eta_max });
        }
        if nodes < 8 {
            return Err(SolverError::GridTooSmall(nodes));
        }
        let h = (eta_max - eta_min) / (nodes - 1) as f64;
        let eta: Vec<f64> = (0..nodes).map(|i| eta_min + i as f64 * h).collect();
        Ok(RadialGrid {
            eta_min,
            eta_max,
            h,
            s_center: eta.iter().map(|x| x.sinh()).collect(),
            s_plus: eta.iter().map(|x| (x + 0.5 * h).sinh()).collect(),
            s_minus: eta.iter().map(|x| (x - 0.5 * h).sinh()).collect(),
            eta,
        })
    }

    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }

    /// Stencil coefficients `(a_i, b_i, c_i)` of the discrete Laplacian row
    /// `a_i w_{i-1} + b_i w_i + c_i w_{i+1}` at an interior node.
    fn stencil(&self, i: usize) -> (f64, f64, f64) {
        let scale = 1.0 / (self.s_center[i] * self.h * self.h);
        (
            self.s_minus[i] * scale,
            -(self.s_plus[i] + self.s_minus[i]) * scale,
            self.s_plus[i] * scale,
        )
    }
}

/// Nodal value types the schemes can march: real fields and the complex
/// field of the forced-periodic equation.
pub trait FieldValue:
    Copy + Send + Sync + std::ops::Add<Output = Self> + std::ops::Sub<Output = Self> + 'static
{
    fn zero() -> Self;
    fn scale(self, k: f64) -> Self;
    fn magnitude(self) -> f64;
    fn powf(self, p: f64) -> Self;
    fn times(self, rhs: Self) -> Self;
    fn from_complex(z: Complex64) -> Self;
    fn to_complex(self) -> Complex64;
}

impl FieldValue for f64 {
    fn zero() -> f64 {
        0.0
    }
    fn scale(self, k: f64) -> f64 {
        self * k
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
    fn powf(self, p: f64) -> f64 {
        f64::powf(self, p)
    }
    fn times(self, rhs: f64) -> f64 {
        self * rhs
    }
    fn from_complex(z: Complex64) -> f64 {
        z.re
    }
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
}

impl FieldValue for Complex64 {
    fn zero() -> Complex64 {
        Complex64::new(0.0, 0.0)
    }
    fn scale(self, k: f64) -> Complex64 {
        self * k
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
    fn powf(self, p: f64) -> Complex64 {
        Complex64::powf(self, p)
    }
    fn times(self, rhs: Complex64) -> Complex64 {
        self * rhs
    }
    fn from_complex(z: Complex64) -> Complex64 {
        z
    }
    fn to_complex(self) -> Complex64 {
        self
    }
}

/// Conservative second-order discretization of
/// `(1/sinh eta) d/deta (sinh eta d/deta w)`. Boundary rows are
/// Dirichlet-driven and return zero.
pub fn discrete_laplacian<T: FieldValue>(
    grid: &RadialGrid,
    w: &[T],
) -> Result<Vec<T>, SolverError> {
    let n = grid.len();
    if w.len() != n {
        return Err(SolverError::SizeMismatch {
            expected: n,
            got: w.len(),
        });
    }
    let mut out = vec![T::zero(); n];
    let inv_h2 = 1.0 / (grid.h * grid.h);
    for i in 1..n - 1 {
        let flux =
            (w[i + 1] - w[i]).scale(grid.s_plus[i]) - (w[i] - w[i - 1]).scale(grid.s_minus[i]);
        out[i] = flux.scale(inv_h2 / grid.s_center[i]);
    }
    Ok(out)
}

/// The three evolution equations in solver scope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EquationKind {
    /// `O_t u = lap(u^n) - u` with a classical or Caputo time derivative.
    PorousDecay { n: f64 },
    /// `u_t = u lap(u)`.
    Quasilinear,
    /// `u_t = lap(u^n) + lambda u`, complex-valued.
    PeriodicForced { n: f64, lambda: Complex64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    ExplicitRk4,
    ImplicitEuler,
    FractionalL1,
}

/// A family, the equation it satisfies, and a grid to march it on.
#[derive(Debug, Clone)]
pub struct EvolutionProblem {
    pub equation: EquationKind,
    pub time: TimeOperator,
    pub family: SolutionFamily,
    pub grid: RadialGrid,
}

impl EvolutionProblem {
    /// Classifies the family's equation and checks the grid sits inside its
    /// validity region. Laguerre-operator problems are out of scope: the
    /// `t ln t` singularity at the initial time leaves no well-defined IBVP
    /// to march, so those families are checked by residual only.
    pub fn from_family(
        family: &SolutionFamily,
        grid: RadialGrid,
    ) -> Result<EvolutionProblem, SolverError> {
        let time = family.equation.time.clone();
        let need_n = || {
            family.params.get("n").copied().ok_or_else(|| {
                SolverError::UnsupportedOperator(format!(
                    "{} (missing exponent parameter)",
                    family.equation.describe()
                ))
            })
        };
        let equation = match (&time, family.equation.spatial_src.as_str()) {
            (TimeOperator::Classical | TimeOperator::Caputo { .. }, "lap(u^n) - u") => {
                EquationKind::PorousDecay { n: need_n()? }
            }
            (TimeOperator::Classical, "u*lap(u)") => EquationKind::Quasilinear,
            (TimeOperator::ShiftedClassical { lambda }, "lap(u^n)") => {
                EquationKind::PeriodicForced {
                    n: need_n()?,
                    lambda: *lambda,
                }
            }
            _ => {
                return Err(SolverError::UnsupportedOperator(family.equation.describe()));
            }
        };
        let v = &family.validity;
        if !(grid.eta_min > v.eta_lo && grid.eta_max < v.eta_hi) {
            return Err(SolverError::OutsideValidity {
                eta_min: grid.eta_min,
                eta_max: grid.eta_max,
                lo: v.eta_lo,
                hi: v.eta_hi,
            });
        }
        Ok(EvolutionProblem {
            equation,
            time,
            family: family.clone(),
            grid,
        })
    }
}

/// Evaluates a separated exact family on the grid without re-walking the
/// spatial expressions at every time: spatial factors are sampled once and
/// only the temporal coefficients are evaluated per query.
pub struct ExactSampler {
    temporal: Vec<Expr>,
    spatial_samples: Vec<Vec<Complex64>>,
    mode: EvalMode,
    nodes: usize,
}

impl ExactSampler {
    pub fn new(family: &SolutionFamily, grid: &RadialGrid) -> Result<ExactSampler, SolverError> {
        let mode = family.mode();
        let mut temporal = Vec::new();
        let mut spatial_samples = Vec::new();
        for (f, g) in &family.terms {
            let mut row = Vec::with_capacity(grid.len());
            for &eta in &grid.eta {
                row.push(
                    evaluate(g, EvalPoint::new(eta, 0.0)?, &Bindings::new(), mode)?.as_complex(),
                );
            }
            temporal.push(f.clone());
            spatial_samples.push(row);
        }
        Ok(ExactSampler {
            temporal,
            spatial_samples,
            mode,
            nodes: grid.len(),
        })
    }

    fn coeffs(&self, t: f64) -> Result<Vec<Complex64>, SolverError> {
        self.temporal
            .iter()
            .map(|f| {
                Ok(evaluate(f, EvalPoint::new(1.0, t)?, &Bindings::new(), self.mode)?.as_complex())
            })
            .collect()
    }

    /// The exact field on every node at time `t`.
    pub fn sample(&self, t: f64) -> Result<Vec<Complex64>, SolverError> {
        let coeffs = self.coeffs(t)?;
        let mut out = vec![Complex64::new(0.0, 0.0); self.nodes];
        for (c, row) in coeffs.iter().zip(&self.spatial_samples) {
            for (o, s) in out.iter_mut().zip(row) {
                *o += c * s;
            }
        }
        Ok(out)
    }

    /// Dirichlet traces at the two grid ends at time `t`.
    pub fn boundary(&self, t: f64) -> Result<(Complex64, Complex64), SolverError> {
        let coeffs = self.coeffs(t)?;
        let mut lo = Complex64::new(0.0, 0.0);
        let mut hi = Complex64::new(0.0, 0.0);
        for (c, row) in coeffs.iter().zip(&self.spatial_samples) {
            lo += c * row[0];
            hi += c * row[row.len() - 1];
        }
        Ok((lo, hi))
    }
}

#[derive(Debug, Clone)]
pub struct RunSpec {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    /// Times at which to record snapshots; each is matched to the nearest
    /// step within dt/2.
    pub snapshot_times: Vec<f64>,
}

/// Field and exact reference at one recorded time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub u: Vec<Complex64>,
    pub exact: Vec<Complex64>,
}

impl Snapshot {
    pub fn abs_err(&self) -> Vec<f64> {
        self.u
            .iter()
            .zip(&self.exact)
            .map(|(a, b)| (a - b).norm())
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub snapshots: Vec<Snapshot>,
    pub final_t: f64,
    pub final_u: Vec<Complex64>,
    pub final_exact: Vec<Complex64>,
    /// Max-norm error against the generating family at the final time.
    pub linf_error: f64,
    /// Grid-weighted L2 error `sqrt(h sum |e_i|^2)` at the final time.
    pub l2_error: f64,
    pub steps: usize,
    /// Deterministic operation count (node visits in right-hand sides,
    /// Newton iterations, and fractional memory traversals).
    pub work: u64,
    /// Wall-clock seconds for the march; not part of any serialized
    /// artifact because it would break run-to-run byte identity.
    pub wall_seconds: f64,
}

fn rhs<T: FieldValue>(
    eq: &EquationKind,
    grid: &RadialGrid,
    v: &[T],
) -> Result<Vec<T>, SolverError> {
    match *eq {
        EquationKind::PorousDecay { n } => {
            let vn: Vec<T> = v.iter().map(|x| x.powf(n)).collect();
            let mut out = discrete_laplacian(grid, &vn)?;
            for i in 1..v.len() - 1 {
                out[i] = out[i] - v[i];
            }
            Ok(out)
        }
        EquationKind::Quasilinear => {
            let lap = discrete_laplacian(grid, v)?;
            Ok(v.iter().zip(&lap).map(|(a, b)| a.times(*b)).collect())
        }
        EquationKind::PeriodicForced { n, lambda } => {
            let vn: Vec<T> = v.iter().map(|x| x.powf(n)).collect();
            let mut out = discrete_laplacian(grid, &vn)?;
            for i in 1..v.len() - 1 {
                out[i] = out[i] + v[i].times(T::from_complex(lambda));
            }
            Ok(out)
        }
    }
}

/// Largest linearized diffusivity of the spatial operator on the current
/// state, used by the explicit stability guard.
fn diffusivity<T: FieldValue>(eq: &EquationKind, v: &[T]) -> f64 {
    match *eq {
        EquationKind::PorousDecay { n } | EquationKind::PeriodicForced { n, .. } => v
            .iter()
            .map(|x| n * x.magnitude().powf(n - 1.0))
            .fold(0.0, f64::max),
        EquationKind::Quasilinear => v.iter().map(|x| x.magnitude()).fold(0.0, f64::max),
    }
}

fn set_boundaries<T: FieldValue>(
    v: &mut [T],
    sampler: &ExactSampler,
    t: f64,
) -> Result<(), SolverError> {
    let (lo, hi) = sampler.boundary(t)?;
    v[0] = T::from_complex(lo);
    let last = v.len() - 1;
    v[last] = T::from_complex(hi);
    Ok(())
}

fn rk4_step<T: FieldValue>(
    eq: &EquationKind,
    grid: &RadialGrid,
    sampler: &ExactSampler,
    u: &[T],
    t: f64,
    dt: f64,
) -> Result<Vec<T>, SolverError> {
    let staged = |base: &[T], k: &[T], frac: f64, tt: f64| -> Result<Vec<T>, SolverError> {
        let mut y: Vec<T> = base
            .iter()
            .zip(k)
            .map(|(b, ki)| *b + ki.scale(frac * dt))
            .collect();
        set_boundaries(&mut y, sampler, tt)?;
        Ok(y)
    };
    let k1 = rhs(eq, grid, u)?;
    let y2 = staged(u, &k1, 0.5, t + 0.5 * dt)?;
    let k2 = rhs(eq, grid, &y2)?;
    let y3 = staged(u, &k2, 0.5, t + 0.5 * dt)?;
    let k3 = rhs(eq, grid, &y3)?;
    let y4 = staged(u, &k3, 1.0, t + dt)?;
    let k4 = rhs(eq, grid, &y4)?;
    let mut out: Vec<T> = u
        .iter()
        .enumerate()
        .map(|(i, &ui)| ui + (k1[i] + (k2[i] + k3[i]).scale(2.0) + k4[i]).scale(dt / 6.0))
        .collect();
    set_boundaries(&mut out, sampler, t + dt)?;
    Ok(out)
}

struct Tridiag {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

/// Thomas elimination; returns `None` on a vanishing pivot.
fn thomas(tri: &Tridiag, rhs: &[f64]) -> Option<Vec<f64>> {
    let n = rhs.len();
    let mut diag = tri.diag.clone();
    let mut b = rhs.to_vec();
    for i in 1..n {
        if diag[i - 1] == 0.0 {
            return None;
        }
        let m = tri.lower[i] / diag[i - 1];
        diag[i] -= m * tri.upper[i - 1];
        b[i] -= m * b[i - 1];
    }
    if diag[n - 1] == 0.0 {
        return None;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = b[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = (b[i] - tri.upper[i] * x[i + 1]) / diag[i];
    }
    Some(x)
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Stage residual of an implicit step as a function of the trial field.
type StageResidual<'a> = dyn Fn(&[f64]) -> Result<Vec<f64>, SolverError> + 'a;

/// Damped Newton iteration with the exact tridiagonal Jacobian. `residual`
/// and `jacobian` must return zero entries / identity rows at the pinned
/// boundary nodes.
fn newton_solve(
    mut v: Vec<f64>,
    residual: &StageResidual<'_>,
    jacobian: &dyn Fn(&[f64]) -> Tridiag,
    t: f64,
    tol_scale: f64,
) -> Result<(Vec<f64>, u32), SolverError> {
    let mut f = residual(&v)?;
    let mut fnorm = inf_norm(&f);
    for iter in 1..=50u32 {
        let tol = tol_scale * 1e-12 * inf_norm(&v).max(1.0);
        if fnorm <= tol {
            return Ok((v, iter - 1));
        }
        let jac = jacobian(&v);
        let delta = thomas(&jac, &f).ok_or(SolverError::SingularJacobian { t })?;
        let mut lambda = 1.0f64;
        let mut accepted = false;
        for _ in 0..=8 {
            let trial: Vec<f64> = v
                .iter()
                .zip(&delta)
                .map(|(vi, di)| vi - lambda * di)
                .collect();
            let trial_f = residual(&trial)?;
            let trial_norm = inf_norm(&trial_f);
            if trial_norm < fnorm {
                v = trial;
                f = trial_f;
                fnorm = trial_norm;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(SolverError::NewtonDivergence {
                t,
                iters: iter,
                residual: fnorm,
            });
        }
    }
    if fnorm <= tol_scale * 1e-12 * inf_norm(&v).max(1.0) {
        return Ok((v, 50));
    }
    Err(SolverError::NewtonDivergence {
        t,
        iters: 50,
        residual: fnorm,
    })
}

/// Jacobian of the spatial right-hand side (PorousDecay or Quasilinear),
/// scaled by `-weight` and shifted by `shift` on the diagonal:
/// `shift I - weight d(rhs)/dv`. Boundary rows are identity.
fn shifted_jacobian(
    eq: &EquationKind,
    grid: &RadialGrid,
    v: &[f64],
    weight: f64,
    shift: f64,
) -> Tridiag {
    let n = v.len();
    let mut tri = Tridiag {
        lower: vec![0.0; n],
        diag: vec![1.0; n],
        upper: vec![0.0; n],
    };
    match *eq {
        EquationKind::PorousDecay { n: p } => {
            for i in 1..n - 1 {
                let (a, b, c) = grid.stencil(i);
                tri.lower[i] = -weight * a * p * v[i - 1].powf(p - 1.0);
                tri.diag[i] = shift - weight * (b * p * v[i].powf(p - 1.0) - 1.0);
                tri.upper[i] = -weight * c * p * v[i + 1].powf(p - 1.0);
            }
        }
        EquationKind::Quasilinear => {
            for i in 1..n - 1 {
                let (a, b, c) = grid.stencil(i);
                let lap_i = a * v[i - 1] + b * v[i] + c * v[i + 1];
                tri.lower[i] = -weight * v[i] * a;
                tri.diag[i] = shift - weight * (lap_i + v[i] * b);
                tri.upper[i] = -weight * v[i] * c;
            }
        }
        EquationKind::PeriodicForced { .. } => {
            unreachable!("implicit schemes reject the complex equation before stepping")
        }
    }
    tri
}

struct SnapshotPlan {
    times: Vec<f64>,
    next: usize,
}

impl SnapshotPlan {
    fn new(requested: &[f64], t_end: f64) -> SnapshotPlan {
        let mut times: Vec<f64> = requested
            .iter()
            .copied()
            .filter(|&t| t.is_finite() && t >= 0.0 && t <= t_end * (1.0 + 1e-12) + 1e-300)
            .collect();
        times.sort_by(f64::total_cmp);
        SnapshotPlan { times, next: 0 }
    }

    /// Number of requested times matched by the step time `t` (within
    /// `half` on either side); the cursor advances past them.
    fn due(&mut self, t: f64, half: f64) -> usize {
        let mut hits = 0;
        while self.next < self.times.len() && self.times[self.next] <= t + half {
            self.next += 1;
            hits += 1;
        }
        hits
    }
}

struct GuardState {
    /// Maximum-principle bound for decaying porous runs.
    bound: f64,
    check_positivity: bool,
    check_max: bool,
}

impl GuardState {
    fn new(eq: &EquationKind, init: &[f64]) -> GuardState {
        let is_porous = matches!(eq, EquationKind::PorousDecay { .. });
        GuardState {
            bound: init.iter().fold(0.0, |m: f64, x| m.max(*x)),
            check_positivity: is_porous,
            check_max: is_porous,
        }
    }

    fn absorb_boundary(&mut self, lo: f64, hi: f64) {
        self.bound = self.bound.max(lo).max(hi);
    }

    fn check(&self, grid: &RadialGrid, u: &[f64], t: f64) -> Result<(), SolverError> {
        if self.check_positivity {
            for (i, &x) in u.iter().enumerate() {
                if x < POSITIVITY_FLOOR {
                    return Err(SolverError::PositivityLoss {
                        node: i,
                        eta: grid.eta[i],
                        t,
                        value: x,
                    });
                }
            }
        }
        if self.check_max {
            let tol = 1e-9 * self.bound.max(1.0);
            for (i, &x) in u.iter().enumerate() {
                if x > self.bound + tol {
                    return Err(SolverError::MaxPrincipleViolation {
                        node: i,
                        t,
                        value: x,
                        bound: self.bound,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Marches the problem to `spec.t_end` and reports snapshots, final-time
/// errors against the generating family, and a deterministic work count.
///
/// The step count is `round(t_end / dt)` (at least one) and the step
/// actually used is `t_end / steps`, so the final time is hit exactly.
pub fn run(problem: &EvolutionProblem, spec: &RunSpec) -> Result<RunResult, SolverError> {
    if !spec.dt.is_finite() || spec.dt <= 0.0 {
        return Err(SolverError::InvalidStep(spec.dt));
    }
    if !spec.t_end.is_finite() || spec.t_end < 0.0 {
        return Err(SolverError::InvalidFinalTime(spec.t_end));
    }
    if let Some(t0) = problem.family.validity.t_end {
        if spec.t_end >= t0 {
            return Err(SolverError::BeyondHorizon {
                t_end: spec.t_end,
                horizon: t0,
            });
        }
    }
    let is_caputo = matches!(problem.time, TimeOperator::Caputo { .. });
    match spec.scheme {
        Scheme::FractionalL1 => {
            if !is_caputo {
                return Err(SolverError::UnsupportedScheme {
                    scheme: spec.scheme,
                    reason: "the L1 memory sum discretizes a Caputo derivative only".to_owned(),
                });
            }
            if !matches!(problem.equation, EquationKind::PorousDecay { .. }) {
                return Err(SolverError::UnsupportedScheme {
                    scheme: spec.scheme,
                    reason: "no Caputo form of this equation is in scope".to_owned(),
                });
            }
        }
        Scheme::ExplicitRk4 | Scheme::ImplicitEuler => {
            if is_caputo {
                return Err(SolverError::UnsupportedScheme {
                    scheme: spec.scheme,
                    reason: "memoryless steppers cannot integrate a Caputo derivative".to_owned(),
                });
            }
            if spec.scheme == Scheme::ImplicitEuler
                && matches!(problem.equation, EquationKind::PeriodicForced { .. })
            {
                return Err(SolverError::UnsupportedScheme {
                    scheme: spec.scheme,
                    reason: "the Newton path is real-valued; use rk4 for the complex equation"
                        .to_owned(),
                });
            }
        }
    }

    let sampler = ExactSampler::new(&problem.family, &problem.grid)?;
    let steps = if spec.t_end == 0.0 {
        0
    } else {
        (spec.t_end / spec.dt).round().max(1.0) as usize
    };
    let dt = if steps == 0 {
        spec.dt
    } else {
        spec.t_end / steps as f64
    };

    let start = Instant::now();
    let (snapshots, final_u, work) = if problem.family.mode() == EvalMode::Complex {
        march(problem, spec, &sampler, steps, dt, Complex64::from_complex)?
    } else {
        march(problem, spec, &sampler, steps, dt, f64::from_complex)?
    };
    let wall_seconds = start.elapsed().as_secs_f64();

    let final_t = spec.t_end;
    let final_exact = sampler.sample(final_t)?;
    let mut linf = 0.0f64;
    let mut l2sq = 0.0f64;
    for (a, b) in final_u.iter().zip(&final_exact) {
        let e = (a - b).norm();
        linf = linf.max(e);
        l2sq += e * e;
    }
    Ok(RunResult {
        snapshots,
        final_t,
        final_u,
        final_exact,
        linf_error: linf,
        l2_error: (problem.grid.h * l2sq).sqrt(),
        steps,
        work,
        wall_seconds,
    })
}

/// The time loop, generic over the nodal value type. `_witness` only picks
/// the type; dispatch happened in `run`.
fn march<T: FieldValue>(
    problem: &EvolutionProblem,
    spec: &RunSpec,
    sampler: &ExactSampler,
    steps: usize,
    dt: f64,
    _witness: fn(Complex64) -> T,
) -> Result<(Vec<Snapshot>, Vec<Complex64>, u64), SolverError> {
    let grid = &problem.grid;
    let nodes = grid.len();
    let eq = &problem.equation;
    let mut u: Vec<T> = sampler
        .sample(0.0)?
        .into_iter()
        .map(T::from_complex)
        .collect();
    let real_view = |v: &[T]| -> Vec<f64> { v.iter().map(|x| x.to_complex().re).collect() };
    let mut guards = GuardState::new(eq, &real_view(&u));
    guards.check(grid, &real_view(&u), 0.0)?;

    let mut history = if spec.scheme == Scheme::FractionalL1 {
        let TimeOperator::Caputo { beta } = problem.time else {
            unreachable!("scheme gate checked in run")
        };
        Some(CaputoHistory::new(beta, dt, real_view(&u))?)
    } else {
        None
    };

    let mut plan = SnapshotPlan::new(&spec.snapshot_times, spec.t_end);
    let half = if steps == 0 { f64::INFINITY } else { 0.5 * dt };
    let mut snapshots = Vec::new();
    let mut record = |t: f64, u: &[T], plan: &mut SnapshotPlan| -> Result<(), SolverError> {
        if plan.due(t, half) > 0 {
            snapshots.push(Snapshot {
                t,
                u: u.iter().map(|x| x.to_complex()).collect(),
                exact: sampler.sample(t)?,
            });
        }
        Ok(())
    };
    record(0.0, &u, &mut plan)?;

    let mut work: u64 = 0;
    for step in 0..steps {
        let t = step as f64 * dt;
        let t_next = if step + 1 == steps {
            spec.t_end
        } else {
            (step + 1) as f64 * dt
        };
        match spec.scheme {
            Scheme::ExplicitRk4 => {
                let d = diffusivity(eq, &u);
                if d > 0.0 {
                    let limit = CFL_FACTOR * grid.h * grid.h / d;
                    if dt > limit {
                        return Err(SolverError::CflViolation { t, dt, limit });
                    }
                }
                u = rk4_step(eq, grid, sampler, &u, t, dt)?;
                work += 4 * nodes as u64;
            }
            Scheme::ImplicitEuler | Scheme::FractionalL1 => {
                let v_real = step_implicit_real(
                    problem,
                    sampler,
                    &real_view(&u),
                    history.as_mut(),
                    t_next,
                    dt,
                    &mut work,
                )?;
                u = v_real
                    .into_iter()
                    .map(|x| T::from_complex(Complex64::new(x, 0.0)))
                    .collect();
            }
        }
        let (lo, hi) = sampler.boundary(t_next)?;
        guards.absorb_boundary(lo.re, hi.re);
        guards.check(grid, &real_view(&u), t_next)?;
        if let Some(h) = history.as_mut() {
            h.push(real_view(&u));
        }
        record(t_next, &u, &mut plan)?;
    }

    Ok((snapshots, u.iter().map(|x| x.to_complex()).collect(), work))
}

/// One backward step of either real implicit scheme. For implicit Euler the
/// stage equation is `v - u - dt rhs(v) = 0`; for L1 it is
/// `mu (v - u + mem) - rhs(v) = 0` with the memory term frozen over the
/// Newton iteration (it does not depend on `v`).
fn step_implicit_real(
    problem: &EvolutionProblem,
    sampler: &ExactSampler,
    u: &[f64],
    history: Option<&mut CaputoHistory>,
    t_next: f64,
    dt: f64,
    work: &mut u64,
) -> Result<Vec<f64>, SolverError> {
    let grid = &problem.grid;
    let eq = &problem.equation;
    let nodes = grid.len();
    let (blo, bhi) = sampler.boundary(t_next)?;
    let mut v0 = u.to_vec();
    v0[0] = blo.re;
    v0[nodes - 1] = bhi.re;

    let interior_only = |mut f: Vec<f64>| {
        f[0] = 0.0;
        f[nodes - 1] = 0.0;
        f
    };

    let (solution, iters) = match history {
        None => {
            let base = u.to_vec();
            let residual = move |v: &[f64]| -> Result<Vec<f64>, SolverError> {
                let r = rhs(eq, grid, v)?;
                Ok(interior_only(
                    v.iter()
                        .zip(&base)
                        .zip(&r)
                        .map(|((vi, ui), ri)| vi - ui - dt * ri)
                        .collect(),
                ))
            };
            let jacobian = |v: &[f64]| shifted_jacobian(eq, grid, v, dt, 1.0);
            newton_solve(v0, &residual, &jacobian, t_next, 1.0)?
        }
        Some(history) => {
            let mu = history.mu();
            let mem = history.memory_term();
            *work += (history.len() as u64) * nodes as u64;
            let base = history.latest().to_vec();
            let residual = move |v: &[f64]| -> Result<Vec<f64>, SolverError> {
                let r = rhs(eq, grid, v)?;
                Ok(interior_only(
                    v.iter()
                        .zip(&base)
                        .zip(&mem)
                        .zip(&r)
                        .map(|(((vi, ui), mi), ri)| mu * (vi - ui + mi) - ri)
                        .collect(),
                ))
            };
            let jacobian = |v: &[f64]| shifted_jacobian(eq, grid, v, 1.0, mu);
            newton_solve(v0, &residual, &jacobian, t_next, mu.max(1.0))?
        }
    };
    *work += (iters as u64 + 1) * 2 * nodes as u64;
    Ok(solution)
}
