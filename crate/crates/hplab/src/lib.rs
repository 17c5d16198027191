//! Exact-solution laboratory for nonlinear diffusion on the Poincare half
//! plane.
//!
//! The crate is organized around one family of problems: radially symmetric
//! evolution equations `O_t u = F[u]` on the hyperbolic plane, where `O_t`
//! is a classical, Caputo-fractional, Laguerre, or shifted time operator and
//! `F` combines the radial hyperbolic Laplacian with power or quasilinear
//! nonlinearities. Closed-form solutions built from `ln tanh(eta/2)` and
//! `ln sinh(eta)` kernels are cataloged in [`solutions`], checked symbolically
//! in [`verify`], and reproduced numerically by the finite-difference schemes
//! in [`solver`].
//!
//! Module map:
//! - [`specfun`]: Mittag-Leffler function, the squared-factorial series
//!   `c0(t)`, and overflow-safe hyperbolic logarithms.
//! - [`expr`]: small symbolic expression engine (parser, evaluators,
//!   derivatives, simplifier, hyperbolic Laplacian).
//! - [`timeops`]: time operators, both symbolic tables and discrete schemes.
//! - [`solutions`]: exact solution families and the standard catalog.
//! - [`invariant`]: randomized invariant-subspace checker for nonlinear
//!   operators.
//! - [`solver`]: radial finite-difference schemes (RK4, implicit Euler,
//!   fractional L1).
//! - [`verify`]: residual reports, negative controls, and convergence-order
//!   fits.
//! - [`report`]: JSON/CSV serialization with atomic writes.
//! - [`cli`]: the `hplab` command line.

pub mod cli;
pub mod expr;
pub mod invariant;
pub mod quad;
pub mod report;
pub mod solutions;
pub mod solver;
pub mod specfun;
pub mod timeops;
mod util;
pub mod verify;
