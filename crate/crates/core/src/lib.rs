//! Numerical laboratory for long-horizon nonlinear optimal control.
//!
//! The crate solves tracking problems
//!
//! ```text
//! minimize  φ(y(T)) + ∫₀ᵀ ‖y(t) − ȳ‖² + ‖u(t) − ū‖² dt
//! subject to ẏ = f0(y) + Σ_j u_j f_j(y),  y(0) = y⁰
//! ```
//!
//! around a steady pair `f(ȳ, ū) = 0`, builds explicit suboptimal
//! "steer then hold" controls, and measures how closely the optimal
//! trajectories stay near `ȳ` as `T` grows: two-sided exponential envelopes,
//! one-sided stabilization, control decay and uniform cost bounds.
//!
//! Module map:
//!
//! - [`dynamics`]: systems, control signals, RK4 / forward Euler integration.
//! - [`ocp`]: functionals, discrete adjoint gradients, descent solvers,
//!   fixed-endpoint problems by penalty continuation.
//! - [`quasi_turnpike`]: steering, Gramian oracle, cost-estimate probes,
//!   steer–hold controls, time rescaling.
//! - [`diagnostics`]: crossing times, envelope fits, verdicts, reports.
//! - [`pde`]: 1-D semilinear heat and wave equations by the method of lines.
//! - [`cli`]: config-driven experiment runner behind the `turnpike` binary.

// NaN-rejecting checks are written as `!(x > 0.0)`; index loops mirror the
// formulas in the numerics.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod classify;
pub mod cli;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod ocp;
pub mod pde;
pub mod quasi_turnpike;

pub use error::{Error, Result};
