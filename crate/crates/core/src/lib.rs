//! Hamiltonian descent: first-order optimization driven by conformal
//! Hamiltonian dynamics x' = ∇k(p), p' = −∇f(x) − γp.
//!
//! The crate is organized around the pieces needed to run and certify the
//! methods:
//!
//! - [`kinetic`]: the power kinetic energy family k(p) = φ_a^A(‖p‖_q) with
//!   its scalar profile calculus (gradients, conjugates, inverse gradients,
//!   and the near-conjugate diagnostics ρ, C_{a,A}).
//! - [`objective`]: objective functions with exact minimizer metadata and
//!   growth certificates, plus the builtin test-function catalogue.
//! - [`integrators`]: the implicit and two explicit discretizations, along
//!   with classical momentum and gradient descent baselines.
//! - [`continuous`]: adaptive ODE simulation of the continuous dynamics and
//!   the lower-bound machinery (trapping regions, shooting, rate fits).
//! - [`analysis`]: assumption constants, step-size bounds, Lyapunov values,
//!   and the per-iteration rate envelopes.

pub mod analysis;
pub mod continuous;
pub mod integrators;
pub mod kinetic;
mod linalg;
pub mod objective;

pub use integrators::State;
