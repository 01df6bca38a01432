//! Numerical laboratory for the double-power nonlinear Schrödinger equation
//!
//! ```text
//! i ∂ₜu + Δu − |u|^{p−1}u + |u|^{q−1}u = 0,   1 < p < q < 2* − 1,
//! ```
//!
//! covering radial ground states (including the algebraically decaying
//! zero-frequency state), variational functionals, scaling-based
//! instability criteria and one-dimensional split-step evolution.

pub mod asymptotics;
pub mod cli;
pub mod error;
pub mod evolution;
pub mod functionals;
pub mod groundstate;
pub mod model;
pub mod numerics;
pub mod ode;
pub mod quadrature;
pub mod stability;

pub use error::{Error, Result};
pub use model::ModelParams;
