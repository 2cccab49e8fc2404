//! Solvers and diagnostics for the nonlinear operator equation
//!
//! ```text
//! iħ dK/dt = -K H - B² (K*)⁻¹
//! ```
//!
//! on fixed and moving domains. The fixed-domain solution factors as
//! `K(t) = R V(t) W(t)` with a conserved radial part `R = sqrt(K₀K₀*)`, a
//! field-driven unitary `V` and a Schrödinger-driven unitary `W`.

pub mod diagnostics;
pub mod error;
pub mod export;
pub mod fixed;
pub mod linalg;
pub mod moving;
pub mod random;
pub mod scenario;
pub mod verify;

pub use error::{Error, Result};
