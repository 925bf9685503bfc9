//! Mobile-immobile time-fractional diffusion.
//!
//! The forward model is
//!
//! ```text
//! ∂ₜu + q ∂ₜᵅu + 𝒜u = ρ(t) g(x)   in Ω × (0, T)
//! u = a                          at t = 0
//! u = 0                          on ∂Ω
//! ```
//!
//! with a Caputo derivative of order α ∈ (0, 1) and 𝒜 = −div(A∇·) + c.
//! Time is discretized with backward Euler plus the L1 scheme, space with
//! P1 finite elements on a structured triangulation of a rectangle. The
//! [`inversion`] module recovers g from noisy observations on a subdomain
//! ω with an adjoint gradient and Armijo line search; [`duhamel`] checks
//! the representation u = μ * v numerically.

pub mod duhamel;
pub mod error;
pub mod fem;
pub mod field;
pub mod fractime;
pub mod inversion;
pub mod solver;

pub use error::{Error, Result};
pub use field::{Field, SpaceTimeField};
