//! Numerical laboratory for the stochastic parabolic Ginzburg-Landau equation
//!
//! ```text
//! du = log(1/ε) (Δu + ε⁻²(1 - |u|²)u) dt + (F·∇)u ∘ dB_t
//! ```
//!
//! with a single scalar Brownian motion `B`: time stepping, a term-by-term
//! audit of the pathwise energy identity, vortex detection and tracking, and
//! the point-vortex (Kirchhoff–Onsager) comparison dynamics.

pub mod cli;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod forcing;
pub mod gl;
pub mod grid;
pub mod ledger;
pub mod point_vortex;
pub mod stepper;
pub mod theta;
pub mod vortex;

pub use error::{Error, Result};
