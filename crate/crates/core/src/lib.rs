//! Ground and excited states of the Schrödinger–Bopp–Podolsky system
//!
//! ```text
//!   −Δu + qφu − κ|u|^{p−2}u = ωu,      Δ²φ − Δφ = qu²      in Ω
//!   u = 0,  ∂φ/∂n = h₁,  ∂Δφ/∂n = h₂   on ∂Ω,   ∫u² = 1
//! ```
//!
//! with a non-constant coupling `q` on box domains. The potential is
//! eliminated through the reduction `φ = Φ(u) + χ + μ`, and the reduced
//! energy `J` is minimized on the constraint set
//! `M = {∫u² = 1, ∫qu² = α}` by retraction-based projected gradient descent.

pub mod config;
pub mod error;
pub mod functional;
pub mod grid;
pub mod linsolve;
pub mod manifold;
pub mod optimizer;
pub mod problem;
pub mod reduction;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{BoundaryData, Face, GridSpec, ScalarField, Side};
pub use problem::{CouplingSpec, FeasibilityClass, FeasibilityReport, Problem};
