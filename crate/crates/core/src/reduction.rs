//! The solution operator `L` of the zero-flux, zero-mean problem
//! `Δ²φ − Δφ = f − f̄` and the reduction map `Φ(u) = L(qu²)`.
//!
//! Both go through the factorization `Δ²−Δ = (Δ−I)Δ`: a Neumann Helmholtz
//! solve for `ψ = Δφ` followed by a zero-mean Neumann Poisson solve for `φ`.

use serde::Serialize;

use crate::error::Result;
use crate::grid::{BoundaryData, ScalarField};
use crate::linsolve::{solve_helmholtz_neumann, solve_poisson_neumann_zeromean, LinearSolveOptions};
use crate::problem::Problem;

/// A zero-mean potential together with its Laplacian.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialPair {
    pub phi: ScalarField,
    /// `Δφ` at solver accuracy; reused for every `(Δφ)²` quadrature.
    pub psi: ScalarField,
}

impl PotentialPair {
    /// `‖φ‖² = ∫ψ² + ∫|∇φ|²`
    pub fn norm_sq(&self) -> f64 {
        self.psi.inner(&self.psi) + self.phi.gradient_energy()
    }
}

/// Solves `Δ²φ − Δφ = f` with `∂φ/∂n = g1`, `∂Δφ/∂n = g2`, `∫φ = 0`.
///
/// With homogeneous data `f` is replaced by `f − f̄` (the operator `L`);
/// otherwise `f` is used as given and must satisfy `∫f = ∮g2 − ∮g1`.
pub fn solve_fourth_order_split(
    f: &ScalarField,
    g1: &BoundaryData,
    g2: &BoundaryData,
    opts: &LinearSolveOptions,
) -> Result<PotentialPair> {
    let rhs = if g1.is_zero() && g2.is_zero() {
        f.mean_projected()
    } else {
        f.clone()
    };
    let psi = solve_helmholtz_neumann(&rhs, g2, opts)?;
    let phi = solve_poisson_neumann_zeromean(&psi, g1, opts)?;
    Ok(PotentialPair { phi, psi })
}

/// `L(f)`: homogeneous Neumann data.
pub fn apply_l(f: &ScalarField, opts: &LinearSolveOptions) -> Result<PotentialPair> {
    let zero = BoundaryData::zeros(f.grid().clone());
    solve_fourth_order_split(f, &zero, &zero, opts)
}

/// `q·u²` node by node.
pub fn coupling_density(u: &ScalarField, problem: &Problem) -> ScalarField {
    problem.q.zip_map(u, |q, u| q * (u * u))
}

/// `Φ(u) = L(qu²)`. Depends on `u` only through `u²`, so `Φ(u)` and
/// `Φ(−u)` are bitwise identical.
pub fn phi_map(u: &ScalarField, problem: &Problem) -> Result<PotentialPair> {
    apply_l(&coupling_density(u, problem), &problem.solver)
}

/// Both sides of `∫(ΔΦ(u))² + ∫|∇Φ(u)|² = ∫qu²Φ(u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InteractionEnergy {
    /// `∫qu²φ`
    pub coupling: f64,
    /// `∫ψ²`
    pub biharm: f64,
    /// `∫|∇φ|²`
    pub grad: f64,
}

impl InteractionEnergy {
    /// `b(φ, φ) = ∫ψ² + ∫|∇φ|²`
    pub fn bilinear(&self) -> f64 {
        self.biharm + self.grad
    }

    /// `|b(φ,φ) − ∫qu²φ| / |∫qu²φ|`
    pub fn relative_gap(&self) -> f64 {
        (self.bilinear() - self.coupling).abs() / self.coupling.abs()
    }
}

pub fn interaction_energy(u: &ScalarField, pair: &PotentialPair, problem: &Problem) -> InteractionEnergy {
    InteractionEnergy {
        coupling: coupling_density(u, problem).inner(&pair.phi),
        biharm: pair.psi.inner(&pair.psi),
        grad: pair.phi.gradient_energy(),
    }
}
