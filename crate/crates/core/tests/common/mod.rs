#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sbp_core::linsolve::LinearSolveOptions;
use sbp_core::{BoundaryData, GridSpec, Problem, ScalarField};

/// `q = x₁` on the unit box with `h₂ = flux` on every face and `h₁ = 0`.
pub fn affine_problem(dim: usize, n: usize, kappa: f64, flux: f64) -> Problem {
    let g = GridSpec::cube(dim, 1.0, n).unwrap();
    Problem::new(
        ScalarField::from_fn(g.clone(), |x| x[0]),
        kappa,
        3.0,
        BoundaryData::zeros(g.clone()),
        BoundaryData::constant(g, flux),
        LinearSolveOptions::default(),
    )
    .unwrap()
}

/// The one-dimensional benchmark: `q = x`, `α = 0.5`, `κ = 1`, `p = 3`.
pub fn benchmark(n: usize) -> Problem {
    affine_problem(1, n, 1.0, 0.25)
}

/// Uniform nodal noise in `[−1, 1]`, zero on the boundary.
pub fn rough_field(grid: &Arc<GridSpec>, rng: &mut ChaCha8Rng) -> ScalarField {
    let values = (0..grid.node_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
    ScalarField::new(grid.clone(), values).unwrap().with_zero_boundary()
}

/// A random combination of the first few Dirichlet sine modes.
pub fn smooth_field(grid: &Arc<GridSpec>, rng: &mut ChaCha8Rng, modes: usize) -> ScalarField {
    let d = grid.dim();
    let coeffs: Vec<(Vec<usize>, f64)> = (0..modes)
        .map(|_| {
            let k = (0..d).map(|_| rng.random_range(1..=4)).collect();
            (k, rng.random_range(-1.0..1.0))
        })
        .collect();
    let lengths = grid.lengths().to_vec();
    ScalarField::from_fn(grid.clone(), |x| {
        coeffs
            .iter()
            .map(|(k, c)| c * (0..d).map(|a| (k[a] as f64 * PI * x[a] / lengths[a]).sin()).product::<f64>())
            .sum()
    })
    .with_zero_boundary()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
