//! The two-field energy `F(u, φ)`, the reduced energy `J(u) = F(u, Φ(u))`,
//! its gradient, and the interpolation-ratio diagnostic.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{apply_laplacian_dirichlet, ScalarField};
use crate::linsolve::solve_poisson_dirichlet;
use crate::problem::Problem;
use crate::reduction::{interaction_energy, phi_map, PotentialPair};

/// Terms of the reduced energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    /// `½∫|∇u|²`
    pub dirichlet: f64,
    /// `¼∫(Δφ_u)²`
    pub biharm: f64,
    /// `¼∫|∇φ_u|²`
    pub grad_phi: f64,
    /// `½∫qχu²`
    pub coupling_chi: f64,
    /// `−(κ/p)∫|u|^p`
    pub nonlinear: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum GradientMetric {
    L2,
    #[default]
    SobolevH10,
}

/// `|u|^{p−2}u`, with the value 0 at `u = 0`.
pub(crate) fn odd_power(u: f64, p: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        u.abs().powf(p - 2.0) * u
    }
}

fn power_integral(u: &ScalarField, p: f64) -> f64 {
    u.map(|v| v.abs().powf(p)).integrate()
}

/// `F(u, φ)` with `pair.psi` standing in for `Δφ`.
pub fn eval_f(u: &ScalarField, pair: &PotentialPair, problem: &Problem) -> f64 {
    let vol = problem.grid.volume();
    let u2 = u.mul(u);
    let potential = pair.phi.add(&problem.chi);
    0.5 * u.gradient_energy() + 0.5 * problem.q.mul(&potential).inner(&u2)
        - problem.kappa / problem.p * power_integral(u, problem.p)
        - 0.25 * pair.psi.inner(&pair.psi)
        - 0.25 * pair.phi.gradient_energy()
        - problem.alpha / (2.0 * vol) * pair.phi.integrate()
}

/// Reduced energy terms given `pair = Φ(u)`.
pub fn energy_breakdown(u: &ScalarField, pair: &PotentialPair, problem: &Problem) -> EnergyBreakdown {
    let inter = interaction_energy(u, pair, problem);
    let dirichlet = 0.5 * u.gradient_energy();
    let biharm = 0.25 * inter.biharm;
    let grad_phi = 0.25 * inter.grad;
    let coupling_chi = 0.5 * problem.q.mul(&problem.chi).inner(&u.mul(u));
    let nonlinear = -problem.kappa / problem.p * power_integral(u, problem.p);
    EnergyBreakdown {
        dirichlet,
        biharm,
        grad_phi,
        coupling_chi,
        nonlinear,
        total: dirichlet + biharm + grad_phi + coupling_chi + nonlinear,
    }
}

/// `J(u)` together with its terms and `Φ(u)`.
pub fn eval_j(u: &ScalarField, problem: &Problem) -> Result<(f64, EnergyBreakdown, PotentialPair)> {
    let pair = phi_map(u, problem)?;
    let e = energy_breakdown(u, &pair, problem);
    Ok((e.total, e, pair))
}

/// Strong-form `L²` gradient `−Δu + q(φ_u + χ)u − κ|u|^{p−2}u` on interior
/// nodes, zero on the boundary.
pub fn strong_gradient(u: &ScalarField, pair: &PotentialPair, problem: &Problem) -> Result<ScalarField> {
    let lap = apply_laplacian_dirichlet(u)?;
    let grid = &problem.grid;
    let (kappa, p) = (problem.kappa, problem.p);
    let values = (0..u.len())
        .map(|i| {
            if grid.is_boundary(i) {
                return 0.0;
            }
            let ui = u.values()[i];
            let pot = pair.phi.values()[i] + problem.chi.values()[i];
            -lap.values()[i] + problem.q.values()[i] * pot * ui - kappa * odd_power(ui, p)
        })
        .collect();
    Ok(ScalarField::from_vec(grid.clone(), values))
}

/// Riesz representer of `J′(u)` in the chosen metric.
pub fn grad_j(u: &ScalarField, problem: &Problem, metric: GradientMetric) -> Result<ScalarField> {
    let pair = phi_map(u, problem)?;
    let g = strong_gradient(u, &pair, problem)?;
    to_metric(&g, problem, metric)
}

/// Maps an `L²` gradient to the metric's representer.
pub fn to_metric(g: &ScalarField, problem: &Problem, metric: GradientMetric) -> Result<ScalarField> {
    match metric {
        GradientMetric::L2 => Ok(g.clone()),
        GradientMetric::SobolevH10 => solve_poisson_dirichlet(g, &problem.solver),
    }
}

/// Exponent window `(p−2, p − d(p−2)/2)` for `r` in the interpolation
/// inequality; in three dimensions the upper end is `3(1 − p/6)`.
pub fn interpolation_window(p: f64, dim: usize) -> (f64, f64) {
    (p - 2.0, p - dim as f64 * (p - 2.0) / 2.0)
}

/// `‖u‖_p^p / (‖∇u‖₂^{p−r} ‖u‖₂^r)`, homogeneous of degree zero.
pub fn gn_ratio(u: &ScalarField, problem: &Problem, r: f64) -> Result<f64> {
    if u.max_abs() == 0.0 {
        return Err(Error::ZeroField);
    }
    let (lo, hi) = interpolation_window(problem.p, problem.grid.dim());
    if !(lo < r && r < hi) {
        log::debug!("r = {r} outside the interpolation window ({lo}, {hi})");
    }
    let p = problem.p;
    let lp = power_integral(u, p);
    let grad = u.gradient_energy().sqrt();
    let l2 = u.norm_l2();
    Ok(lp / (grad.powf(p - r) * l2.powf(r)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use std::f64::consts::PI;

    fn free_problem(n: usize) -> Problem {
        let g = GridSpec::cube(1, 1.0, n).unwrap();
        Problem::homogeneous(ScalarField::zeros(g), 0.0, 3.0).unwrap()
    }

    #[test]
    fn zero_field_energies() {
        let pb = free_problem(33);
        let u = ScalarField::zeros(pb.grid.clone());
        let (j, _, pair) = eval_j(&u, &pb).unwrap();
        assert_eq!(j, 0.0);
        assert_eq!(eval_f(&u, &pair, &pb), 0.0);
    }

    #[test]
    fn dirichlet_energy_of_normalized_sine() {
        let pb = free_problem(257);
        let u = ScalarField::from_fn(pb.grid.clone(), |x| 2f64.sqrt() * (PI * x[0]).sin()).with_zero_boundary();
        let (j, e, _) = eval_j(&u, &pb).unwrap();
        assert!((j - PI * PI / 2.0).abs() < 1e-3);
        assert_eq!(e.biharm, 0.0);
        let pair = phi_map(&u, &pb).unwrap();
        assert!((eval_f(&u, &pair, &pb) - j).abs() < 1e-12);
    }

    #[test]
    fn l2_gradient_of_sine() {
        let pb = free_problem(129);
        let u = ScalarField::from_fn(pb.grid.clone(), |x| (PI * x[0]).sin()).with_zero_boundary();
        let g = grad_j(&u, &pb, GradientMetric::L2).unwrap();
        let e = g.sub(&u.scale(PI * PI)).max_abs();
        assert!(e < PI.powi(4) / 12.0 / 128f64.powi(2) * 1.01, "{e}");
    }

    #[test]
    fn odd_power_limit() {
        assert_eq!(odd_power(0.0, 2.5), 0.0);
        assert_eq!(odd_power(-2.0, 3.0), -4.0);
    }

    #[test]
    fn window_matches_three_dimensional_form() {
        let (lo, hi) = interpolation_window(3.0, 3);
        assert_eq!(lo, 1.0);
        assert!((hi - 3.0 * (1.0 - 3.0 / 6.0)).abs() < 1e-15);
    }

    #[test]
    fn gn_ratio_zero_field() {
        let pb = free_problem(17);
        assert_eq!(gn_ratio(&ScalarField::zeros(pb.grid.clone()), &pb, 1.4), Err(Error::ZeroField));
    }
}
