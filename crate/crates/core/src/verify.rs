//! Reconstruction of the original potential, residuals of the original
//! coupled system, grid-refinement studies and dense-matrix oracles.

use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functional::{odd_power, strong_gradient};
use crate::grid::{apply_laplacian_neumann, BoundaryData, Face, GridSpec, ScalarField, Side};
use crate::linsolve::{
    dense, solve_helmholtz_neumann, solve_poisson_dirichlet, solve_poisson_neumann_zeromean,
};
use crate::manifold::constraint_values;
use crate::optimizer::{excited_states, ground_state, OptimizeOptions, SolveResult};
use crate::problem::{Problem, ProblemSpec};
use crate::reduction::{phi_map, PotentialPair};

/// `φ = φ_u + χ + μ`.
pub fn reconstruct_phi(result: &SolveResult, problem: &Problem) -> ScalarField {
    reconstruct_from(&result.phi_u, result.mu, problem)
}

fn reconstruct_from(pair: &PotentialPair, mu: f64, problem: &Problem) -> ScalarField {
    pair.phi.add(&problem.chi).map(|v| v + mu)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualReport {
    /// `L²` residual of the Schrödinger equation on nodes at least two cells
    /// from the boundary, with a fourth-order reference Laplacian.
    pub eq1_residual: f64,
    /// Same equation with the solver's own stencil on all interior nodes.
    pub eq1_discrete: f64,
    /// Residual of the split fourth-order equation.
    pub eq2_residual: f64,
    /// Norm of the data `eq2_residual` is measured against.
    pub eq2_scale: f64,
    pub bc_u: f64,
    pub bc_phi_n: f64,
    pub bc_dphi_n: f64,
    pub normalization: f64,
    pub compatibility: f64,
    /// `|∫θ − ∮h₁|`
    pub theta_mean: f64,
}

impl ResidualReport {
    pub fn bc_max(&self) -> f64 {
        self.bc_u.max(self.bc_phi_n).max(self.bc_dphi_n)
    }
}

/// Second difference along `axis` with the fourth-order five-point stencil.
fn fourth_order_second(f: &[f64], flat: usize, stride: usize, h: f64) -> f64 {
    let at = |k: isize| f[(flat as isize + k * stride as isize) as usize];
    (-at(-2) + 16.0 * at(-1) - 30.0 * at(0) + 16.0 * at(1) - at(2)) / (12.0 * h * h)
}

fn eq1_pointwise(u: &ScalarField, phi: &ScalarField, omega: f64, i: usize, lap: f64, problem: &Problem) -> f64 {
    let ui = u.values()[i];
    -lap + problem.q.values()[i] * phi.values()[i] * ui - problem.kappa * odd_power(ui, problem.p) - omega * ui
}

fn weighted_norm(grid: &GridSpec, nodes: impl Iterator<Item = (usize, f64)>) -> f64 {
    let w = grid.weights();
    nodes.map(|(i, r)| w[i] * r * r).sum::<f64>().sqrt()
}

/// Outward normal derivative at the face nodes by a one-sided second-order
/// difference.
fn normal_derivative(f: &ScalarField, face: Face) -> Vec<f64> {
    let grid = f.grid();
    let s = grid.strides()[face.axis] as isize;
    let h = grid.spacing()[face.axis];
    let inward = match face.side {
        Side::Low => s,
        Side::High => -s,
    };
    grid.face_nodes(face)
        .into_iter()
        .map(|flat| {
            let at = |k: isize| f.values()[(flat as isize + k * inward) as usize];
            (3.0 * at(0) - 4.0 * at(1) + at(2)) / (2.0 * h)
        })
        .collect()
}

fn flux_mismatch(f: &ScalarField, target: &BoundaryData) -> f64 {
    let grid = f.grid();
    grid.faces()
        .flat_map(|face| {
            normal_derivative(f, face)
                .into_iter()
                .zip(target.face(face).to_vec())
                .map(|(d, g)| (d - g).abs())
                .collect::<Vec<_>>()
        })
        .fold(0.0, f64::max)
}

/// Residuals of the original system at `(u, ω, μ)` with `pair = Φ(u)`.
pub fn residuals_at(u: &ScalarField, omega: f64, mu: f64, pair: &PotentialPair, problem: &Problem) -> Result<ResidualReport> {
    let grid = problem.grid.clone();
    let phi = reconstruct_from(pair, mu, problem);
    let values = u.values();

    let deep = (0..grid.node_count()).filter(|&i| grid.is_deep_interior(i, 2));
    let eq1_residual = weighted_norm(
        &grid,
        deep.map(|i| {
            let lap: f64 = (0..grid.dim())
                .map(|a| fourth_order_second(values, i, grid.strides()[a], grid.spacing()[a]))
                .sum();
            (i, eq1_pointwise(u, &phi, omega, i, lap, problem))
        }),
    );

    let g = strong_gradient(u, pair, problem)?;
    let qu = problem.q.mul(u);
    let eq1_discrete = weighted_norm(
        &grid,
        (0..grid.node_count())
            .filter(|&i| !grid.is_boundary(i))
            .map(|i| (i, g.values()[i] - omega * values[i] + mu * qu.values()[i])),
    );

    let lap_phi = pair.psi.add(&problem.theta);
    let source = problem.q.mul(&u.mul(u));
    let helm = apply_laplacian_neumann(&lap_phi, &problem.h2).sub(&lap_phi).sub(&source);
    let pois = apply_laplacian_neumann(&pair.phi.add(&problem.chi), &problem.h1).sub(&lap_phi);
    let eq2_residual = (helm.inner(&helm) + pois.inner(&pois)).sqrt();
    let zero = ScalarField::zeros(grid.clone());
    let eq2_scale = source.norm_l2()
        + lap_phi.norm_l2()
        + apply_laplacian_neumann(&zero, &problem.h1).norm_l2()
        + apply_laplacian_neumann(&zero, &problem.h2).norm_l2();

    let c = constraint_values(u, problem);
    Ok(ResidualReport {
        eq1_residual,
        eq1_discrete,
        eq2_residual,
        eq2_scale,
        bc_u: u.max_abs_boundary(),
        bc_phi_n: flux_mismatch(&phi, &problem.h1),
        bc_dphi_n: flux_mismatch(&lap_phi, &problem.h2),
        normalization: c.g1.abs(),
        compatibility: c.g2.abs(),
        theta_mean: problem.theta_mean_gap(),
    })
}

/// Residuals of the original system at a solver result.
pub fn residual_original_system(result: &SolveResult, problem: &Problem) -> Result<ResidualReport> {
    residuals_at(&result.u, result.omega, result.mu, &result.phi_u, problem)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StudyMode {
    Ground,
    /// The `k`-th state (0-based) in energy order.
    Excited(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementRow {
    pub n: usize,
    pub h: f64,
    pub j: f64,
    pub omega: f64,
    pub mu: f64,
    pub residuals: ResidualReport,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementTable {
    pub rows: Vec<RefinementRow>,
    /// Observed orders of `eq1_residual` between consecutive grids.
    pub eq1_orders: Vec<f64>,
    pub eq2_orders: Vec<f64>,
    pub bc_orders: Vec<f64>,
    /// Orders of `J` from successive differences over three grids.
    pub j_orders: Vec<f64>,
    pub omega_orders: Vec<f64>,
}

fn pair_orders(rows: &[RefinementRow], pick: impl Fn(&RefinementRow) -> f64) -> Vec<f64> {
    rows.windows(2)
        .map(|w| (pick(&w[0]) / pick(&w[1])).ln() / (w[0].h / w[1].h).ln())
        .collect()
}

fn difference_orders(rows: &[RefinementRow], pick: impl Fn(&RefinementRow) -> f64) -> Vec<f64> {
    rows.windows(3)
        .map(|w| {
            let d1 = (pick(&w[0]) - pick(&w[1])).abs();
            let d2 = (pick(&w[1]) - pick(&w[2])).abs();
            (d1 / d2).ln() / (w[0].h / w[1].h).ln()
        })
        .collect()
}

/// Solves on each grid (nodes per axis) and tabulates residuals and orders.
pub fn refinement_study(
    spec: &ProblemSpec,
    grids: &[usize],
    mode: StudyMode,
    opts: &OptimizeOptions,
) -> Result<RefinementTable> {
    if grids.len() < 3 {
        return Err(Error::InvalidParameter("refinement needs at least three grids".into()));
    }
    for w in grids.windows(2) {
        if w[1] <= w[0] || w[0] < 2 || (w[1] - 1) % (w[0] - 1) != 0 {
            return Err(Error::InvalidParameter(format!("grids {} and {} are not nested", w[0], w[1])));
        }
    }
    let mut rows = Vec::new();
    for &n in grids {
        let problem = spec.build(&vec![n; spec.dim()])?;
        let result = match mode {
            StudyMode::Ground => ground_state(&problem, opts)?,
            StudyMode::Excited(k) => {
                let states = excited_states(&problem, k + 1, 4, 0, opts)?;
                states
                    .into_iter()
                    .nth(k)
                    .ok_or_else(|| Error::InvalidParameter(format!("state {k} not found on grid {n}")))?
            }
        };
        let residuals = residual_original_system(&result, &problem)?;
        rows.push(RefinementRow {
            n,
            h: problem.grid.max_spacing(),
            j: result.j_value,
            omega: result.omega,
            mu: result.mu,
            residuals,
            iterations: result.iterations,
            converged: result.converged,
        });
    }
    Ok(RefinementTable {
        eq1_orders: pair_orders(&rows, |r| r.residuals.eq1_residual),
        eq2_orders: pair_orders(&rows, |r| r.residuals.eq2_residual),
        bc_orders: pair_orders(&rows, |r| r.residuals.bc_max()),
        j_orders: difference_orders(&rows, |r| r.j),
        omega_orders: difference_orders(&rows, |r| r.omega),
        rows,
    })
}

pub const TABLE_HEADER: &str = "n,h,J,omega,mu,eq1_res,eq2_res,bc_res,norm_res,compat_res,iters,converged";

impl RefinementRow {
    pub fn csv_line(&self) -> String {
        let r = &self.residuals;
        format!(
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{}",
            self.n,
            self.h,
            self.j,
            self.omega,
            self.mu,
            r.eq1_residual,
            r.eq2_residual,
            r.bc_max(),
            r.normalization,
            r.compatibility,
            self.iterations,
            self.converged
        )
    }
}

impl RefinementTable {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut text = String::from(TABLE_HEADER);
        text.push('\n');
        for row in &self.rows {
            text.push_str(&row.csv_line());
            text.push('\n');
        }
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Discrepancies between the iterative solvers and dense direct solves,
/// plus the dense constrained ground state when `κ = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub nodes: usize,
    pub helmholtz: f64,
    pub poisson_neumann: f64,
    pub poisson_dirichlet: f64,
    /// Singular values of `Δ₀` below `1e−8·σ_max`.
    pub neumann_nullity: usize,
    pub kkt: Option<KktComparison>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KktComparison {
    pub j_oracle: f64,
    pub j_iterative: f64,
    pub omega_oracle: f64,
    pub omega_iterative: f64,
    pub mu_oracle: f64,
    pub mu_iterative: f64,
}

impl KktComparison {
    pub fn max_gap(&self) -> f64 {
        (self.j_oracle - self.j_iterative)
            .abs()
            .max((self.omega_oracle - self.omega_iterative).abs())
            .max((self.mu_oracle - self.mu_iterative).abs())
    }
}

fn relative_gap(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

/// Compares iterative and dense solves on seeded random data; with `κ = 0`
/// also solves the constrained problem densely and compares with
/// [`ground_state`].
pub fn dense_oracle_compare(problem: &Problem, opts: &OptimizeOptions, seed: u64) -> Result<OracleReport> {
    let grid = problem.grid.clone();
    let n = grid.node_count();
    let a0 = dense::neumann_matrix(&grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut random = || ScalarField::from_vec(grid.clone(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect());
    let lin = &problem.solver;

    let f = random();
    let it = solve_helmholtz_neumann(&f, &problem.h2, lin)?;
    let flux = apply_laplacian_neumann(&ScalarField::zeros(grid.clone()), &problem.h2);
    let rhs: Vec<f64> = flux.sub(&f).into_values();
    let helmholtz = relative_gap(it.values(), &dense::helmholtz_neumann(&grid, &rhs)?);

    let f = random();
    let shift = (problem.h1.integrate() - f.integrate()) / grid.volume();
    let f = f.map(|v| v + shift);
    let it = solve_poisson_neumann_zeromean(&f, &problem.h1, lin)?;
    let flux = apply_laplacian_neumann(&ScalarField::zeros(grid.clone()), &problem.h1);
    let rhs: Vec<f64> = flux.sub(&f).into_values();
    let poisson_neumann = relative_gap(it.values(), &dense::poisson_neumann(&grid, &rhs)?);

    let f = random();
    let it = solve_poisson_dirichlet(&f, lin)?;
    let rhs: Vec<f64> = f.values().to_vec();
    let poisson_dirichlet = relative_gap(it.values(), &dense::poisson_dirichlet(&grid, &rhs)?);

    let sv = a0.singular_values();
    let smax = sv.max();
    let neumann_nullity = sv.iter().filter(|s| **s < 1e-8 * smax).count();

    let kkt = if problem.kappa == 0.0 {
        let oracle = kkt_oracle(problem)?;
        let it = ground_state(problem, opts)?;
        Some(KktComparison {
            j_oracle: oracle.j,
            j_iterative: it.j_value,
            omega_oracle: oracle.omega,
            omega_iterative: it.omega,
            mu_oracle: oracle.mu,
            mu_iterative: it.mu,
        })
    } else {
        None
    };
    Ok(OracleReport {
        nodes: n,
        helmholtz,
        poisson_neumann,
        poisson_dirichlet,
        neumann_nullity,
        kkt,
    })
}

/// Constrained critical point computed with dense linear algebra only.
#[derive(Debug, Clone)]
pub struct KktSolution {
    pub u: ScalarField,
    pub omega: f64,
    pub mu: f64,
    pub j: f64,
}

struct DenseModel {
    interior: Vec<usize>,
    /// `−Δ_D + diag(qχ)` on interior nodes.
    k: DMatrix<f64>,
    q: DVector<f64>,
    /// Interior block of the dense `L`.
    l: DMatrix<f64>,
    /// Quadrature weight of an interior node (uniform).
    w: f64,
}

impl DenseModel {
    fn new(problem: &Problem) -> Result<Self> {
        let grid = &problem.grid;
        let n = grid.node_count();
        let (d, interior) = dense::dirichlet_matrix(grid)?;
        let m = interior.len();
        let q = DVector::from_iterator(m, interior.iter().map(|&i| problem.q.values()[i]));
        let qchi = DVector::from_iterator(m, interior.iter().map(|&i| problem.q.values()[i] * problem.chi.values()[i]));
        let k = -d + DMatrix::from_diagonal(&qchi);

        // L = (Δ₀² − Δ₀)⁻¹ on mean-zero data, through the bordered system.
        let a0 = dense::neumann_matrix(grid)?;
        let h = &a0 * &a0 - &a0;
        let wts = grid.weights();
        let vol = grid.volume();
        let mut b = DMatrix::zeros(n + 1, n + 1);
        b.view_mut((0, 0), (n, n)).copy_from(&h);
        for i in 0..n {
            b[(i, n)] = 1.0;
            b[(n, i)] = wts[i];
        }
        let lu = b.lu();
        let mut l = DMatrix::zeros(m, m);
        for (jj, &j) in interior.iter().enumerate() {
            let mut rhs = DVector::zeros(n + 1);
            for i in 0..n {
                rhs[i] = -wts[j] / vol;
            }
            rhs[j] += 1.0;
            let sol = lu
                .solve(&rhs)
                .ok_or_else(|| Error::ConsistencyViolation("bordered fourth-order matrix is singular".into()))?;
            for (ii, &i) in interior.iter().enumerate() {
                l[(ii, jj)] = sol[i];
            }
        }
        let w = wts[interior[0]];
        Ok(DenseModel { interior, k, q, l, w })
    }

    fn phi(&self, u: &DVector<f64>) -> DVector<f64> {
        let f = self.q.component_mul(u).component_mul(u);
        &self.l * f
    }

    /// Lowest eigenpair of `K + μQ`, scaled to unit `L²` norm.
    fn linear_ground(&self, mu: f64) -> (f64, DVector<f64>) {
        let a = &self.k + DMatrix::from_diagonal(&self.q) * mu;
        let sym = (&a + a.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let (imin, lmin) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
        let mut v = eig.eigenvectors.column(imin).into_owned();
        if v.sum() < 0.0 {
            v = -v;
        }
        (lmin, v / self.w.sqrt())
    }

    fn compat(&self, u: &DVector<f64>) -> f64 {
        self.w * self.q.component_mul(u).dot(u)
    }

    fn energy(&self, u: &DVector<f64>, problem: &Problem) -> f64 {
        let phi = self.phi(u);
        let ku = &self.k * u;
        0.5 * self.w * ku.dot(u) + 0.25 * self.w * self.q.component_mul(u).component_mul(u).dot(&phi)
            - problem.kappa / problem.p * self.w * u.iter().map(|v| v.abs().powf(problem.p)).sum::<f64>()
    }
}

/// Dense constrained ground state for `κ = 0`: the linear constrained
/// eigenproblem (bisection on `μ`) continued in the strength of the
/// interaction term by Newton's method on the full KKT system.
pub fn kkt_oracle(problem: &Problem) -> Result<KktSolution> {
    if problem.kappa != 0.0 {
        return Err(Error::InvalidParameter("the dense KKT oracle needs kappa = 0".into()));
    }
    let model = DenseModel::new(problem)?;
    let alpha = problem.alpha;
    let g = |mu: f64| model.compat(&model.linear_ground(mu).1) - alpha;

    let (mut lo, mut hi) = (-1.0, 1.0);
    let mut expansions = 0;
    while !(g(lo) > 0.0 && g(hi) < 0.0) {
        lo *= 2.0;
        hi *= 2.0;
        expansions += 1;
        if expansions > 60 {
            return Err(Error::InfeasibleRegion("no multiplier bracket for the linear problem".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * (1.0 + mid.abs()) {
            break;
        }
    }
    let mut mu = 0.5 * (lo + hi);
    let (mut omega, mut u) = model.linear_ground(mu);

    let m = model.interior.len();
    // Rounding floor of the residual scales with the stiffness entries.
    let newton_tol = 1e-13 * (1.0 + model.k.amax());
    let steps = 20;
    for step in 1..=steps {
        let s = step as f64 / steps as f64;
        let mut converged = false;
        for _ in 0..60 {
            let phi = model.phi(&u);
            let qu = model.q.component_mul(&u);
            let mut f = DVector::zeros(m + 2);
            let r = &model.k * &u + s * qu.component_mul(&phi) - &u * omega + &qu * mu;
            f.rows_mut(0, m).copy_from(&r);
            f[m] = 0.5 * (model.w * u.dot(&u) - 1.0);
            f[m + 1] = 0.5 * (model.w * qu.dot(&u) - alpha);
            if f.norm() < newton_tol {
                converged = true;
                break;
            }
            let mut jac = DMatrix::zeros(m + 2, m + 2);
            let mut block = model.k.clone();
            for i in 0..m {
                block[(i, i)] += s * model.q[i] * phi[i] - omega + mu * model.q[i];
                for j in 0..m {
                    block[(i, j)] += s * qu[i] * model.l[(i, j)] * 2.0 * qu[j];
                }
            }
            jac.view_mut((0, 0), (m, m)).copy_from(&block);
            for i in 0..m {
                jac[(i, m)] = -u[i];
                jac[(i, m + 1)] = qu[i];
                jac[(m, i)] = model.w * u[i];
                jac[(m + 1, i)] = model.w * qu[i];
            }
            let delta = jac
                .lu()
                .solve(&(-f))
                .ok_or(Error::NewtonDivergence { residual: f64::NAN })?;
            u += delta.rows(0, m);
            omega += delta[m];
            mu += delta[m + 1];
        }
        if !converged {
            return Err(Error::NewtonDivergence { residual: s });
        }
    }
    let j = model.energy(&u, problem);
    let mut values = vec![0.0; problem.grid.node_count()];
    for (k, &i) in model.interior.iter().enumerate() {
        values[i] = u[k];
    }
    Ok(KktSolution {
        u: ScalarField::from_vec(problem.grid.clone(), values),
        omega,
        mu,
        j,
    })
}

/// Residual report for an arbitrary `(u, ω, μ)`, computing `Φ(u)` first.
pub fn residuals_for(u: &ScalarField, omega: f64, mu: f64, problem: &Problem) -> Result<ResidualReport> {
    let pair = phi_map(u, problem)?;
    residuals_at(u, omega, mu, &pair, problem)
}
