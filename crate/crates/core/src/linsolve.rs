//! Matrix-free preconditioned conjugate gradients for the three linear
//! problems the solver needs, plus dense direct counterparts used as
//! oracles on small grids.
//!
//! Every operator here is self-adjoint in the trapezoid inner product, so CG
//! runs with that inner product rather than the Euclidean one.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{
    dirichlet_laplacian, neumann_flux_add, neumann_laplacian_add, weighted_dot, BoundaryData,
    GridSpec, ScalarField,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Preconditioner {
    None,
    Diagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearSolveOptions {
    pub rel_tolerance: f64,
    /// `None` means `10 · node_count`.
    pub max_iterations: Option<usize>,
    pub preconditioner: Preconditioner,
    /// Relative factor for the Neumann compatibility check.
    pub compat_factor: f64,
    /// Route solves through dense LU instead of CG (small grids only).
    pub dense: bool,
}

impl Default for LinearSolveOptions {
    fn default() -> Self {
        LinearSolveOptions {
            rel_tolerance: 1e-10,
            max_iterations: None,
            preconditioner: Preconditioner::Diagonal,
            compat_factor: 1e-8,
            dense: false,
        }
    }
}

impl LinearSolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tolerance > 0.0 && self.rel_tolerance < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "rel_tolerance {} not in (0,1)",
                self.rel_tolerance
            )));
        }
        if self.max_iterations == Some(0) {
            return Err(Error::InvalidParameter("max_iterations must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Grids above this size refuse dense assembly.
pub const DENSE_MAX_NODES: usize = 5000;

struct CgProblem<'a> {
    weights: &'a [f64],
    diag: Vec<f64>,
    /// Project onto zero weighted mean after every update.
    project: bool,
}

impl CgProblem<'_> {
    fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        weighted_dot(self.weights, a, Some(b))
    }

    fn project(&self, v: &mut [f64]) {
        if self.project {
            let vol: f64 = self.weights.iter().sum();
            let m = weighted_dot(self.weights, v, None) / vol;
            v.iter_mut().for_each(|x| *x -= m);
        }
    }

    fn solve(
        &self,
        apply: impl Fn(&[f64], &mut [f64]),
        rhs: &[f64],
        opts: &LinearSolveOptions,
    ) -> Result<Vec<f64>> {
        let n = rhs.len();
        let max_iter = opts.max_iterations.unwrap_or(10 * n);
        let mut b = rhs.to_vec();
        self.project(&mut b);
        let b_norm = self.dot(&b, &b).sqrt();
        let mut x = vec![0.0; n];
        if b_norm == 0.0 {
            return Ok(x);
        }
        let target = opts.rel_tolerance * b_norm;
        let precond = |r: &[f64], z: &mut [f64]| {
            match opts.preconditioner {
                Preconditioner::None => z.copy_from_slice(r),
                Preconditioner::Diagonal => {
                    for ((z, r), d) in z.iter_mut().zip(r).zip(&self.diag) {
                        *z = r / d;
                    }
                }
            }
            self.project(z);
        };
        let mut r = b;
        let mut z = vec![0.0; n];
        precond(&r, &mut z);
        let mut p = z.clone();
        let mut rz = self.dot(&r, &z);
        let mut ap = vec![0.0; n];
        let mut res = b_norm;
        for it in 0..max_iter {
            apply(&p, &mut ap);
            self.project(&mut ap);
            let pap = self.dot(&p, &ap);
            if pap <= 0.0 {
                return Err(Error::NoConvergence {
                    iterations: it,
                    residual: res / b_norm,
                });
            }
            let step = rz / pap;
            for i in 0..n {
                x[i] += step * p[i];
                r[i] -= step * ap[i];
            }
            self.project(&mut x);
            res = self.dot(&r, &r).sqrt();
            if res <= target {
                return Ok(x);
            }
            precond(&r, &mut z);
            let rz_new = self.dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(Error::NoConvergence {
            iterations: max_iter,
            residual: res / b_norm,
        })
    }
}

fn laplacian_diag(grid: &GridSpec) -> f64 {
    grid.spacing().iter().map(|h| 2.0 / (h * h)).sum()
}

fn check_grids(f: &ScalarField, g: &BoundaryData) -> Result<()> {
    if **f.grid() != **g.grid() {
        return Err(Error::ShapeMismatch("field and boundary data live on different grids".into()));
    }
    Ok(())
}

/// `v` with `Δv − v = f` in Ω and `∂v/∂n = g` on ∂Ω.
pub fn solve_helmholtz_neumann(
    f: &ScalarField,
    g: &BoundaryData,
    opts: &LinearSolveOptions,
) -> Result<ScalarField> {
    opts.validate()?;
    check_grids(f, g)?;
    let grid = f.grid().clone();
    // (I − Δ₀) v = g-term − f
    let mut rhs: Vec<f64> = f.values().iter().map(|v| -v).collect();
    neumann_flux_add(g, &mut rhs);
    if opts.dense {
        let v = dense::helmholtz_neumann(&grid, &rhs)?;
        return Ok(ScalarField::from_vec(grid, v));
    }
    let cg = CgProblem {
        weights: grid.weights(),
        diag: vec![laplacian_diag(&grid) + 1.0; grid.node_count()],
        project: false,
    };
    let v = cg.solve(
        |x, y| {
            y.copy_from_slice(x);
            let mut lap = vec![0.0; x.len()];
            neumann_laplacian_add(&grid, x, &mut lap);
            y.iter_mut().zip(&lap).for_each(|(y, l)| *y -= l);
        },
        &rhs,
        opts,
    )?;
    Ok(ScalarField::from_vec(grid, v))
}

/// Zero-mean `v` with `Δv = f − mean-correction` and `∂v/∂n = g`.
///
/// The data must satisfy `∫f = ∮g` up to `compat_factor·(∫|f| + ∮|g|)`;
/// the residual mismatch is projected out before solving.
pub fn solve_poisson_neumann_zeromean(
    f: &ScalarField,
    g: &BoundaryData,
    opts: &LinearSolveOptions,
) -> Result<ScalarField> {
    opts.validate()?;
    check_grids(f, g)?;
    let grid = f.grid().clone();
    let abs_f = f.map(f64::abs).integrate();
    let abs_g = BoundaryData::from_face_values(
        grid.clone(),
        grid.faces().map(|face| g.face(face).iter().map(|v| v.abs()).collect()).collect(),
    )?
    .integrate();
    let mismatch = (f.integrate() - g.integrate()).abs();
    let tolerance = opts.compat_factor * (abs_f + abs_g);
    if mismatch > tolerance {
        return Err(Error::IncompatibleData { mismatch, tolerance });
    }
    // −Δ₀ v = g-term − f
    let mut rhs: Vec<f64> = f.values().iter().map(|v| -v).collect();
    neumann_flux_add(g, &mut rhs);
    let mut v = if opts.dense {
        dense::poisson_neumann(&grid, &rhs)?
    } else {
        let cg = CgProblem {
            weights: grid.weights(),
            diag: vec![laplacian_diag(&grid); grid.node_count()],
            project: true,
        };
        cg.solve(
            |x, y| {
                y.iter_mut().for_each(|v| *v = 0.0);
                neumann_laplacian_add(&grid, x, y);
                y.iter_mut().for_each(|v| *v = -*v);
            },
            &rhs,
            opts,
        )?
    };
    let vol = grid.volume();
    let m = weighted_dot(grid.weights(), &v, None) / vol;
    v.iter_mut().for_each(|x| *x -= m);
    Ok(ScalarField::from_vec(grid, v))
}

/// `v = (−Δ)⁻¹ f` with `v = 0` on boundary nodes; boundary values of `f` are
/// ignored.
pub fn solve_poisson_dirichlet(f: &ScalarField, opts: &LinearSolveOptions) -> Result<ScalarField> {
    opts.validate()?;
    let grid = f.grid().clone();
    let rhs = f.with_zero_boundary().into_values();
    if opts.dense {
        let v = dense::poisson_dirichlet(&grid, &rhs)?;
        return Ok(ScalarField::from_vec(grid, v));
    }
    let mut diag = vec![laplacian_diag(&grid); grid.node_count()];
    for (i, d) in diag.iter_mut().enumerate() {
        if grid.is_boundary(i) {
            *d = 1.0;
        }
    }
    let cg = CgProblem {
        weights: grid.weights(),
        diag,
        project: false,
    };
    let v = cg.solve(
        |x, y| {
            dirichlet_laplacian(&grid, x, y);
            y.iter_mut().for_each(|v| *v = -*v);
        },
        &rhs,
        opts,
    )?;
    Ok(ScalarField::from_vec(grid, v))
}

/// Dense assembly of the stencils and LU-based direct solves.
pub mod dense {
    use nalgebra::{DMatrix, DVector};

    use super::*;

    fn check_size(grid: &GridSpec) -> Result<()> {
        if grid.node_count() > DENSE_MAX_NODES {
            return Err(Error::OracleTooLarge {
                nodes: grid.node_count(),
                max_nodes: DENSE_MAX_NODES,
            });
        }
        Ok(())
    }

    fn assemble(n: usize, apply: impl Fn(&[f64], &mut [f64])) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            apply(&e, &mut col);
            m.set_column(j, &DVector::from_column_slice(&col));
            e[j] = 0.0;
        }
        m
    }

    /// Zero-flux Neumann Laplacian Δ₀ as a dense matrix over all nodes.
    pub fn neumann_matrix(grid: &GridSpec) -> Result<DMatrix<f64>> {
        check_size(grid)?;
        Ok(assemble(grid.node_count(), |x, y| {
            y.iter_mut().for_each(|v| *v = 0.0);
            neumann_laplacian_add(grid, x, y);
        }))
    }

    /// Dirichlet Laplacian restricted to interior nodes, with the interior
    /// node list (row/column order).
    pub fn dirichlet_matrix(grid: &GridSpec) -> Result<(DMatrix<f64>, Vec<usize>)> {
        check_size(grid)?;
        let interior: Vec<usize> = (0..grid.node_count()).filter(|&i| !grid.is_boundary(i)).collect();
        let n = grid.node_count();
        let mut m = DMatrix::zeros(interior.len(), interior.len());
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for (j, &node) in interior.iter().enumerate() {
            e[node] = 1.0;
            dirichlet_laplacian(grid, &e, &mut col);
            for (i, &row) in interior.iter().enumerate() {
                m[(i, j)] = col[row];
            }
            e[node] = 0.0;
        }
        Ok((m, interior))
    }

    fn lu_solve(m: DMatrix<f64>, rhs: DVector<f64>) -> Result<DVector<f64>> {
        m.lu()
            .solve(&rhs)
            .ok_or_else(|| Error::ConsistencyViolation("dense matrix is singular".into()))
    }

    /// Solves `(I − Δ₀) v = rhs`.
    pub fn helmholtz_neumann(grid: &GridSpec, rhs: &[f64]) -> Result<Vec<f64>> {
        let a = neumann_matrix(grid)?;
        let m = DMatrix::identity(rhs.len(), rhs.len()) - a;
        Ok(lu_solve(m, DVector::from_column_slice(rhs))?.as_slice().to_vec())
    }

    /// Solves `−Δ₀ v = rhs − mean(rhs)` with `Σ wᵢ vᵢ = 0` through the
    /// bordered system `[−Δ₀ 1; wᵀ 0]`.
    pub fn poisson_neumann(grid: &GridSpec, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = rhs.len();
        let a = neumann_matrix(grid)?;
        let w = grid.weights();
        let mean = weighted_dot(w, rhs, None) / grid.volume();
        let mut m = DMatrix::zeros(n + 1, n + 1);
        m.view_mut((0, 0), (n, n)).copy_from(&(-a));
        for i in 0..n {
            m[(i, n)] = 1.0;
            m[(n, i)] = w[i];
        }
        let mut b = DVector::zeros(n + 1);
        for i in 0..n {
            b[i] = rhs[i] - mean;
        }
        let sol = lu_solve(m, b)?;
        Ok(sol.as_slice()[..n].to_vec())
    }

    /// Solves `−Δ_D v = rhs` on interior nodes; boundary entries are zero.
    pub fn poisson_dirichlet(grid: &GridSpec, rhs: &[f64]) -> Result<Vec<f64>> {
        let (a, interior) = dirichlet_matrix(grid)?;
        let b = DVector::from_iterator(interior.len(), interior.iter().map(|&i| rhs[i]));
        let sol = lu_solve(-a, b)?;
        let mut v = vec![0.0; rhs.len()];
        for (k, &i) in interior.iter().enumerate() {
            v[i] = sol[k];
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridSpec, Side};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn line(n: usize) -> Arc<GridSpec> {
        GridSpec::cube(1, 1.0, n).unwrap()
    }

    #[test]
    fn helmholtz_constant_solution() {
        let g = line(33);
        let v = solve_helmholtz_neumann(
            &ScalarField::constant(g.clone(), -1.0),
            &BoundaryData::zeros(g),
            &LinearSolveOptions::default(),
        )
        .unwrap();
        assert!(v.map(|x| x - 1.0).max_abs() < 1e-9);
    }

    #[test]
    fn helmholtz_cosine() {
        let g = line(129);
        let f = ScalarField::from_fn(g.clone(), |x| -(PI * PI + 1.0) * (PI * x[0]).cos());
        let v = solve_helmholtz_neumann(&f, &BoundaryData::zeros(g.clone()), &Default::default()).unwrap();
        let exact = ScalarField::from_fn(g, |x| (PI * x[0]).cos());
        assert!(v.sub(&exact).max_abs() < 1e-4);
    }

    #[test]
    fn poisson_neumann_cosine_and_zero() {
        let g = line(129);
        let f = ScalarField::from_fn(g.clone(), |x| -PI * PI * (PI * x[0]).cos());
        let zero = BoundaryData::zeros(g.clone());
        let v = solve_poisson_neumann_zeromean(&f, &zero, &Default::default()).unwrap();
        let exact = ScalarField::from_fn(g.clone(), |x| (PI * x[0]).cos());
        assert!(v.sub(&exact).max_abs() < 1e-4);
        assert!(v.mean().abs() < 1e-12);
        let z = solve_poisson_neumann_zeromean(&ScalarField::zeros(g), &zero, &Default::default()).unwrap();
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn poisson_neumann_rejects_incompatible() {
        let g = line(17);
        let err = solve_poisson_neumann_zeromean(
            &ScalarField::constant(g.clone(), 1.0),
            &BoundaryData::zeros(g),
            &Default::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::IncompatibleData { .. }));
    }

    #[test]
    fn poisson_neumann_with_flux() {
        // v = x²/2 − 1/6: Δv = 1, flux 1 at x=1 and 0 at x=0
        let g = line(33);
        let flux = BoundaryData::from_fn(g.clone(), |face, _| if face.side == Side::High { 1.0 } else { 0.0 });
        let v = solve_poisson_neumann_zeromean(&ScalarField::constant(g.clone(), 1.0), &flux, &Default::default())
            .unwrap();
        let exact = ScalarField::from_fn(g, |x| x[0] * x[0] / 2.0).mean_projected();
        assert!(v.sub(&exact).max_abs() < 1e-3);
    }

    #[test]
    fn dirichlet_sine() {
        let g = line(129);
        let f = ScalarField::from_fn(g.clone(), |x| PI * PI * (PI * x[0]).sin());
        let v = solve_poisson_dirichlet(&f, &Default::default()).unwrap();
        let exact = ScalarField::from_fn(g.clone(), |x| (PI * x[0]).sin());
        assert!(v.sub(&exact).max_abs() < 1e-4);
        assert_eq!(v.max_abs_boundary(), 0.0);
        let z = solve_poisson_dirichlet(&ScalarField::zeros(g), &Default::default()).unwrap();
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn reports_no_convergence() {
        let g = line(65);
        let f = ScalarField::from_fn(g, |x| (7.0 * x[0]).sin());
        let opts = LinearSolveOptions {
            max_iterations: Some(2),
            ..Default::default()
        };
        assert!(matches!(
            solve_poisson_dirichlet(&f, &opts),
            Err(Error::NoConvergence { iterations: 2, .. })
        ));
    }

    #[test]
    fn invalid_options() {
        let g = line(9);
        let f = ScalarField::zeros(g);
        let opts = LinearSolveOptions {
            rel_tolerance: 2.0,
            ..Default::default()
        };
        assert!(solve_poisson_dirichlet(&f, &opts).is_err());
    }

    #[test]
    fn dense_size_limit() {
        let g = GridSpec::cube(2, 1.0, 80).unwrap();
        assert!(matches!(dense::neumann_matrix(&g), Err(Error::OracleTooLarge { .. })));
    }
}
