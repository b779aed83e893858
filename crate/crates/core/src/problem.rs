//! Problem assembly: coupling `q`, boundary data, the flux balance `α`,
//! the auxiliary potential `χ` and the feasibility of `α` against `q`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::warn;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{BoundaryData, Face, GridSpec, ScalarField};
use crate::linsolve::{solve_helmholtz_neumann, solve_poisson_neumann_zeromean, LinearSolveOptions};

/// Builtin coupling families and tabulated input.
#[derive(Debug, Clone, PartialEq)]
pub enum CouplingSpec {
    Constant { value: f64 },
    /// `q = a + b·x₁`
    Affine { a: f64, b: f64 },
    /// `q = base + height·(1 − (r/R)²)²` inside the ball, `base` outside.
    RadialBump {
        center: Vec<f64>,
        radius: f64,
        base: f64,
        height: f64,
    },
    /// `q = base + amplitude·sin(2π·periods·x₁/L₁)`
    Oscillating { base: f64, amplitude: f64, periods: f64 },
    /// Node values in the field CSV format; the grid must match.
    Tabulated { path: PathBuf },
}

impl CouplingSpec {
    pub fn evaluate(&self, grid: &Arc<GridSpec>) -> Result<ScalarField> {
        let l1 = grid.lengths()[0];
        let q = match self {
            CouplingSpec::Constant { value } => ScalarField::constant(grid.clone(), *value),
            CouplingSpec::Affine { a, b } => ScalarField::from_fn(grid.clone(), |x| a + b * x[0]),
            CouplingSpec::RadialBump {
                center,
                radius,
                base,
                height,
            } => {
                if center.len() != grid.dim() || !(*radius > 0.0) {
                    return Err(Error::InvalidParameter(
                        "radial bump needs a center per axis and a positive radius".into(),
                    ));
                }
                ScalarField::from_fn(grid.clone(), |x| {
                    let r2: f64 = x.iter().zip(center).map(|(x, c)| (x - c) * (x - c)).sum();
                    let s = 1.0 - r2 / (radius * radius);
                    base + if s > 0.0 { height * s * s } else { 0.0 }
                })
            }
            CouplingSpec::Oscillating {
                base,
                amplitude,
                periods,
            } => ScalarField::from_fn(grid.clone(), |x| {
                base + amplitude * (2.0 * std::f64::consts::PI * periods * x[0] / l1).sin()
            }),
            CouplingSpec::Tabulated { path } => {
                let q = ScalarField::read_csv(path)?;
                if **q.grid() != **grid {
                    return Err(Error::ShapeMismatch(format!(
                        "{}: tabulated coupling grid differs from the problem grid",
                        path.display()
                    )));
                }
                ScalarField::new(grid.clone(), q.into_values())?
            }
        };
        if !q.is_finite() {
            return Err(Error::NonFinite("coupling q"));
        }
        Ok(q)
    }
}

/// How `α` sits relative to the range of `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FeasibilityClass {
    Interior,
    BoundaryDegenerate,
    Infeasible,
}

impl std::fmt::Display for FeasibilityClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FeasibilityClass::Interior => "interior",
            FeasibilityClass::BoundaryDegenerate => "boundary_degenerate",
            FeasibilityClass::Infeasible => "infeasible",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub q_min: f64,
    pub q_max: f64,
    pub alpha: f64,
    pub class: FeasibilityClass,
    /// Fraction of nodes with `|q − α| < level_eps`; the grid proxy for the
    /// measure of the level set `q = α`.
    pub level_set_fraction: f64,
}

/// Level-set fractions above this trigger a warning.
pub const LEVEL_SET_WARN_FRACTION: f64 = 0.01;

/// Classifies `α` against the node values of `q`.
///
/// `gap_eps = 1e−9·(q_max − q_min)` and, unless given,
/// `level_eps = 1e−3·(q_max − q_min)`; both carry an absolute floor of
/// `1e−14·(1 + |α|)` so that a constant `q` is handled.
pub fn classify_alpha(q: &ScalarField, alpha: f64, level_eps: Option<f64>) -> FeasibilityReport {
    classify_values(q.values(), alpha, level_eps)
}

pub(crate) fn classify_values(q: &[f64], alpha: f64, level_eps: Option<f64>) -> FeasibilityReport {
    let q_min = q.iter().copied().fold(f64::INFINITY, f64::min);
    let q_max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let floor = 1e-14 * (1.0 + alpha.abs());
    let range = q_max - q_min;
    let gap_eps = 1e-9 * range + floor;
    let level_eps = level_eps.unwrap_or(1e-3 * range + floor);
    let class = if q_min + gap_eps < alpha && alpha < q_max - gap_eps {
        FeasibilityClass::Interior
    } else if (alpha - q_min).abs() <= gap_eps || (alpha - q_max).abs() <= gap_eps {
        FeasibilityClass::BoundaryDegenerate
    } else {
        FeasibilityClass::Infeasible
    };
    let near = q.iter().filter(|v| (*v - alpha).abs() < level_eps).count();
    FeasibilityReport {
        q_min,
        q_max,
        alpha,
        class,
        level_set_fraction: near as f64 / q.len().max(1) as f64,
    }
}

/// `α = ∮h₂ − ∮h₁`.
pub fn compute_alpha(h1: &BoundaryData, h2: &BoundaryData) -> f64 {
    h2.integrate() - h1.integrate()
}

/// Relative tolerance of the identity `∫θ = ∮h₁`.
pub const THETA_MEAN_TOL: f64 = 5e-8;

/// Scale used for the θ-mean identity: `max(1, ∮|h₁| + ∮|h₂|)`.
pub fn boundary_scale(h1: &BoundaryData, h2: &BoundaryData) -> f64 {
    let abs = |b: &BoundaryData| {
        let grid = b.grid();
        grid.faces()
            .map(|face| {
                grid.face_weights(face)
                    .iter()
                    .zip(b.face(face))
                    .map(|(w, v)| w * v.abs())
                    .sum::<f64>()
            })
            .sum::<f64>()
    };
    (abs(h1) + abs(h2)).max(1.0)
}

/// Solves `Δθ − θ = α/|Ω|`, `∂θ/∂n = h₂`, then `Δχ = θ`, `∂χ/∂n = h₁`,
/// `∫χ = 0`. Returns `(χ, θ)`.
pub fn solve_chi(
    h1: &BoundaryData,
    h2: &BoundaryData,
    opts: &LinearSolveOptions,
) -> Result<(ScalarField, ScalarField)> {
    let grid = h1.grid().clone();
    let alpha = compute_alpha(h1, h2);
    let source = ScalarField::constant(grid.clone(), alpha / grid.volume());
    let theta = solve_helmholtz_neumann(&source, h2, opts)?;
    let gap = (theta.integrate() - h1.integrate()).abs();
    let scale = boundary_scale(h1, h2);
    if gap > THETA_MEAN_TOL * scale {
        return Err(Error::ConsistencyViolation(format!(
            "|∫θ − ∮h₁| = {gap:.3e} exceeds {:.3e}",
            THETA_MEAN_TOL * scale
        )));
    }
    let chi = solve_poisson_neumann_zeromean(&theta, h1, opts)?;
    // Helmholtz residual of θ stands in for the fourth-order residual of χ.
    let flux_only = crate::grid::apply_laplacian_neumann(&ScalarField::zeros(grid.clone()), h2);
    let rhs_norm = flux_only.map(|v| v - alpha / grid.volume()).norm_l2();
    let res = crate::grid::apply_laplacian_neumann(&theta, h2)
        .sub(&theta)
        .map(|v| v - alpha / grid.volume())
        .norm_l2();
    if res > 10.0 * opts.rel_tolerance * rhs_norm + 1e-14 {
        return Err(Error::ConsistencyViolation(format!(
            "fourth-order residual of χ is {res:.3e}"
        )));
    }
    Ok((chi, theta))
}

/// A fully assembled problem on one grid.
#[derive(Debug, Clone)]
pub struct Problem {
    pub grid: Arc<GridSpec>,
    pub q: ScalarField,
    pub kappa: f64,
    pub p: f64,
    pub h1: BoundaryData,
    pub h2: BoundaryData,
    pub alpha: f64,
    pub chi: ScalarField,
    pub theta: ScalarField,
    pub solver: LinearSolveOptions,
}

impl Problem {
    pub fn new(
        q: ScalarField,
        kappa: f64,
        p: f64,
        h1: BoundaryData,
        h2: BoundaryData,
        solver: LinearSolveOptions,
    ) -> Result<Self> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidParameter(format!("kappa = {kappa} must be ≥ 0")));
        }
        if !(p > 2.0 && p <= 10.0 / 3.0) {
            return Err(Error::InvalidParameter(format!("p = {p} not in (2, 10/3]")));
        }
        if !q.is_finite() {
            return Err(Error::NonFinite("coupling q"));
        }
        let grid = q.grid().clone();
        if **h1.grid() != *grid || **h2.grid() != *grid {
            return Err(Error::ShapeMismatch("boundary data grid differs from q".into()));
        }
        solver.validate()?;
        let alpha = compute_alpha(&h1, &h2);
        let (chi, theta) = solve_chi(&h1, &h2, &solver)?;
        Ok(Problem {
            grid,
            q,
            kappa,
            p,
            h1,
            h2,
            alpha,
            chi,
            theta,
            solver,
        })
    }

    /// Zero boundary data (α = 0, χ = θ = 0).
    pub fn homogeneous(q: ScalarField, kappa: f64, p: f64) -> Result<Self> {
        let grid = q.grid().clone();
        Self::new(
            q,
            kappa,
            p,
            BoundaryData::zeros(grid.clone()),
            BoundaryData::zeros(grid),
            LinearSolveOptions::default(),
        )
    }

    pub fn feasibility(&self) -> FeasibilityReport {
        let report = classify_alpha(&self.q, self.alpha, None);
        if report.level_set_fraction > LEVEL_SET_WARN_FRACTION {
            warn!(
                "level set q = α covers {:.1}% of nodes; differentials of the constraints may degenerate",
                100.0 * report.level_set_fraction
            );
        }
        report
    }

    pub fn theta_mean_gap(&self) -> f64 {
        (self.theta.integrate() - self.h1.integrate()).abs()
    }
}

/// Per-face boundary value source.
#[derive(Debug, Clone, PartialEq)]
pub enum FaceValue {
    Constant(f64),
    /// One value per face node, one per line.
    Tabulated(PathBuf),
}

/// Grid-independent description of a problem, realized on any grid by
/// [`ProblemSpec::build`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub lengths: Vec<f64>,
    pub kappa: f64,
    pub p: f64,
    pub coupling: CouplingSpec,
    /// Indexed by `Face::id`; missing faces default to zero.
    pub h1: Vec<FaceValue>,
    pub h2: Vec<FaceValue>,
    pub solver: LinearSolveOptions,
}

impl ProblemSpec {
    pub fn dim(&self) -> usize {
        self.lengths.len()
    }

    pub fn grid(&self, nodes: &[usize]) -> Result<Arc<GridSpec>> {
        GridSpec::new(&self.lengths, nodes)
    }

    pub fn build(&self, nodes: &[usize]) -> Result<Problem> {
        let grid = self.grid(nodes)?;
        let q = self.coupling.evaluate(&grid)?;
        let h1 = boundary_from_faces(&grid, &self.h1)?;
        let h2 = boundary_from_faces(&grid, &self.h2)?;
        Problem::new(q, self.kappa, self.p, h1, h2, self.solver)
    }
}

fn boundary_from_faces(grid: &Arc<GridSpec>, faces: &[FaceValue]) -> Result<BoundaryData> {
    let values = grid
        .faces()
        .map(|face: Face| {
            let count = grid.face_nodes(face).len();
            match faces.get(face.id()) {
                None => Ok(vec![0.0; count]),
                Some(FaceValue::Constant(c)) => Ok(vec![*c; count]),
                Some(FaceValue::Tabulated(path)) => read_face_file(path, count),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    BoundaryData::from_face_values(grid.clone(), values)
}

fn read_face_file(path: &Path, count: usize) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let values = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.parse::<f64>()
                .map_err(|_| Error::Io(format!("{}: bad value `{l}`", path.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.len() != count {
        return Err(Error::ShapeMismatch(format!(
            "{}: {} values for {count} face nodes",
            path.display(),
            values.len()
        )));
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(dim: usize, n: usize) -> Arc<GridSpec> {
        GridSpec::cube(dim, 1.0, n).unwrap()
    }

    #[test]
    fn alpha_counts_endpoints_in_one_dimension() {
        let g = unit(1, 9);
        let h1 = BoundaryData::constant(g.clone(), 0.1);
        let h2 = BoundaryData::constant(g, 0.25);
        assert!((compute_alpha(&h1, &h2) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn alpha_integrates_faces_in_two_dimensions() {
        let g = unit(2, 9);
        let h2 = BoundaryData::constant(g.clone(), 0.125);
        assert!((compute_alpha(&BoundaryData::zeros(g), &h2) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn classify_cases() {
        let g = unit(1, 33);
        let q = ScalarField::from_fn(g.clone(), |x| x[0]);
        assert_eq!(classify_alpha(&q, 0.5, None).class, FeasibilityClass::Interior);
        assert_eq!(classify_alpha(&q, 1.0, None).class, FeasibilityClass::BoundaryDegenerate);
        assert_eq!(classify_alpha(&q, 0.0, None).class, FeasibilityClass::BoundaryDegenerate);
        assert_eq!(classify_alpha(&q, 2.0, None).class, FeasibilityClass::Infeasible);
        let flat = ScalarField::constant(g, 0.3);
        assert_eq!(classify_alpha(&flat, 0.3, None).class, FeasibilityClass::BoundaryDegenerate);
        assert_eq!(classify_alpha(&flat, 0.0, None).class, FeasibilityClass::Infeasible);
        assert_eq!(classify_alpha(&flat, 0.3, None).level_set_fraction, 1.0);
    }

    #[test]
    fn zero_data_gives_zero_chi() {
        let g = unit(2, 9);
        let pb = Problem::homogeneous(ScalarField::from_fn(g, |x| x[0]), 1.0, 3.0).unwrap();
        assert_eq!(pb.alpha, 0.0);
        assert_eq!(pb.chi.max_abs(), 0.0);
        assert_eq!(pb.theta.max_abs(), 0.0);
    }

    #[test]
    fn theta_mean_matches_h1_flux() {
        let g = unit(2, 17);
        let h1 = BoundaryData::from_fn(g.clone(), |f, x| 0.3 * f.id() as f64 + x.iter().sum::<f64>());
        let h2 = BoundaryData::from_fn(g.clone(), |f, x| 0.1 - 0.05 * f.id() as f64 * x[0]);
        let pb = Problem::new(
            ScalarField::from_fn(g, |x| x[1]),
            1.0,
            3.0,
            h1.clone(),
            h2.clone(),
            LinearSolveOptions::default(),
        )
        .unwrap();
        assert!(pb.theta_mean_gap() <= THETA_MEAN_TOL * boundary_scale(&h1, &h2));
        assert!(pb.chi.integrate().abs() < 1e-12);
    }

    #[test]
    fn rejects_out_of_range_exponent() {
        let g = unit(1, 9);
        let q = ScalarField::from_fn(g, |x| x[0]);
        assert!(matches!(Problem::homogeneous(q.clone(), 1.0, 2.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(Problem::homogeneous(q.clone(), 1.0, 3.5), Err(Error::InvalidParameter(_))));
        assert!(matches!(Problem::homogeneous(q, -1.0, 3.0), Err(Error::InvalidParameter(_))));
    }
}
