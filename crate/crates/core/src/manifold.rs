//! The constraint set `M = {∫u² = 1} ∩ {∫qu² = α}`: membership, retraction,
//! tangent projection and feasible starting points.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functional::GradientMetric;
use crate::grid::{ScalarField, MAX_DIM};
use crate::linsolve::solve_poisson_dirichlet;
use crate::problem::{classify_values, FeasibilityClass, Problem};

/// `(G₁(u), G₂(u)) = (∫u² − 1, ∫qu² − α)`
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstraintValues {
    pub g1: f64,
    pub g2: f64,
}

impl ConstraintValues {
    pub fn max_abs(&self) -> f64 {
        self.g1.abs().max(self.g2.abs())
    }
}

pub fn constraint_values(u: &ScalarField, problem: &Problem) -> ConstraintValues {
    let u2 = u.mul(u);
    ConstraintValues {
        g1: u2.integrate() - 1.0,
        g2: problem.q.inner(&u2) - problem.alpha,
    }
}

/// Membership with the tolerances used throughout: `|G₁| ≤ tol` and
/// `|G₂| ≤ tol·(1 + |α|)`.
pub fn on_manifold(u: &ScalarField, problem: &Problem, tol: f64) -> bool {
    let c = constraint_values(u, problem);
    c.g1.abs() <= tol && c.g2.abs() <= tol * (1.0 + problem.alpha.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RetractOptions {
    pub tol: f64,
    pub max_newton: usize,
}

impl Default for RetractOptions {
    fn default() -> Self {
        RetractOptions {
            tol: 1e-12,
            max_newton: 50,
        }
    }
}

/// Pairs whose `1/sin²` of the mutual angle exceeds this are degenerate.
pub const GRAM_CONDITION_LIMIT: f64 = 1e12;

/// `G₁₁G₂₂ / det G` for a symmetric 2×2 Gram matrix: `1/sin²` of the angle
/// between the two vectors. Infinite when they are parallel.
fn gram_condition(g11: f64, g12: f64, g22: f64) -> f64 {
    let det = g11 * g22 - g12 * g12;
    if det <= 0.0 || g11 <= 0.0 || g22 <= 0.0 {
        f64::INFINITY
    } else {
        g11 * g22 / det
    }
}

fn solve2(m: [[f64; 2]; 2], r: [f64; 2]) -> Option<[f64; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some([
        (r[0] * m[1][1] - m[0][1] * r[1]) / det,
        (m[0][0] * r[1] - m[1][0] * r[0]) / det,
    ])
}

/// Maps `v` onto `M` through `u = (a + b·q)·v`, with `(a, b)` found by
/// damped Newton from `(1, 0)`. Returns `u` and `(a, b)`.
pub fn retract_with_coefficients(
    v: &ScalarField,
    problem: &Problem,
    opts: &RetractOptions,
) -> Result<(ScalarField, (f64, f64))> {
    let q = &problem.q;
    let v2 = v.mul(v);
    let m: Vec<f64> = (0..4).map(|k| q.map(|x| x.powi(k)).inner(&v2)).collect();
    if m[0] == 0.0 {
        return Err(Error::ZeroField);
    }
    let condition = gram_condition(m[0], m[1], m[2]);
    if condition > GRAM_CONDITION_LIMIT {
        return Err(Error::DegenerateDirection { condition });
    }
    let alpha = problem.alpha;
    let tol = opts.tol;
    let residual = |a: f64, b: f64| {
        [
            a * a * m[0] + 2.0 * a * b * m[1] + b * b * m[2] - 1.0,
            a * a * m[1] + 2.0 * a * b * m[2] + b * b * m[3] - alpha,
        ]
    };
    let size = |r: [f64; 2]| r[0].abs().max(r[1].abs());
    let direct = constraint_values(v, problem);
    if direct.g1.abs() <= tol && direct.g2.abs() <= tol {
        return Ok((v.clone(), (1.0, 0.0)));
    }
    let (mut a, mut b) = (1.0, 0.0);
    let mut r = residual(a, b);
    let mut converged = false;
    for _ in 0..opts.max_newton {
        if size(r) <= tol {
            converged = true;
            break;
        }
        let jac = [
            [2.0 * (a * m[0] + b * m[1]), 2.0 * (a * m[1] + b * m[2])],
            [2.0 * (a * m[1] + b * m[2]), 2.0 * (a * m[2] + b * m[3])],
        ];
        let step = solve2(jac, r).ok_or(Error::NewtonDivergence { residual: size(r) })?;
        let mut t = 1.0;
        loop {
            let (na, nb) = (a - t * step[0], b - t * step[1]);
            let nr = residual(na, nb);
            if size(nr) < size(r) || t < 1e-6 {
                a = na;
                b = nb;
                r = nr;
                break;
            }
            t *= 0.5;
        }
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::NewtonDivergence { residual: f64::INFINITY });
        }
    }
    if !converged && size(r) > tol {
        return Err(Error::NewtonDivergence { residual: size(r) });
    }
    let u = q.zip_map(v, |q, v| (a + b * q) * v);
    let check = constraint_values(&u, problem);
    // moment and nodal quadrature agree to rounding; allow a little slack
    if check.g1.abs() > 10.0 * tol || check.g2.abs() > 10.0 * tol * (1.0 + alpha.abs()) {
        return Err(Error::NewtonDivergence { residual: check.max_abs() });
    }
    Ok((u, (a, b)))
}

pub fn retract(v: &ScalarField, problem: &Problem, opts: &RetractOptions) -> Result<ScalarField> {
    retract_with_coefficients(v, problem, opts).map(|(u, _)| u)
}

/// A tangent vector and the multipliers removed from the input.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentProjection {
    pub tangent: ScalarField,
    /// Coefficient of the `u` direction.
    pub lambda: f64,
    /// Coefficient of the `qu` direction.
    pub beta: f64,
}

/// Projects `g` onto the tangent space of `M` at `u`, orthogonally in the
/// given metric: `g_t = g − λD₁ − βD₂` where `D₁, D₂` represent the
/// constraint differentials (`u`, `qu` in `L²`; `(−Δ)⁻¹u`, `(−Δ)⁻¹qu` in
/// `H¹₀`).
pub fn tangent_project(
    u: &ScalarField,
    g: &ScalarField,
    problem: &Problem,
    metric: GradientMetric,
) -> Result<TangentProjection> {
    let qu = problem.q.mul(u);
    let (d1, d2) = match metric {
        GradientMetric::L2 => (u.clone(), qu.clone()),
        GradientMetric::SobolevH10 => (
            solve_poisson_dirichlet(u, &problem.solver)?,
            solve_poisson_dirichlet(&qu, &problem.solver)?,
        ),
    };
    // In both metrics ⟨x, Dᵢ⟩ reduces to the L² pairing with u or qu.
    let g11 = u.inner(&d1);
    let g22 = qu.inner(&d2);
    let g12 = 0.5 * (u.inner(&d2) + qu.inner(&d1));
    let condition = gram_condition(g11, g12, g22);
    if condition > GRAM_CONDITION_LIMIT {
        return Err(Error::DegenerateConstraints { condition });
    }
    let rhs = [g.inner(u), g.inner(&qu)];
    let [lambda, beta] =
        solve2([[g11, g12], [g12, g22]], rhs).ok_or(Error::DegenerateConstraints { condition })?;
    let mut tangent = g.clone();
    tangent.axpy(-lambda, &d1);
    tangent.axpy(-beta, &d2);
    Ok(TangentProjection { tangent, lambda, beta })
}

/// Tangent part of the gradient of a functional, built from its `L²`
/// gradient `g`.
#[derive(Debug, Clone)]
pub struct TangentGradient {
    /// Metric representer of the tangential part.
    pub tangent: ScalarField,
    /// `g − λu − βqu`, the `L²` form of the tangential part.
    pub residual: ScalarField,
    pub lambda: f64,
    pub beta: f64,
    /// Metric norm of `tangent`.
    pub norm: f64,
}

/// Like [`tangent_project`] applied to the metric representer of `g`, but
/// the representer is taken of `g − λu − βqu` after the multipliers are
/// known, so its accuracy is relative to the (small) tangential part rather
/// than to `g`.
pub fn tangent_gradient(
    u: &ScalarField,
    g: &ScalarField,
    problem: &Problem,
    metric: GradientMetric,
) -> Result<TangentGradient> {
    let qu = problem.q.mul(u);
    let (d1, d2) = match metric {
        GradientMetric::L2 => (u.clone(), qu.clone()),
        GradientMetric::SobolevH10 => (
            solve_poisson_dirichlet(u, &problem.solver)?,
            solve_poisson_dirichlet(&qu, &problem.solver)?,
        ),
    };
    let g11 = u.inner(&d1);
    let g22 = qu.inner(&d2);
    let g12 = 0.5 * (u.inner(&d2) + qu.inner(&d1));
    let condition = gram_condition(g11, g12, g22);
    if condition > GRAM_CONDITION_LIMIT {
        return Err(Error::DegenerateConstraints { condition });
    }
    let rhs = [g.inner(&d1), g.inner(&d2)];
    let [lambda, beta] =
        solve2([[g11, g12], [g12, g22]], rhs).ok_or(Error::DegenerateConstraints { condition })?;
    let mut residual = g.clone();
    residual.axpy(-lambda, u);
    residual.axpy(-beta, &qu);
    let tangent = match metric {
        GradientMetric::L2 => residual.clone(),
        GradientMetric::SobolevH10 => solve_poisson_dirichlet(&residual, &problem.solver)?,
    };
    let norm = residual.inner(&tangent).max(0.0).sqrt();
    Ok(TangentGradient {
        tangent,
        residual,
        lambda,
        beta,
        norm,
    })
}

/// Axis-aligned sub-box `[lo, hi]` of the domain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Region {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Region {
    pub fn whole(problem: &Problem) -> Self {
        Region {
            lo: vec![0.0; problem.grid.dim()],
            hi: problem.grid.lengths().to_vec(),
        }
    }

    /// Distance from `x` to the nearest face, negative outside.
    fn depth(&self, x: &[f64]) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(x)
            .map(|((lo, hi), x)| (x - lo).min(hi - x))
            .fold(f64::INFINITY, f64::min)
    }

    fn strictly_inside(&self, x: &[f64]) -> bool {
        self.depth(x) > 0.0
    }

    fn min_width(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(lo, hi)| hi - lo)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Smallest bump radius, in grid cells.
pub const MIN_BUMP_CELLS: f64 = 3.0;
/// Empty layers kept between disjoint supports, in cells.
pub const SUPPORT_MARGIN_CELLS: f64 = 2.0;

/// `(1 − (r/R)²)²` clipped to zero, centered at node `center`.
fn plateau_bump(problem: &Problem, center: &[f64; MAX_DIM], radius: f64) -> ScalarField {
    let d = problem.grid.dim();
    ScalarField::from_fn(problem.grid.clone(), |x| {
        let r2: f64 = x.iter().zip(&center[..d]).map(|(x, c)| (x - c) * (x - c)).sum();
        let s = 1.0 - r2 / (radius * radius);
        if s > 0.0 {
            s * s
        } else {
            0.0
        }
    })
    .with_zero_boundary()
}

fn distance(a: &[f64; MAX_DIM], b: &[f64; MAX_DIM]) -> f64 {
    a.iter().zip(b).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Two disjoint bumps placed at the extremes of `q` inside `region`, mixed
/// so that both constraints hold exactly.
pub fn feasible_init(problem: &Problem, region: Option<&Region>) -> Result<ScalarField> {
    let whole = Region::whole(problem);
    let region = region.unwrap_or(&whole);
    let grid = &problem.grid;
    let d = grid.dim();
    let inside: Vec<usize> = (0..grid.node_count())
        .filter(|&i| region.strictly_inside(&grid.coords(i)[..d]) && !grid.is_boundary(i))
        .collect();
    if inside.is_empty() {
        return Err(Error::InfeasibleRegion("region contains no interior nodes".into()));
    }
    let q = problem.q.values();
    let alpha = problem.alpha;
    let region_q: Vec<f64> = inside.iter().map(|&i| q[i]).collect();
    let report = classify_values(&region_q, alpha, None);
    if report.class != FeasibilityClass::Interior {
        return Err(Error::InfeasibleRegion(format!(
            "alpha = {alpha} is {} for q in [{}, {}]",
            report.class, report.q_min, report.q_max
        )));
    }
    // Coarse grids get a second pass with smaller, touching bumps.
    for (min_cells, margin_cells) in [(MIN_BUMP_CELLS, SUPPORT_MARGIN_CELLS), (2.0, 0.0)] {
        if let Some(u) = bump_pair(problem, region, &inside, min_cells, margin_cells) {
            return Ok(u);
        }
    }
    Err(Error::InfeasibleRegion(format!(
        "no pair of disjoint bumps brackets alpha = {alpha}"
    )))
}

fn bump_pair(
    problem: &Problem,
    region: &Region,
    inside: &[usize],
    min_cells: f64,
    margin_cells: f64,
) -> Option<ScalarField> {
    let grid = &problem.grid;
    let d = grid.dim();
    let q = problem.q.values();
    let alpha = problem.alpha;
    let h = grid.max_spacing();
    let min_radius = min_cells * h;
    // Geometric shrinking, then every whole number of cells so that coarse
    // grids are not skipped over.
    let mut radii = Vec::new();
    let mut r = 0.5 * region.min_width();
    while r >= min_radius {
        radii.push(r);
        r *= 0.8;
    }
    let cells = (0.5 * region.min_width() / h).floor() as usize;
    radii.extend((min_cells as usize..=cells).rev().map(|m| m as f64 * h));
    for radius in radii {
        let valid: Vec<usize> = inside
            .iter()
            .copied()
            .filter(|&i| region.depth(&grid.coords(i)[..d]) >= radius - 1e-9 * h)
            .collect();
        let pick = |better: fn(f64, f64) -> bool| {
            valid.iter().copied().fold(None, |best: Option<usize>, i| match best {
                Some(b) if !better(q[i], q[b]) => Some(b),
                _ => Some(i),
            })
        };
        let (Some(lo), Some(hi)) = (pick(|a, b| a < b), pick(|a, b| a > b)) else {
            continue;
        };
        let (c_lo, c_hi) = (grid.coords(lo), grid.coords(hi));
        if distance(&c_lo, &c_hi) < 2.0 * radius + margin_cells * h - 1e-9 * h {
            continue;
        }
        let b_lo = plateau_bump(problem, &c_lo, radius);
        let b_hi = plateau_bump(problem, &c_hi, radius);
        let (n_lo, n_hi) = (b_lo.norm_l2(), b_hi.norm_l2());
        if n_lo == 0.0 || n_hi == 0.0 {
            continue;
        }
        let u_lo = b_lo.scale(1.0 / n_lo);
        let u_hi = b_hi.scale(1.0 / n_hi);
        let g_lo = problem.q.inner(&u_lo.mul(&u_lo));
        let g_hi = problem.q.inner(&u_hi.mul(&u_hi));
        if g_lo < alpha && alpha < g_hi {
            let s2 = (alpha - g_lo) / (g_hi - g_lo);
            let mut u = u_lo.scale((1.0 - s2).sqrt());
            u.axpy(s2.sqrt(), &u_hi);
            return Some(u);
        }
    }
    None
}

/// Disjoint-support members of `M` and sample points on the sphere they span.
#[derive(Debug, Clone)]
pub struct GenusSeeds {
    pub seeds: Vec<ScalarField>,
    pub regions: Vec<Region>,
    /// `Σcᵢuᵢ` with `Σcᵢ² = 1`.
    pub samples: Vec<ScalarField>,
}

/// `Σ cᵢ uᵢ`
pub fn sphere_combination(seeds: &[ScalarField], coeffs: &[f64]) -> ScalarField {
    let mut out = ScalarField::zeros(seeds[0].grid().clone());
    for (u, c) in seeds.iter().zip(coeffs) {
        out.axpy(*c, u);
    }
    out
}

/// Equal-width slabs along `x₁`, separated by `SUPPORT_MARGIN_CELLS`.
fn equal_slabs(problem: &Problem, k: usize) -> Vec<Region> {
    let grid = &problem.grid;
    let l = grid.lengths()[0];
    let h = grid.spacing()[0];
    (0..k)
        .map(|i| {
            let mut r = Region::whole(problem);
            r.lo[0] = i as f64 * l / k as f64 + if i > 0 { 0.5 * SUPPORT_MARGIN_CELLS * h } else { 0.0 };
            r.hi[0] = (i + 1) as f64 * l / k as f64
                - if i + 1 < k { 0.5 * SUPPORT_MARGIN_CELLS * h } else { 0.0 };
            r
        })
        .collect()
}

fn region_class(problem: &Problem, region: &Region) -> FeasibilityClass {
    let grid = &problem.grid;
    let d = grid.dim();
    let qs: Vec<f64> = (0..grid.node_count())
        .filter(|&i| !grid.is_boundary(i) && region.strictly_inside(&grid.coords(i)[..d]))
        .map(|i| problem.q.values()[i])
        .collect();
    if qs.is_empty() {
        return FeasibilityClass::Infeasible;
    }
    classify_values(&qs, problem.alpha, None).class
}

/// Fallback partition: grow each slab along `x₁` until `q − α` takes both
/// signs inside it and it is wide enough for two minimal bumps.
fn adaptive_slabs(problem: &Problem, k: usize) -> Result<Vec<Region>> {
    let grid = &problem.grid;
    let n = grid.nodes_per_axis()[0];
    let h = grid.spacing()[0];
    let min_width = (4.0 * MIN_BUMP_CELLS + 2.0 * SUPPORT_MARGIN_CELLS) * grid.max_spacing();
    let mut regions = Vec::with_capacity(k);
    let mut start = 0usize;
    for slab in 0..k {
        let mut end = start + 1;
        let found = loop {
            if end >= n {
                break false;
            }
            let mut r = Region::whole(problem);
            r.lo[0] = start as f64 * h;
            r.hi[0] = end as f64 * h;
            if r.hi[0] - r.lo[0] >= min_width && region_class(problem, &r) == FeasibilityClass::Interior {
                break true;
            }
            end += 1;
        };
        if !found {
            return Err(Error::SlabInfeasible(slab));
        }
        let mut r = Region::whole(problem);
        r.lo[0] = start as f64 * h;
        r.hi[0] = if slab + 1 == k { grid.lengths()[0] } else { end as f64 * h };
        regions.push(r);
        start = end + SUPPORT_MARGIN_CELLS as usize;
    }
    Ok(regions)
}

/// `k` members of `M` with pairwise disjoint supports (one per slab along
/// `x₁`) and `samples` random points of the sphere they span.
pub fn genus_seeds(problem: &Problem, k: usize, samples: usize, seed: u64) -> Result<GenusSeeds> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be ≥ 1".into()));
    }
    let regions = if k == 1 {
        vec![Region::whole(problem)]
    } else {
        let equal = equal_slabs(problem, k);
        if equal
            .iter()
            .all(|r| region_class(problem, r) == FeasibilityClass::Interior)
        {
            equal
        } else {
            adaptive_slabs(problem, k)?
        }
    };
    let seeds = regions
        .iter()
        .enumerate()
        .map(|(i, r)| feasible_init(problem, Some(r)).map_err(|_| Error::SlabInfeasible(i)))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..samples)
        .map(|_| {
            let c: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            let c: Vec<f64> = c.iter().map(|x| x / norm).collect();
            sphere_combination(&seeds, &c)
        })
        .collect();
    Ok(GenusSeeds {
        seeds,
        regions,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{BoundaryData, GridSpec};
    use crate::linsolve::LinearSolveOptions;

    fn linear_q(n: usize, alpha: f64) -> Problem {
        let g = GridSpec::cube(1, 1.0, n).unwrap();
        let q = ScalarField::from_fn(g.clone(), |x| x[0]);
        // α = ∮h₂ − ∮h₁ with h₂ split evenly over the two endpoints
        Problem::new(
            q,
            1.0,
            3.0,
            BoundaryData::zeros(g.clone()),
            BoundaryData::constant(g, alpha / 2.0),
            LinearSolveOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn zero_field_constraints() {
        let pb = linear_q(33, 0.5);
        let c = constraint_values(&ScalarField::zeros(pb.grid.clone()), &pb);
        assert_eq!(c.g1, -1.0);
        assert!((c.g2 + 0.5).abs() < 1e-15);
    }

    #[test]
    fn feasible_init_lands_on_m() {
        let pb = linear_q(129, 0.5);
        let u = feasible_init(&pb, None).unwrap();
        let c = constraint_values(&u, &pb);
        assert!(c.g1.abs() < 1e-10 && c.g2.abs() < 1e-10, "{c:?}");
        assert_eq!(u.max_abs_boundary(), 0.0);
    }

    #[test]
    fn feasible_init_near_q_max() {
        let pb = linear_q(65, 0.999);
        match feasible_init(&pb, None) {
            Ok(u) => assert!(constraint_values(&u, &pb).max_abs() < 1e-10),
            Err(e) => assert!(matches!(e, Error::InfeasibleRegion(_))),
        }
    }

    #[test]
    fn constant_q_is_infeasible_region() {
        let g = GridSpec::cube(1, 1.0, 33).unwrap();
        let pb = Problem::homogeneous(ScalarField::constant(g, 0.0), 1.0, 3.0).unwrap();
        assert!(matches!(feasible_init(&pb, None), Err(Error::InfeasibleRegion(_))));
    }

    #[test]
    fn retract_fixed_point_and_rescale() {
        let pb = linear_q(65, 0.5);
        let u = feasible_init(&pb, None).unwrap();
        let (same, ab) = retract_with_coefficients(&u, &pb, &RetractOptions::default()).unwrap();
        assert_eq!(ab, (1.0, 0.0));
        assert_eq!(same, u);
        let (back, (a, b)) = retract_with_coefficients(&u.scale(2.0), &pb, &RetractOptions::default()).unwrap();
        assert!((a - 0.5).abs() < 1e-12 && b.abs() < 1e-12);
        assert!(back.sub(&u).max_abs() < 1e-12);
    }

    #[test]
    fn retract_rejects_degenerate() {
        let g = GridSpec::cube(1, 1.0, 33).unwrap();
        let pb = Problem::homogeneous(ScalarField::constant(g.clone(), 2.0), 1.0, 3.0).unwrap();
        let v = ScalarField::from_fn(g, |x| x[0] * (1.0 - x[0]));
        assert!(matches!(
            retract(&v, &pb, &RetractOptions::default()),
            Err(Error::DegenerateDirection { .. })
        ));
        assert_eq!(
            retract(&ScalarField::zeros(pb.grid.clone()), &pb, &RetractOptions::default()),
            Err(Error::ZeroField)
        );
    }

    #[test]
    fn tangent_projection_kills_span() {
        let pb = linear_q(65, 0.5);
        let u = feasible_init(&pb, None).unwrap();
        let qu = pb.q.mul(&u);
        let mut g = u.scale(0.7);
        g.axpy(-1.3, &qu);
        let t = tangent_project(&u, &g, &pb, GradientMetric::L2).unwrap();
        assert!(t.tangent.norm_l2() < 1e-10 * g.norm_l2());
        assert!((t.lambda - 0.7).abs() < 1e-10 && (t.beta + 1.3).abs() < 1e-10);
    }

    #[test]
    fn genus_seeds_k1_is_feasible_init() {
        let pb = linear_q(65, 0.5);
        let s = genus_seeds(&pb, 1, 2, 7).unwrap();
        assert_eq!(s.seeds.len(), 1);
        assert_eq!(s.seeds[0], feasible_init(&pb, None).unwrap());
    }

    #[test]
    fn genus_seeds_monotone_q_fails_on_second_slab() {
        let pb = linear_q(129, 0.5);
        assert_eq!(genus_seeds(&pb, 3, 0, 0).unwrap_err(), Error::SlabInfeasible(1));
    }
}
