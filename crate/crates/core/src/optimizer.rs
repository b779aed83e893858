//! Retraction-based projected gradient descent of `J` on `M`, recovery of
//! the multipliers `(ω, μ)`, positivity polishing, and a multi-seed search
//! for excited states.

use log::{debug, warn};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functional::{eval_j, strong_gradient, EnergyBreakdown, GradientMetric};
use crate::grid::ScalarField;
use crate::manifold::{
    constraint_values, feasible_init, genus_seeds, on_manifold, retract, sphere_combination,
    tangent_gradient, ConstraintValues, RetractOptions,
};
use crate::problem::Problem;
use crate::reduction::{phi_map, PotentialPair};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimizeOptions {
    pub metric: GradientMetric,
    /// Stopping threshold on the `H¹₀` norm of the tangent gradient.
    pub grad_tol: f64,
    pub max_iters: usize,
    pub armijo_c: f64,
    pub backtrack_factor: f64,
    pub initial_step: f64,
    /// `L²` radius within which two states (up to sign) are the same.
    pub dedupe_l2: f64,
    pub retract: RetractOptions,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            metric: GradientMetric::SobolevH10,
            grad_tol: 1e-7,
            max_iters: 5000,
            armijo_c: 1e-4,
            backtrack_factor: 0.5,
            initial_step: 1.0,
            dedupe_l2: 1e-3,
            retract: RetractOptions::default(),
        }
    }
}

impl OptimizeOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.grad_tol,
            self.armijo_c,
            self.backtrack_factor,
            self.initial_step,
            self.dedupe_l2,
            self.retract.tol,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) || self.max_iters == 0 {
            return Err(Error::InvalidParameter("optimizer options must be positive".into()));
        }
        if self.backtrack_factor >= 1.0 {
            return Err(Error::InvalidParameter("backtrack_factor must be < 1".into()));
        }
        Ok(())
    }
}

/// Starting points must satisfy both constraints to this accuracy.
pub const START_TOL: f64 = 1e-8;
/// Smallest trial step before the line search gives up.
pub const MIN_STEP: f64 = 1e-14;
/// Relative slack in the sufficient-decrease test that absorbs rounding and
/// linear-solver noise in `J`.
pub const ARMIJO_NOISE: f64 = 1e-13;

/// One accepted iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub j: f64,
    pub tangent_grad_norm: f64,
    /// `‖J′(u) − λu − βqu‖_{L²}` with the tangent-projection multipliers.
    pub residual_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub u: ScalarField,
    pub omega: f64,
    pub mu: f64,
    pub j_value: f64,
    pub energy: EnergyBreakdown,
    pub iterations: usize,
    pub tangent_grad_norm: f64,
    pub constraint_residuals: ConstraintValues,
    pub phi_u: PotentialPair,
    /// `tangent_grad_norm ≤ grad_tol` was reached.
    pub converged: bool,
    pub trace: Vec<IterationRecord>,
}

impl SolveResult {
    /// `∫|∇u|²`
    pub fn gradient_energy(&self) -> f64 {
        self.u.gradient_energy()
    }

    /// `‖J′(u) − ωu + μqu‖_{L²}`: the discrete multiplier equation.
    pub fn multiplier_residual(&self, problem: &Problem) -> Result<f64> {
        let g = strong_gradient(&self.u, &self.phi_u, problem)?;
        Ok(multiplier_residual_field(&g, &self.u, self.omega, self.mu, problem).norm_l2())
    }
}

fn multiplier_residual_field(g: &ScalarField, u: &ScalarField, omega: f64, mu: f64, problem: &Problem) -> ScalarField {
    let qu = problem.q.mul(u);
    let mut r = g.clone();
    r.axpy(-omega, u);
    r.axpy(mu, &qu);
    r
}

/// Solves `⟨J′(u), v⟩ = ω∫uv − μ∫quv` for `v ∈ {u, qu}` given the `L²`
/// gradient `g`.
pub fn multipliers_from_gradient(g: &ScalarField, u: &ScalarField, problem: &Problem) -> Result<(f64, f64)> {
    let qu = problem.q.mul(u);
    let (m0, m1, m2) = (u.inner(u), qu.inner(u), qu.inner(&qu));
    let (r1, r2) = (g.inner(u), g.inner(&qu));
    // [m0 −m1; m1 −m2]·(ω, μ) = (r1, r2)
    let det = m1 * m1 - m0 * m2;
    if det.abs() <= 1e-12 * m0 * m2 {
        return Err(Error::SingularMultiplierSystem { gap: m2 * m0 - m1 * m1 });
    }
    let omega = (r1 * (-m2) - (-m1) * r2) / det;
    let mu = (m0 * r2 - m1 * r1) / det;
    Ok((omega, mu))
}

/// `(ω, μ)` for a point of `M`.
pub fn recover_multipliers(u: &ScalarField, problem: &Problem) -> Result<(f64, f64)> {
    let pair = phi_map(u, problem)?;
    let g = strong_gradient(u, &pair, problem)?;
    multipliers_from_gradient(&g, u, problem)
}

struct Evaluation {
    j: f64,
    energy: EnergyBreakdown,
    pair: PotentialPair,
}

fn evaluate(u: &ScalarField, problem: &Problem) -> Result<Evaluation> {
    let (j, energy, pair) = eval_j(u, problem)?;
    Ok(Evaluation { j, energy, pair })
}

/// Minimizes `J` on `M` from `u0 ∈ M`.
///
/// Hitting `max_iters` is not an error: the last (lowest) iterate is
/// returned with `converged == false`.
pub fn minimize_on_m(u0: &ScalarField, problem: &Problem, opts: &OptimizeOptions) -> Result<SolveResult> {
    opts.validate()?;
    if !on_manifold(u0, problem, START_TOL) {
        return Err(Error::InvalidParameter(format!(
            "starting point is off the constraint set: {:?}",
            constraint_values(u0, problem)
        )));
    }
    let mut u = u0.clone();
    let mut eval = evaluate(&u, problem)?;
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut tangent_norm;
    // Barzilai–Borwein trial step from the previous accepted step.
    let mut previous: Option<(ScalarField, ScalarField)> = None;
    loop {
        let g = strong_gradient(&u, &eval.pair, problem)?;
        let sob = tangent_gradient(&u, &g, problem, GradientMetric::SobolevH10)?;
        tangent_norm = sob.norm;
        let record = IterationRecord {
            j: eval.j,
            tangent_grad_norm: tangent_norm,
            residual_norm: sob.residual.norm_l2(),
            step: 0.0,
        };
        trace.push(record);
        if tangent_norm <= opts.grad_tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iters {
            warn!("stopped after {iterations} iterations, tangent gradient {tangent_norm:.3e}");
            break;
        }
        let descent = match opts.metric {
            GradientMetric::SobolevH10 => sob,
            GradientMetric::L2 => tangent_gradient(&u, &g, problem, GradientMetric::L2)?,
        };
        let direction = descent.tangent.scale(-1.0);
        // dJ along a tangent direction only sees the tangential part of g.
        let slope = descent.residual.inner(&direction);
        if !(slope < 0.0) {
            return Err(Error::LineSearchStall { step: 0.0 });
        }
        let mut t = match &previous {
            Some((u_prev, r_prev)) => {
                let step = u.sub(u_prev);
                let ss = match opts.metric {
                    GradientMetric::SobolevH10 => step.gradient_energy(),
                    GradientMetric::L2 => step.inner(&step),
                };
                let sy = step.inner(&descent.residual.sub(r_prev));
                if sy > 0.0 && ss > 0.0 {
                    (ss / sy).clamp(1e-6 * opts.initial_step, 1e6 * opts.initial_step)
                } else {
                    opts.initial_step
                }
            }
            None => opts.initial_step,
        };
        let noise = ARMIJO_NOISE * (1.0 + eval.j.abs());
        let (next_u, next_eval) = loop {
            if t < MIN_STEP {
                return Err(Error::LineSearchStall { step: t });
            }
            let mut v = u.clone();
            v.axpy(t, &direction);
            let trial = match retract(&v, problem, &opts.retract) {
                Ok(w) => w,
                Err(e) => {
                    debug!("retraction failed at step {t:.3e}: {e}");
                    t *= opts.backtrack_factor;
                    continue;
                }
            };
            let trial_eval = evaluate(&trial, problem)?;
            if trial_eval.j <= eval.j + opts.armijo_c * t * slope + noise {
                break (trial, trial_eval);
            }
            t *= opts.backtrack_factor;
        };
        if let Some(last) = trace.last_mut() {
            last.step = t;
        }
        previous = Some((u, descent.residual));
        u = next_u;
        eval = next_eval;
        iterations += 1;
    }
    let g = strong_gradient(&u, &eval.pair, problem)?;
    let (omega, mu) = multipliers_from_gradient(&g, &u, problem)?;
    Ok(SolveResult {
        constraint_residuals: constraint_values(&u, problem),
        u,
        omega,
        mu,
        j_value: eval.j,
        energy: eval.energy,
        iterations,
        tangent_grad_norm: tangent_norm,
        phi_u: eval.pair,
        converged,
        trace,
    })
}

/// Positivity threshold for polished ground states.
pub const POSITIVE_TOL: f64 = 1e-8;

/// Replaces `u` by `|u|` and minimizes again; the returned field satisfies
/// `min u ≥ −1e−8`.
pub fn polish_positive(result: &SolveResult, problem: &Problem, opts: &OptimizeOptions) -> Result<SolveResult> {
    let mut current = result.u.map(f64::abs);
    for _ in 0..3 {
        let start = retract(&current, problem, &opts.retract)?;
        let polished = minimize_on_m(&start, problem, opts)?;
        if polished.u.min() >= -POSITIVE_TOL {
            return Ok(polished);
        }
        current = polished.u.map(f64::abs);
    }
    Err(Error::ConsistencyViolation("polished state keeps a negative part".into()))
}

/// Feasible two-bump start, descent, then positivity polishing.
pub fn ground_state(problem: &Problem, opts: &OptimizeOptions) -> Result<SolveResult> {
    let u0 = feasible_init(problem, None)?;
    let first = minimize_on_m(&u0, problem, opts)?;
    let mut polished = polish_positive(&first, problem, opts)?;
    polished.iterations += first.iterations;
    let mut trace = first.trace;
    trace.append(&mut polished.trace);
    polished.trace = trace;
    Ok(polished)
}

/// `min(‖u − w‖, ‖u + w‖)`
pub fn signed_distance(u: &ScalarField, w: &ScalarField) -> f64 {
    u.sub(w).norm_l2().min(u.add(w).norm_l2())
}

/// Absolute energy gap below which two nearby states are merged.
pub const DEDUPE_ENERGY_TOL: f64 = 1e-6;

/// Drops states that coincide (up to sign) with an earlier one of lower `J`,
/// then sorts by `J`.
pub fn dedupe(mut states: Vec<SolveResult>, dedupe_l2: f64) -> Vec<SolveResult> {
    states.sort_by(|a, b| a.j_value.total_cmp(&b.j_value));
    let mut kept: Vec<SolveResult> = Vec::new();
    for s in states {
        let dup = kept.iter().any(|k| {
            signed_distance(&k.u, &s.u) <= dedupe_l2 && (k.j_value - s.j_value).abs() <= DEDUPE_ENERGY_TOL
        });
        if !dup {
            kept.push(s);
        }
    }
    kept
}

/// Up to `k` distinct constrained critical points ordered by `J`, found by
/// descent from disjoint-support seed families of size `1..=k` and from
/// points on the spheres they span.
///
/// This is a multi-start heuristic; it does not compute min-max levels.
pub fn excited_states(
    problem: &Problem,
    k: usize,
    samples: usize,
    seed: u64,
    opts: &OptimizeOptions,
) -> Result<Vec<SolveResult>> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be ≥ 1".into()));
    }
    let ground = ground_state(problem, opts)?;
    if k == 1 {
        return Ok(vec![ground]);
    }
    let mut starts = Vec::new();
    for j in 2..=k {
        match genus_seeds(problem, j, samples, seed.wrapping_add(j as u64)) {
            Ok(family) => {
                let equal = vec![1.0 / (j as f64).sqrt(); j];
                starts.push(sphere_combination(&family.seeds, &equal));
                starts.extend(family.seeds.iter().cloned());
                starts.extend(family.samples);
            }
            Err(e) => {
                warn!("no seed family of size {j}: {e}");
                break;
            }
        }
    }
    let mut found = vec![ground];
    for (i, start) in starts.iter().enumerate() {
        match minimize_on_m(start, problem, opts) {
            Ok(r) if r.converged => found.push(r),
            Ok(r) => warn!("start {i} did not converge (tangent gradient {:.3e})", r.tangent_grad_norm),
            Err(e) => warn!("start {i} failed: {e}"),
        }
    }
    let mut states = dedupe(found, opts.dedupe_l2);
    if states.len() < k {
        warn!("found {} distinct states, requested {k}", states.len());
    }
    states.truncate(k);
    Ok(states)
}

/// Palais–Smale health check: over the last `window` iterations the block
/// maxima (blocks of `window/10`) of the multiplier residual never grow.
pub fn palais_smale_healthy(trace: &[IterationRecord], window: usize) -> bool {
    let tail = &trace[trace.len().saturating_sub(window)..];
    let block = (window / 10).max(1);
    let maxima: Vec<f64> = tail
        .chunks(block)
        .map(|c| c.iter().map(|r| r.residual_norm).fold(0.0, f64::max))
        .collect();
    maxima.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-6) + 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{BoundaryData, GridSpec};
    use crate::linsolve::LinearSolveOptions;

    fn benchmark(n: usize, kappa: f64) -> Problem {
        let g = GridSpec::cube(1, 1.0, n).unwrap();
        Problem::new(
            ScalarField::from_fn(g.clone(), |x| x[0]),
            kappa,
            3.0,
            BoundaryData::zeros(g.clone()),
            BoundaryData::constant(g, 0.25),
            LinearSolveOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn rejects_start_off_manifold() {
        let pb = benchmark(33, 1.0);
        let u = feasible_init(&pb, None).unwrap().scale(1.1);
        assert!(matches!(
            minimize_on_m(&u, &pb, &OptimizeOptions::default()),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn converged_state_is_stationary() {
        let pb = benchmark(65, 1.0);
        let opts = OptimizeOptions::default();
        let r = ground_state(&pb, &opts).unwrap();
        assert!(r.converged);
        let again = minimize_on_m(&r.u, &pb, &opts).unwrap();
        assert!(again.iterations <= 1);
        assert!(again.u.min() >= -POSITIVE_TOL);
    }

    #[test]
    fn multipliers_even() {
        let pb = benchmark(33, 1.0);
        let u = feasible_init(&pb, None).unwrap();
        let a = recover_multipliers(&u, &pb).unwrap();
        let b = recover_multipliers(&u.scale(-1.0), &pb).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn singular_multiplier_system() {
        let g = GridSpec::cube(1, 1.0, 17).unwrap();
        let pb = Problem::homogeneous(ScalarField::constant(g.clone(), 1.0), 1.0, 3.0).unwrap();
        let u = ScalarField::from_fn(g, |x| (std::f64::consts::PI * x[0]).sin()).with_zero_boundary();
        assert!(matches!(
            recover_multipliers(&u, &pb),
            Err(Error::SingularMultiplierSystem { .. })
        ));
    }

    #[test]
    fn health_check_on_synthetic_traces() {
        let rec = |r| IterationRecord {
            j: 0.0,
            tangent_grad_norm: r,
            residual_norm: r,
            step: 1.0,
        };
        let decreasing: Vec<_> = (0..200).map(|i| rec(0.9f64.powi(i))).collect();
        assert!(palais_smale_healthy(&decreasing, 100));
        let growing: Vec<_> = (0..200).map(|i| rec(1.01f64.powi(i))).collect();
        assert!(!palais_smale_healthy(&growing, 100));
    }
}
