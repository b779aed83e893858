use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use serde_json::json;

use sbp_core::config::{RunConfig, RunMode};
use sbp_core::optimizer::{excited_states, ground_state, recover_multipliers, SolveResult};
use sbp_core::verify::{
    dense_oracle_compare, reconstruct_phi, refinement_study, residual_original_system, residuals_for,
    ResidualReport, StudyMode,
};
use sbp_core::{Error, FeasibilityClass, Problem, ScalarField};

/// Exit code for an infeasible or degenerate flux balance.
const EXIT_INFEASIBLE: u8 = 2;

#[derive(Parser)]
#[command(name = "sbp", version, about = "Constrained ground and excited states of a Schrödinger–Bopp–Podolsky system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for sphere sampling (overrides `run.seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Minimize on the constraint set (`run.mode = ground | excited`).
    Solve,
    /// Classify the flux balance against the range of q without solving.
    Feasibility,
    /// Recompute residuals for the fields of a previous `solve`.
    Verify,
    /// Solve on the grids of `run.grids` and tabulate observed orders.
    Refine,
    /// Compare the iterative solvers with dense direct solves.
    Oracle,
}

enum Failure {
    Infeasible(String),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<Error>() {
            Some(Error::InfeasibleRegion(_) | Error::DegenerateDirection { .. }) => Failure::Infeasible(format!("{e:#}")),
            _ => Failure::Other(e),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::from(anyhow::Error::new(e))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Infeasible(msg)) => {
            eprintln!("infeasible: {msg}");
            ExitCode::from(EXIT_INFEASIBLE)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let path = cli.config.as_ref().context("--config is required")?;
    let mut cfg = RunConfig::load(path).with_context(|| format!("reading {}", path.display()))?;
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let mode = match cli.command {
        Command::Solve => cfg.mode,
        Command::Feasibility => return feasibility(&cfg, cli.quiet),
        Command::Verify => RunMode::Verify,
        Command::Refine => RunMode::Refine,
        Command::Oracle => RunMode::Oracle,
    };
    fs::create_dir_all(&cfg.output_dir).with_context(|| format!("creating {}", cfg.output_dir.display()))?;
    match mode {
        RunMode::Ground | RunMode::Excited => solve(&cfg, mode, cli.quiet),
        RunMode::Verify => verify(&cfg, cli.quiet),
        RunMode::Refine => refine(&cfg, cli.quiet),
        RunMode::Oracle => oracle(&cfg, cli.quiet),
    }
}

fn build(cfg: &RunConfig) -> Result<Problem, Failure> {
    Ok(cfg.problem.build(&cfg.nodes)?)
}

fn print_feasibility(problem: &Problem) -> FeasibilityClass {
    let report = problem.feasibility();
    println!(
        "q_min = {:e}  q_max = {:e}  alpha = {:e}  class = {}  level_set_fraction = {:.4}",
        report.q_min, report.q_max, report.alpha, report.class, report.level_set_fraction
    );
    report.class
}

fn feasibility(cfg: &RunConfig, _quiet: bool) -> Result<(), Failure> {
    let problem = build(cfg)?;
    print_feasibility(&problem);
    Ok(())
}

/// Stops before any optimization when the flux balance lies outside the
/// range of q.
fn gate(problem: &Problem) -> Result<(), Failure> {
    match print_feasibility(problem) {
        FeasibilityClass::Infeasible => Err(Failure::Infeasible(format!(
            "alpha = {} lies outside [q_min, q_max]",
            problem.alpha
        ))),
        FeasibilityClass::BoundaryDegenerate => {
            log::warn!("alpha sits at the edge of the range of q; a feasible start may not exist");
            Ok(())
        }
        FeasibilityClass::Interior => Ok(()),
    }
}

/// All tolerances a reported state must meet.
fn accepted(result: &SolveResult, residuals: &ResidualReport, problem: &Problem, cfg: &RunConfig) -> bool {
    let multiplier_ok = result
        .multiplier_residual(problem)
        .map(|r| r <= 10.0 * cfg.optimize.grad_tol)
        .unwrap_or(false);
    result.converged
        && residuals.normalization <= 1e-10
        && residuals.compatibility <= 1e-8 * (1.0 + problem.alpha.abs())
        && multiplier_ok
}

const SUMMARY_HEADER: &str = "state,n,h,J,omega,mu,eq1_res,eq2_res,bc_res,norm_res,compat_res,iters,converged";

fn solve(cfg: &RunConfig, mode: RunMode, quiet: bool) -> Result<(), Failure> {
    let problem = build(cfg)?;
    gate(&problem)?;
    let states = match mode {
        RunMode::Excited => excited_states(&problem, cfg.k, cfg.samples, cfg.seed, &cfg.optimize)?,
        _ => vec![ground_state(&problem, &cfg.optimize)?],
    };
    let out = &cfg.output_dir;
    let mut summary = String::from(SUMMARY_HEADER);
    summary.push('\n');
    let mut reports = Vec::new();
    for (i, state) in states.iter().enumerate() {
        let residuals = residual_original_system(state, &problem)?;
        let ok = accepted(state, &residuals, &problem, cfg);
        summary.push_str(&format!(
            "{i},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{}\n",
            problem.grid.nodes_per_axis()[0],
            problem.grid.max_spacing(),
            state.j_value,
            state.omega,
            state.mu,
            residuals.eq1_residual,
            residuals.eq2_residual,
            residuals.bc_max(),
            residuals.normalization,
            residuals.compatibility,
            state.iterations,
            ok
        ));
        if cfg.dump_fields {
            state.u.write_csv(&out.join(format!("u_{i}.csv")))?;
            reconstruct_phi(state, &problem).write_csv(&out.join(format!("phi_{i}.csv")))?;
        }
        if !quiet {
            println!(
                "state {i}: J = {:.10e}  omega = {:.8e}  mu = {:.8e}  iterations = {}  converged = {ok}",
                state.j_value, state.omega, state.mu, state.iterations
            );
        }
        reports.push(json!({
            "state": i,
            "J": state.j_value,
            "omega": state.omega,
            "mu": state.mu,
            "energy": state.energy,
            "gradient_energy": state.gradient_energy(),
            "iterations": state.iterations,
            "tangent_grad_norm": state.tangent_grad_norm,
            "converged": ok,
            "residuals": residuals,
        }));
    }
    if cfg.dump_fields {
        problem.chi.write_csv(&out.join("chi.csv"))?;
    }
    write(&out.join("summary.csv"), &summary)?;
    let report = json!({
        "nodes": problem.grid.nodes_per_axis(),
        "lengths": problem.grid.lengths(),
        "kappa": problem.kappa,
        "p": problem.p,
        "alpha": problem.alpha,
        "feasibility": problem.feasibility(),
        "states": reports,
    });
    write(&out.join("report.json"), &pretty(&report)?)?;
    Ok(())
}

fn verify(cfg: &RunConfig, quiet: bool) -> Result<(), Failure> {
    let problem = build(cfg)?;
    let out = &cfg.output_dir;
    let mut text = String::from(
        "state,eq1_res,eq1_discrete,eq2_res,bc_u,bc_phi_n,bc_dphi_n,norm_res,compat_res,theta_mean\n",
    );
    let mut count = 0;
    loop {
        let path = out.join(format!("u_{count}.csv"));
        if !path.exists() {
            break;
        }
        let u = ScalarField::read_csv(&path)?;
        let u = ScalarField::new(problem.grid.clone(), u.into_values())
            .with_context(|| format!("{} does not match the configured grid", path.display()))?;
        let (omega, mu) = recover_multipliers(&u, &problem)?;
        let r = residuals_for(&u, omega, mu, &problem)?;
        text.push_str(&format!(
            "{count},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
            r.eq1_residual,
            r.eq1_discrete,
            r.eq2_residual,
            r.bc_u,
            r.bc_phi_n,
            r.bc_dphi_n,
            r.normalization,
            r.compatibility,
            r.theta_mean
        ));
        if !quiet {
            println!("state {count}: {r:?}");
        }
        count += 1;
    }
    if count == 0 {
        return Err(Failure::Other(anyhow::anyhow!("no u_<i>.csv fields in {}", out.display())));
    }
    write(&out.join("residuals.csv"), &text)
}

fn refine(cfg: &RunConfig, quiet: bool) -> Result<(), Failure> {
    let coarse = build(cfg)?;
    gate(&coarse)?;
    let mode = match cfg.mode {
        RunMode::Excited => StudyMode::Excited(cfg.k - 1),
        _ => StudyMode::Ground,
    };
    let table = refinement_study(&cfg.problem, &cfg.grids, mode, &cfg.optimize)?;
    table.write_csv(&cfg.output_dir.join("refinement.csv"))?;
    if !quiet {
        println!("eq1 orders: {:?}", table.eq1_orders);
        println!("bc orders:  {:?}", table.bc_orders);
        println!("J orders:   {:?}", table.j_orders);
    }
    write(&cfg.output_dir.join("refinement.json"), &pretty(&json!(table))?)
}

fn oracle(cfg: &RunConfig, quiet: bool) -> Result<(), Failure> {
    let problem = build(cfg)?;
    let report = dense_oracle_compare(&problem, &cfg.optimize, cfg.seed)?;
    if !quiet {
        println!("{report:?}");
    }
    write(&cfg.output_dir.join("oracle.json"), &pretty(&json!(report))?)
}

fn pretty(value: &serde_json::Value) -> Result<String, Failure> {
    Ok(serde_json::to_string_pretty(value).context("serializing report")?)
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
