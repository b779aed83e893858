//! Flat `key = value` run configuration.
//!
//! ```text
//! # comment
//! domain.dim = 1
//! domain.lengths = 1.0
//! grid.n = 129
//! physics.kappa = 1.0
//! physics.p = 3
//! coupling.kind = affine
//! coupling.a = 0
//! coupling.b = 1
//! boundary.h2.x0 = 0.25
//! boundary.h1.x1 = file:h1_x1.txt
//! run.mode = ground
//! ```

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::functional::GradientMetric;
use crate::grid::Face;
use crate::linsolve::LinearSolveOptions;
use crate::optimizer::OptimizeOptions;
use crate::problem::{CouplingSpec, FaceValue, ProblemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Ground,
    Excited,
    Verify,
    Refine,
    Oracle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    /// Nodes per axis.
    pub nodes: Vec<usize>,
    pub optimize: OptimizeOptions,
    pub mode: RunMode,
    pub k: usize,
    pub seed: u64,
    pub samples: usize,
    /// Nodes per axis for each refinement level.
    pub grids: Vec<usize>,
    pub output_dir: PathBuf,
    pub dump_fields: bool,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Parses configuration text; relative file references resolve
    /// against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut entries = Entries::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}", lineno + 1), "expected `key = value`"))?;
            let key = key.trim().to_string();
            if entries.items.iter().any(|(k, _)| *k == key) {
                return Err(Error::config(key, "duplicate key"));
            }
            entries.items.push((key, value.trim().to_string()));
        }
        let cfg = build(&mut entries, base)?;
        if let Some((key, _)) = entries.items.iter().find(|(k, _)| !entries.used.contains(k)) {
            return Err(Error::config(key.clone(), "unknown key"));
        }
        Ok(cfg)
    }
}

#[derive(Default)]
struct Entries {
    items: Vec<(String, String)>,
    used: Vec<String>,
}

impl Entries {
    fn raw(&mut self, key: &str) -> Option<String> {
        let found = self.items.iter().find(|(k, _)| k == key).map(|(_, v)| v.clone());
        if found.is_some() {
            self.used.push(key.to_string());
        }
        found
    }

    fn get<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| Error::config(key, format!("cannot parse `{v}`"))),
        }
    }

    fn required<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.raw(key).ok_or_else(|| Error::config(key, "missing"))?;
        v.parse().map_err(|_| Error::config(key, format!("cannot parse `{v}`")))
    }

    fn list<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .split([',', ' '])
                .filter(|s| !s.is_empty())
                .map(|s| s.parse().map_err(|_| Error::config(key, format!("cannot parse `{s}`"))))
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn face_values(entries: &mut Entries, which: &str, dim: usize, base: &Path) -> Result<Vec<FaceValue>> {
    (0..2 * dim)
        .map(|id| {
            let key = format!("boundary.{which}.{}", Face::from_id(id).name());
            match entries.raw(&key) {
                None => Ok(FaceValue::Constant(0.0)),
                Some(v) => match v.strip_prefix("file:") {
                    Some(path) => Ok(FaceValue::Tabulated(resolve(base, path.trim()))),
                    None => v
                        .parse()
                        .map(FaceValue::Constant)
                        .map_err(|_| Error::config(key, format!("cannot parse `{v}`"))),
                },
            }
        })
        .collect()
}

fn coupling(entries: &mut Entries, dim: usize, base: &Path) -> Result<CouplingSpec> {
    let kind: String = entries.required("coupling.kind")?;
    Ok(match kind.as_str() {
        "constant" => CouplingSpec::Constant {
            value: entries.required("coupling.value")?,
        },
        "affine" => CouplingSpec::Affine {
            a: entries.get("coupling.a", 0.0)?,
            b: entries.get("coupling.b", 1.0)?,
        },
        "radial_bump" => {
            let center = entries
                .list("coupling.center")?
                .ok_or_else(|| Error::config("coupling.center", "missing"))?;
            if center.len() != dim {
                return Err(Error::config("coupling.center", "needs one coordinate per axis"));
            }
            CouplingSpec::RadialBump {
                center,
                radius: entries.required("coupling.radius")?,
                base: entries.get("coupling.base", 0.0)?,
                height: entries.get("coupling.height", 1.0)?,
            }
        }
        "oscillating" => CouplingSpec::Oscillating {
            base: entries.get("coupling.base", 0.5)?,
            amplitude: entries.get("coupling.amplitude", 1.0)?,
            periods: entries.get("coupling.periods", 3.0)?,
        },
        "tabulated" => {
            let file: String = entries.required("coupling.file")?;
            CouplingSpec::Tabulated {
                path: resolve(base, &file),
            }
        }
        other => return Err(Error::config("coupling.kind", format!("unknown kind `{other}`"))),
    })
}

fn build(entries: &mut Entries, base: &Path) -> Result<RunConfig> {
    let dim: usize = entries.required("domain.dim")?;
    if !(1..=3).contains(&dim) {
        return Err(Error::config("domain.dim", "must be 1, 2 or 3"));
    }
    let lengths = entries.list::<f64>("domain.lengths")?.unwrap_or_else(|| vec![1.0; dim]);
    let lengths = match lengths.len() {
        1 => vec![lengths[0]; dim],
        l if l == dim => lengths,
        _ => return Err(Error::config("domain.lengths", "needs one or `dim` values")),
    };
    let nodes = entries.list::<usize>("grid.n")?.unwrap_or_else(|| vec![65]);
    let nodes = match nodes.len() {
        1 => vec![nodes[0]; dim],
        l if l == dim => nodes,
        _ => return Err(Error::config("grid.n", "needs one or `dim` values")),
    };

    let defaults = LinearSolveOptions::default();
    let solver = LinearSolveOptions {
        rel_tolerance: entries.get("solver.linear_tol", defaults.rel_tolerance)?,
        max_iterations: match entries.raw("solver.linear_max_iter") {
            None => defaults.max_iterations,
            Some(v) => Some(
                v.parse()
                    .map_err(|_| Error::config("solver.linear_max_iter", format!("cannot parse `{v}`")))?,
            ),
        },
        ..defaults
    };

    let problem = ProblemSpec {
        kappa: entries.get("physics.kappa", 1.0)?,
        p: entries.get("physics.p", 3.0)?,
        coupling: coupling(entries, dim, base)?,
        h1: face_values(entries, "h1", dim, base)?,
        h2: face_values(entries, "h2", dim, base)?,
        solver,
        lengths,
    };

    let d = OptimizeOptions::default();
    let metric = match entries.raw("solver.metric").as_deref() {
        None | Some("h1") | Some("sobolev") => GradientMetric::SobolevH10,
        Some("l2") => GradientMetric::L2,
        Some(other) => return Err(Error::config("solver.metric", format!("unknown metric `{other}`"))),
    };
    let mut optimize = OptimizeOptions {
        metric,
        grad_tol: entries.get("solver.grad_tol", d.grad_tol)?,
        max_iters: entries.get("solver.max_iters", d.max_iters)?,
        armijo_c: entries.get("solver.armijo_c", d.armijo_c)?,
        backtrack_factor: entries.get("solver.backtrack", d.backtrack_factor)?,
        initial_step: entries.get("solver.initial_step", d.initial_step)?,
        dedupe_l2: entries.get("solver.dedupe_l2", d.dedupe_l2)?,
        retract: d.retract,
    };
    optimize.retract.tol = entries.get("solver.retract_tol", d.retract.tol)?;
    optimize
        .validate()
        .map_err(|e| Error::config("solver", e.to_string()))?;

    let mode = match entries.raw("run.mode").as_deref() {
        None | Some("ground") => RunMode::Ground,
        Some("excited") => RunMode::Excited,
        Some("verify") => RunMode::Verify,
        Some("refine") => RunMode::Refine,
        Some("oracle") => RunMode::Oracle,
        Some(other) => return Err(Error::config("run.mode", format!("unknown mode `{other}`"))),
    };
    let grids = entries.list::<usize>("run.grids")?.unwrap_or_else(|| {
        let n = nodes[0];
        vec![n, 2 * n - 1, 4 * n - 3]
    });
    let k = entries.get("run.k", 1)?;
    if k == 0 {
        return Err(Error::config("run.k", "must be at least 1"));
    }
    Ok(RunConfig {
        problem,
        nodes,
        optimize,
        mode,
        k,
        seed: entries.get("run.seed", 0)?,
        samples: entries.get("run.samples", 8)?,
        grids,
        output_dir: resolve(Path::new("."), &entries.get("output.dir", "out".to_string())?),
        dump_fields: entries.get("output.dump_fields", true)?,
    })
}
