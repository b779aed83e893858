use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SBP: &str = env!("CARGO_BIN_EXE_sbp");

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(SBP)
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .arg("--quiet")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.cfg");
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn ground_example_solves_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let res = run(&["solve"], &example("ground_1d.cfg"), &out);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].ends_with(",true"), "{summary}");
    for f in ["u_0.csv", "phi_0.csv", "chi.csv", "report.json"] {
        assert!(out.join(f).exists(), "{f}");
    }

    let res = run(&["verify"], &example("ground_1d.cfg"), &out);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let residuals = fs::read_to_string(out.join("residuals.csv")).unwrap();
    assert_eq!(residuals.lines().count(), 2);
}

#[test]
fn summary_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run(&["solve"], &example("ground_1d.cfg"), &a).status.code(), Some(0));
    assert_eq!(run(&["solve"], &example("ground_1d.cfg"), &b).status.code(), Some(0));
    assert_eq!(
        fs::read(a.join("summary.csv")).unwrap(),
        fs::read(b.join("summary.csv")).unwrap()
    );
}

#[test]
fn infeasible_flux_balance_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(
        dir.path(),
        "domain.dim = 1\ngrid.n = 33\ncoupling.kind = affine\nboundary.h2.x0 = 1\nboundary.h2.x1 = 1\n",
    );
    let res = run(&["solve"], &cfg, &out);
    assert_eq!(res.status.code(), Some(2));
    assert!(!out.join("summary.csv").exists());
}

#[test]
fn constant_coupling_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    for value in ["0", "1"] {
        let cfg = write_config(
            dir.path(),
            &format!("domain.dim = 1\ngrid.n = 33\ncoupling.kind = constant\ncoupling.value = {value}\n"),
        );
        assert_eq!(run(&["solve"], &cfg, &out).status.code(), Some(2), "q = {value}");
        assert!(!out.join("summary.csv").exists());
    }
}

#[test]
fn feasibility_reports_class() {
    let dir = tempfile::tempdir().unwrap();
    let res = run(&["feasibility"], &example("ground_1d.cfg"), dir.path());
    assert_eq!(res.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&res.stdout).contains("class = interior"));
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "domain.dim = 1\ncoupling.kind = affine\nphysics.kapa = 2\n");
    let res = run(&["solve"], &cfg, dir.path());
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("physics.kapa"));
}

#[test]
fn oracle_subcommand_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "domain.dim = 1\ngrid.n = 17\nphysics.kappa = 0\ncoupling.kind = affine\nboundary.h2.x0 = 0.25\nboundary.h2.x1 = 0.25\n",
    );
    let out = dir.path().join("out");
    let res = run(&["oracle"], &cfg, &out);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let report = fs::read_to_string(out.join("oracle.json")).unwrap();
    assert!(report.contains("\"kkt\""));
}

#[test]
fn refine_writes_orders() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(
        dir.path(),
        "domain.dim = 1\ngrid.n = 65\ncoupling.kind = affine\nboundary.h2.x0 = 0.25\nboundary.h2.x1 = 0.25\nrun.grids = 65, 129, 257\n",
    );
    let res = run(&["refine"], &cfg, &out);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(fs::read_to_string(out.join("refinement.csv")).unwrap().lines().count(), 4);
}
