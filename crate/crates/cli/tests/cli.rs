use std::path::Path;
use std::process::Command;

use voroflow::io::{read_convergence, read_diagnostics, read_snapshot};

fn voroflow(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_voroflow")).args(args).env("VOROFLOW_THREADS", "1").output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const PATCH: &str = "scenario = \"circular_patch\"\nresolution = 10\nt_end = 0.1\n[output]\nsnapshot_interval = 0.05\n";

#[test]
fn patch_smoke_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), PATCH);
    let out = dir.path().join("out");
    let o = voroflow(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let d = read_diagnostics(&out.join("diagnostics.csv")).unwrap();
    let t = d.column("time").unwrap();
    assert!(t.len() > 2);
    assert_eq!(t[0], 0.0);
    assert_eq!(*t.last().unwrap(), 0.1);
    assert!(t.windows(2).all(|w| w[1] > w[0]));
    // Snapshots at 0, 0.05 and 0.1.
    let snaps: Vec<_> = std::fs::read_dir(out.join("snapshots")).unwrap().collect();
    assert_eq!(snaps.len(), 3);
}

#[test]
fn snapshots_agree_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), PATCH);
    let out = dir.path().join("out");
    assert!(voroflow(&["run", &cfg, "--out", out.to_str().unwrap()]).status.success());
    let d = read_diagnostics(&out.join("diagnostics.csv")).unwrap();
    let (step, m0, m1, ux, uy, e) = (
        d.column("step").unwrap(),
        d.column("mass_0").unwrap(),
        d.column("mass_1").unwrap(),
        d.column("momentum_x").unwrap(),
        d.column("momentum_y").unwrap(),
        d.column("energy").unwrap(),
    );
    for k in 0..3 {
        let s = read_snapshot(&out.join(format!("snapshots/snapshot_{k:05}.vtk"))).unwrap();
        let row = step.iter().position(|&n| n == s.step as f64).unwrap();
        assert_eq!(d.column("time").unwrap()[row], s.time);
        assert_eq!(s.total_mass(Some(0)).unwrap(), m0[row]);
        assert_eq!(s.total_mass(Some(1)).unwrap(), m1[row]);
        let u = s.total_momentum().unwrap();
        let scale = m0[row] + m1[row];
        assert!((u.x - ux[row]).abs() <= 1e-12 * scale && (u.y - uy[row]).abs() <= 1e-12 * scale);
        assert!((s.total_energy().unwrap() - e[row]).abs() <= 1e-12 * e[row].abs().max(1.0));
    }
}

#[test]
fn reruns_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), PATCH);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(voroflow(&["run", &cfg, "--out", a.to_str().unwrap(), "--seed", "5"]).status.success());
    assert!(voroflow(&["run", &cfg, "--out", b.to_str().unwrap(), "--seed", "5"]).status.success());
    let read = |p: &Path| std::fs::read(p.join("diagnostics.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    let c = dir.path().join("c");
    assert!(voroflow(&["run", &cfg, "--out", c.to_str().unwrap(), "--seed", "6"]).status.success());
    assert_ne!(read(&a), read(&c));
}

#[test]
fn unknown_scenario_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "scenario = \"taylor_green\"\n");
    let o = voroflow(&["run", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("kind: UnknownScenario"), "{err}");
    assert!(err.contains("taylor_green"));
}

#[test]
fn invalid_overrides_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "scenario = \"circular_patch\"\nresolution = 2\n");
    assert_eq!(voroflow(&["run", &cfg]).status.code(), Some(2));
    assert_eq!(voroflow(&["run", "/nonexistent/run.toml"]).status.code(), Some(2));
}

#[test]
fn solver_failure_exits_three() {
    // A single CG iteration cannot solve the pressure system.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{PATCH}[solver]\ncg_max_iter = 1\n"));
    let out = dir.path().join("out");
    let o = voroflow(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let report = std::fs::read_to_string(out.join("error.txt")).unwrap();
    assert!(report.starts_with("error: solver\nkind: SolverDiverged\n"), "{report}");
    // Rows written before the failure are kept.
    assert_eq!(read_diagnostics(&out.join("diagnostics.csv")).unwrap().rows.len(), 1);
}

#[test]
fn list_scenarios() {
    let o = voroflow(&["list-scenarios"]);
    assert!(o.status.success());
    let names: Vec<String> = String::from_utf8_lossy(&o.stdout).lines().map(String::from).collect();
    assert_eq!(names.len(), 7);
    assert!(names.contains(&"shock_column".to_string()));
}

#[test]
fn converge_writes_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "scenario = \"circular_patch\"\nt_end = 0.2\n[output]\nsnapshots = false\n");
    let out = dir.path().join("conv");
    let o = voroflow(&["converge", &cfg, "--resolutions", "5,10", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_convergence(&out.join("convergence.csv")).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1].h, 0.5 * rows[0].h);
    assert!(rows[1].velocity_error < rows[0].velocity_error);
    assert!(out.join("res_5/diagnostics.csv").exists());
    assert!(String::from_utf8_lossy(&o.stdout).contains("order: velocity"));

    let dam = write_config(dir.path(), "scenario = \"dam_break\"\n");
    assert_eq!(voroflow(&["converge", &dam, "--resolutions", "5,10"]).status.code(), Some(2));
}

#[test]
fn shipped_configs_resolve() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut names = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let r = voroflow_cli::RunConfig::load(&path).unwrap().resolve().unwrap();
        names.push(r.scenario.name);
    }
    names.sort_unstable();
    let mut all = voroflow::bench::SCENARIOS.to_vec();
    all.sort_unstable();
    assert_eq!(names, all);
}
