use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fracopt_cli::output::TRAJECTORY_HEADER;

fn fracopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracopt"))
        .args(args)
        .output()
        .expect("spawn fracopt")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.conf");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

const SMALL: &str = "c1 = 0.0463\nc2 = 0.0463\ntf = 5\ndt = 0.5\n";

#[test]
fn version_flag() {
    let out = fracopt(&["--version"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), format!("fracopt {}", env!("CARGO_PKG_VERSION")));
}

#[test]
fn sweep_writes_table_and_trajectories() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out_dir = tmp.path().join("out");
    let out = fracopt(&[
        "run",
        "--config",
        &cfg,
        "--scenario",
        "chemo",
        "--alpha",
        "0.8,0.9",
        "--gamma1",
        "0.1,0.5",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let table = read(&out_dir.join("table.csv"));
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows[0], "alpha,gamma1=0.1,gamma1=0.5");
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("0.8,") && rows[2].starts_with("0.9,"));

    let traj = read(&out_dir.join("cell_0.9_0.5.csv"));
    let lines: Vec<&str> = traj.lines().collect();
    assert_eq!(lines[0], TRAJECTORY_HEADER);
    assert_eq!(lines.len(), 1 + 11);
    assert!(!traj.contains('\r'));
    for line in &lines[1..] {
        let u2: f64 = line.split(',').nth(7).unwrap().parse().unwrap();
        assert_eq!(u2, 0.0);
    }
    let cells = read(&out_dir.join("cells.csv"));
    assert_eq!(cells.lines().count(), 5);
    assert!(cells.lines().skip(1).all(|l| l.contains(",chemo,") && l.contains(",true,")));
}

#[test]
fn uncontrolled_run_has_zero_doses() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{SMALL}scenario = none\n"));
    let out_dir = tmp.path().join("out");
    let out = fracopt(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let traj = read(&out_dir.join("cell_0.9_0.1.csv"));
    for line in traj.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!((v[6], v[7]), (0.0, 0.0));
    }
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let mut tables = Vec::new();
    for workers in ["1", "4"] {
        let dir = tmp.path().join(format!("w{workers}"));
        let out = fracopt(&[
            "run",
            "--config",
            &cfg,
            "--alpha",
            "0.8,0.9,0.95",
            "--gamma1",
            "0.1,0.9",
            "--workers",
            workers,
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        tables.push((read(&dir.join("table.csv")), read(&dir.join("cell_0.95_0.9.csv"))));
    }
    assert_eq!(tables[0], tables[1]);
}

#[test]
fn bad_config_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "alpha = 1.2\n");
    let out = fracopt(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha must lie in (0,1)"));

    let cfg = write_config(tmp.path(), "unknown_key = 3\n");
    let out = fracopt(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}

#[test]
fn missing_fat_rates_warn() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "tf = 1\ndt = 0.5\n");
    let dir = tmp.path().join("out");
    let out = fracopt(&["run", "--config", &cfg, "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning: c1/c2 not set"));
}

#[test]
fn unconverged_cell_is_partial_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{SMALL}max_sweeps = 1\n"));
    let dir = tmp.path().join("out");
    let out = fracopt(&["run", "--config", &cfg, "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let cells = read(&dir.join("cells.csv"));
    assert!(cells.lines().nth(1).unwrap().contains(",false,"));
    assert!(dir.join("cell_0.9_0.1.csv").exists());
}

#[test]
fn sign_case_one_report() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = fixture("no_coexisting.conf");
    let mut reports = Vec::new();
    for run in ["a", "b"] {
        let dir = tmp.path().join(run);
        let out = fracopt(&[
            "equilibria",
            "--config",
            conf.to_str().unwrap(),
            "--u1",
            "0.5",
            "--u2",
            "0.5",
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        reports.push(fs::read(dir.join("report.txt")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    let text = String::from_utf8(reports.remove(0)).unwrap();
    assert!(text.contains("Descartes case (1)"));
    assert!(text.contains("case (1): no coexisting equilibrium"));
}

#[test]
fn stable_fixture_report() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = fixture("stable_tumor_free.conf");
    let dir = tmp.path().join("eq");
    let out = fracopt(&[
        "equilibria",
        "--config",
        conf.to_str().unwrap(),
        "--u1",
        "0.3",
        "--u2",
        "0.2",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = read(&dir.join("report.txt"));
    let tumor_free = text.split("[coexisting]").next().unwrap();
    assert!(tumor_free.contains("verdict: stable"));
    assert!(!tumor_free.contains("fails"));
}
