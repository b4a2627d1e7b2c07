use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn jetmech(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jetmech")).args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) -> String {
    let out = jetmech(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Largest spread of a CSV column.
fn column_drift(csv: &str, name: &str) -> f64 {
    let mut lines = csv.lines();
    let col = lines.next().unwrap().split(',').position(|h| h == name).expect("column present");
    let values: Vec<f64> = lines.map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect();
    values.iter().map(|v| (v - values[0]).abs()).fold(0.0, f64::max)
}

#[test]
fn derive_prints_lagrange_operator() {
    let text = run_ok(&["derive", "--system", path(&fixture("oscillator.toml"))]);
    assert!(text.contains("E1 = -q1 - qtt1"), "{text}");
    assert!(text.contains("p1 = qt1"));
}

#[test]
fn derive_in_a_rotating_chart() {
    let text = run_ok(&["derive", "--system", path(&fixture("rotation.toml")), "--transform", "rotating"]);
    assert!(text.contains("qtt1 = (49/100)*q1 - (7/5)*qt2"), "{text}");
}

#[test]
fn noether_reports_symmetry() {
    let text = run_ok(&["noether", "--system", path(&fixture("free_particle.toml")), "--symmetry", "shift"]);
    assert!(text.starts_with("shift: symmetry: yes;"), "{text}");
    assert!(text.contains("current: qt1;"));
    let drift: f64 = text.trim().rsplit(' ').next().unwrap().parse().unwrap();
    assert!(drift <= 1e-6);

    let text = run_ok(&["noether", "--system", path(&fixture("oscillator.toml")), "--symmetry", "shift"]);
    assert!(text.contains("symmetry: no"), "{text}");
}

#[test]
fn hamilton_run_keeps_energy() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["simulate", "--hamilton", "--system", path(&fixture("oscillator.toml")), "--out", path(dir.path())]);
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,q1,p1,energy\n"));
    assert!(column_drift(&csv, "energy") <= 1e-6);
}

#[test]
fn output_is_deterministic() {
    for (command, system, file) in [
        ("simulate", "oscillator.toml", "trajectory.csv"),
        ("noether", "oscillator.toml", "noether.csv"),
        ("quantum", "quantum_oscillator.toml", "observables.csv"),
    ] {
        let system = fixture(system);
        let runs: Vec<Vec<u8>> = (0..2)
            .map(|_| {
                let dir = tempfile::tempdir().unwrap();
                run_ok(&[command, "--system", path(&system), "--out", path(dir.path())]);
                std::fs::read(dir.path().join(file)).unwrap()
            })
            .collect();
        assert!(!runs[0].is_empty());
        assert_eq!(runs[0], runs[1], "{file}");
    }
}

#[test]
fn quantum_writes_snapshots_and_observables() {
    let dir = tempfile::tempdir().unwrap();
    let text = run_ok(&["quantum", "--system", path(&fixture("quantum_oscillator.toml")), "--out", path(dir.path())]);
    assert!(text.contains("dirac check"), "{text}");
    let snaps = std::fs::read_to_string(dir.path().join("snapshots.csv")).unwrap();
    assert!(snaps.starts_with("t,x,re_rho,im_rho\n"));
    let obs = std::fs::read_to_string(dir.path().join("observables.csv")).unwrap();
    assert!(obs.starts_with("t,norm,"), "{obs}");
    assert!(column_drift(&obs, "norm") <= 1e-10);
}

#[test]
fn malformed_fixtures_are_rejected() {
    let dir = fixture("malformed");
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    assert!(files.len() >= 10);
    for file in files {
        let src = std::fs::read_to_string(&file).unwrap();
        let section = src.lines().next().and_then(|l| l.strip_prefix("# expect: ")).expect("expect header");
        for command in ["derive", "simulate", "frame", "quantum"] {
            let out = jetmech(&[command, "--system", path(&file)]);
            let stderr = String::from_utf8_lossy(&out.stderr);
            assert_eq!(out.status.code(), Some(2), "{command} {}", file.display());
            assert_eq!(stderr.lines().count(), 1, "{stderr}");
            assert!(stderr.contains(section), "{}: {stderr}", file.display());
        }
    }
}

#[test]
fn numerical_failures_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let sys = dir.path().join("blowup.toml");
    std::fs::write(
        &sys,
        "[system]\ndimension = 1\nlagrangian = \"qt1^2/2 + q1^4\"\n[simulation]\nt1 = 10.0\ndt = 0.01\nq = [10.0]\nqt = [0.0]\n",
    )
    .unwrap();
    let out = jetmech(&["simulate", "--system", path(&sys)]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_names_and_missing_files() {
    let out = jetmech(&["frame", "--system", path(&fixture("rotation.toml")), "--frame", "spinning"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[frames]"));
    let out = jetmech(&["derive", "--system", "/nonexistent/system.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[file]"));
}
