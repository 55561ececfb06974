//! End-to-end runs of the `nehari` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn nehari(args: &[&str], config: &Path, out: &Path) -> (i32, String, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_nehari"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap();
    (
        o.status.code().unwrap(),
        String::from_utf8_lossy(&o.stdout).into_owned(),
        String::from_utf8_lossy(&o.stderr).into_owned(),
    )
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.toml");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn validate_passes_on_the_default() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, _) = nehari(&["validate"], &configs().join("bounded.toml"), dir.path());
    assert_eq!(code, 0);
    assert!(!stdout.contains("FAIL"));
    for h in ["(F1)", "(F2)", "(F3)", "(F4)", "(F5)", "(V1)", "(V2)"] {
        assert!(stdout.contains(h), "{h} missing");
    }
    assert!(dir.path().join("bounded_validation.txt").exists());
}

#[test]
fn strong_coupling_is_rejected_with_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, stderr) = nehari(&["validate"], &configs().join("coupling_too_strong.toml"), dir.path());
    assert_eq!(code, 2);
    let failing: Vec<&str> = stdout.lines().filter(|l| l.contains("FAIL")).collect();
    assert_eq!(failing.len(), 1, "{stdout}");
    assert!(failing[0].starts_with("(V2)"));
    assert!(stderr.contains("hypothesis"));
}

#[test]
fn low_exponent_is_rejected_with_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, _) = nehari(&["validate"], &configs().join("exponent_below_q.toml"), dir.path());
    assert_eq!(code, 2);
    assert!(stdout.lines().any(|l| l.starts_with("(F4) [f1] FAIL")), "{stdout}");
    // solving commands refuse the same data with the same code
    let (code, _, _) = nehari(&["ground"], &configs().join("exponent_below_q.toml"), dir.path());
    assert_eq!(code, 2);
}

#[test]
fn fibering_slope_changes_sign_once() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[problem]\nlambda = \"0\"\n[output]\nlabel = \"sin\"\n");
    let (code, stdout, stderr) = nehari(&["fibering"], &cfg, dir.path());
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("sign_changes = 1"));
    let csv = fs::read_to_string(dir.path().join("sin_fibering.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,phi,dphi"));
    let slopes: Vec<f64> = lines.map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(slopes.len(), 1000);
    let changes = slopes.windows(2).filter(|w| (w[0] > 0.0) != (w[1] > 0.0)).count();
    assert_eq!(changes, 1);
    assert!(!csv.contains('\r'));
}

#[test]
fn ground_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = configs().join("bounded.toml");
    assert_eq!(nehari(&["ground", "--seed", "3"], &cfg, a.path()).0, 0);
    assert_eq!(nehari(&["ground", "--seed", "3"], &cfg, b.path()).0, 0);
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.iter().any(|n| n.to_string_lossy().ends_with("_u.grid")));
    for n in &names {
        assert_eq!(fs::read(a.path().join(n)).unwrap(), fs::read(b.path().join(n)).unwrap(), "{n:?}");
    }
    let report = fs::read_to_string(a.path().join("bounded_report.txt")).unwrap();
    for key in ["energy =", "grad_residual =", "quad =", "cross =", "fpart =", "qpart =", "total ="] {
        assert!(report.contains(key), "{key}");
    }
}

#[test]
fn label_names_the_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, _) = nehari(&["fountain", "--label", "ftn"], &configs().join("bounded.toml"), dir.path());
    assert_eq!(code, 0);
    let csv = fs::read_to_string(dir.path().join("ftn_fountain.csv")).unwrap();
    assert!(csv.starts_with("k,beta,r,b_lower,rho,a_max\n"));
    assert_eq!(csv.lines().count(), 31);
}

#[test]
fn multiplicity_writes_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, stderr) = nehari(&["multiplicity"], &configs().join("bounded.toml"), dir.path());
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("found 3 of 3"), "{stdout}");
    let manifest = fs::read_to_string(dir.path().join("bounded_manifest.txt")).unwrap();
    assert!(manifest.starts_with("solutions = 3\n"));
    for i in 0..3 {
        assert!(dir.path().join(format!("bounded_m{i}_u.grid")).exists());
    }
}

#[test]
fn stall_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[solve]\nmax_iters = 2\n");
    let (code, _, stderr) = nehari(&["ground"], &cfg, dir.path());
    assert_eq!(code, 3, "{stderr}");
    assert!(stderr.contains("iteration limit"));
}

#[test]
fn other_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "[problem]\nv1 = \"1 + sin(\"\n");
    let (code, _, stderr) = nehari(&["ground"], &bad, dir.path());
    assert_eq!(code, 1);
    assert!(stderr.contains("v1") && stderr.contains("byte"));
    // decay needs a torus
    let (code, _, _) = nehari(&["decay"], &configs().join("bounded.toml"), dir.path());
    assert_eq!(code, 1);
    let (code, _, _) = nehari(&["ground"], &dir.path().join("missing.toml"), dir.path());
    assert_eq!(code, 1);
}

#[test]
fn decay_on_a_modulated_torus() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, stderr) = nehari(&["decay"], &configs().join("periodic_modulated.toml"), dir.path());
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("decay: alpha"));
    let text = fs::read_to_string(dir.path().join("modulated_decay.txt")).unwrap();
    assert!(text.contains("alpha ="));
}
