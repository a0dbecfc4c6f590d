use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sgmf(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("run.toml");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_sgmf"))
        .arg("--config")
        .arg(&cfg)
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = sgmf(dir.path(), "[greens]\npairz = 3\n", &["greens-validate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("pairz"));
}

#[test]
fn even_tower_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = sgmf(dir.path(), "[run]\nmode = \"tower\"\nk = 2\n", &["construct"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("odd"));
}

#[test]
fn kernel_alpha_must_have_odd_half() {
    let dir = tempfile::tempdir().unwrap();
    let o = sgmf(dir.path(), "[identities]\nkernel_alphas = [4.0]\n", &["identities"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn greens_validate_passes_on_the_disk() {
    let dir = tempfile::tempdir().unwrap();
    let o = sgmf(dir.path(), "[greens]\npairs = 20\n", &["--out", "o", "greens-validate"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let csv = fs::read_to_string(dir.path().join("o/greens.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with('#')));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 21);
    assert!(stdout(&o).contains("PASS images"));
}

#[test]
fn coarse_mesh_fails_a_named_check() {
    let dir = tempfile::tempdir().unwrap();
    let o = sgmf(dir.path(), "[greens]\npairs = 10\nh = 0.15\n", &["--out", "o", "greens-validate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL images"));
    assert!(dir.path().join("o/checks.csv").exists());
}

#[test]
fn square_runs_only_the_symmetry_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[domain]\nshape = \"square\"\n[greens]\npairs = 10\n";
    let o = sgmf(dir.path(), cfg, &["--out", "o", "greens-validate"]);
    let out = stdout(&o);
    assert!(out.contains("symmetry"));
    assert!(!out.contains("images"));
}

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "seed = 7\n[greens]\npairs = 15\n[run]\nlambdas = [1e-3, 1e-4, 1e-5]\n";
    for (out, threads) in [("a", "1"), ("b", "3")] {
        assert_eq!(sgmf(dir.path(), cfg, &["--out", out, "--threads", threads, "greens-validate"]).status.code(), Some(0));
        assert_eq!(sgmf(dir.path(), cfg, &["--out", out, "--threads", threads, "construct"]).status.code(), Some(0));
    }
    for f in ["greens.csv", "sweep.csv", "fits.csv", "mass.json", "checks.csv"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between runs");
    }
}

#[test]
fn seed_changes_the_sample() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[greens]\npairs = 5\n";
    sgmf(dir.path(), cfg, &["--out", "a", "--seed", "1", "greens-validate"]);
    sgmf(dir.path(), cfg, &["--out", "b", "--seed", "2", "greens-validate"]);
    let a = fs::read(dir.path().join("a/greens.csv")).unwrap();
    let b = fs::read(dir.path().join("b/greens.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn reduce_at_the_critical_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[run]\ncenters = [[0.1, 0.05]]\nfind_critical = true\n";
    let o = sgmf(dir.path(), cfg, &["--out", "o", "reduce"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("PASS multipliers vanish"));
    let o = sgmf(dir.path(), "[run]\nmode = \"tower\"\n", &["--out", "o", "reduce"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn landscape_minimum_is_the_center() {
    let dir = tempfile::tempdir().unwrap();
    let o = sgmf(dir.path(), "[landscape]\ngrid = 5\nextent = 0.5\n", &["--out", "o", "landscape"]);
    assert_eq!(o.status.code(), Some(0));
    let s: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("o/landscape.json")).unwrap()).unwrap();
    assert_eq!(s["minimum_points"][0][0].as_f64(), Some(0.0));
    assert_eq!(s["at_range_edge"].as_bool(), Some(false));
}
