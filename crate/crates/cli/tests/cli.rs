use std::path::Path;
use std::process::Command;

fn geocontact() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_geocontact"));
    cmd.env_remove("GEOCONTACT_OUT_DIR");
    cmd
}

const SMALL: &str = r#"
name = "small"
mode = "kinematic"
eta = 100.0

[body.finger]
chart = "sphere"
radius = 0.04

[body.object]
chart = "sphere"
radius = 0.1

[[contact]]
object = ["pi/6", "pi/6"]
finger = ["pi/2", 0.0]
psi = "-pi/2"
finger_rates = [0.0, 0.5]
initial_slip = [0.01, 0.0]

[sigma]
coefficients = [1.2, 0.0, -0.4]

[integrator]
step = 1e-3
horizon = 0.05
"#;

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn list_builtin_names_every_scenario() {
    let out = geocontact().arg("list-builtin").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["sphere_eta100", "ellipsoid_eta100", "corollary_minjerk", "dynamic_case1"] {
        assert!(text.contains(name), "{name} missing from\n{text}");
    }
}

#[test]
fn validate_builtin_by_name() {
    let out = geocontact().args(["validate", "ellipsoid_eta100"]).output().unwrap();
    assert!(out.status.success());
}

#[test]
fn run_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "small.toml", SMALL);
    let out_dir = dir.path().join("out");
    let out = geocontact()
        .args(["run", file.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("small_contact0.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,u1,v1,u2,v2,psi,du1,dv1,du2,dv2,dpsi,v_rel_x,v_rel_y");
    assert_eq!(lines.count(), 51);
    let summary = std::fs::read_to_string(out_dir.join("small_summary.json")).unwrap();
    assert!(summary.contains("\"rejection_time\""));
}

#[test]
fn environment_overrides_output_dir_and_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "small.toml", SMALL);
    let mut logs = Vec::new();
    for k in 0..2 {
        let out_dir = dir.path().join(format!("env{k}"));
        let out = geocontact()
            .env("GEOCONTACT_OUT_DIR", &out_dir)
            .args(["run", file.to_str().unwrap()])
            .output()
            .unwrap();
        assert!(out.status.success());
        logs.push(std::fs::read(out_dir.join("small_contact0.csv")).unwrap());
    }
    assert_eq!(logs[0], logs[1]);
}

#[test]
fn step_override_changes_sample_count() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "small.toml", SMALL);
    let out_dir = dir.path().join("out");
    let out = geocontact()
        .args(["run", file.to_str().unwrap(), "--step", "5e-3", "--out", out_dir.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = std::fs::read_to_string(out_dir.join("small_contact0.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 11);
}

#[test]
fn validation_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", &SMALL.replace("eta = 100.0", "eta = -1.0"));
    let out = geocontact().args(["validate", bad.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("eta"));

    let out = geocontact().args(["run", "/no/such/file.toml"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    let garbled = write(dir.path(), "garbled.toml", "name = \n");
    let out = geocontact().args(["validate", garbled.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));

    let out = geocontact().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn numerical_failure_exits_with_two() {
    // a finger curve that runs into the pole of its chart
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL
        .replace("finger = [\"pi/2\", 0.0]", "finger = [0.05, 0.0]")
        .replace("finger_rates = [0.0, 0.5]", "finger_rates = [-5.0, 0.0]")
        .replace("horizon = 0.05", "horizon = 0.2");
    let file = write(dir.path(), "pole.toml", &text);
    let out = geocontact()
        .args(["run", file.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}
