//! Behavior of the `sheq` binary: exit-code contract, manifest writing,
//! config-file precedence, and reproducibility of whole runs.

use std::path::{Path, PathBuf};
use std::process::Command;

fn sheq() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sheq"))
}

fn temp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sheq-cli-test-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()))
}

#[test]
fn moments_evaluates_lebesgue_row() {
    let dir = temp_dir("moments");
    let status = sheq()
        .args([
            "moments",
            "--measure",
            "lebesgue",
            "--nu",
            "1",
            "--lambda",
            "1",
            "--vv",
            "0",
            "--t",
            "1",
            "--x",
            "0",
            "--p",
            "2",
            "--out",
        ])
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = read(&dir.join("moments.csv"));
    assert!(csv.starts_with("formula_id,t,x,y,p,value,branch,tolerance_met"));
    // E[u^2] = 1 + H(1; 1, 1) = 1.9523604...
    let exact_row = csv.lines().find(|l| l.starts_with("second-moment-exact")).unwrap();
    let value: f64 = exact_row.split(',').nth(5).unwrap().parse().unwrap();
    assert!((value - 1.952_360_489_182_557_2).abs() < 1e-12, "{value}");
    // manifest records the resolved configuration
    let manifest = read(&dir.join("manifest.txt"));
    assert!(manifest.contains("command = moments"));
    assert!(manifest.contains("measure = lebesgue"));
    assert!(manifest.contains("version = sheq "));
}

#[test]
fn moments_dirac_matches_kernel() {
    let dir = temp_dir("moments-dirac");
    let status = sheq()
        .args(["moments", "--measure", "delta", "--nu", "1", "--lambda", "1", "--t", "0.5", "--x", "0", "--out"])
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = read(&dir.join("moments.csv"));
    let exact_row = csv.lines().find(|l| l.starts_with("second-moment-exact")).unwrap();
    let value: f64 = exact_row.split(',').nth(5).unwrap().parse().unwrap();
    // K(0.5, 0; 1, 1) for unit Dirac data.
    assert!((value - 0.630_892_978_888_979_1).abs() < 1e-12, "{value}");
}

#[test]
fn unknown_measure_exits_2() {
    let out = sheq()
        .args(["moments", "--measure", "nonsense", "--t", "1", "--x", "0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unknown measure"), "{err}");
}

#[test]
fn missing_required_parameter_exits_2() {
    let out = sheq().args(["moments", "--measure", "lebesgue"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn odd_moment_order_exits_2() {
    let out = sheq()
        .args(["moments", "--measure", "lebesgue", "--t", "1", "--x", "0", "--p", "3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("even"));
}

#[test]
fn divergent_moment_exits_3() {
    // Gaussian-growth data beyond its divergence time.
    let dir = temp_dir("divergent");
    let out = sheq()
        .args(["moments", "--measure", "exp_growth:1,2", "--t", "1", "--x", "0", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn picard_delta_prime_exits_3() {
    let dir = temp_dir("picard-prime");
    let out = sheq()
        .args(["picard", "--measure", "delta_prime", "--T", "1", "--t-cells", "60", "--L", "4", "--x-cells", "80", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let status = read(&dir.join("picard_status.txt"));
    assert!(status.contains("diverged"), "{status}");
}

#[test]
fn config_file_with_flag_override() {
    let dir = temp_dir("config");
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "measure = lebesgue\nnu = 1\nlambda = 2\nt = 1\nx = 0\n").unwrap();
    let status = sheq()
        .args(["moments", "--config"])
        .arg(&cfg)
        .args(["--lambda", "1", "--out"])
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    // flag wins: lambda = 1 gives the lambda = 1 closed form
    let csv = read(&dir.join("moments.csv"));
    let exact_row = csv.lines().find(|l| l.starts_with("second-moment-exact")).unwrap();
    let value: f64 = exact_row.split(',').nth(5).unwrap().parse().unwrap();
    assert!((value - 1.952_360_489_182_557_2).abs() < 1e-12, "{value}");
    let manifest = read(&dir.join("manifest.txt"));
    assert!(manifest.contains("lambda = 1"));
}

#[test]
fn simulate_rerun_is_byte_identical() {
    let dir = temp_dir("sim-determinism");
    let args = |out: &Path| {
        let mut cmd = sheq();
        cmd.args([
            "simulate",
            "--measure",
            "delta",
            "--seed",
            "7",
            "--M",
            "16",
            "--dx",
            "0.1",
            "--T",
            "0.1",
            "--L",
            "3",
            "--binary-fields",
            "1",
            "--probe",
            "0.1,0.0",
            "--out",
        ]);
        cmd.arg(out);
        cmd
    };
    assert!(args(&dir).status().unwrap().success());
    let first_fields = std::fs::read(dir.join("fields.csv")).unwrap();
    let first_binary = std::fs::read(dir.join("field-r0000.she1")).unwrap();
    let first_moments = std::fs::read(dir.join("mc_moments.csv")).unwrap();
    assert!(args(&dir).status().unwrap().success());
    assert_eq!(first_fields, std::fs::read(dir.join("fields.csv")).unwrap());
    assert_eq!(first_binary, std::fs::read(dir.join("field-r0000.she1")).unwrap());
    assert_eq!(first_moments, std::fs::read(dir.join("mc_moments.csv")).unwrap());
}

#[test]
fn validate_subset_writes_report_deterministically() {
    let dir = temp_dir("validate");
    let run = || {
        let status = sheq()
            .args(["validate", "--only", "lyapunov,bc-moment", "--seed", "11", "--out"])
            .arg(&dir)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(dir.join("report.csv")).unwrap()
    };
    let first = run();
    let second = run();
    assert_eq!(first, second);
    let text = String::from_utf8(first).unwrap();
    assert!(text.contains("lyapunov"));
    assert!(text.contains("true"));
}

#[test]
fn validate_unknown_criterion_exits_2() {
    let out = sheq().args(["validate", "--only", "not-a-criterion"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn validate_quick_mode_is_labelled() {
    let dir = temp_dir("validate-quick");
    let status = sheq()
        .args(["validate", "--quick", "--only", "lyapunov", "--out"])
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    let report = read(&dir.join("report.csv"));
    assert!(report.lines().skip(1).all(|l| l.is_empty() || l.ends_with(",quick")), "{report}");
}

#[test]
fn growth_writes_json_report() {
    let dir = temp_dir("growth");
    let status = sheq()
        .args([
            "growth",
            "--measure",
            "delta",
            "--nu",
            "1",
            "--lambda",
            "1",
            "--t-max",
            "40",
            "--out",
        ])
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    let json = read(&dir.join("growth.json"));
    assert!(json.contains("\"status\": \"ok\""), "{json}");
    assert!(json.contains("\"transition\""));
    assert!(json.contains("\"per_alpha\""));
}

#[test]
fn holder_writes_exponent_report() {
    let dir = temp_dir("holder");
    let status = sheq()
        .args([
            "holder",
            "--measure",
            "lebesgue",
            "--t0",
            "0.25",
            "--direction",
            "space",
            "--M",
            "12",
            "--dx",
            "0.05",
            "--out",
        ])
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    let json = read(&dir.join("holder.json"));
    assert!(json.contains("\"exponent\""), "{json}");
    assert!(json.contains("\"variogram\""));
}

#[test]
fn twopoint_emits_closed_and_general_rows() {
    let dir = temp_dir("twopoint");
    let status = sheq()
        .args([
            "twopoint",
            "--measure",
            "lebesgue",
            "--nu",
            "1",
            "--lambda",
            "1",
            "--t",
            "0.5",
            "--x",
            "0",
            "--y",
            "0.3",
            "--cache-t",
            "120",
            "--cache-x",
            "240",
            "--out",
        ])
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = read(&dir.join("twopoint.csv"));
    let closed: f64 = csv
        .lines()
        .find(|l| l.starts_with("two-point-closed"))
        .unwrap()
        .split(',')
        .nth(5)
        .unwrap()
        .parse()
        .unwrap();
    let general: f64 = csv
        .lines()
        .find(|l| l.starts_with("two-point-general"))
        .unwrap()
        .split(',')
        .nth(5)
        .unwrap()
        .parse()
        .unwrap();
    assert!((closed - general).abs() < 1e-4 * closed, "{closed} vs {general}");
    assert!(csv.lines().any(|l| l.starts_with("bc-integral")));
}
