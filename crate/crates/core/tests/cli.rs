//! End-to-end checks of the `vdpsync` binary: exit codes, output formats
//! and reproduction from embedded configuration.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn vdpsync(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vdpsync"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

/// Data rows of a CSV output, skipping `#` metadata and the header.
fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let text = fs::read_to_string(path).unwrap();
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    let idx = header.split(',').position(|h| h == name).unwrap_or_else(|| panic!("no column {name} in {header}"));
    rows(path).into_iter().map(|r| r[idx].clone()).collect()
}

const SMALL: &str = r#"
seed = 17
[physics]
delta_omega = 1.0
coupling = 20.0
[ensemble]
n_trajectories = 6
averaging_time = 5.0
[trajectory]
total_time = 3.0
"#;

#[test]
fn steady_fig1_csv_reports_locking_phase() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    let res = vdpsync(&["steady", "--preset", "fig1", "--out", out]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let summary = dir.path().join("steady_summary.csv");
    let text = fs::read_to_string(&summary).unwrap();
    assert!(text.lines().any(|l| l.starts_with("# config: ")));
    let phi: f64 = column(&summary, "delta_phi_pi")[0].parse().unwrap();
    assert!((phi + 0.007692).abs() < 1e-6, "{phi}");
    let p: f64 = column(&summary, "p")[0].parse().unwrap();
    assert!(p > 0.0 && p < 1.0);
}

#[test]
fn steady_json_has_envelope() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    let res = vdpsync(&["steady", "--preset", "figS1", "--format", "json", "--out", out]);
    assert_eq!(code(&res), 0);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("steady.json")).unwrap()).unwrap();
    assert_eq!(v["command"], "steady");
    assert!(v["config"].is_object());
    assert!(v["data"].is_object() || v["data"].is_array());
}

#[test]
fn config_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(code(&vdpsync(&["steady", "--preset", "nope", "--out", out])), 2);
    assert_eq!(code(&vdpsync(&["steady", "--config", "/definitely/missing.toml", "--out", out])), 2);
    let bad = write(dir.path(), "bad.toml", "[physics\ncoupling = 1");
    assert_eq!(code(&vdpsync(&["steady", "--config", &bad, "--out", out])), 2);
    let negative = write(dir.path(), "neg.toml", "[physics]\ncoupling = -1.0\n");
    assert_eq!(code(&vdpsync(&["steady", "--config", &negative, "--out", out])), 2);
    let unknown = write(dir.path(), "unknown.toml", "[physics]\ncuopling = 1.0\n");
    assert_eq!(code(&vdpsync(&["steady", "--config", &unknown, "--out", out])), 2);
    // a sweep needs a grid
    assert_eq!(code(&vdpsync(&["sweep", "--preset", "fig1", "--out", out])), 2);
}

#[test]
fn numerical_failure_exits_3() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    // two levels cannot hold a weakly damped oscillator: every trajectory
    // leaks past the cutoff
    let cfg = write(
        dir.path(),
        "leaky.toml",
        "[physics]\ncoupling = 100.0\nmode = { kind = \"finite-truncation\", gamma_down = 0.5, levels = 2 }\n\
         [ensemble]\nn_trajectories = 4\naveraging_time = 10.0\n",
    );
    let res = vdpsync(&["ensemble", "--config", &cfg, "--out", out]);
    assert_eq!(code(&res), 3, "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn trajectory_reproduces_from_its_own_output() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let first = dir.path().join("a");
    let res = vdpsync(&["trajectory", "--config", &cfg, "--traj", "3", "--out", first.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let csv = first.join("trajectory.csv");
    assert_eq!(
        fs::read_to_string(&csv).unwrap().lines().find(|l| !l.starts_with('#')).unwrap(),
        "t,c_abs,delta_phi,pearson,x1,x2,entropy"
    );

    let second = dir.path().join("b");
    let res = vdpsync(&["trajectory", "--config", csv.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert_eq!(code(&res), 0);
    assert_eq!(rows(&csv), rows(&second.join("trajectory.csv")));
    assert!(rows(&csv).len() > 10);
}

#[test]
fn ensemble_output_is_independent_of_threads() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("t{threads}"));
        let res = vdpsync(&["ensemble", "--config", &cfg, "--threads", threads, "--format", "json", "--out", out.to_str().unwrap()]);
        assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
        let files: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).collect();
        assert_eq!(files.len(), 1, "{files:?}");
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&files[0]).unwrap()).unwrap();
        outputs.push(v["data"].clone());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn ensemble_csv_writes_histograms_that_integrate_to_one() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let out = dir.path().join("csv");
    let res = vdpsync(&["ensemble", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let hist = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.to_string_lossy().ends_with("_hist_entropy.csv"))
        .expect("entropy histogram");
    let centers: Vec<f64> = column(&hist, "bin_center").iter().map(|s| s.parse().unwrap()).collect();
    let density: Vec<f64> = column(&hist, "density").iter().map(|s| s.parse().unwrap()).collect();
    // uniform bins
    let width = centers[1] - centers[0];
    let integral: f64 = density.iter().map(|d| d * width).sum();
    assert!((integral - 1.0).abs() < 1e-9, "{integral}");
}

#[test]
fn analytic_sweep_covers_grid() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    let res = vdpsync(&["sweep", "--preset", "fig2b", "--out", out]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let sweep = dir.path().join("sweep.csv");
    let cabs: Vec<f64> = column(&sweep, "c_pi_abs").iter().map(|s| s.parse().unwrap()).collect();
    assert!(cabs.len() > 100);
    assert!(cabs.iter().all(|c| (0.0..=1.0).contains(c)));
}
