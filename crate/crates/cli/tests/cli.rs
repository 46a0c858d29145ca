//! End-to-end tests of the covctl binary: exit codes, file outputs,
//! manifests and reproducibility.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_covctl"))
}

fn example_model() -> &'static str {
    covctl_core::testutil::EXAMPLE3_JSON
}

fn write_model(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("model.json");
    std::fs::write(&path, example_model()).unwrap();
    path
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn validate_accepts_example() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path());
    let out = run_in(dir.path(), &["validate", model.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("model ok"));
    assert!(dir.path().join("validate.manifest.json").exists());
}

#[test]
fn validate_rejects_garbage_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\"n\": 3}").unwrap();
    let out = run_in(dir.path(), &["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn synth_reports_alpha_and_writes_gain() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path());
    let out = run_in(dir.path(), &["synth", model.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("alpha = 0.78"), "{text}");
    let gain = dir.path().join("gain.json");
    assert!(gain.exists());
    assert!(dir.path().join("gain.json.manifest.json").exists());

    // The written gain round-trips through steady.
    let out = run_in(
        dir.path(),
        &[
            "steady",
            model.to_str().unwrap(),
            "--gain",
            gain.to_str().unwrap(),
        ],
    );
    assert!(out.status.success());
    assert!(stdout(&out).contains("steady-state covariance"));
}

#[test]
fn steady_matches_synthesized_gain_path() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path());
    let ss = dir.path().join("ss.csv");
    let out = run_in(
        dir.path(),
        &[
            "steady",
            model.to_str().unwrap(),
            "--synthesize",
            "--out",
            ss.to_str().unwrap(),
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&ss).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let first: f64 = csv.lines().next().unwrap().split(',').next().unwrap().parse().unwrap();
    assert!((first - 1.79).abs() < 0.02, "steady (1,1) = {first}");
}

#[test]
fn cp_writes_csv_and_empirical_sibling() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path());
    let cp = dir.path().join("cp.csv");
    let out = run_in(
        dir.path(),
        &[
            "cp",
            model.to_str().unwrap(),
            "--empirical",
            "20000",
            "--seed",
            "7",
            "--out",
            cp.to_str().unwrap(),
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&cp).unwrap();
    assert_eq!(csv.lines().count(), 9);
    let first: f64 = csv.lines().next().unwrap().split(',').next().unwrap().parse().unwrap();
    assert!((first - 0.21).abs() < 1e-12, "C_p (1,1) = {first}");
    assert!(dir.path().join("cp.empirical.csv").exists());
    assert!(dir.path().join("cp.csv.manifest.json").exists());
}

#[test]
fn propagate_writes_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path());
    let traj = dir.path().join("traj.csv");
    let out = run_in(
        dir.path(),
        &[
            "propagate",
            model.to_str().unwrap(),
            "--synthesize",
            "--horizon",
            "10",
            "--out",
            traj.to_str().unwrap(),
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&traj).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("k,cov_11,"));
    assert_eq!(lines.count(), 11);
}

#[test]
fn simulate_is_seed_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path());
    let run = |out_dir: &str| {
        let out = run_in(
            dir.path(),
            &[
                "simulate",
                model.to_str().unwrap(),
                "--synthesize",
                "--trials",
                "200",
                "--horizon",
                "5",
                "--seed",
                "3",
                "--out",
                out_dir,
            ],
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read_to_string(dir.path().join(out_dir).join("empirical.csv")).unwrap()
    };
    let a = run("sim_a");
    let b = run("sim_b");
    assert_eq!(a, b);
    assert!(dir.path().join("sim_a/theoretical.csv").exists());
    assert!(dir.path().join("sim_a/comparison.csv").exists());
    assert!(dir.path().join("sim_a/theoretical.csv.manifest.json").exists());
}

#[test]
fn simulate_without_gain_source_fails_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path());
    let out = run_in(dir.path(), &["simulate", model.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn benchmark_writes_csv_with_header() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("bench.csv");
    let out = run_in(
        dir.path(),
        &[
            "benchmark",
            "--n-list",
            "2,3",
            "--reps",
            "10",
            "--seed",
            "5",
            "--out",
            csv_path.to_str().unwrap(),
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "n,repetitions,median_ms,mean_ms,p95_ms,alpha_median"
    );
    assert_eq!(lines.count(), 2);
}
