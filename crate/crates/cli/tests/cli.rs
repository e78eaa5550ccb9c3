use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_clot"));
    cmd.env_remove("CLOT_THREADS");
    cmd
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn validator() -> jsonschema::Validator {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("schemas/envelope.schema.json");
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

/// Runs the binary, checks the exit code, and returns the schema-valid envelope.
fn run(args: &[&str], code: i32) -> Value {
    let out: Output = bin().args(args).output().unwrap();
    assert_eq!(
        out.status.code(),
        Some(code),
        "{args:?}\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    let env: Value = serde_json::from_slice(&out.stdout).unwrap();
    let v = validator();
    let errors: Vec<String> = v.iter_errors(&env).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}\n{env:#}");
    env
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn certificate_reports_constants() {
    let env = run(&["certificate", "--t", "1.5", "--delta", "0.4", "--g", "1", "--k", "3", "--mu", "0.2"], 0);
    let c = &env["outputs"]["certificate"];
    assert!((c["rho"].as_f64().unwrap() - 0.6551).abs() < 5e-5);
    assert!((c["mu_max"].as_f64().unwrap() - 0.2084).abs() < 5e-5);
    assert_eq!(c["valid"], false);
    assert_eq!(env["config"]["command"]["mu"], 0.2);

    let env = run(
        &["certificate", "--t", "1.5", "--delta", "0.4", "--k", "3", "--mu", "0.15", "--sigma-k", "0.1", "--epsilon", "0.01"],
        0,
    );
    assert_eq!(env["outputs"]["certificate"]["valid"], true);
    assert!(env["outputs"]["error_bounds"]["bound_lp"].as_f64().unwrap() > 0.0);
}

#[test]
fn certificate_errors_exit_one() {
    let env = run(&["certificate", "--t", "1.0", "--delta", "0.4", "--k", "3", "--mu", "0.2"], 1);
    assert_eq!(env["status"], "error");
    // bounds requested for an invalid certificate
    run(&["certificate", "--t", "1.5", "--delta", "0.4", "--k", "3", "--mu", "0.2", "--sigma-k", "0"], 1);
}

#[test]
fn usage_errors_exit_one() {
    let out = bin().args(["solve"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin().args(["frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin().args(["--help"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn devore_matrix_round_trips() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("a.csv");
    let env = run(
        &["matrix", "devore", "--t", "1.5", "--k", "3", "--delta", "0.4", "--n", "4000", "--r", "2", "-o", csv.to_str().unwrap()],
        0,
    );
    let out = &env["outputs"];
    assert_eq!((out["rows"].as_u64(), out["cols"].as_u64()), (Some(529), Some(4000)));
    assert_eq!(out["params"]["p"], 23);
    let a = clot_core_matrix(&csv);
    assert_eq!(a.len(), 529 * 4000);

    // both formats give the same values, bit for bit
    let small_csv = dir.path().join("s.csv");
    let small_trip = dir.path().join("s.txt");
    for (path, fmt) in [(&small_csv, "csv"), (&small_trip, "triplets")] {
        run(&["matrix", "devore", "--p", "5", "--n", "20", "-o", path.to_str().unwrap(), "--format", fmt], 0);
    }
    let x = clot_core_matrix(&small_csv);
    let y = clot_core_matrix(&small_trip);
    assert_eq!(x.len(), 25 * 20);
    assert!(x.iter().zip(&y).all(|(a, b)| a.to_bits() == b.to_bits()));
}

fn clot_core_matrix(path: &Path) -> Vec<f64> {
    // read back through the riporacle reader path: k = 1 succeeds on any valid file
    let env = run(&["riporacle", "-A", path.to_str().unwrap(), "--k", "1"], 0);
    assert!(env["outputs"]["estimate"]["delta_k"].as_f64().unwrap() < 1e-12);
    let text = std::fs::read_to_string(path).unwrap();
    let first = text.lines().next().unwrap();
    if first.contains(',') {
        text.lines().flat_map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()).collect::<Vec<_>>()).collect()
    } else {
        let dims: Vec<usize> = first.split_whitespace().map(|v| v.parse().unwrap()).collect();
        let mut dense = vec![0.0; dims[0] * dims[1]];
        for l in text.lines().skip(1) {
            let t: Vec<&str> = l.split_whitespace().collect();
            let (i, j): (usize, usize) = (t[0].parse().unwrap(), t[1].parse().unwrap());
            dense[i * dims[1] + j] = t[2].parse().unwrap();
        }
        dense
    }
}

#[test]
fn fixture_matrices_and_riporacle() {
    let dir = TempDir::new().unwrap();
    let id = dir.path().join("id.csv");
    run(&["matrix", "fixture", "--which", "identity", "--m", "4", "--n", "4", "-o", id.to_str().unwrap()], 0);
    let env = run(&["riporacle", "-A", id.to_str().unwrap(), "--k", "2"], 0);
    assert_eq!(env["outputs"]["estimate"]["delta_k"], 0.0);

    let dup = dir.path().join("dup.csv");
    run(&["matrix", "fixture", "--which", "duplicated", "--m", "4", "--n", "5", "-o", dup.to_str().unwrap()], 0);
    let env = run(&["riporacle", "-A", dup.to_str().unwrap(), "--k", "2"], 0);
    assert!((env["outputs"]["estimate"]["delta_k"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let env = run(&["riporacle", "-A", id.to_str().unwrap(), "--k", "3", "--max-supports", "2"], 1);
    assert!(env["error"].as_str().unwrap().contains("exceeds the limit"));
}

#[test]
fn solve_lasso_with_huge_lambda_is_zero() {
    let dir = TempDir::new().unwrap();
    let a = write(dir.path(), "a.csv", "1,0.5,0\n0,1,0.2\n0.3,0,1\n");
    let y = write(dir.path(), "y.csv", "1\n-2\n0.5\n");
    let env = run(&["solve", "--reg", "lasso", "--lambda", "1e9", "-A", &a, "-y", &y], 0);
    let x = env["outputs"]["result"]["x_hat"].as_array().unwrap();
    assert_eq!(x.len(), 3);
    assert!(x.iter().all(|v| v.as_f64() == Some(0.0)));
}

#[test]
fn solve_constrained_recovers_sparse_vector() {
    let dir = TempDir::new().unwrap();
    let a_path = dir.path().join("a.csv");
    run(&["matrix", "devore", "--p", "5", "--n", "40", "-o", a_path.to_str().unwrap()], 0);
    let text = std::fs::read_to_string(&a_path).unwrap();
    let rows: Vec<Vec<f64>> = text.lines().map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    let mut x = vec![0.0; 40];
    x[0] = 0.8147;
    x[1] = 0.9058;
    let y: Vec<String> = rows.iter().map(|r| r.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>().to_string()).collect();
    let y_path = write(dir.path(), "y.csv", &(y.join("\n") + "\n"));
    let x_out = dir.path().join("x.csv");
    let env = run(
        &[
            "solve", "--form", "constrained", "--eps", "0", "--reg", "clot", "--mu", "0.2",
            "-A", a_path.to_str().unwrap(), "-y", &y_path, "--x-out", x_out.to_str().unwrap(),
        ],
        0,
    );
    assert_eq!(env["outputs"]["regularizer"]["kind"], "clot");
    let xhat: Vec<f64> = std::fs::read_to_string(&x_out).unwrap().lines().map(|v| v.parse().unwrap()).collect();
    let err: f64 = xhat.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    assert!(err < 1e-6, "{err}");
}

#[test]
fn solve_input_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    let a = write(dir.path(), "a.csv", "1,0\n0,1\n");
    let y3 = write(dir.path(), "y3.csv", "1\n2\n3\n");
    let env = run(&["solve", "-A", &a, "-y", &y3], 1);
    assert!(env["error"].as_str().unwrap().contains("dimension mismatch"));

    let bad = write(dir.path(), "bad.csv", "1,0\n0,x\n");
    let env = run(&["solve", "-A", &bad, "-y", &y3], 1);
    assert!(env["error"].as_str().unwrap().contains("line 2, column 2"), "{}", env["error"]);

    let y2 = write(dir.path(), "y2.csv", "1\n2\n");
    run(&["solve", "-A", &a, "-y", &y2, "--reg", "nope"], 1);
    run(&["solve", "-A", &a, "-y", &y2, "--reg", "sgl", "--groups", "1,2"], 1);
    run(&["solve", "-A", "/nonexistent/a.csv", "-y", &y2], 1);
}

#[test]
fn solve_nonconvergence_exits_two() {
    let dir = TempDir::new().unwrap();
    let a = write(dir.path(), "a.csv", "1,0.9,0.3\n0.2,1,0.8\n0.5,0.1,1\n0.3,0.3,0.3\n");
    let y = write(dir.path(), "y.csv", "1\n-2\n0.5\n4\n");
    let env = run(&["solve", "-A", &a, "-y", &y, "--lambda", "0.01", "--max-iters", "1", "--kkt-tol", "1e-14"], 2);
    assert_eq!(env["status"], "not_converged");
    assert_eq!(env["outputs"]["result"]["converged"], false);
}

#[test]
fn sgl_solve_with_groups_on_the_loss_side() {
    let dir = TempDir::new().unwrap();
    let a = write(dir.path(), "a.csv", "1,0.9,0.3,0\n0.2,1,0.8,0.1\n0.5,0.1,1,0.4\n0.3,0.3,0.3,1\n");
    let y = write(dir.path(), "y.csv", "1\n-2\n0.5\n4\n");
    let env = run(
        &["solve", "-A", &a, "-y", &y, "--reg", "sgl", "--mu", "0.3", "--groups", "2,2", "--lambda", "2", "--side", "loss"],
        0,
    );
    assert_eq!(env["outputs"]["regularizer"]["partition"]["groups"][1][0], 2);
    assert!(env["outputs"]["result"]["kkt_residual"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn experiment_scaling_small_preset() {
    let dir = TempDir::new().unwrap();
    let env = run(
        &["--threads", "2", "experiment", "scaling", "--small", "--csv-dir", dir.path().to_str().unwrap()],
        0,
    );
    assert_eq!(env["config"]["threads"], 2);
    assert_eq!(env["config"]["scenario"]["generator"]["p"], 11);
    let rows = env["outputs"]["report"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 10);
    for r in rows.iter().filter(|r| r["method"] == "clot") {
        assert!(r["relative_error"].as_f64().unwrap() <= 1e-3);
    }
    let table = std::fs::read_to_string(dir.path().join("scaling.csv")).unwrap();
    assert_eq!(table.lines().count(), 11);
}

#[test]
fn experiment_comparison_with_overrides() {
    let cfg = configs().join("example1.json");
    let env = run(
        &["experiment", "comparison", "--config", cfg.to_str().unwrap(), "--replications", "2", "--seed", "5"],
        0,
    );
    assert_eq!(env["config"]["scenario"]["replications"], 2);
    assert_eq!(env["config"]["scenario"]["seed"], 5);
    assert_eq!(env["outputs"]["report"]["study"], "comparison");
    assert_eq!(env["outputs"]["report"]["records"].as_array().unwrap().len(), 6);
}

#[test]
fn experiment_grouping_and_paths_write_tables() {
    let dir = TempDir::new().unwrap();
    let cfg = configs().join("grouping.json");
    let env = run(
        &["experiment", "grouping", "--config", cfg.to_str().unwrap(), "--csv-dir", dir.path().to_str().unwrap()],
        0,
    );
    assert_eq!(env["outputs"]["tables"].as_array().unwrap().len(), 3);
    assert!(dir.path().join("path_clot.csv").exists());

    let cfg = configs().join("paths.json");
    let env = run(&["experiment", "paths", "--config", cfg.to_str().unwrap()], 0);
    assert_eq!(env["outputs"]["report"]["study"], "path_nonequivalence");
}

#[test]
fn experiment_rejects_mismatched_study_and_bad_config() {
    let cfg = configs().join("grouping.json");
    let env = run(&["experiment", "comparison", "--config", cfg.to_str().unwrap()], 1);
    assert!(env["error"].as_str().unwrap().contains("Grouping"));
    run(&["experiment", "grouping", "--config", cfg.to_str().unwrap(), "--small"], 1);
    run(&["experiment", "grouping"], 1);
    let dir = TempDir::new().unwrap();
    let bad = write(dir.path(), "bad.json", "{\"name\": 3}");
    run(&["experiment", "comparison", "--config", &bad], 1);
}

#[test]
fn report_flag_writes_envelope_file() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("r.json");
    let out = bin()
        .args(["certificate", "--t", "1.5", "--delta", "0.3", "--k", "2", "--mu", "0.1", "--report", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let env: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert!(validator().is_valid(&env));
    assert_eq!(env["command"], "certificate");
}

#[test]
fn thread_count_from_environment() {
    let out = bin()
        .env("CLOT_THREADS", "3")
        .args(["certificate", "--t", "1.5", "--delta", "0.3", "--k", "2", "--mu", "0.1"])
        .output()
        .unwrap();
    let env: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(env["config"]["threads"], 3);
}
