use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn shadowlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shadowlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL_PAULI: &str = "experiment = pauli_grid\nn = 3\nm_values = 4, 8\nk_values = 1, 4\ntrials = 100\nseed = 11\n";

#[test]
fn verify_fast_reports_every_check() {
    let out = shadowlab(&["verify", "--level", "fast"]);
    assert!(out.status.success(), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.lines().count() >= 8);
    for line in text.lines() {
        let fields: Vec<&str> = line.split(' ').collect();
        assert_eq!(fields[0], "CHECK");
        assert_eq!(fields[2], "PASS", "{line}");
        let residual: f64 = fields[3].strip_prefix("max_residual=").unwrap().parse().unwrap();
        assert!(residual.is_finite());
    }
}

#[test]
fn sweeps_are_byte_identical_across_runs_and_backends() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.cfg", SMALL_PAULI);
    let a = shadowlab(&["pauli-sweep", "--config", &cfg]);
    let b = shadowlab(&["pauli-sweep", "--config", &cfg, "--threads", "1"]);
    let c = shadowlab(&["pauli-sweep", "--config", &cfg, "--sequential"]);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
    let text = stdout(&a);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "ensemble,n,M,K,w,theta,observable,trials,mean_estimate,empirical_variance,predicted_variance,stderr_variance,seed"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 8);
    for r in &rows {
        assert_eq!(r.len(), 13);
        assert!(r[9].parse::<f64>().unwrap() >= 0.0);
        assert!(r[10].parse::<f64>().is_ok(), "Pauli rows carry a prediction");
    }
}

#[test]
fn seed_flag_changes_output_and_out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.cfg", SMALL_PAULI);
    let path = dir.path().join("rows.jsonl");
    let out = shadowlab(&[
        "pauli-sweep",
        "--config",
        &cfg,
        "--seed",
        "99",
        "--format",
        "jsonl",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(out.stdout.is_empty());
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 8);
    assert!(text.lines().all(|l| l.starts_with('{') && l.contains("\"M\":")));
    let default_seed = shadowlab(&["pauli-sweep", "--config", &cfg, "--format", "jsonl"]);
    assert_ne!(default_seed.stdout, text.as_bytes());
}

#[test]
fn clifford_rows_leave_prediction_empty() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "cl.cfg",
        "experiment = clifford_grid\nn = 2\ntheta = 0, pi/2\nm_values = 4\nk_values = 2\ntrials = 100\n",
    );
    let out = shadowlab(&["clifford-sweep", "--config", &cfg]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    for r in rows {
        let f: Vec<&str> = r.split(',').collect();
        assert_eq!(f[0], "clifford");
        assert_eq!(f[6], "ghz_proj");
        assert_eq!(f[10], "");
    }
}

#[test]
fn config_errors_carry_positions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.cfg", "experiment = pauli_grid\nm_values = 4, x\n");
    let out = shadowlab(&["pauli-sweep", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("line 2"), "{err}");
    assert!(err.contains("column"), "{err}");

    let few = write_config(dir.path(), "few.cfg", "trials = 10\n");
    let out = shadowlab(&["pauli-sweep", "--config", &few]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("trials"));

    let wrong = write_config(dir.path(), "wrong.cfg", "experiment = clifford_grid\n");
    assert_eq!(shadowlab(&["pauli-sweep", "--config", &wrong]).status.code(), Some(2));
}

#[test]
fn gamma_exact_and_sampled() {
    let out = shadowlab(&["gamma", "--sigma", "basis:0", "--obs", "pauli:Z", "--ensemble", "pauli"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let value = |key: &str| -> f64 {
        let line = text.lines().find(|l| l.starts_with(key)).unwrap();
        line.split(' ').nth(1).unwrap().parse().unwrap()
    };
    assert!((value("gamma1") - 3.0).abs() < 1e-12);
    assert!((value("gamma2") - 3.0).abs() < 1e-12);
    assert!(text.contains("method exact_enumeration"));

    let mc = shadowlab(&[
        "gamma",
        "--sigma",
        "ghz:n=3",
        "--obs",
        "ghz_proj:n=3",
        "--ensemble",
        "clifford",
        "--budget",
        "200",
    ]);
    assert!(mc.status.success(), "{}", stderr(&mc));
    assert!(stdout(&mc).contains("method monte_carlo samples=200"));

    let mismatch = shadowlab(&[
        "gamma",
        "--sigma",
        "ghz:n=5",
        "--obs",
        "pauli:ZZ",
        "--ensemble",
        "pauli",
    ]);
    assert_eq!(mismatch.status.code(), Some(2));
}

#[test]
fn collect_then_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("shadows.txt");
    let p = path.to_str().unwrap();
    let out = shadowlab(&[
        "collect",
        "--state",
        "ghz:n=3",
        "--ensemble",
        "pauli",
        "-m",
        "60",
        "-k",
        "5",
        "--seed",
        "4",
        "--out",
        p,
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let est = shadowlab(&["estimate", "--input", p, "--obs", "pauli:ZZI", "--groups", "6"]);
    assert!(est.status.success(), "{}", stderr(&est));
    let text = stdout(&est);
    assert!(text.starts_with("estimate "));
    assert!(text.contains("M=60 K=5"));
    assert!(text.contains("median_of_means"));

    let too_many = shadowlab(&["estimate", "--input", p, "--obs", "pauli:ZZI", "--groups", "61"]);
    assert_eq!(too_many.status.code(), Some(2));
}
