use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use misscov::harness::dataset::csv_body;
use misscov::harness::{read_csv_file, TrialLabel, CSV_HEADER};
use nalgebra::DMatrix;

const SMALL: &str = r#"
[experiment]
kind = "mcar_uniform"
n = 8
trials = 4
seed = 5

[spectrum]
kind = "geometric"
erank = 2.0

[grid]
count = 3
min = 10
max = 200

[mcar_uniform]
p = [0.5, 0.8]
"#;

fn misscov(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_misscov"))
        .args(args)
        .output()
        .expect("spawn misscov")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run_ok(config: &Path, out: &Path, extra: &[&str]) -> String {
    let mut args = vec![
        "run",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    let o = misscov(&args);
    assert!(
        o.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    std::fs::read_to_string(out.join("mcar_uniform.csv")).unwrap()
}

#[test]
fn run_writes_csv_with_header_and_lf_endings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL);
    let text = run_ok(&cfg, dir.path(), &[]);
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# misscov"));
    assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
    let records = read_csv_file(&dir.path().join("mcar_uniform.csv")).unwrap();
    assert!(records
        .iter()
        .all(|r| r.rel_op_error.is_finite() && r.rel_op_error >= 0.0));
    // 3 N values x 4 trials x (1 sample + 2 x 2 estimators) + aggregates.
    let per_trial = records
        .iter()
        .filter(|r| matches!(r.trial, TrialLabel::Index(_)))
        .count();
    assert_eq!(per_trial, 3 * 4 * 5);
}

#[test]
fn same_seed_gives_identical_bodies_and_new_seed_differs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL);
    let (a, b, c) = (
        dir.path().join("a"),
        dir.path().join("b"),
        dir.path().join("c"),
    );
    let first = run_ok(&cfg, &a, &["--threads", "1"]);
    let second = run_ok(&cfg, &b, &["--threads", "3"]);
    assert_eq!(csv_body(&first), csv_body(&second));
    let other = run_ok(&cfg, &c, &["--seed", "6"]);
    assert_ne!(csv_body(&first), csv_body(&other));
}

#[test]
fn config_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let unknown_key = write_config(
        dir.path(),
        "k.toml",
        &SMALL.replace("seed = 5", "seed = 5\nsed = 6"),
    );
    let wrong_section = write_config(dir.path(), "s.toml", &format!("{SMALL}\n[cmcar]\nm = 2\n"));
    let bad_p = write_config(
        dir.path(),
        "p.toml",
        &SMALL.replace("[0.5, 0.8]", "[0.5, 1.5]"),
    );
    let good = write_config(dir.path(), "g.toml", SMALL);
    for args in [
        vec!["run", unknown_key.to_str().unwrap()],
        vec!["run", wrong_section.to_str().unwrap()],
        vec!["run", bad_p.to_str().unwrap()],
        vec!["run", "/definitely/not/here.toml"],
        vec!["run", good.to_str().unwrap(), "--threads", "0"],
        vec!["run", good.to_str().unwrap(), "--preset", "huge"],
    ] {
        let o = misscov(&args);
        assert_eq!(
            o.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
}

#[test]
fn numerical_failure_exits_with_code_3_and_names_the_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "u.toml",
        &SMALL.replace("[0.5, 0.8]", "[1e-200]"),
    );
    let o = misscov(&[
        "run",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("mcar_uniform N=10"), "{err}");
}

#[test]
fn audit_snapshots_reproduce_the_error_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        &SMALL.replace("trials = 4", "trials = 40"),
    );
    run_ok(&cfg, dir.path(), &["--audit"]);
    let json = std::fs::read_to_string(dir.path().join("mcar_uniform.audit.json")).unwrap();
    let log: serde_json::Value = serde_json::from_str(&json).unwrap();
    let n = log["n"].as_u64().unwrap() as usize;
    let to_matrix = |v: &serde_json::Value| {
        let data: Vec<f64> = v
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_f64().unwrap())
            .collect();
        DMatrix::from_column_slice(n, n, &data)
    };
    let sigma = to_matrix(&log["sigma"]);
    let norm = sigma.clone().symmetric_eigen().eigenvalues.amax();
    let snapshots = log["snapshots"].as_array().unwrap();
    assert!(!snapshots.is_empty());
    let records = read_csv_file(&dir.path().join("mcar_uniform.csv")).unwrap();
    let per_trial = records
        .iter()
        .filter(|r| matches!(r.trial, TrialLabel::Index(_)))
        .count();
    assert!(
        snapshots.len() * 20 < per_trial,
        "audit should sample about 1% of rows"
    );
    for s in snapshots {
        let diff = to_matrix(&s["sigma_hat"]) - &sigma;
        let err = diff.symmetric_eigen().eigenvalues.amax() / norm;
        let row = records
            .iter()
            .find(|r| {
                r.n_samples == s["n_samples"].as_u64().unwrap() as usize
                    && r.estimator == s["estimator"].as_str().unwrap()
                    && r.trial == TrialLabel::Index(s["trial"].as_u64().unwrap() as usize)
                    && r.mech_param == s["mech_param"].as_f64()
            })
            .expect("audited row present");
        assert!((row.rel_op_error - err).abs() <= 1e-10 * err.max(1.0));
    }
}

#[test]
fn plot_and_calibrate_read_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL);
    run_ok(&cfg, dir.path(), &[]);
    let csv = dir.path().join("mcar_uniform.csv");

    let o = misscov(&["plot", csv.to_str().unwrap()]);
    assert!(o.status.success());
    let dat: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "dat"))
        .collect();
    // sample + {known_p, unknown_p, sample_scaled} x 2 probabilities.
    assert_eq!(dat.len(), 7);
    let script = std::fs::read_to_string(dir.path().join("mcar_uniform.gp")).unwrap();
    assert!(script.contains("set logscale xy"));

    let o = misscov(&["calibrate", csv.to_str().unwrap()]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let table: toml::Table = text.parse().unwrap();
    let bounds = table["bounds"].as_table().unwrap();
    assert!(bounds["c"].as_float().unwrap() >= 1.0);
    assert!(bounds["c_tilde"].as_float().unwrap() >= 1.0);
}

#[test]
fn plot_and_calibrate_reject_empty_datasets() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("empty.csv");
    std::fs::write(&csv, format!("{}\n", CSV_HEADER.join(","))).unwrap();
    assert_eq!(
        misscov(&["plot", csv.to_str().unwrap()]).status.code(),
        Some(3)
    );
    assert_eq!(
        misscov(&["calibrate", csv.to_str().unwrap()]).status.code(),
        Some(3)
    );
}
