//! End-to-end CLI checks, including the determinism criterion: identical
//! configuration and seed must produce byte-identical artifacts at any
//! worker count.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_mmfg")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn run(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(bin());
    cmd.args(args);
    match threads {
        Some(t) => {
            cmd.env("MMFG_THREADS", t);
        }
        None => {
            cmd.env_remove("MMFG_THREADS");
        }
    }
    cmd.output().expect("binary runs")
}

fn small_example_config(out: &Path) -> String {
    format!(
        r#"{{
  "example6": {{ "a": 1.0, "b": 1.0, "c": 1.0, "q": 1.0, "D0": 1.0, "D": 1.0, "T": 1.0,
                 "x0_major": 1.0, "x0_minor": 0.5 }},
  "grid": {{ "n_steps": 50 }},
  "mc": {{ "n_paths": 16, "seed": 11 }},
  "experiment": {{ "N_list": [4, 8, 16] }},
  "output_dir": "{}"
}}"#,
        out.display()
    )
}

#[test]
fn acceptance_10_determinism_across_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    let mut artifact_sets = Vec::new();
    for (label, threads) in [("t1", Some("1")), ("t4", Some("4")), ("t1_again", Some("1"))] {
        let out = dir.join(label);
        let config = write_config(dir, &format!("{label}.json"), &small_example_config(&out));
        for variant in ["chaos", "example6", "nash"] {
            let output = run(
                &[variant, "--config", config.to_str().unwrap()],
                threads,
            );
            assert!(
                output.status.success(),
                "{variant} failed: {}",
                String::from_utf8_lossy(&output.stderr)
            );
        }
        let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(&out)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (
                    e.file_name().to_string_lossy().to_string(),
                    fs::read(e.path()).unwrap(),
                )
            })
            .collect();
        files.sort_by(|a, b| a.0.cmp(&b.0));
        artifact_sets.push((label, files));
    }

    let (_, reference) = &artifact_sets[0];
    assert!(reference.iter().any(|(n, _)| n == "summary.json"));
    assert!(reference.iter().any(|(n, _)| n == "chaos.csv"));
    for (label, files) in &artifact_sets[1..] {
        assert_eq!(files.len(), reference.len(), "{label}: artifact count");
        for ((name_a, bytes_a), (name_b, bytes_b)) in reference.iter().zip(files.iter()) {
            assert_eq!(name_a, name_b, "{label}: file set differs");
            // the summary echoes the config including output_dir, which
            // differs between runs by construction; strip that one line
            let norm = |name: &str, bytes: &[u8]| -> Vec<u8> {
                if name == "summary.json" {
                    String::from_utf8(bytes.to_vec())
                        .unwrap()
                        .lines()
                        .filter(|l| !l.contains("\"output_dir\""))
                        .collect::<Vec<_>>()
                        .join("\n")
                        .into_bytes()
                } else {
                    bytes.to_vec()
                }
            };
            assert_eq!(
                norm(name_a, bytes_a),
                norm(name_b, bytes_b),
                "{label}: {name_a} differs byte-wise"
            );
        }
    }
    println!("ACCEPTANCE 10 determinism: PASS (3 runs x 3 variants byte-identical)");
}

#[test]
fn validation_failure_exits_2_and_names_the_violation() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let config = write_config(
        tmp.path(),
        "bad.json",
        &format!(
            r#"{{
  "model": {{
    "d0": 1, "d": 1, "k0": 1, "k": 1, "m0": 1, "m": 1, "T": 1.0,
    "A0": [[0.0]], "B0": [[1.0]], "F0": [[1.0]], "D0": [[1.0]],
    "A": [[0.0]], "B": [[0.0]], "F": [[0.0]], "G": [[1.0]], "D": [[1.0]],
    "Q0": [[1.0]], "R0": [[1.0]], "H0": [[0.0]], "eta0": [0.0],
    "Q": [[0.0]], "R": [[0.0]], "H": [[0.0]], "Hhat": [[0.0]], "eta": [0.0],
    "x0_major": [1.0], "x0_minor": [0.5]
  }},
  "grid": {{ "n_steps": 50 }},
  "mc": {{ "n_paths": 4, "seed": 1 }},
  "output_dir": "{}"
}}"#,
            out.display()
        ),
    );
    let output = run(&["validate", "--config", config.to_str().unwrap()], None);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(
        stderr.contains("R not positive definite"),
        "stderr: {stderr}"
    );
    // the summary still records the violations
    let summary = fs::read_to_string(out.join("summary.json")).unwrap();
    assert!(summary.contains("R not positive definite"));
}

#[test]
fn unparseable_config_exits_2_with_position() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "broken.json", "{ \"grid\": { \"n_steps\": }");
    let output = run(&["solve", "--config", config.to_str().unwrap()], None);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("line") && stderr.contains("column"), "{stderr}");
}

#[test]
fn solvability_failure_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    // an absurdly tight condition threshold trips the propagator route
    let config = write_config(
        tmp.path(),
        "tight.json",
        &format!(
            r#"{{
  "example6": {{ "a": 1.0, "b": 1.0, "c": 1.0, "q": 1.0, "D0": 1.0, "D": 1.0, "T": 1.0,
                 "x0_major": 1.0, "x0_minor": 0.5 }},
  "grid": {{ "n_steps": 50 }},
  "mc": {{ "n_paths": 4, "seed": 1 }},
  "experiment": {{ "cond_threshold": 1.0 }},
  "output_dir": "{}"
}}"#,
            out.display()
        ),
    );
    let output = run(&["solve", "--config", config.to_str().unwrap()], None);
    assert_eq!(output.status.code(), Some(3));
}

#[test]
fn solve_summary_has_the_fixed_shape() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("solve_out");
    let config = write_config(tmp.path(), "ex6.json", &small_example_config(&out));
    let output = run(&["solve", "--config", config.to_str().unwrap()], None);
    assert!(output.status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let keys: Vec<&str> = doc.as_object().unwrap().keys().map(|s| s.as_str()).collect();
    assert_eq!(keys, vec!["config", "metrics", "timings", "verdicts"]);
    assert_eq!(doc["config"]["variant"], "solve");
    assert_eq!(doc["verdicts"]["cross_solver_ok"], true);
    assert!(doc["metrics"]["s_curves"]["t"].is_array());
    assert!(fs::read_to_string(out.join("riccati.csv"))
        .unwrap()
        .starts_with("t,series,row,col,value\n"));
}

#[test]
fn simulate_dump_has_expected_row_count() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sim_out");
    let config = write_config(
        tmp.path(),
        "sim.json",
        &format!(
            r#"{{
  "example6": {{ "a": 1.0, "b": 1.0, "c": 1.0, "q": 1.0, "D0": 1.0, "D": 1.0, "T": 1.0,
                 "x0_major": 1.0, "x0_minor": 0.5 }},
  "grid": {{ "n_steps": 10 }},
  "mc": {{ "n_paths": 3, "seed": 5 }},
  "experiment": {{ "N": 2 }},
  "output_dir": "{}"
}}"#,
            out.display()
        ),
    );
    let output = run(&["simulate", "--config", config.to_str().unwrap()], None);
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let csv = fs::read_to_string(out.join("finite_paths.csv")).unwrap();
    let data_rows = csv.lines().count() - 1;
    // series: X0, Xbar, X_1, X_2, P0bar, Pbar, Ybar, u0, u_1, u_2 (scalar)
    let series_count = 10;
    assert_eq!(data_rows, 3 * 11 * series_count);
    assert!(csv.starts_with("path,t,series,component,value\n"));

    // states reload exactly from the shortest round-trip formatting
    for line in csv.lines().skip(1).take(50) {
        let value = line.rsplit(',').next().unwrap();
        let parsed: f64 = value.parse().unwrap();
        assert_eq!(format!("{parsed}"), value);
    }
}
