use std::path::Path;
use std::process::{Command, Output};

use proxkit_bench::runner::{read_trace, TraceRow};

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_proxkit-bench"))
        .args(args)
        .env("PROXKIT_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path_arg(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn without_time(rows: Vec<TraceRow>) -> Vec<TraceRow> {
    rows.into_iter()
        .map(|r| TraceRow { elapsed: 0.0, ..r })
        .collect()
}

#[test]
fn lasso_panoc_run_meets_the_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let out = bench(&[
        "run",
        "--problem",
        "lasso",
        "--n",
        "1000",
        "--solver",
        "panoc",
        "--tol",
        "1e-6",
        "--seed",
        "42",
        "--out",
        path_arg(&trace),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = read_trace(&trace).unwrap();
    let last = rows.last().unwrap();
    assert!(last.residual <= 1e-6, "{}", last.residual);
    assert!(rows
        .windows(2)
        .all(|w| w[1].iteration == w[0].iteration + 1));

    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(trace.with_extension("json")).unwrap())
            .unwrap();
    assert_eq!(sidecar["status"], "converged");
    assert_eq!(sidecar["spec"]["problem"], "lasso");
    assert_eq!(sidecar["spec"]["seed"], 42);
    assert_eq!(sidecar["iterations"], last.iteration);
}

#[test]
fn csv_has_a_header_and_the_trace_columns() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    let out = bench(&[
        "run",
        "--problem",
        "lasso",
        "--n",
        "100",
        "--reference",
        "--out",
        path_arg(&trace),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(&trace).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "stage,iteration,objective,fbe,residual,normalized_error,elapsed"
    );
    let rows = read_trace(&trace).unwrap();
    assert!(rows.iter().all(|r| r.normalized_error.is_some()));
    // the reference is the converged FPG solution, so the error falls well below 1e-3
    assert!(rows.last().unwrap().normalized_error.unwrap() < -3.0);
    assert!(trace.with_extension("reference.json").exists());
}

#[test]
fn fpg_on_nonconvex_problem_is_rejected() {
    let out = bench(&["run", "--problem", "declip", "--solver", "fpg"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("nonconvex"), "{}", stderr(&out));
}

#[test]
fn unknown_names_are_usage_errors() {
    for args in [
        &["run", "--problem", "nope"][..],
        &["run", "--problem", "lasso", "--solver", "newton"],
        &["run"],
        &["frobnicate"],
    ] {
        let out = bench(args);
        assert_eq!(code(&out), 1, "{args:?}");
        assert!(!stderr(&out).is_empty());
    }
}

#[test]
fn nonpositive_tolerance_is_an_error() {
    let out = bench(&["run", "--problem", "lasso", "--n", "100", "--tol", "0"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn iteration_cap_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("capped.csv");
    let out = bench(&[
        "run",
        "--problem",
        "lasso",
        "--n",
        "200",
        "--solver",
        "pg",
        "--max-iters",
        "5",
        "--out",
        path_arg(&trace),
    ]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert_eq!(read_trace(&trace).unwrap().len(), 6);
}

#[test]
fn repeated_seed_gives_the_same_trace() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let trace = dir.path().join(name);
        let out = bench(&[
            "run",
            "--problem",
            "robust-pca",
            "--n",
            "12",
            "--m",
            "10",
            "--frames",
            "6",
            "--seed",
            seed,
            "--out",
            path_arg(&trace),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        without_time(read_trace(&trace).unwrap())
    };
    let a = run("a.csv", "5");
    let b = run("b.csv", "5");
    assert_eq!(a, b);
    assert_ne!(a, run("c.csv", "6"));
}

#[test]
fn compare_runs_each_applicable_solver() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("cmp.csv");
    let out = bench(&[
        "run",
        "--problem",
        "lasso",
        "--n",
        "100",
        "--compare",
        "--out",
        path_arg(&trace),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let stdout = String::from_utf8_lossy(&out.stdout);
    for solver in ["pg", "fpg", "panoc"] {
        assert!(dir.path().join(format!("cmp-{solver}.csv")).exists());
        assert!(stdout.contains(&format!("{solver}:")), "{stdout}");
    }

    let trace = dir.path().join("dnn.csv");
    let out = bench(&[
        "run",
        "--problem",
        "dnn",
        "--points",
        "20",
        "--max-iters",
        "50",
        "--compare",
        "--out",
        path_arg(&trace),
    ]);
    assert!(matches!(code(&out), 0 | 2), "{}", stderr(&out));
    assert!(dir.path().join("dnn-panoc.csv").exists());
    assert!(dir.path().join("dnn-pg.csv").exists());
    assert!(!dir.path().join("dnn-fpg.csv").exists());
}

#[test]
fn help_exits_cleanly() {
    let out = bench(&["--help"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("run"));
}
