//! Behavior of the command line front end: output files, stdout formats and
//! the exit-code contract (0 success, 1 error, 2 time cap, 3 non-identity
//! word).

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lefschetz"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is utf-8")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr is utf-8")
}

#[test]
fn flow_writes_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "flow",
        fixtures().join("torus_6x6.mesh").to_str().unwrap(),
        "--config",
        fixtures().join("flow.toml").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    assert!(stdout_of(&out).starts_with("converged t_final="));

    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("t,max_dev,min_dev,sup_dev,h_max,grad_norm,area"));

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["converged"], true);
}

#[test]
fn flow_reports_the_time_cap_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("capped.toml");
    std::fs::write(&cfg, "[flow]\nt_max = 1e-4\ndt_init = 1e-5\ndt_max = 1e-5\n").unwrap();
    let out = run(&[
        "flow",
        fixtures().join("genus2_r5.mesh").to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout_of(&out).starts_with("time-cap t_final="));
    // The partial trace is still exported for inspection.
    assert!(dir.path().join("out/trace.csv").exists());
}

#[test]
fn malformed_meshes_fail_with_the_offending_line() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("broken.mesh");
    std::fs::write(&mesh, "trisurf 3 1\ntri 0 1 2\nlen 0 1 1.0\nlen 1 2 oops\nlen 0 2 1.0\n")
        .unwrap();
    let out = run(&[
        "flow",
        mesh.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_of(&out);
    assert!(err.contains("line 4"), "stderr: {err}");
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("typo.toml");
    std::fs::write(&cfg, "[flow]\ntolerance = 1e-8\n").unwrap();
    let out = run(&[
        "flow",
        fixtures().join("tetra.mesh").to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_of(&out);
    assert!(err.contains("parsing config"), "stderr: {err}");
    assert!(err.contains("tolerance"), "stderr: {err}");
}

#[test]
fn invalid_flow_parameters_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[flow]\ntol = -1.0\n").unwrap();
    let out = run(&[
        "flow",
        fixtures().join("tetra.mesh").to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("tol"), "stderr: {}", stderr_of(&out));
}

#[test]
fn family_runs_a_loop_base_and_reports_closure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("family.toml");
    std::fs::write(
        &cfg,
        "[flow]\ntol = 1e-8\n\n[family]\nbase = \"loop\"\npoints = 6\namplitude = 0.1\nseed = 3\nmodes = 4\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "family",
        fixtures().join("torus_6x6.mesh").to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let line = stdout_of(&out);
    assert!(line.starts_with("fibers=6 "), "stdout: {line}");
    assert!(line.contains("closed=true"), "stdout: {line}");

    let family: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("family.json")).unwrap())
            .unwrap();
    assert_eq!(family["base_kind"], "loop");
    assert_eq!(family["points"], 6);
    assert_eq!(family["seed"], 3);
    assert!(out_dir.join("fiber_5.csv").exists());
}

#[test]
fn family_on_a_grid_base_omits_loop_fields() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("family.toml");
    std::fs::write(
        &cfg,
        "[family]\nbase = \"disk-grid\"\nrows = 2\ncols = 3\namplitude = 0.05\nmodes = 3\n",
    )
    .unwrap();
    let out = run(&[
        "family",
        fixtures().join("torus_6x6.mesh").to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let line = stdout_of(&out);
    assert!(line.starts_with("fibers=6 "), "stdout: {line}");
    assert!(!line.contains("closed="), "stdout: {line}");
}

#[test]
fn unknown_base_kinds_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("family.toml");
    std::fs::write(&cfg, "[family]\nbase = \"torus\"\n").unwrap();
    let out = run(&[
        "family",
        fixtures().join("torus_6x6.mesh").to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("unknown base kind"));
}

#[test]
fn signature_prints_the_report_line_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "signature",
        fixtures().join("e1.word").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    assert_eq!(stdout_of(&out), "sigma=-8 c1=1 delta=12\n");

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["sigma"], -8);
    assert_eq!(report["c1_pairing"], "1");
    assert_eq!(report["n_plus"], 12);
    assert_eq!(report["n_minus"], 0);
}

#[test]
fn signature_handles_the_empty_word() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "signature",
        fixtures().join("empty_g1.word").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_of(&out), "sigma=0 c1=0 delta=0\n");
}

#[test]
fn non_identity_words_exit_3_with_the_product() {
    let dir = tempfile::tempdir().unwrap();
    let word = dir.path().join("open.word");
    std::fs::write(&word, "word g=1 base=sphere\ntwist +1 c 1 0\n").unwrap();
    let out = run(&[
        "signature",
        word.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = stderr_of(&out);
    assert!(err.contains("not an identity factorization"), "stderr: {err}");
    // The offending total product is echoed for diagnosis: a transvection
    // with the off-diagonal entry -1.
    assert!(err.contains("-1"), "stderr: {err}");
    assert!(!dir.path().join("out/report.json").exists());
}

#[test]
fn missing_inputs_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "signature",
        dir.path().join("nope.word").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("nope.word"));
}
