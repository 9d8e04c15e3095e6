//! End-to-end tests against the compiled binary: exit codes, the one-line
//! summaries, file outputs, and byte-level determinism.

use std::path::Path;
use std::process::{Command, Output};

use dmpa::closedform::dmpa_closed_form;
use dmpa::params::{DetuningSign, RotatingFrameParams};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dmpa"));
    cmd.env_remove("SOURCE_DATE_EPOCH");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is utf-8")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr is utf-8")
}

/// Pulls `key=...` out of a summary line.
fn field(line: &str, key: &str) -> f64 {
    let prefix = format!("{key}=");
    line.split_whitespace()
        .find_map(|tok| tok.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("no {key} in {line:?}"))
        .parse()
        .unwrap_or_else(|e| panic!("{key} not a number: {e}"))
}

fn assert_close(actual: f64, expected: f64, tol: f64, what: &str) {
    let err = (actual - expected).abs() / expected.abs().max(1e-300);
    assert!(err < tol, "{what}: {actual} vs {expected} (rel {err:.2e})");
}

#[test]
fn steady_summary_matches_closed_form() {
    let out = run(&[
        "steady", "--scheme", "dmpa", "--chi", "10", "--delta", "-10", "--mu", "10.5", "--eta",
        "1", "--N", "10",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let line = stdout(&out);

    let p = RotatingFrameParams::qnd(1.0, 10.0, DetuningSign::Minus)
        .with_measurement(10.5, 1.0)
        .with_thermal(10.0);
    let s = dmpa_closed_form(&p).unwrap();
    // stdout carries 7 significant digits
    assert_close(field(&line, "v_x"), s.v_x, 1e-5, "v_x");
    assert_close(field(&line, "v_y"), s.v_y, 1e-5, "v_y");
    assert_close(field(&line, "c"), s.c, 1e-5, "c");
    assert_close(field(&line, "purity"), 0.25 / s.det(), 1e-5, "purity");
    assert_close(field(&line, "g"), s.c / s.v_x, 1e-5, "g");
    let g = s.c / s.v_x;
    assert_close(field(&line, "mu_eff_ratio"), 1.0 + g * g, 1e-5, "mu_eff_ratio");
}

#[test]
fn absolute_flag_rescales_rates() {
    let relative = run(&["steady", "--chi", "1", "--delta", "-1", "--mu", "1", "--eta", "1"]);
    let absolute = run(&[
        "steady", "--absolute", "--gamma", "2", "--chi", "2", "--delta", "-2", "--mu", "2",
        "--eta", "1",
    ]);
    assert!(relative.status.success() && absolute.status.success());
    // dimensionless outputs depend only on rate ratios
    assert_eq!(stdout(&relative), stdout(&absolute));
}

#[test]
fn unstable_drift_exits_one_with_eigenvalue() {
    let out = run(&["validate", "--chi", "5", "--delta", "0"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(
        err.contains("unstable drift") && err.contains("eigenvalue"),
        "stderr: {err}"
    );
}

#[test]
fn usage_errors_exit_two() {
    let cases: &[&[&str]] = &[
        // rates are relative to gamma unless --absolute
        &["steady", "--gamma", "2", "--chi", "1", "--delta", "-1"],
        // unsupported output extension
        &["steady", "--chi", "1", "--delta", "-1", "--out", "/tmp/cli-test-out.txt"],
        // --format needs --out
        &["steady", "--chi", "1", "--delta", "-1", "--format", "csv"],
        // mu-opt has no plot output
        &["mu-opt", "--chi", "1", "--delta", "-1", "--eta", "1", "--out", "/tmp/cli-test-o.svg"],
        // missing config file
        &["steady", "--config", "/nonexistent/cli-test.cfg"],
        // malformed flag value, handled by the parser itself
        &["steady", "--chi", "abc"],
    ];
    for args in cases {
        let out = run(args);
        assert_eq!(out.status.code(), Some(2), "args {args:?}: {}", stderr(&out));
    }
}

#[test]
fn config_file_layers_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "chi = 2\ndelta = -2\nmu = 4\neta = 1\n# trailing comment\n").unwrap();

    let out = run(&["steady", "--config", cfg.to_str().unwrap(), "--mu", "1"]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));

    // chi and delta come from the file, mu from the flag
    let p = RotatingFrameParams::qnd(1.0, 2.0, DetuningSign::Minus).with_measurement(1.0, 1.0);
    let s = dmpa_closed_form(&p).unwrap();
    assert_close(field(&stdout(&out), "v_x"), s.v_x, 1e-5, "v_x");
    assert_close(field(&stdout(&out), "v_y"), s.v_y, 1e-5, "v_y");
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn sweep_csv_is_deterministic_and_reparses() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = |out: &Path| {
        vec![
            "sweep".into(),
            "--var".into(),
            "mu".into(),
            "--from".into(),
            "0.1".into(),
            "--to".into(),
            "10".into(),
            "--points".into(),
            "5".into(),
            "--log".into(),
            "--chi".into(),
            "1".into(),
            "--delta".into(),
            "-1".into(),
            "--eta".into(),
            "1".into(),
            "--out".into(),
            out.to_str().unwrap().to_string(),
        ]
    };
    let first = bin().args(args(&a)).output().unwrap();
    let second = bin().args(args(&b)).output().unwrap();
    assert!(first.status.success(), "stderr: {}", stderr(&first));
    assert!(second.status.success());
    assert_eq!(read(&a), read(&b), "sweep output not deterministic");

    let text = read(&a);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("value,v_x,v_y,c,purity,filter_width_ratio")
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 5);
    assert_close(rows[0][0], 0.1, 1e-14, "first mu");
    assert_close(rows[4][0], 10.0, 1e-14, "last mu");
    // spot-check one row against the library
    let p = RotatingFrameParams::qnd(1.0, 1.0, DetuningSign::Minus)
        .with_measurement(rows[2][0], 1.0);
    let s = dmpa_closed_form(&p).unwrap();
    assert_close(rows[2][1], s.v_x, 1e-12, "middle v_x");
}

#[test]
fn trajectory_csv_depends_only_on_seed() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<_> = (0..3).map(|i| dir.path().join(format!("t{i}.csv"))).collect();
    let run_seed = |seed: &str, path: &Path| {
        bin()
            .args([
                "trajectory", "--chi", "2", "--delta", "-2", "--mu", "1", "--eta", "1", "--N",
                "1", "--seed", seed, "--t-end", "2", "--out", path.to_str().unwrap(),
            ])
            .output()
            .unwrap()
    };
    assert!(run_seed("7", &paths[0]).status.success());
    assert!(run_seed("7", &paths[1]).status.success());
    assert!(run_seed("8", &paths[2]).status.success());
    assert_eq!(read(&paths[0]), read(&paths[1]), "same seed must reproduce");
    assert_ne!(read(&paths[0]), read(&paths[2]), "seeds must differ");
    assert!(read(&paths[0]).starts_with("t,mean_x,mean_y,v_x,v_y,c,record_1,record_2"));
}

#[test]
fn figure1_json_timestamp_comes_from_source_date_epoch() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let run_with = |path: &Path, epoch: Option<&str>| {
        let mut cmd = bin();
        cmd.args([
            "figure1", "--targets", "0.4,0.3", "--N", "10", "--out", path.to_str().unwrap(),
        ]);
        if let Some(e) = epoch {
            cmd.env("SOURCE_DATE_EPOCH", e);
        }
        cmd.output().unwrap()
    };

    let first = run_with(&a, Some("1700000000"));
    assert!(first.status.success(), "stderr: {}", stderr(&first));
    let second = run_with(&b, Some("1700000000"));
    assert!(second.status.success());
    assert_eq!(read(&a), read(&b), "figure1 output not deterministic");

    let doc: serde_json::Value = serde_json::from_str(&read(&a)).unwrap();
    assert_eq!(doc["meta"]["generated_at"], 1700000000);
    assert_eq!(doc["rows"].as_array().unwrap().len(), 2);

    let without = run_with(&a, None);
    assert!(without.status.success());
    let doc: serde_json::Value = serde_json::from_str(&read(&a)).unwrap();
    assert!(doc["meta"]["generated_at"].is_null());

    let bad = run_with(&a, Some("yesterday"));
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn figure2_csv_carries_one_block_per_trace() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f2.csv");
    let out = bin()
        .args([
            "figure2", "--chi-prime", "1,10,100", "--points", "11", "--out",
            path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr(&out));

    let text = read(&path);
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("chi_prime,"), "header: {header}");
    let mut counts = std::collections::BTreeMap::new();
    for line in lines {
        let chi: f64 = line.split(',').next().unwrap().parse().unwrap();
        *counts.entry(chi.to_string()).or_insert(0usize) += 1;
    }
    let expected: std::collections::BTreeMap<String, usize> =
        [("1".into(), 11), ("10".into(), 11), ("100".into(), 11)].into();
    assert_eq!(counts, expected);
}

#[test]
fn spectrum_svg_is_wellformed_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.svg");
    let b = dir.path().join("b.svg");
    for path in [&a, &b] {
        let out = bin()
            .args([
                "spectrum", "--chi", "1", "--delta", "-1", "--mu", "1", "--eta", "1", "--out",
                path.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert!(out.status.success(), "stderr: {}", stderr(&out));
    }
    let text = read(&a);
    assert_eq!(text, read(&b), "svg output not deterministic");
    assert!(text.starts_with("<svg"), "unexpected prologue");
    assert!(text.trim_end().ends_with("</svg>"), "unexpected epilogue");
    assert_eq!(text.matches("<polyline").count(), 3, "one polyline per spectrum");
    assert!(!text.contains("NaN"), "unmapped points leaked into the svg");
}

#[test]
fn steady_json_envelope_reparses() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    let out = bin()
        .args([
            "steady", "--chi", "1", "--delta", "-1", "--mu", "1", "--eta", "1", "--out",
            path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr(&out));

    let doc: serde_json::Value = serde_json::from_str(&read(&path)).unwrap();
    let p = RotatingFrameParams::qnd(1.0, 1.0, DetuningSign::Minus).with_measurement(1.0, 1.0);
    let s = dmpa_closed_form(&p).unwrap();
    assert_close(doc["state"]["v_x"].as_f64().unwrap(), s.v_x, 1e-12, "v_x");
    assert_close(doc["purity"].as_f64().unwrap(), 0.25 / s.det(), 1e-12, "purity");
    assert_eq!(doc["meta"]["scheme"], "dmpa");
}

#[test]
fn mu_opt_reports_interior_optimum() {
    let out = run(&["mu-opt", "--chi", "100", "--delta", "-100", "--eta", "1", "--N", "10"]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let line = stdout(&out);
    assert!(line.contains("location=interior"), "summary: {line}");
    let mu_opt = field(&line, "mu_opt_over_gamma");
    assert!(mu_opt > 1.0 && mu_opt < 100.0, "mu_opt = {mu_opt}");
}
