use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn lcid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lcid"))
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
    p.to_str().unwrap().to_string()
}

fn matrix(rows: &[&[f64]]) -> String {
    let mut s = format!("rows={},cols={}\n", rows.len(), rows[0].len());
    for r in rows {
        let line: Vec<String> = r.iter().map(|x| format!("{x:e}")).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn missing_input_file_exits_one() {
    let dir = TempDir::new().unwrap();
    let out = lcid(&[
        "design",
        "--gram-target",
        "/nonexistent/t.csv",
        "--n",
        "4",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/t.csv"));
}

#[test]
fn malformed_matrix_names_file_and_line() {
    let dir = TempDir::new().unwrap();
    let path = write(dir.path(), "t.csv", "rows=2,cols=2\n4,0\n0,abc\n");
    let out = lcid(&["coherence", "--matrix", &path]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(err.contains("t.csv:3"), "{err}");
}

#[test]
fn bad_arguments_exit_one() {
    assert_eq!(code(&lcid(&["bench", "--mc-runs", "0"])), 1);
    assert_eq!(code(&lcid(&["frobnicate"])), 1);
    assert_eq!(code(&lcid(&["--help"])), 0);
}

#[test]
fn coherence_reports_identity_and_zero_column() {
    let dir = TempDir::new().unwrap();
    let eye = write(dir.path(), "eye.csv", &matrix(&[&[1.0, 0.0], &[0.0, 1.0]]));
    let out = lcid(&["coherence", "--matrix", &eye]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("mu = 0\n"), "{text}");
    assert!(text.contains("condition = true"));

    let mut ident = Vec::new();
    for i in 0..40 {
        let mut row = vec![0.0; 40];
        row[i] = 1.0;
        ident.push(row);
    }
    let rows: Vec<&[f64]> = ident.iter().map(|r| r.as_slice()).collect();
    let big = write(dir.path(), "big.csv", &matrix(&rows));
    let text = stdout(&lcid(&["coherence", "--matrix", &big, "--s", "10"]));
    let p: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("probability = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((p - 0.7461).abs() < 5e-5, "{p}");

    let zero = write(dir.path(), "z.csv", &matrix(&[&[1.0, 0.0], &[2.0, 0.0]]));
    assert_eq!(code(&lcid(&["coherence", "--matrix", &zero])), 1);
}

#[test]
fn design_white_target_and_rerun_is_identical() {
    let dir = TempDir::new().unwrap();
    let t = write(dir.path(), "t.csv", &matrix(&[&[4.0, 0.0], &[0.0, 4.0]]));
    let run = |sub: &str| {
        let out_dir = dir.path().join(sub);
        let out = lcid(&[
            "design",
            "--gram-target",
            &t,
            "--n",
            "4",
            "--lambda",
            "1",
            "--lambda-prime",
            "1e-8",
            "--out-dir",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        out_dir
    };
    let a = run("a");
    let b = run("b");
    for f in ["phi.csv", "h.csv", "trace.csv", "design.json"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let trace = fs::read_to_string(a.join("trace.csv")).unwrap();
    assert!(trace.starts_with("iter,objective,mu_h,mu_phi,fim_fit_error,constraint_residual\n"));
    let last: Vec<f64> = trace
        .lines()
        .last()
        .unwrap()
        .split(',')
        .map(|x| x.parse().unwrap())
        .collect();
    assert!(last[2] <= 1e-6, "final mu_h {}", last[2]);
}

#[test]
fn design_from_spectrum_with_prefilter_writes_input() {
    let dir = TempDir::new().unwrap();
    let spec = dir.path().join("r.json");
    let out = lcid(&[
        "spectrum",
        "--w1",
        "0.1",
        "--w2",
        "0.3",
        "--order",
        "6",
        "--white-floor",
        "0.001",
        "--out",
        spec.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&spec).unwrap()).unwrap();
    assert_eq!(json["r"].as_array().unwrap().len(), 6);

    let filter = write(
        dir.path(),
        "f.json",
        r#"{"denominator": [-0.5], "gain": 1.0}"#,
    );
    let out_dir = dir.path().join("o");
    let out = lcid(&[
        "design",
        "--spectrum",
        spec.to_str().unwrap(),
        "--n-theta",
        "4",
        "--n",
        "12",
        "--max-outer-iters",
        "20",
        "--filter",
        &filter,
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("u.csv").exists());
    let unstable = write(
        dir.path(),
        "g.json",
        r#"{"denominator": [2.0], "gain": 1.0}"#,
    );
    let out = lcid(&[
        "design",
        "--spectrum",
        spec.to_str().unwrap(),
        "--n-theta",
        "4",
        "--n",
        "12",
        "--filter",
        &unstable,
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn estimate_recovers_supports() {
    let dir = TempDir::new().unwrap();
    // Orthogonal-ish 8x4 regressor, theta = [1, -2, 0.5, 0]
    let phi_rows: Vec<Vec<f64>> = (0..8)
        .map(|t| {
            (0..4)
                .map(|k| ((t * 7 + k * 3) % 5) as f64 - 2.0 + if t == k { 3.0 } else { 0.0 })
                .collect()
        })
        .collect();
    let theta = [1.0, -2.0, 0.5, 0.0];
    let y: Vec<f64> = phi_rows
        .iter()
        .map(|r| r.iter().zip(&theta).map(|(a, b)| a * b).sum())
        .collect();
    let rows: Vec<&[f64]> = phi_rows.iter().map(|r| r.as_slice()).collect();
    let phi = write(dir.path(), "phi.csv", &matrix(&rows));
    let y_rows: Vec<[f64; 1]> = y.iter().map(|&v| [v]).collect();
    let y_refs: Vec<&[f64]> = y_rows.iter().map(|r| r.as_slice()).collect();
    let y = write(dir.path(), "y.csv", &matrix(&y_refs));

    for (method, extra) in [
        ("omp", vec!["--s", "3"]),
        ("LS-BIC", vec![]),
        ("lcid-omp", vec!["--s", "3"]),
    ] {
        let out_dir = dir.path().join(method);
        let mut args = vec![
            "estimate",
            "--phi",
            &phi,
            "--y",
            &y,
            "--method",
            method,
            "--out-dir",
            out_dir.to_str().unwrap(),
        ];
        args.extend(extra);
        let out = lcid(&args);
        assert_eq!(
            code(&out),
            0,
            "{method}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let s: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out_dir.join("support.json")).unwrap())
                .unwrap();
        assert_eq!(s["support"], serde_json::json!([0, 1, 2]), "{method}");
        assert_eq!(s["sparsity"], 3);
    }

    let short = write(dir.path(), "short.csv", &matrix(&[&[1.0], &[2.0]]));
    assert_eq!(
        code(&lcid(&[
            "estimate", "--phi", &phi, "--y", &short, "--method", "ls-aicc"
        ])),
        1
    );
}

#[test]
fn bench_writes_outputs_and_flags_total_failure() {
    let dir = TempDir::new().unwrap();
    let ok = dir.path().join("ok");
    let out = lcid(&[
        "bench",
        "--methods",
        "LS-BIC,FDM-KnownSparsity",
        "--mc-runs",
        "2",
        "--snr",
        "15",
        "--plots",
        "--out-dir",
        ok.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["records.csv", "summary.csv", "nrmse.svg", "vapp.svg"] {
        assert!(ok.join(f).exists(), "{f}");
    }
    let records = fs::read_to_string(ok.join("records.csv")).unwrap();
    assert_eq!(records.lines().count(), 1 + 2 * 2);

    // A penalty grid far above ‖Φᵀy‖∞ zeroes every lasso fit, and a zero
    // model has no usable frequency response.
    let bad = dir.path().join("bad");
    let out = lcid(&[
        "bench",
        "--methods",
        "LADMM",
        "--mc-runs",
        "2",
        "--snr",
        "15",
        "--grid-min",
        "1e8",
        "--grid-max",
        "1e9",
        "--grid-size",
        "2",
        "--out-dir",
        bad.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    let records = fs::read_to_string(bad.join("records.csv")).unwrap();
    assert!(records.lines().skip(1).all(|l| l.contains("error:")));
}
