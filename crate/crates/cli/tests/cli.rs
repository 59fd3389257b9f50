use std::path::Path;
use std::process::{Command, Output};

fn hsar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hsar"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn generate(dir: &Path, frames: &str, grid: bool) {
    let mut args = vec![
        "generate",
        "--out",
        dir.to_str().unwrap(),
        "--frames",
        frames,
        "--seed",
        "3",
        "--downscale",
        "4",
    ];
    if grid {
        args.push("--grid");
    }
    let o = hsar(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn generate_run_export_and_timings() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    generate(&data, "2", false);
    assert!(data.join("manifest.json").is_file());

    let out = tmp.path().join("out");
    let timings = tmp.path().join("t.csv");
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"timing": {"executions": 3}, "kmeans": {"k": 4, "seed": 0, "max_iter": 10, "tol": 1e-4}}"#,
    )
    .unwrap();
    let o = hsar(&[
        "run",
        "--dataset",
        data.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--export-ply",
        out.to_str().unwrap(),
        "--timings",
        timings.to_str().unwrap(),
        "--toggle-off",
        "temporal",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["cloud_000000.ply", "classification_000001.png", "depth_000001.png"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let csv = std::fs::read_to_string(&timings).unwrap();
    assert!(csv.starts_with("stage,mean_ms,std_ms,n\n"));
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",3")), "{csv}");
    assert!(tmp.path().join("t.samples.csv").is_file());
}

#[test]
fn evaluate_writes_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    generate(&data, "1", true);
    let report = tmp.path().join("r.csv");
    let o = hsar(&[
        "evaluate",
        "--dataset",
        data.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
        "--modalities",
        "ground_truth,raw",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = std::fs::read_to_string(&report).unwrap();
    assert_eq!(rows.lines().count(), 1 + 2 * 24);
    assert!(tmp.path().join("r_summary.csv").is_file());
    assert!(String::from_utf8_lossy(&o.stdout).contains("ground_truth"));
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nothing");
    assert_eq!(code(&hsar(&["run", "--dataset", missing.to_str().unwrap()])), 2);
    assert_eq!(code(&hsar(&["run"])), 2);
    assert_eq!(code(&hsar(&["frobnicate"])), 2);
    let cfg = tmp.path().join("bad.json");
    std::fs::write(&cfg, "{ nope").unwrap();
    assert_eq!(code(&hsar(&["run", "--config", cfg.to_str().unwrap()])), 2);
    let data = tmp.path().join("data");
    generate(&data, "1", false);
    assert_eq!(
        code(&hsar(&[
            "run",
            "--dataset",
            data.to_str().unwrap(),
            "--toggle-off",
            "warp"
        ])),
        2
    );
    let r = tmp.path().join("r.csv");
    assert_eq!(
        code(&hsar(&[
            "evaluate",
            "--dataset",
            data.to_str().unwrap(),
            "--out",
            r.to_str().unwrap(),
            "--modalities",
            "x"
        ])),
        2
    );
}

#[test]
fn unreadable_frames_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    generate(&data, "1", false);
    std::fs::write(data.join("frames/0000/depth_noisy.png"), b"garbage").unwrap();
    let o = hsar(&["run", "--dataset", data.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}
