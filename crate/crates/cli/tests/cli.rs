use std::path::Path;
use std::process::{Command, Output};

fn infoplane(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_infoplane"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("net.json");
    std::fs::write(
        &path,
        r#"{"activation": {"kind": "tanh"}, "epochs": 3, "batch_size": 1024,
            "learning_rate": 0.01, "snapshot_epochs": [0, 1, 3]}"#,
    )
    .unwrap();
    path
}

#[test]
fn pipeline_stages_run_independently() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let data = dir.join("data.csv");
    let out = infoplane(&["generate-data", "--seed", "3", "--out", s(&data)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&data).unwrap();
    assert_eq!(text.lines().count(), 4096);

    let config = write_config(dir);
    let run = dir.join("run");
    let out = infoplane(&[
        "train",
        "--config",
        s(&config),
        "--data",
        s(&data),
        "--out",
        s(&run),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(run.join("trace/manifest.json").is_file());
    assert!(run.join("metrics.json").is_file());

    let trace = run.join("trace");
    let mut csvs = Vec::new();
    for est in ["uniform", "ebab", "kde-fixed", "kde-adaptive"] {
        let csv = dir.join(format!("{est}.csv"));
        let out = infoplane(&[
            "estimate",
            "--trace",
            s(&trace),
            "--estimator",
            est,
            "--bins",
            "12",
            "--sigma0-sq",
            "0.01",
            "--out",
            s(&csv),
        ]);
        assert!(
            out.status.success(),
            "{est}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let rows = std::fs::read_to_string(&csv).unwrap().lines().count();
        assert_eq!(rows, 1 + 6 * 3, "{est}");
        csvs.push(csv);
    }

    let out = infoplane(&["score", s(&csvs[1])]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["included_layers"].as_array().unwrap().len(), 5);

    let score = dir.join("score.json");
    let out = infoplane(&[
        "score",
        "--include-last",
        "--out",
        s(&score),
        s(&csvs[1]),
        s(&csvs[1]),
    ]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&score).unwrap()).unwrap();
    assert_eq!(report["included_layers"].as_array().unwrap().len(), 6);

    let svg = dir.join("plane.svg");
    let out = infoplane(&["plot", "--title", "ebab", "--out", s(&svg), s(&csvs[1])]);
    assert!(out.status.success());
    let svg = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 6);

    let out = infoplane(&["maxvals", "--trace", s(&trace)]);
    assert!(out.status.success());
    let maxvals: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for row in maxvals["per_layer"].as_array().unwrap() {
        for v in row.as_array().unwrap() {
            assert!(v.as_f64().unwrap() <= 1.0);
        }
    }
}

#[test]
fn sweep_with_seed_range() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let config = dir.join("sweep.json");
    std::fs::write(
        &config,
        r#"{"activations": [{"kind": "relu"}], "l2_lambdas": [0.0],
            "base": {"activation": {"kind": "relu"}, "epochs": 2, "batch_size": 1024,
                     "snapshot_epochs": [0, 2]},
            "estimators": [{"kind": "ebab", "n_bins": 10}]}"#,
    )
    .unwrap();
    let out_dir = dir.join("out");
    let out = infoplane(&[
        "sweep",
        "--config",
        s(&config),
        "--out",
        s(&out_dir),
        "--seeds",
        "2..4",
        "--workers",
        "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("sweep_report.json")).unwrap()).unwrap();
    let seeds: Vec<u64> = report["runs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["key"]["seed"].as_u64().unwrap())
        .collect();
    assert_eq!(seeds, vec![2, 3, 4]);
}

#[test]
fn argument_errors_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_eq!(
        infoplane(&["estimate", "--trace", "x", "--estimator", "nope", "--out", "y"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        infoplane(&["sweep", "--config", "x", "--out", "y", "--seeds", "5..1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(infoplane(&["frobnicate"]).status.code(), Some(2));

    let bad = dir.join("bad.json");
    std::fs::write(&bad, r#"{"activation": {"kind": "relu"}, "learning_rate": -1.0}"#).unwrap();
    let out = infoplane(&["train", "--config", s(&bad), "--out", s(&dir.join("r"))]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let unknown = dir.join("unknown.json");
    std::fs::write(&unknown, r#"{"activation": {"kind": "relu"}, "colour": 1}"#).unwrap();
    let out = infoplane(&["train", "--config", s(&unknown), "--out", s(&dir.join("r"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_failures_exit_with_1() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing");
    let out = infoplane(&["maxvals", "--trace", s(&missing)]);
    assert_eq!(out.status.code(), Some(1));

    let corrupt = tmp.path().join("data.csv");
    std::fs::write(&corrupt, "0,1,0\n").unwrap();
    let config = write_config(tmp.path());
    let out = infoplane(&[
        "train",
        "--config",
        s(&config),
        "--data",
        s(&corrupt),
        "--out",
        s(&tmp.path().join("r")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}
