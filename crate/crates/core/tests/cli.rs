use std::path::Path;
use std::process::{Command, Output};

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bench"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .expect("bench binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn scores(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

#[test]
fn lists_every_technique() {
    let out = bench(&["list-techniques"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let ids: Vec<&str> = text
        .lines()
        .filter_map(|l| l.split_whitespace().next())
        .collect();
    assert_eq!(ids.len(), 22);
    assert_eq!(ids[0], "baseline");
    for id in ["pre:rus", "in:boosting", "post:threshold"] {
        assert!(ids.contains(&id), "{id} missing");
    }
}

#[test]
fn configuration_errors_exit_2() {
    let out = bench(&["run", "--techniques", "pre:unknown", "--runs", "2"]);
    assert_eq!(out.status.code(), Some(2));
    let out = bench(&["run", "--split", "0.5,0.5,0.5", "--runs", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_data_exits_3() {
    let out = bench(&["run", "--data", "/nonexistent/telemetry.csv", "--runs", "2"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not found"));
}

#[test]
fn generate_train_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("telemetry.csv");
    let gen = bench(&[
        "generate",
        "--n-normal",
        "600",
        "--n-failure",
        "30",
        "--out",
        path(&csv),
    ]);
    assert!(gen.status.success());

    let model = dir.path().join("model.json");
    let again = dir.path().join("again.json");
    let common = [
        "--data",
        path(&csv),
        "--technique",
        "post:threshold",
        "--trees",
        "15",
    ];
    let trained = scores(&bench(
        &[&["train"][..], &common, &["--model", path(&model)]].concat(),
    ));
    bench(&[&["train"][..], &common, &["--model", path(&again)]].concat());
    assert_eq!(
        std::fs::read(&model).unwrap(),
        std::fs::read(&again).unwrap()
    );
    assert_eq!(trained["technique"], "post:threshold");
    assert_eq!(trained["rows"], 126);

    let eval = scores(&bench(&[
        "eval",
        "--model",
        path(&model),
        "--data",
        path(&csv),
    ]));
    assert_eq!(eval["rows"], 630);
    let f1 = eval["f1"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&f1));
}

#[test]
fn eval_rejects_mismatched_columns() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    let model = dir.path().join("m.json");
    bench(&[
        "generate",
        "--n-normal",
        "200",
        "--n-failure",
        "20",
        "--out",
        path(&csv),
    ]);
    bench(&[
        "train",
        "--data",
        path(&csv),
        "--trees",
        "5",
        "--model",
        path(&model),
    ]);
    let text = std::fs::read_to_string(&csv).unwrap();
    let renamed = text.replacen("ber_tx", "ber_transmit", 1);
    let other = dir.path().join("other.csv");
    std::fs::write(&other, renamed).unwrap();
    let out = bench(&["eval", "--model", path(&model), "--data", path(&other)]);
    assert_eq!(out.status.code(), Some(3));
}
