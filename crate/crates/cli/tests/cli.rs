use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

fn eden(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eden"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .expect("run eden")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    dir: TempDir,
    state: PathBuf,
    pattern: PathBuf,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(&config, r#"{"seed": 11, "initial_nodes": 3, "max_nodes": 8}"#).unwrap();
    let pattern = dir.path().join("pattern.json");
    std::fs::write(
        &pattern,
        r#"[{"entries":[{"offset":[0,0,0],"index":0,"magnitude":3.0}]},
            {"entries":[{"offset":[0.5,0,0],"index":1,"magnitude":2.0}],"jitter":0.1}]"#,
    )
    .unwrap();
    let state = dir.path().join("state.json");
    let out = eden(&["init", "--config", s(&config), "--out", s(&state)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    Fixture { dir, state, pattern }
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn init_writes_a_loadable_state() {
    let f = fixture();
    let entity = eden_core::session::load(&f.state).unwrap();
    assert_eq!(entity.nodes.len(), 3);
    let out = eden(&["inspect", "--state", s(&f.state)]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("nodes:        3"));
}

#[test]
fn zero_epoch_train_leaves_state_untouched() {
    let f = fixture();
    let before = std::fs::read(&f.state).unwrap();
    let out = eden(&["train", "--state", s(&f.state), "--pattern", s(&f.pattern), "--epochs", "0"]);
    assert!(out.status.success());
    assert_eq!(std::fs::read(&f.state).unwrap(), before);
}

#[test]
fn metrics_have_one_row_per_epoch() {
    let f = fixture();
    let log = f.dir.path().join("session.jsonl");
    let csv = f.dir.path().join("metrics.csv");
    let out = eden(&[
        "train", "--state", s(&f.state), "--pattern", s(&f.pattern), "--epochs", "7", "--log", s(&log),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(eden(&["export-metrics", "--log", s(&log), "--out", s(&csv)]).status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("epoch,nodes,spikes,stability_mean"));
    let epochs: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(epochs, ["0", "1", "2", "3", "4", "5", "6"]);
}

#[test]
fn replay_reports_identical() {
    let f = fixture();
    let out = eden(&["replay", "--state", s(&f.state), "--epochs", "5", "--pattern", s(&f.pattern)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "identical (5 epochs)");
}

#[test]
fn lock_round_trip() {
    let f = fixture();
    assert!(eden(&["lock", "--state", s(&f.state)]).status.success());
    assert!(eden_core::session::load(&f.state).unwrap().locked);
    assert!(eden(&["lock", "--state", s(&f.state), "--unlock"]).status.success());
    assert!(!eden_core::session::load(&f.state).unwrap().locked);
}

#[test]
fn exit_codes() {
    let f = fixture();
    let missing = f.dir.path().join("nope.json");
    let out = eden(&["inspect", "--state", s(&missing)]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error kind=io code=3 message="));

    let bad = f.dir.path().join("bad.json");
    std::fs::write(&bad, "{not json").unwrap();
    assert_eq!(code(&eden(&["inspect", "--state", s(&bad)])), 4);

    let mut doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&f.state).unwrap()).unwrap();
    doc["format_version"] = 99.into();
    let future = f.dir.path().join("future.json");
    std::fs::write(&future, doc.to_string()).unwrap();
    assert_eq!(code(&eden(&["inspect", "--state", s(&future)])), 5);

    assert_eq!(code(&eden(&["train", "--state", s(&f.state)])), 2);
    assert_eq!(code(&eden(&["frobnicate"])), 2);
}
