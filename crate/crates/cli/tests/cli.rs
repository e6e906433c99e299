use std::path::Path;
use std::process::{Command, Output};

const MICRO: [&str; 10] = [
    "--set", "n_train=8", "--set", "n_test=3", "--set", "height=24", "--set", "width=32", "--set",
    "duration_s=40",
];

fn tob(args: &[&str], dir: &Path) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_tob"))
        .current_dir(dir)
        .args(MICRO)
        .args(args)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "tob {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn stages_chain_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    tob(&["generate", "--out", "raw/train"], d);
    tob(&["generate", "--split", "test", "--out", "raw/test"], d);
    assert_eq!(std::fs::read_dir(d.join("raw/test")).unwrap().count(), 6);
    tob(&["normalize", "--corpus", "raw/train", "--out", "norm/train"], d);
    tob(&["normalize", "--corpus", "raw/test", "--out", "norm/test"], d);
    tob(&["train-image-head", "--corpus", "norm/train", "--out", "ih.tobm"], d);
    tob(
        &["train-fusion", "--corpus", "norm/train", "--image-head", "ih.tobm", "--out", "fu.tobm"],
        d,
    );
    tob(&["score", "--model", "fu.tobm", "--corpus", "norm/train", "--out", "sc/train"], d);
    tob(&["score", "--model", "fu.tobm", "--corpus", "norm/test", "--out", "sc/test"], d);
    tob(&["train-agg", "--scores", "sc/train", "--truth", "raw/train", "--out", "agg.tobm"], d);
    let out = tob(&["detect", "--agg", "agg.tobm", "--scores", "sc/test", "--out", "det"], d);
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 3);
    let out = tob(&["evaluate", "--runs", "det", "--truth", "raw/test", "--out", "report.csv"], d);
    let report = std::fs::read_to_string(d.join("report.csv")).unwrap();
    assert!(report.contains("two_stream_agg"));
    assert_eq!(String::from_utf8_lossy(&out.stdout), report);

    let video = std::fs::read_dir(d.join("raw/test"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "tobv"))
        .unwrap();
    let out = tob(
        &["detect", "--model", "fu.tobm", "--agg", "agg.tobm", "--video", video.to_str().unwrap(), "--scores-out", "one.csv"],
        d,
    );
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("tob_estimate: "));
    assert!(d.join("one.csv").exists());
}

#[test]
fn unknown_keys_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_tob"))
        .args(["--set", "no_such_key=1", "experiment"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_key"));
}
