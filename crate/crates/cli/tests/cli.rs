use std::path::Path;
use std::process::{Command, Output};

fn basketio(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_basketio")).args(args).output().unwrap()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn write_inspect_and_read() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("c.bkio");
    let out = basketio(&[
        "write", "--dataset", "carray", "--events", "2500", "--codec", "lz4:1", "--precond", "shuffle",
        "--policy", "cluster:1000", "--out", arg(&file),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = basketio(&["inspect", arg(&file)]);
    assert!(out.status.success());
    let footer: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(footer["total_events"], 2500);
    assert_eq!(footer["clusters"], serde_json::json!([1000, 2000, 2500]));
    assert_eq!(footer["directory"].as_array().unwrap().len(), 3);

    let out = basketio(&["read", arg(&file)]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().nth(1).unwrap().starts_with("hits,"));
}

#[test]
fn bench_writes_csv_and_markdown() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    let out = basketio(&[
        "bench", "--dataset", "flat", "--events", "3000", "--codecs", "zstd:3,lz4:1", "--precond", "none,bss",
        "--policy", "cluster:1000,basket:32768", "--out", arg(&csv),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    // 8 cells, each a file row plus 8 column rows
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 1 + 8 * 9);

    let out = basketio(&["bench", "--dataset", "carray", "--events", "100", "--codecs", "raw", "--format", "md"]);
    assert!(out.status.success());
    // header, rule, file row, column row, data row, offsets row
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 6);
}

#[test]
fn train_dict_and_use_it() {
    let dir = tempfile::tempdir().unwrap();
    let samples = dir.path().join("samples");
    std::fs::create_dir(&samples).unwrap();
    for (i, r) in basketio::bench::event_records(128, 3).iter().enumerate() {
        std::fs::write(samples.join(format!("{i:03}.json")), r).unwrap();
    }
    let dict = dir.path().join("d.dict");
    let out = basketio(&["train-dict", "--samples", arg(&samples), "--capacity", "8192", "--out", arg(&dict)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let len = std::fs::metadata(&dict).unwrap().len();
    assert!(len > 0 && len <= 8192);

    let file = dir.path().join("f.bkio");
    let out = basketio(&[
        "write", "--dataset", "flat", "--events", "500", "--dict", arg(&dict), "--out", arg(&file),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(basketio(&["read", arg(&file)]).status.code(), Some(2));
    assert!(basketio(&["read", arg(&file), "--dict", arg(&dict)]).status.success());
}

#[test]
fn bad_arguments_fail() {
    assert!(!basketio(&["bench", "--codecs", "snappy:1"]).status.success());
    assert!(!basketio(&["bench", "--policy", "basket:10"]).status.success());
    let out = basketio(&["write", "--codec", "zstd:30", "--out", "/nonexistent/x"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(basketio(&["inspect", "/nonexistent/x"]).status.code(), Some(2));
}
