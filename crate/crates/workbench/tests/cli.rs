mod common;

use std::path::Path;
use std::process::{Command, Output};

use topicbench::Backend;

fn topicbench(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_topicbench"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn ingest_run_explain_score() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("fast.toml");
    std::fs::write(&cfg, common::fast_config(Backend::Lda, 0).to_toml()).unwrap();
    let cfg = cfg.to_str().unwrap();

    let out = stdout(&topicbench(&["ingest", "--config", cfg], tmp.path()));
    assert!(out.contains("258 with agreed labels"), "{out}");

    let out = stdout(&topicbench(&["run", "--config", cfg, "--backend", "word2vec", "--seed", "4", "--out", "runs"], tmp.path()));
    let run_id = out.lines().next().unwrap().strip_prefix("run ").unwrap().to_string();
    assert!(run_id.starts_with("word2vec-s4-"), "{run_id}");
    assert!(out.contains("test (86 docs)"));

    let run_dir = format!("runs/{run_id}");
    let out = stdout(&topicbench(&["explain", "--run-dir", &run_dir], tmp.path()));
    assert_eq!(out.lines().filter(|l| !l.starts_with(" ")).count(), 86);

    let out = stdout(&topicbench(&["score", "--run-dir", "runs"], tmp.path()));
    assert!(out.contains(&format!("{run_id}\tword2vec\t0/0 = 0.0000")), "{out}");
    let out = stdout(&topicbench(&["score", "--run-dir", "runs", "--complete"], tmp.path()));
    assert!(out.contains("0/86 = 0.0000"), "{out}");

    // same id again without --overwrite
    let again = topicbench(&["run", "--config", cfg, "--backend", "word2vec", "--seed", "4", "--out", "runs", "--no-explain"], tmp.path());
    assert!(!again.status.success());
    assert!(String::from_utf8_lossy(&again.stderr).contains("already exists"));
}

#[test]
fn errors_exit_nonzero_with_message() {
    let tmp = tempfile::tempdir().unwrap();
    let o = topicbench(&["run", "--config", "missing.toml"], tmp.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));

    std::fs::write(tmp.path().join("bad.toml"), "seed = 1\nbogus = true\n").unwrap();
    let o = topicbench(&["run", "--config", "bad.toml"], tmp.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));
}
