use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn skillrag(args: &[&str]) -> Output {
    skillrag_env(args, None)
}

fn skillrag_env(args: &[&str], config_env: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_skillrag"));
    cmd.args(args).env_remove("SKILLRAG_CONFIG");
    if let Some(p) = config_env {
        cmd.env("SKILLRAG_CONFIG", p);
    }
    cmd.output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn thresholds(path: &Path) -> Vec<f64> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["threshold_used"].as_f64().unwrap())
        .collect()
}

#[test]
fn probe_writes_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sk.jsonl");
    let o = skillrag(&[
        "--script", s(&fixture("script.jsonl")),
        "probe", "--in", s(&fixture("qa.jsonl")), "--n", "10", "--theta", "0.8", "--out", s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 4);
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["count"], 4);
}

#[test]
fn out_of_range_theta_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sk.jsonl");
    let o = skillrag(&[
        "--script", s(&fixture("script.jsonl")),
        "probe", "--in", s(&fixture("qa.jsonl")), "--theta", "1.5", "--out", s(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("theta"));
    assert!(!out.exists());
}

#[test]
fn unknown_flag_exits_one() {
    let o = skillrag(&["probe", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    let o = skillrag(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn eval_single_mode_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = skillrag(&[
        "--script", s(&fixture("script.jsonl")),
        "eval", "--in", s(&fixture("qa.jsonl")), "--corpus", s(&fixture("corpus.jsonl")),
        "--mode", "skill", "--out-dir", s(dir.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["records.jsonl", "provenance.jsonl", "report.tsv", "report.jsonl"] {
        assert!(dir.path().join(format!("qa.skill.{f}")).exists(), "{f}");
    }
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("qa\tskill\t4\t0\t1.0000"));
}

#[test]
fn answer_and_filter_and_ingest() {
    let dir = tempfile::tempdir().unwrap();
    let script = fixture("script.jsonl");
    let (qa, corpus) = (fixture("qa.jsonl"), fixture("corpus.jsonl"));
    let out = dir.path().join("a.jsonl");
    let o = skillrag(&["--script", s(&script), "answer", "--in", s(&qa), "--corpus", s(&corpus), "--mode", "standard", "--out", s(&out)]);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 4);

    let out = dir.path().join("f.jsonl");
    let o = skillrag(&["--script", s(&script), "filter", "--in", s(&qa), "--corpus", s(&corpus), "--out", s(&out)]);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 4);

    let o = skillrag(&["ingest", "--corpus", s(&corpus)]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["doc_count"], 8);

    let o = skillrag(&["--script", s(&script), "answer", "--in", s(&qa), "--corpus", s(&corpus), "--mode", "bogus", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn flag_beats_config_file_beats_default() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("skillrag.conf");
    fs::write(&cfg, format!("# probe settings\nscript = {}\ntheta = 0.6\n", s(&fixture("script.jsonl")))).unwrap();
    let qa = fixture("qa.jsonl");
    let out = dir.path().join("sk.jsonl");

    let run = |extra: &[&str], env: Option<&Path>| {
        let mut args = extra.to_vec();
        args.extend(["probe", "--in", s(&qa), "--out", s(&out)]);
        let o = skillrag_env(&args, env);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        thresholds(&out)[0]
    };
    assert_eq!(run(&["--script", s(&fixture("script.jsonl"))], None), 0.8);
    assert_eq!(run(&["--config", s(&cfg)], None), 0.6);
    assert_eq!(run(&[], Some(&cfg)), 0.6);
    let mut args = vec!["--config", s(&cfg)];
    args.extend(["probe", "--in", s(&qa), "--theta", "0.9", "--out", s(&out)]);
    assert!(skillrag(&args).status.success());
    assert_eq!(thresholds(&out)[0], 0.9);
}

#[test]
fn bad_config_file_names_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.conf");
    fs::write(&cfg, "theta = 0.5\nk = zero\n").unwrap();
    let o = skillrag(&["--config", s(&cfg), "ingest", "--corpus", s(&fixture("corpus.jsonl"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn runtime_failure_leaves_no_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let qa = dir.path().join("qa.jsonl");
    fs::write(&qa, "{\"id\":\"x\",\"question\":\"Unscripted?\",\"answers\":[\"y\"]}\n").unwrap();
    let out = dir.path().join("sk.jsonl");
    let o = skillrag(&["--script", s(&fixture("script.jsonl")), "probe", "--in", s(&qa), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    let leftovers: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(leftovers.len(), 1);
}

#[test]
fn train_toy_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trace.tsv");
    let o = skillrag(&["--seed", "3", "train-toy", "--questions", "10", "--iterations", "20", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 21);
}
