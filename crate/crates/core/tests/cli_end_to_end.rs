//! The command-line front end, in process and as a subprocess.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use clap::Parser;
use explbench::cli::{run, Cli};

fn fixtures() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures"))
}

fn run_args(out: &Path, args: &[&str]) -> anyhow::Result<()> {
    let config = fixtures().join("config.toml");
    let mut full = vec!["explbench", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    full.extend_from_slice(args);
    run(Cli::try_parse_from(full)?)
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_explbench"));
    c.env_remove("EXPLBENCH_CONFIG");
    c
}

#[test]
fn rank_eval_writes_ap_and_ndcg_columns() {
    let out = tempfile::tempdir().unwrap();
    run_args(out.path(), &["rank-eval", "--setting", "tr2"]).unwrap();
    let tsv = fs::read_to_string(out.path().join("rank-tfr-bert-tr2.tsv")).unwrap();
    let mut lines = tsv.lines();
    assert!(lines.next().unwrap().starts_with("# explbench "));
    assert!(lines.next().unwrap().starts_with("# model=tfr-bert"));
    assert_eq!(lines.next().unwrap(), "question\tap\tndcg");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 21);
    assert!(rows.last().unwrap().starts_with("ALL\t"));
    for r in &rows {
        assert_eq!(r.split('\t').count(), 3, "{r}");
    }
}

#[test]
fn baseline_comparison_reads_a_previous_report() {
    let out = tempfile::tempdir().unwrap();
    run_args(out.path(), &["rank-eval", "--setting", "wt2"]).unwrap();
    let base = out.path().join("rank-bert-wt2.tsv");
    let again = tempfile::tempdir().unwrap();
    run_args(again.path(), &["rank-eval", "--setting", "wt2", "--baseline", base.to_str().unwrap()]).unwrap();
    let text = fs::read_to_string(again.path().join("rank-tfr-bert-wt2.txt")).unwrap();
    assert!(text.contains("delta vs baseline"), "{text}");
}

#[test]
fn stepwise_commands_produce_their_files() {
    let out = tempfile::tempdir().unwrap();
    let o = out.path();
    run_args(o, &["ingest"]).unwrap();
    run_args(o, &["shortlist", "--k", "5"]).unwrap();
    run_args(o, &["merge"]).unwrap();
    run_args(o, &["agreement", "--weighting", "linear"]).unwrap();
    run_args(o, &["topk", "--k", "4"]).unwrap();
    run_args(o, &["align"]).unwrap();
    run_args(o, &["schema", "solve"]).unwrap();
    run_args(o, &["schema", "score"]).unwrap();
    run_args(o, &["schema", "explain", "--n-schemas", "2"]).unwrap();
    for f in [
        "ingest.tsv",
        "shortlists.jsonl",
        "merged.tsv",
        "agreement.tsv",
        "explanations-bert.jsonl",
        "alignment-t5.tsv",
        "explanations-t5.jsonl",
        "solutions.jsonl",
        "schema-scores-bert.tsv",
        "explanations-schema-2.jsonl",
    ] {
        assert!(o.join(f).is_file(), "missing {f}");
    }
    let e = |f: &str| o.join(f).to_str().unwrap().to_string();
    let list = format!("{},{}", e("explanations-schema-2.jsonl"), e("explanations-t5.jsonl"));
    run_args(o, &["ensemble", "--explanations", &list]).unwrap();
    let list = format!("{},{}", e("explanations-bert.jsonl"), e("explanations-t5.jsonl"));
    run_args(o, &["expl-eval", "--explanations", &list, "--agg", "corpus"]).unwrap();
    assert!(o.join("expl-summary.txt").is_file());
    assert!(o.join("expl-t5.tsv").is_file());
    let top = fs::read_to_string(o.join("explanations-bert.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(top.lines().next().unwrap()).unwrap();
    assert_eq!(first["facts"].as_array().unwrap().len(), 4);
}

#[test]
fn flags_override_config_values() {
    let out = tempfile::tempdir().unwrap();
    run_args(out.path(), &["--workers", "2", "shortlist", "--k", "1"]).unwrap();
    let a = fs::read_to_string(out.path().join("shortlists.jsonl")).unwrap();
    run_args(out.path(), &["shortlist", "--k", "10"]).unwrap();
    let b = fs::read_to_string(out.path().join("shortlists.jsonl")).unwrap();
    assert!(a.len() < b.len());
}

#[test]
fn pipeline_is_deterministic_across_worker_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_args(a.path(), &["--workers", "1", "pipeline"]).unwrap();
    run_args(b.path(), &["--workers", "4", "pipeline"]).unwrap();
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() > 15);
    for n in names {
        let x = fs::read(a.path().join(&n)).unwrap();
        let y = fs::read(b.path().join(&n)).unwrap();
        assert_eq!(x, y, "{n:?} differs");
    }
}

#[test]
fn nan_threshold_exits_nonzero() {
    let out = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["--config", fixtures().join("config.toml").to_str().unwrap()])
        .args(["--out", out.path().to_str().unwrap(), "align", "--threshold", "NaN"])
        .output()
        .unwrap();
    assert!(!status.status.success());
    let err = String::from_utf8_lossy(&status.stderr);
    assert!(err.contains("thresholds.rouge"), "{err}");
    assert_eq!(fs::read_dir(out.path()).unwrap().count(), 0);
}

#[test]
fn failed_run_removes_partial_outputs() {
    let out = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["--config", fixtures().join("config.toml").to_str().unwrap()])
        .args(["--out", out.path().to_str().unwrap(), "pipeline", "--ranker", "nope"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&status.stderr).contains("nope"));
    // ingest and top-K outputs were written before the failure
    assert_eq!(fs::read_dir(out.path()).unwrap().count(), 0);
}

#[test]
fn config_from_environment() {
    let out = tempfile::tempdir().unwrap();
    let status = bin()
        .env("EXPLBENCH_CONFIG", fixtures().join("config.toml"))
        .args(["--out", out.path().to_str().unwrap(), "ingest"])
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    assert!(out.path().join("ingest.tsv").is_file());
}

#[test]
fn missing_input_is_reported() {
    let out = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["--out", out.path().to_str().unwrap(), "--questions", "/no/such/file.jsonl", "ingest"])
        .output()
        .unwrap();
    assert!(!status.status.success());
    assert!(String::from_utf8_lossy(&status.stderr).contains("paths.questions"));
}
