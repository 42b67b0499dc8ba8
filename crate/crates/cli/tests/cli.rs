use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn insightgen(dir: &Path, args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_insightgen"))
        .current_dir(dir)
        .args(args)
        .env_remove("OPENAI_API_KEY")
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "insightgen {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn tables() -> Vec<String> {
    ["snooker.csv", "players.csv", "transit.csv"]
        .iter()
        .map(|t| fixture(t).display().to_string())
        .collect()
}

/// Runs generate, then returns the records path.
fn generate(dir: &Path, out_dir: &str, extra: &[&str]) -> (PathBuf, serde_json::Value) {
    let mut args = vec!["--mock", "--seed", "3", "generate", "--n", "25", "--out-dir", out_dir];
    args.extend_from_slice(extra);
    let t = tables();
    args.extend(t.iter().map(String::as_str));
    let out = insightgen(dir, &args);
    let manifest = stdout_json(&out);
    let run_id = manifest["run_id"].as_str().unwrap().to_string();
    (dir.join(out_dir).join(run_id).join("records.jsonl"), manifest)
}

#[test]
fn profile_prints_candidates() {
    let dir = tempfile::tempdir().unwrap();
    let out = insightgen(dir.path(), &["profile", &fixture("snooker.csv").display().to_string()]);
    let v = stdout_json(&out);
    assert_eq!(v[0]["profile"]["row_count"], 14);
    assert!(!v[0]["groupby_candidates"].as_array().unwrap().is_empty());
}

#[test]
fn full_mock_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (records, manifest) = generate(d, "runs", &[]);
    let counts = &manifest["counts"];
    assert_eq!(counts["generated"], 75);
    assert_eq!(
        counts["generated"].as_u64(),
        Some(counts["executable"].as_u64().unwrap() + counts["non_executable"].as_u64().unwrap())
    );
    let r = records.display().to_string();

    insightgen(d, &["filter", &r]);
    let trained = insightgen(d, &["--mock", "train-align", "--variant", "concat", "--epochs", "5", "--records", &r, "--out", "model.json"]);
    assert!(stdout_json(&trained)["test_f1"].is_number());
    let scored = stdout_json(&insightgen(d, &["--mock", "score", &r, "--model", "model.json"]));
    assert_eq!(
        scored["aligned"].as_u64().unwrap() + scored["misaligned"].as_u64().unwrap(),
        scored["executable"].as_u64().unwrap()
    );

    insightgen(d, &["--mock", "judge", &r, "--out", "judge.jsonl"]);
    insightgen(d, &["annotate", "--sample", "12", "--out", "sheet.csv", &r]);
    let mut reader = csv::Reader::from_path(d.join("sheet.csv")).unwrap();
    let header = reader.headers().unwrap().clone();
    let mut rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 12);
    let label_col = header.iter().position(|h| h == "label").unwrap();
    let mut writer = csv::Writer::from_path(d.join("sheet.csv")).unwrap();
    writer.write_record(&header).unwrap();
    for (i, row) in rows.iter_mut().enumerate() {
        let mut fields: Vec<String> = row.iter().map(str::to_string).collect();
        fields[label_col] = if i % 3 == 0 { "no" } else { "yes" }.into();
        writer.write_record(&fields).unwrap();
    }
    writer.flush().unwrap();
    insightgen(d, &["import-annotations", "sheet.csv", "--out", "human.jsonl"]);

    let listed = insightgen(d, &["report", "--annotations", "human.jsonl", "--annotations", "judge.jsonl", "--out", "report", &r]);
    let files = String::from_utf8(listed.stdout).unwrap();
    for name in ["alignment_confusion.csv", "alignment_pr.svg", "diversity_by_style.csv", "code_length.svg", "cost.csv"] {
        assert!(files.contains(name), "{name} missing from:\n{files}");
        assert!(d.join("report").join(name).exists());
    }
    let confusion = fs::read_to_string(d.join("report/alignment_confusion.csv")).unwrap();
    assert!(confusion.contains("ensemble,classifier"));
    assert!(confusion.contains("human,judge"));
}

#[test]
fn mock_pipeline_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let mut snapshots = Vec::new();
    for k in 0..2 {
        let out_dir = format!("runs{k}");
        let (records, _) = generate(dir.path(), &out_dir, &[]);
        let r = records.display().to_string();
        let model = format!("model{k}.json");
        insightgen(dir.path(), &["--mock", "train-align", "--epochs", "3", "--records", &r, "--out", &model]);
        insightgen(dir.path(), &["--mock", "score", &r, "--model", &model]);
        let report = format!("report{k}");
        insightgen(dir.path(), &["eval", "--which", "alignment", "--out", &report, &r]);
        let bytes = |p: &Path| fs::read(p).unwrap();
        snapshots.push((
            bytes(&records),
            bytes(&records.with_file_name("manifest.json")),
            bytes(&dir.path().join(&model)),
            bytes(&dir.path().join(&report).join("alignment_scores.csv")),
        ));
    }
    assert_eq!(snapshots[0], snapshots[1]);
}

#[test]
fn cost_ranks_translation_styles_above_paired_ones() {
    let dir = tempfile::tempdir().unwrap();
    let mut paths = Vec::new();
    for style in ["qc", "cq", "q", "c"] {
        let (records, _) = generate(dir.path(), "runs", &["--style", style]);
        paths.push(records.display().to_string());
    }
    let mut args = vec!["eval", "--which", "cost", "--out", "cost"];
    args.extend(paths.iter().map(String::as_str));
    insightgen(dir.path(), &args);
    let text = fs::read_to_string(dir.path().join("cost/cost.csv")).unwrap();
    let tokens: std::collections::HashMap<String, f64> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[4].parse().unwrap())
        })
        .collect();
    assert!(tokens["q"] > tokens["c"], "{tokens:?}");
    assert!(tokens["c"] > tokens["qc"].max(tokens["cq"]), "{tokens:?}");
}

#[test]
fn config_errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "[generation]\nn_insight = 3\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_insightgen"))
        .current_dir(dir.path())
        .args(["--config", "bad.toml", "profile", &fixture("snooker.csv").display().to_string()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_insight"));

    // live mode without a key fails before any request is made
    let out = Command::new(env!("CARGO_BIN_EXE_insightgen"))
        .current_dir(dir.path())
        .env_remove("OPENAI_API_KEY")
        .args(["generate", &fixture("snooker.csv").display().to_string()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("OPENAI_API_KEY"));
}
