//! End-to-end tests of the binary: exit codes, record output, reports.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cellguard"))
}

fn write_notebook(dir: &Path, name: &str, cells: &[(Option<u64>, &str)]) -> PathBuf {
    let cells: Vec<serde_json::Value> = cells
        .iter()
        .map(|(count, src)| {
            serde_json::json!({"cell_type": "code", "execution_count": count, "source": src})
        })
        .collect();
    let nb = serde_json::json!({"nbformat": 4, "nbformat_minor": 5, "cells": cells});
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_vec(&nb).unwrap()).unwrap();
    path
}

fn write_mock_script(dir: &Path, entries: &[serde_json::Value]) -> PathBuf {
    let path = dir.join("mock.jsonl");
    let lines: Vec<String> = entries.iter().map(|e| e.to_string()).collect();
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    path
}

fn crash_response(reasoning: &str) -> serde_json::Value {
    serde_json::json!({"response": {"reasoning": reasoning, "detection": true}})
}

fn safe_response() -> serde_json::Value {
    serde_json::json!({"response": {"reasoning": "consistent", "detection": false}})
}

#[test]
fn predict_no_crash_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let nb = write_notebook(
        dir.path(),
        "safe.ipynb",
        &[(Some(1), "x = 1"), (None, "print(x)")],
    );
    let script = write_mock_script(dir.path(), &[safe_response()]);
    let output = bin()
        .args(["predict"])
        .arg(&nb)
        .args(["--cell", "1", "--provider"])
        .arg(format!("mock:{}", script.display()))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{output:?}");
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("\"detection\":false"));
}

#[test]
fn predict_crash_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let nb = write_notebook(
        dir.path(),
        "fig1.ipynb",
        &[
            (Some(1), "train_images = make_iterator()"),
            (Some(2), "model = build_model(output_units=5)"),
            (None, "model.fit(train_images, validation_data=val_images)"),
        ],
    );
    let fixture = dir.path().join("kernel.json");
    std::fs::write(
        &fixture,
        serde_json::json!({
            "model": {"kind": "estimator", "class": "Sequential", "fitted": false},
            "train_images": {"kind": "image_iterator", "samples": 320, "num_classes": 2,
                              "batch_size": 32, "image_shape": [256, 256, 3],
                              "target_size": [256, 256]}
        })
        .to_string(),
    )
    .unwrap();
    let script = write_mock_script(
        dir.path(),
        &[crash_response(
            "the iterator reports num_classes=2 while the output layer produces five logits",
        )],
    );
    let output = bin()
        .args(["predict"])
        .arg(&nb)
        .args(["--cell", "2", "--provider"])
        .arg(format!("mock:{}", script.display()))
        .arg("--kernel-fixture")
        .arg(&fixture)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "{output:?}");
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("num_classes=2"));
}

#[test]
fn predict_replay_unavailable_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let nb = write_notebook(
        dir.path(),
        "t.ipynb",
        &[(Some(1), "x = 1"), (None, "print(x)")],
    );
    let script = write_mock_script(dir.path(), &[safe_response()]);
    let output = bin()
        .args(["predict"])
        .arg(&nb)
        .args(["--cell", "1", "--replay", "--provider"])
        .arg(format!("mock:{}", script.display()))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1), "{output:?}");
}

#[test]
fn extract_dumps_canonical_json() {
    let dir = tempfile::tempdir().unwrap();
    let nb = write_notebook(
        dir.path(),
        "t.ipynb",
        &[(Some(1), "df = load()"), (None, "df.describe()")],
    );
    let fixture = dir.path().join("kernel.json");
    std::fs::write(
        &fixture,
        serde_json::json!({
            "df": {"kind": "frame", "columns": [
                {"name": "age", "dtype": "int64", "values": [21, 34, 45]}
            ]}
        })
        .to_string(),
    )
    .unwrap();
    let output = bin()
        .args(["extract"])
        .arg(&nb)
        .args(["--cell", "1", "--kernel-fixture"])
        .arg(&fixture)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{output:?}");
    let stdout = String::from_utf8_lossy(&output.stdout);
    let doc: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(doc["df"]["kind"], "frame");
    assert_eq!(doc["df"]["shape"], serde_json::json!([3, 1]));
}

fn write_corpus(dir: &Path) -> (PathBuf, PathBuf) {
    let mut manifest = String::new();
    for (case_id, crash, lib, root) in [
        ("alpha_reproduced", true, "sklearn", "api_misuse"),
        ("alpha_fixed", false, "sklearn", "api_misuse"),
        ("beta_reproduced", true, "pandas", "data_confusion"),
        ("beta_fixed", false, "pandas", "data_confusion"),
    ] {
        let nb_name = format!("{case_id}.ipynb");
        write_notebook(
            dir,
            &nb_name,
            &[(Some(1), "data = load()"), (None, &format!("step_{case_id}(data)"))],
        );
        manifest.push_str(
            &serde_json::json!({
                "case_id": case_id,
                "notebook_path": nb_name,
                "target_cell_index": 1,
                "crash_label": crash,
                "library_cause": lib,
                "root_cause": root,
                "diagnosis_truth": "truth",
            })
            .to_string(),
        );
        manifest.push('\n');
    }
    let manifest_path = dir.join("manifest.jsonl");
    std::fs::write(&manifest_path, manifest).unwrap();

    let script = write_mock_script(
        dir,
        &[
            serde_json::json!({"match": "step_alpha_reproduced",
                "response": {"reasoning": "alpha crash", "detection": true}}),
            serde_json::json!({"match": "step_beta_fixed",
                "response": {"reasoning": "spurious", "detection": true}}),
            safe_response(),
        ],
    );
    (manifest_path, script)
}

#[test]
fn evaluate_writes_records_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, script) = write_corpus(dir.path());
    let out = dir.path().join("out");
    let output = bin()
        .args(["evaluate"])
        .arg(&manifest)
        .args(["-c", "+RT", "-c", "-RT", "--provider"])
        .arg(format!("mock:{}", script.display()))
        .args(["--jobs", "2", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{output:?}");

    let records = std::fs::read_to_string(out.join("records.jsonl")).unwrap();
    assert_eq!(records.lines().count(), 8);
    let report = std::fs::read_to_string(out.join("detection_report.txt")).unwrap();
    assert!(report.contains("precision (+RT)"));
    assert!(report.contains("precision (-RT)"));
    assert!(out.join("detection_by_library.txt").exists());
    assert!(out.join("detection_by_root_cause.json").exists());
}

#[test]
fn ablate_emits_four_config_table() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, script) = write_corpus(dir.path());
    let out = dir.path().join("ablate");
    let output = bin()
        .args(["ablate"])
        .arg(&manifest)
        .args(["--provider"])
        .arg(format!("mock:{}", script.display()))
        .args(["--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{output:?}");
    let report = std::fs::read_to_string(out.join("detection_report.txt")).unwrap();
    for config in ["+RT", "+RT-S", "+RT-V", "+RT-R"] {
        assert!(report.contains(&format!("f1 ({config})")), "missing {config}");
    }
}

#[test]
fn sample_plan_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, _) = write_corpus(dir.path());
    let run = |seed: &str| {
        let output = bin()
            .args(["sample"])
            .arg(&manifest)
            .args(["--target", "2", "--seed", seed])
            .output()
            .unwrap();
        assert_eq!(output.status.code(), Some(0), "{output:?}");
        String::from_utf8_lossy(&output.stdout).to_string()
    };
    assert_eq!(run("7"), run("7"));
    let plan: serde_json::Value = serde_json::from_str(run("7").trim()).unwrap();
    assert_eq!(plan["target"], 2);
    assert!(plan["realized_total"].as_u64().unwrap() >= 2);
}

#[test]
fn kappa_reports_pairwise_agreement() {
    let dir = tempfile::tempdir().unwrap();
    let judgments = dir.path().join("judgments.jsonl");
    let mut lines = String::new();
    for (case, judge, verdict) in [
        ("a", "j1", "correct"),
        ("b", "j1", "correct"),
        ("c", "j1", "reasoning_wrong"),
        ("d", "j1", "reasoning_wrong"),
        ("a", "j2", "correct"),
        ("b", "j2", "reasoning_wrong"),
        ("c", "j2", "reasoning_wrong"),
        ("d", "j2", "reasoning_wrong"),
    ] {
        lines.push_str(
            &serde_json::json!({"case_id": case, "judge_id": judge, "verdict": verdict})
                .to_string(),
        );
        lines.push('\n');
    }
    std::fs::write(&judgments, lines).unwrap();
    let output = bin().args(["kappa"]).arg(&judgments).output().unwrap();
    assert_eq!(output.status.code(), Some(0), "{output:?}");
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("j1 vs j2: kappa = 0.5000 over 4 shared case(s)"));
}
