//! End-to-end checks of the `triage` binary and the HTTP predict service.

use std::io::{Read, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::Command;

use triage_core::classic::ModelKindName;
use triage_core::cli::{cmd_predict, cmd_synth, cmd_train, TrainOptions};
use triage_core::corpus::CorpusFormat;
use triage_core::model_file::load_pipeline;
use triage_core::serve::Server;

fn triage_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_triage"))
}

fn make_corpus(dir: &Path, n: usize) -> std::path::PathBuf {
    let path = dir.join("corpus.jsonl");
    cmd_synth(n, 7, [0.15, 0.2, 0.3, 0.35], &path).unwrap();
    path
}

fn make_model(dir: &Path, kind: ModelKindName) -> std::path::PathBuf {
    let corpus = make_corpus(dir, 160);
    let model_path = dir.join("model.tria");
    cmd_train(
        &corpus,
        CorpusFormat::Jsonl,
        kind,
        &TrainOptions::with_seed(11),
        &model_path,
    )
    .unwrap();
    model_path
}

// --- CLI ---------------------------------------------------------------------

#[test]
fn synth_cli_writes_reference_sized_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("corpus.jsonl");
    let output = triage_bin()
        .args(["synth", "--n", "1134", "--seed", "7", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let lines = std::fs::read_to_string(&out).unwrap().lines().count();
    assert_eq!(lines, 1134);
}

#[test]
fn synth_cli_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    for out in [&a, &b] {
        let status = triage_bin()
            .args(["synth", "--n", "120", "--seed", "3", "--out"])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn synth_cli_rejects_bad_weights() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.jsonl");
    let output = triage_bin()
        .args([
            "synth",
            "--n",
            "50",
            "--seed",
            "1",
            "--weights",
            "0.5,0.5,0.5,0.5",
            "--out",
        ])
        .arg(&out)
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("sum to 1"), "stderr: {stderr}");
}

#[test]
fn seed_is_required_but_env_fallback_works() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.jsonl");
    let output = triage_bin()
        .args(["synth", "--n", "50", "--out"])
        .arg(&out)
        .env_remove("TRIAGE_SEED")
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("seed"));

    let output = triage_bin()
        .args(["synth", "--n", "50", "--out"])
        .arg(&out)
        .env("TRIAGE_SEED", "9")
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
}

#[test]
fn train_cli_unknown_model_lists_valid_names() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = make_corpus(dir.path(), 80);
    let output = triage_bin()
        .args(["train", "--model", "perceptron", "--seed", "1", "--corpus"])
        .arg(&corpus)
        .arg("--out")
        .arg(dir.path().join("m.tria"))
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("valid names"), "stderr: {stderr}");
    assert!(stderr.contains("cnn_lstm"));
}

#[test]
fn predict_cli_agrees_with_library_and_sums_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let model = make_model(dir.path(), ModelKindName::Logreg);
    let text = "There is a large malignant lesion with aggressive destruction of the cortex.";
    let output = triage_bin()
        .args(["predict", "--text", text, "--model"])
        .arg(&model)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let parsed: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    let lib = cmd_predict(&model, text).unwrap();
    assert_eq!(parsed["label"].as_u64().unwrap() as u8, lib.label);
    let scores = parsed["scores"].as_object().unwrap();
    let sum: f64 = scores.values().map(|v| v.as_f64().unwrap()).sum();
    assert!((sum - 1.0).abs() < 1e-12);
}

#[test]
fn predict_benign_planning_text_is_non_emergency() {
    let dir = tempfile::tempdir().unwrap();
    let model = make_model(dir.path(), ModelKindName::Mnb);
    // A normal measurement-only report must land in the merged
    // non-emergency class (label 2).
    let text = "Thanks for your consult; CBCT of the mandible was performed for the patient \
                based on your request. Measurements for implant placement were done for the \
                patient and are presented on the CBCT sheets. The overall appearance is \
                unremarkable with a normal trabecular pattern throughout the region.";
    let prediction = cmd_predict(&model, text).unwrap();
    assert_eq!(prediction.label, 2, "scores: {:?}", prediction.scores);

    let severe = "There is a large malignant lesion with aggressive destruction of the cortex. \
                  The appearance is highly suspicious and requires urgent attention.";
    let prediction = cmd_predict(&model, severe).unwrap();
    assert_eq!(prediction.label, 1, "scores: {:?}", prediction.scores);
}

#[test]
fn evaluate_cli_writes_reports_with_expected_columns() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = make_corpus(dir.path(), 90);
    let out_dir = dir.path().join("reports");
    let output = triage_bin()
        .args([
            "evaluate",
            "--models",
            "mnb,dtree",
            "--k",
            "3",
            "--max-len",
            "64",
            "--seed",
            "5",
            "--paper-mode",
        ])
        .arg("--corpus")
        .arg(&corpus)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );

    let text = std::fs::read_to_string(out_dir.join("report.txt")).unwrap();
    assert!(text.contains("Accuracy"));
    assert!(text.contains("Precision"));
    assert!(text.contains("Recall"));
    assert!(text.contains("F-measure"));
    assert!(text.contains("ROC-AUC"));

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap())
            .unwrap();
    assert_eq!(json["config"]["paper_mode"], serde_json::Value::Bool(true));
    assert_eq!(json["cells"].as_array().unwrap().len(), 4);
    // Two-class cells carry ROC-AUC; four-class cells do not.
    for cell in json["cells"].as_array().unwrap() {
        let is_two = cell["scheme"] == "two_class";
        for row in cell["rows"].as_array().unwrap() {
            assert_eq!(row["mean"]["roc_auc"].is_null(), !is_two);
        }
    }
}

#[test]
fn compare_cli_emits_expected_header() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = make_corpus(dir.path(), 120);
    let out_dir = dir.path().join("reports");
    let output = triage_bin()
        .args([
            "compare",
            "--models",
            "mnb,logreg,dtree,rforest",
            "--schemes",
            "two_class",
            "--modes",
            "balanced",
            "--k",
            "3",
            "--max-len",
            "64",
            "--seed",
            "5",
        ])
        .arg("--corpus")
        .arg(&corpus)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let text = std::fs::read_to_string(out_dir.join("comparison.txt")).unwrap();
    assert!(
        text.contains("Pair | Difference | SE | Critical mean | p-value"),
        "comparison text:\n{text}"
    );
    // 4 models -> 6 pairs.
    assert_eq!(text.lines().filter(|l| l.contains(" | ")).count(), 7);
}

// --- HTTP --------------------------------------------------------------------

fn http_request(addr: std::net::SocketAddr, raw: &str) -> (u16, String) {
    let mut stream = TcpStream::connect(addr).unwrap();
    stream.write_all(raw.as_bytes()).unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).unwrap();
    let status: u16 = response
        .split_whitespace()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    let body = response
        .split_once("\r\n\r\n")
        .map(|(_, b)| b.to_string())
        .unwrap_or_default();
    (status, body)
}

fn post_predict(addr: std::net::SocketAddr, body: &str) -> (u16, String) {
    http_request(
        addr,
        &format!(
            "POST /v1/predict HTTP/1.1\r\nHost: localhost\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{body}",
            body.len()
        ),
    )
}

#[test]
fn serve_health_predict_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let model_path = make_model(dir.path(), ModelKindName::Mnb);
    let pipeline = load_pipeline(&model_path).unwrap();
    let addr = Server::bind(pipeline, "127.0.0.1:0")
        .unwrap()
        .run_background();

    // Health.
    let (status, body) = http_request(addr, "GET /v1/health HTTP/1.1\r\nHost: x\r\n\r\n");
    assert_eq!(status, 200);
    assert_eq!(body, "ok");

    // Prediction agrees with the CLI path on the same model and text.
    let text = "No malignant lesion is seen. Bone quality is adequate for implant planning.";
    let request = serde_json::json!({ "text": text }).to_string();
    let (status, body) = post_predict(addr, &request);
    assert_eq!(status, 200, "body: {body}");
    let served: serde_json::Value = serde_json::from_str(&body).unwrap();
    let cli = cmd_predict(&model_path, text).unwrap();
    assert_eq!(served["label"].as_u64().unwrap() as u8, cli.label);
    assert_eq!(served["scheme"].as_str().unwrap(), cli.scheme.to_string());
    for (label, score) in &cli.scores {
        let got = served["scores"][label].as_f64().unwrap();
        assert_eq!(got.to_bits(), score.to_bits(), "score mismatch for {label}");
    }

    // Malformed JSON.
    let (status, body) = post_predict(addr, "{not json");
    assert_eq!(status, 400, "body: {body}");

    // Missing and empty text.
    let (status, _) = post_predict(addr, r#"{"other": 1}"#);
    assert_eq!(status, 400);
    let (status, _) = post_predict(addr, r#"{"text": "   "}"#);
    assert_eq!(status, 400);

    // Oversized body.
    let (status, _) = http_request(
        addr,
        &format!(
            "POST /v1/predict HTTP/1.1\r\nHost: x\r\nContent-Length: {}\r\n\r\n",
            2 * 1024 * 1024
        ),
    );
    assert_eq!(status, 413);

    // Unknown route.
    let (status, _) = http_request(addr, "GET /nope HTTP/1.1\r\nHost: x\r\n\r\n");
    assert_eq!(status, 404);
}

#[test]
fn cnn_model_roundtrips_through_cli() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = make_corpus(dir.path(), 100);
    let model_path = dir.path().join("cnn.tria");
    let output = triage_bin()
        .args([
            "train",
            "--model",
            "cnn_lstm",
            "--max-len",
            "48",
            "--epochs",
            "10",
            "--seed",
            "3",
        ])
        .arg("--corpus")
        .arg(&corpus)
        .arg("--out")
        .arg(&model_path)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("final loss"), "stdout: {stdout}");

    // The stored loss history follows the default 10-epoch protocol.
    let pipeline = load_pipeline(&model_path).unwrap();
    match &pipeline.model {
        triage_core::model_file::PipelineModel::Neural(m) => {
            assert_eq!(m.meta.loss_history.len(), 10);
            // Learning happened on the synthetic corpus.
            assert!(
                m.meta.loss_history[0] > *m.meta.loss_history.last().unwrap(),
                "loss history: {:?}",
                m.meta.loss_history
            );
        }
        _ => panic!("expected a neural pipeline"),
    }
    let prediction = cmd_predict(
        &model_path,
        "There is extensive invasion of the surrounding soft tissue.",
    )
    .unwrap();
    let sum: f64 = prediction.scores.values().sum();
    assert!((sum - 1.0).abs() < 1e-12);
}
