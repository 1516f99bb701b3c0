//! End-to-end checks of the command-line binary over real files.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use actseq::corpus::{generate_synthetic, write_jsonl, SyntheticSpec};
use actseq::schema::TaskSchema;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_actseq")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_schema(dir: &Path, schema: &TaskSchema) -> PathBuf {
    let path = dir.join(format!("{}.schema.json", schema.kind.as_str()));
    fs::write(&path, serde_json::to_string(schema).unwrap()).unwrap();
    path
}

fn p(path: &Path) -> String {
    path.to_string_lossy().into_owned()
}

#[test]
fn encode_then_decode_reproduces_the_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let schema = TaskSchema::ner(vec!["T0".into(), "T1".into()]).unwrap();
    let schema_path = write_schema(dir.path(), &schema);
    let spec = SyntheticSpec {
        seed: 41,
        documents: 25,
        ..SyntheticSpec::default()
    };
    let docs = generate_synthetic(&spec, &schema).unwrap();
    let corpus = dir.path().join("corpus.jsonl");
    write_jsonl(&corpus, &docs, &schema).unwrap();
    let input_bytes = fs::read(&corpus).unwrap();

    let seqs = dir.path().join("seqs.jsonl");
    let out = run(&[
        "encode",
        "--task",
        "ner",
        "--schema",
        &p(&schema_path),
        "--input",
        &p(&corpus),
        "--out",
        &p(&seqs),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let decoded = dir.path().join("decoded.jsonl");
    let out = run(&[
        "decode",
        "--schema",
        &p(&schema_path),
        "--input",
        &p(&seqs),
        "--corpus",
        &p(&corpus),
        "--out",
        &p(&decoded),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let back = actseq::corpus::read_jsonl(&decoded, &schema).unwrap();
    assert_eq!(back.len(), docs.len());
    for (a, b) in back.iter().zip(&docs) {
        assert_eq!(a.doc, b.doc);
        assert_eq!(a.structure, b.structure);
    }
    // Commands never mutate their inputs.
    assert_eq!(fs::read(&corpus).unwrap(), input_bytes);
}

#[test]
fn evaluate_gold_against_itself_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let schema = TaskSchema::ere(vec!["T0".into(), "T1".into()], vec!["r0".into()]).unwrap();
    let schema_path = write_schema(dir.path(), &schema);
    let spec = SyntheticSpec {
        seed: 42,
        documents: 20,
        ..SyntheticSpec::default()
    };
    let docs = generate_synthetic(&spec, &schema).unwrap();
    let corpus = dir.path().join("gold.jsonl");
    write_jsonl(&corpus, &docs, &schema).unwrap();

    let report_path = dir.path().join("metrics.json");
    let out = run(&[
        "evaluate",
        "--schema",
        &p(&schema_path),
        "--gold",
        &p(&corpus),
        "--pred",
        &p(&corpus),
        "--out",
        &p(&report_path),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    for key in ["entity", "relation", "relation_strict"] {
        assert_eq!(report[key]["f1"].as_f64().unwrap(), 1.0, "{key}");
    }
}

#[test]
fn train_twice_with_one_seed_gives_byte_identical_traces() {
    let dir = tempfile::tempdir().unwrap();
    let schema = TaskSchema::ner(vec!["T0".into()]).unwrap();
    let schema_path = write_schema(dir.path(), &schema);
    let spec = SyntheticSpec {
        seed: 43,
        documents: 6,
        doc_len_range: (5, 8),
        ..SyntheticSpec::default()
    };
    let docs = generate_synthetic(&spec, &schema).unwrap();
    let corpus = dir.path().join("train.jsonl");
    write_jsonl(&corpus, &docs, &schema).unwrap();

    // A config file sets the shape; flags override epochs.
    let config_path = dir.path().join("run.json");
    fs::write(
        &config_path,
        serde_json::json!({
            "schema": schema_path,
            "train": corpus,
            "seed": 5,
            "epochs": 99,
            "model_dim": 16,
            "encoder_layers": 1,
            "decoder_layers": 1,
            "feedforward_dim": 16,
            "head_hidden": 16,
            "learning_rate": 1e-3
        })
        .to_string(),
    )
    .unwrap();

    let mut traces = Vec::new();
    for name in ["runA", "runB"] {
        let out_dir = dir.path().join(name);
        let out = run(&[
            "train",
            "--config",
            &p(&config_path),
            "--out",
            &p(&out_dir),
            "--epochs",
            "3",
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(out_dir.join("model.json").exists());
        traces.push(fs::read(out_dir.join("loss_trace.csv")).unwrap());
    }
    assert_eq!(traces[0], traces[1], "loss traces must be byte-identical");
    // The flag override beats the config file: 3 epochs, not 99.
    let text = String::from_utf8(traces[0].clone()).unwrap();
    assert_eq!(text.lines().count(), 4); // header + 3 epochs

    // Predict with the trained model and evaluate.
    let preds = dir.path().join("preds.jsonl");
    let out = run(&[
        "predict",
        "--model",
        &p(&dir.path().join("runA").join("model.json")),
        "--input",
        &p(&corpus),
        "--out",
        &p(&preds),
        "--probs",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let first: serde_json::Value =
        serde_json::from_str(fs::read_to_string(&preds).unwrap().lines().next().unwrap()).unwrap();
    assert!(first["probs"].is_array(), "probability trace requested");

    let out = run(&[
        "evaluate",
        "--schema",
        &p(&schema_path),
        "--gold",
        &p(&corpus),
        "--pred",
        &p(&preds),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn analyze_gold_predictions_report_full_recall() {
    let dir = tempfile::tempdir().unwrap();
    let schema = TaskSchema::coref();
    let schema_path = write_schema(dir.path(), &schema);
    let spec = SyntheticSpec {
        seed: 44,
        documents: 12,
        ..SyntheticSpec::default()
    };
    let docs = generate_synthetic(&spec, &schema).unwrap();
    let corpus = dir.path().join("gold.jsonl");
    write_jsonl(&corpus, &docs, &schema).unwrap();

    let report_path = dir.path().join("analyze.json");
    let out = run(&[
        "analyze",
        "--schema",
        &p(&schema_path),
        "--gold",
        &p(&corpus),
        "--pred",
        &p(&corpus),
        "--out",
        &p(&report_path),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["gold_mention_recall"].as_f64().unwrap(), 1.0);
    let ratio = report["predicted_mentions"].as_f64().unwrap() / report["tokens"].as_f64().unwrap();
    assert_eq!(report["mention_ratio"].as_f64().unwrap(), ratio);
}

#[test]
fn gradcheck_command_passes() {
    let dir = tempfile::tempdir().unwrap();
    let report_path = dir.path().join("gradcheck.json");
    let out = run(&["gradcheck", "--samples", "60", "--out", &p(&report_path)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["pass"].as_bool(), Some(true));
}

#[test]
fn usage_errors_exit_two_with_an_error_record() {
    // Missing required inputs for train.
    let out = run(&["train"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    let record: serde_json::Value = serde_json::from_str(stderr.lines().last().unwrap()).unwrap();
    assert_eq!(record["kind"].as_str(), Some("usage"));

    // Unknown subcommand is a clap parse error, also exit 2.
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let schema = TaskSchema::coref();
    let schema_path = write_schema(dir.path(), &schema);
    // Predict with a model path that does not exist.
    let out = run(&[
        "predict",
        "--model",
        &p(&dir.path().join("missing.json")),
        "--input",
        &p(&schema_path),
        "--out",
        &p(&dir.path().join("x.jsonl")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    let record: serde_json::Value = serde_json::from_str(stderr.lines().last().unwrap()).unwrap();
    assert_eq!(record["kind"].as_str(), Some("runtime"));
}
