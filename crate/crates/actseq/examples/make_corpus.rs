//! Write synthetic corpora and schema files to disk, ready for the
//! command-line pipeline.
//!
//! Run with: `cargo run --example make_corpus -- [output-dir]`

use std::fs;
use std::path::PathBuf;

use actseq::corpus::{generate_synthetic, write_jsonl, SyntheticSpec};
use actseq::schema::TaskSchema;

fn main() {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("target/synth"));
    fs::create_dir_all(&dir).unwrap();

    let schemas = vec![
        TaskSchema::ner(vec!["T0".into(), "T1".into(), "T2".into(), "T3".into()]).unwrap(),
        TaskSchema::ere(
            vec!["T0".into(), "T1".into()],
            vec!["r0".into(), "r1".into()],
        )
        .unwrap(),
        TaskSchema::coref(),
    ];
    for schema in &schemas {
        let name = schema.kind.as_str();
        fs::write(
            dir.join(format!("{name}.schema.json")),
            serde_json::to_string_pretty(schema).unwrap(),
        )
        .unwrap();
        for (split, seed, documents) in [("train", 100, 120), ("test", 200, 40)] {
            let spec = SyntheticSpec {
                seed,
                documents,
                ..SyntheticSpec::default()
            };
            let docs = generate_synthetic(&spec, schema).unwrap();
            let path = dir.join(format!("{name}.{split}.jsonl"));
            write_jsonl(&path, &docs, schema).unwrap();
            println!("wrote {} documents -> {}", docs.len(), path.display());
        }
    }
    println!("schemas and corpora are under {}", dir.display());
}
