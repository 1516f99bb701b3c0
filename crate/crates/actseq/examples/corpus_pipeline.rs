//! Corpus tooling: JSON-lines write/read round trip, BIO column decoding,
//! and sentence-respecting chunking.
//!
//! Run with: `cargo run --example corpus_pipeline`

use std::fs;

use actseq::corpus::{
    chunk_document, generate_synthetic, read_conll_columns, read_jsonl, write_jsonl, SyntheticSpec,
};
use actseq::schema::TaskSchema;

fn main() {
    let dir = std::env::temp_dir().join("actseq-corpus-pipeline");
    fs::create_dir_all(&dir).unwrap();

    // JSON lines round trip.
    let schema = TaskSchema::ere(
        vec!["T0".into(), "T1".into()],
        vec!["r0".into(), "r1".into()],
    )
    .unwrap();
    let spec = SyntheticSpec {
        seed: 2,
        documents: 25,
        ..SyntheticSpec::default()
    };
    let docs = generate_synthetic(&spec, &schema).unwrap();
    let path = dir.join("ere.jsonl");
    write_jsonl(&path, &docs, &schema).unwrap();
    let back = read_jsonl(&path, &schema).unwrap();
    assert_eq!(back, docs);
    println!(
        "jsonl: wrote and re-read {} documents ({})",
        docs.len(),
        path.display()
    );

    // BIO column decoding with a repair.
    let conll = dir.join("sample.conll");
    fs::write(
        &conll,
        "-DOCSTART- O\n\nU.N. B-ORG\nofficial O\nEkeus B-PER\n\nhe O\nSmith I-PER\n",
    )
    .unwrap();
    let ner = TaskSchema::ner(vec!["ORG".into(), "PER".into()]).unwrap();
    let (docs, repairs) = read_conll_columns(&conll, &ner).unwrap();
    println!(
        "bio: {} document(s), {} mention(s), {} repaired transition(s)",
        docs.len(),
        docs.iter()
            .map(|d| match &d.structure {
                actseq::document::TaskStructure::Ner { mentions } => mentions.len(),
                _ => 0,
            })
            .sum::<usize>(),
        repairs.len()
    );
    for r in &repairs {
        println!("     line {}: {}", r.line, r.message);
    }

    // Chunking splits on sentence boundaries and re-bases annotations.
    let coref = TaskSchema::coref();
    let spec = SyntheticSpec {
        seed: 8,
        documents: 1,
        doc_len_range: (60, 60),
        sentences_range: (6, 6),
        chains_per_doc: (3, 3),
        chain_length_range: (3, 4),
        ..SyntheticSpec::default()
    };
    let long = &generate_synthetic(&spec, &coref).unwrap()[0];
    let max_sentence = long
        .doc
        .sentence_bounds
        .iter()
        .map(|(s, e)| e - s)
        .max()
        .unwrap();
    let (chunks, warnings) = chunk_document(long, max_sentence.max(25)).unwrap();
    println!(
        "chunking: {} tokens -> {} chunks of {:?} tokens, {} warning(s)",
        long.doc.len(),
        chunks.len(),
        chunks.iter().map(|c| c.doc.len()).collect::<Vec<_>>(),
        warnings.len()
    );
}
