//! Constraint safety: greedy decoding with untrained random-weight models
//! still produces well-formed output, because the candidate set only ever
//! offers legal continuations.
//!
//! Run with: `cargo run --release --example constrained_decoding`

use actseq::codec::{delinearize, render_sequence};
use actseq::corpus::{generate_synthetic, SyntheticSpec};
use actseq::decoder::{greedy_decode, DecodeOptions};
use actseq::document::validate_structure;
use actseq::model::{Alphabet, ScorerConfig, ScorerModel};
use actseq::schema::TaskSchema;

fn main() {
    let schemas = vec![
        TaskSchema::ner(vec!["T0".into(), "T1".into()]).unwrap(),
        TaskSchema::ere(vec!["T0".into(), "T1".into()], vec!["r0".into()]).unwrap(),
        TaskSchema::coref(),
    ];

    for schema in &schemas {
        let spec = SyntheticSpec {
            seed: 21,
            documents: 30,
            doc_len_range: (6, 12),
            ..SyntheticSpec::default()
        };
        let docs = generate_synthetic(&spec, schema).unwrap();
        let alphabet = Alphabet::build(docs.iter().map(|d| &d.doc));

        let mut decoded = 0usize;
        let mut terminal = 0usize;
        for seed in 0..5u64 {
            let config = ScorerConfig {
                seed,
                ..ScorerConfig::tiny()
            };
            let model = ScorerModel::init(config, schema.clone(), alphabet.clone()).unwrap();
            let options = DecodeOptions::for_task(schema.kind);
            for d in &docs {
                let out = greedy_decode(&model, &d.doc, &options).unwrap();
                let structure =
                    delinearize(&out.sequence, &d.doc, schema).expect("decodes always delinearize");
                assert!(validate_structure(&structure, &d.doc, schema).is_empty());
                if out.terminal {
                    assert_eq!(out.sequence.copy_count(), d.doc.len() + 1);
                    terminal += 1;
                }
                decoded += 1;
            }
        }
        println!(
            "{:>5}: {decoded} random-weight decodes, all well-formed ({terminal} terminal)",
            schema.kind.as_str()
        );

        // Show what an untrained model babbles.
        let model = ScorerModel::init(
            ScorerConfig {
                seed: 99,
                ..ScorerConfig::tiny()
            },
            schema.clone(),
            alphabet,
        )
        .unwrap();
        let out =
            greedy_decode(&model, &docs[0].doc, &DecodeOptions::for_task(schema.kind)).unwrap();
        println!(
            "       sample: {}",
            render_sequence(&out.sequence, &docs[0].doc)
        );
    }
}
