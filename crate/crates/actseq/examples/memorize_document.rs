//! Overfit a tiny model on a handful of documents and decode them back
//! exactly, showing the loss trace along the way.
//!
//! Run with: `cargo run --release --example memorize_document`

use actseq::codec::linearize;
use actseq::corpus::{generate_synthetic, SyntheticSpec};
use actseq::decoder::{predict_structure, DecodeOptions};
use actseq::model::{fit, sequence_log_likelihood, Alphabet, ScorerConfig, ScorerModel};
use actseq::schema::TaskSchema;

fn main() {
    let schema = TaskSchema::ner(vec!["T0".into(), "T1".into()]).unwrap();
    let spec = SyntheticSpec {
        seed: 5,
        documents: 3,
        ..SyntheticSpec::default()
    };
    let docs = generate_synthetic(&spec, &schema).unwrap();
    let pairs: Vec<_> = docs
        .iter()
        .map(|d| {
            (
                d.doc.clone(),
                linearize(&d.structure, &d.doc, &schema).unwrap().0,
            )
        })
        .collect();

    let alphabet = Alphabet::build(pairs.iter().map(|(d, _)| d));
    let config = ScorerConfig {
        learning_rate: 2e-3,
        epochs: 200,
        batch_size: 4,
        seed: 0,
        ..ScorerConfig::tiny()
    };
    let mut model = ScorerModel::init(config, schema.clone(), alphabet).unwrap();
    let report = fit(&mut model, &pairs, true).unwrap();

    for (epoch, loss) in report.epoch_losses.iter().enumerate() {
        if epoch % 40 == 0 || epoch + 1 == report.epoch_losses.len() {
            println!("epoch {:>4}: mean step loss {loss:.5}", epoch + 1);
        }
    }

    let mut exact = 0usize;
    for d in &docs {
        let predicted = predict_structure(&model, &d.doc, &DecodeOptions::default()).unwrap();
        if predicted == d.structure {
            exact += 1;
        }
        let (doc, gold) = (
            &d.doc,
            &pairs
                .iter()
                .find(|(x, _)| x.doc_id == d.doc.doc_id)
                .unwrap()
                .1,
        );
        let ll = sequence_log_likelihood(&model, doc, gold, true).unwrap();
        println!(
            "{}: log-likelihood {ll:.4} over {} actions",
            d.doc.doc_id,
            gold.triples.len()
        );
    }
    println!(
        "greedy decode reproduces {exact}/{} gold structures",
        docs.len()
    );
}
