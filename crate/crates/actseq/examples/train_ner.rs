//! Train a small scorer on synthetic named-entity data and evaluate on a
//! held-out split.
//!
//! Entity types in the synthetic corpus are determined by a token pattern,
//! so a model that reads the input can solve the task; a random-weight
//! model cannot.
//!
//! Run with: `cargo run --release --example train_ner`

use std::time::Instant;

use actseq::codec::linearize;
use actseq::corpus::{generate_synthetic, SyntheticSpec};
use actseq::decoder::{predict_structure, DecodeOptions};
use actseq::document::TaskStructure;
use actseq::metrics::entity_prf_corpus;
use actseq::model::{fit, teacher_forced_accuracy, Alphabet, ScorerConfig, ScorerModel};
use actseq::schema::TaskSchema;

fn main() {
    let schema = TaskSchema::ner(vec!["T0".into(), "T1".into(), "T2".into(), "T3".into()]).unwrap();

    let train_spec = SyntheticSpec {
        seed: 11,
        documents: 120,
        ..SyntheticSpec::default()
    };
    let test_spec = SyntheticSpec {
        seed: 12,
        documents: 40,
        ..SyntheticSpec::default()
    };
    let train = generate_synthetic(&train_spec, &schema).unwrap();
    let test = generate_synthetic(&test_spec, &schema).unwrap();

    let pairs: Vec<_> = train
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
        learning_rate: 1e-3,
        epochs: 60,
        batch_size: 8,
        seed: 1,
        ..ScorerConfig::small()
    };
    let mut model = ScorerModel::init(config, schema.clone(), alphabet).unwrap();
    println!("model: {} parameters", model.param_count());

    let t0 = Instant::now();
    let report = fit(&mut model, &pairs, true).unwrap();
    println!(
        "trained {} epochs in {:.1}s; loss {:.4} -> {:.4}",
        report.epoch_losses.len(),
        t0.elapsed().as_secs_f64(),
        report.epoch_losses.first().unwrap(),
        report.epoch_losses.last().unwrap()
    );

    let acc = teacher_forced_accuracy(&model, &pairs, true).unwrap();
    println!("teacher-forced action accuracy on train: {:.3}", acc);

    let options = DecodeOptions::default();
    let sets: Vec<_> = test
        .iter()
        .map(|d| {
            let predicted = predict_structure(&model, &d.doc, &options).unwrap();
            let (TaskStructure::Ner { mentions: gold }, TaskStructure::Ner { mentions: pred }) =
                (&d.structure, &predicted)
            else {
                unreachable!()
            };
            (gold.clone(), pred.clone())
        })
        .collect();
    let prf = entity_prf_corpus(&sets);
    println!(
        "held-out entity scores: P {:.3} R {:.3} F1 {:.3}",
        prf.precision, prf.recall, prf.f1
    );
}
