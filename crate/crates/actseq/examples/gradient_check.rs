//! Validate the analytic gradients of the sequence loss against central
//! finite differences on a tiny high-precision model.
//!
//! Run with: `cargo run --example gradient_check`

use actseq::codec::linearize;
use actseq::document::{CorefPartition, Document, Span, TaskStructure};
use actseq::model::{gradient_check, Alphabet, ScorerConfig, ScorerModel};
use actseq::schema::TaskSchema;

fn main() {
    let doc = Document::new(
        "demo",
        vec!["a".into(), "b".into(), "c".into(), "a".into(), "e".into()],
        vec![(0, 3), (3, 5)],
    )
    .unwrap();
    let schema = TaskSchema::coref();
    let structure = TaskStructure::Coref {
        partition: CorefPartition::new(vec![
            [Span::new(0, 0), Span::new(3, 3)].into(),
            [Span::new(1, 2), Span::new(4, 4)].into(),
        ]),
    };
    let (gold, _) = linearize(&structure, &doc, &schema).unwrap();

    let alphabet = Alphabet::build([&doc]);
    let model = ScorerModel::init(ScorerConfig::tiny(), schema, alphabet).unwrap();
    println!("checking a {}-parameter model", model.param_count());

    let report = gradient_check(&model, &doc, &gold, false, 200, 1e-4, 13).unwrap();
    println!(
        "sampled {} of {} parameters; max relative error {:.3e} (tolerance {:.0e})",
        report.parameters_checked,
        report.parameters_total,
        report.max_relative_error,
        report.tolerance
    );
    println!(
        "worst entry: {}[{}] -> {}",
        report.worst_tensor,
        report.worst_index,
        if report.pass { "PASS" } else { "FAIL" }
    );
}
