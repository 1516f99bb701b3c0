//! Mention-budget analysis: how many mentions a system proposes per input
//! token and what fraction of the gold mentions they cover.
//!
//! Run with: `cargo run --example mention_stats`

use std::collections::BTreeSet;

use actseq::corpus::{generate_synthetic, SyntheticSpec};
use actseq::document::{Span, TaskStructure};
use actseq::metrics::mention_analysis;
use actseq::schema::TaskSchema;

fn main() {
    let schema = TaskSchema::coref();
    let spec = SyntheticSpec {
        seed: 17,
        documents: 50,
        ..SyntheticSpec::default()
    };
    let docs = generate_synthetic(&spec, &schema).unwrap();

    let mut tokens = 0usize;
    let mut predicted = 0usize;
    let mut matched = 0usize;
    let mut gold_total = 0usize;
    for d in &docs {
        let TaskStructure::Coref { partition } = &d.structure else {
            unreachable!()
        };
        // Use the gold mentions as a perfect mention proposer, then a
        // depleted proposer that loses every other mention.
        let gold_mentions: Vec<Span> = partition.mentions().into_iter().collect();
        let half: BTreeSet<Span> = gold_mentions.iter().step_by(2).copied().collect();
        let a = mention_analysis(partition, &half, &d.doc).unwrap();
        tokens += d.doc.len();
        predicted += a.predicted;
        matched += a.matched;
        gold_total += a.gold;
    }

    println!(
        "depleted proposer: ratio {:.4} ({predicted} mentions / {tokens} tokens), recall {:.3}",
        predicted as f64 / tokens as f64,
        matched as f64 / gold_total as f64,
    );

    // A perfect proposer recovers every gold mention, and the ratio equals
    // gold mentions per token.
    let d = &docs[0];
    let TaskStructure::Coref { partition } = &d.structure else {
        unreachable!()
    };
    let all: BTreeSet<Span> = partition.mentions();
    let a = mention_analysis(partition, &all, &d.doc).unwrap();
    println!(
        "perfect proposer on {}: ratio {:.4}, recall {:.3}",
        d.doc.doc_id, a.mention_ratio, a.gold_recall
    );
}
