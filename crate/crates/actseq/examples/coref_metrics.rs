//! Coreference scoring walkthrough: MUC, B³ and CEAF_φ4 with their CoNLL
//! average on hand-checkable partition pairs.
//!
//! Run with: `cargo run --example coref_metrics`

use std::collections::BTreeSet;

use actseq::document::Span;
use actseq::metrics::coref_scores;

fn chain(ids: &[usize]) -> BTreeSet<Span> {
    ids.iter().map(|&i| Span::new(i, i)).collect()
}

fn show(name: &str, gold: &[BTreeSet<Span>], pred: &[BTreeSet<Span>]) {
    let s = coref_scores(gold, pred).unwrap();
    println!("{name}");
    println!(
        "  MUC       P {:.3}  R {:.3}  F1 {:.3}",
        s.muc.precision, s.muc.recall, s.muc.f1
    );
    println!(
        "  B³        P {:.3}  R {:.3}  F1 {:.3}",
        s.b3.precision, s.b3.recall, s.b3.f1
    );
    println!(
        "  CEAF_φ4   P {:.3}  R {:.3}  F1 {:.3}",
        s.ceaf_phi4.precision, s.ceaf_phi4.recall, s.ceaf_phi4.f1
    );
    println!("  avg F1    {:.3}\n", s.avg_f1);
}

fn main() {
    let gold = vec![chain(&[0, 1, 2])];

    show("perfect match: {{a,b,c}} vs itself", &gold, &gold.clone());

    // The classic partial case: prediction splits the chain and leaves c
    // alone. MUC counts links, so recall drops to 1/2; with the singleton
    // retained, B³ recall is 5/9.
    show(
        "split chain: gold {{a,b,c}} vs pred {{a,b},{c}}",
        &gold,
        &vec![chain(&[0, 1]), chain(&[2])],
    );

    // Over-merging: everything in one chain.
    let gold2 = vec![chain(&[0, 1, 2]), chain(&[4, 5])];
    show(
        "over-merge: gold {{a,b,c},{e,f}} vs pred {{a,b,c,e,f}}",
        &gold2,
        &vec![chain(&[0, 1, 2, 4, 5])],
    );

    // A case where the optimal CEAF alignment matters: two predicted chains
    // both overlap the single gold chain; the alignment may use only one.
    show(
        "alignment: gold {{a,b,c,e}} vs pred {{a,b},{c,e}}",
        &vec![chain(&[0, 1, 2, 3])],
        &vec![chain(&[0, 1]), chain(&[2, 3])],
    );
}
