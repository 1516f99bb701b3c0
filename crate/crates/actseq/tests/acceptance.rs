//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (visible with `cargo test --test acceptance -- --nocapture`).
//!
//! Oracles here are deliberately independent re-derivations of the
//! definitions (set intersections, link counting, exhaustive alignment,
//! finite differences), not calls into the code paths they check.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use actseq::codec::{
    candidate_actions, delinearize, linearize, ActionSequence, ActionTriple, PrefixState,
    StructureAction,
};
use actseq::corpus::{generate_synthetic, SyntheticSpec};
use actseq::decoder::{
    greedy_decode, predict_structure, sequence_length_within_bound, DecodeOptions,
};
use actseq::document::{
    validate_structure, Document, RelationTriple, Span, TaskStructure, TypedMention,
};
use actseq::metrics::{coref_scores, entity_prf, mention_analysis, relation_prf};
use actseq::model::{
    fit, gradient_check, plan_gold_sequence, step_distribution, Alphabet, ScorerConfig,
    ScorerModel, Session,
};
use actseq::schema::{EreLink, LabelAction, TaskKind, TaskSchema};

fn report(id: u32, name: &str, pass: bool, details: &str) {
    println!(
        "ACCEPTANCE {id:02} {name}: {} — {details}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {id} ({name}) failed: {details}");
}

fn task_schemas() -> Vec<TaskSchema> {
    vec![
        TaskSchema::ner(vec!["T0".into(), "T1".into(), "T2".into(), "T3".into()]).unwrap(),
        TaskSchema::ere(
            vec!["T0".into(), "T1".into()],
            vec!["r0".into(), "r1".into()],
        )
        .unwrap(),
        TaskSchema::coref(),
    ]
}

// ---------------------------------------------------------------------------
// 1. Codec round trip at scale.
// ---------------------------------------------------------------------------

// Independent reduction oracle for multi-link tails: order mentions by
// close order (end ascending, start descending, type ascending); each tail
// keeps the relation from the latest-closing earlier head, lowest relation
// index on ties; relations whose head does not close earlier are dropped.
fn expected_ere_reduction(s: &TaskStructure) -> TaskStructure {
    let TaskStructure::Ere {
        mentions,
        relations,
    } = s
    else {
        panic!("reduction oracle is for ERE")
    };
    let mut order: Vec<&TypedMention> = mentions.iter().collect();
    order.sort_by_key(|m| (m.span.end, std::cmp::Reverse(m.span.start), m.entity_type));
    let pos = |m: &TypedMention| order.iter().position(|x| *x == m).unwrap();
    let mut best: BTreeMap<usize, (usize, usize)> = BTreeMap::new(); // tail -> (head, rel)
    for r in relations {
        let h = pos(&r.head);
        let t = pos(&r.tail);
        if h >= t {
            continue;
        }
        match best.get(&t) {
            Some(&(kept_h, kept_r)) if kept_h > h || (kept_h == h && kept_r <= r.relation) => {}
            _ => {
                best.insert(t, (h, r.relation));
            }
        }
    }
    let relations = best
        .into_iter()
        .map(|(t, (h, rel))| RelationTriple {
            head: order[h].clone(),
            relation: rel,
            tail: order[t].clone(),
        })
        .collect();
    TaskStructure::Ere {
        mentions: mentions.clone(),
        relations,
    }
}

#[test]
fn acceptance_01_codec_round_trip() {
    let start = Instant::now();
    let mut total = 0usize;
    let mut failures = 0usize;
    let mut reduced = 0usize;
    for schema in task_schemas() {
        let spec = SyntheticSpec {
            seed: 1001,
            documents: 1000,
            nesting_probability: 0.2,
            ..SyntheticSpec::default()
        };
        let docs = generate_synthetic(&spec, &schema).unwrap();
        assert_eq!(docs.len(), 1000);
        for d in &docs {
            let (seq, warnings) = linearize(&d.structure, &d.doc, &schema).unwrap();
            let back = delinearize(&seq, &d.doc, &schema).unwrap();
            let expected = if warnings.is_empty() {
                d.structure.clone()
            } else {
                reduced += 1;
                expected_ere_reduction(&d.structure)
            };
            if back != expected {
                failures += 1;
            }
            total += 1;
        }
    }
    let elapsed = start.elapsed();
    report(
        1,
        "codec round trip",
        failures == 0 && elapsed.as_secs() < 60,
        &format!(
            "{total} documents over 3 tasks, {failures} failures, {reduced} multi-link reductions, {:.2}s",
            elapsed.as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// 2. Constraint safety under random-weight scorers.
// ---------------------------------------------------------------------------

// Independent well-formedness check on the bracket string after removing
// unpaired left-bracket units: a prefix never closes more than it opened.
fn dyck_valid_after_removal(seq: &ActionSequence) -> bool {
    let mut paired: BTreeMap<usize, i64> = BTreeMap::new();
    for t in &seq.triples {
        if let (StructureAction::RightBracket, Some(b)) = (t.action, t.pairing) {
            *paired.entry(b).or_insert(0) += 1;
        }
    }
    let mut depth = 0i64;
    for (i, t) in seq.triples.iter().enumerate() {
        match t.action {
            StructureAction::LeftBracketGroup(_) => {
                depth += paired.get(&i).copied().unwrap_or(0);
            }
            StructureAction::RightBracket => {
                depth -= 1;
                if depth < 0 {
                    return false;
                }
            }
            StructureAction::Copy => {}
        }
    }
    depth == 0
}

#[test]
fn acceptance_02_constraint_safety() {
    let start = Instant::now();
    let mut decodes = 0usize;
    let mut terminal = 0usize;
    for schema in task_schemas() {
        let spec = SyntheticSpec {
            seed: 2002,
            documents: 100,
            doc_len_range: (5, 12),
            ..SyntheticSpec::default()
        };
        let docs = generate_synthetic(&spec, &schema).unwrap();
        let alphabet = Alphabet::build(docs.iter().map(|d| &d.doc));
        let options = DecodeOptions::for_task(schema.kind);
        for seed in 0..5u64 {
            let config = ScorerConfig {
                seed: 7_000 + seed,
                ..ScorerConfig::tiny()
            };
            let model = ScorerModel::init(config, schema.clone(), alphabet.clone()).unwrap();
            for d in &docs {
                let out = greedy_decode(&model, &d.doc, &options).unwrap();
                // Any malformed pairing or label would surface here.
                let structure = delinearize(&out.sequence, &d.doc, &schema).unwrap();
                assert!(validate_structure(&structure, &d.doc, &schema).is_empty());
                assert!(dyck_valid_after_removal(&out.sequence));
                assert!(sequence_length_within_bound(&out.sequence, &d.doc));
                if out.terminal {
                    assert_eq!(out.sequence.copy_count(), d.doc.len() + 1);
                    terminal += 1;
                }
                decodes += 1;
            }
        }
    }
    report(
        2,
        "constraint safety",
        decodes == 1500,
        &format!(
            "{decodes} random-weight decodes (500 per task), all well-formed, {terminal} terminal, {:.2}s",
            start.elapsed().as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// 3. Dynamic candidate-set cardinality against a brute-force enumerator.
// ---------------------------------------------------------------------------

// Independent enumerator: re-derives cursor, per-group consumption and
// prior right brackets from the raw triples, then spells out the candidate
// set from the definitional rules (copy; one left unit; one right per
// in-scope group and labeling choice, no-link first, antecedents ascending,
// labels in schema order).
fn oracle_candidates(
    history: &[ActionTriple],
    doc: &Document,
    schema: &TaskSchema,
    prune: bool,
) -> Vec<ActionTriple> {
    let mut cursor = 0usize;
    let mut groups: Vec<(usize, usize, usize, usize)> = Vec::new(); // (triple, token, units, consumed)
    let mut rights: Vec<usize> = Vec::new();
    for (i, t) in history.iter().enumerate() {
        match t.action {
            StructureAction::Copy => cursor += 1,
            StructureAction::LeftBracketGroup(k) => groups.push((i, cursor, k, 0)),
            StructureAction::RightBracket => {
                let b = t.pairing.unwrap();
                groups.iter_mut().find(|g| g.0 == b).unwrap().3 += 1;
                rights.push(i);
            }
        }
    }

    let mut labels: Vec<LabelAction> = Vec::new();
    match schema.kind {
        TaskKind::Ner => {
            for ty in 0..schema.entity_types.len() {
                labels.push(LabelAction::Entity { entity_type: ty });
            }
        }
        TaskKind::Ere => {
            for ty in 0..schema.entity_types.len() {
                labels.push(LabelAction::EreLabel {
                    entity_type: ty,
                    link: None,
                });
            }
            for &m in &rights {
                for ty in 0..schema.entity_types.len() {
                    for rel in 0..schema.relation_types.len() {
                        labels.push(LabelAction::EreLabel {
                            entity_type: ty,
                            link: Some(EreLink {
                                antecedent: m,
                                relation: rel,
                            }),
                        });
                    }
                }
            }
        }
        TaskKind::Coref => {
            labels.push(LabelAction::CorefAntecedent { antecedent: None });
            for &m in &rights {
                labels.push(LabelAction::CorefAntecedent {
                    antecedent: Some(m),
                });
            }
        }
    }

    let mut out = vec![ActionTriple::copy(), ActionTriple::left(1)];
    for &(triple, token, units, consumed) in &groups {
        if consumed >= units {
            continue;
        }
        if cursor == 0 || token > cursor - 1 || cursor - 1 >= doc.len() {
            continue;
        }
        if prune && doc.sentence_of(token) != doc.sentence_of(cursor - 1) {
            continue;
        }
        for z in &labels {
            out.push(ActionTriple::right(triple, *z));
        }
    }
    out
}

#[test]
fn acceptance_03_candidate_cardinality() {
    let mut rng = StdRng::seed_from_u64(303);
    let mut checked = 0usize;
    for schema in task_schemas() {
        let spec = SyntheticSpec {
            seed: 3003,
            documents: 40,
            doc_len_range: (5, 10),
            ..SyntheticSpec::default()
        };
        let docs = generate_synthetic(&spec, &schema).unwrap();
        let mut prefixes = 0usize;
        'outer: loop {
            for d in &docs {
                let prune = rng.random_range(0..2) == 0;
                // Random valid rollout; every intermediate prefix is valid.
                let mut state = PrefixState::new(&d.doc, &schema, prune);
                let cut = rng.random_range(0..3 * (d.doc.len() + 1));
                for _ in 0..cut {
                    if state.is_terminal() {
                        break;
                    }
                    let cands = state.candidates().unwrap();
                    let pick = rng.random_range(0..cands.len());
                    state.apply(&cands.actions[pick]).unwrap();
                }
                if state.is_terminal() {
                    continue;
                }
                let history = state.triples().to_vec();
                let expected = oracle_candidates(&history, &d.doc, &schema, prune);
                let got = candidate_actions(&history, &d.doc, &schema, prune).unwrap();
                assert_eq!(
                    got.actions.len(),
                    expected.len(),
                    "cardinality mismatch on {:?} prefix of {} triples",
                    schema.kind,
                    history.len()
                );
                assert_eq!(
                    got.actions, expected,
                    "element mismatch for {:?}",
                    schema.kind
                );
                prefixes += 1;
                checked += 1;
                if prefixes >= 200 {
                    break 'outer;
                }
            }
        }
    }
    report(
        3,
        "candidate cardinality",
        checked >= 600,
        &format!("{checked} prefixes (200 per task) match the brute-force enumeration exactly"),
    );
}

// ---------------------------------------------------------------------------
// 4. Softmax normalization and shift invariance in high precision.
// ---------------------------------------------------------------------------

#[test]
fn acceptance_04_normalization_and_shift_invariance() {
    let mut max_sum_err = 0.0f64;
    let mut max_shift_err = 0.0f64;
    let mut steps = 0usize;
    for schema in task_schemas() {
        let spec = SyntheticSpec {
            seed: 4004,
            documents: 10,
            doc_len_range: (5, 10),
            ..SyntheticSpec::default()
        };
        let docs = generate_synthetic(&spec, &schema).unwrap();
        let alphabet = Alphabet::build(docs.iter().map(|d| &d.doc));
        let model = ScorerModel::init(
            ScorerConfig {
                seed: 44,
                ..ScorerConfig::tiny()
            },
            schema.clone(),
            alphabet,
        )
        .unwrap();
        let params = model.params.to_precision::<f64>();
        for d in &docs {
            let (gold, _) = linearize(&d.structure, &d.doc, &schema).unwrap();
            let plans = plan_gold_sequence(&d.doc, &gold, &schema, false).unwrap();
            let mut session = Session::<f64>::new(
                &params,
                &model.layout,
                &model.config,
                &model.alphabet,
                &d.doc,
            )
            .unwrap();
            for plan in &plans {
                let scores = session.push_and_score(&model.alphabet, &d.doc, plan);
                let probs = step_distribution(&scores).unwrap();
                max_sum_err = max_sum_err.max((probs.iter().sum::<f64>() - 1.0).abs());

                let shifted: Vec<f64> = scores.iter().map(|s| s + 3.7).collect();
                let probs2 = step_distribution(&shifted).unwrap();
                for (a, b) in probs.iter().zip(&probs2) {
                    max_shift_err = max_shift_err.max((a - b).abs());
                }
                let argmax = |v: &[f64]| {
                    v.iter().enumerate().fold(
                        0usize,
                        |best, (i, x)| {
                            if *x > v[best] {
                                i
                            } else {
                                best
                            }
                        },
                    )
                };
                assert_eq!(
                    argmax(&scores),
                    argmax(&shifted),
                    "argmax moved under shift"
                );
                steps += 1;
            }
        }
    }
    report(
        4,
        "normalization and shift invariance",
        max_sum_err < 1e-6 && max_shift_err < 1e-9,
        &format!("{steps} step distributions; max |sum-1| {max_sum_err:.2e}; max shift delta {max_shift_err:.2e}"),
    );
}

// ---------------------------------------------------------------------------
// 5. Gradient check.
// ---------------------------------------------------------------------------

#[test]
fn acceptance_05_gradient_check() {
    let start = Instant::now();
    // ERE exercises every head: entity columns, the no-link column, and the
    // link head; a second check covers the coreference heads.
    let ere = TaskSchema::ere(
        vec!["T0".into(), "T1".into()],
        vec!["r0".into(), "r1".into()],
    )
    .unwrap();
    let spec = SyntheticSpec {
        seed: 5005,
        documents: 8,
        doc_len_range: (8, 12),
        relation_density: 1.0,
        ..SyntheticSpec::default()
    };
    let docs = generate_synthetic(&spec, &ere).unwrap();
    let with_relation = docs
        .iter()
        .find(|d| matches!(&d.structure, TaskStructure::Ere { relations, .. } if !relations.is_empty()))
        .expect("dense spec yields a linked document");
    let (gold, _) = linearize(&with_relation.structure, &with_relation.doc, &ere).unwrap();
    let alphabet = Alphabet::build([&with_relation.doc]);
    let model = ScorerModel::init(ScorerConfig::tiny(), ere, alphabet).unwrap();
    assert!(
        model.param_count() <= 10_000,
        "{} params",
        model.param_count()
    );
    let r1 = gradient_check(&model, &with_relation.doc, &gold, false, 120, 1e-4, 55).unwrap();

    let coref = TaskSchema::coref();
    let spec = SyntheticSpec {
        seed: 5006,
        documents: 5,
        ..SyntheticSpec::default()
    };
    let cdocs = generate_synthetic(&spec, &coref).unwrap();
    let (cgold, _) = linearize(&cdocs[0].structure, &cdocs[0].doc, &coref).unwrap();
    let calpha = Alphabet::build([&cdocs[0].doc]);
    let cmodel = ScorerModel::init(ScorerConfig::tiny(), coref, calpha).unwrap();
    let r2 = gradient_check(&cmodel, &cdocs[0].doc, &cgold, false, 120, 1e-4, 56).unwrap();

    let elapsed = start.elapsed();
    let worst = r1.max_relative_error.max(r2.max_relative_error);
    report(
        5,
        "gradient check",
        r1.pass && r2.pass && r1.parameters_checked >= 100 && elapsed.as_secs() < 300,
        &format!(
            "{} + {} parameters sampled; max relative error {worst:.3e} < 1e-4; {:.1}s",
            r1.parameters_checked,
            r2.parameters_checked,
            elapsed.as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// 6. Metric implementations against definitional oracles.
// ---------------------------------------------------------------------------

fn oracle_muc(gold: &[BTreeSet<Span>], pred: &[BTreeSet<Span>]) -> (f64, f64) {
    // Recall and precision from partition counting, written as nested scans.
    let count = |keys: &[BTreeSet<Span>], resp: &[BTreeSet<Span>]| -> (f64, f64) {
        let mut num = 0.0;
        let mut den = 0.0;
        for k in keys {
            let mut parts = 0usize;
            let mut covered: BTreeSet<Span> = BTreeSet::new();
            for r in resp {
                let inter: Vec<&Span> = k.iter().filter(|m| r.contains(m)).collect();
                if !inter.is_empty() {
                    parts += 1;
                    covered.extend(inter.iter().map(|s| **s));
                }
            }
            parts += k.len() - covered.len(); // unresolved mentions
            num += (k.len() - parts) as f64;
            den += (k.len() - 1) as f64;
        }
        (num, den)
    };
    let (rn, rd) = count(gold, pred);
    let (pn, pd) = count(pred, gold);
    (
        if pd > 0.0 { pn / pd } else { 0.0 },
        if rd > 0.0 { rn / rd } else { 0.0 },
    )
}

fn oracle_b3(gold: &[BTreeSet<Span>], pred: &[BTreeSet<Span>]) -> (f64, f64) {
    let side = |keys: &[BTreeSet<Span>], resp: &[BTreeSet<Span>]| -> f64 {
        let mut acc = 0.0;
        let mut n = 0usize;
        for k in keys {
            for m in k {
                let overlap = resp
                    .iter()
                    .find(|r| r.contains(m))
                    .map(|r| k.iter().filter(|x| r.contains(x)).count())
                    .unwrap_or(0);
                acc += overlap as f64 / k.len() as f64;
                n += 1;
            }
        }
        if n > 0 {
            acc / n as f64
        } else {
            0.0
        }
    };
    (side(pred, gold), side(gold, pred))
}

// Exhaustive CEAF: maximize summed phi4 over every injective alignment.
fn oracle_ceaf_phi4(gold: &[BTreeSet<Span>], pred: &[BTreeSet<Span>]) -> (f64, f64) {
    fn phi4(a: &BTreeSet<Span>, b: &BTreeSet<Span>) -> f64 {
        2.0 * a.intersection(b).count() as f64 / (a.len() + b.len()) as f64
    }
    fn best(
        gold: &[BTreeSet<Span>],
        pred: &[BTreeSet<Span>],
        gi: usize,
        used: &mut Vec<bool>,
    ) -> f64 {
        if gi == gold.len() {
            return 0.0;
        }
        let mut b = best(gold, pred, gi + 1, used); // leave this chain unaligned
        for pi in 0..pred.len() {
            if !used[pi] {
                used[pi] = true;
                let v = phi4(&gold[gi], &pred[pi]) + best(gold, pred, gi + 1, used);
                used[pi] = false;
                if v > b {
                    b = v;
                }
            }
        }
        b
    }
    if gold.is_empty() || pred.is_empty() {
        return (0.0, 0.0);
    }
    let mut used = vec![false; pred.len()];
    let sim = best(gold, pred, 0, &mut used);
    (sim / pred.len() as f64, sim / gold.len() as f64)
}

fn random_partition(
    rng: &mut StdRng,
    mentions: usize,
    allow_singletons: bool,
) -> Vec<BTreeSet<Span>> {
    let mut chains: Vec<BTreeSet<Span>> = Vec::new();
    let n_chains = rng.random_range(1..=mentions.max(1));
    for _ in 0..n_chains {
        chains.push(BTreeSet::new());
    }
    for m in 0..mentions {
        let c = rng.random_range(0..n_chains);
        chains[c].insert(Span::new(m, m));
    }
    chains.retain(|c| !c.is_empty() && (allow_singletons || c.len() >= 2));
    chains
}

#[test]
fn acceptance_06_metric_oracles() {
    let mut rng = StdRng::seed_from_u64(606);
    let mut worst = 0.0f64;
    for case in 0..1000 {
        let mentions = rng.random_range(1..=8usize);
        let gold = random_partition(&mut rng, mentions, case % 3 != 0);
        let pred = random_partition(&mut rng, mentions, case % 2 == 0);
        if gold.is_empty() && pred.is_empty() {
            continue;
        }
        let s = coref_scores(&gold, &pred).unwrap();
        let (mp, mr) = oracle_muc(&gold, &pred);
        let (bp, br) = oracle_b3(&gold, &pred);
        let (cp, cr) = oracle_ceaf_phi4(&gold, &pred);
        for (got, want) in [
            (s.muc.precision, mp),
            (s.muc.recall, mr),
            (s.b3.precision, bp),
            (s.b3.recall, br),
            (s.ceaf_phi4.precision, cp),
            (s.ceaf_phi4.recall, cr),
        ] {
            worst = worst.max((got - want).abs());
            assert!(
                (got - want).abs() < 1e-9,
                "case {case}: {got} vs oracle {want} (gold {gold:?} pred {pred:?})"
            );
        }
        // Range and symmetry.
        for f in [s.muc.f1, s.b3.f1, s.ceaf_phi4.f1, s.avg_f1] {
            assert!((0.0..=1.0).contains(&f));
        }
        let swapped = coref_scores(&pred, &gold).unwrap();
        assert!((s.muc.precision - swapped.muc.recall).abs() < 1e-12);
        assert!((s.b3.recall - swapped.b3.precision).abs() < 1e-12);
    }

    // Worked cases: gold {{a,b,c}} vs pred {{a,b},[{c}]}.
    let gold = vec![[Span::new(0, 0), Span::new(1, 1), Span::new(2, 2)].into()];
    let pred_dropped: Vec<BTreeSet<Span>> = vec![[Span::new(0, 0), Span::new(1, 1)].into()];
    let s = coref_scores(&gold, &pred_dropped).unwrap();
    assert!((s.muc.recall - 0.5).abs() < 1e-12);
    assert!((s.muc.precision - 1.0).abs() < 1e-12);
    let pred_kept: Vec<BTreeSet<Span>> = vec![
        [Span::new(0, 0), Span::new(1, 1)].into(),
        [Span::new(2, 2)].into(),
    ];
    let s = coref_scores(&gold, &pred_kept).unwrap();
    assert!((s.b3.recall - 5.0 / 9.0).abs() < 1e-12);
    assert!((s.b3.precision - 1.0).abs() < 1e-12);
    assert!((s.b3.f1 - 5.0 / 7.0).abs() < 1e-12);

    // Entity and relation scores against plain set-intersection oracles.
    let schema =
        TaskSchema::ere(vec!["A".into(), "B".into()], vec!["r0".into(), "r1".into()]).unwrap();
    let mut cases = 0usize;
    for _ in 0..300 {
        let mk = |rng: &mut StdRng| -> BTreeSet<TypedMention> {
            (0..rng.random_range(0..6usize))
                .map(|_| TypedMention {
                    span: {
                        let s = rng.random_range(0..6usize);
                        Span::new(s, s + rng.random_range(0..2usize))
                    },
                    entity_type: rng.random_range(0..2usize),
                })
                .collect()
        };
        let gold = mk(&mut rng);
        let pred = mk(&mut rng);
        let got = entity_prf(&gold, &pred);
        let tp = gold.iter().filter(|g| pred.iter().any(|p| p == *g)).count();
        let want_p = if pred.is_empty() {
            0.0
        } else {
            tp as f64 / pred.len() as f64
        };
        let want_r = if gold.is_empty() {
            0.0
        } else {
            tp as f64 / gold.len() as f64
        };
        assert_eq!(got.precision, want_p);
        assert_eq!(got.recall, want_r);

        let mk_rel = |rng: &mut StdRng, ms: &BTreeSet<TypedMention>| -> BTreeSet<RelationTriple> {
            let v: Vec<&TypedMention> = ms.iter().collect();
            if v.len() < 2 {
                return BTreeSet::new();
            }
            (0..rng.random_range(0..4usize))
                .filter_map(|_| {
                    let a = rng.random_range(0..v.len());
                    let b = rng.random_range(0..v.len());
                    (a != b).then(|| RelationTriple {
                        head: v[a].clone(),
                        relation: rng.random_range(0..2usize),
                        tail: v[b].clone(),
                    })
                })
                .collect()
        };
        let gr = mk_rel(&mut rng, &gold);
        let pr = mk_rel(&mut rng, &pred);
        for strict in [false, true] {
            let got = relation_prf(&gr, &pr, &schema, strict);
            let tp = gr
                .iter()
                .filter(|g| {
                    pr.iter().any(|p| {
                        let spans = g.head.span == p.head.span && g.tail.span == p.tail.span;
                        let types = g.head.entity_type == p.head.entity_type
                            && g.tail.entity_type == p.tail.entity_type;
                        g.relation == p.relation && spans && (!strict || types)
                    })
                })
                .count();
            let want_p = if pr.is_empty() {
                0.0
            } else {
                tp as f64 / pr.len() as f64
            };
            let want_r = if gr.is_empty() {
                0.0
            } else {
                tp as f64 / gr.len() as f64
            };
            assert_eq!(got.precision, want_p, "strict={strict}");
            assert_eq!(got.recall, want_r, "strict={strict}");
        }
        // Strict never beats loose.
        let loose = relation_prf(&gr, &pr, &schema, false);
        let strict = relation_prf(&gr, &pr, &schema, true);
        assert!(strict.f1 <= loose.f1 + 1e-12);
        cases += 1;
    }
    report(
        6,
        "metric oracle equivalence",
        worst < 1e-9,
        &format!("1000 partition pairs within {worst:.1e}; {cases} entity/relation cases exact; worked examples verified"),
    );
}

// ---------------------------------------------------------------------------
// 7. Memorization of a 50-document corpus.
// ---------------------------------------------------------------------------

// Pilot-fixed settings: small profile, learning rate 1e-3, 80 epochs,
// synthetic corpus seed 7007, model seed 7.
#[test]
fn acceptance_07_memorization() {
    let start = Instant::now();
    let schema = TaskSchema::ner(vec!["T0".into(), "T1".into(), "T2".into(), "T3".into()]).unwrap();
    let spec = SyntheticSpec {
        seed: 7007,
        documents: 50,
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
        learning_rate: 1e-3,
        epochs: 80,
        batch_size: 8,
        seed: 7,
        ..ScorerConfig::small()
    };
    let mut model = ScorerModel::init(config, schema.clone(), alphabet).unwrap();
    let fit_report = fit(&mut model, &pairs, true).unwrap();

    let accuracy = actseq::model::teacher_forced_accuracy(&model, &pairs, true).unwrap();
    let mut exact = 0usize;
    for d in &docs {
        let predicted = predict_structure(&model, &d.doc, &DecodeOptions::default()).unwrap();
        if predicted == d.structure {
            exact += 1;
        }
    }
    let exact_rate = exact as f64 / docs.len() as f64;
    let elapsed = start.elapsed();
    report(
        7,
        "memorization",
        accuracy >= 0.95 && exact_rate >= 0.90 && elapsed.as_secs() < 30 * 60,
        &format!(
            "teacher-forced accuracy {accuracy:.3} (>=0.95), structure exact match {exact_rate:.3} (>=0.90), final loss {:.4}, {:.0}s",
            fit_report.epoch_losses.last().unwrap(),
            elapsed.as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// 8. Generalization above chance on held-out pattern-determined data.
// ---------------------------------------------------------------------------

fn ner_f1(model: &ScorerModel, docs: &[actseq::corpus::AnnotatedDocument]) -> f64 {
    let sets: Vec<_> = docs
        .iter()
        .map(|d| {
            let predicted = predict_structure(model, &d.doc, &DecodeOptions::default()).unwrap();
            let (TaskStructure::Ner { mentions: g }, TaskStructure::Ner { mentions: p }) =
                (&d.structure, &predicted)
            else {
                unreachable!()
            };
            (g.clone(), p.clone())
        })
        .collect();
    actseq::metrics::entity_prf_corpus(&sets).f1
}

#[test]
fn acceptance_08_generalization_above_chance() {
    let start = Instant::now();
    let schema = TaskSchema::ner(vec!["T0".into(), "T1".into(), "T2".into(), "T3".into()]).unwrap();
    let train_spec = SyntheticSpec {
        seed: 8008,
        documents: 120,
        ..SyntheticSpec::default()
    };
    let test_spec = SyntheticSpec {
        seed: 8009,
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
    // The alphabet covers both splits so held-out tokens are in vocabulary;
    // the pattern rule, not memorized documents, must carry the decision.
    let alphabet = Alphabet::build(train.iter().chain(test.iter()).map(|d| &d.doc));
    let config = ScorerConfig {
        learning_rate: 1e-3,
        epochs: 60,
        batch_size: 8,
        seed: 8,
        ..ScorerConfig::small()
    };
    let mut trained = ScorerModel::init(config.clone(), schema.clone(), alphabet.clone()).unwrap();
    fit(&mut trained, &pairs, true).unwrap();
    let trained_f1 = ner_f1(&trained, &test);

    let random = ScorerModel::init(
        ScorerConfig { seed: 81, ..config },
        schema.clone(),
        alphabet,
    )
    .unwrap();
    let random_f1 = ner_f1(&random, &test);

    let elapsed = start.elapsed();
    report(
        8,
        "generalization above chance",
        trained_f1 >= 0.90 && random_f1 <= 0.10 && elapsed.as_secs() < 3600,
        &format!(
            "held-out F1 trained {trained_f1:.3} (>=0.90) vs random weights {random_f1:.3} (<=0.10), {:.0}s",
            elapsed.as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// 9. Determinism of training and decoding.
// ---------------------------------------------------------------------------

#[test]
fn acceptance_09_determinism() {
    let schema = TaskSchema::ner(vec!["T0".into(), "T1".into()]).unwrap();
    let spec = SyntheticSpec {
        seed: 909,
        documents: 8,
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
        learning_rate: 1e-3,
        epochs: 5,
        batch_size: 4,
        seed: 99,
        ..ScorerConfig::tiny()
    };

    let run = || {
        let mut model =
            ScorerModel::init(config.clone(), schema.clone(), alphabet.clone()).unwrap();
        let rep = fit(&mut model, &pairs, true).unwrap();
        let decodes: Vec<_> = docs
            .iter()
            .map(|d| greedy_decode(&model, &d.doc, &DecodeOptions::default()).unwrap())
            .collect();
        (rep.epoch_losses, decodes)
    };
    let (loss_a, dec_a) = run();
    let (loss_b, dec_b) = run();

    // Byte-identical traces, bit-identical losses, identical sequences.
    let csv = |losses: &[f64]| {
        losses
            .iter()
            .enumerate()
            .map(|(i, l)| format!("{},{}\n", i + 1, l))
            .collect::<String>()
    };
    let traces_match = csv(&loss_a) == csv(&loss_b)
        && loss_a
            .iter()
            .zip(&loss_b)
            .all(|(a, b)| a.to_bits() == b.to_bits());
    let decodes_match = dec_a == dec_b;
    report(
        9,
        "determinism",
        traces_match && decodes_match,
        &format!(
            "two runs, {} epochs: loss traces byte-identical {traces_match}, {} decoded sequences identical {decodes_match}",
            loss_a.len(),
            dec_a.len()
        ),
    );
}

// ---------------------------------------------------------------------------
// 10. Mention-budget analysis with gold predictions.
// ---------------------------------------------------------------------------

#[test]
fn acceptance_10_mention_analysis() {
    let schema = TaskSchema::coref();
    let spec = SyntheticSpec {
        seed: 1010,
        documents: 40,
        ..SyntheticSpec::default()
    };
    let docs = generate_synthetic(&spec, &schema).unwrap();
    let mut checked = 0usize;
    for d in &docs {
        let TaskStructure::Coref { partition } = &d.structure else {
            unreachable!()
        };
        let gold_mentions: BTreeSet<Span> = partition.mentions();
        let a = mention_analysis(partition, &gold_mentions, &d.doc).unwrap();
        assert_eq!(a.gold_recall, 1.0);
        assert_eq!(
            a.mention_ratio,
            gold_mentions.len() as f64 / d.doc.len() as f64
        );
        assert_eq!(a.matched, gold_mentions.len());
        checked += 1;
    }
    report(
        10,
        "mention analysis",
        checked == docs.len(),
        &format!("{checked} documents: gold predictions give recall 1.0 and ratio = mentions/|D| exactly"),
    );
}
