//! Evaluation: micro precision/recall/F1 for entities and relations, the
//! MUC, B³ and CEAF_φ4 coreference scores with their CoNLL average, and the
//! mention-budget analysis.
//!
//! Conventions follow the CoNLL-2012 scorer: zero denominators yield zero,
//! coreference chains are compared as given (the caller decides whether
//! singletons were dropped upstream), and CEAF uses the exact optimal chain
//! alignment rather than a greedy one.

pub mod assignment;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::document::{CorefPartition, Document, RelationTriple, Span, TypedMention};
use crate::schema::TaskSchema;

use assignment::max_weight_assignment;

/// Micro-averaged precision/recall/F1 plus the quantities they were pooled
/// from. For set-matching metrics `true_positive` is the matched count; for
/// the link- and overlap-based coreference metrics it is the precision
/// numerator, with `predicted` and `gold` the respective denominators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positive: f64,
    pub predicted: f64,
    pub gold: f64,
}

impl Prf {
    pub fn from_fractions(p_num: f64, p_den: f64, r_num: f64, r_den: f64) -> Self {
        let precision = if p_den > 0.0 { p_num / p_den } else { 0.0 };
        let recall = if r_den > 0.0 { r_num / r_den } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Prf {
            precision,
            recall,
            f1,
            true_positive: p_num,
            predicted: p_den,
            gold: r_den,
        }
    }

    pub fn from_counts(tp: usize, predicted: usize, gold: usize) -> Self {
        Self::from_fractions(tp as f64, predicted as f64, tp as f64, gold as f64)
    }
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("{side} partition has overlapping chains (mention {mention:?})")]
    OverlappingChains { side: &'static str, mention: Span },
    #[error("mention analysis is undefined on an empty document")]
    EmptyDocument,
}

/// Exact span-and-type matching over mention sets.
pub fn entity_prf(gold: &BTreeSet<TypedMention>, pred: &BTreeSet<TypedMention>) -> Prf {
    let tp = gold.intersection(pred).count();
    Prf::from_counts(tp, pred.len(), gold.len())
}

/// Corpus-pooled entity score: counts are summed over documents before the
/// ratios are taken.
pub fn entity_prf_corpus(pairs: &[(BTreeSet<TypedMention>, BTreeSet<TypedMention>)]) -> Prf {
    let mut tp = 0;
    let mut pred = 0;
    let mut gold = 0;
    for (g, p) in pairs {
        tp += g.intersection(p).count();
        pred += p.len();
        gold += g.len();
    }
    Prf::from_counts(tp, pred, gold)
}

type RelationKey = (Span, Option<usize>, usize, Span, Option<usize>);

fn relation_key(r: &RelationTriple, schema: &TaskSchema, strict: bool) -> RelationKey {
    let ht = strict.then_some(r.head.entity_type);
    let tt = strict.then_some(r.tail.entity_type);
    let (mut a, mut b) = ((r.head.span, ht), (r.tail.span, tt));
    if schema.is_symmetric(r.relation) && b < a {
        std::mem::swap(&mut a, &mut b);
    }
    (a.0, a.1, r.relation, b.0, b.1)
}

fn relation_keys(
    set: &BTreeSet<RelationTriple>,
    schema: &TaskSchema,
    strict: bool,
) -> BTreeSet<RelationKey> {
    set.iter()
        .map(|r| relation_key(r, schema, strict))
        .collect()
}

/// Relation matching. Non-strict requires both argument spans and the
/// relation label to match; strict additionally requires both argument
/// entity types. Symmetric relation labels match regardless of argument
/// order and count once.
pub fn relation_prf(
    gold: &BTreeSet<RelationTriple>,
    pred: &BTreeSet<RelationTriple>,
    schema: &TaskSchema,
    strict: bool,
) -> Prf {
    let g = relation_keys(gold, schema, strict);
    let p = relation_keys(pred, schema, strict);
    let tp = g.intersection(&p).count();
    Prf::from_counts(tp, p.len(), g.len())
}

/// Corpus-pooled relation score.
pub fn relation_prf_corpus(
    pairs: &[(BTreeSet<RelationTriple>, BTreeSet<RelationTriple>)],
    schema: &TaskSchema,
    strict: bool,
) -> Prf {
    let mut tp = 0;
    let mut pred = 0;
    let mut gold = 0;
    for (g, p) in pairs {
        let g = relation_keys(g, schema, strict);
        let p = relation_keys(p, schema, strict);
        tp += g.intersection(&p).count();
        pred += p.len();
        gold += g.len();
    }
    Prf::from_counts(tp, pred, gold)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorefScores {
    pub muc: Prf,
    pub b3: Prf,
    pub ceaf_phi4: Prf,
    /// Mean of the three F1 scores.
    pub avg_f1: f64,
}

fn check_disjoint(chains: &[BTreeSet<Span>], side: &'static str) -> Result<(), MetricsError> {
    let mut seen = BTreeSet::new();
    for chain in chains {
        for m in chain {
            if !seen.insert(*m) {
                return Err(MetricsError::OverlappingChains { side, mention: *m });
            }
        }
    }
    Ok(())
}

fn chain_index(chains: &[BTreeSet<Span>]) -> BTreeMap<Span, usize> {
    let mut idx = BTreeMap::new();
    for (i, chain) in chains.iter().enumerate() {
        for m in chain {
            idx.insert(*m, i);
        }
    }
    idx
}

// MUC numerator for one direction: sum over key chains of |K| minus the
// number of parts K splits into under the response (mentions missing from
// the response each count as their own part).
fn muc_direction(keys: &[BTreeSet<Span>], response: &[BTreeSet<Span>]) -> (f64, f64) {
    let resp_idx = chain_index(response);
    let mut num = 0.0;
    let mut den = 0.0;
    for k in keys {
        let mut parts: BTreeSet<Option<usize>> = BTreeSet::new();
        let mut missing = 0usize;
        for m in k {
            match resp_idx.get(m) {
                Some(c) => {
                    parts.insert(Some(*c));
                }
                None => missing += 1,
            }
        }
        num += (k.len() - (parts.len() + missing)) as f64;
        den += (k.len() - 1) as f64;
    }
    (num, den)
}

fn b3_direction(keys: &[BTreeSet<Span>], response: &[BTreeSet<Span>]) -> (f64, f64) {
    let resp_idx = chain_index(response);
    let mut num = 0.0;
    let mut den = 0.0;
    for k in keys {
        for m in k {
            let overlap = match resp_idx.get(m) {
                Some(c) => k.intersection(&response[*c]).count(),
                None => 0,
            };
            num += overlap as f64 / k.len() as f64;
            den += 1.0;
        }
    }
    (num, den)
}

fn phi4(a: &BTreeSet<Span>, b: &BTreeSet<Span>) -> f64 {
    2.0 * a.intersection(b).count() as f64 / (a.len() + b.len()) as f64
}

/// MUC (link-based), B³ (mention-based) and CEAF_φ4 (alignment-based)
/// scores plus their average F1. Chains within each side must be disjoint;
/// they are otherwise compared exactly as given.
pub fn coref_scores(
    gold: &[BTreeSet<Span>],
    pred: &[BTreeSet<Span>],
) -> Result<CorefScores, MetricsError> {
    check_disjoint(gold, "gold")?;
    check_disjoint(pred, "pred")?;

    let (mr_num, mr_den) = muc_direction(gold, pred);
    let (mp_num, mp_den) = muc_direction(pred, gold);
    let muc = Prf::from_fractions(mp_num, mp_den, mr_num, mr_den);

    let (br_num, br_den) = b3_direction(gold, pred);
    let (bp_num, bp_den) = b3_direction(pred, gold);
    let b3 = Prf::from_fractions(bp_num, bp_den, br_num, br_den);

    let sim = if gold.is_empty() || pred.is_empty() {
        0.0
    } else {
        let w: Vec<Vec<f64>> = gold
            .iter()
            .map(|k| pred.iter().map(|r| phi4(k, r)).collect())
            .collect();
        max_weight_assignment(&w).0
    };
    let ceaf_phi4 = Prf::from_fractions(sim, pred.len() as f64, sim, gold.len() as f64);

    let avg_f1 = (muc.f1 + b3.f1 + ceaf_phi4.f1) / 3.0;
    Ok(CorefScores {
        muc,
        b3,
        ceaf_phi4,
        avg_f1,
    })
}

/// Corpus-pooled coreference scores: per-direction numerators and
/// denominators are accumulated over documents before the ratios.
pub fn coref_scores_corpus(
    pairs: &[(Vec<BTreeSet<Span>>, Vec<BTreeSet<Span>>)],
) -> Result<CorefScores, MetricsError> {
    let mut acc = [[0.0f64; 2]; 6]; // muc r/p, b3 r/p, ceaf r/p as (num, den)
    for (gold, pred) in pairs {
        check_disjoint(gold, "gold")?;
        check_disjoint(pred, "pred")?;
        let (n, d) = muc_direction(gold, pred);
        acc[0][0] += n;
        acc[0][1] += d;
        let (n, d) = muc_direction(pred, gold);
        acc[1][0] += n;
        acc[1][1] += d;
        let (n, d) = b3_direction(gold, pred);
        acc[2][0] += n;
        acc[2][1] += d;
        let (n, d) = b3_direction(pred, gold);
        acc[3][0] += n;
        acc[3][1] += d;
        let sim = if gold.is_empty() || pred.is_empty() {
            0.0
        } else {
            let w: Vec<Vec<f64>> = gold
                .iter()
                .map(|k| pred.iter().map(|r| phi4(k, r)).collect())
                .collect();
            max_weight_assignment(&w).0
        };
        acc[4][0] += sim;
        acc[4][1] += gold.len() as f64;
        acc[5][0] += sim;
        acc[5][1] += pred.len() as f64;
    }
    let muc = Prf::from_fractions(acc[1][0], acc[1][1], acc[0][0], acc[0][1]);
    let b3 = Prf::from_fractions(acc[3][0], acc[3][1], acc[2][0], acc[2][1]);
    let ceaf_phi4 = Prf::from_fractions(acc[5][0], acc[5][1], acc[4][0], acc[4][1]);
    let avg_f1 = (muc.f1 + b3.f1 + ceaf_phi4.f1) / 3.0;
    Ok(CorefScores {
        muc,
        b3,
        ceaf_phi4,
        avg_f1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MentionAnalysis {
    /// Predicted mentions divided by document length.
    pub mention_ratio: f64,
    /// Fraction of gold mentions exactly matched by a predicted mention.
    pub gold_recall: f64,
    pub predicted: usize,
    pub gold: usize,
    pub matched: usize,
}

/// Mention-budget analysis: how many mentions the system proposes per input
/// token and how much of the gold mention set they cover.
pub fn mention_analysis(
    gold: &CorefPartition,
    pred_mentions: &BTreeSet<Span>,
    d: &Document,
) -> Result<MentionAnalysis, MetricsError> {
    if d.is_empty() {
        return Err(MetricsError::EmptyDocument);
    }
    let gold_mentions = gold.mentions();
    let matched = gold_mentions.intersection(pred_mentions).count();
    let gold_recall = if gold_mentions.is_empty() {
        0.0
    } else {
        matched as f64 / gold_mentions.len() as f64
    };
    Ok(MentionAnalysis {
        mention_ratio: pred_mentions.len() as f64 / d.len() as f64,
        gold_recall,
        predicted: pred_mentions.len(),
        gold: gold_mentions.len(),
        matched,
    })
}
