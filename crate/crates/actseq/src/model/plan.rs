//! Per-decision step plans: the candidate set for a step together with
//! everything the scorer needs to address its heads (decoder positions of
//! paired brackets and of antecedent mentions). Teacher forcing builds the
//! whole plan from the gold sequence up front; greedy decoding builds one
//! step at a time from the live prefix state. Both go through the same
//! candidate machinery, so they see identical candidate sets by
//! construction.

use crate::codec::{
    ActionSequence, ActionTriple, CandidateSet, FeedSymbol, PrefixState, StructureAction,
};
use crate::document::Document;
use crate::schema::{LabelAction, TaskSchema};

use super::ModelError;

/// Decoder positions anchoring a closed mention: its right-bracket decision
/// and the left-bracket unit it consumed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MentionRef {
    pub close_pos: usize,
    pub open_pos: usize,
}

/// How one candidate is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandScore {
    Copy,
    Left,
    Right { open_pos: usize, label: LabelScore },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelScore {
    /// Entity type column of the right head.
    NerType {
        ty: usize,
    },
    /// Entity type column plus the trailing no-link column.
    EreUnlinked {
        ty: usize,
    },
    /// Entity type column plus the link head over both mention
    /// representations.
    EreLinked {
        ty: usize,
        rel: usize,
        ant: MentionRef,
    },
    /// The dedicated no-antecedent output.
    CorefNew,
    CorefLinked {
        ant: MentionRef,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecoderInput {
    /// Position zero: the padding symbol primes the decoder.
    Start,
    Feed(FeedSymbol),
}

#[derive(Debug, Clone)]
pub struct StepPlan {
    /// Decoder position of this decision.
    pub position: usize,
    /// Copy cursor before the decision (`doc.len()` means only the end
    /// sentinel remains).
    pub cursor: usize,
    /// Symbol fed into the decoder at this position.
    pub input: DecoderInput,
    pub candidates: CandidateSet,
    pub scores: Vec<CandScore>,
    /// Index of the gold candidate when teacher-forced.
    pub gold_index: Option<usize>,
}

fn mention_ref(state: &PrefixState<'_>, right_triple: usize) -> MentionRef {
    let m = state
        .rights()
        .iter()
        .find(|m| m.triple_idx == right_triple)
        .expect("label antecedents reference closed mentions");
    MentionRef {
        close_pos: m.close_decision,
        open_pos: m.open_decision,
    }
}

fn score_of(state: &PrefixState<'_>, cand: &ActionTriple) -> CandScore {
    match cand.action {
        StructureAction::Copy => CandScore::Copy,
        StructureAction::LeftBracketGroup(_) => CandScore::Left,
        StructureAction::RightBracket => {
            let b = cand.pairing.expect("right candidate carries pairing");
            let open_pos = state
                .unit_for_pairing(b)
                .expect("candidate pairings have an unconsumed unit");
            let label = match cand.label.expect("right candidate carries label") {
                LabelAction::Entity { entity_type } => LabelScore::NerType { ty: entity_type },
                LabelAction::EreLabel {
                    entity_type,
                    link: None,
                } => LabelScore::EreUnlinked { ty: entity_type },
                LabelAction::EreLabel {
                    entity_type,
                    link: Some(link),
                } => LabelScore::EreLinked {
                    ty: entity_type,
                    rel: link.relation,
                    ant: mention_ref(state, link.antecedent),
                },
                LabelAction::CorefAntecedent { antecedent: None } => LabelScore::CorefNew,
                LabelAction::CorefAntecedent {
                    antecedent: Some(m),
                } => LabelScore::CorefLinked {
                    ant: mention_ref(state, m),
                },
            };
            CandScore::Right { open_pos, label }
        }
    }
}

/// The plan for the next decision of a live prefix.
pub fn step_plan(state: &PrefixState<'_>, input: DecoderInput) -> Result<StepPlan, ModelError> {
    let candidates = state.candidates()?;
    let scores = candidates
        .actions
        .iter()
        .map(|c| score_of(state, c))
        .collect();
    Ok(StepPlan {
        position: state.decisions(),
        cursor: state.cursor(),
        input,
        candidates,
        scores,
        gold_index: None,
    })
}

/// Expands a gold sequence into per-decision plans (multi-unit left groups
/// become that many unit decisions). Fails with an inconsistent-gold error
/// if any gold decision is missing from its candidate set, which signals a
/// codec or schema bug, or gold that violates the pruning setting.
pub fn plan_gold_sequence(
    doc: &Document,
    gold: &ActionSequence,
    schema: &TaskSchema,
    prune_sentences: bool,
) -> Result<Vec<StepPlan>, ModelError> {
    let mut state = PrefixState::new(doc, schema, prune_sentences);
    let mut plans = Vec::new();
    let mut input = DecoderInput::Start;
    for triple in &gold.triples {
        let units = match triple.action {
            StructureAction::LeftBracketGroup(k) => k,
            _ => 1,
        };
        let unit_decision = match triple.action {
            StructureAction::LeftBracketGroup(_) => ActionTriple::left(1),
            _ => *triple,
        };
        for _ in 0..units {
            let mut plan = step_plan(&state, input)?;
            let gold_index = plan.candidates.position_of(&unit_decision).ok_or_else(|| {
                ModelError::InconsistentGold {
                    step: plan.position,
                    detail: format!("{unit_decision:?} not offered"),
                }
            })?;
            plan.gold_index = Some(gold_index);
            plans.push(plan);
            let feed = state.apply(&unit_decision)?;
            input = DecoderInput::Feed(feed);
        }
    }
    Ok(plans)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::linearize;
    use crate::document::{Span, TaskStructure, TypedMention};
    use crate::schema::TaskSchema;

    #[test]
    fn gold_plan_expands_left_groups_and_tracks_positions() {
        let doc = Document::single_sentence("d", vec!["a".into(), "b".into(), "c".into()]);
        let schema = TaskSchema::ner(vec!["T".into()]).unwrap();
        let s = TaskStructure::Ner {
            mentions: [
                TypedMention {
                    span: Span::new(0, 0),
                    entity_type: 0,
                },
                TypedMention {
                    span: Span::new(0, 2),
                    entity_type: 0,
                },
            ]
            .into(),
        };
        let (seq, _) = linearize(&s, &doc, &schema).unwrap();
        let plans = plan_gold_sequence(&doc, &seq, &schema, true).unwrap();
        // Decisions: left, left, copy, right, copy, copy, right, copy(eos).
        assert_eq!(plans.len(), 8);
        assert_eq!(plans[0].input, DecoderInput::Start);
        assert_eq!(plans[1].input, DecoderInput::Feed(FeedSymbol::LeftBracket));
        assert_eq!(plans[2].input, DecoderInput::Feed(FeedSymbol::LeftBracket));
        assert_eq!(plans[3].input, DecoderInput::Feed(FeedSymbol::Token(0)));
        for (i, p) in plans.iter().enumerate() {
            assert_eq!(p.position, i);
            assert!(p.gold_index.is_some());
        }
        // The nested close at position 3 pairs the later unit (position 1).
        let CandScore::Right { open_pos, .. } = plans[3].scores[plans[3].gold_index.unwrap()]
        else {
            panic!("gold at 3 is a right bracket");
        };
        assert_eq!(open_pos, 1);
        // The outer close pairs the first unit (position 0).
        let CandScore::Right { open_pos, .. } = plans[6].scores[plans[6].gold_index.unwrap()]
        else {
            panic!("gold at 6 is a right bracket");
        };
        assert_eq!(open_pos, 0);
    }

    #[test]
    fn teacher_forcing_sees_the_decoding_candidate_sets() {
        // The plan for each gold prefix must offer exactly what
        // candidate_actions offers a decoder at that prefix.
        let doc =
            Document::single_sentence("d", vec!["a".into(), "b".into(), "c".into(), "e".into()]);
        let schema = TaskSchema::ner(vec!["X".into(), "Y".into()]).unwrap();
        let s = TaskStructure::Ner {
            mentions: [
                TypedMention {
                    span: Span::new(0, 1),
                    entity_type: 1,
                },
                TypedMention {
                    span: Span::new(3, 3),
                    entity_type: 0,
                },
            ]
            .into(),
        };
        let (seq, _) = linearize(&s, &doc, &schema).unwrap();
        let plans = plan_gold_sequence(&doc, &seq, &schema, true).unwrap();
        let mut state = PrefixState::new(&doc, &schema, true);
        for plan in &plans {
            let from_decoder =
                crate::codec::candidate_actions(state.triples(), &doc, &schema, true).unwrap();
            assert_eq!(plan.candidates, from_decoder);
            let gold = plan.candidates.actions[plan.gold_index.unwrap()];
            state.apply(&gold).unwrap();
        }
        assert!(state.is_terminal());
    }

    #[test]
    fn cross_sentence_gold_under_pruning_is_inconsistent() {
        let doc = Document::new("d", vec!["a".into(), "b".into()], vec![(0, 1), (1, 2)]).unwrap();
        let schema = TaskSchema::ner(vec!["T".into()]).unwrap();
        let s = TaskStructure::Ner {
            mentions: [TypedMention {
                span: Span::new(0, 1),
                entity_type: 0,
            }]
            .into(),
        };
        let (seq, _) = linearize(&s, &doc, &schema).unwrap();
        assert!(matches!(
            plan_gold_sequence(&doc, &seq, &schema, true),
            Err(ModelError::InconsistentGold { .. })
        ));
        assert!(plan_gold_sequence(&doc, &seq, &schema, false).is_ok());
    }
}
