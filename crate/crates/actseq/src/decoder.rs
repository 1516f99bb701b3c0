//! Greedy constrained decoding: at every step the model scores the dynamic
//! candidate set, the argmax is applied (ties resolve to the earliest
//! candidate), its verbalization is fed back, and decoding stops when the
//! end sentinel is copied. Because candidates come from the same prefix
//! machine that training uses, any score function, however bad, can only
//! produce well-formed sequences.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{delinearize, ActionSequence, PrefixState};
use crate::document::{Document, TaskStructure};
use crate::model::plan::{step_plan, DecoderInput};
use crate::model::{ModelError, ScorerModel, Session};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeOptions {
    pub prune_sentences: bool,
    /// Hard cap on decisions; `None` uses 4 * (|D| + 1).
    pub max_steps: Option<usize>,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        DecodeOptions {
            prune_sentences: true,
            max_steps: None,
        }
    }
}

impl DecodeOptions {
    pub fn for_task(kind: crate::schema::TaskKind) -> Self {
        DecodeOptions {
            prune_sentences: !matches!(kind, crate::schema::TaskKind::Coref),
            max_steps: None,
        }
    }

    fn step_budget(&self, doc: &Document) -> usize {
        self.max_steps.unwrap_or(4 * (doc.len() + 1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeOutcome {
    pub sequence: ActionSequence,
    /// Probability of the chosen candidate at each decision.
    pub step_probs: Vec<f64>,
    /// Decisions taken (multi-unit left groups count per unit).
    pub decisions: usize,
    pub terminal: bool,
}

/// Greedy decode of one document against a read-only model.
pub fn greedy_decode(
    model: &ScorerModel,
    doc: &Document,
    options: &DecodeOptions,
) -> Result<DecodeOutcome, ModelError> {
    let params = model.params.to_precision::<f32>();
    let mut session =
        Session::<f32>::new(&params, &model.layout, &model.config, &model.alphabet, doc)?;
    let mut state = PrefixState::new(doc, &model.schema, options.prune_sentences);
    let budget = options.step_budget(doc);
    let mut input = DecoderInput::Start;
    let mut step_probs = Vec::new();

    while !state.is_terminal() && state.decisions() < budget {
        let plan = step_plan(&state, input)?;
        let scores = session.push_and_score(&model.alphabet, doc, &plan);
        let probs = crate::model::step_distribution(&scores)?;
        let mut best = 0usize;
        for (i, s) in scores.iter().enumerate() {
            if *s > scores[best] {
                best = i;
            }
        }
        step_probs.push(probs[best] as f64);
        let chosen = plan.candidates.actions[best];
        let feed = state.apply(&chosen)?;
        input = DecoderInput::Feed(feed);
    }

    let decisions = state.decisions();
    let terminal = state.is_terminal();
    let sequence = state.into_sequence();
    debug_assert!(
        sequence_length_within_bound(&sequence, doc),
        "decode length bound violated"
    );
    Ok(DecodeOutcome {
        sequence,
        step_probs,
        decisions,
        terminal,
    })
}

/// Sequence-length law: triples never exceed copies + spans + groups, with
/// every copy, span and group accounted once.
pub fn sequence_length_within_bound(seq: &ActionSequence, doc: &Document) -> bool {
    use crate::codec::StructureAction;
    let spans = seq
        .triples
        .iter()
        .filter(|t| matches!(t.action, StructureAction::RightBracket))
        .count();
    let groups = seq
        .triples
        .iter()
        .filter(|t| matches!(t.action, StructureAction::LeftBracketGroup(_)))
        .count();
    seq.triples.len() <= doc.len() + 1 + 2 * spans + groups
}

/// Greedy decode followed by structure reconstruction.
pub fn predict_structure(
    model: &ScorerModel,
    doc: &Document,
    options: &DecodeOptions,
) -> Result<TaskStructure, ModelError> {
    let outcome = greedy_decode(model, doc, options)?;
    Ok(delinearize(&outcome.sequence, doc, &model.schema)?)
}

/// Decodes a corpus in parallel against a read-only model, preserving input
/// order.
pub fn predict_corpus(
    model: &ScorerModel,
    docs: &[Document],
    options: &DecodeOptions,
) -> Result<Vec<DecodeOutcome>, ModelError> {
    docs.par_iter()
        .map(|d| greedy_decode(model, d, options))
        .collect()
}
