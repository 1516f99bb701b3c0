//! Bidirectional conversion between task structures and action sequences,
//! plus per-step construction of the dynamic candidate set under hard
//! well-formedness constraints.
//!
//! A structure is built by three kinds of actions: copying the next input
//! token, opening a group of left brackets before the next token, and
//! closing a span with a right bracket that names its paired left group and
//! carries a task-specific label. A left-bracket group is run-length
//! encoded: consecutive left-bracket decisions merge into a single triple
//! whose multiplicity counts the units, and each unit pairs with at most one
//! right bracket, innermost first.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::document::{
    validate_structure, CorefPartition, Document, RelationTriple, Span, TaskStructure, TypedMention,
};
use crate::schema::{labeling_set_for_rights, EreLink, LabelAction, TaskKind, TaskSchema};

/// Verbalization of a left-bracket unit fed back into the decoder.
pub const LEFT_BRACKET_SYMBOL: &str = "⟦*";
/// Verbalization of a right bracket.
pub const RIGHT_BRACKET_SYMBOL: &str = "⟧";
/// The distinguished end-of-input symbol whose copy terminates decoding.
pub const END_SENTINEL_SYMBOL: &str = "<eos>";
pub const UNKNOWN_SYMBOL: &str = "<unk>";
pub const PADDING_SYMBOL: &str = "<pad>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StructureAction {
    Copy,
    /// `LeftBracketGroup(k)` stands for `k` consecutive left brackets.
    LeftBracketGroup(usize),
    RightBracket,
}

/// One step of the compressed action sequence. `pairing` and `label` are
/// present exactly when the action is a right bracket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ActionTriple {
    pub action: StructureAction,
    /// Step index of the left-bracket group this right bracket pairs with.
    pub pairing: Option<usize>,
    pub label: Option<LabelAction>,
}

impl ActionTriple {
    pub fn copy() -> Self {
        ActionTriple {
            action: StructureAction::Copy,
            pairing: None,
            label: None,
        }
    }

    pub fn left(multiplicity: usize) -> Self {
        ActionTriple {
            action: StructureAction::LeftBracketGroup(multiplicity),
            pairing: None,
            label: None,
        }
    }

    pub fn right(pairing: usize, label: LabelAction) -> Self {
        ActionTriple {
            action: StructureAction::RightBracket,
            pairing: Some(pairing),
            label: Some(label),
        }
    }
}

// Wire form: `a` is a tag string; `multiplicity`, `b`, `z` appear when the
// action carries them.
#[derive(Serialize, Deserialize)]
struct TripleRepr {
    a: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    multiplicity: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    z: Option<LabelAction>,
}

impl From<ActionTriple> for TripleRepr {
    fn from(t: ActionTriple) -> Self {
        match t.action {
            StructureAction::Copy => TripleRepr {
                a: "copy".into(),
                multiplicity: None,
                b: None,
                z: None,
            },
            StructureAction::LeftBracketGroup(k) => TripleRepr {
                a: "left".into(),
                multiplicity: Some(k),
                b: None,
                z: None,
            },
            StructureAction::RightBracket => TripleRepr {
                a: "right".into(),
                multiplicity: None,
                b: t.pairing,
                z: t.label,
            },
        }
    }
}

impl TryFrom<TripleRepr> for ActionTriple {
    type Error = String;

    fn try_from(r: TripleRepr) -> Result<Self, String> {
        match r.a.as_str() {
            "copy" => Ok(ActionTriple::copy()),
            "left" => Ok(ActionTriple::left(r.multiplicity.unwrap_or(1))),
            "right" => {
                let b = r.b.ok_or("right action requires b")?;
                let z = r.z.ok_or("right action requires z")?;
                Ok(ActionTriple::right(b, z))
            }
            other => Err(format!("unknown action tag {other:?}")),
        }
    }
}

impl Serialize for ActionTriple {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        TripleRepr::from(*self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for ActionTriple {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = TripleRepr::deserialize(d)?;
        ActionTriple::try_from(repr).map_err(serde::de::Error::custom)
    }
}

/// A complete (or truncated) action sequence for one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSequence {
    pub doc_id: String,
    pub triples: Vec<ActionTriple>,
    /// True when the last action copied the end sentinel.
    pub terminal: bool,
}

impl ActionSequence {
    pub fn copy_count(&self) -> usize {
        self.triples
            .iter()
            .filter(|t| matches!(t.action, StructureAction::Copy))
            .count()
    }
}

/// The ordered, fully specified choices for the next decision.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub actions: Vec<ActionTriple>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn position_of(&self, t: &ActionTriple) -> Option<usize> {
        self.actions.iter().position(|c| c == t)
    }
}

/// What gets fed back into the decoder after a decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedSymbol {
    /// Copy of the document token at this index.
    Token(usize),
    LeftBracket,
    RightBracket,
    EndSentinel,
}

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("structure invalid for document: {0}")]
    InvalidStructure(String),
    #[error("sequence is already terminal")]
    TerminalSequence,
    #[error("malformed pairing at step {step}: {detail}")]
    MalformedPairing { step: usize, detail: String },
    #[error("malformed label at step {step}: {detail}")]
    MalformedLabel { step: usize, detail: String },
    #[error("copy past the end sentinel at step {step}")]
    CursorOverrun { step: usize },
    #[error("history is not in canonical form at step {step}: consecutive left-bracket triples")]
    NonCanonicalHistory { step: usize },
    #[error("copy cursor exhausted")]
    CursorExhausted,
}

/// A span already closed by a right bracket, with the decoder positions of
/// its closing decision and of the consumed left-bracket unit. These are the
/// anchors for mention representations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MentionStep {
    pub triple_idx: usize,
    pub close_decision: usize,
    pub open_decision: usize,
    pub span: Span,
}

#[derive(Debug, Clone)]
struct GroupState {
    triple_idx: usize,
    /// First token of any span this group opens (the copy cursor at open).
    token: usize,
    first_decision: usize,
    multiplicity: usize,
    consumed: usize,
}

/// Replayable decision-level state of a sequence prefix. Both teacher-forced
/// training and greedy decoding drive this machine, so the candidate sets
/// they see are identical by construction.
#[derive(Debug, Clone)]
pub struct PrefixState<'a> {
    doc: &'a Document,
    schema: &'a TaskSchema,
    prune_sentences: bool,
    triples: Vec<ActionTriple>,
    decisions: usize,
    cursor: usize,
    terminal: bool,
    last_decision_left: bool,
    groups: Vec<GroupState>,
    rights: Vec<MentionStep>,
}

impl<'a> PrefixState<'a> {
    pub fn new(doc: &'a Document, schema: &'a TaskSchema, prune_sentences: bool) -> Self {
        PrefixState {
            doc,
            schema,
            prune_sentences,
            triples: Vec::new(),
            decisions: 0,
            cursor: 0,
            terminal: false,
            last_decision_left: false,
            groups: Vec::new(),
            rights: Vec::new(),
        }
    }

    pub fn doc(&self) -> &Document {
        self.doc
    }

    pub fn triples(&self) -> &[ActionTriple] {
        &self.triples
    }

    pub fn rights(&self) -> &[MentionStep] {
        &self.rights
    }

    /// Decision count so far; equals the number of decoder positions used.
    pub fn decisions(&self) -> usize {
        self.decisions
    }

    /// Index of the next token to copy; `doc.len()` means the end sentinel.
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn is_terminal(&self) -> bool {
        self.terminal
    }

    /// Decoder position of the left-bracket unit a right bracket pairing
    /// with group `triple_idx` would consume now (units pop innermost
    /// first).
    pub fn unit_for_pairing(&self, triple_idx: usize) -> Option<usize> {
        let g = self.groups.iter().find(|g| g.triple_idx == triple_idx)?;
        if g.consumed >= g.multiplicity {
            return None;
        }
        Some(g.first_decision + (g.multiplicity - 1 - g.consumed))
    }

    fn right_triple_indices(&self) -> Vec<usize> {
        self.rights.iter().map(|r| r.triple_idx).collect()
    }

    fn group_in_scope(&self, g: &GroupState) -> bool {
        if g.consumed >= g.multiplicity {
            return false;
        }
        // A pairing closes the span [g.token, cursor - 1]; it must be
        // non-empty, which also requires at least one copied token.
        if self.cursor == 0 || g.token > self.cursor - 1 {
            return false;
        }
        if self.cursor - 1 >= self.doc.len() {
            return false;
        }
        if self.prune_sentences {
            let current = self.doc.sentence_of(self.cursor - 1);
            if self.doc.sentence_of(g.token) != current {
                return false;
            }
        }
        true
    }

    /// The ordered candidate set for the next decision: copy, a single left
    /// bracket, then one right bracket per pairable group and labeling, with
    /// pairings ascending and labelings in schema order.
    pub fn candidates(&self) -> Result<CandidateSet, CodecError> {
        if self.terminal {
            return Err(CodecError::TerminalSequence);
        }
        let mut actions = Vec::new();
        actions.push(ActionTriple::copy());
        actions.push(ActionTriple::left(1));
        let rights = self.right_triple_indices();
        let labels = labeling_set_for_rights(self.schema, &rights);
        for g in &self.groups {
            if !self.group_in_scope(g) {
                continue;
            }
            for z in &labels {
                actions.push(ActionTriple::right(g.triple_idx, *z));
            }
        }
        Ok(CandidateSet { actions })
    }

    /// The token this decision feeds back into the decoder, given the
    /// current cursor.
    pub fn feed_of(&self, decision: &ActionTriple) -> FeedSymbol {
        match decision.action {
            StructureAction::Copy => {
                if self.cursor < self.doc.len() {
                    FeedSymbol::Token(self.cursor)
                } else {
                    FeedSymbol::EndSentinel
                }
            }
            StructureAction::LeftBracketGroup(_) => FeedSymbol::LeftBracket,
            StructureAction::RightBracket => FeedSymbol::RightBracket,
        }
    }

    fn validate_label(&self, z: &LabelAction, step: usize) -> Result<(), CodecError> {
        let bad = |detail: String| CodecError::MalformedLabel { step, detail };
        let check_antecedent = |m: usize| -> Result<(), CodecError> {
            let is_right = self
                .triples
                .get(m)
                .map(|t| matches!(t.action, StructureAction::RightBracket))
                .unwrap_or(false);
            if !is_right {
                return Err(bad(format!(
                    "antecedent {m} is not an earlier right bracket"
                )));
            }
            Ok(())
        };
        match (self.schema.kind, z) {
            (TaskKind::Ner, LabelAction::Entity { entity_type }) => {
                if *entity_type >= self.schema.entity_types.len() {
                    return Err(bad(format!("entity type {entity_type} out of range")));
                }
            }
            (TaskKind::Ere, LabelAction::EreLabel { entity_type, link }) => {
                if *entity_type >= self.schema.entity_types.len() {
                    return Err(bad(format!("entity type {entity_type} out of range")));
                }
                if let Some(EreLink {
                    antecedent,
                    relation,
                }) = link
                {
                    if *relation >= self.schema.relation_types.len() {
                        return Err(bad(format!("relation {relation} out of range")));
                    }
                    check_antecedent(*antecedent)?;
                }
            }
            (TaskKind::Coref, LabelAction::CorefAntecedent { antecedent }) => {
                if let Some(m) = antecedent {
                    check_antecedent(*m)?;
                }
            }
            (kind, other) => {
                return Err(bad(format!("label {other:?} does not fit task {kind:?}")));
            }
        }
        Ok(())
    }

    /// Applies one decision (or a multi-unit left group, unit by unit) and
    /// returns the symbol it feeds into the decoder. Consecutive left units
    /// merge into the previous triple rather than appending a new one.
    /// Mechanical validity is enforced; sentence pruning is a candidate
    /// restriction, not an apply-time check.
    pub fn apply(&mut self, decision: &ActionTriple) -> Result<FeedSymbol, CodecError> {
        if self.terminal {
            return Err(CodecError::TerminalSequence);
        }
        let step = self.triples.len();
        let feed = self.feed_of(decision);
        match decision.action {
            StructureAction::Copy => {
                self.triples.push(ActionTriple::copy());
                if self.cursor == self.doc.len() {
                    self.terminal = true;
                }
                self.cursor += 1;
                self.decisions += 1;
                self.last_decision_left = false;
            }
            StructureAction::LeftBracketGroup(units) => {
                if units == 0 {
                    return Err(CodecError::MalformedPairing {
                        step,
                        detail: "left-bracket group with zero multiplicity".into(),
                    });
                }
                for _ in 0..units {
                    if self.last_decision_left {
                        let g = self.groups.last_mut().expect("left run implies a group");
                        g.multiplicity += 1;
                        let t = self.triples.last_mut().expect("left run implies a triple");
                        t.action = StructureAction::LeftBracketGroup(g.multiplicity);
                    } else {
                        self.triples.push(ActionTriple::left(1));
                        self.groups.push(GroupState {
                            triple_idx: self.triples.len() - 1,
                            token: self.cursor,
                            first_decision: self.decisions,
                            multiplicity: 1,
                            consumed: 0,
                        });
                    }
                    self.decisions += 1;
                    self.last_decision_left = true;
                }
            }
            StructureAction::RightBracket => {
                let b = decision.pairing.ok_or(CodecError::MalformedPairing {
                    step,
                    detail: "right bracket without pairing index".into(),
                })?;
                let z = decision.label.ok_or(CodecError::MalformedLabel {
                    step,
                    detail: "right bracket without label".into(),
                })?;
                self.validate_label(&z, step)?;
                let gi = self
                    .groups
                    .iter()
                    .position(|g| g.triple_idx == b)
                    .ok_or_else(|| CodecError::MalformedPairing {
                        step,
                        detail: format!("pairing {b} is not a left-bracket step"),
                    })?;
                {
                    let g = &self.groups[gi];
                    if g.consumed >= g.multiplicity {
                        return Err(CodecError::MalformedPairing {
                            step,
                            detail: format!("left-bracket group {b} has no unconsumed unit"),
                        });
                    }
                    if self.cursor == 0
                        || g.token > self.cursor - 1
                        || self.cursor - 1 >= self.doc.len()
                    {
                        return Err(CodecError::MalformedPairing {
                            step,
                            detail: format!("pairing {b} would close an empty span"),
                        });
                    }
                }
                let open_decision = self.unit_for_pairing(b).expect("checked above");
                let g = &mut self.groups[gi];
                g.consumed += 1;
                let span = Span::new(g.token, self.cursor - 1);
                self.triples.push(ActionTriple::right(b, z));
                self.rights.push(MentionStep {
                    triple_idx: self.triples.len() - 1,
                    close_decision: self.decisions,
                    open_decision,
                    span,
                });
                self.decisions += 1;
                self.last_decision_left = false;
            }
        }
        Ok(feed)
    }

    /// Replays a compressed history. Histories with consecutive left-bracket
    /// triples are rejected: they would merge on replay and shift every
    /// later pairing index.
    pub fn replay(&mut self, history: &[ActionTriple]) -> Result<(), CodecError> {
        let mut prev_left = false;
        for (i, t) in history.iter().enumerate() {
            let is_left = matches!(t.action, StructureAction::LeftBracketGroup(_));
            if is_left && prev_left {
                return Err(CodecError::NonCanonicalHistory { step: i });
            }
            prev_left = is_left;
            self.apply(t)?;
        }
        Ok(())
    }

    pub fn into_sequence(self) -> ActionSequence {
        ActionSequence {
            doc_id: self.doc.doc_id.clone(),
            triples: self.triples,
            terminal: self.terminal,
        }
    }
}

/// Candidate set for the decision following `history`.
pub fn candidate_actions(
    history: &[ActionTriple],
    doc: &Document,
    schema: &TaskSchema,
    prune_sentences: bool,
) -> Result<CandidateSet, CodecError> {
    let mut st = PrefixState::new(doc, schema, prune_sentences);
    st.replay(history)?;
    st.candidates()
}

/// Surface token for a chosen action: the copied word, a bracket symbol, or
/// the end sentinel. A multi-unit left group verbalizes to its symbol once
/// per unit, fed in successive steps.
pub fn verbalize<'d>(
    t: &ActionTriple,
    d: &'d Document,
    copy_cursor: usize,
) -> Result<&'d str, CodecError> {
    match t.action {
        StructureAction::Copy => {
            if copy_cursor < d.len() {
                Ok(d.tokens[copy_cursor].as_str())
            } else if copy_cursor == d.len() {
                Ok(END_SENTINEL_SYMBOL)
            } else {
                Err(CodecError::CursorExhausted)
            }
        }
        StructureAction::LeftBracketGroup(_) => Ok(LEFT_BRACKET_SYMBOL),
        StructureAction::RightBracket => Ok(RIGHT_BRACKET_SYMBOL),
    }
}

/// Renders a sequence as the verbalized token string, for inspection.
pub fn render_sequence(seq: &ActionSequence, d: &Document) -> String {
    let mut out: Vec<&str> = Vec::new();
    let mut cursor = 0usize;
    for t in &seq.triples {
        match t.action {
            StructureAction::Copy => {
                out.push(verbalize(t, d, cursor).unwrap_or(END_SENTINEL_SYMBOL));
                cursor += 1;
            }
            StructureAction::LeftBracketGroup(k) => {
                for _ in 0..k {
                    out.push(LEFT_BRACKET_SYMBOL);
                }
            }
            StructureAction::RightBracket => out.push(RIGHT_BRACKET_SYMBOL),
        }
    }
    out.join(" ")
}

/// A gold annotation that could not be encoded exactly; linearization
/// succeeded but lost the named piece.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EncodingWarning {
    /// The tail already links to a nearer head; this relation was dropped.
    MultiLinkTail {
        tail: Span,
        dropped_head: Span,
        relation: usize,
    },
    /// The head mention closes after the tail, so no backward link exists.
    HeadAfterTail {
        head: Span,
        tail: Span,
        relation: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct PlannedMention {
    span: Span,
    entity_type: Option<usize>,
    /// Position in the global close order, filled after sorting.
    close_order: usize,
}

fn close_sort_key(m: &PlannedMention) -> (usize, std::cmp::Reverse<usize>, usize) {
    // Close order: by end ascending; at the same token innermost (largest
    // start) first; identical spans tie-break by entity type in schema
    // order.
    (
        m.span.end,
        std::cmp::Reverse(m.span.start),
        m.entity_type.unwrap_or(0),
    )
}

/// Encodes a validated structure as its gold action sequence. Returns the
/// sequence plus warnings for the lossy relation cases.
pub fn linearize(
    s: &TaskStructure,
    d: &Document,
    schema: &TaskSchema,
) -> Result<(ActionSequence, Vec<EncodingWarning>), CodecError> {
    let violations = validate_structure(s, d, schema);
    if !violations.is_empty() {
        let msg = violations
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join("; ");
        return Err(CodecError::InvalidStructure(msg));
    }
    let mut warnings = Vec::new();

    // Flatten the structure into mentions in close order.
    let mut mentions: Vec<PlannedMention> = match s {
        TaskStructure::Ner { mentions } | TaskStructure::Ere { mentions, .. } => mentions
            .iter()
            .map(|m| PlannedMention {
                span: m.span,
                entity_type: Some(m.entity_type),
                close_order: 0,
            })
            .collect(),
        TaskStructure::Coref { partition } => partition
            .mentions()
            .into_iter()
            .map(|span| PlannedMention {
                span,
                entity_type: None,
                close_order: 0,
            })
            .collect(),
    };
    mentions.sort_by_key(close_sort_key);
    for (i, m) in mentions.iter_mut().enumerate() {
        m.close_order = i;
    }
    let order_of = |span: Span, ty: Option<usize>| -> usize {
        mentions
            .iter()
            .find(|m| m.span == span && m.entity_type == ty)
            .expect("mention present")
            .close_order
    };

    // Per-mention link choice, by close order.
    let mut link_of: Vec<Option<(usize, usize)>> = vec![None; mentions.len()];
    match s {
        TaskStructure::Ner { .. } => {}
        TaskStructure::Ere { relations, .. } => {
            for r in relations {
                let head_order = order_of(r.head.span, Some(r.head.entity_type));
                let tail_order = order_of(r.tail.span, Some(r.tail.entity_type));
                if head_order >= tail_order {
                    warnings.push(EncodingWarning::HeadAfterTail {
                        head: r.head.span,
                        tail: r.tail.span,
                        relation: r.relation,
                    });
                    continue;
                }
                match link_of[tail_order] {
                    None => link_of[tail_order] = Some((head_order, r.relation)),
                    Some((kept_head, kept_rel)) => {
                        // One labeling slot per right bracket: keep the
                        // nearest earlier head, lowest relation on ties.
                        let (keep, drop) = if head_order > kept_head
                            || (head_order == kept_head && r.relation < kept_rel)
                        {
                            ((head_order, r.relation), (kept_head, kept_rel))
                        } else {
                            ((kept_head, kept_rel), (head_order, r.relation))
                        };
                        link_of[tail_order] = Some(keep);
                        warnings.push(EncodingWarning::MultiLinkTail {
                            tail: r.tail.span,
                            dropped_head: mentions[drop.0].span,
                            relation: drop.1,
                        });
                    }
                }
            }
        }
        TaskStructure::Coref { partition } => {
            for chain in partition.chains() {
                let mut orders: Vec<usize> = chain.iter().map(|s| order_of(*s, None)).collect();
                orders.sort_unstable();
                for w in orders.windows(2) {
                    link_of[w[1]] = Some((w[0], 0));
                }
            }
        }
    }

    // Drive the prefix machine token by token.
    let mut st = PrefixState::new(d, schema, false);
    let mut group_triple_at_token: Vec<Option<usize>> = vec![None; d.len() + 1];
    // Right-bracket triple index per close order, filled as we emit.
    let mut right_triple_of: Vec<usize> = vec![usize::MAX; mentions.len()];
    let mut next_close = 0usize;
    for t in 0..d.len() {
        let opens = mentions.iter().filter(|m| m.span.start == t).count();
        if opens > 0 {
            st.apply(&ActionTriple::left(opens))?;
            group_triple_at_token[t] = Some(st.triples().len() - 1);
        }
        st.apply(&ActionTriple::copy())?;
        while next_close < mentions.len() && mentions[next_close].span.end == t {
            let m = &mentions[next_close];
            let b = group_triple_at_token[m.span.start].expect("group opened at span start");
            let z = match schema.kind {
                TaskKind::Ner => LabelAction::Entity {
                    entity_type: m.entity_type.unwrap(),
                },
                TaskKind::Ere => {
                    let link = link_of[next_close].map(|(head_order, relation)| EreLink {
                        antecedent: right_triple_of[head_order],
                        relation,
                    });
                    LabelAction::EreLabel {
                        entity_type: m.entity_type.unwrap(),
                        link,
                    }
                }
                TaskKind::Coref => LabelAction::CorefAntecedent {
                    antecedent: link_of[next_close]
                        .map(|(prev_order, _)| right_triple_of[prev_order]),
                },
            };
            st.apply(&ActionTriple::right(b, z))?;
            right_triple_of[next_close] = st.triples().len() - 1;
            next_close += 1;
        }
    }
    st.apply(&ActionTriple::copy())?; // end sentinel
    Ok((st.into_sequence(), warnings))
}

/// Reconstructs a structure from an action sequence. Unpaired left brackets
/// are dropped silently; malformed pairings or labels are errors. The output
/// always validates against the document and schema.
pub fn delinearize(
    seq: &ActionSequence,
    d: &Document,
    schema: &TaskSchema,
) -> Result<TaskStructure, CodecError> {
    struct Group {
        token: usize,
        multiplicity: usize,
        consumed: usize,
    }
    let mut groups: Vec<(usize, Group)> = Vec::new(); // (triple_idx, group)
    let mut cursor = 0usize;
    // (triple_idx, span, label) per right bracket.
    let mut closed: Vec<(usize, Span, LabelAction)> = Vec::new();

    for (i, t) in seq.triples.iter().enumerate() {
        match t.action {
            StructureAction::Copy => {
                cursor += 1;
                if cursor > d.len() + 1 {
                    return Err(CodecError::CursorOverrun { step: i });
                }
            }
            StructureAction::LeftBracketGroup(k) => {
                groups.push((
                    i,
                    Group {
                        token: cursor,
                        multiplicity: k.max(1),
                        consumed: 0,
                    },
                ));
            }
            StructureAction::RightBracket => {
                let b = t.pairing.ok_or(CodecError::MalformedPairing {
                    step: i,
                    detail: "right bracket without pairing index".into(),
                })?;
                let z = t.label.ok_or(CodecError::MalformedLabel {
                    step: i,
                    detail: "right bracket without label".into(),
                })?;
                let g = groups
                    .iter_mut()
                    .find(|(gi, _)| *gi == b)
                    .map(|(_, g)| g)
                    .ok_or_else(|| CodecError::MalformedPairing {
                        step: i,
                        detail: format!("pairing {b} is not a left-bracket step"),
                    })?;
                if g.consumed >= g.multiplicity {
                    return Err(CodecError::MalformedPairing {
                        step: i,
                        detail: format!("left-bracket group {b} has no unconsumed unit"),
                    });
                }
                if cursor == 0 || g.token > cursor - 1 || cursor - 1 >= d.len() {
                    return Err(CodecError::MalformedPairing {
                        step: i,
                        detail: format!("pairing {b} closes an empty or out-of-range span"),
                    });
                }
                g.consumed += 1;
                let span = Span::new(g.token, cursor - 1);
                validate_sequence_label(&z, schema, &closed, i)?;
                closed.push((i, span, z));
            }
        }
    }

    Ok(match schema.kind {
        TaskKind::Ner => {
            let mentions: BTreeSet<TypedMention> = closed
                .iter()
                .map(|(_, span, z)| match z {
                    LabelAction::Entity { entity_type } => TypedMention {
                        span: *span,
                        entity_type: *entity_type,
                    },
                    _ => unreachable!("label kind checked during the walk"),
                })
                .collect();
            TaskStructure::Ner { mentions }
        }
        TaskKind::Ere => {
            let mut mentions: BTreeSet<TypedMention> = BTreeSet::new();
            let mut by_triple: Vec<(usize, TypedMention)> = Vec::new();
            for (idx, span, z) in &closed {
                if let LabelAction::EreLabel { entity_type, .. } = z {
                    let m = TypedMention {
                        span: *span,
                        entity_type: *entity_type,
                    };
                    mentions.insert(m);
                    by_triple.push((*idx, m));
                }
            }
            let mention_at = |triple: usize| -> Option<TypedMention> {
                by_triple
                    .iter()
                    .find(|(i, _)| *i == triple)
                    .map(|(_, m)| *m)
            };
            let mut relations: BTreeSet<RelationTriple> = BTreeSet::new();
            for (idx, span, z) in &closed {
                if let LabelAction::EreLabel {
                    entity_type,
                    link: Some(link),
                } = z
                {
                    let head = mention_at(link.antecedent).expect("validated during the walk");
                    let tail = TypedMention {
                        span: *span,
                        entity_type: *entity_type,
                    };
                    if head == tail {
                        // A self link cannot form a relation; skip it.
                        let _ = idx;
                        continue;
                    }
                    relations.insert(RelationTriple {
                        head,
                        relation: link.relation,
                        tail,
                    });
                }
            }
            TaskStructure::Ere {
                mentions,
                relations,
            }
        }
        TaskKind::Coref => {
            // Identical spans are the same mention; links union span-wise
            // and chains are the transitive closure.
            let mut spans: Vec<Span> = Vec::new();
            let span_id = |s: Span, spans: &mut Vec<Span>| -> usize {
                match spans.iter().position(|x| *x == s) {
                    Some(i) => i,
                    None => {
                        spans.push(s);
                        spans.len() - 1
                    }
                }
            };
            let mut span_of_triple: Vec<(usize, usize)> = Vec::new(); // (triple_idx, span id)
            let mut links: Vec<(usize, usize)> = Vec::new();
            for (idx, span, z) in &closed {
                let sid = span_id(*span, &mut spans);
                if let LabelAction::CorefAntecedent {
                    antecedent: Some(m),
                } = z
                {
                    let ant_sid = span_of_triple
                        .iter()
                        .find(|(i, _)| i == m)
                        .map(|(_, s)| *s)
                        .expect("validated during the walk");
                    links.push((sid, ant_sid));
                }
                span_of_triple.push((*idx, sid));
            }
            let mut uf = UnionFind::new(spans.len());
            for (a, b) in links {
                uf.union(a, b);
            }
            let mut chains: Vec<BTreeSet<Span>> = Vec::new();
            let mut root_chain: Vec<Option<usize>> = vec![None; spans.len()];
            for (i, span) in spans.iter().enumerate() {
                let r = uf.find(i);
                let c = match root_chain[r] {
                    Some(c) => c,
                    None => {
                        chains.push(BTreeSet::new());
                        root_chain[r] = Some(chains.len() - 1);
                        chains.len() - 1
                    }
                };
                chains[c].insert(*span);
            }
            chains.retain(|c| c.len() >= 2);
            TaskStructure::Coref {
                partition: CorefPartition::new(chains),
            }
        }
    })
}

fn validate_sequence_label(
    z: &LabelAction,
    schema: &TaskSchema,
    closed: &[(usize, Span, LabelAction)],
    step: usize,
) -> Result<(), CodecError> {
    let bad = |detail: String| CodecError::MalformedLabel { step, detail };
    let check_antecedent = |m: usize| -> Result<(), CodecError> {
        if !closed.iter().any(|(i, _, _)| *i == m) {
            return Err(bad(format!(
                "antecedent {m} is not an earlier right bracket"
            )));
        }
        Ok(())
    };
    match (schema.kind, z) {
        (TaskKind::Ner, LabelAction::Entity { entity_type }) => {
            if *entity_type >= schema.entity_types.len() {
                return Err(bad(format!("entity type {entity_type} out of range")));
            }
        }
        (TaskKind::Ere, LabelAction::EreLabel { entity_type, link }) => {
            if *entity_type >= schema.entity_types.len() {
                return Err(bad(format!("entity type {entity_type} out of range")));
            }
            if let Some(EreLink {
                antecedent,
                relation,
            }) = link
            {
                if *relation >= schema.relation_types.len() {
                    return Err(bad(format!("relation {relation} out of range")));
                }
                check_antecedent(*antecedent)?;
            }
        }
        (TaskKind::Coref, LabelAction::CorefAntecedent { antecedent }) => {
            if let Some(m) = antecedent {
                check_antecedent(*m)?;
            }
        }
        (kind, other) => return Err(bad(format!("label {other:?} does not fit task {kind:?}"))),
    }
    Ok(())
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}
