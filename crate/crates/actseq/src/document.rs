//! Core domain types shared by every stage of the pipeline: documents,
//! token spans, typed mentions, relation triples, and coreference chains.
//!
//! All types are immutable values after construction and safe to share
//! across threads.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{TaskKind, TaskSchema};

/// A tokenized document with sentence boundaries. The conditioning input for
/// the scorer and the coordinate system for every span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub tokens: Vec<String>,
    /// Half-open `[start, end)` token ranges; sorted, non-overlapping,
    /// contiguous, and covering `0..tokens.len()` exactly.
    pub sentence_bounds: Vec<(usize, usize)>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DocumentError {
    #[error("sentence bounds {0:?} do not partition 0..{1}")]
    BadSentenceBounds(Vec<(usize, usize)>, usize),
}

impl Document {
    pub fn new(
        doc_id: impl Into<String>,
        tokens: Vec<String>,
        sentence_bounds: Vec<(usize, usize)>,
    ) -> Result<Self, DocumentError> {
        let mut expect = 0usize;
        for &(s, e) in &sentence_bounds {
            if s != expect || e <= s {
                return Err(DocumentError::BadSentenceBounds(
                    sentence_bounds,
                    tokens.len(),
                ));
            }
            expect = e;
        }
        if expect != tokens.len() {
            return Err(DocumentError::BadSentenceBounds(
                sentence_bounds,
                tokens.len(),
            ));
        }
        Ok(Document {
            doc_id: doc_id.into(),
            tokens,
            sentence_bounds,
        })
    }

    /// A document whose tokens form a single sentence.
    pub fn single_sentence(doc_id: impl Into<String>, tokens: Vec<String>) -> Self {
        let n = tokens.len();
        let bounds = if n == 0 { vec![] } else { vec![(0, n)] };
        Document {
            doc_id: doc_id.into(),
            tokens,
            sentence_bounds: bounds,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Index of the sentence containing `token`, if in range.
    pub fn sentence_of(&self, token: usize) -> Option<usize> {
        self.sentence_bounds
            .iter()
            .position(|&(s, e)| token >= s && token < e)
    }
}

/// Inclusive token span: `start` and `end` are the first and last token of
/// the span, matching the bracket actions that mark them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start) + 1
    }

    /// Inclusive spans always cover at least one token.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// True iff the inclusive index ranges intersect. Sharing a boundary
    /// token counts as overlap.
    pub fn overlaps(&self, other: &Span) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

/// A span labeled with an entity type (index into the schema's entity list).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TypedMention {
    pub span: Span,
    pub entity_type: usize,
}

/// A directed relation between two typed mentions.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RelationTriple {
    pub head: TypedMention,
    pub relation: usize,
    pub tail: TypedMention,
}

/// A set of coreference chains. Chains are canonicalized (sorted by their
/// smallest mention) so partitions compare structurally.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct CorefPartition {
    chains: Vec<BTreeSet<Span>>,
}

impl CorefPartition {
    pub fn new(chains: Vec<BTreeSet<Span>>) -> Self {
        let mut chains: Vec<BTreeSet<Span>> =
            chains.into_iter().filter(|c| !c.is_empty()).collect();
        chains.sort_by(|a, b| a.iter().next().cmp(&b.iter().next()));
        CorefPartition { chains }
    }

    pub fn chains(&self) -> &[BTreeSet<Span>] {
        &self.chains
    }

    /// All mentions across all chains.
    pub fn mentions(&self) -> BTreeSet<Span> {
        self.chains.iter().flatten().copied().collect()
    }
}

/// The decoded object for one document, discriminated by task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "lowercase")]
pub enum TaskStructure {
    Ner {
        mentions: BTreeSet<TypedMention>,
    },
    Ere {
        mentions: BTreeSet<TypedMention>,
        relations: BTreeSet<RelationTriple>,
    },
    Coref {
        partition: CorefPartition,
    },
}

impl TaskStructure {
    pub fn kind(&self) -> TaskKind {
        match self {
            TaskStructure::Ner { .. } => TaskKind::Ner,
            TaskStructure::Ere { .. } => TaskKind::Ere,
            TaskStructure::Coref { .. } => TaskKind::Coref,
        }
    }

    pub fn empty(kind: TaskKind) -> Self {
        match kind {
            TaskKind::Ner => TaskStructure::Ner {
                mentions: BTreeSet::new(),
            },
            TaskKind::Ere => TaskStructure::Ere {
                mentions: BTreeSet::new(),
                relations: BTreeSet::new(),
            },
            TaskKind::Coref => TaskStructure::Coref {
                partition: CorefPartition::default(),
            },
        }
    }
}

/// One well-formedness violation found by [`validate_structure`]. Violations
/// are data, not failures.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("span {0:?} out of range for document of {1} tokens")]
    SpanOutOfRange(Span, usize),
    #[error("span {0:?} has start after end")]
    InvertedSpan(Span),
    #[error("entity type index {0} outside schema ({1} types)")]
    UnknownEntityType(usize, usize),
    #[error("relation index {0} outside schema ({1} relations)")]
    UnknownRelation(usize, usize),
    #[error("relation with identical head and tail {0:?}")]
    SelfRelation(TypedMention),
    #[error("relation argument {0:?} missing from the mention set")]
    DanglingRelationArgument(TypedMention),
    #[error("coreference chain {0:?} has fewer than two mentions")]
    SingletonChain(Vec<Span>),
    #[error("mention {0:?} appears in more than one chain")]
    OverlappingChains(Span),
    #[error("structure task {0:?} does not match schema task {1:?}")]
    TaskMismatch(TaskKind, TaskKind),
}

fn check_span(span: &Span, doc: &Document, out: &mut Vec<Violation>) {
    if span.start > span.end {
        out.push(Violation::InvertedSpan(*span));
    } else if span.end >= doc.len() {
        out.push(Violation::SpanOutOfRange(*span, doc.len()));
    }
}

fn check_mention(m: &TypedMention, doc: &Document, schema: &TaskSchema, out: &mut Vec<Violation>) {
    check_span(&m.span, doc, out);
    if m.entity_type >= schema.entity_types.len() {
        out.push(Violation::UnknownEntityType(
            m.entity_type,
            schema.entity_types.len(),
        ));
    }
}

/// Checks every span and type invariant of `s` against `d` and `schema`.
/// Returns one entry per violation; empty means well formed.
pub fn validate_structure(s: &TaskStructure, d: &Document, schema: &TaskSchema) -> Vec<Violation> {
    let mut out = Vec::new();
    if s.kind() != schema.kind {
        out.push(Violation::TaskMismatch(s.kind(), schema.kind));
        return out;
    }
    match s {
        TaskStructure::Ner { mentions } => {
            for m in mentions {
                check_mention(m, d, schema, &mut out);
            }
        }
        TaskStructure::Ere {
            mentions,
            relations,
        } => {
            for m in mentions {
                check_mention(m, d, schema, &mut out);
            }
            for r in relations {
                if r.relation >= schema.relation_types.len() {
                    out.push(Violation::UnknownRelation(
                        r.relation,
                        schema.relation_types.len(),
                    ));
                }
                if r.head == r.tail {
                    out.push(Violation::SelfRelation(r.head.clone()));
                }
                for arg in [&r.head, &r.tail] {
                    if !mentions.contains(arg) {
                        out.push(Violation::DanglingRelationArgument(arg.clone()));
                    }
                }
            }
        }
        TaskStructure::Coref { partition } => {
            let mut seen: BTreeSet<Span> = BTreeSet::new();
            for chain in partition.chains() {
                if chain.len() < 2 {
                    out.push(Violation::SingletonChain(chain.iter().copied().collect()));
                }
                for span in chain {
                    check_span(span, d, &mut out);
                    if !seen.insert(*span) {
                        out.push(Violation::OverlappingChains(*span));
                    }
                }
            }
        }
    }
    out
}
