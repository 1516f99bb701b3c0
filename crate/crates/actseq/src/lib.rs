//! Structured prediction as constrained action sequences.
//!
//! Span-based linguistic structures (typed mentions, relation triples,
//! coreference chains) are encoded as sequences of structure-building
//! actions: copy the next input token, open a left-bracket group, or close a
//! span with a right bracket that names its paired left bracket and carries
//! a task-specific label. A compact encoder-decoder scores, at every step, a
//! dynamic candidate set derived from the history, so greedy decoding can
//! only ever produce well-formed structures.
//!
//! The crate is organized around that pipeline:
//!
//! - [`document`]: documents, spans, mentions, chains, validation.
//! - [`schema`]: task label spaces and the per-step labeling choice set.
//! - [`codec`]: structure <-> action-sequence conversion and candidate sets.
//! - [`model`]: the trainable scorer (alphabet, network, training, gradient
//!   checking).
//! - [`decoder`]: greedy constrained decoding.
//! - [`metrics`]: entity/relation micro P-R-F1 and the MUC, B³ and CEAF
//!   coreference scores.
//! - [`corpus`]: JSON-lines and BIO column readers, a synthetic corpus
//!   generator, and sentence-respecting chunking.
//! - [`cli`]: the command-line entry points (`encode`, `decode`, `train`,
//!   `predict`, `evaluate`, `analyze`, `gradcheck`).
//!
//! See the `examples/` directory for one runnable walkthrough per major
//! capability.

pub mod cli;
pub mod codec;
pub mod corpus;
pub mod decoder;
pub mod document;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod num;
pub mod schema;
pub mod tape;

pub use codec::{
    candidate_actions, delinearize, linearize, verbalize, ActionSequence, ActionTriple,
    CandidateSet, StructureAction,
};
pub use document::{
    validate_structure, CorefPartition, Document, RelationTriple, Span, TaskStructure, TypedMention,
};
pub use schema::{LabelAction, TaskKind, TaskSchema};
