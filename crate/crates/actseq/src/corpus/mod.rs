//! Dataset ingestion, synthetic corpus generation, and document chunking.

pub mod conll;
pub mod jsonl;
pub mod synthetic;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::document::{
    validate_structure, CorefPartition, Document, RelationTriple, Span, TaskStructure,
};
use crate::schema::TaskSchema;

pub use conll::read_conll_columns;
pub use jsonl::{read_jsonl, write_jsonl};
pub use synthetic::{generate_synthetic, SyntheticSpec};

/// Default training-time chunk budget for long documents.
pub const DEFAULT_CHUNK_WORDS: usize = 2048;

/// A document paired with its gold structure and a provenance note.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedDocument {
    pub doc: Document,
    pub structure: TaskStructure,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("generation error: {0}")]
    Generation(String),
    #[error("sentence of {len} words exceeds the {max} word chunk limit")]
    SentenceTooLong { len: usize, max: usize },
}

/// An annotation lost while chunking a document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChunkWarning {
    MentionCrossesChunks {
        doc_id: String,
        span: Span,
    },
    RelationCrossesChunks {
        doc_id: String,
        head: Span,
        tail: Span,
    },
    ChainFragmentDropped {
        doc_id: String,
        mentions: Vec<Span>,
    },
}

/// Splits a document into chunks of at most `max_words` tokens, on sentence
/// boundaries only. Token indices are re-based per chunk. Annotations that
/// cross a chunk boundary are dropped with a warning; coreference chains
/// keep their per-chunk fragments when at least two mentions remain.
pub fn chunk_document(
    d: &AnnotatedDocument,
    max_words: usize,
) -> Result<(Vec<AnnotatedDocument>, Vec<ChunkWarning>), CorpusError> {
    for &(s, e) in &d.doc.sentence_bounds {
        if e - s > max_words {
            return Err(CorpusError::SentenceTooLong {
                len: e - s,
                max: max_words,
            });
        }
    }
    if d.doc.len() <= max_words {
        return Ok((vec![d.clone()], vec![]));
    }

    // Greedy packing of whole sentences.
    let mut chunk_ranges: Vec<(usize, usize)> = Vec::new(); // token ranges
    let mut chunk_sentences: Vec<Vec<(usize, usize)>> = Vec::new();
    for &(s, e) in &d.doc.sentence_bounds {
        match chunk_ranges.last_mut() {
            Some((cs, ce)) if e - *cs <= max_words => {
                *ce = e;
                chunk_sentences.last_mut().unwrap().push((s, e));
            }
            _ => {
                chunk_ranges.push((s, e));
                chunk_sentences.push(vec![(s, e)]);
            }
        }
    }

    let mut warnings = Vec::new();
    let chunk_of = |span: &Span| -> Option<usize> {
        chunk_ranges
            .iter()
            .position(|&(cs, ce)| span.start >= cs && span.end < ce)
    };
    let rebase = |span: &Span, chunk: usize| -> Span {
        let base = chunk_ranges[chunk].0;
        Span::new(span.start - base, span.end - base)
    };

    let mut out = Vec::new();
    for (ci, &(cs, ce)) in chunk_ranges.iter().enumerate() {
        let tokens = d.doc.tokens[cs..ce].to_vec();
        let bounds: Vec<(usize, usize)> = chunk_sentences[ci]
            .iter()
            .map(|&(s, e)| (s - cs, e - cs))
            .collect();
        let doc = Document::new(format!("{}#chunk{}", d.doc.doc_id, ci), tokens, bounds)
            .expect("chunk bounds partition the chunk");

        let structure = match &d.structure {
            TaskStructure::Ner { mentions } => TaskStructure::Ner {
                mentions: mentions
                    .iter()
                    .filter(|m| chunk_of(&m.span) == Some(ci))
                    .map(|m| crate::document::TypedMention {
                        span: rebase(&m.span, ci),
                        entity_type: m.entity_type,
                    })
                    .collect(),
            },
            TaskStructure::Ere {
                mentions,
                relations,
            } => {
                let kept_relations = relations
                    .iter()
                    .filter(|r| {
                        let ok = chunk_of(&r.head.span) == Some(ci)
                            && chunk_of(&r.tail.span) == Some(ci);
                        ok
                    })
                    .map(|r| RelationTriple {
                        head: crate::document::TypedMention {
                            span: rebase(&r.head.span, ci),
                            entity_type: r.head.entity_type,
                        },
                        relation: r.relation,
                        tail: crate::document::TypedMention {
                            span: rebase(&r.tail.span, ci),
                            entity_type: r.tail.entity_type,
                        },
                    })
                    .collect();
                TaskStructure::Ere {
                    mentions: mentions
                        .iter()
                        .filter(|m| chunk_of(&m.span) == Some(ci))
                        .map(|m| crate::document::TypedMention {
                            span: rebase(&m.span, ci),
                            entity_type: m.entity_type,
                        })
                        .collect(),
                    relations: kept_relations,
                }
            }
            TaskStructure::Coref { partition } => {
                let mut chains = Vec::new();
                for chain in partition.chains() {
                    let fragment: std::collections::BTreeSet<Span> = chain
                        .iter()
                        .filter(|s| chunk_of(s) == Some(ci))
                        .map(|s| rebase(s, ci))
                        .collect();
                    if fragment.len() >= 2 {
                        chains.push(fragment);
                    } else if !fragment.is_empty() {
                        warnings.push(ChunkWarning::ChainFragmentDropped {
                            doc_id: doc.doc_id.clone(),
                            mentions: fragment.into_iter().collect(),
                        });
                    }
                }
                TaskStructure::Coref {
                    partition: CorefPartition::new(chains),
                }
            }
        };

        out.push(AnnotatedDocument {
            doc,
            structure,
            provenance: d.provenance.clone(),
        });
    }

    // Warnings for annotations that landed in no chunk.
    match &d.structure {
        TaskStructure::Ner { mentions } => {
            for m in mentions {
                if chunk_of(&m.span).is_none() {
                    warnings.push(ChunkWarning::MentionCrossesChunks {
                        doc_id: d.doc.doc_id.clone(),
                        span: m.span,
                    });
                }
            }
        }
        TaskStructure::Ere {
            mentions,
            relations,
        } => {
            for m in mentions {
                if chunk_of(&m.span).is_none() {
                    warnings.push(ChunkWarning::MentionCrossesChunks {
                        doc_id: d.doc.doc_id.clone(),
                        span: m.span,
                    });
                }
            }
            for r in relations {
                let hc = chunk_of(&r.head.span);
                let tc = chunk_of(&r.tail.span);
                if hc.is_none() || tc.is_none() || hc != tc {
                    warnings.push(ChunkWarning::RelationCrossesChunks {
                        doc_id: d.doc.doc_id.clone(),
                        head: r.head.span,
                        tail: r.tail.span,
                    });
                }
            }
        }
        TaskStructure::Coref { partition } => {
            for chain in partition.chains() {
                for s in chain {
                    if chunk_of(s).is_none() {
                        warnings.push(ChunkWarning::MentionCrossesChunks {
                            doc_id: d.doc.doc_id.clone(),
                            span: *s,
                        });
                    }
                }
            }
        }
    }

    Ok((out, warnings))
}

/// Validates a corpus against its document and schema, locating the
/// offending record on failure.
pub fn validate_corpus(docs: &[AnnotatedDocument], schema: &TaskSchema) -> Result<(), CorpusError> {
    for (i, d) in docs.iter().enumerate() {
        let violations = validate_structure(&d.structure, &d.doc, schema);
        if !violations.is_empty() {
            return Err(CorpusError::Line {
                line: i + 1,
                message: format!(
                    "document {} has invalid structure: {}",
                    d.doc.doc_id,
                    violations
                        .iter()
                        .map(|v| v.to_string())
                        .collect::<Vec<_>>()
                        .join("; ")
                ),
            });
        }
    }
    Ok(())
}
