//! Reader for the BIO column format: one token per line with its tag in the
//! last column, blank lines between sentences, and `-DOCSTART-` lines
//! between documents.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use crate::document::{Document, Span, TaskStructure, TypedMention};
use crate::schema::TaskSchema;

use super::{AnnotatedDocument, CorpusError};

/// A tag-transition repair performed while decoding, e.g. an `I-` tag with
/// no open span of that type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepairWarning {
    pub line: usize,
    pub message: String,
}

struct DocBuilder {
    doc_id: String,
    tokens: Vec<String>,
    bounds: Vec<(usize, usize)>,
    sentence_start: usize,
    mentions: BTreeSet<TypedMention>,
    open: Option<(usize, usize)>, // (start token, entity type)
}

impl DocBuilder {
    fn new(doc_id: String) -> Self {
        DocBuilder {
            doc_id,
            tokens: Vec::new(),
            bounds: Vec::new(),
            sentence_start: 0,
            mentions: BTreeSet::new(),
            open: None,
        }
    }

    fn close_open(&mut self) {
        if let Some((start, ty)) = self.open.take() {
            self.mentions.insert(TypedMention {
                span: Span::new(start, self.tokens.len() - 1),
                entity_type: ty,
            });
        }
    }

    fn end_sentence(&mut self) {
        self.close_open();
        if self.tokens.len() > self.sentence_start {
            self.bounds.push((self.sentence_start, self.tokens.len()));
            self.sentence_start = self.tokens.len();
        }
    }

    fn finish(mut self) -> Option<AnnotatedDocument> {
        self.end_sentence();
        if self.tokens.is_empty() {
            return None;
        }
        let doc = Document::new(self.doc_id, self.tokens, self.bounds)
            .expect("builder maintains contiguous bounds");
        Some(AnnotatedDocument {
            doc,
            structure: TaskStructure::Ner {
                mentions: self.mentions,
            },
            provenance: None,
        })
    }
}

/// Decodes a BIO-tagged file into typed-mention documents. Malformed
/// transitions (an `I-` continuing nothing, or continuing a different type)
/// are repaired by opening a new span, and each repair is reported.
pub fn read_conll_columns(
    path: &Path,
    schema: &TaskSchema,
) -> Result<(Vec<AnnotatedDocument>, Vec<RepairWarning>), CorpusError> {
    let text = fs::read_to_string(path)?;
    let mut docs = Vec::new();
    let mut warnings = Vec::new();
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or("doc".into());
    let mut builder = DocBuilder::new(format!("{stem}-0"));

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            builder.end_sentence();
            continue;
        }
        let mut cols = line.split_whitespace();
        let token = cols.next().expect("non-empty line has a first column");
        if token == "-DOCSTART-" {
            if let Some(done) = std::mem::replace(
                &mut builder,
                DocBuilder::new(format!("{stem}-{}", docs.len() + 1)),
            )
            .finish()
            {
                docs.push(done);
            }
            continue;
        }
        let tag = cols.last().unwrap_or(token);

        // An open span ends at the previous token, so transitions are
        // resolved before the current token is appended.
        match tag {
            "O" => {
                builder.close_open();
                builder.tokens.push(token.to_string());
            }
            _ => {
                let (prefix, label) = tag.split_once('-').ok_or_else(|| CorpusError::Line {
                    line: lineno + 1,
                    message: format!("tag {tag:?} is neither O nor PREFIX-LABEL"),
                })?;
                let ty = schema.entity_index(label).ok_or_else(|| {
                    CorpusError::Schema(format!(
                        "unknown tag label {label:?} at line {}",
                        lineno + 1
                    ))
                })?;
                match prefix {
                    "B" => {
                        builder.close_open();
                        builder.tokens.push(token.to_string());
                        builder.open = Some((builder.tokens.len() - 1, ty));
                    }
                    "I" => match builder.open {
                        Some((_, open_ty)) if open_ty == ty => {
                            builder.tokens.push(token.to_string());
                        }
                        _ => {
                            warnings.push(RepairWarning {
                                line: lineno + 1,
                                message: format!(
                                    "I-{label} without a matching open span; started a new span"
                                ),
                            });
                            builder.close_open();
                            builder.tokens.push(token.to_string());
                            builder.open = Some((builder.tokens.len() - 1, ty));
                        }
                    },
                    _ => {
                        return Err(CorpusError::Line {
                            line: lineno + 1,
                            message: format!("unknown tag prefix {prefix:?}"),
                        })
                    }
                }
            }
        }
    }
    if let Some(done) = builder.finish() {
        docs.push(done);
    }
    Ok((docs, warnings))
}
