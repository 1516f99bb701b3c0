//! The JSON-lines corpus format: one document per line with token-indexed
//! annotations keyed by task. Label names in the file map to schema indices
//! on read and back to names on write.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::document::{
    CorefPartition, Document, RelationTriple, Span, TaskStructure, TypedMention,
};
use crate::schema::{TaskKind, TaskSchema};

use super::{AnnotatedDocument, CorpusError};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MentionRecord {
    pub start: usize,
    pub end: usize,
    pub entity_type: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelationRecord {
    pub head: MentionRecord,
    pub relation: String,
    pub tail: MentionRecord,
}

/// One corpus line. `mentions`/`relations`/`chains` are present according to
/// the task; `meta` is opaque provenance carried through unchanged; `probs`
/// is the optional per-step probability trace attached to predictions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Record {
    pub doc_id: String,
    pub tokens: Vec<String>,
    pub sentence_bounds: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mentions: Option<Vec<MentionRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relations: Option<Vec<RelationRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chains: Option<Vec<Vec<(usize, usize)>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
}

fn mention_from_record(r: &MentionRecord, schema: &TaskSchema) -> Result<TypedMention, String> {
    let entity_type = schema
        .entity_index(&r.entity_type)
        .ok_or_else(|| format!("unknown entity type {:?}", r.entity_type))?;
    Ok(TypedMention {
        span: Span::new(r.start, r.end),
        entity_type,
    })
}

fn mention_to_record(m: &TypedMention, schema: &TaskSchema) -> MentionRecord {
    MentionRecord {
        start: m.span.start,
        end: m.span.end,
        entity_type: schema.entity_types[m.entity_type].clone(),
    }
}

impl Record {
    pub fn from_annotated(d: &AnnotatedDocument, schema: &TaskSchema) -> Self {
        let mut rec = Record {
            doc_id: d.doc.doc_id.clone(),
            tokens: d.doc.tokens.clone(),
            sentence_bounds: d.doc.sentence_bounds.clone(),
            mentions: None,
            relations: None,
            chains: None,
            meta: d.provenance.clone(),
            probs: None,
        };
        match &d.structure {
            TaskStructure::Ner { mentions } => {
                rec.mentions = Some(
                    mentions
                        .iter()
                        .map(|m| mention_to_record(m, schema))
                        .collect(),
                );
            }
            TaskStructure::Ere {
                mentions,
                relations,
            } => {
                rec.mentions = Some(
                    mentions
                        .iter()
                        .map(|m| mention_to_record(m, schema))
                        .collect(),
                );
                rec.relations = Some(
                    relations
                        .iter()
                        .map(|r| RelationRecord {
                            head: mention_to_record(&r.head, schema),
                            relation: schema.relation_types[r.relation].clone(),
                            tail: mention_to_record(&r.tail, schema),
                        })
                        .collect(),
                );
            }
            TaskStructure::Coref { partition } => {
                rec.chains = Some(
                    partition
                        .chains()
                        .iter()
                        .map(|c| c.iter().map(|s| (s.start, s.end)).collect())
                        .collect(),
                );
            }
        }
        rec
    }

    pub fn into_annotated(self, schema: &TaskSchema) -> Result<AnnotatedDocument, String> {
        let doc = Document::new(self.doc_id, self.tokens, self.sentence_bounds)
            .map_err(|e| e.to_string())?;
        let structure = match schema.kind {
            TaskKind::Ner => {
                let mentions: BTreeSet<TypedMention> = self
                    .mentions
                    .unwrap_or_default()
                    .iter()
                    .map(|m| mention_from_record(m, schema))
                    .collect::<Result<_, _>>()?;
                TaskStructure::Ner { mentions }
            }
            TaskKind::Ere => {
                let mentions: BTreeSet<TypedMention> = self
                    .mentions
                    .unwrap_or_default()
                    .iter()
                    .map(|m| mention_from_record(m, schema))
                    .collect::<Result<_, _>>()?;
                let relations: BTreeSet<RelationTriple> = self
                    .relations
                    .unwrap_or_default()
                    .iter()
                    .map(|r| {
                        let relation = schema
                            .relation_index(&r.relation)
                            .ok_or_else(|| format!("unknown relation {:?}", r.relation))?;
                        Ok(RelationTriple {
                            head: mention_from_record(&r.head, schema)?,
                            relation,
                            tail: mention_from_record(&r.tail, schema)?,
                        })
                    })
                    .collect::<Result<_, String>>()?;
                TaskStructure::Ere {
                    mentions,
                    relations,
                }
            }
            TaskKind::Coref => {
                let chains: Vec<BTreeSet<Span>> = self
                    .chains
                    .unwrap_or_default()
                    .iter()
                    .map(|c| c.iter().map(|&(s, e)| Span::new(s, e)).collect())
                    .collect();
                TaskStructure::Coref {
                    partition: CorefPartition::new(chains),
                }
            }
        };
        Ok(AnnotatedDocument {
            doc,
            structure,
            provenance: self.meta,
        })
    }
}

/// Reads a corpus, validating every record. Errors carry the line number.
pub fn read_jsonl(path: &Path, schema: &TaskSchema) -> Result<Vec<AnnotatedDocument>, CorpusError> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(line).map_err(|e| CorpusError::Line {
            line: i + 1,
            message: e.to_string(),
        })?;
        let annotated = record
            .into_annotated(schema)
            .map_err(|message| CorpusError::Line {
                line: i + 1,
                message,
            })?;
        let violations =
            crate::document::validate_structure(&annotated.structure, &annotated.doc, schema);
        if !violations.is_empty() {
            return Err(CorpusError::Line {
                line: i + 1,
                message: violations
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join("; "),
            });
        }
        out.push(annotated);
    }
    Ok(out)
}

pub fn write_jsonl(
    path: &Path,
    docs: &[AnnotatedDocument],
    schema: &TaskSchema,
) -> Result<(), CorpusError> {
    let mut buf = String::new();
    for d in docs {
        let record = Record::from_annotated(d, schema);
        buf.push_str(&serde_json::to_string(&record).expect("record serializes"));
        buf.push('\n');
    }
    fs::write(path, buf)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::synthetic::{generate_synthetic, SyntheticSpec};
    use crate::schema::TaskKind;

    fn schemas() -> Vec<TaskSchema> {
        vec![
            TaskSchema::ner(vec!["PER".into(), "LOC".into()]).unwrap(),
            TaskSchema::ere(
                vec!["Peop".into(), "Org".into()],
                vec!["Kill".into(), "Work".into()],
            )
            .unwrap(),
            TaskSchema::coref(),
        ]
    }

    #[test]
    fn round_trip_preserves_corpus() {
        let dir = tempfile::tempdir().unwrap();
        for schema in schemas() {
            let spec = SyntheticSpec {
                documents: 20,
                seed: 5,
                ..SyntheticSpec::default()
            };
            let docs = generate_synthetic(&spec, &schema).unwrap();
            let path = dir.path().join(format!("{}.jsonl", schema.kind.as_str()));
            write_jsonl(&path, &docs, &schema).unwrap();
            let back = read_jsonl(&path, &schema).unwrap();
            assert_eq!(back, docs);
        }
    }

    #[test]
    fn out_of_range_chain_is_a_line_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(
            &path,
            r#"{"doc_id":"x","tokens":["a","b"],"sentence_bounds":[[0,2]],"chains":[[[0,0],[5,5]]]}"#,
        )
        .unwrap();
        let schema = TaskSchema::coref();
        match read_jsonl(&path, &schema) {
            Err(CorpusError::Line { line: 1, .. }) => {}
            other => panic!("expected line error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_label_is_a_line_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(
            &path,
            "{\"doc_id\":\"x\",\"tokens\":[\"a\"],\"sentence_bounds\":[[0,1]],\"mentions\":[{\"start\":0,\"end\":0,\"entity_type\":\"NOPE\"}]}\n",
        )
        .unwrap();
        let schema = TaskSchema::ner(vec!["PER".into()]).unwrap();
        assert!(matches!(
            read_jsonl(&path, &schema),
            Err(CorpusError::Line { line: 1, .. })
        ));
    }

    #[test]
    fn meta_survives_round_trip() {
        let schema = TaskSchema::ner(vec!["PER".into()]).unwrap();
        let d = AnnotatedDocument {
            doc: Document::single_sentence("d", vec!["a".into()]),
            structure: TaskStructure::Ner {
                mentions: Default::default(),
            },
            provenance: Some(serde_json::json!({"speaker": "s1"})),
        };
        let rec = Record::from_annotated(&d, &schema);
        let back = rec.into_annotated(&schema).unwrap();
        assert_eq!(back.provenance, d.provenance);
        assert_eq!(TaskKind::Ner, back.structure.kind());
    }

    #[test]
    fn document_count_is_conserved() {
        let dir = tempfile::tempdir().unwrap();
        let schema = TaskSchema::coref();
        let spec = SyntheticSpec {
            documents: 48,
            seed: 9,
            ..SyntheticSpec::default()
        };
        let docs = generate_synthetic(&spec, &schema).unwrap();
        let path = dir.path().join("c.jsonl");
        write_jsonl(&path, &docs, &schema).unwrap();
        assert_eq!(read_jsonl(&path, &schema).unwrap().len(), 48);
    }
}
