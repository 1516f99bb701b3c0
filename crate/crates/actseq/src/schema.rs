//! Task parameterizations: the label alphabets for each supported task and
//! the construction rule for the per-step span-labeling choice set.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{ActionTriple, StructureAction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Ner,
    Ere,
    Coref,
}

impl TaskKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TaskKind::Ner => "ner",
            TaskKind::Ere => "ere",
            TaskKind::Coref => "coref",
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SchemaError {
    #[error("task {0:?} requires a non-empty entity type list")]
    MissingEntityTypes(TaskKind),
    #[error("task {0:?} requires a non-empty relation list")]
    MissingRelationTypes(TaskKind),
    #[error("task {0:?} does not use relation types")]
    UnexpectedRelationTypes(TaskKind),
    #[error("duplicate label {0:?}")]
    DuplicateLabel(String),
    #[error("symmetric relation {0:?} not in the relation list")]
    UnknownSymmetricRelation(String),
}

/// Label spaces for one task. Orderings are fixed at construction and define
/// the label indices used by the scorer heads, so a schema file must not be
/// reordered between training and decoding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSchema {
    pub kind: TaskKind,
    #[serde(default)]
    pub entity_types: Vec<String>,
    #[serde(default)]
    pub relation_types: Vec<String>,
    /// Relation labels whose argument order is immaterial for evaluation.
    #[serde(default)]
    pub symmetric_relations: Vec<String>,
}

impl TaskSchema {
    pub fn new(
        kind: TaskKind,
        entity_types: Vec<String>,
        relation_types: Vec<String>,
        symmetric_relations: Vec<String>,
    ) -> Result<Self, SchemaError> {
        match kind {
            TaskKind::Ner | TaskKind::Ere => {
                if entity_types.is_empty() {
                    return Err(SchemaError::MissingEntityTypes(kind));
                }
            }
            TaskKind::Coref => {}
        }
        match kind {
            TaskKind::Ere => {
                if relation_types.is_empty() {
                    return Err(SchemaError::MissingRelationTypes(kind));
                }
            }
            TaskKind::Ner | TaskKind::Coref => {
                if !relation_types.is_empty() {
                    return Err(SchemaError::UnexpectedRelationTypes(kind));
                }
            }
        }
        for list in [&entity_types, &relation_types] {
            for (i, l) in list.iter().enumerate() {
                if list[..i].contains(l) {
                    return Err(SchemaError::DuplicateLabel(l.clone()));
                }
            }
        }
        for s in &symmetric_relations {
            if !relation_types.contains(s) {
                return Err(SchemaError::UnknownSymmetricRelation(s.clone()));
            }
        }
        Ok(TaskSchema {
            kind,
            entity_types,
            relation_types,
            symmetric_relations,
        })
    }

    pub fn ner(entity_types: Vec<String>) -> Result<Self, SchemaError> {
        Self::new(TaskKind::Ner, entity_types, vec![], vec![])
    }

    pub fn ere(
        entity_types: Vec<String>,
        relation_types: Vec<String>,
    ) -> Result<Self, SchemaError> {
        Self::new(TaskKind::Ere, entity_types, relation_types, vec![])
    }

    pub fn coref() -> Self {
        TaskSchema {
            kind: TaskKind::Coref,
            entity_types: vec![],
            relation_types: vec![],
            symmetric_relations: vec![],
        }
    }

    /// Whether the labeling set carries the distinguished "no link" choice.
    pub fn allow_epsilon(&self) -> bool {
        matches!(self.kind, TaskKind::Ere | TaskKind::Coref)
    }

    pub fn entity_index(&self, name: &str) -> Option<usize> {
        self.entity_types.iter().position(|t| t == name)
    }

    pub fn relation_index(&self, name: &str) -> Option<usize> {
        self.relation_types.iter().position(|t| t == name)
    }

    pub fn is_symmetric(&self, relation: usize) -> bool {
        self.relation_types
            .get(relation)
            .map(|name| self.symmetric_relations.contains(name))
            .unwrap_or(false)
    }

    /// Stable content hash used to pair checkpoints with the schema they
    /// were trained against.
    pub fn fingerprint(&self) -> String {
        let canon = format!(
            "{}|{}|{}|{}",
            self.kind.as_str(),
            self.entity_types.join(","),
            self.relation_types.join(","),
            self.symmetric_relations.join(","),
        );
        // FNV-1a, 64 bit.
        let mut h: u64 = 0xcbf29ce484222325;
        for b in canon.as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }

    pub fn from_json_str(s: &str) -> Result<Self, String> {
        let raw: TaskSchema = serde_json::from_str(s).map_err(|e| e.to_string())?;
        TaskSchema::new(
            raw.kind,
            raw.entity_types,
            raw.relation_types,
            raw.symmetric_relations,
        )
        .map_err(|e| e.to_string())
    }
}

/// The task-specific labeling attached to a right bracket: an entity type,
/// an entity type plus an optional relation link, or a coreference
/// antecedent. Link targets are indices of earlier right-bracket steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelAction {
    Entity {
        entity_type: usize,
    },
    EreLabel {
        entity_type: usize,
        link: Option<EreLink>,
    },
    CorefAntecedent {
        antecedent: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EreLink {
    /// Step index of the earlier right bracket that closes the linked span.
    pub antecedent: usize,
    pub relation: usize,
}

/// The ordered labeling choices for the step following `history`.
///
/// Ordering is deterministic: the no-link block first, then antecedent steps
/// ascending, with labels in schema order inside each block.
pub fn labeling_set(schema: &TaskSchema, history: &[ActionTriple]) -> Vec<LabelAction> {
    let rights: Vec<usize> = history
        .iter()
        .enumerate()
        .filter(|(_, t)| matches!(t.action, StructureAction::RightBracket))
        .map(|(i, _)| i)
        .collect();
    labeling_set_for_rights(schema, &rights)
}

/// Same as [`labeling_set`] but taking the precomputed list of earlier
/// right-bracket step indices, ascending.
pub fn labeling_set_for_rights(schema: &TaskSchema, rights: &[usize]) -> Vec<LabelAction> {
    let mut out = Vec::new();
    match schema.kind {
        TaskKind::Ner => {
            for entity_type in 0..schema.entity_types.len() {
                out.push(LabelAction::Entity { entity_type });
            }
        }
        TaskKind::Ere => {
            for entity_type in 0..schema.entity_types.len() {
                out.push(LabelAction::EreLabel {
                    entity_type,
                    link: None,
                });
            }
            for &m in rights {
                for entity_type in 0..schema.entity_types.len() {
                    for relation in 0..schema.relation_types.len() {
                        out.push(LabelAction::EreLabel {
                            entity_type,
                            link: Some(EreLink {
                                antecedent: m,
                                relation,
                            }),
                        });
                    }
                }
            }
        }
        TaskKind::Coref => {
            out.push(LabelAction::CorefAntecedent { antecedent: None });
            for &m in rights {
                out.push(LabelAction::CorefAntecedent {
                    antecedent: Some(m),
                });
            }
        }
    }
    out
}
