//! The trainable scorer: a compact encoder-decoder over the enlarged
//! alphabet (document tokens plus bracket and sentinel symbols) with
//! parameter-disjoint feed-forward heads for each action kind, trained
//! teacher-forced with a softmax over the per-step dynamic candidate set.

pub mod alphabet;
pub mod gradcheck;
pub mod net;
pub mod params;
pub mod plan;
pub mod train;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::CodecError;
use crate::num::Real;
use crate::schema::TaskSchema;

pub use alphabet::Alphabet;
pub use gradcheck::{gradient_check, GradCheckReport};
pub use net::{build_sequence_graph, encode_document, SequenceGraph, Session};
pub use params::{ModelParams, ParamLayout, Tensor};
pub use plan::{plan_gold_sequence, step_plan, CandScore, DecoderInput, MentionRef, StepPlan};
pub use train::{fit, sequence_log_likelihood, teacher_forced_accuracy, FitReport};

/// Arithmetic used by training; gradient checks always run in high
/// precision regardless of this setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    Standard,
    High,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerConfig {
    /// Embedding and hidden width of the encoder and decoder.
    pub model_dim: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    /// Hidden width of the transformer feed-forward blocks.
    pub feedforward_dim: usize,
    /// Hidden width of the scoring heads (one hidden layer each).
    pub head_hidden: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub grad_clip_norm: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub precision: Precision,
}

impl ScorerConfig {
    /// Desk-scale profile: narrow encoder-decoder, scoring heads with a
    /// hidden layer of 150.
    pub fn small() -> Self {
        ScorerConfig {
            model_dim: 64,
            encoder_layers: 2,
            decoder_layers: 2,
            feedforward_dim: 128,
            head_hidden: 150,
            learning_rate: 5e-5,
            weight_decay: 0.01,
            grad_clip_norm: 1.0,
            epochs: 40,
            batch_size: 8,
            seed: 0,
            precision: Precision::Standard,
        }
    }

    /// Wider profile with 4096-wide scoring heads.
    pub fn large() -> Self {
        ScorerConfig {
            model_dim: 128,
            encoder_layers: 3,
            decoder_layers: 3,
            feedforward_dim: 256,
            head_hidden: 4096,
            ..Self::small()
        }
    }

    /// Minimal model for gradient checks and unit tests; stays well under
    /// ten thousand parameters with a small vocabulary.
    pub fn tiny() -> Self {
        ScorerConfig {
            model_dim: 8,
            encoder_layers: 1,
            decoder_layers: 1,
            feedforward_dim: 12,
            head_hidden: 10,
            precision: Precision::High,
            ..Self::small()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let dims = [
            self.model_dim,
            self.encoder_layers,
            self.decoder_layers,
            self.feedforward_dim,
            self.head_hidden,
            self.epochs.max(1),
            self.batch_size,
        ];
        if dims.iter().any(|&d| d == 0) {
            return Err(ModelError::Config("all dimensions must be positive".into()));
        }
        // A zero rate is the documented null update; negative rates are not.
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(ModelError::Config(
                "learning rate must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot encode an empty document")]
    EmptyDocument,
    #[error("gold action at step {step} is not in its candidate set: {detail}")]
    InconsistentGold { step: usize, detail: String },
    #[error("training failed at epoch {epoch}: {detail}")]
    Training { epoch: usize, detail: String },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Max-shifted softmax over candidate scores. Rejects non-finite scores.
pub fn step_distribution<F: Real>(scores: &[F]) -> Result<Vec<F>, ModelError> {
    if scores.is_empty() {
        return Err(ModelError::Numeric("empty candidate set".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(ModelError::Numeric("NaN candidate score".into()));
    }
    let mut probs = scores.to_vec();
    crate::linalg::softmax_row(&mut probs);
    Ok(probs)
}

/// The scorer: configuration, alphabet, schema, and parameters. The tensor
/// layout is a pure function of the first three, so checkpoints can rebuild
/// it on load.
#[derive(Debug, Clone)]
pub struct ScorerModel {
    pub config: ScorerConfig,
    pub alphabet: Alphabet,
    pub schema: TaskSchema,
    pub params: ModelParams<f32>,
    pub layout: ParamLayout,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    config: ScorerConfig,
    schema: TaskSchema,
    schema_fingerprint: String,
    alphabet: Vec<String>,
    tensors: Vec<Tensor<f32>>,
}

const CHECKPOINT_FORMAT: &str = "actseq-checkpoint-v1";

impl ScorerModel {
    /// Fresh model with seeded initialization.
    pub fn init(
        config: ScorerConfig,
        schema: TaskSchema,
        alphabet: Alphabet,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        let (params, layout) = params::init_params(&config, &schema, alphabet.len());
        Ok(ScorerModel {
            config,
            alphabet,
            schema,
            params,
            layout,
        })
    }

    pub fn param_count(&self) -> usize {
        self.params.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let ckpt = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            config: self.config.clone(),
            schema: self.schema.clone(),
            schema_fingerprint: self.schema.fingerprint(),
            alphabet: self.alphabet.corpus_tokens().to_vec(),
            tensors: self.params.tensors.clone(),
        };
        let json = serde_json::to_string(&ckpt).expect("checkpoint serializes");
        fs::write(path, json)?;
        Ok(())
    }

    /// Loads a checkpoint, validating its internal fingerprint and, when
    /// given, agreement with the schema the caller is about to use.
    pub fn load(path: &Path, expected_schema: Option<&TaskSchema>) -> Result<Self, ModelError> {
        let text = fs::read_to_string(path)?;
        let ckpt: Checkpoint =
            serde_json::from_str(&text).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(ModelError::Checkpoint(format!(
                "unknown format {:?}",
                ckpt.format
            )));
        }
        if ckpt.schema.fingerprint() != ckpt.schema_fingerprint {
            return Err(ModelError::Checkpoint("schema fingerprint mismatch".into()));
        }
        if let Some(expected) = expected_schema {
            if expected.fingerprint() != ckpt.schema_fingerprint {
                return Err(ModelError::Checkpoint(
                    "checkpoint was trained against a different schema".into(),
                ));
            }
        }
        let alphabet = Alphabet::from_corpus_tokens(ckpt.alphabet);
        let (reference, layout) = params::init_params(&ckpt.config, &ckpt.schema, alphabet.len());
        if reference.tensors.len() != ckpt.tensors.len() {
            return Err(ModelError::Checkpoint(
                "tensor list does not match configuration".into(),
            ));
        }
        for (expect, got) in reference.tensors.iter().zip(&ckpt.tensors) {
            if expect.name != got.name
                || expect.rows != got.rows
                || expect.cols != got.cols
                || got.data.len() != got.rows * got.cols
            {
                return Err(ModelError::Checkpoint(format!(
                    "tensor {} has wrong shape",
                    got.name
                )));
            }
        }
        Ok(ScorerModel {
            config: ckpt.config,
            alphabet,
            schema: ckpt.schema,
            params: ModelParams {
                tensors: ckpt.tensors,
            },
            layout,
        })
    }
}
