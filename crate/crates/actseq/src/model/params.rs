//! Parameter storage and layout. The layout enumerates tensors in a fixed
//! order derived from (config, schema, vocabulary size), so checkpoints and
//! optimizer state line up by index.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::Mat;
use crate::num::Real;
use crate::schema::{TaskKind, TaskSchema};

use super::ScorerConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor<F> {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<F>,
}

impl<F: Real> Tensor<F> {
    pub fn as_mat(&self) -> Mat<F> {
        Mat::from_vec(self.rows, self.cols, self.data.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<F> {
    pub tensors: Vec<Tensor<F>>,
}

impl<F: Real> ModelParams<F> {
    pub fn to_precision<G: Real>(&self) -> ModelParams<G> {
        ModelParams {
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor {
                    name: t.name.clone(),
                    rows: t.rows,
                    cols: t.cols,
                    data: t.data.iter().map(|v| G::from_f64(v.to_f64())).collect(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttentionIdx {
    pub norm_gain: usize,
    pub wq: usize,
    pub wk: usize,
    pub wv: usize,
    pub wo: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FfnIdx {
    pub norm_gain: usize,
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncLayerIdx {
    pub attn: AttentionIdx,
    pub ffn: FfnIdx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecLayerIdx {
    pub self_attn: AttentionIdx,
    pub cross_attn: AttentionIdx,
    pub ffn: FfnIdx,
}

/// A scoring head with one hidden layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeadIdx {
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    pub embed: usize,
    pub cursor_proj: usize,
    pub cursor_end: usize,
    pub encoder: Vec<EncLayerIdx>,
    pub encoder_norm: usize,
    pub decoder: Vec<DecLayerIdx>,
    pub decoder_norm: usize,
    pub head_copy: HeadIdx,
    pub head_left: HeadIdx,
    pub head_right: HeadIdx,
    pub head_link: Option<HeadIdx>,
    /// Output width of the right-bracket head; the no-link slot, when the
    /// task has one, is the last column.
    pub right_width: usize,
    pub link_width: usize,
}

/// Output width of the right-bracket head: one column per entity type plus
/// a trailing no-link column for tasks with the epsilon convention.
pub fn right_head_width(schema: &TaskSchema) -> usize {
    match schema.kind {
        TaskKind::Ner => schema.entity_types.len(),
        TaskKind::Ere => schema.entity_types.len() + 1,
        TaskKind::Coref => 1,
    }
}

pub fn link_head_width(schema: &TaskSchema) -> usize {
    match schema.kind {
        TaskKind::Ner => 0,
        TaskKind::Ere => schema.relation_types.len(),
        TaskKind::Coref => 1,
    }
}

struct Alloc {
    tensors: Vec<Tensor<f32>>,
    rng: ChaCha8Rng,
}

impl Alloc {
    fn mat(&mut self, name: String, rows: usize, cols: usize) -> usize {
        // Xavier-uniform for projection matrices.
        let bound = (6.0 / (rows + cols) as f64).sqrt() as f32;
        let data = (0..rows * cols)
            .map(|_| self.rng.random_range(-bound..bound))
            .collect();
        self.tensors.push(Tensor {
            name,
            rows,
            cols,
            data,
        });
        self.tensors.len() - 1
    }

    fn zeros(&mut self, name: String, rows: usize, cols: usize) -> usize {
        self.tensors.push(Tensor {
            name,
            rows,
            cols,
            data: vec![0.0; rows * cols],
        });
        self.tensors.len() - 1
    }

    fn ones(&mut self, name: String, cols: usize) -> usize {
        self.tensors.push(Tensor {
            name,
            rows: 1,
            cols,
            data: vec![1.0; cols],
        });
        self.tensors.len() - 1
    }

    fn embed(&mut self, name: String, rows: usize, cols: usize) -> usize {
        let data = (0..rows * cols)
            .map(|_| self.rng.random_range(-0.05..0.05f32))
            .collect();
        self.tensors.push(Tensor {
            name,
            rows,
            cols,
            data,
        });
        self.tensors.len() - 1
    }

    fn attention(&mut self, prefix: &str, d: usize) -> AttentionIdx {
        AttentionIdx {
            norm_gain: self.ones(format!("{prefix}.norm"), d),
            wq: self.mat(format!("{prefix}.wq"), d, d),
            wk: self.mat(format!("{prefix}.wk"), d, d),
            wv: self.mat(format!("{prefix}.wv"), d, d),
            wo: self.mat(format!("{prefix}.wo"), d, d),
        }
    }

    fn ffn(&mut self, prefix: &str, d: usize, hidden: usize) -> FfnIdx {
        FfnIdx {
            norm_gain: self.ones(format!("{prefix}.norm"), d),
            w1: self.mat(format!("{prefix}.w1"), d, hidden),
            b1: self.zeros(format!("{prefix}.b1"), 1, hidden),
            w2: self.mat(format!("{prefix}.w2"), hidden, d),
            b2: self.zeros(format!("{prefix}.b2"), 1, d),
        }
    }

    fn head(&mut self, prefix: &str, input: usize, hidden: usize, out: usize) -> HeadIdx {
        HeadIdx {
            w1: self.mat(format!("{prefix}.w1"), input, hidden),
            b1: self.zeros(format!("{prefix}.b1"), 1, hidden),
            w2: self.mat(format!("{prefix}.w2"), hidden, out),
            b2: self.zeros(format!("{prefix}.b2"), 1, out),
        }
    }
}

/// Seeded parameter initialization plus the layout describing it.
pub fn init_params(
    config: &ScorerConfig,
    schema: &TaskSchema,
    vocab_size: usize,
) -> (ModelParams<f32>, ParamLayout) {
    let d = config.model_dim;
    let mut alloc = Alloc {
        tensors: Vec::new(),
        rng: ChaCha8Rng::seed_from_u64(config.seed),
    };

    let embed = alloc.embed("embed".into(), vocab_size, d);
    let cursor_proj = alloc.mat("cursor_proj".into(), d, d);
    let cursor_end = alloc.embed("cursor_end".into(), 1, d);

    let encoder: Vec<EncLayerIdx> = (0..config.encoder_layers)
        .map(|l| EncLayerIdx {
            attn: alloc.attention(&format!("enc{l}.attn"), d),
            ffn: alloc.ffn(&format!("enc{l}.ffn"), d, config.feedforward_dim),
        })
        .collect();
    let encoder_norm = alloc.ones("enc.norm".into(), d);

    let decoder: Vec<DecLayerIdx> = (0..config.decoder_layers)
        .map(|l| DecLayerIdx {
            self_attn: alloc.attention(&format!("dec{l}.self"), d),
            cross_attn: alloc.attention(&format!("dec{l}.cross"), d),
            ffn: alloc.ffn(&format!("dec{l}.ffn"), d, config.feedforward_dim),
        })
        .collect();
    let decoder_norm = alloc.ones("dec.norm".into(), d);

    let right_width = right_head_width(schema);
    let link_width = link_head_width(schema);
    let head_copy = alloc.head("head.copy", d, config.head_hidden, 1);
    let head_left = alloc.head("head.left", d, config.head_hidden, 1);
    let head_right = alloc.head("head.right", 2 * d, config.head_hidden, right_width);
    let head_link =
        (link_width > 0).then(|| alloc.head("head.link", 4 * d, config.head_hidden, link_width));

    let layout = ParamLayout {
        embed,
        cursor_proj,
        cursor_end,
        encoder,
        encoder_norm,
        decoder,
        decoder_norm,
        head_copy,
        head_left,
        head_right,
        head_link,
        right_width,
        link_width,
    };
    (
        ModelParams {
            tensors: alloc.tensors,
        },
        layout,
    )
}
