//! The encoder-decoder network, twice: once on the differentiation tape for
//! teacher-forced training, and once as an incremental session with cached
//! keys/values for step-by-step decoding. Both paths share the same kernels
//! and must agree numerically; a consistency test pins them together.
//!
//! Architecture: shared embeddings with sinusoidal positions; pre-norm
//! single-head attention blocks (RMS norm); the decoder input at each
//! position additionally receives a projection of the encoder state under
//! the current copy cursor, which realizes the copy mechanism's alignment
//! explicitly. Scoring heads are parameter-disjoint: one hidden layer each
//! for copy, left bracket, right bracket (over the concatenated mention
//! representation) and span linking (over both mention representations).

use std::collections::BTreeMap;

use crate::document::Document;
use crate::linalg::{self, Mat};
use crate::num::Real;
use crate::tape::{Graph, NodeId};

use super::alphabet::{Alphabet, PAD_ID};
use super::params::{AttentionIdx, FfnIdx, HeadIdx, ModelParams, ParamLayout};
use super::plan::{CandScore, DecoderInput, LabelScore, StepPlan};
use super::{ModelError, ScorerConfig};

const NORM_EPS: f64 = 1e-6;

fn feed_token_id(alphabet: &Alphabet, doc: &Document, input: DecoderInput) -> usize {
    match input {
        DecoderInput::Start => PAD_ID,
        DecoderInput::Feed(feed) => alphabet.feed_id(feed, doc),
    }
}

// ---------------------------------------------------------------------------
// Taped forward pass.
// ---------------------------------------------------------------------------

pub struct SequenceGraph<F: Real> {
    pub graph: Graph<F>,
    /// One score-vector node per decision, parallel to the plans.
    pub step_scores: Vec<NodeId>,
    /// Sum over decisions of -log p(gold); present when every plan carries a
    /// gold index.
    pub loss_sum: Option<NodeId>,
    /// Tape nodes of the parameter tensors, aligned with the params list.
    pub param_nodes: Vec<NodeId>,
}

struct TapedNet<'a, F: Real> {
    g: Graph<F>,
    params: Vec<NodeId>,
    layout: &'a ParamLayout,
    dim: usize,
}

impl<'a, F: Real> TapedNet<'a, F> {
    fn p(&self, idx: usize) -> NodeId {
        self.params[idx]
    }

    fn normed(&mut self, x: NodeId, gain: usize) -> NodeId {
        let n = self.g.rmsnorm_rows(x, F::from_f64(NORM_EPS));
        let gain = self.p(gain);
        self.g.mul_row(n, gain)
    }

    /// Pre-norm residual attention. `kv` supplies keys and values (the
    /// normalized input itself for self-attention, encoder states for
    /// cross-attention); `mask` is added to the score matrix.
    fn attention(
        &mut self,
        x: NodeId,
        idx: &AttentionIdx,
        kv: Option<NodeId>,
        mask: Option<NodeId>,
    ) -> NodeId {
        let xn = self.normed(x, idx.norm_gain);
        let src = kv.unwrap_or(xn);
        let q = self.g.matmul(xn, self.p(idx.wq));
        let k = self.g.matmul(src, self.p(idx.wk));
        let v = self.g.matmul(src, self.p(idx.wv));
        let scores = self.g.matmul_nt(q, k);
        let scaled = self
            .g
            .scale(scores, F::from_f64(1.0 / (self.dim as f64).sqrt()));
        let masked = match mask {
            Some(m) => self.g.add(scaled, m),
            None => scaled,
        };
        let probs = self.g.softmax_rows(masked);
        let ctx = self.g.matmul(probs, v);
        let out = self.g.matmul(ctx, self.p(idx.wo));
        self.g.add(x, out)
    }

    fn ffn(&mut self, x: NodeId, idx: &FfnIdx) -> NodeId {
        let xn = self.normed(x, idx.norm_gain);
        let h = self.g.matmul(xn, self.p(idx.w1));
        let h = self.g.add_row(h, self.p(idx.b1));
        let h = self.g.relu(h);
        let y = self.g.matmul(h, self.p(idx.w2));
        let y = self.g.add_row(y, self.p(idx.b2));
        self.g.add(x, y)
    }

    fn head(&mut self, x: NodeId, idx: &HeadIdx) -> NodeId {
        let h = self.g.matmul(x, self.p(idx.w1));
        let h = self.g.add_row(h, self.p(idx.b1));
        let h = self.g.relu(h);
        let y = self.g.matmul(h, self.p(idx.w2));
        self.g.add_row(y, self.p(idx.b2))
    }

    fn encoder(&mut self, ids: &[usize]) -> NodeId {
        let emb = self.g.select_rows(self.p(self.layout.embed), ids.to_vec());
        let pos = self
            .g
            .constant(linalg::positional_encoding(ids.len(), self.dim));
        let mut x = self.g.add(emb, pos);
        let layers = self.layout.encoder.clone();
        for layer in &layers {
            x = self.attention(x, &layer.attn, None, None);
            x = self.ffn(x, &layer.ffn);
        }
        self.normed(x, self.layout.encoder_norm)
    }

    fn decoder(&mut self, enc: NodeId, ids: &[usize], cursors: &[usize]) -> NodeId {
        let m = ids.len();
        let emb = self.g.select_rows(self.p(self.layout.embed), ids.to_vec());
        let pos = self.g.constant(linalg::positional_encoding(m, self.dim));
        let base = self.g.add(emb, pos);
        // Cursor-aligned encoder feature: the state of the next token to be
        // copied, with a learned row standing in at the end sentinel.
        let ext = self.g.concat_rows(enc, self.p(self.layout.cursor_end));
        let cursor_rows = self.g.select_rows(ext, cursors.to_vec());
        let cursor_feat = self.g.matmul(cursor_rows, self.p(self.layout.cursor_proj));
        let mut x = self.g.add(base, cursor_feat);

        let mask = self.g.constant(linalg::causal_mask(m));
        let layers = self.layout.decoder.clone();
        for layer in &layers {
            x = self.attention(x, &layer.self_attn, None, Some(mask));
            x = self.attention(x, &layer.cross_attn, Some(enc), None);
            x = self.ffn(x, &layer.ffn);
        }
        self.normed(x, self.layout.decoder_norm)
    }
}

/// Builds the full teacher-forced computation for one sequence: encoder,
/// decoder over all decision positions, batched head evaluations, and one
/// score vector per decision. When every plan carries a gold index the
/// negative log-likelihood sum is included.
pub fn build_sequence_graph<F: Real>(
    params: &ModelParams<F>,
    layout: &ParamLayout,
    config: &ScorerConfig,
    alphabet: &Alphabet,
    doc: &Document,
    plans: &[StepPlan],
) -> Result<SequenceGraph<F>, ModelError> {
    if doc.is_empty() {
        return Err(ModelError::EmptyDocument);
    }
    assert!(!plans.is_empty(), "a sequence has at least one decision");

    let mut g: Graph<F> = Graph::new();
    let param_nodes: Vec<NodeId> = params
        .tensors
        .iter()
        .map(|t| g.param(&t.as_mat()))
        .collect();
    let mut net = TapedNet {
        g,
        params: param_nodes.clone(),
        layout,
        dim: config.model_dim,
    };

    let enc_ids: Vec<usize> = doc.tokens.iter().map(|t| alphabet.lookup(t)).collect();
    let enc = net.encoder(&enc_ids);

    let dec_ids: Vec<usize> = plans
        .iter()
        .map(|p| feed_token_id(alphabet, doc, p.input))
        .collect();
    let cursors: Vec<usize> = plans.iter().map(|p| p.cursor).collect();
    let h = net.decoder(enc, &dec_ids, &cursors);

    // Scalar heads over every position.
    let copy_scores = net.head(h, &layout.head_copy);
    let left_scores = net.head(h, &layout.head_left);

    // Batched right-bracket head: one row per distinct (position, open).
    let mut right_rows: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    // Batched link head: one row per distinct (position, open, antecedent).
    let mut link_rows: BTreeMap<(usize, usize, usize, usize), usize> = BTreeMap::new();
    for plan in plans {
        for score in &plan.scores {
            if let CandScore::Right { open_pos, label } = score {
                let key = (plan.position, *open_pos);
                let next = right_rows.len();
                right_rows.entry(key).or_insert(next);
                match label {
                    LabelScore::EreLinked { ant, .. } | LabelScore::CorefLinked { ant } => {
                        let key = (plan.position, *open_pos, ant.close_pos, ant.open_pos);
                        let next = link_rows.len();
                        link_rows.entry(key).or_insert(next);
                    }
                    _ => {}
                }
            }
        }
    }

    let right_out = if right_rows.is_empty() {
        None
    } else {
        let mut close_idx = vec![0usize; right_rows.len()];
        let mut open_idx = vec![0usize; right_rows.len()];
        for (&(pos, open), &row) in &right_rows {
            close_idx[row] = pos;
            open_idx[row] = open;
        }
        let closes = net.g.select_rows(h, close_idx);
        let opens = net.g.select_rows(h, open_idx);
        let mention = net.g.concat_cols(closes, opens);
        Some(net.head(mention, &layout.head_right))
    };

    let link_out = if link_rows.is_empty() {
        None
    } else {
        let head_link = layout
            .head_link
            .as_ref()
            .expect("linked labels imply a link head");
        let n = link_rows.len();
        let (mut c1, mut o1, mut c2, mut o2) = (vec![0; n], vec![0; n], vec![0; n], vec![0; n]);
        for (&(pos, open, ac, ao), &row) in &link_rows {
            c1[row] = pos;
            o1[row] = open;
            c2[row] = ac;
            o2[row] = ao;
        }
        let a = net.g.select_rows(h, c1);
        let b = net.g.select_rows(h, o1);
        let c = net.g.select_rows(h, c2);
        let d2 = net.g.select_rows(h, o2);
        let m1 = net.g.concat_cols(a, b);
        let m2 = net.g.concat_cols(c, d2);
        let both = net.g.concat_cols(m1, m2);
        Some(net.head(both, &head_link.clone()))
    };

    let rw = layout.right_width;
    let lw = layout.link_width;
    let mut step_scores = Vec::with_capacity(plans.len());
    let mut losses = Vec::with_capacity(plans.len());
    let mut all_gold = true;
    for plan in plans {
        let terms: Vec<Vec<(NodeId, usize)>> = plan
            .scores
            .iter()
            .map(|score| match score {
                CandScore::Copy => vec![(copy_scores, plan.position)],
                CandScore::Left => vec![(left_scores, plan.position)],
                CandScore::Right { open_pos, label } => {
                    let row = right_rows[&(plan.position, *open_pos)];
                    let right_node = right_out.expect("right candidates imply right rows");
                    match label {
                        LabelScore::NerType { ty } => vec![(right_node, row * rw + ty)],
                        LabelScore::EreUnlinked { ty } => vec![
                            (right_node, row * rw + ty),
                            (right_node, row * rw + (rw - 1)),
                        ],
                        LabelScore::EreLinked { ty, rel, ant } => {
                            let lrow =
                                link_rows[&(plan.position, *open_pos, ant.close_pos, ant.open_pos)];
                            vec![
                                (right_node, row * rw + ty),
                                (
                                    link_out.expect("linked label implies link rows"),
                                    lrow * lw + rel,
                                ),
                            ]
                        }
                        LabelScore::CorefNew => vec![(right_node, row * rw)],
                        LabelScore::CorefLinked { ant } => {
                            let lrow =
                                link_rows[&(plan.position, *open_pos, ant.close_pos, ant.open_pos)];
                            vec![(link_out.expect("linked label implies link rows"), lrow * lw)]
                        }
                    }
                }
            })
            .collect();
        let scores = net.g.gather_sum(terms);
        step_scores.push(scores);
        match plan.gold_index {
            Some(gold) => {
                let lse = net.g.log_sum_exp(scores);
                let gold_score = net.g.gather_sum(vec![vec![(scores, gold)]]);
                losses.push(net.g.sub(lse, gold_score));
            }
            None => all_gold = false,
        }
    }
    let loss_sum = all_gold.then(|| net.g.sum_list(losses));

    Ok(SequenceGraph {
        graph: net.g,
        step_scores,
        loss_sum,
        param_nodes,
    })
}

/// Encoder states for a document: one row per token.
pub fn encode_document<F: Real>(
    params: &ModelParams<F>,
    layout: &ParamLayout,
    config: &ScorerConfig,
    alphabet: &Alphabet,
    doc: &Document,
) -> Result<Mat<F>, ModelError> {
    if doc.is_empty() {
        return Err(ModelError::EmptyDocument);
    }
    let mut g: Graph<F> = Graph::new();
    let param_nodes: Vec<NodeId> = params
        .tensors
        .iter()
        .map(|t| g.param(&t.as_mat()))
        .collect();
    let mut net = TapedNet {
        g,
        params: param_nodes,
        layout,
        dim: config.model_dim,
    };
    let ids: Vec<usize> = doc.tokens.iter().map(|t| alphabet.lookup(t)).collect();
    let enc = net.encoder(&ids);
    let (rows, cols) = net.g.shape(enc);
    Ok(Mat::from_vec(rows, cols, net.g.value(enc).to_vec()))
}

// ---------------------------------------------------------------------------
// Incremental inference session.
// ---------------------------------------------------------------------------

struct PlainHead<F> {
    w1: Mat<F>,
    b1: Vec<F>,
    w2: Mat<F>,
    b2: Vec<F>,
}

impl<F: Real> PlainHead<F> {
    fn from(params: &ModelParams<F>, idx: &HeadIdx) -> Self {
        PlainHead {
            w1: params.tensors[idx.w1].as_mat(),
            b1: params.tensors[idx.b1].data.clone(),
            w2: params.tensors[idx.w2].as_mat(),
            b2: params.tensors[idx.b2].data.clone(),
        }
    }

    fn apply(&self, x: &[F]) -> Vec<F> {
        let mut h = self.b1.clone();
        linalg::matmul_acc(x, 1, self.w1.rows, &self.w1.data, self.w1.cols, &mut h);
        for v in h.iter_mut() {
            if !(*v > F::ZERO) {
                *v = F::ZERO;
            }
        }
        let mut y = self.b2.clone();
        linalg::matmul_acc(&h, 1, self.w2.rows, &self.w2.data, self.w2.cols, &mut y);
        y
    }
}

struct PlainAttention<F> {
    gain: Vec<F>,
    wq: Mat<F>,
    wk: Mat<F>,
    wv: Mat<F>,
    wo: Mat<F>,
}

impl<F: Real> PlainAttention<F> {
    fn from(params: &ModelParams<F>, idx: &AttentionIdx) -> Self {
        PlainAttention {
            gain: params.tensors[idx.norm_gain].data.clone(),
            wq: params.tensors[idx.wq].as_mat(),
            wk: params.tensors[idx.wk].as_mat(),
            wv: params.tensors[idx.wv].as_mat(),
            wo: params.tensors[idx.wo].as_mat(),
        }
    }
}

struct PlainFfn<F> {
    gain: Vec<F>,
    w1: Mat<F>,
    b1: Vec<F>,
    w2: Mat<F>,
    b2: Vec<F>,
}

impl<F: Real> PlainFfn<F> {
    fn from(params: &ModelParams<F>, idx: &FfnIdx) -> Self {
        PlainFfn {
            gain: params.tensors[idx.norm_gain].data.clone(),
            w1: params.tensors[idx.w1].as_mat(),
            b1: params.tensors[idx.b1].data.clone(),
            w2: params.tensors[idx.w2].as_mat(),
            b2: params.tensors[idx.b2].data.clone(),
        }
    }
}

struct DecLayer<F> {
    self_attn: PlainAttention<F>,
    cross_attn: PlainAttention<F>,
    ffn: PlainFfn<F>,
    // Cached self-attention keys/values, one row per pushed position.
    self_k: Vec<Vec<F>>,
    self_v: Vec<Vec<F>>,
    // Cross-attention keys/values, fixed from the encoder.
    cross_k: Mat<F>,
    cross_v: Mat<F>,
}

fn norm_gain_row<F: Real>(x: &[F], gain: &[F]) -> Vec<F> {
    let mut out = vec![F::ZERO; x.len()];
    linalg::rmsnorm_row(x, F::from_f64(NORM_EPS), &mut out);
    for (o, g) in out.iter_mut().zip(gain) {
        *o *= *g;
    }
    out
}

fn row_matmul<F: Real>(x: &[F], w: &Mat<F>) -> Vec<F> {
    let mut out = vec![F::ZERO; w.cols];
    linalg::matmul_acc(x, 1, w.rows, &w.data, w.cols, &mut out);
    out
}

/// Step-by-step decoder with cached keys/values. Holds the per-position
/// final hidden states so mention representations can be assembled for any
/// earlier bracket.
pub struct Session<F: Real> {
    dim: usize,
    embed: Mat<F>,
    cursor_proj: Mat<F>,
    cursor_end: Vec<F>,
    layers: Vec<DecLayer<F>>,
    dec_norm: Vec<F>,
    head_copy: PlainHead<F>,
    head_left: PlainHead<F>,
    head_right: PlainHead<F>,
    head_link: Option<PlainHead<F>>,
    right_width: usize,
    enc: Mat<F>,
    /// Final decoder state per pushed position.
    h: Vec<Vec<F>>,
    positions: usize,
}

impl<F: Real> Session<F> {
    pub fn new(
        params: &ModelParams<F>,
        layout: &ParamLayout,
        config: &ScorerConfig,
        alphabet: &Alphabet,
        doc: &Document,
    ) -> Result<Self, ModelError> {
        let enc = encode_document(params, layout, config, alphabet, doc)?;
        let layers = layout
            .decoder
            .iter()
            .map(|l| {
                let cross = PlainAttention::from(params, &l.cross_attn);
                let mut cross_k = Mat::zeros(enc.rows, config.model_dim);
                let mut cross_v = Mat::zeros(enc.rows, config.model_dim);
                linalg::matmul_acc(
                    &enc.data,
                    enc.rows,
                    enc.cols,
                    &cross.wk.data,
                    config.model_dim,
                    &mut cross_k.data,
                );
                linalg::matmul_acc(
                    &enc.data,
                    enc.rows,
                    enc.cols,
                    &cross.wv.data,
                    config.model_dim,
                    &mut cross_v.data,
                );
                DecLayer {
                    self_attn: PlainAttention::from(params, &l.self_attn),
                    cross_attn: cross,
                    ffn: PlainFfn::from(params, &l.ffn),
                    self_k: Vec::new(),
                    self_v: Vec::new(),
                    cross_k,
                    cross_v,
                }
            })
            .collect();
        Ok(Session {
            dim: config.model_dim,
            embed: params.tensors[layout.embed].as_mat(),
            cursor_proj: params.tensors[layout.cursor_proj].as_mat(),
            cursor_end: params.tensors[layout.cursor_end].data.clone(),
            layers,
            dec_norm: params.tensors[layout.decoder_norm].data.clone(),
            head_copy: PlainHead::from(params, &layout.head_copy),
            head_left: PlainHead::from(params, &layout.head_left),
            head_right: PlainHead::from(params, &layout.head_right),
            head_link: layout
                .head_link
                .as_ref()
                .map(|h| PlainHead::from(params, h)),
            right_width: layout.right_width,
            enc,
            h: Vec::new(),
            positions: 0,
        })
    }

    pub fn encoder_states(&self) -> &Mat<F> {
        &self.enc
    }

    pub fn positions(&self) -> usize {
        self.positions
    }

    pub fn hidden(&self, position: usize) -> &[F] {
        &self.h[position]
    }

    /// Runs one decoder position: token embedding plus position and cursor
    /// features, then each layer with cached attention state. Returns the
    /// position index.
    pub fn push(&mut self, token_id: usize, cursor: usize) -> usize {
        let p = self.positions;
        let mut x: Vec<F> = self.embed.row(token_id).to_vec();
        let pos = linalg::positional_encoding::<F>(p + 1, self.dim);
        for (xi, pi) in x.iter_mut().zip(pos.row(p)) {
            *xi += *pi;
        }
        let cursor_row: &[F] = if cursor < self.enc.rows {
            self.enc.row(cursor)
        } else {
            &self.cursor_end
        };
        let feat = row_matmul(cursor_row, &self.cursor_proj);
        for (xi, fi) in x.iter_mut().zip(&feat) {
            *xi += *fi;
        }

        let scale = F::from_f64(1.0 / (self.dim as f64).sqrt());
        for layer in &mut self.layers {
            // Self-attention over the cached prefix plus this position.
            let xn = norm_gain_row(&x, &layer.self_attn.gain);
            let q = row_matmul(&xn, &layer.self_attn.wq);
            layer.self_k.push(row_matmul(&xn, &layer.self_attn.wk));
            layer.self_v.push(row_matmul(&xn, &layer.self_attn.wv));
            let mut scores: Vec<F> = layer
                .self_k
                .iter()
                .map(|k| linalg::dot(&q, k) * scale)
                .collect();
            linalg::softmax_row(&mut scores);
            let mut ctx = vec![F::ZERO; self.dim];
            for (w, v) in scores.iter().zip(&layer.self_v) {
                for (c, vi) in ctx.iter_mut().zip(v) {
                    *c += *w * *vi;
                }
            }
            let out = row_matmul(&ctx, &layer.self_attn.wo);
            for (xi, oi) in x.iter_mut().zip(&out) {
                *xi += *oi;
            }

            // Cross-attention over the fixed encoder states.
            let xn = norm_gain_row(&x, &layer.cross_attn.gain);
            let q = row_matmul(&xn, &layer.cross_attn.wq);
            let mut scores: Vec<F> = (0..layer.cross_k.rows)
                .map(|r| linalg::dot(&q, layer.cross_k.row(r)) * scale)
                .collect();
            linalg::softmax_row(&mut scores);
            let mut ctx = vec![F::ZERO; self.dim];
            for (r, w) in scores.iter().enumerate() {
                for (c, vi) in ctx.iter_mut().zip(layer.cross_v.row(r)) {
                    *c += *w * *vi;
                }
            }
            let out = row_matmul(&ctx, &layer.cross_attn.wo);
            for (xi, oi) in x.iter_mut().zip(&out) {
                *xi += *oi;
            }

            // Feed-forward block.
            let xn = norm_gain_row(&x, &layer.ffn.gain);
            let mut hmid = layer.ffn.b1.clone();
            linalg::matmul_acc(
                &xn,
                1,
                layer.ffn.w1.rows,
                &layer.ffn.w1.data,
                layer.ffn.w1.cols,
                &mut hmid,
            );
            for v in hmid.iter_mut() {
                if !(*v > F::ZERO) {
                    *v = F::ZERO;
                }
            }
            let mut out = layer.ffn.b2.clone();
            linalg::matmul_acc(
                &hmid,
                1,
                layer.ffn.w2.rows,
                &layer.ffn.w2.data,
                layer.ffn.w2.cols,
                &mut out,
            );
            for (xi, oi) in x.iter_mut().zip(&out) {
                *xi += *oi;
            }
        }

        self.h.push(norm_gain_row(&x, &self.dec_norm));
        self.positions += 1;
        p
    }

    /// Feeds the next decoder input for a plan and returns that plan's
    /// candidate scores. The plan's position must be the next unpushed one.
    pub fn push_and_score(
        &mut self,
        alphabet: &Alphabet,
        doc: &Document,
        plan: &StepPlan,
    ) -> Vec<F> {
        assert_eq!(
            plan.position, self.positions,
            "positions are pushed in order"
        );
        let id = feed_token_id(alphabet, doc, plan.input);
        self.push(id, plan.cursor);
        self.score_candidates(plan)
    }

    /// Scores the candidates of a plan whose position has been pushed.
    pub fn score_candidates(&self, plan: &StepPlan) -> Vec<F> {
        let hn = &self.h[plan.position];
        let mut right_cache: BTreeMap<usize, Vec<F>> = BTreeMap::new();
        let mut link_cache: BTreeMap<(usize, usize, usize), Vec<F>> = BTreeMap::new();
        plan.scores
            .iter()
            .map(|score| match score {
                CandScore::Copy => self.head_copy.apply(hn)[0],
                CandScore::Left => self.head_left.apply(hn)[0],
                CandScore::Right { open_pos, label } => {
                    let right = right_cache.entry(*open_pos).or_insert_with(|| {
                        let mut m = hn.clone();
                        m.extend_from_slice(&self.h[*open_pos]);
                        self.head_right.apply(&m)
                    });
                    let right = right.clone();
                    match label {
                        LabelScore::NerType { ty } => right[*ty],
                        LabelScore::EreUnlinked { ty } => right[*ty] + right[self.right_width - 1],
                        LabelScore::EreLinked { ty, rel, ant } => {
                            right[*ty] + self.link_scores(hn, *open_pos, ant, &mut link_cache)[*rel]
                        }
                        LabelScore::CorefNew => right[0],
                        LabelScore::CorefLinked { ant } => {
                            self.link_scores(hn, *open_pos, ant, &mut link_cache)[0]
                        }
                    }
                }
            })
            .collect()
    }

    fn link_scores(
        &self,
        hn: &[F],
        open_pos: usize,
        ant: &super::plan::MentionRef,
        cache: &mut BTreeMap<(usize, usize, usize), Vec<F>>,
    ) -> Vec<F> {
        cache
            .entry((open_pos, ant.close_pos, ant.open_pos))
            .or_insert_with(|| {
                let mut x = hn.to_vec();
                x.extend_from_slice(&self.h[open_pos]);
                x.extend_from_slice(&self.h[ant.close_pos]);
                x.extend_from_slice(&self.h[ant.open_pos]);
                self.head_link
                    .as_ref()
                    .expect("link labels imply a link head")
                    .apply(&x)
            })
            .clone()
    }
}
