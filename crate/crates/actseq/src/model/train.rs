//! Teacher-forced training with AdamW, plus sequence log-likelihood and
//! exact-match action accuracy over a corpus.
//!
//! Gradients accumulate over the documents of a batch in a fixed order, so
//! a seed fully determines the loss trace.

use crate::codec::ActionSequence;
use crate::document::Document;
use crate::num::Real;

use super::net::build_sequence_graph;
use super::params::ModelParams;
use super::plan::{plan_gold_sequence, StepPlan};
use super::{ModelError, Precision, ScorerModel};

pub struct FitReport {
    /// Mean per-step negative log-likelihood, one entry per epoch.
    pub epoch_losses: Vec<f64>,
}

struct AdamW<F> {
    m: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
    t: usize,
    lr: F,
    beta1: F,
    beta2: F,
    eps: F,
    weight_decay: F,
}

impl<F: Real> AdamW<F> {
    fn new(params: &ModelParams<F>, lr: f64, weight_decay: f64) -> Self {
        AdamW {
            m: params
                .tensors
                .iter()
                .map(|t| vec![F::ZERO; t.data.len()])
                .collect(),
            v: params
                .tensors
                .iter()
                .map(|t| vec![F::ZERO; t.data.len()])
                .collect(),
            t: 0,
            lr: F::from_f64(lr),
            beta1: F::from_f64(0.9),
            beta2: F::from_f64(0.999),
            eps: F::from_f64(1e-8),
            weight_decay: F::from_f64(weight_decay),
        }
    }

    fn step(&mut self, params: &mut ModelParams<F>, grads: &[Vec<F>]) {
        self.t += 1;
        let bc1 = F::ONE - pow(self.beta1, self.t);
        let bc2 = F::ONE - pow(self.beta2, self.t);
        for (ti, tensor) in params.tensors.iter_mut().enumerate() {
            let m = &mut self.m[ti];
            let v = &mut self.v[ti];
            let g = &grads[ti];
            for i in 0..tensor.data.len() {
                m[i] = self.beta1 * m[i] + (F::ONE - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (F::ONE - self.beta2) * g[i] * g[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                let theta = tensor.data[i];
                tensor.data[i] =
                    theta - self.lr * (mhat / (vhat.sqrt() + self.eps) + self.weight_decay * theta);
            }
        }
    }
}

fn pow<F: Real>(base: F, exp: usize) -> F {
    let mut out = F::ONE;
    for _ in 0..exp {
        out *= base;
    }
    out
}

fn clip_global_norm<F: Real>(grads: &mut [Vec<F>], max_norm: f64) {
    let mut sq = F::ZERO;
    for g in grads.iter() {
        for &x in g {
            sq += x * x;
        }
    }
    let norm = sq.sqrt().to_f64();
    if norm > max_norm && norm > 0.0 {
        let scale = F::from_f64(max_norm / norm);
        for g in grads.iter_mut() {
            for x in g.iter_mut() {
                *x *= scale;
            }
        }
    }
}

fn prepared_plans(
    model: &ScorerModel,
    corpus: &[(Document, ActionSequence)],
    prune_sentences: bool,
) -> Result<Vec<Vec<StepPlan>>, ModelError> {
    corpus
        .iter()
        .map(|(doc, gold)| plan_gold_sequence(doc, gold, &model.schema, prune_sentences))
        .collect()
}

fn fit_inner<F: Real>(
    model: &mut ScorerModel,
    corpus: &[(Document, ActionSequence)],
    plans: &[Vec<StepPlan>],
) -> Result<FitReport, ModelError> {
    let cfg = model.config.clone();
    let mut params: ModelParams<F> = model.params.to_precision();
    let mut opt = AdamW::<F>::new(&params, cfg.learning_rate, cfg.weight_decay);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut epoch_nll = 0.0f64;
        let mut epoch_steps = 0usize;
        for batch in (0..corpus.len()).collect::<Vec<_>>().chunks(cfg.batch_size) {
            let mut grads: Vec<Vec<F>> = params
                .tensors
                .iter()
                .map(|t| vec![F::ZERO; t.data.len()])
                .collect();
            let mut batch_steps = 0usize;
            for &di in batch {
                let (doc, _) = &corpus[di];
                let mut graph = build_sequence_graph::<F>(
                    &params,
                    &model.layout,
                    &cfg,
                    &model.alphabet,
                    doc,
                    &plans[di],
                )?;
                let loss = graph.loss_sum.expect("gold plans carry gold indices");
                let loss_val = graph.graph.value(loss)[0].to_f64();
                if !loss_val.is_finite() {
                    return Err(ModelError::Training {
                        epoch,
                        detail: format!("non-finite loss on document {}", doc.doc_id),
                    });
                }
                epoch_nll += loss_val;
                epoch_steps += plans[di].len();
                batch_steps += plans[di].len();
                graph.graph.backward(loss);
                for (ti, node) in graph.param_nodes.iter().enumerate() {
                    let g = graph.graph.grad(*node);
                    for (acc, gi) in grads[ti].iter_mut().zip(g) {
                        *acc += *gi;
                    }
                }
            }
            // Per-step mean loss: scale the accumulated gradient once.
            let inv = F::from_f64(1.0 / batch_steps.max(1) as f64);
            for g in grads.iter_mut() {
                for x in g.iter_mut() {
                    *x *= inv;
                }
            }
            clip_global_norm(&mut grads, cfg.grad_clip_norm);
            opt.step(&mut params, &grads);
        }
        epoch_losses.push(epoch_nll / epoch_steps.max(1) as f64);
    }

    model.params = params.to_precision();
    Ok(FitReport { epoch_losses })
}

/// Trains the model in place, returning the per-epoch loss trace.
/// Deterministic given the model seed and corpus order.
pub fn fit(
    model: &mut ScorerModel,
    corpus: &[(Document, ActionSequence)],
    prune_sentences: bool,
) -> Result<FitReport, ModelError> {
    if corpus.is_empty() {
        return Err(ModelError::Config("training corpus is empty".into()));
    }
    let plans = prepared_plans(model, corpus, prune_sentences)?;
    match model.config.precision {
        Precision::Standard => fit_inner::<f32>(model, corpus, &plans),
        Precision::High => fit_inner::<f64>(model, corpus, &plans),
    }
}

/// Sum over steps of log p(gold step | history, document); finite and
/// non-positive. Computed in high precision.
pub fn sequence_log_likelihood(
    model: &ScorerModel,
    doc: &Document,
    gold: &ActionSequence,
    prune_sentences: bool,
) -> Result<f64, ModelError> {
    let plans = plan_gold_sequence(doc, gold, &model.schema, prune_sentences)?;
    let params = model.params.to_precision::<f64>();
    let graph = build_sequence_graph::<f64>(
        &params,
        &model.layout,
        &model.config,
        &model.alphabet,
        doc,
        &plans,
    )?;
    let nll = graph.graph.value(graph.loss_sum.expect("gold plans"))[0];
    if !nll.is_finite() {
        return Err(ModelError::Numeric("non-finite log-likelihood".into()));
    }
    Ok(-nll)
}

/// Fraction of teacher-forced steps whose argmax candidate is the gold one,
/// pooled over the corpus. Ties resolve to the earliest candidate.
pub fn teacher_forced_accuracy(
    model: &ScorerModel,
    corpus: &[(Document, ActionSequence)],
    prune_sentences: bool,
) -> Result<f64, ModelError> {
    let mut correct = 0usize;
    let mut total = 0usize;
    let params = model.params.to_precision::<f32>();
    for (doc, gold) in corpus {
        let plans = plan_gold_sequence(doc, gold, &model.schema, prune_sentences)?;
        let graph = build_sequence_graph::<f32>(
            &params,
            &model.layout,
            &model.config,
            &model.alphabet,
            doc,
            &plans,
        )?;
        for (plan, scores) in plans.iter().zip(&graph.step_scores) {
            let vals = graph.graph.value(*scores);
            let mut best = 0usize;
            for (i, v) in vals.iter().enumerate() {
                if *v > vals[best] {
                    best = i;
                }
            }
            if Some(best) == plan.gold_index {
                correct += 1;
            }
            total += 1;
        }
    }
    Ok(correct as f64 / total.max(1) as f64)
}
