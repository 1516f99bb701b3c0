//! Central finite-difference validation of the analytic gradients, run in
//! high precision on a small model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::codec::ActionSequence;
use crate::document::Document;

use super::net::build_sequence_graph;
use super::plan::plan_gold_sequence;
use super::{ModelError, ScorerModel};

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub parameters_total: usize,
    pub parameters_checked: usize,
    pub tolerance: f64,
    pub step: f64,
    pub max_relative_error: f64,
    pub worst_tensor: String,
    pub worst_index: usize,
    pub pass: bool,
}

/// Compares analytic gradients of the sequence loss against central finite
/// differences on `samples` randomly chosen parameters. All arithmetic runs
/// in f64 regardless of the model's training precision.
pub fn gradient_check(
    model: &ScorerModel,
    doc: &Document,
    gold: &ActionSequence,
    prune_sentences: bool,
    samples: usize,
    tolerance: f64,
    seed: u64,
) -> Result<GradCheckReport, ModelError> {
    let plans = plan_gold_sequence(doc, gold, &model.schema, prune_sentences)?;
    let mut params = model.params.to_precision::<f64>();

    let loss_of = |params: &super::params::ModelParams<f64>| -> Result<f64, ModelError> {
        let graph = build_sequence_graph::<f64>(
            params,
            &model.layout,
            &model.config,
            &model.alphabet,
            doc,
            &plans,
        )?;
        Ok(graph.graph.value(graph.loss_sum.expect("gold plans"))[0])
    };

    // Analytic gradients.
    let mut graph = build_sequence_graph::<f64>(
        &params,
        &model.layout,
        &model.config,
        &model.alphabet,
        doc,
        &plans,
    )?;
    let loss_node = graph.loss_sum.expect("gold plans");
    graph.graph.backward(loss_node);
    let analytic: Vec<Vec<f64>> = graph
        .param_nodes
        .iter()
        .map(|n| graph.graph.grad(*n).to_vec())
        .collect();

    let total: usize = params.tensors.iter().map(|t| t.data.len()).sum();
    let checked = samples.min(total);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-5;

    let mut max_rel = 0.0f64;
    let mut worst = (String::new(), 0usize);
    for _ in 0..checked {
        let mut flat = rng.random_range(0..total);
        let mut ti = 0;
        while flat >= params.tensors[ti].data.len() {
            flat -= params.tensors[ti].data.len();
            ti += 1;
        }
        let original = params.tensors[ti].data[flat];
        params.tensors[ti].data[flat] = original + h;
        let plus = loss_of(&params)?;
        params.tensors[ti].data[flat] = original - h;
        let minus = loss_of(&params)?;
        params.tensors[ti].data[flat] = original;

        let numeric = (plus - minus) / (2.0 * h);
        let a = analytic[ti][flat];
        let denom = a.abs().max(numeric.abs()).max(1e-6);
        let rel = (a - numeric).abs() / denom;
        if rel > max_rel {
            max_rel = rel;
            worst = (params.tensors[ti].name.clone(), flat);
        }
    }

    Ok(GradCheckReport {
        parameters_total: total,
        parameters_checked: checked,
        tolerance,
        step: h,
        max_relative_error: max_rel,
        worst_tensor: worst.0,
        worst_index: worst.1,
        pass: max_rel < tolerance,
    })
}
