//! KL fine-tuning of the matching/propagation parameters.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::TrainConfig;
use super::kl::{kl_loss, KlDirection};
use super::optim::AdamW;
use crate::abstraction::{abstract_subgraph, normalized_indicator, AbstractSubgraph};
use crate::encoder::Encoder;
use crate::error::{Error, Result};
use crate::kg::{k_hop_subgraph, KnowledgeGraph, QaInstance, Subgraph};
use crate::model::{backward, encode_inputs, forward, Dims, Gradients, Inputs, ModelParams, PropagationGraph};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Pretrain,
    Retrieval,
    Reasoning,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase::Pretrain => "pretrain",
            Phase::Retrieval => "retrieval",
            Phase::Reasoning => "reasoning",
        })
    }
}

/// A question bound to one graph with pre-encoded inputs.
#[derive(Clone, Debug)]
pub struct Example<S> {
    pub id: String,
    pub graph: PropagationGraph,
    pub inputs: Inputs<S>,
    /// Which nodes hold a gold answer.
    pub positive: Vec<bool>,
    /// Normalised indicator; `None` when no node holds an answer.
    pub target: Option<Vec<S>>,
}

impl<S: Scalar> Example<S> {
    pub fn new(id: String, graph: PropagationGraph, inputs: Inputs<S>, positive: Vec<bool>) -> Self {
        let target = normalized_indicator(&positive);
        Self { id, graph, inputs, positive, target }
    }

    pub fn is_covered(&self) -> bool {
        self.target.is_some()
    }
}

/// Abstracts the `max_hops` neighbourhood of the question's topics.
pub fn retrieval_example<S: Scalar>(
    kg: &KnowledgeGraph,
    inst: &QaInstance,
    encoder: &Encoder<S>,
    max_hops: usize,
) -> Result<(Example<S>, AbstractSubgraph)> {
    let sub = k_hop_subgraph(kg, &inst.topic_entities, max_hops)?;
    let abs = abstract_subgraph(&sub, &inst.topic_entities)?;
    let graph = PropagationGraph::from_abstract(&abs)?;
    let inputs = encode_inputs(encoder, kg, &inst.question, &graph)?;
    let positive = abs.nodes.iter().map(|n| n.members.iter().any(|m| inst.answers.contains(m))).collect();
    Ok((Example::new(inst.id.clone(), graph, inputs, positive), abs))
}

/// Binds a question to an already retrieved plain subgraph.
pub fn reasoning_example<S: Scalar>(
    kg: &KnowledgeGraph,
    inst: &QaInstance,
    subgraph: &Subgraph,
    encoder: &Encoder<S>,
) -> Result<Example<S>> {
    let graph = PropagationGraph::from_subgraph(subgraph, &inst.topic_entities)?;
    let inputs = encode_inputs(encoder, kg, &inst.question, &graph)?;
    let positive = subgraph.entities.iter().map(|e| inst.answers.contains(e)).collect();
    Ok(Example::new(inst.id.clone(), graph, inputs, positive))
}

/// Loss and parameter gradients of one covered example.
pub fn example_loss<S: Scalar>(
    params: &ModelParams<S>,
    ex: &Example<S>,
    direction: KlDirection,
) -> Result<(S, Gradients<S>)> {
    let target = ex
        .target
        .as_ref()
        .ok_or_else(|| Error::NoTrainableInstances(format!("{} has no answer in its graph", ex.id)))?;
    let trace = forward(&ex.graph, &ex.inputs, params)?;
    let (loss, logit_grad) = kl_loss(trace.final_scores(), target, direction)?;
    Ok((loss, backward(&ex.graph, &ex.inputs, params, &trace, &logit_grad)))
}

/// Fraction of examples whose highest-scoring non-topic node is positive.
/// Uncovered examples count as misses; ties go to the lowest node index.
pub fn hits_at_1<S: Scalar>(params: &ModelParams<S>, examples: &[Example<S>]) -> Result<f64> {
    if examples.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0usize;
    for ex in examples {
        let trace = forward(&ex.graph, &ex.inputs, params)?;
        let best = trace
            .final_scores()
            .iter()
            .enumerate()
            .filter(|(i, _)| !ex.graph.topics().contains(i))
            .fold(None, |best: Option<(usize, S)>, (i, &s)| match best {
                Some((_, b)) if b >= s => best,
                _ => Some((i, s)),
            });
        if best.is_some_and(|(i, _)| ex.positive[i]) {
            hits += 1;
        }
    }
    Ok(hits as f64 / examples.len() as f64)
}

/// One line of the training metrics log. Epoch 0 is the initial model.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub phase: Phase,
    pub loss: f64,
    pub valid_hits_at_1: Option<f64>,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct FinetuneOutcome<S> {
    /// Best parameters by validation Hits@1, or the last ones without a
    /// validation callback.
    pub params: ModelParams<S>,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
    /// Examples skipped because no node holds an answer.
    pub skipped: usize,
}

pub type EvalFn<'a, S> = dyn FnMut(&ModelParams<S>) -> Result<f64> + 'a;

fn mean_loss<S: Scalar>(params: &ModelParams<S>, examples: &[&Example<S>], direction: KlDirection) -> Result<f64> {
    let mut total = 0.0;
    for ex in examples {
        let trace = forward(&ex.graph, &ex.inputs, params)?;
        total += kl_loss(trace.final_scores(), ex.target.as_ref().expect("covered"), direction)?.0.as_f64();
    }
    Ok(total / examples.len() as f64)
}

/// Mini-batch AdamW on the KL loss. Per-example gradients are averaged over
/// each batch and summed in batch order.
pub fn finetune<S: Scalar>(
    phase: Phase,
    init: ModelParams<S>,
    examples: &[Example<S>],
    cfg: &TrainConfig,
    epochs: usize,
    mut eval: Option<&mut EvalFn<'_, S>>,
) -> Result<FinetuneOutcome<S>> {
    cfg.validate()?;
    let trainable: Vec<&Example<S>> = examples.iter().filter(|e| e.is_covered()).collect();
    let skipped = examples.len() - trainable.len();
    if trainable.is_empty() {
        return Err(Error::NoTrainableInstances(format!("all {} {phase} examples lack an answer", examples.len())));
    }
    if skipped > 0 {
        log::info!("{phase}: skipping {skipped} of {} examples without an answer in their graph", examples.len());
    }

    let start = Instant::now();
    let mut params = init;
    let mut opt = AdamW::<S>::new(cfg.lr_other, cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ phase_salt(phase));
    let mut grad_sum = ModelParams::zeros(params.dims());
    let mut order: Vec<usize> = (0..trainable.len()).collect();

    let metric = eval.as_mut().map(|f| f(&params)).transpose()?;
    let mut history = vec![EpochRecord {
        epoch: 0,
        phase,
        loss: mean_loss(&params, &trainable, cfg.kl_direction)?,
        valid_hits_at_1: metric,
        seconds: start.elapsed().as_secs_f64(),
    }];
    let mut best = (metric, 0usize, params.clone());

    for epoch in 1..=epochs {
        order.shuffle(&mut rng);
        let mut losses = Vec::new();
        for chunk in order.chunks(cfg.batch_size) {
            grad_sum.fill_zero();
            let mut batch_loss = S::zero();
            for &i in chunk {
                let (loss, g) = example_loss(&params, trainable[i], cfg.kl_direction)?;
                batch_loss += loss;
                grad_sum.add_scaled(&g.params, S::one());
            }
            let scale = S::one() / S::lit(chunk.len() as f64);
            grad_sum.blocks_mut().into_iter().flatten().for_each(|g| *g *= scale);
            opt.step(params.blocks_mut(), grad_sum.blocks());
            losses.push((batch_loss * scale).as_f64());
        }
        if !params.is_finite() {
            return Err(Error::InvalidArgument(format!("{phase} parameters diverged at epoch {epoch}")));
        }
        let loss = losses.iter().sum::<f64>() / losses.len() as f64;
        let metric = eval.as_mut().map(|f| f(&params)).transpose()?;
        log::info!("{phase} epoch {epoch}: loss {loss:.4} valid {metric:?}");
        history.push(EpochRecord {
            epoch,
            phase,
            loss,
            valid_hits_at_1: metric,
            seconds: start.elapsed().as_secs_f64(),
        });
        match (metric, best.0) {
            (Some(m), Some(b)) if m <= b => {}
            (Some(_), _) | (None, None) => best = (metric, epoch, params.clone()),
            (None, Some(_)) => unreachable!("metric presence is fixed per run"),
        }
    }
    let (_, best_epoch, params) = best;
    Ok(FinetuneOutcome { params, best_epoch, history, skipped })
}

fn phase_salt(phase: Phase) -> u64 {
    match phase {
        Phase::Pretrain => 0x7072,
        Phase::Retrieval => 0x7265_7472,
        Phase::Reasoning => 0x7265_6173,
    }
}

/// Fine-tunes on abstract neighbourhood graphs. The encoder must be frozen.
pub fn finetune_retrieval<S: Scalar>(
    instances: &[QaInstance],
    kg: &KnowledgeGraph,
    init: ModelParams<S>,
    encoder: &Encoder<S>,
    cfg: &TrainConfig,
    max_hops: usize,
    eval: Option<&mut EvalFn<'_, S>>,
) -> Result<FinetuneOutcome<S>> {
    if !encoder.is_frozen() {
        return Err(Error::InvalidArgument("freeze the encoder before fine-tuning".into()));
    }
    let examples = instances
        .iter()
        .map(|inst| retrieval_example(kg, inst, encoder, max_hops).map(|(e, _)| e))
        .collect::<Result<Vec<_>>>()?;
    finetune(Phase::Retrieval, init, &examples, cfg, cfg.retrieval_epochs, eval)
}

/// Fine-tunes on retrieved plain subgraphs, `subgraphs[i]` for `instances[i]`.
pub fn finetune_reasoning<S: Scalar>(
    instances: &[QaInstance],
    subgraphs: &[Subgraph],
    kg: &KnowledgeGraph,
    init: ModelParams<S>,
    encoder: &Encoder<S>,
    cfg: &TrainConfig,
    eval: Option<&mut EvalFn<'_, S>>,
) -> Result<FinetuneOutcome<S>> {
    if instances.len() != subgraphs.len() {
        return Err(Error::Shape(format!("{} instances for {} subgraphs", instances.len(), subgraphs.len())));
    }
    if !encoder.is_frozen() {
        return Err(Error::InvalidArgument("freeze the encoder before fine-tuning".into()));
    }
    let examples = instances
        .iter()
        .zip(subgraphs)
        .map(|(inst, sub)| reasoning_example(kg, inst, sub, encoder))
        .collect::<Result<Vec<_>>>()?;
    finetune(Phase::Reasoning, init, &examples, cfg, cfg.reasoning_epochs, eval)
}

/// Deep copy of retrieval parameters as the reasoning initialisation.
pub fn transfer_params<S: Scalar>(retrieval: &ModelParams<S>, reasoning: Dims) -> Result<ModelParams<S>> {
    if retrieval.dims() != reasoning {
        return Err(Error::Shape(format!(
            "cannot transfer {:?} parameters into a {:?} model",
            retrieval.dims(),
            reasoning
        )));
    }
    Ok(retrieval.clone())
}
