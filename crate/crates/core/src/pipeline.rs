//! Two-stage inference: abstract retrieval, grounding, then reasoning.

use std::cmp::Ordering;

use serde::Serialize;

use crate::abstraction::{abstract_subgraph, AbstractSubgraph};
use crate::encoder::Encoder;
use crate::error::{Error, Result};
use crate::kg::{k_hop_subgraph, EntityId, KnowledgeGraph, QaInstance, Subgraph};
use crate::model::{encode_inputs, forward, ModelParams, PropagationGraph, Trace};
use crate::scalar::Scalar;

/// A retrieved subgraph and how it was chosen.
#[derive(Clone, Debug)]
pub struct RetrievalResult {
    pub question_id: String,
    /// Induced over the grounded entities plus the topics.
    pub subgraph: Subgraph,
    /// Selected abstract node ids with their ranking scores, best first.
    pub selected: Vec<(usize, f64)>,
    /// Whether any gold answer survived; `None` without gold answers.
    pub coverage: Option<bool>,
    pub abstract_graph: AbstractSubgraph,
}

/// How abstract nodes are ranked for top-K selection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ScoreMode {
    /// Final-step scores only. Intermediate path nodes tend to lose their
    /// mass to the next hop and drop out of the top K.
    Final,
    /// Highest score a node reaches at any step, so every hop of a
    /// propagated path stays eligible.
    #[default]
    MaxStep,
}

impl std::str::FromStr for ScoreMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "final" => Ok(Self::Final),
            "max_step" => Ok(Self::MaxStep),
            _ => Err(Error::Config(format!("unknown score mode {s:?} (final | max_step)"))),
        }
    }
}

impl ScoreMode {
    pub fn node_scores<S: Scalar>(self, trace: &Trace<S>) -> Vec<S> {
        match self {
            Self::Final => trace.final_scores().to_vec(),
            Self::MaxStep => {
                let mut best = trace.states[0].scores.clone();
                for state in &trace.states[1..] {
                    for (b, &s) in best.iter_mut().zip(&state.scores) {
                        *b = b.max(s);
                    }
                }
                best
            }
        }
    }
}

/// Indices of the `k` largest values, descending; ties by ascending index.
pub fn top_k<S: Scalar>(scores: &[S], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    order.truncate(k);
    order
}

/// Scores the abstracted `max_hops` neighbourhood with `params` and keeps
/// the top `k` abstract nodes under [`ScoreMode::MaxStep`].
pub fn retrieve<S: Scalar>(
    question: &QaInstance,
    kg: &KnowledgeGraph,
    params: &ModelParams<S>,
    encoder: &Encoder<S>,
    k: usize,
    max_hops: usize,
) -> Result<RetrievalResult> {
    retrieve_with(question, kg, params, encoder, k, max_hops, ScoreMode::default())
}

pub fn retrieve_with<S: Scalar>(
    question: &QaInstance,
    kg: &KnowledgeGraph,
    params: &ModelParams<S>,
    encoder: &Encoder<S>,
    k: usize,
    max_hops: usize,
    mode: ScoreMode,
) -> Result<RetrievalResult> {
    if k == 0 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    let neighbourhood = k_hop_subgraph(kg, &question.topic_entities, max_hops)?;
    if neighbourhood.is_empty() {
        return Err(Error::Empty(format!("{}: empty neighbourhood", question.id)));
    }
    let abs = abstract_subgraph(&neighbourhood, &question.topic_entities)?;
    let graph = PropagationGraph::from_abstract(&abs)?;
    let inputs = encode_inputs(encoder, kg, &question.question, &graph)?;
    let scores = mode.node_scores(&forward(&graph, &inputs, params)?);
    let chosen = top_k(&scores, k);
    let mut entities = abs.ground(&chosen)?;
    entities.extend(question.topic_entities.iter().copied());
    let subgraph = Subgraph::induced(kg, entities);
    let coverage = (!question.answers.is_empty()).then(|| question.answers.iter().any(|&a| subgraph.contains(a)));
    Ok(RetrievalResult {
        question_id: question.id.clone(),
        subgraph,
        selected: chosen.iter().map(|&i| (i, scores[i].as_f64())).collect(),
        coverage,
        abstract_graph: abs,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RankedEntity {
    pub entity: EntityId,
    pub score: f64,
}

/// Full ranking of the non-topic entities of `subgraph`; ties by id.
pub fn rank_entities<S: Scalar>(
    question: &QaInstance,
    subgraph: &Subgraph,
    kg: &KnowledgeGraph,
    params: &ModelParams<S>,
    encoder: &Encoder<S>,
) -> Result<Vec<RankedEntity>> {
    if subgraph.is_empty() {
        return Err(Error::Empty(format!("{}: empty retrieved subgraph", question.id)));
    }
    let graph = PropagationGraph::from_subgraph(subgraph, &question.topic_entities)?;
    let inputs = encode_inputs(encoder, kg, &question.question, &graph)?;
    let scores = forward(&graph, &inputs, params)?.final_scores().to_vec();
    // entities are sorted, so index order is id order
    Ok(top_k(&scores, scores.len())
        .into_iter()
        .filter(|&i| !question.topic_entities.contains(&subgraph.entities[i]))
        .map(|i| RankedEntity { entity: subgraph.entities[i], score: scores[i].as_f64() })
        .collect())
}

/// Top `top_n` answer entities.
pub fn answer<S: Scalar>(
    question: &QaInstance,
    retrieval: &RetrievalResult,
    kg: &KnowledgeGraph,
    params: &ModelParams<S>,
    encoder: &Encoder<S>,
    top_n: usize,
) -> Result<Vec<RankedEntity>> {
    let mut ranked = rank_entities(question, &retrieval.subgraph, kg, params, encoder)?;
    ranked.truncate(top_n);
    Ok(ranked)
}
