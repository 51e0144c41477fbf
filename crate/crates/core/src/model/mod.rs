//! Semantic matching and score propagation over a subgraph.
//!
//! The same model scores abstract subgraphs during retrieval and plain
//! subgraphs during reasoning: step 1 puts uniform mass on the topic nodes
//! and summarises each node by its incoming relations; each later step
//! aggregates score-weighted question/relation matching features along
//! edges, updates node representations linearly and renormalises scores
//! with a softmax.

mod checkpoint;
mod graph;
mod params;
mod propagate;

pub use checkpoint::Checkpoint;
pub use graph::{Edge, PropagationGraph};
pub use params::{Dims, ModelParams, StepParams};
pub use propagate::{backward, forward, matching_features, Gradients, Inputs, MatchState, Trace};

use crate::encoder::{Encoder, TextKind};
use crate::error::{Error, Result};
use crate::kg::KnowledgeGraph;
use crate::scalar::Scalar;

/// Matching features of a question/relation pair at propagation step `t`.
pub fn sm_features<S: Scalar>(question: &[S], relation: &[S], t: usize, params: &ModelParams<S>) -> Result<Vec<S>> {
    let h = params.hidden();
    if question.len() != h || relation.len() != h {
        return Err(Error::Shape(format!(
            "inputs of length {} and {} for hidden size {h}",
            question.len(),
            relation.len()
        )));
    }
    Ok(matching_features(question, relation, params.step(t)?))
}

pub fn init_state<S: Scalar>(graph: &PropagationGraph, inputs: &Inputs<S>, params: &ModelParams<S>) -> Result<MatchState<S>> {
    propagate::initial_state(graph, inputs, params).map(|(_, s)| s)
}

/// Advances `state` by one step.
pub fn propagate_step<S: Scalar>(
    state: &MatchState<S>,
    graph: &PropagationGraph,
    inputs: &Inputs<S>,
    params: &ModelParams<S>,
) -> Result<MatchState<S>> {
    propagate::next_state(graph, inputs, params, state)
}

/// Encodes the question and every relation present in `graph`.
pub fn encode_inputs<S: Scalar>(
    encoder: &Encoder<S>,
    kg: &KnowledgeGraph,
    question: &str,
    graph: &PropagationGraph,
) -> Result<Inputs<S>> {
    let labels: Vec<String> = graph.relations().iter().map(|&r| kg.relation_label(r)).collect();
    Ok(Inputs {
        question: encoder.encode(question, TextKind::Question)?,
        relations: encoder.encode_batch(&labels, TextKind::Relation)?,
    })
}

/// Final match scores over the nodes of `graph`.
pub fn reason<S: Scalar>(
    question: &str,
    graph: &PropagationGraph,
    params: &ModelParams<S>,
    encoder: &Encoder<S>,
    kg: &KnowledgeGraph,
) -> Result<Vec<S>> {
    if graph.num_nodes() == 0 {
        return Err(Error::Empty("cannot reason over an empty graph".into()));
    }
    let inputs = encode_inputs(encoder, kg, question, graph)?;
    Ok(forward(graph, &inputs, params)?.final_scores().to_vec())
}
