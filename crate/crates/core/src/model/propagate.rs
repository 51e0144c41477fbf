//! Forward and reverse passes of semantic matching plus score propagation.

use super::graph::PropagationGraph;
use super::params::{ModelParams, StepParams};
use crate::error::{Error, Result};
use crate::linalg::{dot, softmax, softmax_backward, Matrix};
use crate::scalar::Scalar;

/// Encoded question and relation vectors, `relations[i]` belonging to
/// `graph.relations()[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Inputs<S> {
    pub question: Vec<S>,
    pub relations: Vec<Vec<S>>,
}

/// Entity representations and match scores after step `step`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchState<S> {
    pub step: usize,
    /// `num_nodes x d`.
    pub reps: Matrix<S>,
    /// Probability vector over nodes.
    pub scores: Vec<S>,
}

/// Intermediate values of one propagation step kept for the reverse pass.
#[derive(Clone, Debug)]
struct StepCache<S> {
    /// `h_q W_Q`.
    query: Vec<S>,
    /// `h_r W_R` per relation slot.
    keys: Matrix<S>,
    /// Matching features per relation slot.
    features: Matrix<S>,
    /// Score-weighted feature sums per node.
    agg: Matrix<S>,
}

/// Full forward record.
#[derive(Clone, Debug)]
pub struct Trace<S> {
    /// Sum of incoming relation vectors per node, `num_nodes x h`.
    rel_sum: Matrix<S>,
    pub states: Vec<MatchState<S>>,
    steps: Vec<StepCache<S>>,
}

impl<S: Scalar> Trace<S> {
    pub fn final_scores(&self) -> &[S] {
        &self.states.last().expect("trace has at least one state").scores
    }

    /// Pre-softmax scores of the final step (`None` when T = 1).
    pub fn final_logits(&self, params: &ModelParams<S>) -> Option<Vec<S>> {
        if self.states.len() < 2 {
            return None;
        }
        let reps = &self.states.last()?.reps;
        Some((0..reps.rows()).map(|n| dot(reps.row(n), &params.v)).collect())
    }
}

/// Gradients of a scalar loss with respect to parameters and inputs.
#[derive(Clone, Debug)]
pub struct Gradients<S> {
    pub params: ModelParams<S>,
    pub question: Vec<S>,
    pub relations: Vec<Vec<S>>,
}

pub(crate) fn check_inputs<S: Scalar>(graph: &PropagationGraph, inputs: &Inputs<S>, params: &ModelParams<S>) -> Result<()> {
    let h = params.hidden();
    if inputs.question.len() != h {
        return Err(Error::Shape(format!("question vector has length {}, expected {h}", inputs.question.len())));
    }
    if inputs.relations.len() != graph.relations().len() {
        return Err(Error::Shape(format!(
            "{} relation vectors for {} relations",
            inputs.relations.len(),
            graph.relations().len()
        )));
    }
    if let Some(r) = inputs.relations.iter().find(|r| r.len() != h) {
        return Err(Error::Shape(format!("relation vector has length {}, expected {h}", r.len())));
    }
    Ok(())
}

/// `sigmoid(h_q W_Q ⊙ h_r W_R)` for the given step's layers.
pub fn matching_features<S: Scalar>(question: &[S], relation: &[S], step: &StepParams<S>) -> Vec<S> {
    let q = step.wq.vecmat(question);
    let r = step.wr.vecmat(relation);
    q.iter().zip(&r).map(|(&a, &b)| (a * b).sigmoid()).collect()
}

fn relation_sums<S: Scalar>(graph: &PropagationGraph, inputs: &Inputs<S>, h: usize) -> Matrix<S> {
    let mut sums = Matrix::zeros(graph.num_nodes(), h);
    for e in graph.edges() {
        for (s, &x) in sums.row_mut(e.dst).iter_mut().zip(&inputs.relations[e.slot]) {
            *s += x;
        }
    }
    sums
}

/// Step-1 state: uniform scores on topics, `sigmoid(sum_r h_r U)` representations.
pub(crate) fn initial_state<S: Scalar>(
    graph: &PropagationGraph,
    inputs: &Inputs<S>,
    params: &ModelParams<S>,
) -> Result<(Matrix<S>, MatchState<S>)> {
    check_inputs(graph, inputs, params)?;
    if graph.topics().is_empty() {
        return Err(Error::InvalidArgument("graph has no topic nodes".into()));
    }
    let rel_sum = relation_sums(graph, inputs, params.hidden());
    let d = params.features();
    let mut reps = Matrix::zeros(graph.num_nodes(), d);
    for n in 0..graph.num_nodes() {
        let z = params.u.vecmat(rel_sum.row(n));
        for (r, zk) in reps.row_mut(n).iter_mut().zip(z) {
            *r = zk.sigmoid();
        }
    }
    let mut scores = vec![S::zero(); graph.num_nodes()];
    let w = S::one() / S::lit(graph.topics().len() as f64);
    for &t in graph.topics() {
        scores[t] = w;
    }
    Ok((rel_sum, MatchState { step: 1, reps, scores }))
}

fn step_forward<S: Scalar>(
    graph: &PropagationGraph,
    inputs: &Inputs<S>,
    step: &StepParams<S>,
    v: &[S],
    prev: &MatchState<S>,
) -> (StepCache<S>, MatchState<S>) {
    let d = v.len();
    let n_rel = graph.relations().len();
    let query = step.wq.vecmat(&inputs.question);
    let mut keys = Matrix::zeros(n_rel, d);
    let mut features = Matrix::zeros(n_rel, d);
    for slot in 0..n_rel {
        let k = step.wr.vecmat(&inputs.relations[slot]);
        for j in 0..d {
            features[(slot, j)] = (query[j] * k[j]).sigmoid();
        }
        keys.row_mut(slot).copy_from_slice(&k);
    }

    let n = graph.num_nodes();
    let mut agg = Matrix::zeros(n, d);
    for node in 0..n {
        let row = agg.row_mut(node);
        for e in graph.incoming(node) {
            let w = prev.scores[e.src];
            if w == S::zero() {
                continue;
            }
            for (a, &m) in row.iter_mut().zip(features.row(e.slot)) {
                *a += w * m;
            }
        }
    }

    let mut reps = Matrix::zeros(n, d);
    for node in 0..n {
        let out = reps.row_mut(node);
        step.we.acc_vecmat_rows(prev.reps.row(node), 0, out);
        step.we.acc_vecmat_rows(agg.row(node), d, out);
    }
    let logits: Vec<S> = (0..n).map(|node| dot(reps.row(node), v)).collect();
    let scores = softmax(&logits);
    (StepCache { query, keys, features, agg }, MatchState { step: prev.step + 1, reps, scores })
}

pub(crate) fn next_state<S: Scalar>(
    graph: &PropagationGraph,
    inputs: &Inputs<S>,
    params: &ModelParams<S>,
    prev: &MatchState<S>,
) -> Result<MatchState<S>> {
    check_inputs(graph, inputs, params)?;
    let step = params.step(prev.step + 1)?;
    if prev.scores.len() != graph.num_nodes() || prev.reps.shape() != (graph.num_nodes(), params.features()) {
        return Err(Error::Shape("state does not match graph and parameters".into()));
    }
    Ok(step_forward(graph, inputs, step, &params.v, prev).1)
}

pub fn forward<S: Scalar>(graph: &PropagationGraph, inputs: &Inputs<S>, params: &ModelParams<S>) -> Result<Trace<S>> {
    let (rel_sum, init) = initial_state(graph, inputs, params)?;
    let mut states = vec![init];
    let mut steps = Vec::with_capacity(params.steps.len());
    for sp in &params.steps {
        let (cache, state) = step_forward(graph, inputs, sp, &params.v, states.last().expect("nonempty"));
        steps.push(cache);
        states.push(state);
    }
    Ok(Trace { rel_sum, states, steps })
}

/// Reverse pass given `dL/dlogits` of the final softmax. Returns zero
/// gradients when T = 1 (the output does not depend on any parameter).
pub fn backward<S: Scalar>(
    graph: &PropagationGraph,
    inputs: &Inputs<S>,
    params: &ModelParams<S>,
    trace: &Trace<S>,
    final_logit_grad: &[S],
) -> Gradients<S> {
    let d = params.features();
    let h = params.hidden();
    let n = graph.num_nodes();
    let n_rel = graph.relations().len();
    let mut grads = Gradients {
        params: ModelParams::zeros(params.dims()),
        question: vec![S::zero(); h],
        relations: vec![vec![S::zero(); h]; n_rel],
    };
    let t_last = trace.states.len() - 1;
    if t_last == 0 {
        return grads;
    }

    let mut d_reps = Matrix::zeros(n, d);
    accumulate_logit_grad(final_logit_grad, &trace.states[t_last].reps, &params.v, &mut grads.params.v, &mut d_reps);

    for i in (0..params.steps.len()).rev() {
        let sp = &params.steps[i];
        let cache = &trace.steps[i];
        let prev = &trace.states[i];
        let g = &mut grads.params.steps[i];

        let mut d_prev = Matrix::zeros(n, d);
        let mut d_agg = Matrix::zeros(n, d);
        for node in 0..n {
            let dr = d_reps.row(node);
            g.we.add_outer_rows(prev.reps.row(node), dr, 0);
            g.we.add_outer_rows(cache.agg.row(node), dr, d);
            sp.we.acc_matvec_rows(dr, 0, d_prev.row_mut(node));
            sp.we.acc_matvec_rows(dr, d, d_agg.row_mut(node));
        }

        let mut d_scores = vec![S::zero(); n];
        let mut d_feat = Matrix::<S>::zeros(n_rel, d);
        for e in graph.edges() {
            let da = d_agg.row(e.dst);
            d_scores[e.src] += dot(da, cache.features.row(e.slot));
            let w = prev.scores[e.src];
            if w != S::zero() {
                for (f, &x) in d_feat.row_mut(e.slot).iter_mut().zip(da) {
                    *f += w * x;
                }
            }
        }

        let mut d_query = vec![S::zero(); d];
        for slot in 0..n_rel {
            let m = cache.features.row(slot);
            let k = cache.keys.row(slot);
            let d_pre: Vec<S> = d_feat.row(slot).iter().zip(m).map(|(&g, &m)| g * m * (S::one() - m)).collect();
            let d_key: Vec<S> = d_pre.iter().zip(&cache.query).map(|(&p, &q)| p * q).collect();
            for j in 0..d {
                d_query[j] += d_pre[j] * k[j];
            }
            g.wr.add_outer(&inputs.relations[slot], &d_key);
            sp.wr.acc_matvec_rows(&d_key, 0, &mut grads.relations[slot]);
        }
        g.wq.add_outer(&inputs.question, &d_query);
        sp.wq.acc_matvec_rows(&d_query, 0, &mut grads.question);

        if i > 0 {
            // the previous scores came out of a softmax over reps . v
            let d_logits = softmax_backward(&prev.scores, &d_scores);
            accumulate_logit_grad(&d_logits, &prev.reps, &params.v, &mut grads.params.v, &mut d_prev);
        }
        d_reps = d_prev;
    }

    // step 1: reps = sigmoid(rel_sum U)
    let init = &trace.states[0].reps;
    let mut d_rel_sum = Matrix::zeros(n, h);
    for node in 0..n {
        let dz: Vec<S> = d_reps.row(node).iter().zip(init.row(node)).map(|(&g, &e)| g * e * (S::one() - e)).collect();
        grads.params.u.add_outer(trace.rel_sum.row(node), &dz);
        params.u.acc_matvec_rows(&dz, 0, d_rel_sum.row_mut(node));
    }
    for e in graph.edges() {
        for (g, &x) in grads.relations[e.slot].iter_mut().zip(d_rel_sum.row(e.dst)) {
            *g += x;
        }
    }
    grads
}

fn accumulate_logit_grad<S: Scalar>(d_logits: &[S], reps: &Matrix<S>, v: &[S], d_v: &mut [S], d_reps: &mut Matrix<S>) {
    for (node, &g) in d_logits.iter().enumerate() {
        if g == S::zero() {
            continue;
        }
        for (dv, &r) in d_v.iter_mut().zip(reps.row(node)) {
            *dv += g * r;
        }
        for (dr, &vk) in d_reps.row_mut(node).iter_mut().zip(v) {
            *dr += g * vk;
        }
    }
}
