#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::{BTreeMap, BTreeSet};

use kgqa::kg::{EntityId, KnowledgeGraph, QaInstance, RelationId};
use kgqa::linalg::Matrix;
use kgqa::model::ModelParams;
use rand::Rng;

/// Random graph over `e0..e{n-1}` and `r0..r{m-1}`; every entity exists
/// even when isolated.
pub fn random_kg<R: Rng>(rng: &mut R, entities: usize, relations: usize, triples: usize) -> KnowledgeGraph {
    let mut b = KnowledgeGraph::builder();
    for e in 0..entities {
        b.add_entity(&format!("e{e}"));
    }
    for r in 0..relations {
        b.add_relation(&format!("r{r}")).unwrap();
    }
    for _ in 0..triples {
        let h = rng.gen_range(0..entities);
        let t = rng.gen_range(0..entities);
        let r = rng.gen_range(0..relations);
        b.add_triple(&format!("e{h}"), &format!("r{r}"), &format!("e{t}")).unwrap();
    }
    b.build()
}

pub fn random_vec<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn row_times(x: &[f64], m: &Matrix<f64>, row_offset: usize, cols: usize) -> Vec<f64> {
    (0..cols).map(|j| (0..x.len()).map(|i| x[i] * m[(row_offset + i, j)]).sum()).collect()
}

/// Every intermediate score vector of the matching/propagation model,
/// written as plain loops over the triple list.
pub fn dense_reason(
    num_nodes: usize,
    triples: &[(usize, RelationId, usize)],
    topics: &[usize],
    question: &[f64],
    relation_vecs: &BTreeMap<RelationId, Vec<f64>>,
    params: &ModelParams<f64>,
) -> Vec<Vec<f64>> {
    let d = params.v.len();
    let h = question.len();
    let unique: BTreeSet<(usize, RelationId, usize)> = triples.iter().copied().collect();

    let mut s = vec![0.0; num_nodes];
    let topic_set: BTreeSet<usize> = topics.iter().copied().collect();
    for &t in &topic_set {
        s[t] = 1.0 / topic_set.len() as f64;
    }
    let mut e = vec![vec![0.0; d]; num_nodes];
    for n in 0..num_nodes {
        let mut pre = vec![0.0; d];
        for &(_, r, dst) in &unique {
            if dst == n {
                let hr = &relation_vecs[&r];
                for j in 0..d {
                    for i in 0..h {
                        pre[j] += hr[i] * params.u[(i, j)];
                    }
                }
            }
        }
        e[n] = pre.into_iter().map(sigmoid).collect();
    }
    let mut all = vec![s.clone()];
    for step in &params.steps {
        let q = row_times(question, &step.wq, 0, d);
        let mut next_e = vec![vec![0.0; d]; num_nodes];
        for n in 0..num_nodes {
            let mut agg = vec![0.0; d];
            for &(src, r, dst) in &unique {
                if dst != n {
                    continue;
                }
                let k = row_times(&relation_vecs[&r], &step.wr, 0, d);
                for j in 0..d {
                    agg[j] += s[src] * sigmoid(q[j] * k[j]);
                }
            }
            let a = row_times(&e[n], &step.we, 0, d);
            let b = row_times(&agg, &step.we, d, d);
            next_e[n] = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        }
        let logits: Vec<f64> = next_e.iter().map(|row| row.iter().zip(&params.v).map(|(x, y)| x * y).sum()).collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        s = exps.into_iter().map(|x| x / z).collect();
        e = next_e;
        all.push(s.clone());
    }
    all
}

/// Relations on minimum-length topic -> answer paths: enumerates every
/// simple path of length 1, 2, ... and stops at the first length that
/// reaches the answer.
pub fn brute_force_path_relations(g: &KnowledgeGraph, inst: &QaInstance) -> BTreeSet<RelationId> {
    let mut out = BTreeSet::new();
    for &topic in &inst.topic_entities {
        for &answer in &inst.answers {
            if topic == answer || !reachable(g, topic).contains(&answer) {
                continue;
            }
            for len in 1..=g.num_entities() {
                let mut paths = Vec::new();
                let mut visited = BTreeSet::from([topic]);
                dfs(g, topic, answer, len, &mut visited, &mut Vec::new(), &mut paths);
                if !paths.is_empty() {
                    out.extend(paths.into_iter().flatten());
                    break;
                }
            }
        }
    }
    out
}

/// Fixpoint over the triple list.
fn reachable(g: &KnowledgeGraph, from: EntityId) -> BTreeSet<EntityId> {
    let mut seen = BTreeSet::from([from]);
    loop {
        let before = seen.len();
        for t in g.triples() {
            if seen.contains(&t.head) {
                seen.insert(t.tail);
            }
        }
        if seen.len() == before {
            return seen;
        }
    }
}

fn dfs(
    g: &KnowledgeGraph,
    at: EntityId,
    goal: EntityId,
    len: usize,
    visited: &mut BTreeSet<EntityId>,
    stack: &mut Vec<RelationId>,
    paths: &mut Vec<Vec<RelationId>>,
) {
    if stack.len() == len {
        if at == goal {
            paths.push(stack.clone());
        }
        return;
    }
    // scan every stored triple instead of using the adjacency index
    for t in g.triples() {
        if t.head != at || visited.contains(&t.tail) {
            continue;
        }
        visited.insert(t.tail);
        stack.push(t.relation);
        dfs(g, t.tail, goal, len, visited, stack, paths);
        stack.pop();
        visited.remove(&t.tail);
    }
}

/// Fourth-order central difference of `g` at `x`.
pub fn five_point(x: f64, step: f64, mut g: impl FnMut(f64) -> f64) -> f64 {
    (g(x - 2.0 * step) - 8.0 * g(x - step) + 8.0 * g(x + step) - g(x + 2.0 * step)) / (12.0 * step)
}

/// Central finite difference of `f` at `x[i]`.
pub fn central_difference(x: &mut [f64], i: usize, step: f64, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let orig = x[i];
    let fd = five_point(orig, step, |v| {
        x[i] = v;
        f(x)
    });
    x[i] = orig;
    fd
}

/// `|a - b| / max(|a|, |b|, 1e-6)`; the floor keeps near-zero gradients from
/// turning rounding noise into large relative errors.
pub fn rel_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// A small random graph plus a question whose answers sit 1-2 hops from its
/// topic, with a toy encoder covering the relation names.
pub fn random_instance<R: Rng>(rng: &mut R) -> (KnowledgeGraph, QaInstance, kgqa::encoder::Encoder<f64>) {
    use kgqa::encoder::{relation_text, Backend, Encoder, ToyEncoder};
    loop {
        let g = random_kg(rng, 10, 3, 14);
        let topic = EntityId(rng.gen_range(0..10));
        let near = kgqa::kg::k_hop_subgraph(&g, &[topic], 2).unwrap();
        let candidates: Vec<EntityId> = near.entities.iter().copied().filter(|&e| e != topic).collect();
        if candidates.len() < 2 {
            continue;
        }
        let answers = vec![candidates[rng.gen_range(0..candidates.len())]];
        let inst = QaInstance { id: "q".into(), question: "what is the r0 of r2".into(), topic_entities: vec![topic], answers };
        let mut texts: Vec<String> = g.relation_ids().map(|r| relation_text(&g.relation_label(r))).collect();
        texts.push(inst.question.clone());
        let toy = ToyEncoder::from_texts(texts.iter().map(String::as_str), 4, rng);
        let mut enc = Encoder::new(Backend::Toy(toy));
        enc.freeze();
        return (g, inst, enc);
    }
}

/// Largest relative error between `analytic` and central differences of
/// `loss` over every parameter value.
pub fn max_param_grad_error(
    params: &ModelParams<f64>,
    step: f64,
    analytic: &ModelParams<f64>,
    loss: impl Fn(&ModelParams<f64>) -> f64,
) -> (f64, String) {
    let names = params.block_names();
    let mut worst = (0.0, String::new());
    let mut probe = params.clone();
    for (b, name) in names.iter().enumerate() {
        for i in 0..params.blocks()[b].len() {
            let orig = probe.blocks()[b][i];
            let fd = five_point(orig, step, |v| {
                probe.blocks_mut()[b][i] = v;
                loss(&probe)
            });
            probe.blocks_mut()[b][i] = orig;
            let err = rel_error(analytic.blocks()[b][i], fd);
            if err > worst.0 {
                worst = (err, format!("{name}[{i}]"));
            }
        }
    }
    worst
}

/// Worst relative error of the KL loss gradients of `ex`: every parameter
/// value, then the question and relation inputs.
pub fn kl_grad_error(
    params: &ModelParams<f64>,
    ex: &kgqa::training::Example<f64>,
    direction: kgqa::training::KlDirection,
) -> (f64, String) {
    use kgqa::training::example_loss;
    let (_, grads) = example_loss(params, ex, direction).unwrap();
    let step = 1e-4;
    let mut worst = max_param_grad_error(params, step, &grads.params, |p| example_loss(p, ex, direction).unwrap().0);
    let mut q = ex.inputs.question.clone();
    for i in 0..q.len() {
        let fd = central_difference(&mut q, i, step, |q| {
            let mut e = ex.clone();
            e.inputs.question = q.to_vec();
            example_loss(params, &e, direction).unwrap().0
        });
        let err = rel_error(grads.question[i], fd);
        if err > worst.0 {
            worst = (err, format!("question[{i}]"));
        }
    }
    for (slot, rel) in ex.inputs.relations.iter().enumerate() {
        let mut v = rel.clone();
        for i in 0..v.len() {
            let fd = central_difference(&mut v, i, step, |v| {
                let mut e = ex.clone();
                e.inputs.relations[slot] = v.to_vec();
                example_loss(params, &e, direction).unwrap().0
            });
            let err = rel_error(grads.relations[slot][i], fd);
            if err > worst.0 {
                worst = (err, format!("relation {slot}[{i}]"));
            }
        }
    }
    worst
}

/// Worst relative error of the contrastive gradient over the toy table.
pub fn contrastive_grad_error(
    toy: &kgqa::encoder::ToyEncoder<f64>,
    batch: &[kgqa::training::ContrastiveItem],
    temperature: f64,
) -> f64 {
    use kgqa::training::contrastive_loss;
    let (_, grad) = contrastive_loss(toy, batch, temperature);
    let mut table = toy.table().as_slice().to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..table.len() {
        let fd = central_difference(&mut table, i, 1e-4, |t| {
            let mut probe = toy.clone();
            probe.table_mut().as_mut_slice().copy_from_slice(t);
            contrastive_loss(&probe, batch, temperature).0
        });
        worst = worst.max(rel_error(grad.as_slice()[i], fd));
    }
    worst
}

/// A batch of three items over the relations of a [`random_instance`] graph.
pub fn contrastive_batch(g: &KnowledgeGraph) -> Vec<kgqa::training::ContrastiveItem> {
    let labels: Vec<String> = g.relation_ids().map(|r| g.relation_label(r)).collect();
    (0..3)
        .map(|i| kgqa::training::ContrastiveItem {
            question: ["what is the r0 of r2", "r1", "what r2"][i].into(),
            positive: labels[i].clone(),
            negatives: vec![labels[(i + 3) % labels.len()].clone()],
            excluded: BTreeSet::from([labels[i].clone()]),
        })
        .collect()
}

/// A random instance lowered to a covered training example with at least
/// two nodes, on the abstract graph or the plain 2-hop subgraph.
pub fn random_example<R: Rng>(rng: &mut R, abstract_graph: bool) -> kgqa::training::Example<f64> {
    use kgqa::training::{reasoning_example, retrieval_example};
    loop {
        let (g, inst, enc) = random_instance(rng);
        let ex = if abstract_graph {
            retrieval_example(&g, &inst, &enc, 2).unwrap().0
        } else {
            reasoning_example(&g, &inst, &kgqa::kg::k_hop_subgraph(&g, &inst.topic_entities, 2).unwrap(), &enc)
                .unwrap()
        };
        if ex.target.is_some() && ex.graph.num_nodes() >= 2 {
            return ex;
        }
    }
}
