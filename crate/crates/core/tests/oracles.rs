//! Independent re-implementations checked against the library.
#![allow(clippy::needless_range_loop)]

mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::*;
use kgqa::abstraction::abstract_subgraph;
use kgqa::kg::{
    k_hop_subgraph, personalized_pagerank, shortest_path_relations, EntityId, KnowledgeGraph, PathConfig, PprConfig,
    QaInstance, RelationId,
};
use kgqa::linalg::Matrix;
use kgqa::model::{forward, init_state, propagate_step, sm_features, Dims, Inputs, MatchState, ModelParams, PropagationGraph};
use kgqa::training::{kl_divergence, kl_loss, KlDirection};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn neighbourhood_matches_linear_scan() {
    let mut r = rng(1);
    for _ in 0..20 {
        let n_triples = r.gen_range(1..=500);
        let g = random_kg(&mut r, 60, 6, n_triples);
        for e in g.entity_ids() {
            let mut want: Vec<_> = g.triples().iter().filter(|t| t.tail == e).copied().collect();
            let mut got = g.neighborhood(e).unwrap().to_vec();
            want.sort();
            got.sort();
            assert_eq!(got, want);
        }
    }
}

#[test]
fn inverse_closure_and_involution() {
    let g = random_kg(&mut rng(2), 30, 5, 80);
    for t in g.triples() {
        assert!(g.contains_triple(&t.inverse()));
        assert_eq!(t.relation.inverse().inverse(), t.relation);
        assert_ne!(t.relation.inverse(), t.relation);
    }
}

/// Frontier expansion by scanning all triples each round.
fn naive_k_hop(g: &KnowledgeGraph, topics: &[EntityId], k: usize) -> BTreeSet<EntityId> {
    let mut seen: BTreeSet<EntityId> = topics.iter().copied().collect();
    let mut frontier = seen.clone();
    for _ in 0..k {
        let next: BTreeSet<EntityId> =
            g.triples().iter().filter(|t| frontier.contains(&t.head)).map(|t| t.tail).filter(|e| !seen.contains(e)).collect();
        seen.extend(next.iter().copied());
        frontier = next;
    }
    seen
}

#[test]
fn k_hop_matches_bfs_oracle_and_is_monotone() {
    let mut r = rng(3);
    for _ in 0..30 {
        let g = random_kg(&mut r, 80, 5, 100);
        let topics = vec![EntityId(r.gen_range(0..80))];
        let mut prev = BTreeSet::new();
        for k in 1..=4 {
            let sub = k_hop_subgraph(&g, &topics, k).unwrap();
            let got: BTreeSet<_> = sub.entities.iter().copied().collect();
            assert_eq!(got, naive_k_hop(&g, &topics, k));
            assert!(prev.is_subset(&got));
            for t in &sub.triples {
                assert!(got.contains(&t.head) && got.contains(&t.tail));
            }
            prev = got;
        }
    }
}

#[test]
fn shortest_path_relations_match_enumeration() {
    let mut r = rng(4);
    for _ in 0..100 {
        let n = r.gen_range(3..=30);
        let n_triples = r.gen_range(n..=n + n / 2);
        let g = random_kg(&mut r, n, 4, n_triples);
        let inst = QaInstance {
            id: "q".into(),
            question: String::new(),
            topic_entities: vec![EntityId(r.gen_range(0..n as u32))],
            answers: (0..r.gen_range(1..=2)).map(|_| EntityId(r.gen_range(0..n as u32))).collect(),
        };
        assert_eq!(shortest_path_relations(&g, &inst, PathConfig::default()), brute_force_path_relations(&g, &inst));
    }
}

#[test]
fn diamond_keeps_both_shortest_paths() {
    let mut b = KnowledgeGraph::builder();
    for (h, r, t) in [("a", "r1", "b"), ("b", "r2", "d"), ("a", "r3", "c"), ("c", "r4", "d")] {
        b.add_triple(h, r, t).unwrap();
    }
    let g = b.build();
    let inst = QaInstance {
        id: "q".into(),
        question: String::new(),
        topic_entities: vec![g.entity("a").unwrap()],
        answers: vec![g.entity("d").unwrap()],
    };
    let want: BTreeSet<RelationId> = ["r1", "r2", "r3", "r4"].iter().map(|l| g.relation(l).unwrap()).collect();
    assert_eq!(shortest_path_relations(&g, &inst, PathConfig::default()), want);
    assert_eq!(brute_force_path_relations(&g, &inst), want);
}

#[test]
fn ppr_is_a_distribution() {
    let mut r = rng(5);
    for _ in 0..10 {
        let g = random_kg(&mut r, 40, 3, 90);
        let seeds = [EntityId(0), EntityId(7)];
        let p = personalized_pagerank(&g, &seeds, PprConfig::default()).unwrap();
        assert!((p.scores.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }
}

#[test]
fn abstraction_grounds_back_to_the_source_entities() {
    let mut r = rng(6);
    for _ in 0..50 {
        let g = random_kg(&mut r, 40, 4, 70);
        let topic = EntityId(r.gen_range(0..40));
        let sub = k_hop_subgraph(&g, &[topic], 2).unwrap();
        let abs = abstract_subgraph(&sub, &[topic]).unwrap();
        let all: Vec<usize> = (0..abs.num_nodes()).collect();
        let grounded: Vec<EntityId> = abs.ground(&all).unwrap().into_iter().collect();
        assert_eq!(grounded, sub.entities);
    }
}

fn random_params(r: &mut ChaCha8Rng, t: usize, d: usize, h: usize) -> ModelParams<f64> {
    ModelParams::random(Dims { num_steps: t, features: d, hidden: h }, r).unwrap()
}

#[test]
fn reason_matches_dense_oracle() {
    let mut r = rng(7);
    for case in 0..100 {
        let n = r.gen_range(1..=10);
        let n_rel = r.gen_range(1..=4u32);
        let mut triples = Vec::new();
        for _ in 0..r.gen_range(0..=2 * n) {
            let (a, b, rel) = (r.gen_range(0..n), r.gen_range(0..n), RelationId(2 * r.gen_range(0..n_rel)));
            triples.push((a, rel, b));
            triples.push((b, rel.inverse(), a));
        }
        let topics: Vec<usize> = (0..r.gen_range(1..=2)).map(|_| r.gen_range(0..n)).collect();
        let (t, d, h) = (r.gen_range(1..=4), r.gen_range(1..=5), r.gen_range(1..=5));
        let params = random_params(&mut r, t, d, h);
        let graph = PropagationGraph::new(n, &triples, topics.clone()).unwrap();
        let question = random_vec(&mut r, h);
        let vecs: BTreeMap<RelationId, Vec<f64>> =
            graph.relations().iter().map(|&rel| (rel, random_vec(&mut r, h))).collect();
        let inputs = Inputs { question: question.clone(), relations: graph.relations().iter().map(|x| vecs[x].clone()).collect() };
        let trace = forward(&graph, &inputs, &params).unwrap();
        let want = dense_reason(n, &triples, &topics, &question, &vecs, &params);
        assert_eq!(trace.states.len(), want.len());
        for (state, oracle) in trace.states.iter().zip(&want) {
            for (a, b) in state.scores.iter().zip(oracle) {
                assert!((a - b).abs() <= 1e-10 * b.abs().max(1e-300) || (a - b).abs() < 1e-15, "case {case}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn sm_features_closed_forms_and_loop_oracle() {
    let mut r = rng(8);
    let mut p = random_params(&mut r, 2, 4, 4);
    let zero = sm_features(&[0.0; 4], &random_vec(&mut r, 4), 2, &p).unwrap();
    assert!(zero.iter().all(|&m| m == 0.5));

    p.steps[0].wq = Matrix::identity(4);
    p.steps[0].wr = Matrix::identity(4);
    let ones = sm_features(&[1.0; 4], &[1.0; 4], 2, &p).unwrap();
    let s1 = 1.0 / (1.0 + (-1.0f64).exp());
    assert!(ones.iter().all(|&m| (m - s1).abs() < 1e-15 && (m - 0.7310585786300049).abs() < 1e-15));

    let p = random_params(&mut r, 3, 4, 5);
    let (q, rv) = (random_vec(&mut r, 5), random_vec(&mut r, 5));
    let got = sm_features(&q, &rv, 3, &p).unwrap();
    let st = &p.steps[1];
    for j in 0..4 {
        let mut a = 0.0;
        let mut b = 0.0;
        for i in 0..5 {
            a += q[i] * st.wq[(i, j)];
            b += rv[i] * st.wr[(i, j)];
        }
        assert!((got[j] - 1.0 / (1.0 + (-(a * b)).exp())).abs() < 1e-14);
    }
    assert!(sm_features(&q, &rv[..4], 3, &p).is_err());
    assert!(sm_features(&q, &rv, 4, &p).is_err());
}

#[test]
fn init_state_examples() {
    let mut r = rng(9);
    let mut p = random_params(&mut r, 2, 3, 3);
    let hr = vec![0.3, -0.2, 0.9];
    let graph = PropagationGraph::new(4, &[(0, RelationId(0), 1)], vec![0]).unwrap();
    let inputs = Inputs { question: vec![0.0; 3], relations: vec![hr.clone()] };
    p.u = Matrix::identity(3);
    let s = init_state(&graph, &inputs, &p).unwrap();
    assert_eq!(s.scores, vec![1.0, 0.0, 0.0, 0.0]);
    for j in 0..3 {
        assert!((s.reps[(1, j)] - 1.0 / (1.0 + (-hr[j]).exp())).abs() < 1e-15);
        assert_eq!(s.reps[(0, j)], 0.5);
    }
    let two = PropagationGraph::new(4, &[], vec![1, 3]).unwrap();
    let s = init_state(&two, &Inputs { question: vec![0.0; 3], relations: vec![] }, &p).unwrap();
    assert_eq!(s.scores, vec![0.0, 0.5, 0.0, 0.5]);
}

#[test]
fn single_edge_step_by_hand() {
    let mut r = rng(10);
    let mut p = random_params(&mut r, 2, 3, 3);
    // W_E = [0; I] so the new representation is the aggregate itself
    p.steps[0].we = Matrix::from_fn(6, 3, |i, j| if i == j + 3 { 1.0 } else { 0.0 });
    let rel = RelationId(0);
    let graph = PropagationGraph::new(2, &[(0, rel, 1), (1, rel.inverse(), 0)], vec![0]).unwrap();
    let inputs = Inputs { question: random_vec(&mut r, 3), relations: vec![random_vec(&mut r, 3), random_vec(&mut r, 3)] };
    let prev = MatchState { step: 1, reps: Matrix::zeros(2, 3), scores: vec![1.0, 0.0] };
    let next = propagate_step(&prev, &graph, &inputs, &p).unwrap();
    let m = sm_features(&inputs.question, &inputs.relations[0], 2, &p).unwrap();
    assert_eq!(next.reps.row(1), &m[..]);
    assert_eq!(next.reps.row(0), &[0.0; 3]);
    assert!((next.scores.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn kl_matches_term_by_term_sum() {
    let mut r = rng(11);
    let normalise = |v: Vec<f64>| {
        let z: f64 = v.iter().sum();
        v.into_iter().map(|x| x / z).collect::<Vec<_>>()
    };
    let p = normalise((0..6).map(|_| r.gen_range(0.01..1.0)).collect());
    let q = normalise((0..6).map(|_| r.gen_range(0.01..1.0)).collect());
    let mut want = 0.0;
    for i in 0..6 {
        want += p[i] * (p[i] / q[i]).ln();
    }
    assert!((kl_divergence(&p, &q).unwrap() - want).abs() < 1e-12);
    let (loss, grad) = kl_loss(&q, &p, KlDirection::TargetFirst).unwrap();
    assert!((loss - want).abs() < 1e-12);
    for i in 0..6 {
        assert!((grad[i] - (q[i] - p[i])).abs() < 1e-15);
    }
    let onehot = [1.0, 0.0, 0.0, 0.0, 0.0];
    let (loss, _) = kl_loss(&[0.2; 5], &onehot, KlDirection::TargetFirst).unwrap();
    assert!((loss - 5f64.ln()).abs() < 1e-12);
}
