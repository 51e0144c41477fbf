//! Personalized PageRank baseline retriever.

use std::collections::BTreeSet;

use super::{EntityId, KnowledgeGraph, Subgraph};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct PprConfig {
    /// Probability of following an edge rather than restarting at the seeds.
    pub damping: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for PprConfig {
    fn default() -> Self {
        Self { damping: 0.85, tolerance: 1e-8, max_iterations: 200 }
    }
}

#[derive(Clone, Debug)]
pub struct PprScores {
    /// One score per entity id.
    pub scores: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Power iteration seeded uniformly on `seeds`. Mass at dangling entities
/// restarts at the seeds, so scores always sum to one.
pub fn personalized_pagerank(g: &KnowledgeGraph, seeds: &[EntityId], cfg: PprConfig) -> Result<PprScores> {
    if !(cfg.damping > 0.0 && cfg.damping < 1.0) {
        return Err(Error::InvalidArgument(format!("damping must lie in (0, 1), got {}", cfg.damping)));
    }
    let seeds: BTreeSet<EntityId> = seeds.iter().copied().collect();
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("personalized pagerank needs at least one seed".into()));
    }
    for &s in &seeds {
        g.check_entity(s)?;
    }
    let n = g.num_entities();
    let mut restart = vec![0.0; n];
    let w = 1.0 / seeds.len() as f64;
    for s in &seeds {
        restart[s.index()] = w;
    }

    let alpha = cfg.damping;
    let mut scores = restart.clone();
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iterations {
        iterations += 1;
        next.iter_mut().for_each(|x| *x = 0.0);
        let mut dangling = 0.0;
        for e in g.entity_ids() {
            let mass = scores[e.index()];
            let out = g.outgoing(e);
            if out.is_empty() {
                dangling += mass;
                continue;
            }
            let share = alpha * mass / out.len() as f64;
            for t in out {
                next[t.tail.index()] += share;
            }
        }
        let restart_mass = (1.0 - alpha) + alpha * dangling;
        for (x, r) in next.iter_mut().zip(&restart) {
            *x += restart_mass * r;
        }
        let delta: f64 = next.iter().zip(&scores).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut scores, &mut next);
        if delta < cfg.tolerance {
            converged = true;
            break;
        }
    }
    Ok(PprScores { scores, iterations, converged })
}

/// Induced subgraph on the `top_n` highest-scoring entities, topics forced in.
/// Ties break by ascending entity id.
pub fn ppr_retrieve(g: &KnowledgeGraph, topics: &[EntityId], damping: f64, top_n: usize) -> Result<Subgraph> {
    let topic_set: BTreeSet<EntityId> = topics.iter().copied().collect();
    if top_n < topic_set.len() {
        return Err(Error::InvalidArgument(format!(
            "top_n ({top_n}) must be at least the number of topic entities ({})",
            topic_set.len()
        )));
    }
    let ppr = personalized_pagerank(g, topics, PprConfig { damping, ..Default::default() })?;
    let mut ranked: Vec<EntityId> = g.entity_ids().filter(|e| !topic_set.contains(e)).collect();
    ranked.sort_by(|a, b| ppr.scores[b.index()].total_cmp(&ppr.scores[a.index()]).then(a.cmp(b)));
    let selected = topic_set.iter().copied().chain(ranked.into_iter().take(top_n - topic_set.len()));
    Ok(Subgraph::induced(g, selected))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_node_gets_all_mass() {
        let mut b = KnowledgeGraph::builder();
        let a = b.add_entity("a");
        let g = b.build();
        let p = personalized_pagerank(&g, &[a], PprConfig::default()).unwrap();
        assert_eq!(p.scores, vec![1.0]);
    }

    #[test]
    fn two_cycle_matches_closed_form() {
        // p_a = (1 - d) + d p_b, p_b = d p_a  =>  p_a = 1 / (1 + d), p_b = d / (1 + d)
        let mut b = KnowledgeGraph::builder();
        b.add_triple("a", "r", "b").unwrap();
        let g = b.build();
        let a = g.entity("a").unwrap();
        let p = personalized_pagerank(&g, &[a], PprConfig::default()).unwrap();
        assert!(p.converged);
        let d = 0.85;
        assert!((p.scores[a.index()] - 1.0 / (1.0 + d)).abs() < 1e-7);
        assert!((p.scores[1 - a.index()] - d / (1.0 + d)).abs() < 1e-7);
    }

    #[test]
    fn full_budget_returns_whole_graph() {
        let mut b = KnowledgeGraph::builder();
        b.add_triple("a", "r", "b").unwrap();
        b.add_triple("c", "s", "d").unwrap();
        let g = b.build();
        let a = g.entity("a").unwrap();
        let sub = ppr_retrieve(&g, &[a], 0.85, g.num_entities()).unwrap();
        assert_eq!(sub, g.as_subgraph());
    }

    #[test]
    fn invalid_arguments() {
        let mut b = KnowledgeGraph::builder();
        b.add_triple("a", "r", "b").unwrap();
        let g = b.build();
        let a = g.entity("a").unwrap();
        assert!(ppr_retrieve(&g, &[a], 1.0, 2).is_err());
        assert!(ppr_retrieve(&g, &[a], 0.0, 2).is_err());
        assert!(ppr_retrieve(&g, &[a], 0.5, 0).is_err());
    }
}
