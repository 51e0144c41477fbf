use std::collections::hash_map::Entry;
use std::collections::{BTreeSet, HashMap, VecDeque};

use super::{EntityId, KnowledgeGraph, QaInstance, RelationId, Subgraph, Triple};
use crate::error::{Error, Result};

/// Controls weak-supervision path search.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PathConfig {
    /// Whether shortest paths may walk inverse edges.
    pub allow_inverse: bool,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self { allow_inverse: true }
    }
}

/// Breadth-first distances from `sources`, following outgoing triples (both
/// directions, since the graph is inverse-closed). `max_depth = None` explores
/// the whole component.
pub fn bfs_distances(
    g: &KnowledgeGraph,
    sources: &[EntityId],
    max_depth: Option<usize>,
) -> Result<HashMap<EntityId, usize>> {
    walk(g, sources, max_depth, |g, e| g.outgoing(e), |t| t.tail, |_| true)
}

fn walk<'g>(
    g: &'g KnowledgeGraph,
    sources: &[EntityId],
    max_depth: Option<usize>,
    edges: impl Fn(&'g KnowledgeGraph, EntityId) -> &'g [Triple],
    next: impl Fn(&Triple) -> EntityId,
    keep: impl Fn(&Triple) -> bool,
) -> Result<HashMap<EntityId, usize>> {
    let mut dist = HashMap::new();
    let mut queue = VecDeque::new();
    for &s in sources {
        g.check_entity(s)?;
        if dist.insert(s, 0).is_none() {
            queue.push_back(s);
        }
    }
    while let Some(e) = queue.pop_front() {
        let d = dist[&e];
        if max_depth.is_some_and(|m| d >= m) {
            continue;
        }
        for t in edges(g, e).iter().filter(|t| keep(t)) {
            let n = next(t);
            if let Entry::Vacant(slot) = dist.entry(n) {
                slot.insert(d + 1);
                queue.push_back(n);
            }
        }
    }
    Ok(dist)
}

/// Induced subgraph over every entity within `k` hops of a topic entity.
pub fn k_hop_subgraph(g: &KnowledgeGraph, topics: &[EntityId], k: usize) -> Result<Subgraph> {
    if k == 0 {
        return Err(Error::InvalidArgument("k_hop_subgraph requires k >= 1".into()));
    }
    let dist = bfs_distances(g, topics, Some(k))?;
    Ok(Subgraph::induced(g, dist.into_keys()))
}

/// Relations on any shortest topic -> answer path, unioned over all
/// (topic, answer) pairs. Pairs with an unreachable answer contribute nothing.
pub fn shortest_path_relations(g: &KnowledgeGraph, instance: &QaInstance, cfg: PathConfig) -> BTreeSet<RelationId> {
    let keep = |t: &Triple| cfg.allow_inverse || !t.relation.is_inverse();
    let mut relations = BTreeSet::new();
    for &topic in &instance.topic_entities {
        let Ok(from_topic) = walk(g, &[topic], None, |g, e| g.outgoing(e), |t| t.tail, keep) else {
            continue;
        };
        for &answer in &instance.answers {
            let Some(&len) = from_topic.get(&answer) else {
                log::debug!("{}: answer {} unreachable from topic {}", instance.id, answer, topic);
                continue;
            };
            if len == 0 {
                continue;
            }
            // distances to the answer, walking edges backwards
            let Ok(to_answer) = walk(g, &[answer], Some(len), |g, e| g.incoming(e), |t| t.head, keep) else {
                continue;
            };
            for (&u, &du) in &from_topic {
                if du >= len {
                    continue;
                }
                for t in g.outgoing(u).iter().filter(|t| keep(t)) {
                    if to_answer.get(&t.tail).is_some_and(|&dv| du + 1 + dv == len) {
                        relations.insert(t.relation);
                    }
                }
            }
        }
    }
    relations
}
