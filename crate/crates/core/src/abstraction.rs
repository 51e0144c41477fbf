//! Abstract subgraphs: entities reached through the same `(head, relation)`
//! prefix collapse into one node.
//!
//! Merging is a deterministic partition of the subgraph's entities:
//!
//! 1. tails sharing a prefix `<e, r, ?>` merge, prefixes visited in order of
//!    head distance from the topics, then head id, then relation id; an entity
//!    already claimed by an earlier group stays where it is;
//! 2. heads sharing `(r, tail node)` merge under the same first-claim rule;
//! 3. whatever is left becomes a singleton.
//!
//! Topic entities are never merged. Each original triple maps to exactly one
//! abstract triple, so the reduction never adds triples and every original
//! triple is covered.

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde_json::json;

use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph, RelationId, Subgraph};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AbstractNode {
    pub id: usize,
    /// Sorted, nonempty.
    pub members: Vec<EntityId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AbstractTriple {
    pub head: usize,
    pub relation: RelationId,
    pub tail: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AbstractSubgraph {
    pub nodes: Vec<AbstractNode>,
    pub triples: Vec<AbstractTriple>,
    /// Abstract ids of the (singleton) topic nodes.
    pub topics: Vec<usize>,
    node_of: HashMap<EntityId, usize>,
}

impl AbstractSubgraph {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// The abstract node holding `e`, if `e` belongs to the source subgraph.
    pub fn node_of(&self, e: EntityId) -> Option<usize> {
        self.node_of.get(&e).copied()
    }

    /// Union of the member sets of `ids`.
    pub fn ground(&self, ids: &[usize]) -> Result<BTreeSet<EntityId>> {
        let mut out = BTreeSet::new();
        for &id in ids {
            let node = self.nodes.get(id).ok_or(Error::UnknownAbstractNode(id))?;
            out.extend(node.members.iter().copied());
        }
        Ok(out)
    }

    /// Target distribution over abstract nodes: uniform over the nodes holding
    /// at least one answer. `None` when no node holds an answer.
    pub fn ground_truth<S: Scalar>(&self, answers: &[EntityId]) -> Option<Vec<S>> {
        let positive: Vec<bool> = self
            .nodes
            .iter()
            .map(|n| n.members.iter().any(|m| answers.contains(m)))
            .collect();
        normalized_indicator(&positive)
    }

    /// Debug dump: node members and triples with labels.
    pub fn to_json(&self, g: &KnowledgeGraph) -> serde_json::Value {
        let nodes: Vec<_> = self
            .nodes
            .iter()
            .map(|n| {
                let members: Vec<&str> = n.members.iter().map(|&e| g.entity_label(e)).collect();
                json!({ "id": n.id, "members": members })
            })
            .collect();
        let triples: Vec<_> = self
            .triples
            .iter()
            .map(|t| json!([t.head, g.relation_label(t.relation), t.tail]))
            .collect();
        json!({ "nodes": nodes, "triples": triples, "topics": self.topics })
    }
}

/// Uniform distribution over the `true` positions; `None` if there are none.
pub fn normalized_indicator<S: Scalar>(positive: &[bool]) -> Option<Vec<S>> {
    let count = positive.iter().filter(|&&p| p).count();
    if count == 0 {
        return None;
    }
    let w = S::one() / S::lit(count as f64);
    Some(positive.iter().map(|&p| if p { w } else { S::zero() }).collect())
}

pub fn abstract_subgraph(subgraph: &Subgraph, topics: &[EntityId]) -> Result<AbstractSubgraph> {
    if subgraph.entities.is_empty() {
        return Err(Error::Empty("cannot abstract an empty subgraph".into()));
    }
    let topic_set: BTreeSet<EntityId> = topics.iter().copied().collect();
    if let Some(t) = topic_set.iter().find(|t| !subgraph.contains(**t)) {
        return Err(Error::UnknownEntity(format!("topic {t} is not in the subgraph")));
    }
    let dist = distances(subgraph, &topic_set);
    let depth = |e: &EntityId| dist.get(e).copied().unwrap_or(usize::MAX);

    // group index per claimed entity; topics are claimed up front
    let mut claimed: HashMap<EntityId, usize> = HashMap::new();
    let mut groups: Vec<Vec<EntityId>> = Vec::new();
    for &t in &topic_set {
        claimed.insert(t, groups.len());
        groups.push(vec![t]);
    }
    let mut claim = |members: Vec<EntityId>, claimed: &mut HashMap<EntityId, usize>| {
        let free: Vec<EntityId> = members.into_iter().filter(|e| !claimed.contains_key(e)).collect();
        if free.len() >= 2 {
            for &e in &free {
                claimed.insert(e, groups.len());
            }
            groups.push(free);
        }
    };

    // pass 1: tails by prefix
    let mut prefixes: BTreeMap<(usize, EntityId, RelationId), BTreeSet<EntityId>> = BTreeMap::new();
    for t in &subgraph.triples {
        prefixes.entry((depth(&t.head), t.head, t.relation)).or_default().insert(t.tail);
    }
    for tails in prefixes.into_values() {
        claim(tails.into_iter().collect(), &mut claimed);
    }

    // pass 2: heads by (relation, tail node); unclaimed tails stand for themselves
    #[derive(PartialEq, Eq, PartialOrd, Ord)]
    enum TailKey {
        Group(usize),
        Entity(EntityId),
    }
    let mut suffixes: BTreeMap<(RelationId, TailKey), BTreeSet<EntityId>> = BTreeMap::new();
    for t in &subgraph.triples {
        let key = match claimed.get(&t.tail) {
            Some(&g) => TailKey::Group(g),
            None => TailKey::Entity(t.tail),
        };
        suffixes.entry((t.relation, key)).or_default().insert(t.head);
    }
    for heads in suffixes.into_values() {
        claim(heads.into_iter().collect(), &mut claimed);
    }

    // pass 3: singletons
    for &e in &subgraph.entities {
        if let Entry::Vacant(slot) = claimed.entry(e) {
            slot.insert(groups.len());
            groups.push(vec![e]);
        }
    }

    // ids follow the lexicographic order of the sorted member lists
    for members in &mut groups {
        members.sort_unstable();
    }
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.sort_by(|&a, &b| groups[a].cmp(&groups[b]));
    let mut new_id = vec![0; groups.len()];
    for (id, &g) in order.iter().enumerate() {
        new_id[g] = id;
    }
    let nodes: Vec<AbstractNode> = order
        .iter()
        .enumerate()
        .map(|(id, &g)| AbstractNode { id, members: groups[g].clone() })
        .collect();
    let node_of: HashMap<EntityId, usize> = claimed.into_iter().map(|(e, g)| (e, new_id[g])).collect();

    let mut triples: Vec<AbstractTriple> = subgraph
        .triples
        .iter()
        .map(|t| AbstractTriple { head: node_of[&t.head], relation: t.relation, tail: node_of[&t.tail] })
        .collect();
    triples.sort_unstable();
    triples.dedup();

    let topics = topic_set.iter().map(|t| node_of[t]).collect();
    Ok(AbstractSubgraph { nodes, triples, topics, node_of })
}

fn distances(subgraph: &Subgraph, topics: &BTreeSet<EntityId>) -> HashMap<EntityId, usize> {
    let mut adj: HashMap<EntityId, Vec<EntityId>> = HashMap::new();
    for t in &subgraph.triples {
        adj.entry(t.head).or_default().push(t.tail);
    }
    let mut dist: HashMap<EntityId, usize> = topics.iter().map(|&t| (t, 0)).collect();
    let mut queue: VecDeque<EntityId> = topics.iter().copied().collect();
    while let Some(e) = queue.pop_front() {
        let d = dist[&e];
        for &n in adj.get(&e).map(Vec::as_slice).unwrap_or(&[]) {
            dist.entry(n).or_insert_with(|| {
                queue.push_back(n);
                d + 1
            });
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::Triple;

    fn sub(triples: &[(u32, u32, u32)]) -> Subgraph {
        let triples: Vec<Triple> = triples
            .iter()
            .map(|&(h, r, t)| Triple::new(EntityId(h), RelationId(r), EntityId(t)))
            .collect();
        let entities: BTreeSet<EntityId> = triples.iter().flat_map(|t| [t.head, t.tail]).collect();
        let mut triples = triples;
        triples.sort_unstable();
        Subgraph { entities: entities.into_iter().collect(), triples }
    }

    #[test]
    fn fan_out_collapses_to_one_tail_node() {
        let s = sub(&[(0, 0, 1), (0, 0, 2)]);
        let a = abstract_subgraph(&s, &[EntityId(0)]).unwrap();
        assert_eq!(a.triples.len(), 1);
        assert_eq!(a.num_nodes(), 2);
        let tail = a.triples[0].tail;
        assert_eq!(a.nodes[tail].members, vec![EntityId(1), EntityId(2)]);
        assert_eq!(a.ground(&[tail]).unwrap().into_iter().collect::<Vec<_>>(), vec![EntityId(1), EntityId(2)]);
    }

    #[test]
    fn single_triple_stays_two_singletons() {
        let s = sub(&[(0, 0, 1)]);
        let a = abstract_subgraph(&s, &[EntityId(0)]).unwrap();
        assert_eq!(a.num_nodes(), 2);
        assert_eq!(a.triples.len(), 1);
        assert!(a.nodes.iter().all(|n| n.members.len() == 1));
        assert_eq!(a.ground(&[a.topics[0]]).unwrap().into_iter().collect::<Vec<_>>(), vec![EntityId(0)]);
    }

    #[test]
    fn topics_are_never_merged() {
        let s = sub(&[(0, 0, 1), (0, 0, 2), (0, 0, 3)]);
        let a = abstract_subgraph(&s, &[EntityId(0), EntityId(2)]).unwrap();
        for &t in &a.topics {
            assert_eq!(a.nodes[t].members.len(), 1);
        }
        assert_eq!(a.nodes[a.node_of(EntityId(1)).unwrap()].members, vec![EntityId(1), EntityId(3)]);
    }

    #[test]
    fn head_merging_uses_shared_suffix() {
        // 1 -> 0 and 2 -> 0 through the same relation: the heads merge
        let s = sub(&[(1, 0, 0), (2, 0, 0)]);
        let a = abstract_subgraph(&s, &[EntityId(0)]).unwrap();
        assert_eq!(a.num_nodes(), 2);
        assert_eq!(a.nodes[a.node_of(EntityId(1)).unwrap()].members, vec![EntityId(1), EntityId(2)]);
    }

    #[test]
    fn merged_node_keeps_outgoing_paths() {
        // topic 0 -r0-> {1,2}; 1 -r2-> 3; 2 -r2-> 4
        let s = sub(&[(0, 0, 1), (0, 0, 2), (1, 2, 3), (2, 2, 4)]);
        let a = abstract_subgraph(&s, &[EntityId(0)]).unwrap();
        let mid = a.node_of(EntityId(1)).unwrap();
        assert_eq!(a.node_of(EntityId(2)), Some(mid));
        assert!(a.triples.iter().any(|t| t.head == mid && t.relation == RelationId(2)));
    }

    #[test]
    fn errors() {
        assert!(abstract_subgraph(&Subgraph::default(), &[]).is_err());
        let s = sub(&[(0, 0, 1)]);
        assert!(abstract_subgraph(&s, &[EntityId(9)]).is_err());
        let a = abstract_subgraph(&s, &[EntityId(0)]).unwrap();
        assert!(matches!(a.ground(&[7]), Err(Error::UnknownAbstractNode(7))));
    }

    #[test]
    fn ground_truth_vectors() {
        let s = sub(&[(0, 0, 1), (0, 0, 2), (0, 1, 3), (3, 0, 4), (3, 2, 5)]);
        let a = abstract_subgraph(&s, &[EntityId(0)]).unwrap();
        let one_hot: Vec<f64> = a.ground_truth(&[EntityId(1), EntityId(2)]).unwrap();
        assert_eq!(one_hot.iter().filter(|&&p| p == 1.0).count(), 1);
        let split: Vec<f64> = a.ground_truth(&[EntityId(1), EntityId(5)]).unwrap();
        let mut sorted = split.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        assert_eq!(&sorted[..3], &[0.5, 0.5, 0.0]);
        assert!((split.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(a.ground_truth::<f64>(&[EntityId(42)]).is_none());
    }
}
