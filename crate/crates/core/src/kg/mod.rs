//! In-memory knowledge graph with materialised inverse relations.
//!
//! Every base relation `r` read from input owns two dense ids: `2k` for the
//! forward direction and `2k + 1` for its inverse, so `inv(r) = r ^ 1`. Each
//! stored triple `<e, r, e'>` has its twin `<e', inv(r), e>` stored as well,
//! which makes the incoming-triple set of an entity the full neighbourhood.

mod io;
mod ppr;
mod traverse;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_graph, load_questions, parse_graph, parse_questions, write_questions, write_triples};
pub use ppr::{personalized_pagerank, ppr_retrieve, PprConfig, PprScores};
pub use traverse::{bfs_distances, k_hop_subgraph, shortest_path_relations, PathConfig};

/// Prefix used for the display label of inverse relations.
pub const INVERSE_PREFIX: char = '~';

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntityId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RelationId(pub u32);

impl EntityId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn inverse(self) -> RelationId {
        RelationId(self.0 ^ 1)
    }

    #[inline]
    pub fn is_inverse(self) -> bool {
        self.0 & 1 == 1
    }

    /// Id of the underlying base relation (forward direction).
    #[inline]
    pub fn base(self) -> RelationId {
        RelationId(self.0 & !1)
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

impl fmt::Display for RelationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: EntityId, relation: RelationId, tail: EntityId) -> Self {
        Self { head, relation, tail }
    }

    pub fn inverse(self) -> Self {
        Self { head: self.tail, relation: self.relation.inverse(), tail: self.head }
    }
}

/// Bidirectional label <-> dense id map.
#[derive(Clone, Debug, Default)]
pub struct Vocab {
    labels: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocab {
    pub fn get_or_insert(&mut self, label: &str) -> u32 {
        if let Some(&id) = self.ids.get(label) {
            return id;
        }
        let id = self.labels.len() as u32;
        self.labels.push(label.to_owned());
        self.ids.insert(label.to_owned(), id);
        id
    }

    pub fn get(&self, label: &str) -> Option<u32> {
        self.ids.get(label).copied()
    }

    pub fn label(&self, id: u32) -> Option<&str> {
        self.labels.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// A question with its linked topic entities and gold answers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QaInstance {
    pub id: String,
    pub question: String,
    pub topic_entities: Vec<EntityId>,
    pub answers: Vec<EntityId>,
}

/// Entity set plus the triples among them. Both lists are sorted and unique.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Subgraph {
    pub entities: Vec<EntityId>,
    pub triples: Vec<Triple>,
}

impl Subgraph {
    pub fn contains(&self, e: EntityId) -> bool {
        self.entities.binary_search(&e).is_ok()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    /// Keeps every KG triple whose endpoints are both in `entities`.
    pub fn induced(g: &KnowledgeGraph, entities: impl IntoIterator<Item = EntityId>) -> Self {
        let set: BTreeSet<EntityId> = entities.into_iter().collect();
        let entities: Vec<EntityId> = set.into_iter().collect();
        let mut triples = Vec::new();
        for &e in &entities {
            for t in g.outgoing(e) {
                if entities.binary_search(&t.tail).is_ok() {
                    triples.push(*t);
                }
            }
        }
        triples.sort_unstable();
        Self { entities, triples }
    }
}

/// Immutable, inverse-closed triple store with per-entity incoming and
/// outgoing adjacency.
#[derive(Clone, Debug)]
pub struct KnowledgeGraph {
    entities: Vocab,
    relations: Vocab,
    by_head: Vec<Triple>,
    by_tail: Vec<Triple>,
    head_offsets: Vec<usize>,
    tail_offsets: Vec<usize>,
}

impl KnowledgeGraph {
    pub fn builder() -> KnowledgeGraphBuilder {
        KnowledgeGraphBuilder::default()
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    /// Number of relation ids, inverses included.
    pub fn num_relations(&self) -> usize {
        self.relations.len() * 2
    }

    pub fn num_triples(&self) -> usize {
        self.by_head.len()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.by_head
    }

    pub fn entity_ids(&self) -> impl Iterator<Item = EntityId> {
        (0..self.entities.len() as u32).map(EntityId)
    }

    pub fn relation_ids(&self) -> impl Iterator<Item = RelationId> {
        (0..self.num_relations() as u32).map(RelationId)
    }

    pub fn entity(&self, label: &str) -> Option<EntityId> {
        self.entities.get(label).map(EntityId)
    }

    pub fn entity_label(&self, e: EntityId) -> &str {
        self.entities.label(e.0).unwrap_or("<invalid>")
    }

    pub fn contains_entity(&self, e: EntityId) -> bool {
        e.index() < self.entities.len()
    }

    pub fn check_entity(&self, e: EntityId) -> Result<()> {
        if self.contains_entity(e) {
            Ok(())
        } else {
            Err(Error::UnknownEntity(e.to_string()))
        }
    }

    /// Resolves a relation label; a leading `~` selects the inverse direction.
    pub fn relation(&self, label: &str) -> Option<RelationId> {
        if let Some(id) = self.relations.get(label) {
            return Some(RelationId(id * 2));
        }
        let base = label.strip_prefix(INVERSE_PREFIX)?;
        self.relations.get(base).map(|id| RelationId(id * 2 + 1))
    }

    /// Display label; inverse relations carry a `~` prefix.
    pub fn relation_label(&self, r: RelationId) -> String {
        let base = self.relations.label(r.0 / 2).unwrap_or("<invalid>");
        if r.is_inverse() {
            format!("{INVERSE_PREFIX}{base}")
        } else {
            base.to_owned()
        }
    }

    /// Incoming triples `<e', r, e>` of `e`: its full neighbourhood.
    pub fn neighborhood(&self, e: EntityId) -> Result<&[Triple]> {
        self.check_entity(e)?;
        Ok(self.incoming(e))
    }

    #[inline]
    pub(crate) fn incoming(&self, e: EntityId) -> &[Triple] {
        &self.by_tail[self.tail_offsets[e.index()]..self.tail_offsets[e.index() + 1]]
    }

    #[inline]
    pub fn outgoing(&self, e: EntityId) -> &[Triple] {
        &self.by_head[self.head_offsets[e.index()]..self.head_offsets[e.index() + 1]]
    }

    pub fn contains_triple(&self, t: &Triple) -> bool {
        self.contains_entity(t.head) && self.outgoing(t.head).binary_search(t).is_ok()
    }

    /// The whole graph as a subgraph.
    pub fn as_subgraph(&self) -> Subgraph {
        Subgraph { entities: self.entity_ids().collect(), triples: self.by_head.clone() }
    }
}

#[derive(Clone, Debug, Default)]
pub struct KnowledgeGraphBuilder {
    entities: Vocab,
    relations: Vocab,
    triples: Vec<(u32, u32, u32)>,
}

impl KnowledgeGraphBuilder {
    pub fn add_entity(&mut self, label: &str) -> EntityId {
        EntityId(self.entities.get_or_insert(label))
    }

    pub fn add_relation(&mut self, label: &str) -> Result<RelationId> {
        if label.starts_with(INVERSE_PREFIX) {
            return Err(Error::InvalidArgument(format!(
                "relation label {label:?} uses the reserved inverse prefix '{INVERSE_PREFIX}'"
            )));
        }
        Ok(RelationId(self.relations.get_or_insert(label) * 2))
    }

    pub fn add_triple(&mut self, head: &str, relation: &str, tail: &str) -> Result<()> {
        let h = self.add_entity(head).0;
        let r = self.add_relation(relation)?.0;
        let t = self.add_entity(tail).0;
        self.triples.push((h, r, t));
        Ok(())
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn build(self) -> KnowledgeGraph {
        let n = self.entities.len();
        let mut by_head: Vec<Triple> = self
            .triples
            .iter()
            .flat_map(|&(h, r, t)| {
                let fwd = Triple::new(EntityId(h), RelationId(r), EntityId(t));
                [fwd, fwd.inverse()]
            })
            .collect();
        by_head.sort_unstable();
        by_head.dedup();

        let mut by_tail = by_head.clone();
        by_tail.sort_unstable_by_key(|t| (t.tail, t.relation, t.head));

        let head_offsets = offsets(n, by_head.iter().map(|t| t.head.index()));
        let tail_offsets = offsets(n, by_tail.iter().map(|t| t.tail.index()));
        KnowledgeGraph {
            entities: self.entities,
            relations: self.relations,
            by_head,
            by_tail,
            head_offsets,
            tail_offsets,
        }
    }
}

/// CSR offsets for a key sequence that is already sorted.
fn offsets(n: usize, keys: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut counts = vec![0usize; n + 1];
    for k in keys {
        counts[k + 1] += 1;
    }
    for i in 0..n {
        counts[i + 1] += counts[i];
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> KnowledgeGraph {
        let mut b = KnowledgeGraph::builder();
        b.add_triple("a", "r", "b").unwrap();
        b.add_triple("b", "r", "c").unwrap();
        b.add_triple("c", "r", "d").unwrap();
        b.build()
    }

    #[test]
    fn inverse_is_an_involution() {
        for id in 0..64 {
            let r = RelationId(id);
            assert_eq!(r.inverse().inverse(), r);
            assert_ne!(r.inverse(), r);
            assert_eq!(r.base(), r.inverse().base());
        }
    }

    #[test]
    fn single_triple_is_inverse_closed() {
        let mut b = KnowledgeGraph::builder();
        b.add_triple("a", "r", "b").unwrap();
        let g = b.build();
        assert_eq!(g.num_entities(), 2);
        assert_eq!(g.num_relations(), 2);
        assert_eq!(g.num_triples(), 2);
        let r = g.relation("r").unwrap();
        assert_eq!(g.relation("~r"), Some(r.inverse()));
        assert_eq!(g.relation_label(r.inverse()), "~r");
    }

    #[test]
    fn chain_neighbourhood_of_b() {
        let g = chain();
        let b = g.entity("b").unwrap();
        let nb = g.neighborhood(b).unwrap();
        assert_eq!(nb.len(), 2);
        let r = g.relation("r").unwrap();
        assert!(nb.contains(&Triple::new(g.entity("a").unwrap(), r, b)));
        assert!(nb.contains(&Triple::new(g.entity("c").unwrap(), r.inverse(), b)));
    }

    #[test]
    fn star_hub_and_isolated_entity() {
        let mut b = KnowledgeGraph::builder();
        for i in 0..5 {
            b.add_triple(&format!("s{i}"), "spoke", "hub").unwrap();
        }
        let lonely = b.add_entity("lonely");
        let g = b.build();
        assert_eq!(g.neighborhood(g.entity("hub").unwrap()).unwrap().len(), 5);
        assert!(g.neighborhood(lonely).unwrap().is_empty());
        assert!(matches!(g.neighborhood(EntityId(999)), Err(Error::UnknownEntity(_))));
    }

    #[test]
    fn reserved_prefix_is_rejected() {
        let mut b = KnowledgeGraph::builder();
        assert!(b.add_triple("a", "~r", "b").is_err());
    }

    #[test]
    fn induced_subgraph_keeps_all_internal_triples() {
        let g = chain();
        let ids = ["a", "b", "c"].map(|l| g.entity(l).unwrap());
        let sub = Subgraph::induced(&g, ids);
        assert_eq!(sub.entities.len(), 3);
        assert_eq!(sub.triples.len(), 4);
    }
}
