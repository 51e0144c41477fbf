use std::collections::BTreeMap;

use crate::abstraction::AbstractSubgraph;
use crate::error::{Error, Result};
use crate::kg::{EntityId, RelationId, Subgraph};

/// A directed edge between local node indices; `slot` indexes
/// [`PropagationGraph::relations`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Edge {
    pub src: usize,
    pub slot: usize,
    pub dst: usize,
}

/// Model input: nodes `0..num_nodes`, labelled edges and topic nodes. Both the
/// abstract (retrieval) and the plain (reasoning) subgraph lower to this.
#[derive(Clone, Debug, PartialEq)]
pub struct PropagationGraph {
    num_nodes: usize,
    /// Distinct relations, ascending.
    relations: Vec<RelationId>,
    /// Sorted by destination, so each node's neighbourhood is contiguous.
    edges: Vec<Edge>,
    offsets: Vec<usize>,
    topics: Vec<usize>,
}

impl PropagationGraph {
    pub fn new(num_nodes: usize, triples: &[(usize, RelationId, usize)], topics: Vec<usize>) -> Result<Self> {
        let slots: BTreeMap<RelationId, usize> = {
            let mut rels: Vec<RelationId> = triples.iter().map(|t| t.1).collect();
            rels.sort_unstable();
            rels.dedup();
            rels.into_iter().enumerate().map(|(i, r)| (r, i)).collect()
        };
        let mut edges = Vec::with_capacity(triples.len());
        for &(src, rel, dst) in triples {
            if src >= num_nodes || dst >= num_nodes {
                return Err(Error::Shape(format!("edge ({src}, {dst}) outside {num_nodes} nodes")));
            }
            edges.push(Edge { src, slot: slots[&rel], dst });
        }
        // triples form a set; a repeated triple is one edge
        edges.sort_unstable_by_key(|e| (e.dst, e.slot, e.src));
        edges.dedup();
        let mut offsets = vec![0; num_nodes + 1];
        for e in &edges {
            offsets[e.dst + 1] += 1;
        }
        for i in 0..num_nodes {
            offsets[i + 1] += offsets[i];
        }
        let mut topics = topics;
        topics.sort_unstable();
        topics.dedup();
        if let Some(&t) = topics.iter().find(|&&t| t >= num_nodes) {
            return Err(Error::InvalidArgument(format!("topic node {t} outside {num_nodes} nodes")));
        }
        Ok(Self { num_nodes, relations: slots.into_keys().collect(), edges, offsets, topics })
    }

    /// Nodes are abstract ids.
    pub fn from_abstract(abs: &AbstractSubgraph) -> Result<Self> {
        let triples: Vec<_> = abs.triples.iter().map(|t| (t.head, t.relation, t.tail)).collect();
        Self::new(abs.num_nodes(), &triples, abs.topics.clone())
    }

    /// Nodes are positions in `sub.entities`.
    pub fn from_subgraph(sub: &Subgraph, topics: &[EntityId]) -> Result<Self> {
        let local = |e: EntityId| sub.entities.binary_search(&e).ok();
        let mut triples = Vec::with_capacity(sub.triples.len());
        for t in &sub.triples {
            match (local(t.head), local(t.tail)) {
                (Some(h), Some(tl)) => triples.push((h, t.relation, tl)),
                _ => return Err(Error::InvalidArgument(format!("triple {t:?} leaves the subgraph"))),
            }
        }
        let topics = topics
            .iter()
            .map(|&e| local(e).ok_or_else(|| Error::UnknownEntity(format!("topic {e} is not in the subgraph"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(sub.entities.len(), &triples, topics)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn relations(&self) -> &[RelationId] {
        &self.relations
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn topics(&self) -> &[usize] {
        &self.topics
    }

    /// Edges pointing at `node`.
    pub fn incoming(&self, node: usize) -> &[Edge] {
        &self.edges[self.offsets[node]..self.offsets[node + 1]]
    }
}
