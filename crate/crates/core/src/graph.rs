//! Per-episode knowledge graph: monotone expansion, connectivity and
//! minimum-hop inference paths.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusIndex, DocId, EntityId};
use crate::error::{Error, Result};

/// Undirected co-occurrence relation. `source < target` always holds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub source: EntityId,
    pub target: EntityId,
    pub provenance: BTreeSet<DocId>,
}

impl Relation {
    pub fn new(a: EntityId, b: EntityId, provenance: BTreeSet<DocId>) -> Result<Self> {
        if a == b {
            return Err(Error::contract(format!("self relation on {a:?}")));
        }
        if provenance.is_empty() {
            return Err(Error::contract("relation without provenance"));
        }
        Ok(Self {
            source: a.min(b),
            target: a.max(b),
            provenance,
        })
    }

    pub fn key(&self) -> (EntityId, EntityId) {
        (self.source, self.target)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct KnowledgeGraph {
    /// vertex -> iteration at which it was first added
    origin: BTreeMap<EntityId, usize>,
    adjacency: BTreeMap<EntityId, BTreeSet<EntityId>>,
    edges: BTreeMap<(EntityId, EntityId), BTreeSet<DocId>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InferencePath {
    pub entities: Vec<EntityId>,
    /// Provenance of hop `i`, i.e. of the edge `entities[i] -- entities[i + 1]`.
    pub supporting_docs: Vec<BTreeSet<DocId>>,
}

impl InferencePath {
    pub fn hops(&self) -> usize {
        self.entities.len().saturating_sub(1)
    }

    pub fn export(&self, index: &CorpusIndex) -> PathExport {
        PathExport {
            entities: self
                .entities
                .iter()
                .map(|&e| index.entity_name(e).to_string())
                .collect(),
            hops: self
                .entities
                .windows(2)
                .zip(&self.supporting_docs)
                .map(|(w, docs)| HopExport {
                    from: index.entity_name(w[0]).to_string(),
                    to: index.entity_name(w[1]).to_string(),
                    docs: docs
                        .iter()
                        .map(|&d| index.doc_name(d).to_string())
                        .collect(),
                })
                .collect(),
        }
    }
}

/// JSON form of an inference path, with every hop's supporting documents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathExport {
    pub entities: Vec<String>,
    pub hops: Vec<HopExport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HopExport {
    pub from: String,
    pub to: String,
    pub docs: Vec<String>,
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// The initial episode graph: both endpoints, no edges.
    pub fn with_endpoints(a: EntityId, b: EntityId) -> Self {
        let mut kg = Self::new();
        kg.insert_vertex(a, 0);
        kg.insert_vertex(b, 0);
        kg
    }

    fn insert_vertex(&mut self, v: EntityId, iteration: usize) -> bool {
        if self.origin.contains_key(&v) {
            return false;
        }
        self.origin.insert(v, iteration);
        self.adjacency.insert(v, BTreeSet::new());
        true
    }

    /// Adds vertices and edges. Fails without modifying the graph when an
    /// edge endpoint is neither present nor among `new_vertices`.
    pub fn expand<V, R>(&mut self, new_vertices: V, new_edges: R, iteration: usize) -> Result<()>
    where
        V: IntoIterator<Item = EntityId>,
        R: IntoIterator<Item = Relation>,
    {
        let new_vertices: BTreeSet<EntityId> = new_vertices.into_iter().collect();
        let new_edges: Vec<Relation> = new_edges.into_iter().collect();
        for r in &new_edges {
            for v in [r.source, r.target] {
                if !self.origin.contains_key(&v) && !new_vertices.contains(&v) {
                    return Err(Error::contract(format!(
                        "edge ({:?}, {:?}) has dangling endpoint {v:?}",
                        r.source, r.target
                    )));
                }
            }
        }
        for v in new_vertices {
            self.insert_vertex(v, iteration);
        }
        for r in new_edges {
            self.insert_edge(r.source, r.target, r.provenance);
        }
        Ok(())
    }

    fn insert_edge(&mut self, a: EntityId, b: EntityId, docs: BTreeSet<DocId>) {
        let key = (a.min(b), a.max(b));
        self.edges.entry(key).or_default().extend(docs);
        self.adjacency.entry(a).or_default().insert(b);
        self.adjacency.entry(b).or_default().insert(a);
    }

    /// Adds one edge discovered in `doc`, inserting missing endpoints.
    pub(crate) fn add_cooccurrence(
        &mut self,
        a: EntityId,
        b: EntityId,
        doc: DocId,
        iteration: usize,
    ) {
        self.insert_vertex(a, iteration);
        self.insert_vertex(b, iteration);
        self.insert_edge(a, b, BTreeSet::from([doc]));
    }

    pub(crate) fn add_vertex(&mut self, v: EntityId, iteration: usize) {
        self.insert_vertex(v, iteration);
    }

    pub fn contains(&self, v: EntityId) -> bool {
        self.origin.contains_key(&v)
    }

    pub fn num_vertices(&self) -> usize {
        self.origin.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Vertices in ascending id order.
    pub fn vertices(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.origin.keys().copied()
    }

    pub fn origin(&self, v: EntityId) -> Option<usize> {
        self.origin.get(&v).copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = Relation> + '_ {
        self.edges.iter().map(|(&(a, b), docs)| Relation {
            source: a,
            target: b,
            provenance: docs.clone(),
        })
    }

    pub fn provenance(&self, a: EntityId, b: EntityId) -> Option<&BTreeSet<DocId>> {
        self.edges.get(&(a.min(b), a.max(b)))
    }

    pub fn neighbors(&self, v: EntityId) -> impl Iterator<Item = EntityId> + '_ {
        self.adjacency.get(&v).into_iter().flatten().copied()
    }

    fn require(&self, v: EntityId) -> Result<()> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(Error::contract(format!("entity {v:?} is not in the graph")))
        }
    }

    /// Hop distance from `from` to every reachable vertex.
    pub fn distances(&self, from: EntityId) -> BTreeMap<EntityId, usize> {
        let mut dist = BTreeMap::new();
        if !self.contains(from) {
            return dist;
        }
        dist.insert(from, 0);
        let mut queue = VecDeque::from([from]);
        while let Some(v) = queue.pop_front() {
            let d = dist[&v];
            for w in self.neighbors(v) {
                if !dist.contains_key(&w) {
                    dist.insert(w, d + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self, a: EntityId, b: EntityId) -> Result<bool> {
        self.require(a)?;
        self.require(b)?;
        if a == b {
            return Ok(true);
        }
        let mut visited = BTreeSet::from([a]);
        let mut stack = vec![a];
        while let Some(v) = stack.pop() {
            for w in self.neighbors(v) {
                if w == b {
                    return Ok(true);
                }
                if visited.insert(w) {
                    stack.push(w);
                }
            }
        }
        Ok(false)
    }

    /// Minimum-hop path from `a` to `b`. Among equally short paths the one
    /// whose entity sequence is lexicographically smallest is returned.
    pub fn shortest_path(&self, a: EntityId, b: EntityId) -> Result<Option<InferencePath>> {
        self.require(a)?;
        self.require(b)?;
        // distances to the destination; then walk greedily from the source
        let to_b = self.distances(b);
        let Some(&len) = to_b.get(&a) else {
            return Ok(None);
        };
        let mut entities = Vec::with_capacity(len + 1);
        let mut supporting_docs = Vec::with_capacity(len);
        let mut current = a;
        entities.push(a);
        for remaining in (0..len).rev() {
            let next = self
                .neighbors(current)
                .find(|w| to_b.get(w) == Some(&remaining))
                .expect("bfs layers are consistent");
            supporting_docs.push(self.provenance(current, next).cloned().unwrap_or_default());
            entities.push(next);
            current = next;
        }
        Ok(Some(InferencePath {
            entities,
            supporting_docs,
        }))
    }
}
