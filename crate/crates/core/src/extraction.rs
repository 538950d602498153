//! Co-occurrence relation induction and the gold knowledge graph.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusIndex, DocId, EntityId};
use crate::graph::{KnowledgeGraph, Relation};

/// Two mentions co-occur when they are at most this many consecutive
/// sentences apart, counting both ends.
pub const WINDOW_SENTENCES: usize = 3;

/// Entities and unordered co-occurring pairs of one document.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Extraction<E: Ord> {
    pub entities: BTreeSet<E>,
    pub pairs: BTreeSet<(E, E)>,
}

/// Window-based co-occurrence over `(entity, sentence_index)` mentions.
/// Repeated mentions are idempotent and the result does not depend on
/// mention order.
pub fn cooccurrences<E, I>(mentions: I, window: usize) -> Extraction<E>
where
    E: Ord + Clone,
    I: IntoIterator<Item = (E, usize)>,
{
    let mut by_sentence: BTreeMap<usize, BTreeSet<E>> = BTreeMap::new();
    let mut entities = BTreeSet::new();
    for (entity, sentence) in mentions {
        entities.insert(entity.clone());
        by_sentence.entry(sentence).or_default().insert(entity);
    }
    let reach = window.saturating_sub(1);
    let mut pairs = BTreeSet::new();
    for (&s, here) in &by_sentence {
        for (_, there) in by_sentence.range(s..=s + reach) {
            for a in here {
                for b in there {
                    match a.cmp(b) {
                        std::cmp::Ordering::Less => {
                            pairs.insert((a.clone(), b.clone()));
                        }
                        std::cmp::Ordering::Greater => {
                            pairs.insert((b.clone(), a.clone()));
                        }
                        std::cmp::Ordering::Equal => {}
                    }
                }
            }
        }
    }
    Extraction { entities, pairs }
}

/// Entities and relations read from one indexed document.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DocExtraction {
    pub doc: DocId,
    pub entities: Vec<EntityId>,
    pub pairs: Vec<(EntityId, EntityId)>,
}

impl DocExtraction {
    pub fn relations(&self) -> impl Iterator<Item = Relation> + '_ {
        self.pairs.iter().map(move |&(a, b)| Relation {
            source: a,
            target: b,
            provenance: BTreeSet::from([self.doc]),
        })
    }
}

pub fn extract(index: &CorpusIndex, doc: DocId) -> DocExtraction {
    let document = index.document(doc).expect("doc id from this index");
    let ex = cooccurrences(
        document.mentions.iter().map(|m| (m.entity, m.sentence)),
        WINDOW_SENTENCES,
    );
    DocExtraction {
        doc,
        entities: ex.entities.into_iter().collect(),
        pairs: ex.pairs.into_iter().collect(),
    }
}

/// Extraction results for every document, indexed by [`DocId`].
pub fn extract_all(index: &CorpusIndex) -> Vec<DocExtraction> {
    index.documents().map(|(d, _)| extract(index, d)).collect()
}

/// Union of all document extractions with merged provenance.
pub fn build_gold_kg(index: &CorpusIndex) -> KnowledgeGraph {
    gold_from_extractions(&extract_all(index))
}

pub fn gold_from_extractions(extractions: &[DocExtraction]) -> KnowledgeGraph {
    let mut kg = KnowledgeGraph::new();
    for ex in extractions {
        for &e in &ex.entities {
            kg.add_vertex(e, 0);
        }
        for &(a, b) in &ex.pairs {
            kg.add_cooccurrence(a, b, ex.doc, 0);
        }
    }
    kg
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub source: String,
    pub target: String,
    pub docs: Vec<String>,
}

/// Writes the graph as JSON lines of `{"source", "target", "docs"}`.
pub fn export_kg<W: Write>(
    kg: &KnowledgeGraph,
    index: &CorpusIndex,
    mut out: W,
) -> std::io::Result<()> {
    for r in kg.edges() {
        let record = EdgeRecord {
            source: index.entity_name(r.source).to_string(),
            target: index.entity_name(r.target).to_string(),
            docs: r
                .provenance
                .iter()
                .map(|&d| index.doc_name(d).to_string())
                .collect(),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
