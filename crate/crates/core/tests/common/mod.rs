#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use focused_reading::corpus::{CorpusIndex, DocumentRecord, EntityId, MentionRecord};
use focused_reading::embeddings::EmbeddingStore;
use focused_reading::env::{EnvConfig, Environment};
use focused_reading::synth::{SynthConfig, SynthWorld};
use focused_reading::topics::{train_lda, LdaConfig, LdaModel};

/// A document whose sentences hold the given entity mentions.
pub fn doc(id: &str, sentences: &[&[&str]]) -> DocumentRecord {
    DocumentRecord {
        id: id.into(),
        title: id.into(),
        sentences: sentences
            .iter()
            .enumerate()
            .map(|(i, ents)| format!("{id} sentence {i} mentions {}", ents.join(" ")))
            .collect(),
        mentions: sentences
            .iter()
            .enumerate()
            .flat_map(|(i, ents)| {
                ents.iter().map(move |e| MentionRecord {
                    entity: (*e).into(),
                    surface: (*e).into(),
                    sentence: i,
                })
            })
            .collect(),
    }
}

pub struct Fixture {
    pub index: CorpusIndex,
    pub lda: LdaModel,
    pub store: EmbeddingStore,
}

impl Fixture {
    pub fn from_records(records: Vec<DocumentRecord>, topics: usize) -> Self {
        let index = CorpusIndex::from_records(records, false).unwrap();
        let lda = train_lda(
            &index,
            &LdaConfig {
                num_topics: topics,
                iterations: 20,
                ..LdaConfig::default()
            },
        )
        .unwrap();
        let mut vectors = std::collections::HashMap::new();
        for (i, (term, _)) in index.terms().enumerate() {
            let x = i as f64;
            vectors.insert(term.to_string(), vec![x.sin(), x.cos(), 1.0]);
        }
        let store = EmbeddingStore::from_vectors(vectors).unwrap();
        Self { index, lda, store }
    }

    pub fn from_world(world: &SynthWorld, topics: usize, iterations: usize) -> Self {
        let index = CorpusIndex::from_records(world.records.clone(), false).unwrap();
        let lda = train_lda(
            &index,
            &LdaConfig {
                num_topics: topics,
                iterations,
                ..LdaConfig::default()
            },
        )
        .unwrap();
        let store = EmbeddingStore::from_vectors(world.embedding_map()).unwrap();
        Self { index, lda, store }
    }

    pub fn env(&self, n: usize) -> Environment<'_> {
        Environment::new(
            &self.index,
            &self.lda,
            &self.store,
            EnvConfig {
                n_per_template: n,
                ..EnvConfig::default()
            },
        )
        .unwrap()
    }

    pub fn id(&self, name: &str) -> EntityId {
        self.index.entity_id(name).unwrap()
    }
}

pub fn small_world(seed: u64) -> SynthWorld {
    SynthWorld::generate(&SynthConfig {
        num_docs: 150,
        num_entities: 40,
        num_themes: 4,
        planted_chains: 8,
        seed,
        ..SynthConfig::default()
    })
    .unwrap()
}

/// Undirected co-occurrence adjacency read straight from the corpus
/// records: entities mentioned within three consecutive sentences.
pub fn record_adjacency(records: &[DocumentRecord]) -> BTreeMap<String, BTreeSet<String>> {
    let mut adj: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for r in records {
        for a in &r.mentions {
            adj.entry(a.entity.clone()).or_default();
            for b in &r.mentions {
                if a.entity != b.entity && a.sentence.abs_diff(b.sentence) <= 2 {
                    adj.entry(a.entity.clone())
                        .or_default()
                        .insert(b.entity.clone());
                }
            }
        }
    }
    adj
}

pub fn bfs<K: Ord + Clone>(adj: &BTreeMap<K, BTreeSet<K>>, from: &K) -> BTreeMap<K, usize> {
    let mut dist = BTreeMap::from([(from.clone(), 0)]);
    let mut queue = VecDeque::from([from.clone()]);
    while let Some(v) = queue.pop_front() {
        let d = dist[&v];
        for w in adj.get(&v).into_iter().flatten() {
            if !dist.contains_key(w) {
                dist.insert(w.clone(), d + 1);
                queue.push_back(w.clone());
            }
        }
    }
    dist
}
