//! Annotated corpus ingestion, boolean template retrieval and tf-idf
//! statistics.
//!
//! Documents and entities are interned on ingestion. Both id spaces are
//! assigned in lexicographic order of the original string identifiers, so
//! ordering by [`DocId`] or [`EntityId`] is the same as ordering by name.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{tokenize, TermNormalizer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DocId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntityId(pub u32);

impl DocId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl EntityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// One line of the corpus file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub id: String,
    #[serde(default)]
    pub title: String,
    pub sentences: Vec<String>,
    #[serde(default)]
    pub mentions: Vec<MentionRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MentionRecord {
    pub entity: String,
    #[serde(default)]
    pub surface: String,
    pub sentence: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Mention {
    pub entity: EntityId,
    pub surface: String,
    pub sentence: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    /// Tokenized sentences (lowercased, unstemmed).
    pub sentences: Vec<Vec<String>>,
    pub mentions: Vec<Mention>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TermStats {
    /// Occurrences across the whole corpus.
    pub frequency: u64,
    /// Sorted documents containing the term.
    pub postings: Vec<DocId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Template {
    Conjunction,
    Singleton,
    Disjunction,
}

impl Template {
    pub const ALL: [Template; 3] = [
        Template::Conjunction,
        Template::Singleton,
        Template::Disjunction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Template::Conjunction => "conjunction",
            Template::Singleton => "singleton",
            Template::Disjunction => "disjunction",
        }
    }
}

/// A boolean retrieval query. Pair templates hold their entities in
/// ascending order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Query {
    Conjunction(EntityId, EntityId),
    Singleton(EntityId),
    Disjunction(EntityId, EntityId),
}

impl Query {
    pub fn conjunction(a: EntityId, b: EntityId) -> Result<Self> {
        let (a, b) = ordered_pair(a, b)?;
        Ok(Query::Conjunction(a, b))
    }

    pub fn disjunction(a: EntityId, b: EntityId) -> Result<Self> {
        let (a, b) = ordered_pair(a, b)?;
        Ok(Query::Disjunction(a, b))
    }

    pub fn singleton(e: EntityId) -> Self {
        Query::Singleton(e)
    }

    pub fn pair(template: Template, a: EntityId, b: EntityId) -> Result<Self> {
        match template {
            Template::Conjunction => Query::conjunction(a, b),
            Template::Disjunction => Query::disjunction(a, b),
            Template::Singleton => Err(Error::contract("singleton query takes one entity")),
        }
    }

    pub fn template(&self) -> Template {
        match self {
            Query::Conjunction(..) => Template::Conjunction,
            Query::Singleton(_) => Template::Singleton,
            Query::Disjunction(..) => Template::Disjunction,
        }
    }

    pub fn entities(&self) -> Vec<EntityId> {
        match *self {
            Query::Conjunction(a, b) | Query::Disjunction(a, b) => vec![a, b],
            Query::Singleton(e) => vec![e],
        }
    }
}

fn ordered_pair(a: EntityId, b: EntityId) -> Result<(EntityId, EntityId)> {
    if a == b {
        return Err(Error::contract(format!(
            "pair query needs two distinct entities, got {a:?} twice"
        )));
    }
    Ok((a.min(b), a.max(b)))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorpusIndex {
    stemmed: bool,
    documents: Vec<Document>,
    entities: Vec<String>,
    postings: Vec<Vec<DocId>>,
    terms: BTreeMap<String, TermStats>,
    #[serde(skip)]
    doc_lookup: HashMap<String, DocId>,
    #[serde(skip)]
    entity_lookup: HashMap<String, EntityId>,
}

const CACHE_MAGIC: &[u8; 8] = b"FRINDEX1";

impl CorpusIndex {
    /// Reads a JSON-lines corpus file.
    pub fn ingest(path: impl AsRef<Path>, stem: bool) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut records = Vec::new();
        let mut seen = BTreeSet::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message,
            };
            let record: DocumentRecord =
                serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
            validate_record(&record).map_err(parse_err)?;
            if !seen.insert(record.id.clone()) {
                return Err(Error::DuplicateDocument(record.id));
            }
            records.push(record);
        }
        Ok(Self::build(records, stem))
    }

    /// Builds an index from in-memory records.
    pub fn from_records(records: Vec<DocumentRecord>, stem: bool) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for record in &records {
            validate_record(record).map_err(|m| Error::contract(format!("{}: {m}", record.id)))?;
            if !seen.insert(record.id.as_str()) {
                return Err(Error::DuplicateDocument(record.id.clone()));
            }
        }
        Ok(Self::build(records, stem))
    }

    fn build(mut records: Vec<DocumentRecord>, stem: bool) -> Self {
        records.sort_by(|a, b| a.id.cmp(&b.id));
        let normalizer = TermNormalizer::new(stem);

        let entities: Vec<String> = records
            .iter()
            .flat_map(|r| r.mentions.iter().map(|m| m.entity.clone()))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let entity_lookup: HashMap<String, EntityId> = entities
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), EntityId(i as u32)))
            .collect();

        let mut postings = vec![Vec::new(); entities.len()];
        let mut terms: BTreeMap<String, TermStats> = BTreeMap::new();
        let mut documents = Vec::with_capacity(records.len());
        for (i, record) in records.into_iter().enumerate() {
            let doc = DocId(i as u32);
            let sentences: Vec<Vec<String>> =
                record.sentences.iter().map(|s| tokenize(s)).collect();
            for token in sentences.iter().flatten() {
                let stats = terms.entry(normalizer.normalize(token)).or_default();
                stats.frequency += 1;
                if stats.postings.last() != Some(&doc) {
                    stats.postings.push(doc);
                }
            }
            let mentions: Vec<Mention> = record
                .mentions
                .into_iter()
                .map(|m| Mention {
                    entity: entity_lookup[&m.entity],
                    surface: m.surface,
                    sentence: m.sentence,
                })
                .collect();
            for m in &mentions {
                let list = &mut postings[m.entity.index()];
                if list.last() != Some(&doc) {
                    list.push(doc);
                }
            }
            documents.push(Document {
                doc_id: record.id,
                title: record.title,
                sentences,
                mentions,
            });
        }

        let mut index = Self {
            stemmed: stem,
            documents,
            entities,
            postings,
            terms,
            doc_lookup: HashMap::new(),
            entity_lookup,
        };
        index.rebuild_lookups();
        index
    }

    fn rebuild_lookups(&mut self) {
        self.doc_lookup = self
            .documents
            .iter()
            .enumerate()
            .map(|(i, d)| (d.doc_id.clone(), DocId(i as u32)))
            .collect();
        self.entity_lookup = self
            .entities
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), EntityId(i as u32)))
            .collect();
    }

    pub fn save_cache(&self, path: impl AsRef<Path>) -> Result<()> {
        use std::io::Write;
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        out.write_all(CACHE_MAGIC).map_err(|e| Error::io(path, e))?;
        bincode::serialize_into(&mut out, self)
            .map_err(|e| Error::artifact(path, e.to_string()))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load_cache(path: impl AsRef<Path>) -> Result<Self> {
        use std::io::Read;
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut input = BufReader::new(file);
        let mut magic = [0u8; 8];
        input
            .read_exact(&mut magic)
            .map_err(|e| Error::io(path, e))?;
        if &magic != CACHE_MAGIC {
            return Err(Error::artifact(path, "not an index cache file"));
        }
        let mut index: CorpusIndex =
            bincode::deserialize_from(input).map_err(|e| Error::artifact(path, e.to_string()))?;
        index.rebuild_lookups();
        Ok(index)
    }

    /// Loads either a corpus file or an index cache, depending on the
    /// leading bytes.
    pub fn open(path: impl AsRef<Path>, stem: bool) -> Result<Self> {
        use std::io::Read;
        let path = path.as_ref();
        let mut magic = [0u8; 8];
        let is_cache = File::open(path)
            .and_then(|mut f| f.read_exact(&mut magic))
            .map(|_| &magic == CACHE_MAGIC)
            .unwrap_or(false);
        if is_cache {
            Self::load_cache(path)
        } else {
            Self::ingest(path, stem)
        }
    }

    pub fn is_stemmed(&self) -> bool {
        self.stemmed
    }

    pub fn corpus_size(&self) -> usize {
        self.documents.len()
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn vocabulary_size(&self) -> usize {
        self.terms.len()
    }

    pub fn documents(&self) -> impl Iterator<Item = (DocId, &Document)> {
        self.documents
            .iter()
            .enumerate()
            .map(|(i, d)| (DocId(i as u32), d))
    }

    pub fn document(&self, doc: DocId) -> Option<&Document> {
        self.documents.get(doc.index())
    }

    pub fn doc_id(&self, name: &str) -> Option<DocId> {
        self.doc_lookup.get(name).copied()
    }

    pub fn doc_name(&self, doc: DocId) -> &str {
        &self.documents[doc.index()].doc_id
    }

    pub fn entity_id(&self, name: &str) -> Option<EntityId> {
        self.entity_lookup.get(name).copied()
    }

    pub fn entity_name(&self, entity: EntityId) -> &str {
        &self.entities[entity.index()]
    }

    pub fn entity_ids(&self) -> impl Iterator<Item = EntityId> {
        (0..self.entities.len() as u32).map(EntityId)
    }

    /// Documents mentioning `entity`; empty for unknown ids.
    pub fn postings(&self, entity: EntityId) -> &[DocId] {
        self.postings
            .get(entity.index())
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn term_stats(&self, term: &str) -> Option<&TermStats> {
        self.terms.get(term)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&str, &TermStats)> {
        self.terms.iter().map(|(t, s)| (t.as_str(), s))
    }

    pub fn doc_frequency(&self, term: &str) -> usize {
        self.terms.get(term).map_or(0, |s| s.postings.len())
    }

    /// Applies the index's term normalization (stemming, when enabled).
    pub fn normalize_term(&self, token: &str) -> String {
        TermNormalizer::new(self.stemmed).normalize(token)
    }

    /// Normalized tokens of a document, in reading order.
    pub fn doc_terms(&self, doc: DocId) -> Vec<String> {
        let normalizer = TermNormalizer::new(self.stemmed);
        self.documents[doc.index()]
            .sentences
            .iter()
            .flatten()
            .map(|t| normalizer.normalize(t))
            .collect()
    }

    /// Sorted, deduplicated result set of a template query.
    pub fn retrieve(&self, query: &Query) -> Vec<DocId> {
        match *query {
            Query::Singleton(e) => self.postings(e).to_vec(),
            Query::Conjunction(a, b) => intersect_sorted(self.postings(a), self.postings(b)),
            Query::Disjunction(a, b) => union_sorted(self.postings(a), self.postings(b)),
        }
    }

    /// tf-idf of a single (already normalized) term: corpus-wide term
    /// frequency times `max(ln(N / (1 + df)), 0)`.
    pub fn tfidf(&self, term: &str) -> f64 {
        let Some(stats) = self.terms.get(term) else {
            return 0.0;
        };
        let n = self.corpus_size() as f64;
        let idf = (n / (1.0 + stats.postings.len() as f64)).ln();
        stats.frequency as f64 * idf.max(0.0)
    }

    /// Mean tf-idf of the description's tokens.
    pub fn avg_tfidf(&self, description: &[String]) -> f64 {
        if description.is_empty() {
            log::warn!("avg_tfidf called with an empty description");
            return 0.0;
        }
        let normalizer = TermNormalizer::new(self.stemmed);
        let total: f64 = description
            .iter()
            .map(|t| self.tfidf(&normalizer.normalize(t)))
            .sum();
        total / description.len() as f64
    }
}

fn validate_record(record: &DocumentRecord) -> std::result::Result<(), String> {
    for m in &record.mentions {
        if m.sentence >= record.sentences.len() {
            return Err(format!(
                "mention of `{}` points at sentence {} but document `{}` has {} sentences",
                m.entity,
                m.sentence,
                record.id,
                record.sentences.len()
            ));
        }
    }
    Ok(())
}

pub(crate) fn intersect_sorted<T: Ord + Copy>(a: &[T], b: &[T]) -> Vec<T> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

pub(crate) fn union_sorted<T: Ord + Copy>(a: &[T], b: &[T]) -> Vec<T> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::with_capacity(a.len() + b.len());
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Query::Conjunction(a, b) => write!(f, "{} AND {}", a.0, b.0),
            Query::Singleton(e) => write!(f, "{}", e.0),
            Query::Disjunction(a, b) => write!(f, "{} OR {}", a.0, b.0),
        }
    }
}
