//! The focused-reading decision process: beam-ranked query actions, query
//! execution against the index, state features and rewards.

use std::collections::BTreeSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusIndex, DocId, EntityId, Query, Template};
use crate::embeddings::{cosine_unchecked, norm, EmbeddingStore};
use crate::error::{Error, Result};
use crate::extraction::{extract_all, DocExtraction};
use crate::graph::KnowledgeGraph;
use crate::text::entity_description;
use crate::topics::{entropy, kl_divergence, LdaModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub success_reward: f64,
    pub doc_cost: f64,
    pub empty_cost: f64,
    /// Cost of the early-stop action.
    pub early_stop_cost: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            success_reward: 1000.0,
            doc_cost: 10.0,
            empty_cost: 100.0,
            early_stop_cost: 100.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub n_per_template: usize,
    pub max_steps: usize,
    pub reward: RewardConfig,
    /// Above this many vertex pairs, pair ranking only considers the
    /// `prefilter_entities` vertices with the highest tf-idf.
    pub max_pairs: usize,
    pub prefilter_entities: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            n_per_template: 15,
            max_steps: 10,
            reward: RewardConfig::default(),
            max_pairs: 200_000,
            prefilter_entities: 1_000,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let r = &self.reward;
        if self.n_per_template == 0 || self.max_steps == 0 {
            return Err(Error::config(
                "n_per_template and max_steps must be at least 1",
            ));
        }
        if !(r.success_reward > 0.0
            && r.doc_cost > 0.0
            && r.empty_cost > 0.0
            && r.early_stop_cost >= 0.0)
        {
            return Err(Error::config("rewards S, c and e must be positive"));
        }
        if self.prefilter_entities < 2 {
            return Err(Error::config("prefilter_entities must be at least 2"));
        }
        Ok(())
    }

    /// Size of the policy's action space: `3n` query slots plus early stop.
    pub fn num_actions(&self) -> usize {
        3 * self.n_per_template + 1
    }
}

/// Positions of the feature groups inside a state vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub n_per_template: usize,
    pub embedding_dim: usize,
}

pub const SEARCH_FEATURES: usize = 4;
/// Normalizers of the search-state block, after the iteration count (which
/// is divided by `max_steps`).
pub const DOC_NORMALIZER: f64 = 1000.0;
pub const VERTEX_NORMALIZER: f64 = 1000.0;
pub const EDGE_NORMALIZER: f64 = 1000.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureGroup {
    Search,
    Endpoints,
    Query,
    Topic,
}

impl FeatureLayout {
    pub fn len(&self) -> usize {
        SEARCH_FEATURES + 2 * self.embedding_dim + 12 * self.n_per_template
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn range(&self, group: FeatureGroup) -> Range<usize> {
        let endpoints = SEARCH_FEATURES + 2 * self.embedding_dim;
        let query = endpoints + 6 * self.n_per_template;
        match group {
            FeatureGroup::Search => 0..SEARCH_FEATURES,
            FeatureGroup::Endpoints => SEARCH_FEATURES..endpoints,
            FeatureGroup::Query => endpoints..query,
            FeatureGroup::Topic => query..self.len(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SearchProblem {
    pub source: EntityId,
    pub destination: EntityId,
}

/// A search problem as stored in problem files.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProblemRecord {
    pub source: String,
    pub destination: String,
}

pub fn read_problems(path: impl AsRef<Path>) -> Result<Vec<ProblemRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_problems<W: Write>(problems: &[ProblemRecord], mut out: W) -> std::io::Result<()> {
    for p in problems {
        serde_json::to_writer(&mut out, p)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Running,
    Success,
    Timeout,
    EarlyStop,
}

impl Outcome {
    pub fn is_terminal(self) -> bool {
        self != Outcome::Running
    }
}

#[derive(Clone, Debug)]
pub struct EpisodeState {
    pub problem: SearchProblem,
    pub kg: KnowledgeGraph,
    seen: Vec<bool>,
    /// Documents read so far, in reading order.
    pub seen_docs: Vec<DocId>,
    pub iteration: usize,
    /// Unseen documents read by the latest query.
    pub last_step_docs: Vec<DocId>,
    pub outcome: Outcome,
}

impl EpisodeState {
    pub fn is_seen(&self, doc: DocId) -> bool {
        self.seen[doc.index()]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    Query(Query),
    EarlyStop,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub kind: ActionKind,
    /// Cosine similarity (pair templates) or average tf-idf (singleton).
    pub rank_score: f64,
    /// Position in the fixed `3n + 1` action layout; `None` for queries
    /// built outside the beam.
    pub slot: Option<usize>,
}

impl Action {
    pub fn query(&self) -> Option<&Query> {
        match &self.kind {
            ActionKind::Query(q) => Some(q),
            ActionKind::EarlyStop => None,
        }
    }

    pub fn template(&self) -> Option<Template> {
        self.query().map(Query::template)
    }

    pub fn describe(&self, index: &CorpusIndex) -> String {
        match self.kind {
            ActionKind::EarlyStop => "early_stop".into(),
            ActionKind::Query(Query::Singleton(e)) => {
                format!("singleton({})", index.entity_name(e))
            }
            ActionKind::Query(Query::Conjunction(a, b)) => {
                format!(
                    "conjunction({}, {})",
                    index.entity_name(a),
                    index.entity_name(b)
                )
            }
            ActionKind::Query(Query::Disjunction(a, b)) => {
                format!(
                    "disjunction({}, {})",
                    index.entity_name(a),
                    index.entity_name(b)
                )
            }
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ActionKind::EarlyStop => write!(f, "early_stop"),
            ActionKind::Query(q) => write!(f, "{q}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepResult {
    pub reward: f64,
    pub done: bool,
    /// Previously unseen documents read in this step.
    pub new_docs: usize,
    pub outcome: Outcome,
}

pub struct Environment<'a> {
    index: &'a CorpusIndex,
    topics: &'a LdaModel,
    embeddings: &'a EmbeddingStore,
    cfg: EnvConfig,
    extractions: Vec<DocExtraction>,
    entity_vectors: Vec<Vec<f64>>,
    entity_norms: Vec<f64>,
    entity_tfidf: Vec<f64>,
}

impl<'a> Environment<'a> {
    pub fn new(
        index: &'a CorpusIndex,
        topics: &'a LdaModel,
        embeddings: &'a EmbeddingStore,
        cfg: EnvConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        topics.check_compatible(index)?;
        let mut entity_vectors = Vec::with_capacity(index.num_entities());
        let mut entity_tfidf = Vec::with_capacity(index.num_entities());
        let mut fallback = 0;
        for e in index.entity_ids() {
            let description = entity_description(index.entity_name(e));
            let v = embeddings.entity_vector(&description);
            fallback += usize::from(v.is_fallback());
            entity_vectors.push(v.values);
            entity_tfidf.push(index.avg_tfidf(&description));
        }
        if fallback > 0 {
            log::warn!(
                "{fallback} entities have no in-vocabulary description token; using zero vectors"
            );
        }
        let entity_norms = entity_vectors.iter().map(|v| norm(v)).collect();
        Ok(Self {
            index,
            topics,
            embeddings,
            cfg,
            extractions: extract_all(index),
            entity_vectors,
            entity_norms,
            entity_tfidf,
        })
    }

    pub fn index(&self) -> &'a CorpusIndex {
        self.index
    }

    pub fn topics(&self) -> &'a LdaModel {
        self.topics
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn extractions(&self) -> &[DocExtraction] {
        &self.extractions
    }

    pub fn layout(&self) -> FeatureLayout {
        FeatureLayout {
            n_per_template: self.cfg.n_per_template,
            embedding_dim: self.embeddings.dimension(),
        }
    }

    pub fn num_actions(&self) -> usize {
        self.cfg.num_actions()
    }

    pub fn entity_vector(&self, e: EntityId) -> &[f64] {
        &self.entity_vectors[e.index()]
    }

    pub fn singleton_score(&self, e: EntityId) -> f64 {
        self.entity_tfidf[e.index()]
    }

    pub fn pair_score(&self, a: EntityId, b: EntityId) -> f64 {
        let (i, j) = (a.index(), b.index());
        cosine_unchecked(
            &self.entity_vectors[i],
            &self.entity_vectors[j],
            self.entity_norms[i],
            self.entity_norms[j],
        )
    }

    pub fn problem(&self, record: &ProblemRecord) -> Result<SearchProblem> {
        let lookup = |name: &str| {
            self.index.entity_id(name).ok_or_else(|| {
                Error::InvalidProblem(format!("entity `{name}` does not occur in the corpus"))
            })
        };
        let problem = SearchProblem {
            source: lookup(&record.source)?,
            destination: lookup(&record.destination)?,
        };
        if problem.source == problem.destination {
            return Err(Error::InvalidProblem(format!(
                "source and destination are both `{}`",
                record.source
            )));
        }
        Ok(problem)
    }

    pub fn problem_record(&self, problem: &SearchProblem) -> ProblemRecord {
        ProblemRecord {
            source: self.index.entity_name(problem.source).to_string(),
            destination: self.index.entity_name(problem.destination).to_string(),
        }
    }

    pub fn reset(&self, problem: &SearchProblem) -> Result<EpisodeState> {
        if problem.source == problem.destination {
            return Err(Error::InvalidProblem("source equals destination".into()));
        }
        for e in [problem.source, problem.destination] {
            if self.index.postings(e).is_empty() {
                return Err(Error::InvalidProblem(format!(
                    "entity {e:?} does not occur in the corpus"
                )));
            }
        }
        Ok(EpisodeState {
            problem: *problem,
            kg: KnowledgeGraph::with_endpoints(problem.source, problem.destination),
            seen: vec![false; self.index.corpus_size()],
            seen_docs: Vec::new(),
            iteration: 0,
            last_step_docs: Vec::new(),
            outcome: Outcome::Running,
        })
    }

    /// Beam of query actions (top `n` per template) followed by early stop.
    ///
    /// Slots `0..n` hold conjunctions, `n..2n` singletons, `2n..3n`
    /// disjunctions and `3n` early stop; unfilled slots are simply absent.
    pub fn candidate_actions(&self, state: &EpisodeState) -> Result<Vec<Action>> {
        if state.outcome.is_terminal() {
            return Err(Error::contract(
                "candidate actions requested for a finished episode",
            ));
        }
        let n = self.cfg.n_per_template;
        let vertices: Vec<EntityId> = state.kg.vertices().collect();

        let by_tfidf = |a: &EntityId, b: &EntityId| {
            self.singleton_score(*b)
                .total_cmp(&self.singleton_score(*a))
                .then(a.cmp(b))
        };

        let pair_pool: Vec<EntityId> =
            if vertices.len() * vertices.len().saturating_sub(1) / 2 > self.cfg.max_pairs {
                let mut pool = vertices.clone();
                pool.sort_by(by_tfidf);
                pool.truncate(self.cfg.prefilter_entities);
                pool.sort();
                pool
            } else {
                vertices.clone()
            };
        let top_pairs = self.top_pairs(&pair_pool, n);

        let mut singles = vertices;
        singles.sort_by(by_tfidf);
        singles.truncate(n);

        let mut actions = Vec::with_capacity(self.num_actions());
        for (i, &(score, a, b)) in top_pairs.iter().enumerate() {
            actions.push(Action {
                kind: ActionKind::Query(Query::Conjunction(a, b)),
                rank_score: score,
                slot: Some(i),
            });
        }
        for (i, &e) in singles.iter().enumerate() {
            actions.push(Action {
                kind: ActionKind::Query(Query::Singleton(e)),
                rank_score: self.singleton_score(e),
                slot: Some(n + i),
            });
        }
        for (i, &(score, a, b)) in top_pairs.iter().enumerate() {
            actions.push(Action {
                kind: ActionKind::Query(Query::Disjunction(a, b)),
                rank_score: score,
                slot: Some(2 * n + i),
            });
        }
        actions.push(Action {
            kind: ActionKind::EarlyStop,
            rank_score: 0.0,
            slot: Some(3 * n),
        });
        Ok(actions)
    }

    /// Highest-cosine pairs, ties broken by ascending `(a, b)`.
    fn top_pairs(&self, pool: &[EntityId], n: usize) -> Vec<(f64, EntityId, EntityId)> {
        let better = |x: &(f64, EntityId, EntityId), y: &(f64, EntityId, EntityId)| {
            y.0.total_cmp(&x.0).then((x.1, x.2).cmp(&(y.1, y.2)))
        };
        let mut best: Vec<(f64, EntityId, EntityId)> = Vec::with_capacity(n + 1);
        for (i, &a) in pool.iter().enumerate() {
            for &b in &pool[i + 1..] {
                let cand = (self.pair_score(a, b), a, b);
                if best.len() == n && better(&cand, &best[n - 1]).is_ge() {
                    continue;
                }
                let pos = best.partition_point(|x| better(x, &cand).is_lt());
                best.insert(pos, cand);
                best.truncate(n);
            }
        }
        best
    }

    /// A pair query outside the beam, scored like beam pairs.
    pub fn pair_action(&self, template: Template, a: EntityId, b: EntityId) -> Result<Action> {
        let query = Query::pair(template, a, b)?;
        Ok(Action {
            kind: ActionKind::Query(query),
            rank_score: self.pair_score(a, b),
            slot: None,
        })
    }

    /// Documents `query` would retrieve that the episode has not read yet.
    pub fn unseen_docs(&self, state: &EpisodeState, query: &Query) -> Vec<DocId> {
        self.index
            .retrieve(query)
            .into_iter()
            .filter(|&d| !state.is_seen(d))
            .collect()
    }

    /// Fixed-layout state vector; see [`FeatureLayout`].
    pub fn featurize(&self, state: &EpisodeState, actions: &[Action]) -> Result<Vec<f64>> {
        let layout = self.layout();
        let n = self.cfg.n_per_template;
        let mut features = vec![0.0; layout.len()];

        features[0] = state.iteration as f64 / self.cfg.max_steps as f64;
        features[1] = state.seen_docs.len() as f64 / DOC_NORMALIZER;
        features[2] = state.kg.num_vertices() as f64 / VERTEX_NORMALIZER;
        features[3] = state.kg.num_edges() as f64 / EDGE_NORMALIZER;

        let endpoints = layout.range(FeatureGroup::Endpoints);
        let d = layout.embedding_dim;
        features[endpoints.start..endpoints.start + d]
            .copy_from_slice(self.entity_vector(state.problem.source));
        features[endpoints.start + d..endpoints.end]
            .copy_from_slice(self.entity_vector(state.problem.destination));

        let kg_topics = self.topics.aggregate(&state.seen_docs)?;
        let previous_entropy = entropy(&self.topics.aggregate(&state.last_step_docs)?);
        let query_base = layout.range(FeatureGroup::Query).start;
        let topic_base = layout.range(FeatureGroup::Topic).start;
        let mut filled = BTreeSet::new();
        for action in actions {
            let slot = action
                .slot
                .ok_or_else(|| Error::contract("featurize needs beam actions with slots"))?;
            if !filled.insert(slot) {
                return Err(Error::contract(format!("slot {slot} appears twice")));
            }
            let query = match (&action.kind, slot / n.max(1)) {
                (ActionKind::EarlyStop, 3) if slot == 3 * n => continue,
                (ActionKind::Query(q), block)
                    if block < 3 && Template::ALL[block] == q.template() =>
                {
                    q
                }
                _ => {
                    return Err(Error::contract(format!(
                        "action {action} does not belong in slot {slot}"
                    )))
                }
            };
            if query.entities().iter().any(|&e| !state.kg.contains(e)) {
                return Err(Error::contract(format!(
                    "action {action} uses entities outside the graph"
                )));
            }
            let unseen = self.unseen_docs(state, query);
            features[query_base + 2 * slot] = action.rank_score;
            features[query_base + 2 * slot + 1] = unseen.len() as f64;
            let candidate = self.topics.aggregate(&unseen)?;
            features[topic_base + 2 * slot] = entropy(&candidate) - previous_entropy;
            features[topic_base + 2 * slot + 1] = kl_divergence(&candidate, &kg_topics)?;
        }
        Ok(features)
    }

    /// Boolean mask over the `3n + 1` action slots.
    pub fn action_mask(&self, actions: &[Action]) -> Vec<bool> {
        let mut mask = vec![false; self.num_actions()];
        for slot in actions.iter().filter_map(|a| a.slot) {
            if slot < mask.len() {
                mask[slot] = true;
            }
        }
        mask
    }

    /// Executes one action. Exactly one reward branch fires: success,
    /// reading cost `c * m` for `m > 0` new documents, or the empty cost.
    pub fn step(&self, state: &mut EpisodeState, action: &Action) -> Result<StepResult> {
        if state.outcome.is_terminal() {
            return Err(Error::contract("step on a finished episode"));
        }
        let reward_cfg = &self.cfg.reward;
        let query = match &action.kind {
            ActionKind::EarlyStop => {
                state.iteration += 1;
                state.last_step_docs.clear();
                state.outcome = Outcome::EarlyStop;
                return Ok(StepResult {
                    reward: -reward_cfg.early_stop_cost,
                    done: true,
                    new_docs: 0,
                    outcome: Outcome::EarlyStop,
                });
            }
            ActionKind::Query(q) => q,
        };
        if let Some(e) = query
            .entities()
            .into_iter()
            .find(|&e| !state.kg.contains(e))
        {
            return Err(Error::contract(format!(
                "query entity {e:?} is not in the graph"
            )));
        }

        let unseen = self.unseen_docs(state, query);
        state.iteration += 1;
        let iteration = state.iteration;
        for &doc in &unseen {
            state.seen[doc.index()] = true;
            state.seen_docs.push(doc);
            let ex = &self.extractions[doc.index()];
            for &e in &ex.entities {
                state.kg.add_vertex(e, iteration);
            }
            for &(a, b) in &ex.pairs {
                state.kg.add_cooccurrence(a, b, doc, iteration);
            }
        }
        let m = unseen.len();
        state.last_step_docs = unseen;

        let connected = state
            .kg
            .is_connected(state.problem.source, state.problem.destination)?;
        let reward = if connected {
            state.outcome = Outcome::Success;
            reward_cfg.success_reward
        } else if m > 0 {
            -reward_cfg.doc_cost * m as f64
        } else {
            -reward_cfg.empty_cost
        };
        if !connected && state.iteration >= self.cfg.max_steps {
            state.outcome = Outcome::Timeout;
        }
        Ok(StepResult {
            reward,
            done: state.outcome.is_terminal(),
            new_docs: m,
            outcome: state.outcome,
        })
    }
}
