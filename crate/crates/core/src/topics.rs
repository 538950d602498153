//! LDA topic model (collapsed Gibbs sampling) and the topic statistics
//! used as state features: aggregation, entropy and KL divergence.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusIndex, DocId};
use crate::error::{Error, Result};

/// Floor applied to both arguments of [`kl_divergence`].
pub const KL_EPSILON: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicDistribution(Vec<f64>);

impl TopicDistribution {
    /// Normalizes non-negative weights. All-zero weights give the uniform
    /// distribution.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::contract(
                "topic distribution needs at least one topic",
            ));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::contract(
                "topic weights must be finite and non-negative",
            ));
        }
        let total: f64 = weights.iter().sum();
        if total == 0.0 {
            return Ok(Self::uniform(weights.len()));
        }
        Ok(Self(weights.into_iter().map(|w| w / total).collect()))
    }

    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn num_topics(&self) -> usize {
        self.0.len()
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = k;
            }
        }
        best
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdaConfig {
    pub num_topics: usize,
    pub iterations: usize,
    pub seed: u64,
    /// Symmetric document-topic prior; `None` means `50 / K`.
    pub alpha: Option<f64>,
    pub beta: f64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        Self {
            num_topics: 50,
            iterations: 500,
            seed: 0,
            alpha: None,
            beta: 0.01,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub num_topics: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub iterations: usize,
    pub vocabulary: Vec<String>,
    /// `K x V` word probabilities per topic.
    pub topic_word: Vec<Vec<f64>>,
    /// Document names, in [`DocId`] order.
    pub doc_ids: Vec<String>,
    pub doc_topics: Vec<TopicDistribution>,
}

pub fn train_lda(index: &CorpusIndex, cfg: &LdaConfig) -> Result<LdaModel> {
    let k = cfg.num_topics;
    if k < 2 {
        return Err(Error::config(format!(
            "LDA needs at least 2 topics, got {k}"
        )));
    }
    if index.corpus_size() == 0 {
        return Err(Error::config("cannot train LDA on an empty corpus"));
    }
    let alpha = cfg.alpha.unwrap_or(50.0 / k as f64);
    let beta = cfg.beta;
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::config("LDA priors must be positive"));
    }

    let vocabulary: Vec<String> = index.terms().map(|(t, _)| t.to_string()).collect();
    let word_id: HashMap<&str, u32> = vocabulary
        .iter()
        .enumerate()
        .map(|(i, w)| (w.as_str(), i as u32))
        .collect();
    let docs: Vec<Vec<u32>> = index
        .documents()
        .map(|(d, _)| {
            index
                .doc_terms(d)
                .iter()
                .map(|t| word_id[t.as_str()])
                .collect()
        })
        .collect();
    let v = vocabulary.len();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut doc_topic = vec![0u32; docs.len() * k];
    // word-major so one token's K counts are contiguous
    let mut word_topic = vec![0u32; v * k];
    let mut topic_total = vec![0u32; k];
    let mut assignments: Vec<Vec<u16>> = Vec::with_capacity(docs.len());
    for (d, words) in docs.iter().enumerate() {
        let mut z = Vec::with_capacity(words.len());
        for &w in words {
            let t = rng.gen_range(0..k);
            z.push(t as u16);
            doc_topic[d * k + t] += 1;
            word_topic[w as usize * k + t] += 1;
            topic_total[t] += 1;
        }
        assignments.push(z);
    }

    let v_beta = v as f64 * beta;
    let mut cumulative = vec![0.0f64; k];
    for _ in 0..cfg.iterations {
        for (d, words) in docs.iter().enumerate() {
            for (i, &w) in words.iter().enumerate() {
                let w = w as usize;
                let old = assignments[d][i] as usize;
                doc_topic[d * k + old] -= 1;
                word_topic[w * k + old] -= 1;
                topic_total[old] -= 1;

                let dt = &doc_topic[d * k..(d + 1) * k];
                let wt = &word_topic[w * k..(w + 1) * k];
                let mut acc = 0.0;
                for t in 0..k {
                    acc += (dt[t] as f64 + alpha) * (wt[t] as f64 + beta)
                        / (topic_total[t] as f64 + v_beta);
                    cumulative[t] = acc;
                }
                let u = rng.gen::<f64>() * acc;
                let new = cumulative.partition_point(|&c| c <= u).min(k - 1);

                assignments[d][i] = new as u16;
                doc_topic[d * k + new] += 1;
                word_topic[w * k + new] += 1;
                topic_total[new] += 1;
            }
        }
    }

    let topic_word = (0..k)
        .map(|t| {
            let denom = topic_total[t] as f64 + v_beta;
            (0..v)
                .map(|w| (word_topic[w * k + t] as f64 + beta) / denom)
                .collect()
        })
        .collect();
    let doc_topics = docs
        .iter()
        .enumerate()
        .map(|(d, words)| {
            let denom = words.len() as f64 + k as f64 * alpha;
            TopicDistribution(
                (0..k)
                    .map(|t| (doc_topic[d * k + t] as f64 + alpha) / denom)
                    .collect(),
            )
        })
        .collect();
    Ok(LdaModel {
        num_topics: k,
        alpha,
        beta,
        seed: cfg.seed,
        iterations: cfg.iterations,
        vocabulary,
        topic_word,
        doc_ids: index.documents().map(|(_, d)| d.doc_id.clone()).collect(),
        doc_topics,
    })
}

impl LdaModel {
    pub fn doc_distribution(&self, doc: DocId) -> Option<&TopicDistribution> {
        self.doc_topics.get(doc.index())
    }

    /// Sums the documents' topic distributions and renormalizes. The empty
    /// set aggregates to the uniform distribution.
    pub fn aggregate(&self, docs: &[DocId]) -> Result<TopicDistribution> {
        if docs.is_empty() {
            return Ok(TopicDistribution::uniform(self.num_topics));
        }
        let mut sum = vec![0.0; self.num_topics];
        for &d in docs {
            let dist = self.doc_distribution(d).ok_or_else(|| {
                Error::contract(format!("document {d:?} unknown to the topic model"))
            })?;
            for (acc, p) in sum.iter_mut().zip(dist.probs()) {
                *acc += p;
            }
        }
        TopicDistribution::from_weights(sum)
    }

    /// Entropy change from the previous step's documents to the candidate's.
    pub fn delta_entropy(&self, candidate: &[DocId], previous: &[DocId]) -> Result<f64> {
        Ok(entropy(&self.aggregate(candidate)?) - entropy(&self.aggregate(previous)?))
    }

    /// Fails when the model was trained on a different document set.
    pub fn check_compatible(&self, index: &CorpusIndex) -> Result<()> {
        let same = self.doc_ids.len() == index.corpus_size()
            && index
                .documents()
                .all(|(d, doc)| self.doc_ids[d.index()] == doc.doc_id);
        if same {
            Ok(())
        } else {
            Err(Error::config(
                "topic model was trained on a different corpus",
            ))
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        serde_json::to_writer(&mut out, self).map_err(|e| Error::artifact(path, e.to_string()))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::artifact(path, e.to_string()))
    }
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn entropy(p: &TopicDistribution) -> f64 {
    -p.probs()
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>()
}

/// `KL(p || q)` after flooring both distributions at [`KL_EPSILON`] and
/// renormalizing.
pub fn kl_divergence(p: &TopicDistribution, q: &TopicDistribution) -> Result<f64> {
    if p.num_topics() != q.num_topics() {
        return Err(Error::contract(format!(
            "KL divergence between {} and {} topics",
            p.num_topics(),
            q.num_topics()
        )));
    }
    let floor = |d: &TopicDistribution| {
        let v: Vec<f64> = d.probs().iter().map(|&x| x.max(KL_EPSILON)).collect();
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect::<Vec<_>>()
    };
    let (p, q) = (floor(p), floor(q));
    let kl: f64 = p.iter().zip(&q).map(|(a, b)| a * (a / b).ln()).sum();
    Ok(kl.max(0.0))
}

/// Mean over label groups of the share of documents whose dominant topic is
/// the group's most common dominant topic.
pub fn topic_purity(model: &LdaModel, labels: &[(DocId, String)]) -> Result<f64> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (d, label) in labels {
        let dist = model
            .doc_distribution(*d)
            .ok_or_else(|| Error::contract(format!("document {d:?} unknown to the topic model")))?;
        groups.entry(label).or_default().push(dist.argmax());
    }
    if groups.is_empty() {
        return Err(Error::contract(
            "purity needs at least one labelled document",
        ));
    }
    let mut total = 0.0;
    for tops in groups.values() {
        let mut counts = vec![0usize; model.num_topics];
        tops.iter().for_each(|&t| counts[t] += 1);
        total += *counts.iter().max().unwrap() as f64 / tops.len() as f64;
    }
    Ok(total / groups.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::DocumentRecord;
    use proptest::prelude::{prop, prop_assert, proptest, Strategy};
    use rand::Rng;

    fn dist(p: &[f64]) -> TopicDistribution {
        TopicDistribution::from_weights(p.to_vec()).unwrap()
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&dist(&[0.0, 1.0, 0.0])), 0.0);
        let k = 7;
        assert!((entropy(&TopicDistribution::uniform(k)) - (k as f64).ln()).abs() < 1e-12);
        let h = entropy(&dist(&[0.5, 0.25, 0.25]));
        assert!((h - 1.5 * 2f64.ln()).abs() < 1e-12);
        assert!((h - 1.0397).abs() < 1e-4);
    }

    #[test]
    fn kl_examples() {
        let p = dist(&[0.3, 0.7]);
        assert!(kl_divergence(&p, &p).unwrap() < 1e-12);
        let kl = kl_divergence(&dist(&[1.0, 0.0]), &dist(&[0.5, 0.5])).unwrap();
        assert!((kl - 2f64.ln()).abs() < 1e-8);
        assert!(kl_divergence(&p, &dist(&[1.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn invalid_weights_rejected() {
        assert!(TopicDistribution::from_weights(vec![]).is_err());
        assert!(TopicDistribution::from_weights(vec![0.5, -0.1]).is_err());
        assert!(TopicDistribution::from_weights(vec![f64::NAN, 1.0]).is_err());
    }

    fn handmade(dists: &[&[f64]]) -> LdaModel {
        LdaModel {
            num_topics: dists[0].len(),
            alpha: 1.0,
            beta: 0.01,
            seed: 0,
            iterations: 0,
            vocabulary: vec![],
            topic_word: vec![],
            doc_ids: (0..dists.len()).map(|i| format!("d{i}")).collect(),
            doc_topics: dists.iter().map(|d| dist(d)).collect(),
        }
    }

    #[test]
    fn aggregation() {
        let m = handmade(&[&[0.8, 0.2], &[0.2, 0.8], &[0.8, 0.2]]);
        assert_eq!(m.aggregate(&[DocId(0)]).unwrap(), m.doc_topics[0]);
        let same = m.aggregate(&[DocId(0), DocId(2)]).unwrap();
        assert!((same.probs()[0] - 0.8).abs() < 1e-12);
        let mixed = m.aggregate(&[DocId(0), DocId(1)]).unwrap();
        assert!((mixed.probs()[0] - 0.5).abs() < 1e-12);
        assert_eq!(m.aggregate(&[]).unwrap(), TopicDistribution::uniform(2));
        assert!(m.aggregate(&[DocId(9)]).is_err());
    }

    #[test]
    fn delta_entropy_cases() {
        let m = handmade(&[&[0.5, 0.25, 0.25], &[1.0, 0.0, 0.0], &[1.0 / 3.0; 3]]);
        assert_eq!(m.delta_entropy(&[DocId(0)], &[DocId(0)]).unwrap(), 0.0);
        let d = m.delta_entropy(&[DocId(2)], &[DocId(1)]).unwrap();
        assert!((d - 3f64.ln()).abs() < 1e-12);
        let d = m.delta_entropy(&[DocId(0)], &[DocId(1)]).unwrap();
        assert!((d - 1.5 * 2f64.ln()).abs() < 1e-12);
        // no previous documents: compared against uniform
        let d = m.delta_entropy(&[DocId(1)], &[]).unwrap();
        assert!((d + 3f64.ln()).abs() < 1e-12);
    }

    fn two_theme_index(docs_per_theme: usize) -> (CorpusIndex, Vec<(DocId, String)>) {
        let themes = [
            ["apple", "pear", "plum", "fig", "grape"],
            ["bolt", "nut", "gear", "lever", "axle"],
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut records = Vec::new();
        for (t, vocab) in themes.iter().enumerate() {
            for i in 0..docs_per_theme {
                let words: Vec<&str> = (0..30)
                    .map(|_| vocab[rng.gen_range(0..vocab.len())])
                    .collect();
                records.push(DocumentRecord {
                    id: format!("t{t}-{i:03}"),
                    title: String::new(),
                    sentences: vec![words.join(" ")],
                    mentions: vec![],
                });
            }
        }
        let index = CorpusIndex::from_records(records, false).unwrap();
        let labels = index
            .documents()
            .map(|(d, doc)| (d, doc.doc_id[..2].to_string()))
            .collect();
        (index, labels)
    }

    #[test]
    fn gibbs_separates_disjoint_vocabularies() {
        let (index, labels) = two_theme_index(40);
        let cfg = LdaConfig {
            num_topics: 2,
            iterations: 50,
            seed: 3,
            ..LdaConfig::default()
        };
        let model = train_lda(&index, &cfg).unwrap();
        assert!(topic_purity(&model, &labels).unwrap() > 0.9);
        for row in &model.topic_word {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
        for d in &model.doc_topics {
            assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
        assert_eq!(model, train_lda(&index, &cfg).unwrap());
    }

    #[test]
    fn training_preconditions() {
        let (index, _) = two_theme_index(2);
        let cfg = LdaConfig {
            num_topics: 1,
            ..LdaConfig::default()
        };
        assert!(matches!(train_lda(&index, &cfg), Err(Error::Config(_))));
        let empty = CorpusIndex::from_records(vec![], false).unwrap();
        assert!(matches!(
            train_lda(&empty, &LdaConfig::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn model_file_round_trip() {
        let (index, _) = two_theme_index(3);
        let cfg = LdaConfig {
            num_topics: 3,
            iterations: 5,
            ..LdaConfig::default()
        };
        let model = train_lda(&index, &cfg).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        model.save(f.path()).unwrap();
        assert_eq!(LdaModel::load(f.path()).unwrap(), model);
        model.check_compatible(&index).unwrap();
    }

    fn arb_dist(k: usize) -> impl Strategy<Value = TopicDistribution> {
        prop::collection::vec(0.0f64..1.0, k).prop_map(|mut w| {
            w[0] += 1e-3;
            TopicDistribution::from_weights(w).unwrap()
        })
    }

    proptest! {
        #[test]
        fn distribution_properties((p, q) in (2usize..12).prop_flat_map(|k| (arb_dist(k), arb_dist(k)))) {
            let k = p.num_topics() as f64;
            prop_assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-6);
            let h = entropy(&p);
            prop_assert!(h >= 0.0 && h <= k.ln() + 1e-12);
            prop_assert!(kl_divergence(&p, &q).unwrap() >= -1e-9);
            prop_assert!(kl_divergence(&p, &p).unwrap() <= 1e-9);
        }
    }
}
