//! Synthetic annotated corpora with themed vocabulary, matching word
//! vectors and planted multi-hop bridge chains between themes.
//!
//! Entities belong to a theme and their names are built from that theme's
//! words, so entity vectors of the same theme are close in cosine. Regular
//! documents mostly mention entities of their own theme; bridge documents
//! plant explicit chains of co-occurring entities across themes.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{DocumentRecord, MentionRecord};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub num_docs: usize,
    pub num_entities: usize,
    pub num_themes: usize,
    pub embedding_dim: usize,
    pub words_per_theme: usize,
    pub filler_words: usize,
    /// Share of sentence tokens drawn from the shared filler vocabulary.
    pub filler_ratio: f64,
    pub sentences_per_doc: (usize, usize),
    pub words_per_sentence: (usize, usize),
    pub mentions_per_doc: (usize, usize),
    /// Probability that a mention comes from a different theme.
    pub cross_theme_rate: f64,
    /// Zipf exponent of entity popularity within a theme; 0 is uniform.
    pub entity_skew: f64,
    pub planted_chains: usize,
    /// Entities per planted chain minus one, inclusive range.
    pub chain_hops: (usize, usize),
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_docs: 500,
            num_entities: 150,
            num_themes: 10,
            embedding_dim: 16,
            words_per_theme: 40,
            filler_words: 60,
            filler_ratio: 0.3,
            sentences_per_doc: (4, 8),
            words_per_sentence: (6, 12),
            mentions_per_doc: (2, 4),
            cross_theme_rate: 0.08,
            entity_skew: 0.0,
            planted_chains: 30,
            chain_hops: (2, 4),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SynthWorld {
    pub records: Vec<DocumentRecord>,
    /// Word vectors, sorted by token.
    pub embeddings: Vec<(String, Vec<f64>)>,
    /// Theme label of every document (`bridge` for planted chain documents).
    pub labels: Vec<(String, String)>,
    /// Entity names of every planted chain, endpoint to endpoint.
    pub chains: Vec<Vec<String>>,
}

impl SynthWorld {
    pub fn generate(cfg: &SynthConfig) -> Result<Self> {
        if cfg.num_themes == 0 || cfg.num_entities < 2 * cfg.num_themes || cfg.words_per_theme < 2 {
            return Err(Error::config(
                "synthetic world needs themes with at least two entities and two words",
            ));
        }
        if !(cfg.entity_skew >= 0.0 && cfg.entity_skew.is_finite()) {
            return Err(Error::config("entity_skew must be finite and non-negative"));
        }
        if cfg.embedding_dim == 0 || cfg.sentences_per_doc.0 == 0 || cfg.mentions_per_doc.0 == 0 {
            return Err(Error::config("synthetic world dimensions must be positive"));
        }
        let max_hops = cfg.chain_hops.1;
        if cfg.planted_chains * max_hops > cfg.num_docs {
            return Err(Error::config(
                "planted chains need more documents than requested",
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

        let mut words = WordForge::default();
        let theme_words: Vec<Vec<String>> = (0..cfg.num_themes)
            .map(|_| {
                (0..cfg.words_per_theme)
                    .map(|_| words.fresh(&mut rng))
                    .collect()
            })
            .collect();
        let filler: Vec<String> = (0..cfg.filler_words)
            .map(|_| words.fresh(&mut rng))
            .collect();

        let mut embeddings = Vec::new();
        for vocab in &theme_words {
            let center: Vec<f64> = (0..cfg.embedding_dim).map(|_| gaussian(&mut rng)).collect();
            for w in vocab {
                let v = center
                    .iter()
                    .map(|c| c + 0.5 * gaussian(&mut rng))
                    .collect();
                embeddings.push((w.clone(), v));
            }
        }
        for w in &filler {
            let v = (0..cfg.embedding_dim).map(|_| gaussian(&mut rng)).collect();
            embeddings.push((w.clone(), v));
        }
        embeddings.sort_by(|a, b| a.0.cmp(&b.0));

        // entities: round-robin over themes, names from theme words
        let mut taken = BTreeSet::new();
        let mut entities: Vec<(String, usize)> = Vec::with_capacity(cfg.num_entities);
        for i in 0..cfg.num_entities {
            let theme = i % cfg.num_themes;
            let vocab = &theme_words[theme];
            let name = loop {
                let parts = rng.gen_range(1..=3usize);
                let name = (0..parts)
                    .map(|_| capitalize(&vocab[rng.gen_range(0..vocab.len())]))
                    .collect::<Vec<_>>()
                    .join("_");
                if taken.insert(name.clone()) {
                    break name;
                }
            };
            entities.push((name, theme));
        }
        let by_theme: Vec<Vec<usize>> = (0..cfg.num_themes)
            .map(|t| {
                (0..entities.len())
                    .filter(|&i| entities[i].1 == t)
                    .collect()
            })
            .collect();

        let popularity: Vec<WeightedIndex<f64>> = by_theme
            .iter()
            .map(|members| {
                let weights = (0..members.len()).map(|r| (r as f64 + 1.0).powf(-cfg.entity_skew));
                WeightedIndex::new(weights).expect("themes have entities")
            })
            .collect();

        let sentence = |rng: &mut ChaCha8Rng, theme: usize| -> String {
            let len = rng.gen_range(cfg.words_per_sentence.0..=cfg.words_per_sentence.1);
            (0..len)
                .map(|_| {
                    if rng.gen_bool(cfg.filler_ratio.clamp(0.0, 1.0)) && !filler.is_empty() {
                        filler[rng.gen_range(0..filler.len())].clone()
                    } else {
                        let vocab = &theme_words[theme];
                        vocab[rng.gen_range(0..vocab.len())].clone()
                    }
                })
                .collect::<Vec<_>>()
                .join(" ")
        };

        let mut records = Vec::with_capacity(cfg.num_docs);
        let mut labels = Vec::with_capacity(cfg.num_docs);
        let mut chains = Vec::new();

        for c in 0..cfg.planted_chains {
            let hops = rng.gen_range(cfg.chain_hops.0..=cfg.chain_hops.1);
            // endpoints from different themes, intermediates from anywhere
            let t1 = rng.gen_range(0..cfg.num_themes);
            let t2 = if cfg.num_themes > 1 {
                (t1 + rng.gen_range(1..cfg.num_themes)) % cfg.num_themes
            } else {
                t1
            };
            let mut chain = vec![*by_theme[t1].choose(&mut rng).unwrap()];
            while chain.len() < hops {
                let next = rng.gen_range(0..entities.len());
                if !chain.contains(&next) {
                    chain.push(next);
                }
            }
            let last = loop {
                let e = *by_theme[t2].choose(&mut rng).unwrap();
                if !chain.contains(&e) {
                    break e;
                }
            };
            chain.push(last);
            for (h, pair) in chain.windows(2).enumerate() {
                let theme = entities[pair[0]].1;
                let mut sentences: Vec<String> =
                    (0..3).map(|_| sentence(&mut rng, theme)).collect();
                let at = rng.gen_range(0..2);
                let mentions = vec![
                    mention(&entities[pair[0]].0, at, &mut sentences),
                    mention(&entities[pair[1]].0, at + 1, &mut sentences),
                ];
                let id = format!("bridge-{c:03}-{h}");
                labels.push((id.clone(), "bridge".to_string()));
                records.push(DocumentRecord {
                    title: id.replace('-', " "),
                    id,
                    sentences,
                    mentions,
                });
            }
            chains.push(chain.iter().map(|&e| entities[e].0.clone()).collect());
        }

        let regular = cfg.num_docs - records.len();
        for i in 0..regular {
            let theme = i % cfg.num_themes;
            let n_sent = rng.gen_range(cfg.sentences_per_doc.0..=cfg.sentences_per_doc.1);
            let mut sentences: Vec<String> =
                (0..n_sent).map(|_| sentence(&mut rng, theme)).collect();
            let n_mentions = rng.gen_range(cfg.mentions_per_doc.0..=cfg.mentions_per_doc.1);
            let mut mentions = Vec::with_capacity(n_mentions);
            for _ in 0..n_mentions {
                let source_theme = if rng.gen_bool(cfg.cross_theme_rate.clamp(0.0, 1.0)) {
                    rng.gen_range(0..cfg.num_themes)
                } else {
                    theme
                };
                let e = by_theme[source_theme][popularity[source_theme].sample(&mut rng)];
                let at = rng.gen_range(0..n_sent);
                mentions.push(mention(&entities[e].0, at, &mut sentences));
            }
            let id = format!("doc-{i:04}");
            labels.push((id.clone(), format!("theme-{theme}")));
            records.push(DocumentRecord {
                title: id.replace('-', " "),
                id,
                sentences,
                mentions,
            });
        }

        Ok(Self {
            records,
            embeddings,
            labels,
            chains,
        })
    }

    pub fn write_corpus<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn write_embeddings<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (token, v) in &self.embeddings {
            write!(out, "{token}")?;
            for x in v {
                write!(out, " {x:.6}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn write_labels<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (id, label) in &self.labels {
            serde_json::to_writer(
                &mut out,
                &LabelRecord {
                    id: id.clone(),
                    label: label.clone(),
                },
            )?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Word vectors as a map, for building an in-memory store.
    pub fn embedding_map(&self) -> HashMap<String, Vec<f64>> {
        self.embeddings
            .iter()
            .map(|(t, v)| (t.clone(), v.iter().map(|x| round6(*x)).collect()))
            .collect()
    }
}

/// One line of a document label file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub id: String,
    pub label: String,
}

/// Same rounding as the text embedding file, so in-memory and on-disk
/// stores agree exactly.
fn round6(x: f64) -> f64 {
    format!("{x:.6}").parse().unwrap()
}

fn mention(entity: &str, sentence: usize, sentences: &mut [String]) -> MentionRecord {
    let surface = entity.replace('_', " ");
    let s = &mut sentences[sentence];
    s.push(' ');
    s.push_str(&surface);
    MentionRecord {
        entity: entity.to_string(),
        surface,
        sentence,
    }
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Pronounceable unique pseudo-words.
#[derive(Default)]
struct WordForge {
    used: BTreeSet<String>,
}

impl WordForge {
    fn fresh(&mut self, rng: &mut ChaCha8Rng) -> String {
        const ONSETS: &[&str] = &[
            "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st", "tr",
            "kl",
        ];
        const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou"];
        loop {
            let syllables = rng.gen_range(2..=3);
            let w: String = (0..syllables)
                .map(|_| {
                    format!(
                        "{}{}",
                        ONSETS.choose(rng).unwrap(),
                        VOWELS.choose(rng).unwrap()
                    )
                })
                .collect();
            if self.used.insert(w.clone()) {
                return w;
            }
        }
    }
}
