//! Multi-hop search problems mined from the gold graph, split so that no
//! endpoint entity appears in two splits.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::BufWriter;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusIndex, EntityId};
use crate::env::{write_problems, ProblemRecord, SearchProblem};
use crate::error::{Error, Result};
use crate::graph::KnowledgeGraph;

pub const SPLIT_NAMES: [&str; 3] = ["train", "dev", "test"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
}

impl Default for SplitSizes {
    fn default() -> Self {
        Self {
            train: 230,
            dev: 500,
            test: 670,
        }
    }
}

impl SplitSizes {
    fn as_array(self) -> [usize; 3] {
        [self.train, self.dev, self.test]
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemSplits {
    pub train: Vec<SearchProblem>,
    pub dev: Vec<SearchProblem>,
    pub test: Vec<SearchProblem>,
}

impl ProblemSplits {
    pub fn splits(&self) -> [&[SearchProblem]; 3] {
        [&self.train, &self.dev, &self.test]
    }

    pub fn endpoints(split: &[SearchProblem]) -> BTreeSet<EntityId> {
        split
            .iter()
            .flat_map(|p| [p.source, p.destination])
            .collect()
    }

    pub fn counts(&self) -> [usize; 3] {
        [self.train.len(), self.dev.len(), self.test.len()]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub sizes: SplitSizes,
    pub min_hops: usize,
    pub max_hops: usize,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            sizes: SplitSizes::default(),
            min_hops: 2,
            max_hops: 4,
            seed: 0,
        }
    }
}

/// Unordered pairs whose gold shortest path has between `min_hops` and
/// `max_hops` edges, in ascending order.
pub fn eligible_pairs(
    gold: &KnowledgeGraph,
    min_hops: usize,
    max_hops: usize,
) -> Vec<(EntityId, EntityId)> {
    let mut pairs = Vec::new();
    for a in gold.vertices() {
        let dist = gold.distances(a);
        let mut reachable: Vec<(EntityId, usize)> = dist
            .into_iter()
            .filter(|&(b, d)| b > a && (min_hops..=max_hops).contains(&d))
            .collect();
        reachable.sort();
        pairs.extend(reachable.into_iter().map(|(b, _)| (a, b)));
    }
    pairs
}

/// Samples pairs uniformly (by shuffling the eligible set) and assigns each
/// to the split with the largest remaining deficit among those it does not
/// conflict with.
pub fn generate_problems(gold: &KnowledgeGraph, cfg: &DatasetConfig) -> Result<ProblemSplits> {
    if cfg.min_hops < 2 {
        return Err(Error::config(format!(
            "min_hops must be at least 2, got {}",
            cfg.min_hops
        )));
    }
    if cfg.max_hops < cfg.min_hops {
        return Err(Error::config("max_hops is smaller than min_hops"));
    }
    let requested = cfg.sizes.as_array();
    let mut pairs = eligible_pairs(gold, cfg.min_hops, cfg.max_hops);
    let eligible = pairs.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    pairs.shuffle(&mut rng);

    let mut owner: HashMap<EntityId, usize> = HashMap::new();
    let mut out: [Vec<SearchProblem>; 3] = Default::default();
    for (a, b) in pairs {
        let deficit = |s: usize| requested[s] - out[s].len();
        let fits = |s: usize| {
            [a, b]
                .iter()
                .all(|e| owner.get(e).map_or(true, |&o| o == s))
        };
        let Some(split) = (0..3)
            .filter(|&s| deficit(s) > 0 && fits(s))
            .max_by_key(|&s| (deficit(s), std::cmp::Reverse(s)))
        else {
            if (0..3).all(|s| deficit(s) == 0) {
                break;
            }
            continue;
        };
        owner.insert(a, split);
        owner.insert(b, split);
        let (source, destination) = if rng.gen_bool(0.5) { (a, b) } else { (b, a) };
        out[split].push(SearchProblem {
            source,
            destination,
        });
    }
    let achieved = [out[0].len(), out[1].len(), out[2].len()];
    if achieved != requested {
        return Err(Error::Shortfall {
            requested,
            achieved,
            eligible,
        });
    }
    let [train, dev, test] = out;
    Ok(ProblemSplits { train, dev, test })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub config: DatasetConfig,
    pub counts: SplitSizes,
    pub eligible_pairs: usize,
    pub files: Vec<String>,
}

/// Writes `train.jsonl`, `dev.jsonl`, `test.jsonl` and `manifest.json`.
pub fn write_splits(
    dir: &Path,
    index: &CorpusIndex,
    splits: &ProblemSplits,
    manifest: &DatasetManifest,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, split) in SPLIT_NAMES.iter().zip(splits.splits()) {
        let path = dir.join(format!("{name}.jsonl"));
        let records: Vec<ProblemRecord> = split
            .iter()
            .map(|p| ProblemRecord {
                source: index.entity_name(p.source).to_string(),
                destination: index.entity_name(p.destination).to_string(),
            })
            .collect();
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        write_problems(&records, BufWriter::new(file)).map_err(|e| Error::io(&path, e))?;
    }
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::artifact(&path, e.to_string()))?;
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
}
