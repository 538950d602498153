//! Running policies over problem sets, the Table-5 style metrics and the
//! paired bootstrap significance test.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{Environment, Outcome, ProblemRecord, SearchProblem};
use crate::error::{Error, Result};
use crate::graph::PathExport;
use crate::policy::{EpisodeRng, Policy};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub iteration: usize,
    pub action: String,
    pub new_docs: usize,
    pub reward: f64,
    pub vertices: usize,
    pub edges: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub source: String,
    pub destination: String,
    pub outcome: Outcome,
    pub steps: usize,
    pub documents: usize,
    pub total_reward: f64,
    pub path: Option<PathExport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceStep>>,
}

impl EpisodeRecord {
    pub fn success(&self) -> bool {
        self.outcome == Outcome::Success
    }
}

/// Randomness for problem `problem` under evaluation seed `seed`;
/// independent of scheduling order.
pub fn episode_rng(seed: u64, problem: usize) -> EpisodeRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(problem as u64 + 1);
    ChaCha8Rng::seed_from_u64(rng.gen())
}

pub fn run_episode(
    env: &Environment<'_>,
    problem: &SearchProblem,
    policy: &dyn Policy,
    rng: &mut EpisodeRng,
    trace: bool,
) -> Result<EpisodeRecord> {
    let mut state = env.reset(problem)?;
    let mut total_reward = 0.0;
    let mut steps_trace = trace.then(Vec::new);
    while !state.outcome.is_terminal() {
        let candidates = env.candidate_actions(&state)?;
        let action = policy.choose(env, &state, &candidates, rng)?;
        let result = env.step(&mut state, &action)?;
        total_reward += result.reward;
        if let Some(t) = steps_trace.as_mut() {
            t.push(TraceStep {
                iteration: state.iteration,
                action: action.describe(env.index()),
                new_docs: result.new_docs,
                reward: result.reward,
                vertices: state.kg.num_vertices(),
                edges: state.kg.num_edges(),
            });
        }
    }
    let path = if state.outcome == Outcome::Success {
        state
            .kg
            .shortest_path(problem.source, problem.destination)?
            .map(|p| p.export(env.index()))
    } else {
        None
    };
    let record = env.problem_record(problem);
    Ok(EpisodeRecord {
        source: record.source,
        destination: record.destination,
        outcome: state.outcome,
        steps: state.iteration,
        documents: state.seen_docs.len(),
        total_reward,
        path,
        trace: steps_trace,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    pub problems: usize,
    pub successes: usize,
    /// Percent.
    pub success_rate: f64,
    pub processed_documents: usize,
    /// `None` when there are no successes.
    pub documents_per_success: Option<f64>,
    pub avg_steps_overall: f64,
    pub avg_steps_successes: Option<f64>,
    pub avg_steps_failures: Option<f64>,
}

impl SeedMetrics {
    pub fn from_episodes(seed: u64, episodes: &[EpisodeRecord]) -> Result<Self> {
        if episodes.is_empty() {
            return Err(Error::contract("metrics need at least one episode"));
        }
        let mean = |xs: Vec<usize>| {
            (!xs.is_empty()).then(|| xs.iter().sum::<usize>() as f64 / xs.len() as f64)
        };
        let successes = episodes.iter().filter(|e| e.success()).count();
        let processed_documents = episodes.iter().map(|e| e.documents).sum();
        Ok(Self {
            seed,
            problems: episodes.len(),
            successes,
            success_rate: 100.0 * successes as f64 / episodes.len() as f64,
            processed_documents,
            documents_per_success: (successes > 0)
                .then(|| processed_documents as f64 / successes as f64),
            avg_steps_overall: mean(episodes.iter().map(|e| e.steps).collect()).expect("non-empty"),
            avg_steps_successes: mean(
                episodes
                    .iter()
                    .filter(|e| e.success())
                    .map(|e| e.steps)
                    .collect(),
            ),
            avg_steps_failures: mean(
                episodes
                    .iter()
                    .filter(|e| !e.success())
                    .map(|e| e.steps)
                    .collect(),
            ),
        })
    }
}

/// Mean and sample standard deviation over the seeds where the metric is
/// defined.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub defined_seeds: usize,
}

impl MeanStd {
    pub fn of(values: impl IntoIterator<Item = Option<f64>>) -> Self {
        let xs: Vec<f64> = values.into_iter().flatten().collect();
        if xs.is_empty() {
            return Self {
                mean: None,
                std: None,
                defined_seeds: 0,
            };
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self {
            mean: Some(mean),
            std: Some(std),
            defined_seeds: xs.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub success_rate: MeanStd,
    pub processed_documents: MeanStd,
    pub documents_per_success: MeanStd,
    pub avg_steps_overall: MeanStd,
    pub avg_steps_successes: MeanStd,
    pub avg_steps_failures: MeanStd,
}

impl AggregateMetrics {
    pub fn of(seeds: &[SeedMetrics]) -> Self {
        Self {
            success_rate: MeanStd::of(seeds.iter().map(|s| Some(s.success_rate))),
            processed_documents: MeanStd::of(
                seeds.iter().map(|s| Some(s.processed_documents as f64)),
            ),
            documents_per_success: MeanStd::of(seeds.iter().map(|s| s.documents_per_success)),
            avg_steps_overall: MeanStd::of(seeds.iter().map(|s| Some(s.avg_steps_overall))),
            avg_steps_successes: MeanStd::of(seeds.iter().map(|s| s.avg_steps_successes)),
            avg_steps_failures: MeanStd::of(seeds.iter().map(|s| s.avg_steps_failures)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub metrics: SeedMetrics,
    pub episodes: Vec<EpisodeRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub policy: String,
    pub seeds: Vec<u64>,
    pub problems: Vec<ProblemRecord>,
    pub aggregate: AggregateMetrics,
    pub runs: Vec<SeedRun>,
}

impl EvaluationReport {
    /// Episodes in (seed, problem) order.
    pub fn episodes(&self) -> impl Iterator<Item = &EpisodeRecord> {
        self.runs.iter().flat_map(|r| r.episodes.iter())
    }
}

/// Runs `policy` on every problem once per seed. Problems may run in
/// parallel on the current rayon pool; results do not depend on it.
pub fn evaluate(
    env: &Environment<'_>,
    policy: &dyn Policy,
    problems: &[SearchProblem],
    seeds: &[u64],
    trace: bool,
) -> Result<EvaluationReport> {
    if seeds.is_empty() {
        return Err(Error::config("evaluation needs at least one seed"));
    }
    if problems.is_empty() {
        return Err(Error::config("evaluation needs at least one problem"));
    }
    let mut runs = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let episodes = problems
            .par_iter()
            .enumerate()
            .map(|(i, p)| run_episode(env, p, policy, &mut episode_rng(seed, i), trace))
            .collect::<Result<Vec<_>>>()?;
        let metrics = SeedMetrics::from_episodes(seed, &episodes)?;
        log::info!(
            "{} seed {seed}: success {:.2}%, {} documents",
            policy.name(),
            metrics.success_rate,
            metrics.processed_documents
        );
        runs.push(SeedRun { metrics, episodes });
    }
    let per_seed: Vec<SeedMetrics> = runs.iter().map(|r| r.metrics.clone()).collect();
    Ok(EvaluationReport {
        policy: policy.name(),
        seeds: seeds.to_vec(),
        problems: problems.iter().map(|p| env.problem_record(p)).collect(),
        aggregate: AggregateMetrics::of(&per_seed),
        runs,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bootstrap {
    pub resamples: usize,
    pub seed: u64,
}

impl Default for Bootstrap {
    fn default() -> Self {
        Self {
            resamples: 10_000,
            seed: 0,
        }
    }
}

impl Bootstrap {
    /// Paired bootstrap over indices `0..n`. `advantage` maps a resample to
    /// the candidate's advantage (positive = candidate better); the p-value
    /// is the share of resamples with a negative advantage, ties counting
    /// one half.
    pub fn p_value(&self, n: usize, advantage: impl Fn(&[usize]) -> f64) -> Result<f64> {
        if n == 0 || self.resamples == 0 {
            return Err(Error::contract("bootstrap needs samples and resamples"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut idx = vec![0usize; n];
        let mut unfavorable = 0.0;
        for _ in 0..self.resamples {
            idx.iter_mut().for_each(|i| *i = rng.gen_range(0..n));
            let d = advantage(&idx);
            if d < 0.0 {
                unfavorable += 1.0;
            } else if d == 0.0 || d.is_nan() {
                unfavorable += 0.5;
            }
        }
        Ok(unfavorable / self.resamples as f64)
    }

    /// Tests whether the mean of `candidate` exceeds the mean of `baseline`.
    pub fn mean_test(&self, baseline: &[f64], candidate: &[f64]) -> Result<f64> {
        if baseline.len() != candidate.len() {
            return Err(Error::contract(format!(
                "paired samples differ in length: {} vs {}",
                baseline.len(),
                candidate.len()
            )));
        }
        let diff: Vec<f64> = candidate.iter().zip(baseline).map(|(c, b)| c - b).collect();
        self.p_value(diff.len(), |idx| idx.iter().map(|&i| diff[i]).sum::<f64>())
    }
}

/// Paired bootstrap p-value that `samples_b` has a larger mean than
/// `samples_a`.
pub fn bootstrap_test(
    samples_a: &[f64],
    samples_b: &[f64],
    resamples: usize,
    seed: u64,
) -> Result<f64> {
    Bootstrap { resamples, seed }.mean_test(samples_a, samples_b)
}

/// p-values of the candidate improving on the reference, per metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub reference: String,
    pub success_rate: f64,
    pub processed_documents: f64,
    pub documents_per_success: f64,
    pub avg_steps_overall: f64,
}

pub fn compare(
    reference: &EvaluationReport,
    candidate: &EvaluationReport,
    bootstrap: Bootstrap,
) -> Result<Comparison> {
    if reference.seeds != candidate.seeds || reference.problems != candidate.problems {
        return Err(Error::contract(
            "reports must cover the same seeds and problems",
        ));
    }
    let r: Vec<&EpisodeRecord> = reference.episodes().collect();
    let c: Vec<&EpisodeRecord> = candidate.episodes().collect();
    let success = |e: &[&EpisodeRecord]| -> Vec<f64> {
        e.iter().map(|x| f64::from(u8::from(x.success()))).collect()
    };
    let docs =
        |e: &[&EpisodeRecord]| -> Vec<f64> { e.iter().map(|x| x.documents as f64).collect() };
    let steps = |e: &[&EpisodeRecord]| -> Vec<f64> { e.iter().map(|x| x.steps as f64).collect() };
    let neg = |v: Vec<f64>| -> Vec<f64> { v.into_iter().map(|x| -x).collect() };

    let (rs, cs, rd, cd) = (success(&r), success(&c), docs(&r), docs(&c));
    let ratio = |d: &[f64], s: &[f64], idx: &[usize]| {
        let succ: f64 = idx.iter().map(|&i| s[i]).sum();
        let total: f64 = idx.iter().map(|&i| d[i]).sum();
        if succ > 0.0 {
            total / succ
        } else {
            f64::INFINITY
        }
    };
    let documents_per_success = bootstrap.p_value(r.len(), |idx| {
        let (a, b) = (ratio(&rd, &rs, idx), ratio(&cd, &cs, idx));
        if a == b {
            0.0
        } else {
            a - b
        }
    })?;
    Ok(Comparison {
        reference: reference.policy.clone(),
        success_rate: bootstrap.mean_test(&rs, &cs)?,
        processed_documents: bootstrap.mean_test(&neg(rd.clone()), &neg(cd.clone()))?,
        documents_per_success,
        avg_steps_overall: bootstrap.mean_test(&neg(steps(&r)), &neg(steps(&c)))?,
    })
}

pub const SIGNIFICANCE: f64 = 0.05;

fn cell(m: &MeanStd, p: Option<f64>) -> String {
    match (m.mean, m.std) {
        (Some(mean), Some(std)) => {
            let star = if p.is_some_and(|p| p <= SIGNIFICANCE) {
                "*"
            } else {
                ""
            };
            format!("{mean:.2} ({std:.2}){star}")
        }
        _ => "n/a".into(),
    }
}

/// Markdown table in the column order Success Rate, Processed Documents,
/// Documents per Success, Average Steps Overall / Successes / Failures.
/// Cells are starred where the row's comparison has `p <= 0.05`.
pub fn render_markdown(rows: &[(&EvaluationReport, Option<&Comparison>)]) -> String {
    let mut out = String::from(
        "| Policy | Success Rate | Processed Documents | Documents per Success | Avg. Steps Overall | Avg. Steps Successes | Avg. Steps Failures |\n\
         |---|---|---|---|---|---|---|\n",
    );
    for (report, cmp) in rows {
        let a = &report.aggregate;
        let cols = [
            cell(&a.success_rate, cmp.map(|c| c.success_rate)),
            cell(&a.processed_documents, cmp.map(|c| c.processed_documents)),
            cell(
                &a.documents_per_success,
                cmp.map(|c| c.documents_per_success),
            ),
            cell(&a.avg_steps_overall, cmp.map(|c| c.avg_steps_overall)),
            cell(&a.avg_steps_successes, None),
            cell(&a.avg_steps_failures, None),
        ];
        out.push_str(&format!("| {} | {} |\n", report.policy, cols.join(" | ")));
    }
    if let Some(reference) = rows
        .iter()
        .find_map(|(_, c)| c.map(|c| c.reference.clone()))
    {
        out.push_str(&format!(
            "\n`*` bootstrap p <= {SIGNIFICANCE} against {reference}\n"
        ));
    }
    out
}
