//! `fr`: command-line front end for focused reading experiments.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use focused_reading::agent::model::{A2cModel, A2cPolicy, ActMode};
use focused_reading::agent::train::{train_with_progress, write_curve, EmbeddingMode, TrainConfig};
use focused_reading::corpus::CorpusIndex;
use focused_reading::dataset::{
    generate_problems, write_splits, DatasetConfig, DatasetManifest, SplitSizes,
};
use focused_reading::embeddings::EmbeddingStore;
use focused_reading::env::{
    read_problems, EnvConfig, Environment, FeatureGroup, RewardConfig, SearchProblem,
};
use focused_reading::evaluation::{
    compare, evaluate, render_markdown, Bootstrap, Comparison, EvaluationReport,
};
use focused_reading::extraction::build_gold_kg;
use focused_reading::policy::{CascadePolicy, ConditionalPolicy, Policy, RandomPolicy};
use focused_reading::synth::{SynthConfig, SynthWorld};
use focused_reading::topics::{topic_purity, train_lda, LdaConfig, LdaModel};
use focused_reading::Error;

const POLICIES: &str = "random, conditional, cascade, a2c:<model-path>";

#[derive(Parser)]
#[command(
    name = "fr",
    version,
    about = "Focused reading: learned retrieve-and-read search over a corpus"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic annotated corpus with word vectors
    Synth(SynthArgs),
    /// Index an annotated corpus and print its statistics
    Ingest(IngestArgs),
    /// Train an LDA topic model over the corpus
    Topics(TopicsArgs),
    /// Mine multi-hop search problems into endpoint-disjoint splits
    Dataset(DatasetArgs),
    /// Train an actor-critic policy
    Train(TrainArgs),
    /// Run a policy over a problem set
    Evaluate(EvaluateArgs),
    /// Bootstrap-compare evaluation reports against a reference
    Compare(CompareArgs),
}

#[derive(Args, Serialize)]
struct OutArg {
    /// Output directory [default: $FR_DATA_DIR/<command> or ./fr-data/<command>]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SynthArgs {
    #[arg(long, default_value_t = 500)]
    docs: usize,
    #[arg(long, default_value_t = 150)]
    entities: usize,
    #[arg(long, default_value_t = 10)]
    themes: usize,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long, default_value_t = 30)]
    chains: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Serialize)]
struct IngestArgs {
    /// JSON-lines corpus
    #[arg(long)]
    corpus: PathBuf,
    /// Stem index terms
    #[arg(long)]
    stem: bool,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Serialize)]
struct IndexArg {
    /// Index cache written by `ingest`, or a JSON-lines corpus
    #[arg(long)]
    index: PathBuf,
    /// Stem terms when `--index` is a raw corpus
    #[arg(long)]
    stem: bool,
}

#[derive(Args, Serialize)]
struct TopicsArgs {
    #[command(flatten)]
    index: IndexArg,
    #[arg(long, short = 'k', default_value_t = 50)]
    topics: usize,
    #[arg(long, default_value_t = 500)]
    iterations: usize,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    beta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON-lines `{id, label}` records; reports topic purity
    #[arg(long)]
    labels: Option<PathBuf>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Serialize)]
struct DatasetArgs {
    #[command(flatten)]
    index: IndexArg,
    #[arg(long, default_value_t = 230)]
    train: usize,
    #[arg(long, default_value_t = 500)]
    dev: usize,
    #[arg(long, default_value_t = 670)]
    test: usize,
    #[arg(long, default_value_t = 2)]
    min_hops: usize,
    #[arg(long, default_value_t = 4)]
    max_hops: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Serialize)]
struct EnvArgs {
    #[command(flatten)]
    index: IndexArg,
    /// LDA model written by `topics`
    #[arg(long)]
    topics: PathBuf,
    /// Word vectors, one `token v1 ... vd` per line
    #[arg(long)]
    embeddings: PathBuf,
    /// Beam width per query template
    #[arg(long, short = 'n', default_value_t = 15)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    max_steps: usize,
    #[arg(long, default_value_t = 1000.0)]
    success_reward: f64,
    #[arg(long, default_value_t = 10.0)]
    doc_cost: f64,
    #[arg(long, default_value_t = 100.0)]
    empty_cost: f64,
    #[arg(long, default_value_t = 100.0)]
    early_stop_cost: f64,
    /// Episode parallelism [default: available parallelism]
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
enum EmbeddingArg {
    #[value(name = "0.2")]
    Dropout02,
    #[value(name = "0.5")]
    Dropout05,
    None,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
enum GroupArg {
    Search,
    Embeddings,
    Query,
    Topic,
}

#[derive(Args, Serialize)]
struct TrainArgs {
    #[command(flatten)]
    env: EnvArgs,
    /// Training problems (JSON lines)
    #[arg(long)]
    problems: PathBuf,
    #[arg(long, default_value_t = 2000)]
    iterations: usize,
    #[arg(long, default_value_t = 100)]
    minibatch: usize,
    #[arg(long, default_value_t = 10)]
    parallel_envs: usize,
    #[arg(long, value_delimiter = ',', default_value = "2100,1000,250,100")]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 0.99)]
    gamma: f64,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 0.5)]
    value_weight: f64,
    #[arg(long, default_value_t = 0.01)]
    entropy_weight: f64,
    #[arg(long, default_value_t = 0.2)]
    dropout: f64,
    /// Endpoint-embedding treatment
    #[arg(long, value_enum, default_value = "0.2")]
    embedding_dropout: EmbeddingArg,
    /// Feature groups to zero
    #[arg(long, value_enum, value_delimiter = ',')]
    disable: Vec<GroupArg>,
    #[arg(long, default_value_t = 1.0)]
    reward_scale: f64,
    #[arg(long)]
    max_grad_norm: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
enum ModeArg {
    Greedy,
    Sample,
}

#[derive(Args, Serialize)]
struct EvaluateArgs {
    #[command(flatten)]
    env: EnvArgs,
    /// Problems to evaluate on (JSON lines)
    #[arg(long)]
    problems: PathBuf,
    /// One of: random, conditional, cascade, a2c:<model-path>
    #[arg(long)]
    policy: String,
    /// How an a2c policy picks actions
    #[arg(long, value_enum, default_value = "greedy")]
    mode: ModeArg,
    /// Number of evaluation seeds
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    /// First evaluation seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Reference report; stars cells where p <= 0.05
    #[arg(long)]
    compare: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    resamples: usize,
    /// Record per-step traces in the report
    #[arg(long)]
    trace: bool,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Serialize)]
struct CompareArgs {
    /// Reference report
    #[arg(long)]
    reference: PathBuf,
    /// Candidate reports
    #[arg(required = true)]
    candidates: Vec<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    resamples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutArg,
}

type CmdResult = Result<(), Error>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Ingest(a) => cmd_ingest(a),
        Command::Topics(a) => cmd_topics(a),
        Command::Dataset(a) => cmd_dataset(a),
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Compare(a) => cmd_compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) => 2,
                e if e.is_data_error() => 3,
                _ => 1,
            })
        }
    }
}

fn out_dir(out: &OutArg, command: &str) -> Result<PathBuf, Error> {
    let dir = match &out.out {
        Some(d) => d.clone(),
        None => std::env::var_os("FR_DATA_DIR")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("fr-data"))
            .join(command),
    };
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    Ok(dir)
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CmdResult {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Artifact {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_err(path, e))
}

/// Records the command, its resolved settings and its outputs. Holds no
/// timestamps so identical runs give identical manifests.
fn write_manifest<A: Serialize>(
    dir: &Path,
    command: &str,
    args: &A,
    resolved: Value,
    outputs: &[&str],
) -> CmdResult {
    let manifest = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "args": args,
        "resolved": resolved,
        "outputs": outputs,
    });
    write_json(&dir.join("manifest.json"), &manifest)
}

fn cmd_synth(a: &SynthArgs) -> CmdResult {
    let cfg = SynthConfig {
        num_docs: a.docs,
        num_entities: a.entities,
        num_themes: a.themes,
        embedding_dim: a.dim,
        planted_chains: a.chains,
        seed: a.seed,
        ..SynthConfig::default()
    };
    let world = SynthWorld::generate(&cfg)?;
    let dir = out_dir(&a.out, "synth")?;
    let files = ["corpus.jsonl", "embeddings.txt", "labels.jsonl"];
    let write =
        |name: &str, f: &dyn Fn(&mut BufWriter<File>) -> std::io::Result<()>| -> CmdResult {
            let path = dir.join(name);
            let mut w = create(&path)?;
            f(&mut w)
                .and_then(|_| w.flush())
                .map_err(|e| io_err(&path, e))
        };
    write(files[0], &|w| world.write_corpus(w))?;
    write(files[1], &|w| world.write_embeddings(w))?;
    write(files[2], &|w| world.write_labels(w))?;
    write_manifest(&dir, "synth", a, json!({ "synth": cfg }), &files)?;
    println!(
        "wrote {} documents, {} planted chains to {}",
        world.records.len(),
        world.chains.len(),
        dir.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct CorpusStats {
    documents: usize,
    entities: usize,
    vocabulary: usize,
    gold_vertices: usize,
    gold_edges: usize,
    stemmed: bool,
}

fn cmd_ingest(a: &IngestArgs) -> CmdResult {
    let index = CorpusIndex::ingest(&a.corpus, a.stem)?;
    let gold = build_gold_kg(&index);
    let stats = CorpusStats {
        documents: index.corpus_size(),
        entities: index.num_entities(),
        vocabulary: index.vocabulary_size(),
        gold_vertices: gold.num_vertices(),
        gold_edges: gold.num_edges(),
        stemmed: a.stem,
    };
    let dir = out_dir(&a.out, "ingest")?;
    index.save_cache(dir.join("index.bin"))?;
    write_json(&dir.join("stats.json"), &stats)?;
    write_manifest(&dir, "ingest", a, json!({}), &["index.bin", "stats.json"])?;
    println!("documents:  {}", stats.documents);
    println!("entities:   {}", stats.entities);
    println!("vocabulary: {}", stats.vocabulary);
    println!(
        "gold graph: {} vertices, {} edges",
        stats.gold_vertices, stats.gold_edges
    );
    Ok(())
}

fn open_index(a: &IndexArg) -> Result<CorpusIndex, Error> {
    CorpusIndex::open(&a.index, a.stem)
}

fn cmd_topics(a: &TopicsArgs) -> CmdResult {
    let index = open_index(&a.index)?;
    let cfg = LdaConfig {
        num_topics: a.topics,
        iterations: a.iterations,
        seed: a.seed,
        alpha: a.alpha,
        beta: a.beta,
    };
    let model = train_lda(&index, &cfg)?;
    let purity = match &a.labels {
        Some(path) => {
            let labels = read_labels(path, &index)?;
            let p = topic_purity(&model, &labels)?;
            println!("topic purity: {p:.4}");
            Some(p)
        }
        None => None,
    };
    let dir = out_dir(&a.out, "topics")?;
    model.save(dir.join("lda.json"))?;
    write_manifest(
        &dir,
        "topics",
        a,
        json!({ "lda": cfg, "alpha": model.alpha, "purity": purity }),
        &["lda.json"],
    )?;
    println!(
        "trained {} topics over {} documents",
        model.num_topics,
        model.doc_ids.len()
    );
    Ok(())
}

fn read_labels(
    path: &Path,
    index: &CorpusIndex,
) -> Result<Vec<(focused_reading::corpus::DocId, String)>, Error> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
    {
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let rec: focused_reading::synth::LabelRecord =
            serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        let doc = index
            .doc_id(&rec.id)
            .ok_or_else(|| parse_err(format!("unknown document `{}`", rec.id)))?;
        out.push((doc, rec.label));
    }
    Ok(out)
}

fn cmd_dataset(a: &DatasetArgs) -> CmdResult {
    let index = open_index(&a.index)?;
    let gold = build_gold_kg(&index);
    let cfg = DatasetConfig {
        sizes: SplitSizes {
            train: a.train,
            dev: a.dev,
            test: a.test,
        },
        min_hops: a.min_hops,
        max_hops: a.max_hops,
        seed: a.seed,
    };
    let splits = generate_problems(&gold, &cfg)?;
    let eligible =
        focused_reading::dataset::eligible_pairs(&gold, cfg.min_hops, cfg.max_hops).len();
    let dir = out_dir(&a.out, "dataset")?;
    let manifest = DatasetManifest {
        config: cfg.clone(),
        counts: cfg.sizes,
        eligible_pairs: eligible,
        files: ["train.jsonl", "dev.jsonl", "test.jsonl"]
            .map(String::from)
            .to_vec(),
    };
    write_splits(&dir, &index, &splits, &manifest)?;
    println!(
        "wrote {} train, {} dev, {} test problems ({} eligible pairs)",
        a.train, a.dev, a.test, eligible
    );
    Ok(())
}

struct Loaded {
    index: CorpusIndex,
    lda: LdaModel,
    store: EmbeddingStore,
    cfg: EnvConfig,
}

impl Loaded {
    fn new(a: &EnvArgs) -> Result<Self, Error> {
        Ok(Self {
            index: open_index(&a.index)?,
            lda: LdaModel::load(&a.topics)?,
            store: EmbeddingStore::load(&a.embeddings)?,
            cfg: EnvConfig {
                n_per_template: a.n,
                max_steps: a.max_steps,
                reward: RewardConfig {
                    success_reward: a.success_reward,
                    doc_cost: a.doc_cost,
                    empty_cost: a.empty_cost,
                    early_stop_cost: a.early_stop_cost,
                },
                ..EnvConfig::default()
            },
        })
    }

    fn env(&self) -> Result<Environment<'_>, Error> {
        Environment::new(&self.index, &self.lda, &self.store, self.cfg.clone())
    }
}

fn load_problems(env: &Environment<'_>, path: &Path) -> Result<Vec<SearchProblem>, Error> {
    let problems = read_problems(path)?
        .iter()
        .map(|r| env.problem(r))
        .collect::<Result<Vec<_>, _>>()?;
    if problems.is_empty() {
        return Err(Error::InvalidProblem(format!(
            "{} holds no problems",
            path.display()
        )));
    }
    Ok(problems)
}

fn thread_pool(workers: Option<usize>) -> Result<rayon::ThreadPool, Error> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return Err(Error::Config("--workers must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| Error::Config(e.to_string()))
}

fn cmd_train(a: &TrainArgs) -> CmdResult {
    let loaded = Loaded::new(&a.env)?;
    let env = loaded.env()?;
    let problems = load_problems(&env, &a.problems)?;
    let cfg = TrainConfig {
        iterations: a.iterations,
        minibatch: a.minibatch,
        parallel_envs: a.parallel_envs,
        gamma: a.gamma,
        adam: focused_reading::agent::adam::AdamConfig {
            learning_rate: a.lr,
            ..Default::default()
        },
        value_loss_weight: a.value_weight,
        entropy_weight: a.entropy_weight,
        hidden: a.hidden.clone(),
        hidden_dropout: a.dropout,
        embeddings: match a.embedding_dropout {
            EmbeddingArg::Dropout02 => EmbeddingMode::Dropout(0.2),
            EmbeddingArg::Dropout05 => EmbeddingMode::Dropout(0.5),
            EmbeddingArg::None => EmbeddingMode::Disabled,
        },
        disabled_groups: a
            .disable
            .iter()
            .map(|g| match g {
                GroupArg::Search => FeatureGroup::Search,
                GroupArg::Embeddings => FeatureGroup::Endpoints,
                GroupArg::Query => FeatureGroup::Query,
                GroupArg::Topic => FeatureGroup::Topic,
            })
            .collect(),
        reward_scale: a.reward_scale,
        max_grad_norm: a.max_grad_norm,
        seed: a.seed,
    };
    let report_every = (cfg.iterations / 20).max(1);
    let outcome = thread_pool(a.env.workers)?.install(|| {
        train_with_progress(&env, &problems, &cfg, |p| {
            if p.iteration % report_every == 0 {
                log::info!(
                    "iteration {}: mean return {:?}, policy loss {:.4}, value loss {:.4}",
                    p.iteration,
                    p.mean_return,
                    p.policy_loss,
                    p.value_loss
                );
            }
        })
    })?;
    let dir = out_dir(&a.out, "train")?;
    outcome.model.save(dir.join("model.bin"))?;
    let curve_path = dir.join("curve.csv");
    let mut w = create(&curve_path)?;
    write_curve(&outcome.curve, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| io_err(&curve_path, e))?;
    write_manifest(
        &dir,
        "train",
        a,
        json!({ "env": loaded.cfg, "train": cfg, "parameters": outcome.model.net.num_params() }),
        &["model.bin", "curve.csv"],
    )?;
    let tail: Vec<f64> = outcome
        .curve
        .iter()
        .rev()
        .take(100)
        .filter_map(|p| p.mean_return)
        .collect();
    println!(
        "trained {} parameters for {} iterations; mean return over the last 100: {:.2}",
        outcome.model.net.num_params(),
        cfg.iterations,
        tail.iter().sum::<f64>() / tail.len().max(1) as f64
    );
    Ok(())
}

fn check_policy_name(spec: &str) -> CmdResult {
    match spec {
        "random" | "conditional" | "cascade" => Ok(()),
        s if s.strip_prefix("a2c:").is_some_and(|p| !p.is_empty()) => Ok(()),
        other => Err(Error::Config(format!(
            "unknown policy `{other}`; valid policies: {POLICIES}"
        ))),
    }
}

fn build_policy(
    spec: &str,
    mode: ModeArg,
    env: &Environment<'_>,
) -> Result<Box<dyn Policy>, Error> {
    check_policy_name(spec)?;
    Ok(match spec {
        "random" => Box::new(RandomPolicy),
        "conditional" => Box::new(ConditionalPolicy),
        "cascade" => Box::new(CascadePolicy::default()),
        s => {
            let model = A2cModel::load(&s[4..])?;
            model.check_compatible(env)?;
            Box::new(A2cPolicy {
                model,
                mode: match mode {
                    ModeArg::Greedy => ActMode::Greedy,
                    ModeArg::Sample => ActMode::Sample,
                },
            })
        }
    })
}

fn read_report(path: &Path) -> Result<EvaluationReport, Error> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Artifact {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn cmd_evaluate(a: &EvaluateArgs) -> CmdResult {
    check_policy_name(&a.policy)?;
    if a.seeds == 0 {
        return Err(Error::Config("--seeds must be at least 1".into()));
    }
    let loaded = Loaded::new(&a.env)?;
    let env = loaded.env()?;
    let policy = build_policy(&a.policy, a.mode, &env)?;
    let problems = load_problems(&env, &a.problems)?;
    let reference = a.compare.as_deref().map(read_report).transpose()?;
    let seeds: Vec<u64> = (a.seed..a.seed + a.seeds).collect();
    let report = thread_pool(a.env.workers)?
        .install(|| evaluate(&env, policy.as_ref(), &problems, &seeds, a.trace))?;
    let comparison = reference
        .as_ref()
        .map(|r| {
            compare(
                r,
                &report,
                Bootstrap {
                    resamples: a.resamples,
                    seed: a.seed,
                },
            )
        })
        .transpose()?;

    let dir = out_dir(&a.out, "evaluate")?;
    write_json(&dir.join("report.json"), &report)?;
    let mut rows: Vec<(&EvaluationReport, Option<&Comparison>)> = Vec::new();
    if let Some(r) = &reference {
        rows.push((r, None));
    }
    rows.push((&report, comparison.as_ref()));
    let table = render_markdown(&rows);
    fs::write(dir.join("report.md"), &table).map_err(|e| io_err(&dir.join("report.md"), e))?;
    let mut outputs = vec!["report.json", "report.md"];
    if let Some(c) = &comparison {
        write_json(&dir.join("comparison.json"), c)?;
        outputs.push("comparison.json");
    }
    write_manifest(
        &dir,
        "evaluate",
        a,
        json!({ "env": loaded.cfg, "seeds": seeds }),
        &outputs,
    )?;
    print!("{table}");
    Ok(())
}

fn cmd_compare(a: &CompareArgs) -> CmdResult {
    let reference = read_report(&a.reference)?;
    let candidates = a
        .candidates
        .iter()
        .map(|p| read_report(p))
        .collect::<Result<Vec<_>, _>>()?;
    let bootstrap = Bootstrap {
        resamples: a.resamples,
        seed: a.seed,
    };
    let comparisons = candidates
        .iter()
        .map(|c| compare(&reference, c, bootstrap))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = vec![(&reference, None)];
    rows.extend(
        candidates
            .iter()
            .zip(&comparisons)
            .map(|(r, c)| (r, Some(c))),
    );
    let table = render_markdown(&rows);
    let dir = out_dir(&a.out, "compare")?;
    write_json(&dir.join("comparisons.json"), &comparisons)?;
    fs::write(dir.join("table.md"), &table).map_err(|e| io_err(&dir.join("table.md"), e))?;
    write_manifest(
        &dir,
        "compare",
        a,
        json!({ "bootstrap": bootstrap }),
        &["comparisons.json", "table.md"],
    )?;
    print!("{table}");
    Ok(())
}
