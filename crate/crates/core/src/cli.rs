//! Command-line front end.
//!
//! Every command works inside one output directory (`--out`, default
//! `run/`). The first command that needs data loads `--data`, splits it and
//! stores the split there; later commands reuse it. Settings come from
//! built-in defaults, then an optional flat TOML file (`--config`), then
//! flags.

use std::collections::HashSet;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aggregation::AggMode;
use crate::artifacts;
use crate::dataset::{self, Dataset, Interaction, LoadOptions, Separator, Split, SplitSpec};
use crate::error::{Error, Result};
use crate::eval::MetricBundle;
use crate::models::{self, ModelKind};
use crate::partition::{self, PairMetric, PretrainedEmbeddings, ShardAssignment, Strategy};
use crate::unlearn::{
    self, full_retrain, mean_max, PipelineConfig, PipelineState, SeedPolicy, UnlearnOptions, UnlearnReport,
    UnlearnRequest, ValidationScope,
};

/// Exit code for command-line usage errors.
pub const USAGE_EXIT: u8 = 64;

#[derive(Debug, Parser)]
#[command(name = "rec-unlearn", version, about = "Exact unlearning for sharded recommenders")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Default, Args)]
pub struct GlobalArgs {
    /// Flat TOML file with settings; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Interaction log (`user item [rating [timestamp]]` per line).
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of shards K.
    #[arg(long, global = true)]
    pub shards: Option<usize>,
    /// Partition strategy: ubp, ibp, inbp or random.
    #[arg(long, global = true)]
    pub strategy: Option<Strategy>,
    /// Aggregation mode: attention, mean or static.
    #[arg(long, global = true)]
    pub agg: Option<AggMode>,
    /// Base model: bpr, wmf or lightgcn.
    #[arg(long, global = true)]
    pub model: Option<ModelKind>,
    #[arg(long, global = true)]
    pub max_epochs: Option<usize>,
    /// Worker threads; defaults to min(K, available cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(short, long, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train WMF embeddings for the embedding-based partitioners.
    Pretrain,
    /// Split training interactions into shards.
    Partition,
    /// Train one submodel per shard, then the aggregator.
    Train,
    /// Score the trained model on the test split.
    Evaluate,
    /// Delete interactions and retrain the affected shards.
    Unlearn(UnlearnArgs),
    /// Sweep strategies, aggregation modes and shard counts.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct UnlearnArgs {
    /// File of `user item` pairs (original ids), one per line.
    #[arg(long, conflicts_with = "sample", required_unless_present = "sample")]
    pub targets: Option<PathBuf>,
    /// Delete this many training interactions drawn at random.
    #[arg(long)]
    pub sample: Option<usize>,
    #[arg(long)]
    pub coalesce_same_shard: bool,
    /// Rebuild partition embeddings and the assignment on every request.
    #[arg(long)]
    pub repartition: bool,
    /// reuse-original or fresh.
    #[arg(long, default_value = "reuse-original", value_parser = parse_seed_policy)]
    pub seed_policy: SeedPolicy,
    /// Also time a full retrain for each request.
    #[arg(long)]
    pub baseline: bool,
    #[arg(long)]
    pub evaluate_after: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "5,10,20")]
    pub shard_grid: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "ubp,ibp,inbp,random")]
    pub strategies: Vec<Strategy>,
    #[arg(long, value_delimiter = ',', default_value = "attention,mean,static")]
    pub modes: Vec<AggMode>,
    /// Deletions timed per setting.
    #[arg(long, default_value_t = 5)]
    pub requests: usize,
    #[arg(long)]
    pub skip_full_retrain: bool,
}

fn parse_seed_policy(s: &str) -> std::result::Result<SeedPolicy, String> {
    match s {
        "reuse-original" | "reuse_original" | "reuse" => Ok(SeedPolicy::ReuseOriginal),
        "fresh" => Ok(SeedPolicy::Fresh),
        other => Err(format!("unknown seed policy `{other}`")),
    }
}

/// Keys accepted in the `--config` file.
#[derive(Debug, Default, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub data: Option<PathBuf>,
    pub separator: Option<Separator>,
    pub rating_threshold: Option<f64>,
    pub has_header: Option<bool>,
    pub train_fraction: Option<f64>,
    pub validation_fraction: Option<f64>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub cutoffs: Option<Vec<usize>>,

    pub model: Option<ModelKind>,
    pub dim: Option<usize>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub max_epochs: Option<usize>,
    pub early_stop_patience: Option<usize>,
    pub l2_reg: Option<f64>,
    pub negative_weight: Option<f64>,
    pub num_layers: Option<usize>,
    pub init_std: Option<f64>,
    pub pretrain_epochs: Option<usize>,
    pub validation_scope: Option<ValidationScope>,

    pub strategy: Option<Strategy>,
    pub shards: Option<usize>,
    pub capacity: Option<usize>,
    pub max_iterations: Option<usize>,
    pub tolerance: Option<f64>,
    pub pair_metric: Option<PairMetric>,

    pub agg: Option<AggMode>,
    pub attention_dim: Option<usize>,
    pub agg_learning_rate: Option<f64>,
    pub agg_batch_users: Option<usize>,
    pub agg_max_epochs: Option<usize>,
    pub agg_patience: Option<usize>,
    pub agg_l2_reg: Option<f64>,
    pub freeze_transfer: Option<bool>,
}

impl FileConfig {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format {
            what: "config",
            message: format!("{source}: {}", e.message()),
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub data: Option<PathBuf>,
    #[serde(skip)]
    pub load: LoadOptions,
    #[serde(skip)]
    pub split: SplitSpec,
    pub out: PathBuf,
    pub jobs: usize,
    pub pipeline: PipelineConfig,
}

impl Settings {
    /// Defaults, overlaid by `file`, overlaid by `flags`.
    pub fn resolve(file: &FileConfig, flags: &GlobalArgs) -> Result<Self> {
        let seed = flags.seed.or(file.seed).unwrap_or(PipelineConfig::default().model.seed);
        let mut p = PipelineConfig::default().with_seed(seed);
        let mut split = SplitSpec {
            seed,
            ..SplitSpec::default()
        };
        let mut load = LoadOptions::default();

        macro_rules! set {
            ($($dst:expr => $src:expr),* $(,)?) => {
                $(if let Some(v) = $src.clone() { $dst = v; })*
            };
        }
        set! {
            load.separator => file.separator,
            load.has_header => file.has_header,
            split.train_fraction => file.train_fraction,
            split.validation_fraction_of_train => file.validation_fraction,
            p.cutoffs => file.cutoffs,
            p.model.model => file.model,
            p.model.dim => file.dim,
            p.model.learning_rate => file.learning_rate,
            p.model.batch_size => file.batch_size,
            p.model.max_epochs => file.max_epochs,
            p.model.early_stop_patience => file.early_stop_patience,
            p.model.l2_reg => file.l2_reg,
            p.model.negative_weight => file.negative_weight,
            p.model.num_layers => file.num_layers,
            p.model.init_std => file.init_std,
            p.pretrain_epochs => file.pretrain_epochs,
            p.validation_scope => file.validation_scope,
            p.strategy => file.strategy,
            p.partition.num_shards => file.shards,
            p.partition.max_iterations => file.max_iterations,
            p.partition.tolerance => file.tolerance,
            p.partition.pair_metric => file.pair_metric,
            p.aggregator.mode => file.agg,
            p.aggregator.attention_dim => file.attention_dim,
            p.aggregator.learning_rate => file.agg_learning_rate,
            p.aggregator.batch_users => file.agg_batch_users,
            p.aggregator.max_epochs => file.agg_max_epochs,
            p.aggregator.early_stop_patience => file.agg_patience,
            p.aggregator.l2_reg => file.agg_l2_reg,
            p.aggregator.freeze_transfer => file.freeze_transfer,
        }
        load.rating_threshold = file.rating_threshold;
        if file.capacity.is_some() {
            p.partition.capacity = file.capacity;
        }
        set! {
            p.model.model => flags.model,
            p.model.max_epochs => flags.max_epochs,
            p.strategy => flags.strategy,
            p.partition.num_shards => flags.shards,
            p.aggregator.mode => flags.agg,
        }
        p.validate()?;

        let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
        let jobs = flags
            .jobs
            .or(file.jobs)
            .unwrap_or_else(|| p.partition.num_shards.min(cores))
            .max(1);
        Ok(Settings {
            data: flags.data.clone().or_else(|| file.data.clone()),
            load,
            split,
            out: flags
                .out
                .clone()
                .or_else(|| file.out.clone())
                .unwrap_or_else(|| PathBuf::from("run")),
            jobs,
            pipeline: p,
        })
    }
}

/// Parses the process arguments, runs the command and maps errors to exit
/// codes.
pub fn run() -> ExitCode {
    ExitCode::from(run_from(std::env::args_os()))
}

/// Like [`run`], for an explicit argument list; returns the exit code.
pub fn run_from<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { USAGE_EXIT } else { 0 };
        }
    };
    let level = if cli.global.verbose { "info" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            e.exit_code()
        }
    }
}

/// Runs a parsed command.
pub fn execute(cli: &Cli) -> Result<()> {
    let file = match &cli.global.config {
        Some(path) => FileConfig::read(path)?,
        None => FileConfig::default(),
    };
    let settings = Settings::resolve(&file, &cli.global)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.jobs)
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Pretrain => cmd_pretrain(&settings),
        Command::Partition => cmd_partition(&settings),
        Command::Train => cmd_train(&settings),
        Command::Evaluate => cmd_evaluate(&settings).map(|_| ()),
        Command::Unlearn(args) => cmd_unlearn(&settings, args).map(|_| ()),
        Command::Bench(args) => cmd_bench(&settings, args).map(|_| ()),
    })
}

/// Reuses the split stored in the output directory, or loads `data` and
/// writes a new one.
pub fn ensure_split(settings: &Settings) -> Result<Split> {
    let out = &settings.out;
    if out.join(artifacts::TRAIN).exists() {
        log::info!("reusing split in {}", out.display());
        return artifacts::read_split(out);
    }
    let data = settings
        .data
        .as_ref()
        .ok_or_else(|| Error::config(format!("no split in {} and no --data given", out.display())))?;
    let full = dataset::load_interactions(data, &settings.load)?;
    let split = dataset::split(&full, &settings.split)?;
    artifacts::write_split(out, &split)?;
    println!(
        "split {}: {} users, {} items, train {} / validation {} / test {}",
        data.display(),
        full.num_users(),
        full.num_items(),
        split.train.len(),
        split.validation.len(),
        split.test.len()
    );
    Ok(split)
}

fn pretrain(settings: &Settings, train: &Dataset) -> Result<PretrainedEmbeddings> {
    let start = Instant::now();
    let emb = models::pretrain_for_partition(train, &settings.pipeline.pretrain_config())?;
    artifacts::write_pretrained(&settings.out, &emb, settings.pipeline.model.seed)?;
    log::info!("pretrained in {:.1}s", start.elapsed().as_secs_f64());
    Ok(emb)
}

/// Stored partition embeddings, trained and written first if missing.
fn pretrained_or_train(settings: &Settings, train: &Dataset) -> Result<PretrainedEmbeddings> {
    match artifacts::read_pretrained(&settings.out, train) {
        Err(Error::NotFound(_)) => pretrain(settings, train),
        other => other,
    }
}

pub fn cmd_pretrain(settings: &Settings) -> Result<()> {
    let split = ensure_split(settings)?;
    let emb = pretrain(settings, &split.train)?;
    println!(
        "wrote {} ({} users, {} items, d = {})",
        settings.out.join(artifacts::PRETRAINED).display(),
        emb.user_vecs().nrows(),
        emb.item_vecs().nrows(),
        emb.dim()
    );
    Ok(())
}

/// One line per shard with its size and a proportional bar.
pub fn histogram(counts: &[usize], capacity: usize) -> String {
    let widest = counts.iter().copied().max().unwrap_or(0).max(1);
    let mut out = format!("shard {:>9}  (capacity {capacity})\n", "size");
    for (i, &c) in counts.iter().enumerate() {
        let bar = "#".repeat((c * 40).div_ceil(widest));
        out.push_str(&format!("{i:>5} {c:>9}  {bar}\n"));
    }
    out
}

pub fn cmd_partition(settings: &Settings) -> Result<()> {
    let split = ensure_split(settings)?;
    let p = &settings.pipeline;
    let emb = if p.strategy.needs_embeddings() {
        Some(pretrained_or_train(settings, &split.train)?)
    } else {
        None
    };
    let start = Instant::now();
    let assignment = partition::partition(p.strategy, &split.train, emb.as_ref(), &p.partition)?;
    assignment.write(&settings.out.join(artifacts::ASSIGNMENT))?;
    println!(
        "{} partition into {} shards in {:.2}s ({} iterations)",
        p.strategy,
        assignment.num_shards(),
        start.elapsed().as_secs_f64(),
        assignment.iterations()
    );
    print!("{}", histogram(&assignment.member_counts(), assignment.capacity()));
    Ok(())
}

fn read_assignment(settings: &Settings) -> Result<ShardAssignment> {
    let path = settings.out.join(artifacts::ASSIGNMENT);
    if !path.exists() {
        return Err(Error::NotFound(format!(
            "partition file {} (run `partition` first)",
            path.display()
        )));
    }
    ShardAssignment::read(&path)
}

/// Pipeline settings with the strategy and shard count taken from the
/// stored assignment.
fn config_for(settings: &Settings, assignment: &ShardAssignment) -> PipelineConfig {
    let mut cfg = settings.pipeline.clone();
    cfg.strategy = assignment.kind();
    cfg.partition.num_shards = assignment.num_shards();
    cfg
}

pub fn cmd_train(settings: &Settings) -> Result<()> {
    let split = ensure_split(settings)?;
    let assignment = read_assignment(settings)?;
    let pretrained = match artifacts::read_pretrained(&settings.out, &split.train) {
        Ok(p) => Some(p),
        Err(Error::NotFound(_)) => None,
        Err(e) => return Err(e),
    };
    let cfg = config_for(settings, &assignment);
    let state = PipelineState::with_assignment(split, assignment, pretrained, cfg)?;
    state.save(&settings.out)?;
    let t = state.timings();
    for (i, secs) in t.shard_seconds.iter().enumerate() {
        println!("shard {i}: {} interactions, {secs:.2}s", state.shard_data(i).len());
    }
    println!(
        "aggregator ({}): {:.2}s; wrote {} shard checkpoints and {}",
        state.aggregator().mode(),
        t.aggregator_seconds,
        state.num_shards(),
        artifacts::AGGREGATOR
    );
    Ok(())
}

fn load_state(settings: &Settings) -> Result<PipelineState> {
    let assignment = read_assignment(settings)?;
    PipelineState::load(&settings.out, config_for(settings, &assignment))
}

pub fn cmd_evaluate(settings: &Settings) -> Result<MetricBundle> {
    let state = load_state(settings)?;
    let metrics = state.evaluate()?;
    metrics.write(
        &settings.out.join(artifacts::METRICS_TSV),
        &settings.out.join(artifacts::METRICS_JSON),
    )?;
    print!("{}", metrics.to_tsv());
    Ok(metrics)
}

/// Reads `user item` pairs of original ids. Blank lines and lines starting
/// with `#` are skipped; fields may be separated by whitespace, commas or
/// `::`.
pub fn read_targets(path: &Path, train: &Dataset) -> Result<Vec<Interaction>> {
    let source = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fail = |message: String| Error::Parse {
            path: source.clone(),
            line: n + 1,
            message,
        };
        let fields: Vec<&str> = if line.contains("::") {
            line.split("::").map(str::trim).collect()
        } else {
            line.split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .collect()
        };
        let [user, item] = fields[..] else {
            return Err(fail(format!("expected `user item`, got {} fields", fields.len())));
        };
        let u = train
            .user_ids()
            .index_of(user)
            .ok_or_else(|| fail(format!("unknown user id `{user}`")))?;
        let i = train
            .item_ids()
            .index_of(item)
            .ok_or_else(|| fail(format!("unknown item id `{item}`")))?;
        out.push(Interaction::new(u, i));
    }
    Ok(out)
}

/// `count` distinct training interactions chosen with `seed`.
pub fn sample_targets(train: &Dataset, count: usize, seed: u64) -> Result<Vec<Interaction>> {
    if count > train.len() {
        return Err(Error::config(format!(
            "cannot sample {count} of {} training interactions",
            train.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all = train.interactions();
    Ok(rand::seq::index::sample(&mut rng, all.len(), count)
        .into_iter()
        .map(|k| all[k])
        .collect())
}

pub fn cmd_unlearn(settings: &Settings, args: &UnlearnArgs) -> Result<Vec<UnlearnReport>> {
    let mut state = load_state(settings)?;
    let targets = match (&args.targets, args.sample) {
        (Some(path), _) => read_targets(path, state.train())?,
        (None, Some(n)) => sample_targets(state.train(), n, settings.pipeline.model.seed)?,
        (None, None) => return Err(Error::config("give --targets or --sample")),
    };
    let requests: Vec<UnlearnRequest> = targets
        .iter()
        .map(|&target| UnlearnRequest {
            target,
            seed_policy: args.seed_policy,
        })
        .collect();
    let mut baselines = Vec::new();
    if args.baseline {
        for r in &requests {
            baselines.push(state.full_retrain_baseline(r)?);
        }
    }
    let opts = UnlearnOptions {
        repartition: args.repartition,
        coalesce_same_shard: args.coalesce_same_shard,
        evaluate_after: args.evaluate_after,
    };
    let before = state.train().len();
    let (mut reports, failure) = match state.batch_unlearn(&requests, &opts) {
        Ok(r) => (r, None),
        Err(e) => (e.completed, Some((e.failed_index, e.source))),
    };
    for r in &reports {
        log::info!("unlearned {:?} from shard {} in {:.2}s", r.targets, r.shard, r.total_seconds);
    }
    state.save(&settings.out)?;
    reports.extend(baselines);
    unlearn::write_reports_jsonl(&settings.out.join(artifacts::REPORTS), &reports)?;
    let summary = unlearn::summary_table(&reports);
    std::fs::write(settings.out.join(artifacts::SUMMARY), &summary)
        .map_err(|e| Error::io(settings.out.join(artifacts::SUMMARY), e))?;
    print!("{summary}");
    println!("training interactions: {before} -> {}", state.train().len());
    match failure {
        None => Ok(reports),
        Some((index, source)) => {
            eprintln!("request {index} failed; earlier requests were applied and saved");
            Err(source)
        }
    }
}

/// One row of the bench table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub strategy: String,
    pub shards: usize,
    pub mode: String,
    pub metrics: MetricBundle,
    pub mean_unlearn_seconds: f64,
    pub max_unlearn_seconds: f64,
}

fn bench_tsv(rows: &[BenchRow], cutoffs: &[usize]) -> String {
    let mut out = String::from("strategy\tshards\tmode");
    for n in cutoffs {
        out.push_str(&format!("\trecall@{n}\tndcg@{n}"));
    }
    out.push_str("\tmean_unlearn_s\tmax_unlearn_s\n");
    for r in rows {
        out.push_str(&format!("{}\t{}\t{}", r.strategy, r.shards, r.mode));
        for &n in cutoffs {
            out.push_str(&format!("\t{:.4}\t{:.4}", r.metrics.recall_at(n), r.metrics.ndcg_at(n)));
        }
        out.push_str(&format!("\t{:.3}\t{:.3}\n", r.mean_unlearn_seconds, r.max_unlearn_seconds));
    }
    out
}

pub fn cmd_bench(settings: &Settings, args: &BenchArgs) -> Result<Vec<BenchRow>> {
    if args.shard_grid.is_empty() || args.shard_grid.contains(&0) {
        return Err(Error::config("shard grid values must be positive integers"));
    }
    if args.strategies.is_empty() || args.modes.is_empty() {
        return Err(Error::config("bench needs at least one strategy and one mode"));
    }
    let split = ensure_split(settings)?;
    let base = &settings.pipeline;
    let pretrained = if args.strategies.iter().any(|s| s.needs_embeddings()) {
        Some(pretrained_or_train(settings, &split.train)?)
    } else {
        None
    };
    let targets = sample_targets(&split.train, args.requests, base.model.seed)?;
    let requests: Vec<UnlearnRequest> = targets.into_iter().map(UnlearnRequest::new).collect();

    let mut seen = HashSet::new();
    let mut rows = Vec::new();
    for &strategy in &args.strategies {
        for &k in &args.shard_grid {
            if !seen.insert((strategy, k)) {
                continue;
            }
            let mut cfg = base.clone();
            cfg.strategy = strategy;
            cfg.partition.num_shards = k;
            cfg.aggregator.mode = args.modes[0];
            let emb = if strategy.needs_embeddings() { pretrained.clone() } else { None };
            let assignment = partition::partition(strategy, &split.train, emb.as_ref(), &cfg.partition)?;
            let mut state = PipelineState::with_assignment(split.clone(), assignment, emb, cfg.clone())?;
            for (m, &mode) in args.modes.iter().enumerate() {
                if m > 0 {
                    state.refit_aggregator(crate::aggregation::AggregatorConfig {
                        mode,
                        ..cfg.aggregator.clone()
                    })?;
                }
                let metrics = state.evaluate()?;
                let mut scratch = state.clone();
                let reports = scratch
                    .batch_unlearn(&requests, &UnlearnOptions::default())
                    .map_err(|e| e.source)?;
                let (mean, max) = mean_max(reports.iter().map(|r| r.total_seconds));
                let row = BenchRow {
                    strategy: strategy.to_string(),
                    shards: k,
                    mode: mode.to_string(),
                    metrics,
                    mean_unlearn_seconds: mean,
                    max_unlearn_seconds: max,
                };
                log::info!("{strategy} K={k} {mode}: recall@{} {:.4}", base.cutoffs[0], row.metrics.recall_at(base.cutoffs[0]));
                rows.push(row);
            }
        }
    }
    if !args.skip_full_retrain {
        let (trained, seconds) = full_retrain(&split.train, &split.validation, &base.model)?;
        let metrics = crate::eval::evaluate(&trained.table, &split.train, &split.test, &base.cutoffs)?;
        rows.push(BenchRow {
            strategy: "full".into(),
            shards: 1,
            mode: "-".into(),
            metrics,
            mean_unlearn_seconds: seconds,
            max_unlearn_seconds: seconds,
        });
    }
    let table = bench_tsv(&rows, &base.cutoffs);
    let path = settings.out.join("bench.tsv");
    std::fs::write(&path, &table).map_err(|e| Error::io(&path, e))?;
    let json = settings.out.join("bench.json");
    std::fs::write(&json, serde_json::to_string_pretty(&rows).expect("rows serialise"))
        .map_err(|e| Error::io(&json, e))?;
    print!("{table}");
    Ok(rows)
}
