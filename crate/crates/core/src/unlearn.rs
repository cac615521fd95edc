//! Exact unlearning on a sharded pipeline.
//!
//! A [`PipelineState`] holds the training data, the shard assignment, one
//! submodel per shard and the aggregator. Deleting an interaction removes it
//! from its shard and from the global training set, retrains that shard's
//! submodel from a fresh initialisation, and retrains the aggregator from
//! scratch. Nothing else changes, so the result is exactly what training on
//! the reduced data would have produced.
//!
//! The shard assignment and the pre-trained partition embeddings are left as
//! they are: they still record where deleted interactions used to live.
//! Setting [`UnlearnOptions::repartition`] rebuilds them as well, at the cost
//! of retraining every shard.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::{train_aggregator, AggLoss, AggMode, AggTrainReport, Aggregator, AggregatorConfig};
use crate::artifacts;
use crate::dataset::{Dataset, Interaction, Split};
use crate::error::{Error, Result};
use crate::eval::{self, MetricBundle, DEFAULT_CUTOFFS};
use crate::models::checkpoint::write_table;
use crate::models::{self, EmbeddingTable, ModelKind, TrainConfig, Trained};
use crate::partition::{self, PartitionConfig, PretrainedEmbeddings, ShardAssignment, Strategy};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Base model used for every submodel and for the full-retrain baseline.
    pub model: TrainConfig,
    /// WMF epochs for the partition embeddings.
    pub pretrain_epochs: usize,
    pub strategy: Strategy,
    pub partition: PartitionConfig,
    pub aggregator: AggregatorConfig,
    pub cutoffs: Vec<usize>,
    /// Train shard submodels concurrently.
    pub parallel_shards: bool,
    /// Validation interactions used to early-stop each submodel.
    pub validation_scope: ValidationScope,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationScope {
    /// Only validation interactions of users with training data in the shard.
    #[default]
    ShardUsers,
    /// The whole validation set.
    Global,
}

impl std::str::FromStr for ValidationScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shard_users" | "shard-users" | "shard" => Ok(ValidationScope::ShardUsers),
            "global" => Ok(ValidationScope::Global),
            other => Err(Error::config(format!("unknown validation scope `{other}`"))),
        }
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            model: TrainConfig::default(),
            pretrain_epochs: 50,
            strategy: Strategy::Inbp,
            partition: PartitionConfig::default(),
            aggregator: AggregatorConfig::default(),
            cutoffs: DEFAULT_CUTOFFS.to_vec(),
            parallel_shards: true,
            validation_scope: ValidationScope::ShardUsers,
        }
    }
}

impl PipelineConfig {
    /// Sets the model, partition and aggregator seeds together.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.model.seed = seed;
        self.partition.seed = seed;
        self.aggregator.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.aggregator.validate()?;
        self.partition.capacity_for(0)?;
        if self.pretrain_epochs == 0 {
            return Err(Error::config("pretrain_epochs must be positive"));
        }
        if self.cutoffs.is_empty() || self.cutoffs.contains(&0) {
            return Err(Error::config("cutoffs must be positive"));
        }
        Ok(())
    }

    /// Aggregator settings with the loss matched to the base model.
    pub fn effective_aggregator(&self) -> AggregatorConfig {
        AggregatorConfig {
            loss: AggLoss::for_model(self.model.model),
            negative_weight: self.model.negative_weight,
            ..self.aggregator.clone()
        }
    }

    pub fn pretrain_config(&self) -> TrainConfig {
        TrainConfig {
            model: ModelKind::Wmf,
            max_epochs: self.pretrain_epochs,
            ..self.model.clone()
        }
    }
}

/// Seed of shard `i` under the original run.
pub fn shard_seed(base: u64, i: usize) -> u64 {
    base.wrapping_add(i as u64)
}

/// Validation interactions of users active in `shard`.
pub fn shard_validation(shard: &Dataset, val: &Dataset) -> Result<Dataset> {
    let users: Vec<u32> = shard.active_users().collect();
    val.subset(
        users
            .into_iter()
            .flat_map(|u| val.user_items(u).iter().map(move |&v| Interaction::new(u, v))),
    )
}

/// Trains one submodel from scratch, early-stopping on `val` narrowed by
/// `scope`. An empty shard yields its initial embeddings.
pub fn train_submodel(
    cfg: &TrainConfig,
    shard: &Dataset,
    val: &Dataset,
    scope: ValidationScope,
    seed: u64,
) -> Result<Trained> {
    let cfg = cfg.with_seed(seed);
    if shard.is_empty() {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let table = EmbeddingTable::gaussian(shard.num_users(), shard.num_items(), cfg.dim, cfg.init_std, &mut rng);
        return Ok(Trained {
            table,
            epochs_run: 0,
            best_epoch: 0,
            best_validation_recall: None,
            epoch_losses: Vec::new(),
        });
    }
    match scope {
        ValidationScope::Global => models::train(shard, &cfg, Some(val)),
        ValidationScope::ShardUsers => models::train(shard, &cfg, Some(&shard_validation(shard, val)?)),
    }
}

/// Builds and, unless the mode is `mean`, trains a fresh aggregator.
pub fn fit_aggregator(
    cfg: &AggregatorConfig,
    tables: Vec<Arc<EmbeddingTable>>,
    train: &Dataset,
    val: &Dataset,
) -> Result<(Aggregator, Option<AggTrainReport>)> {
    let mut agg = Aggregator::new(tables, cfg)?;
    if cfg.mode == AggMode::Mean {
        return Ok((agg, None));
    }
    let report = train_aggregator(&mut agg, train, cfg, Some(val))?;
    Ok((agg, Some(report)))
}

/// Trains the base model on the full training set, returning it with the
/// wall-clock seconds spent.
pub fn full_retrain(train: &Dataset, val: &Dataset, cfg: &TrainConfig) -> Result<(Trained, f64)> {
    let start = Instant::now();
    let trained = models::train(train, cfg, Some(val))?;
    Ok((trained, start.elapsed().as_secs_f64()))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct BuildTimings {
    pub pretrain_seconds: f64,
    pub partition_seconds: f64,
    pub shard_seconds: Vec<f64>,
    pub aggregator_seconds: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedPolicy {
    /// Retrain with the seed the shard was originally trained with.
    #[default]
    ReuseOriginal,
    /// Draw a new seed for every retrain.
    Fresh,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnlearnRequest {
    pub target: Interaction,
    pub seed_policy: SeedPolicy,
}

impl UnlearnRequest {
    pub fn new(target: Interaction) -> Self {
        UnlearnRequest {
            target,
            seed_policy: SeedPolicy::ReuseOriginal,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UnlearnOptions {
    /// Recompute partition embeddings and the assignment, then retrain all
    /// shards.
    pub repartition: bool,
    /// In a batch, handle consecutive requests for the same shard with one
    /// retrain.
    pub coalesce_same_shard: bool,
    /// Evaluate the updated model on the test set after each retrain.
    pub evaluate_after: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnlearnReport {
    pub targets: Vec<Interaction>,
    pub shard: usize,
    pub shard_retrain_seconds: f64,
    pub aggregator_retrain_seconds: f64,
    pub total_seconds: f64,
    pub full_retrain_seconds: Option<f64>,
    pub utility_after: Option<MetricBundle>,
}

#[derive(Debug, thiserror::Error)]
#[error("unlearning request {failed_index} failed after {} retrain(s): {source}", completed.len())]
pub struct BatchError {
    pub completed: Vec<UnlearnReport>,
    pub failed_index: usize,
    #[source]
    pub source: Error,
}

#[derive(Clone, Debug)]
pub struct PipelineState {
    config: PipelineConfig,
    train: Dataset,
    validation: Dataset,
    test: Dataset,
    pretrained: Option<PretrainedEmbeddings>,
    assignment: ShardAssignment,
    shard_data: Vec<Dataset>,
    shard_seeds: Vec<u64>,
    submodels: Vec<Arc<EmbeddingTable>>,
    aggregator: Aggregator,
    aggregator_seed: u64,
    fresh_draws: u64,
    timings: BuildTimings,
}

fn shard_datasets(assignment: &ShardAssignment, train: &Dataset) -> Result<Vec<Dataset>> {
    (0..assignment.num_shards())
        .map(|i| train.subset(assignment.shard(i).iter().copied().filter(|&y| train.contains(y))))
        .collect()
}

fn train_shards(
    config: &PipelineConfig,
    shard_data: &[Dataset],
    seeds: &[u64],
    val: &Dataset,
) -> Result<Vec<(Trained, f64)>> {
    let run = |i: usize| -> Result<(Trained, f64)> {
        let start = Instant::now();
        let trained = train_submodel(&config.model, &shard_data[i], val, config.validation_scope, seeds[i])?;
        log::info!(
            "shard {i}: {} interactions, {} epochs, best epoch {}",
            shard_data[i].len(),
            trained.epochs_run,
            trained.best_epoch
        );
        Ok((trained, start.elapsed().as_secs_f64()))
    };
    if config.parallel_shards {
        (0..shard_data.len()).into_par_iter().map(run).collect()
    } else {
        (0..shard_data.len()).map(run).collect()
    }
}

impl PipelineState {
    /// Pre-trains partition embeddings (if the strategy needs them),
    /// partitions, trains every shard and fits the aggregator.
    pub fn build(split: Split, config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        let mut timings = BuildTimings::default();
        let start = Instant::now();
        let pretrained = if config.strategy.needs_embeddings() {
            Some(models::pretrain_for_partition(&split.train, &config.pretrain_config())?)
        } else {
            None
        };
        timings.pretrain_seconds = start.elapsed().as_secs_f64();
        let start = Instant::now();
        let assignment = partition::partition(
            config.strategy,
            &split.train,
            pretrained.as_ref(),
            &config.partition,
        )?;
        timings.partition_seconds = start.elapsed().as_secs_f64();
        Self::assemble(split, assignment, pretrained, config, timings)
    }

    /// Trains every shard and the aggregator for a given assignment.
    pub fn with_assignment(
        split: Split,
        assignment: ShardAssignment,
        pretrained: Option<PretrainedEmbeddings>,
        config: PipelineConfig,
    ) -> Result<Self> {
        config.validate()?;
        Self::assemble(split, assignment, pretrained, config, BuildTimings::default())
    }

    fn assemble(
        split: Split,
        assignment: ShardAssignment,
        pretrained: Option<PretrainedEmbeddings>,
        config: PipelineConfig,
        mut timings: BuildTimings,
    ) -> Result<Self> {
        let shard_data = shard_datasets(&assignment, &split.train)?;
        let shard_seeds: Vec<u64> = (0..assignment.num_shards())
            .map(|i| shard_seed(config.model.seed, i))
            .collect();
        let trained = train_shards(&config, &shard_data, &shard_seeds, &split.validation)?;
        timings.shard_seconds = trained.iter().map(|t| t.1).collect();
        let submodels: Vec<Arc<EmbeddingTable>> =
            trained.into_iter().map(|(t, _)| Arc::new(t.table)).collect();
        let start = Instant::now();
        let agg_cfg = config.effective_aggregator();
        let (aggregator, _) = fit_aggregator(&agg_cfg, submodels.clone(), &split.train, &split.validation)?;
        timings.aggregator_seconds = start.elapsed().as_secs_f64();
        Ok(PipelineState {
            aggregator_seed: agg_cfg.seed,
            config,
            train: split.train,
            validation: split.validation,
            test: split.test,
            pretrained,
            assignment,
            shard_data,
            shard_seeds,
            submodels,
            aggregator,
            fresh_draws: 0,
            timings,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn train(&self) -> &Dataset {
        &self.train
    }

    pub fn validation(&self) -> &Dataset {
        &self.validation
    }

    pub fn test(&self) -> &Dataset {
        &self.test
    }

    pub fn pretrained(&self) -> Option<&PretrainedEmbeddings> {
        self.pretrained.as_ref()
    }

    pub fn assignment(&self) -> &ShardAssignment {
        &self.assignment
    }

    pub fn num_shards(&self) -> usize {
        self.submodels.len()
    }

    /// Current training data of shard `i`.
    pub fn shard_data(&self, i: usize) -> &Dataset {
        &self.shard_data[i]
    }

    pub fn shard_seeds(&self) -> &[u64] {
        &self.shard_seeds
    }

    pub fn submodels(&self) -> &[Arc<EmbeddingTable>] {
        &self.submodels
    }

    pub fn aggregator(&self) -> &Aggregator {
        &self.aggregator
    }

    pub fn timings(&self) -> &BuildTimings {
        &self.timings
    }

    /// Replaces the aggregator settings and fits a new aggregator over the
    /// current submodels.
    pub fn refit_aggregator(&mut self, cfg: AggregatorConfig) -> Result<Option<AggTrainReport>> {
        self.config.aggregator = cfg;
        let agg_cfg = self.config.effective_aggregator();
        agg_cfg.validate()?;
        let start = Instant::now();
        let (aggregator, report) =
            fit_aggregator(&agg_cfg, self.submodels.clone(), &self.train, &self.validation)?;
        self.timings.aggregator_seconds = start.elapsed().as_secs_f64();
        self.aggregator = aggregator;
        self.aggregator_seed = agg_cfg.seed;
        Ok(report)
    }

    /// The aggregated user and item embeddings used for recommendation.
    pub fn model_table(&self) -> Result<EmbeddingTable> {
        self.aggregator.aggregate()
    }

    /// Test-set metrics at the configured cutoffs.
    pub fn evaluate(&self) -> Result<MetricBundle> {
        eval::evaluate(&self.model_table()?, &self.train, &self.test, &self.config.cutoffs)
    }

    /// Shard owning `y`, which must still be in the training set.
    pub fn locate(&self, y: Interaction) -> Result<usize> {
        if !self.train.contains(y) {
            return Err(Error::InteractionNotFound(y));
        }
        self.assignment.locate_shard(y)
    }

    fn next_fresh_seed(&mut self, base: u64) -> u64 {
        self.fresh_draws += 1;
        ChaCha8Rng::seed_from_u64(base ^ self.fresh_draws.rotate_left(32)).random()
    }

    fn retrain(
        &mut self,
        shard: usize,
        targets: &[Interaction],
        policy: SeedPolicy,
        opts: &UnlearnOptions,
    ) -> Result<UnlearnReport> {
        let start = Instant::now();
        for &y in targets {
            self.train.remove_in_place(y)?;
            self.shard_data[shard].remove_in_place(y)?;
        }
        if policy == SeedPolicy::Fresh {
            self.aggregator_seed = self.next_fresh_seed(self.aggregator_seed);
        }

        let shard_start = Instant::now();
        if opts.repartition {
            self.rebuild_partition(policy)?;
        } else {
            if policy == SeedPolicy::Fresh {
                self.shard_seeds[shard] = self.next_fresh_seed(self.shard_seeds[shard]);
            }
            let trained = train_submodel(
                &self.config.model,
                &self.shard_data[shard],
                &self.validation,
                self.config.validation_scope,
                self.shard_seeds[shard],
            )?;
            self.submodels[shard] = Arc::new(trained.table);
        }
        let shard_seconds = shard_start.elapsed().as_secs_f64();

        let agg_start = Instant::now();
        let agg_cfg = AggregatorConfig {
            seed: self.aggregator_seed,
            ..self.config.effective_aggregator()
        };
        let (aggregator, _) =
            fit_aggregator(&agg_cfg, self.submodels.clone(), &self.train, &self.validation)?;
        self.aggregator = aggregator;
        let aggregator_seconds = agg_start.elapsed().as_secs_f64();
        let total_seconds = start.elapsed().as_secs_f64();

        let utility_after = if opts.evaluate_after {
            Some(self.evaluate()?)
        } else {
            None
        };
        Ok(UnlearnReport {
            targets: targets.to_vec(),
            shard,
            shard_retrain_seconds: shard_seconds,
            aggregator_retrain_seconds: aggregator_seconds,
            total_seconds,
            full_retrain_seconds: None,
            utility_after,
        })
    }

    fn rebuild_partition(&mut self, policy: SeedPolicy) -> Result<()> {
        self.pretrained = if self.config.strategy.needs_embeddings() {
            Some(models::pretrain_for_partition(&self.train, &self.config.pretrain_config())?)
        } else {
            None
        };
        self.assignment = partition::partition(
            self.config.strategy,
            &self.train,
            self.pretrained.as_ref(),
            &self.config.partition,
        )?;
        self.shard_data = shard_datasets(&self.assignment, &self.train)?;
        if policy == SeedPolicy::Fresh {
            for i in 0..self.shard_seeds.len() {
                self.shard_seeds[i] = self.next_fresh_seed(self.shard_seeds[i]);
            }
        }
        let trained = train_shards(&self.config, &self.shard_data, &self.shard_seeds, &self.validation)?;
        self.submodels = trained.into_iter().map(|(t, _)| Arc::new(t.table)).collect();
        Ok(())
    }

    /// Removes `req.target` and retrains its shard and the aggregator.
    pub fn unlearn(&mut self, req: &UnlearnRequest) -> Result<UnlearnReport> {
        self.unlearn_with(req, &UnlearnOptions::default())
    }

    pub fn unlearn_with(&mut self, req: &UnlearnRequest, opts: &UnlearnOptions) -> Result<UnlearnReport> {
        let shard = self.locate(req.target)?;
        self.retrain(shard, &[req.target], req.seed_policy, opts)
    }

    /// Applies `requests` in order. With `coalesce_same_shard`, a run of
    /// consecutive requests owned by one shard shares a single retrain, using
    /// the first request's seed policy.
    pub fn batch_unlearn(
        &mut self,
        requests: &[UnlearnRequest],
        opts: &UnlearnOptions,
    ) -> std::result::Result<Vec<UnlearnReport>, BatchError> {
        let mut done = Vec::new();
        let mut pending: Option<(usize, Vec<Interaction>, SeedPolicy)> = None;
        for (idx, req) in requests.iter().enumerate() {
            let located = self.locate(req.target).and_then(|s| {
                let repeated = pending
                    .as_ref()
                    .is_some_and(|(_, targets, _)| targets.contains(&req.target));
                if repeated {
                    Err(Error::InteractionNotFound(req.target))
                } else {
                    Ok(s)
                }
            });
            let shard = match located {
                Ok(s) => s,
                Err(source) => {
                    if let Some((s, targets, policy)) = pending.take() {
                        match self.retrain(s, &targets, policy, opts) {
                            Ok(r) => done.push(r),
                            Err(e) => {
                                return Err(BatchError {
                                    completed: done,
                                    failed_index: idx - targets.len(),
                                    source: e,
                                })
                            }
                        }
                    }
                    return Err(BatchError {
                        completed: done,
                        failed_index: idx,
                        source,
                    });
                }
            };
            match &mut pending {
                Some((s, targets, _)) if opts.coalesce_same_shard && *s == shard => {
                    targets.push(req.target);
                }
                _ => {
                    if let Some((s, targets, policy)) = pending.take() {
                        let first = idx - targets.len();
                        done.push(self.retrain(s, &targets, policy, opts).map_err(|e| BatchError {
                            completed: done.clone(),
                            failed_index: first,
                            source: e,
                        })?);
                    }
                    pending = Some((shard, vec![req.target], req.seed_policy));
                }
            }
        }
        if let Some((s, targets, policy)) = pending.take() {
            let first = requests.len() - targets.len();
            done.push(self.retrain(s, &targets, policy, opts).map_err(|e| BatchError {
                completed: done.clone(),
                failed_index: first,
                source: e,
            })?);
        }
        Ok(done)
    }

    /// Retrains the base model on the training data without `req.target`,
    /// leaving this state untouched.
    pub fn full_retrain_baseline(&self, req: &UnlearnRequest) -> Result<UnlearnReport> {
        let shard = self.locate(req.target)?;
        let reduced = self.train.remove_interaction(req.target)?;
        let cfg = match req.seed_policy {
            SeedPolicy::ReuseOriginal => self.config.model.clone(),
            SeedPolicy::Fresh => self.config.model.with_seed(
                ChaCha8Rng::seed_from_u64(self.config.model.seed ^ 0x5eed).random(),
            ),
        };
        let (trained, seconds) = full_retrain(&reduced, &self.validation, &cfg)?;
        let utility = eval::evaluate(&trained.table, &reduced, &self.test, &self.config.cutoffs)?;
        Ok(UnlearnReport {
            targets: vec![req.target],
            shard,
            shard_retrain_seconds: 0.0,
            aggregator_retrain_seconds: 0.0,
            total_seconds: seconds,
            full_retrain_seconds: Some(seconds),
            utility_after: Some(utility),
        })
    }

    /// Writes every artifact of the run into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        artifacts::write_split(
            dir,
            &Split {
                train: self.train.clone(),
                validation: self.validation.clone(),
                test: self.test.clone(),
            },
        )?;
        if let Some(p) = &self.pretrained {
            artifacts::write_pretrained(dir, p, self.config.model.seed)?;
        }
        self.assignment.write(&dir.join(artifacts::ASSIGNMENT))?;
        let model = self.config.model.model.to_string();
        for (i, table) in self.submodels.iter().enumerate() {
            write_table(
                &dir.join(artifacts::shard_file(i)),
                &model,
                self.shard_seeds[i],
                table,
                &[
                    ("shard", i.to_string()),
                    ("interactions", self.shard_data[i].len().to_string()),
                ],
            )?;
        }
        self.aggregator.write(&dir.join(artifacts::AGGREGATOR))
    }

    /// Restores a run written by [`PipelineState::save`]. Tables come back
    /// at f32 precision.
    pub fn load(dir: &Path, config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        let split = artifacts::read_split(dir)?;
        let assignment = ShardAssignment::read(&dir.join(artifacts::ASSIGNMENT))?;
        let pretrained = match artifacts::read_pretrained(dir, &split.train) {
            Ok(p) => Some(p),
            Err(Error::NotFound(_)) => None,
            Err(e) => return Err(e),
        };
        let k = assignment.num_shards();
        let (tables, shard_seeds) = artifacts::read_shards(dir, k, &split.train)?;
        let submodels: Vec<Arc<EmbeddingTable>> = tables.into_iter().map(Arc::new).collect();
        let agg_cfg = config.effective_aggregator();
        let aggregator = Aggregator::read(&dir.join(artifacts::AGGREGATOR), submodels.clone(), agg_cfg.l2_reg)?;
        let shard_data = shard_datasets(&assignment, &split.train)?;
        Ok(PipelineState {
            aggregator_seed: agg_cfg.seed,
            config: PipelineConfig {
                aggregator: AggregatorConfig {
                    mode: aggregator.mode(),
                    ..config.aggregator.clone()
                },
                ..config
            },
            train: split.train,
            validation: split.validation,
            test: split.test,
            pretrained,
            assignment,
            shard_data,
            shard_seeds,
            submodels,
            aggregator,
            fresh_draws: 0,
            timings: BuildTimings::default(),
        })
    }
}

/// Removes `req.target` and retrains its shard and the aggregator.
pub fn unlearn(state: &mut PipelineState, req: &UnlearnRequest) -> Result<UnlearnReport> {
    state.unlearn(req)
}

pub fn batch_unlearn(
    state: &mut PipelineState,
    requests: &[UnlearnRequest],
    opts: &UnlearnOptions,
) -> std::result::Result<Vec<UnlearnReport>, BatchError> {
    state.batch_unlearn(requests, opts)
}

pub fn full_retrain_baseline(state: &PipelineState, req: &UnlearnRequest) -> Result<UnlearnReport> {
    state.full_retrain_baseline(req)
}

/// `(mean, max)` of a list of durations; zeros when empty.
pub fn mean_max(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.into_iter().collect();
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    (mean, v.iter().copied().fold(f64::MIN, f64::max))
}

/// Timing table with one row per stage: Shard Training, Aggregation
/// Training, Total, and Full Retrain when any report carries it.
pub fn summary_table(reports: &[UnlearnReport]) -> String {
    let unlearn: Vec<&UnlearnReport> = reports.iter().filter(|r| r.full_retrain_seconds.is_none()).collect();
    let mut rows = vec![
        ("Shard Training", mean_max(unlearn.iter().map(|r| r.shard_retrain_seconds))),
        ("Aggregation Training", mean_max(unlearn.iter().map(|r| r.aggregator_retrain_seconds))),
        ("Total", mean_max(unlearn.iter().map(|r| r.total_seconds))),
    ];
    let full: Vec<f64> = reports.iter().filter_map(|r| r.full_retrain_seconds).collect();
    if !full.is_empty() {
        rows.push(("Full Retrain", mean_max(full)));
    }
    let mut out = format!("{:<22}{:>12}{:>12}\n", "", "mean (s)", "max (s)");
    for (label, (mean, max)) in rows {
        let _ = writeln!(out, "{label:<22}{mean:>12.3}{max:>12.3}");
    }
    let _ = writeln!(out, "requests: {}", unlearn.iter().map(|r| r.targets.len()).sum::<usize>());
    out
}

/// One JSON object per line.
pub fn write_reports_jsonl(path: &Path, reports: &[UnlearnReport]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    for r in reports {
        let line = serde_json::to_string(r).expect("report serialises");
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
