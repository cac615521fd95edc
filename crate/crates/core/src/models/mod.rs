//! Base collaborative-filtering models: BPR-MF, WMF and LightGCN.
//!
//! Every model produces an [`EmbeddingTable`] and scores with an inner
//! product, so the aggregation layer can treat them uniformly.

mod adagrad;
mod bpr;
pub mod checkpoint;
mod lightgcn;
mod table;
mod wmf;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval;
use crate::partition::PretrainedEmbeddings;

pub use adagrad::{Adagrad, INITIAL_ACCUMULATOR};
pub(crate) use adagrad::update as adagrad_update;
pub(crate) use bpr::{sample_negative, sigmoid, softplus};
pub use bpr::{bpr_gradient, bpr_objective, sample_triples, train_bpr, Triple};
pub use lightgcn::{train_lightgcn, Propagator};
pub use table::{dot, EmbeddingTable};
pub use wmf::{train_wmf, wmf_gradient, wmf_objective};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Bpr,
    Wmf,
    #[serde(rename = "lightgcn")]
    LightGcn,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Bpr => "bpr",
            ModelKind::Wmf => "wmf",
            ModelKind::LightGcn => "lightgcn",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bpr" => Ok(ModelKind::Bpr),
            "wmf" => Ok(ModelKind::Wmf),
            "lightgcn" => Ok(ModelKind::LightGcn),
            other => Err(Error::config(format!("unknown model `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelKind,
    pub dim: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub l2_reg: f64,
    /// Uniform weight `c0` of unobserved entries in the WMF loss.
    pub negative_weight: f64,
    /// LightGCN propagation depth.
    pub num_layers: usize,
    pub init_std: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelKind::Bpr,
            dim: 64,
            learning_rate: 0.05,
            batch_size: 512,
            max_epochs: 1000,
            early_stop_patience: 10,
            l2_reg: 1e-4,
            negative_weight: 0.05,
            num_layers: 2,
            init_std: 0.01,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::config("dim must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be positive"));
        }
        if self.max_epochs == 0 {
            return Err(Error::config("max_epochs must be positive"));
        }
        if self.early_stop_patience == 0 {
            return Err(Error::config("early_stop_patience must be >= 1"));
        }
        if self.l2_reg < 0.0 || self.negative_weight < 0.0 || self.init_std < 0.0 {
            return Err(Error::config("regularisation and weights must be non-negative"));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        TrainConfig {
            seed,
            ..self.clone()
        }
    }
}

/// Result of one training run.
#[derive(Clone, Debug)]
pub struct Trained {
    pub table: EmbeddingTable,
    pub epochs_run: usize,
    /// 1-based epoch whose table was returned.
    pub best_epoch: usize,
    pub best_validation_recall: Option<f64>,
    /// Mean training loss per epoch.
    pub epoch_losses: Vec<f64>,
}

/// Trains the model selected by `cfg.model`.
pub fn train(train: &Dataset, cfg: &TrainConfig, val: Option<&Dataset>) -> Result<Trained> {
    match cfg.model {
        ModelKind::Bpr => train_bpr(train, cfg, val),
        ModelKind::Wmf => train_wmf(train, cfg, val),
        ModelKind::LightGcn => train_lightgcn(train, cfg, val),
    }
}

/// WMF embeddings of the full training set, used to place units into shards.
pub fn pretrain_for_partition(train: &Dataset, cfg: &TrainConfig) -> Result<PretrainedEmbeddings> {
    let cfg = TrainConfig {
        model: ModelKind::Wmf,
        ..cfg.clone()
    };
    let trained = train_wmf(train, &cfg, None)?;
    Ok(PretrainedEmbeddings::from(trained.table))
}

pub(crate) const VALIDATION_CUTOFF: usize = 10;

/// Tracks validation Recall@10 and keeps the best table seen so far.
pub(crate) struct EarlyStopping<'a> {
    train: &'a Dataset,
    val: Option<&'a Dataset>,
    patience: usize,
    best: Option<(f64, usize, EmbeddingTable)>,
    epochs_since_best: usize,
}

impl<'a> EarlyStopping<'a> {
    pub(crate) fn new(train: &'a Dataset, val: Option<&'a Dataset>, patience: usize) -> Self {
        // A validation set with no interactions carries no signal.
        let val = val.filter(|v| !v.is_empty());
        EarlyStopping {
            train,
            val,
            patience,
            best: None,
            epochs_since_best: 0,
        }
    }

    /// Records the table after `epoch` (1-based). Returns `true` to stop.
    pub(crate) fn observe(&mut self, epoch: usize, table: impl FnOnce() -> EmbeddingTable) -> bool {
        let Some(val) = self.val else {
            return false;
        };
        let table = table();
        let recall = eval::validation_recall(&table, self.train, val, VALIDATION_CUTOFF);
        match &self.best {
            Some((best, _, _)) if recall <= *best => {
                self.epochs_since_best += 1;
            }
            _ => {
                self.best = Some((recall, epoch, table));
                self.epochs_since_best = 0;
            }
        }
        self.epochs_since_best >= self.patience
    }

    pub(crate) fn finish(
        self,
        last: EmbeddingTable,
        epochs_run: usize,
        epoch_losses: Vec<f64>,
    ) -> Trained {
        match self.best {
            Some((recall, epoch, table)) => Trained {
                table,
                epochs_run,
                best_epoch: epoch,
                best_validation_recall: Some(recall),
                epoch_losses,
            },
            None => Trained {
                table: last,
                epochs_run,
                best_epoch: epochs_run,
                best_validation_recall: None,
                epoch_losses,
            },
        }
    }
}

pub(crate) fn check_trainable(train: &Dataset, cfg: &TrainConfig) -> Result<()> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(())
}
