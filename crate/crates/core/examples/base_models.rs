//! Train each base model on the full training split and report test metrics.
//!
//!     cargo run --release --example base_models

use rec_unlearn::dataset::{split, SplitSpec};
use rec_unlearn::eval::evaluate;
use rec_unlearn::models::{train, ModelKind, TrainConfig};
use rec_unlearn::synthetic::{planted_clusters, SyntheticConfig};

fn main() -> rec_unlearn::Result<()> {
    let data = planted_clusters(&SyntheticConfig::default())?;
    let s = split(&data, &SplitSpec::default())?;
    for model in [ModelKind::Bpr, ModelKind::Wmf, ModelKind::LightGcn] {
        let cfg = TrainConfig {
            model,
            dim: 32,
            max_epochs: 100,
            ..TrainConfig::default()
        };
        let trained = train(&s.train, &cfg, Some(&s.validation))?;
        let m = evaluate(&trained.table, &s.train, &s.test, &[10, 20])?;
        println!(
            "{:<9} epochs {:>3} (best {:>3})  Recall@20 {:.4}  NDCG@20 {:.4}",
            model.to_string(),
            trained.epochs_run,
            trained.best_epoch,
            m.recall_at(20),
            m.ndcg_at(20)
        );
    }
    Ok(())
}
