//! Build a sharded recommender on synthetic data, delete one interaction,
//! and check the model changed only where it had to.
//!
//!     cargo run --release --example quickstart

use rec_unlearn::dataset::{split, SplitSpec};
use rec_unlearn::synthetic::{planted_clusters, SyntheticConfig};
use rec_unlearn::unlearn::{PipelineConfig, PipelineState, UnlearnRequest};

fn main() -> rec_unlearn::Result<()> {
    let data = planted_clusters(&SyntheticConfig::default())?;
    let split = split(&data, &SplitSpec::default())?;
    println!(
        "{} users, {} items, {} training interactions",
        data.num_users(),
        data.num_items(),
        split.train.len()
    );

    let mut cfg = PipelineConfig::default();
    cfg.model.dim = 32;
    cfg.model.max_epochs = 60;
    cfg.partition.num_shards = 5;
    cfg.aggregator.max_epochs = 5;

    let mut state = PipelineState::build(split, cfg)?;
    let before = state.evaluate()?;
    println!("before: Recall@20 {:.4}  NDCG@20 {:.4}", before.recall_at(20), before.ndcg_at(20));

    let target = state.train().interactions()[42];
    let old = state.submodels().to_vec();
    let report = state.unlearn(&UnlearnRequest::new(target))?;
    let changed: Vec<usize> = (0..state.num_shards())
        .filter(|&i| state.submodels()[i] != old[i])
        .collect();
    println!(
        "removed {target} from shard {}: shard {:.2}s + aggregator {:.2}s; submodels changed: {changed:?}",
        report.shard, report.shard_retrain_seconds, report.aggregator_retrain_seconds
    );

    let after = state.evaluate()?;
    println!("after:  Recall@20 {:.4}  NDCG@20 {:.4}", after.recall_at(20), after.ndcg_at(20));
    Ok(())
}
