//! Unlearning time and utility as the number of shards grows. Shard
//! retraining gets cheaper with more shards; aggregator retraining grows
//! with K, so on small data the total can rise.
//!
//!     cargo run --release --example shard_sweep

use rec_unlearn::dataset::{split, SplitSpec};
use rec_unlearn::synthetic::{planted_clusters, SyntheticConfig};
use rec_unlearn::unlearn::{mean_max, PipelineConfig, PipelineState, UnlearnOptions, UnlearnRequest};

fn main() -> rec_unlearn::Result<()> {
    let data = planted_clusters(&SyntheticConfig {
        num_users: 600,
        num_items: 400,
        min_degree: 10,
        max_degree: 60,
        ..SyntheticConfig::default()
    })?;
    let split = split(&data, &SplitSpec::default())?;
    let requests: Vec<UnlearnRequest> = split.train.interactions()[..5]
        .iter()
        .copied()
        .map(UnlearnRequest::new)
        .collect();

    println!("{:>3}{:>12}{:>12}{:>16}{:>12}", "K", "Recall@20", "shard (s)", "aggregator (s)", "total (s)");
    for k in [2, 4, 8] {
        let mut cfg = PipelineConfig::default();
        cfg.model.dim = 32;
        cfg.model.max_epochs = 60;
        cfg.partition.num_shards = k;
        cfg.aggregator.max_epochs = 5;
        let state = PipelineState::build(split.clone(), cfg)?;
        let recall = state.evaluate()?.recall_at(20);
        let reports = state
            .clone()
            .batch_unlearn(&requests, &UnlearnOptions::default())
            .map_err(|e| e.source)?;
        let (shard, _) = mean_max(reports.iter().map(|r| r.shard_retrain_seconds));
        let (agg, _) = mean_max(reports.iter().map(|r| r.aggregator_retrain_seconds));
        let (total, _) = mean_max(reports.iter().map(|r| r.total_seconds));
        println!("{k:>3}{recall:>12.4}{shard:>12.3}{agg:>16.3}{total:>12.3}");
    }
    Ok(())
}
