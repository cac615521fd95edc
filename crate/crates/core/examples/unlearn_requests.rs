//! Batch deletion: coalescing same-shard requests, the two seed policies,
//! and a full-retrain baseline for comparison.
//!
//!     cargo run --release --example unlearn_requests

use rec_unlearn::dataset::{split, SplitSpec};
use rec_unlearn::synthetic::{planted_clusters, SyntheticConfig};
use rec_unlearn::unlearn::{summary_table, PipelineConfig, PipelineState, SeedPolicy, UnlearnOptions, UnlearnRequest};

fn main() -> rec_unlearn::Result<()> {
    let data = planted_clusters(&SyntheticConfig::default())?;
    let split = split(&data, &SplitSpec::default())?;
    let mut cfg = PipelineConfig::default();
    cfg.model.dim = 32;
    cfg.model.max_epochs = 60;
    cfg.partition.num_shards = 5;
    cfg.aggregator.max_epochs = 5;
    let state = PipelineState::build(split, cfg)?;

    // Three deletions from shard 0 in a row, then one from shard 1.
    let mut targets: Vec<_> = state.shard_data(0).interactions()[..3].to_vec();
    targets.push(state.shard_data(1).interactions()[0]);
    let requests: Vec<UnlearnRequest> = targets.iter().copied().map(UnlearnRequest::new).collect();

    let mut one_by_one = state.clone();
    let plain = one_by_one
        .batch_unlearn(&requests, &UnlearnOptions::default())
        .map_err(|e| e.source)?;
    let mut merged_state = state.clone();
    let coalesce = UnlearnOptions {
        coalesce_same_shard: true,
        ..UnlearnOptions::default()
    };
    let merged = merged_state.batch_unlearn(&requests, &coalesce).map_err(|e| e.source)?;
    println!(
        "{} retrains one by one, {} coalesced; same final model: {}",
        plain.len(),
        merged.len(),
        one_by_one.aggregator().theta() == merged_state.aggregator().theta()
    );

    let mut fresh = state.clone();
    let fresh_req = UnlearnRequest {
        target: targets[0],
        seed_policy: SeedPolicy::Fresh,
    };
    fresh.unlearn(&fresh_req)?;
    println!(
        "fresh seed for shard 0: {} -> {}",
        state.shard_seeds()[0],
        fresh.shard_seeds()[0]
    );

    let mut reports = plain;
    reports.push(state.full_retrain_baseline(&requests[0])?);
    print!("{}", summary_table(&reports));
    Ok(())
}
