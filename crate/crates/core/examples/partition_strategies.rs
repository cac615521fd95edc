//! Compare the four partition strategies on the same training split: shard
//! sizes, how many shards a user's data is spread over, and runtime.
//!
//!     cargo run --release --example partition_strategies

use std::collections::HashSet;
use std::time::Instant;

use rec_unlearn::dataset::{split, SplitSpec};
use rec_unlearn::models::pretrain_for_partition;
use rec_unlearn::partition::{partition, PartitionConfig, Strategy};
use rec_unlearn::synthetic::{planted_clusters, SyntheticConfig};
use rec_unlearn::unlearn::PipelineConfig;

fn main() -> rec_unlearn::Result<()> {
    let data = planted_clusters(&SyntheticConfig {
        num_users: 500,
        num_items: 400,
        ..SyntheticConfig::default()
    })?;
    let train = split(&data, &SplitSpec::default())?.train;
    let emb = pretrain_for_partition(&train, &PipelineConfig::default().pretrain_config())?;
    let cfg = PartitionConfig::with_shards(8);

    println!("{:<8}{:>8}{:>12}{:>22}{:>10}", "strategy", "t", "sizes", "shards per user", "secs");
    for strategy in Strategy::ALL {
        let start = Instant::now();
        let a = partition(strategy, &train, Some(&emb), &cfg)?;
        let secs = start.elapsed().as_secs_f64();
        let sizes: Vec<usize> = (0..a.num_shards()).map(|i| a.shard(i).len()).collect();
        let spread: f64 = train
            .active_users()
            .map(|u| {
                let owners: HashSet<usize> = train
                    .user_items(u)
                    .iter()
                    .map(|&v| a.locate_shard(rec_unlearn::Interaction::new(u, v)).unwrap())
                    .collect();
                owners.len() as f64
            })
            .sum::<f64>()
            / train.active_users().count() as f64;
        println!(
            "{:<8}{:>8}{:>12}{:>22.2}{:>10.2}",
            strategy.to_string(),
            a.capacity(),
            format!("{}-{}", sizes.iter().min().unwrap(), sizes.iter().max().unwrap()),
            spread,
            secs
        );
    }
    Ok(())
}
