//! Train shard submodels once, then compare attention, static and mean
//! aggregation over the same submodels.
//!
//!     cargo run --release --example aggregation_modes

use rec_unlearn::aggregation::AggMode;
use rec_unlearn::dataset::{split, SplitSpec};
use rec_unlearn::synthetic::{planted_clusters, SyntheticConfig};
use rec_unlearn::unlearn::{PipelineConfig, PipelineState};

fn main() -> rec_unlearn::Result<()> {
    let data = planted_clusters(&SyntheticConfig {
        num_users: 400,
        num_items: 300,
        ..SyntheticConfig::default()
    })?;
    let split = split(&data, &SplitSpec::default())?;
    let mut cfg = PipelineConfig::default();
    cfg.model.dim = 32;
    cfg.model.max_epochs = 60;
    cfg.partition.num_shards = 6;
    cfg.aggregator.max_epochs = 10;

    let mut state = PipelineState::build(split, cfg)?;
    for mode in AggMode::ALL {
        let agg_cfg = rec_unlearn::aggregation::AggregatorConfig {
            mode,
            ..state.config().aggregator.clone()
        };
        let report = state.refit_aggregator(agg_cfg)?;
        let m = state.evaluate()?;
        let epochs = report.map_or(0, |r| r.epochs_run);
        println!(
            "{:<10} Recall@20 {:.4}  NDCG@20 {:.4}  ({epochs} epochs)",
            mode.as_str(),
            m.recall_at(20),
            m.ndcg_at(20)
        );
        if let Some(w) = state.aggregator().static_weights() {
            let w: Vec<String> = w.iter().map(|x| format!("{x:.3}")).collect();
            println!("           static weights [{}]", w.join(", "));
        }
    }
    Ok(())
}
