//! Save a trained pipeline, reload it, and continue unlearning from disk.
//!
//!     cargo run --release --example checkpoints [DIR]

use std::path::PathBuf;

use rec_unlearn::dataset::{split, SplitSpec};
use rec_unlearn::synthetic::{planted_clusters, SyntheticConfig};
use rec_unlearn::unlearn::{PipelineConfig, PipelineState, UnlearnRequest};

fn main() -> rec_unlearn::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("rec-unlearn-checkpoints"));
    let data = planted_clusters(&SyntheticConfig::default())?;
    let mut cfg = PipelineConfig::default();
    cfg.model.dim = 16;
    cfg.model.max_epochs = 40;
    cfg.partition.num_shards = 4;
    cfg.aggregator.max_epochs = 3;

    let state = PipelineState::build(split(&data, &SplitSpec::default())?, cfg.clone())?;
    state.save(&dir)?;
    let mut files: Vec<String> = std::fs::read_dir(&dir)
        .map_err(|e| rec_unlearn::Error::Io { path: dir.clone(), source: e })?
        .filter_map(|e| e.ok()?.file_name().into_string().ok())
        .collect();
    files.sort();
    println!("wrote {}: {}", dir.display(), files.join(" "));

    let mut reloaded = PipelineState::load(&dir, cfg)?;
    let a = state.evaluate()?.recall_at(20);
    let b = reloaded.evaluate()?.recall_at(20);
    println!("Recall@20 in memory {a:.4}, reloaded {b:.4}");

    let target = reloaded.train().interactions()[0];
    let report = reloaded.unlearn(&UnlearnRequest::new(target))?;
    reloaded.save(&dir)?;
    println!("unlearned {target} from shard {} and saved", report.shard);
    Ok(())
}
