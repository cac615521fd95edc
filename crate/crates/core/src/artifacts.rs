//! On-disk layout of a pipeline run.
//!
//! ```text
//! <dir>/users.idx  items.idx             original id ↔ index maps
//! <dir>/train.tsv  validation.tsv  test.tsv
//! <dir>/pretrained.ckpt                  partition embeddings (optional)
//! <dir>/assignment.txt                   shard assignment
//! <dir>/shard_<i>.ckpt                   submodel tables
//! <dir>/aggregator.ckpt                  aggregation parameters
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::dataset::{Dataset, IdMap, Split};
use crate::error::{Error, Result};
use crate::models::checkpoint::{read_table, write_table};
use crate::models::EmbeddingTable;
use crate::partition::PretrainedEmbeddings;

pub const USERS: &str = "users.idx";
pub const ITEMS: &str = "items.idx";
pub const TRAIN: &str = "train.tsv";
pub const VALIDATION: &str = "validation.tsv";
pub const TEST: &str = "test.tsv";
pub const PRETRAINED: &str = "pretrained.ckpt";
pub const ASSIGNMENT: &str = "assignment.txt";
pub const AGGREGATOR: &str = "aggregator.ckpt";
pub const METRICS_TSV: &str = "metrics.tsv";
pub const METRICS_JSON: &str = "metrics.json";
pub const REPORTS: &str = "reports.jsonl";
pub const SUMMARY: &str = "summary.txt";

pub fn shard_file(i: usize) -> String {
    format!("shard_{i}.ckpt")
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn require(path: PathBuf) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::NotFound(format!("artifact {}", path.display())))
    }
}

pub fn write_split(dir: &Path, split: &Split) -> Result<()> {
    ensure_dir(dir)?;
    split.train.user_ids().write(&dir.join(USERS))?;
    split.train.item_ids().write(&dir.join(ITEMS))?;
    split.train.write_tsv(&dir.join(TRAIN))?;
    split.validation.write_tsv(&dir.join(VALIDATION))?;
    split.test.write_tsv(&dir.join(TEST))
}

pub fn read_split(dir: &Path) -> Result<Split> {
    let users = Arc::new(IdMap::read(&require(dir.join(USERS))?)?);
    let items = Arc::new(IdMap::read(&require(dir.join(ITEMS))?)?);
    let read = |name: &str| Dataset::read_tsv(&require(dir.join(name))?, users.clone(), items.clone());
    Ok(Split {
        train: read(TRAIN)?,
        validation: read(VALIDATION)?,
        test: read(TEST)?,
    })
}

pub fn write_pretrained(dir: &Path, emb: &PretrainedEmbeddings, seed: u64) -> Result<()> {
    write_table(&dir.join(PRETRAINED), "wmf", seed, &emb.to_table(), &[])
}

pub fn read_pretrained(dir: &Path, data: &Dataset) -> Result<PretrainedEmbeddings> {
    let (_, table) = read_table(&require(dir.join(PRETRAINED))?)?;
    check_table(&table, data)?;
    Ok(table.into())
}

/// Errors unless `table` covers exactly the users and items of `data`.
pub fn check_table(table: &EmbeddingTable, data: &Dataset) -> Result<()> {
    for (expected, actual) in [
        (data.num_users(), table.num_users()),
        (data.num_items(), table.num_items()),
    ] {
        if expected != actual {
            return Err(Error::DimensionMismatch { expected, actual });
        }
    }
    Ok(())
}

/// Reads `shard_0.ckpt … shard_{k-1}.ckpt`, returning tables and seeds.
pub fn read_shards(dir: &Path, k: usize, data: &Dataset) -> Result<(Vec<EmbeddingTable>, Vec<u64>)> {
    let mut tables = Vec::with_capacity(k);
    let mut seeds = Vec::with_capacity(k);
    for i in 0..k {
        let (header, table) = read_table(&require(dir.join(shard_file(i)))?)?;
        check_table(&table, data)?;
        tables.push(table);
        seeds.push(header.seed);
    }
    Ok((tables, seeds))
}
