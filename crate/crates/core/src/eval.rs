//! Full-ranking Top-N evaluation.
//!
//! Every item a user did not interact with in training is a candidate; the
//! held-out interactions are the relevant set. Ties in score are broken by
//! ascending item index.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::models::EmbeddingTable;

pub const DEFAULT_CUTOFFS: [usize; 3] = [10, 20, 50];

const USER_BLOCK: usize = 256;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricBundle {
    pub recall: BTreeMap<usize, f64>,
    pub ndcg: BTreeMap<usize, f64>,
    pub num_users_evaluated: usize,
}

impl MetricBundle {
    pub fn recall_at(&self, n: usize) -> f64 {
        self.recall.get(&n).copied().unwrap_or(f64::NAN)
    }

    pub fn ndcg_at(&self, n: usize) -> f64 {
        self.ndcg.get(&n).copied().unwrap_or(f64::NAN)
    }

    /// `metric\tcutoff\tvalue` lines.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (n, v) in &self.recall {
            let _ = writeln!(out, "recall\t{n}\t{v:.6}");
        }
        for (n, v) in &self.ndcg {
            let _ = writeln!(out, "ndcg\t{n}\t{v:.6}");
        }
        out
    }

    pub fn write(&self, tsv: &Path, json: &Path) -> Result<()> {
        std::fs::write(tsv, self.to_tsv()).map_err(|e| Error::io(tsv, e))?;
        let body = serde_json::to_string_pretty(self).expect("metrics serialise");
        std::fs::write(json, body).map_err(|e| Error::io(json, e))
    }
}

/// Descending score, then ascending item index.
#[inline]
fn rank_order(a: &(f64, u32), b: &(f64, u32)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

/// Scores of `users` against every item, one row per user.
fn score_block(table: &EmbeddingTable, users: &[u32]) -> Array2<f64> {
    let idx: Vec<usize> = users.iter().map(|&u| u as usize).collect();
    let scores = table.users().select(Axis(0), &idx).dot(&table.items().t());
    // The product can come back column-major when a dimension is 1.
    if scores.is_standard_layout() {
        scores
    } else {
        scores.as_standard_layout().into_owned()
    }
}

fn top_n(scores: &[f64], exclude: &[u32], n: usize) -> Vec<u32> {
    let mut cand: Vec<(f64, u32)> = scores
        .iter()
        .enumerate()
        .filter(|(v, _)| exclude.binary_search(&(*v as u32)).is_err())
        .map(|(v, &s)| (s, v as u32))
        .collect();
    if n < cand.len() {
        cand.select_nth_unstable_by(n, rank_order);
        cand.truncate(n);
    }
    cand.sort_unstable_by(rank_order);
    cand.into_iter().map(|(_, v)| v).collect()
}

/// All items not in `exclude` (sorted), best first.
pub fn rank_items(table: &EmbeddingTable, user: u32, exclude: &[u32]) -> Result<Vec<u32>> {
    if user as usize >= table.num_users() {
        return Err(Error::OutOfRange {
            what: "user",
            index: user as usize,
            len: table.num_users(),
        });
    }
    let scores = score_block(table, &[user]);
    Ok(top_n(
        scores.as_slice().expect("standard layout"),
        exclude,
        table.num_items(),
    ))
}

/// Fraction of `relevant` (sorted) found in the first `n` of `ranked`.
/// `None` when there is nothing relevant.
pub fn recall_at_n(ranked: &[u32], relevant: &[u32], n: usize) -> Option<f64> {
    if relevant.is_empty() {
        return None;
    }
    let hits = ranked
        .iter()
        .take(n)
        .filter(|v| relevant.binary_search(v).is_ok())
        .count();
    Some(hits as f64 / relevant.len() as f64)
}

/// Binary-gain NDCG over the first `n` positions, normalised by the ideal
/// ordering of `min(|relevant|, n)` hits.
pub fn ndcg_at_n(ranked: &[u32], relevant: &[u32], n: usize) -> Option<f64> {
    if relevant.is_empty() {
        return None;
    }
    let dcg: f64 = ranked
        .iter()
        .take(n)
        .enumerate()
        .filter(|(_, v)| relevant.binary_search(v).is_ok())
        .map(|(r, _)| 1.0 / ((r + 2) as f64).log2())
        .sum();
    let ideal: f64 = (0..relevant.len().min(n))
        .map(|r| 1.0 / ((r + 2) as f64).log2())
        .sum();
    Some(dcg / ideal)
}

/// Mean Recall@N and NDCG@N over users with at least one test interaction,
/// ranking all items except the user's training positives.
pub fn evaluate(
    table: &EmbeddingTable,
    train: &Dataset,
    test: &Dataset,
    cutoffs: &[usize],
) -> Result<MetricBundle> {
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if table.num_users() != test.num_users() {
        return Err(Error::DimensionMismatch {
            expected: test.num_users(),
            actual: table.num_users(),
        });
    }
    if table.num_items() != test.num_items() {
        return Err(Error::DimensionMismatch {
            expected: test.num_items(),
            actual: table.num_items(),
        });
    }
    if cutoffs.is_empty() || cutoffs.contains(&0) {
        return Err(Error::config("cutoffs must be positive"));
    }
    let max_n = *cutoffs.iter().max().expect("non-empty");
    let users: Vec<u32> = test.active_users().collect();

    let partials: Vec<(Vec<f64>, Vec<f64>)> = users
        .par_chunks(USER_BLOCK)
        .map(|block| {
            let scores = score_block(table, block);
            let mut recall = vec![0.0; cutoffs.len()];
            let mut ndcg = vec![0.0; cutoffs.len()];
            for (row, &u) in block.iter().enumerate() {
                let s = scores.row(row);
                let ranked = top_n(
                    s.as_slice().expect("standard layout"),
                    train.user_items(u),
                    max_n,
                );
                let relevant = test.user_items(u);
                for (c, &n) in cutoffs.iter().enumerate() {
                    recall[c] += recall_at_n(&ranked, relevant, n).expect("active user");
                    ndcg[c] += ndcg_at_n(&ranked, relevant, n).expect("active user");
                }
            }
            (recall, ndcg)
        })
        .collect();

    let count = users.len() as f64;
    let mut bundle = MetricBundle {
        num_users_evaluated: users.len(),
        ..Default::default()
    };
    for (c, &n) in cutoffs.iter().enumerate() {
        let r: f64 = partials.iter().map(|p| p.0[c]).sum();
        let g: f64 = partials.iter().map(|p| p.1[c]).sum();
        bundle.recall.insert(n, r / count);
        bundle.ndcg.insert(n, g / count);
    }
    Ok(bundle)
}

/// Recall@`n` on `val`; zero when no user has validation interactions.
pub(crate) fn validation_recall(
    table: &EmbeddingTable,
    train: &Dataset,
    val: &Dataset,
    n: usize,
) -> f64 {
    match evaluate(table, train, val, &[n]) {
        Ok(b) => b.recall_at(n),
        Err(_) => 0.0,
    }
}
