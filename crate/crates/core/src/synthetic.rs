//! Planted-cluster implicit feedback for tests, examples and benchmarks.
//!
//! Users and items are split into `num_clusters` taste groups. Each user
//! draws a degree uniformly from `[min_degree, max_degree]` and picks that
//! many distinct items, each from the user's own group with probability
//! `in_cluster` and from the whole catalogue otherwise. Within either pool,
//! item popularity follows a power law with exponent `popularity_exponent`.
//! A draw that repeats an already chosen item is followed by a uniform draw.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Interaction};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub num_users: usize,
    pub num_items: usize,
    pub num_clusters: usize,
    pub min_degree: usize,
    pub max_degree: usize,
    pub in_cluster: f64,
    pub popularity_exponent: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            num_users: 200,
            num_items: 200,
            num_clusters: 5,
            min_degree: 5,
            max_degree: 30,
            in_cluster: 0.8,
            popularity_exponent: 0.8,
            seed: 7,
        }
    }
}

impl SyntheticConfig {
    /// Roughly the shape of the MovieLens-1m training split: 6,040 users,
    /// 3,706 items and about 800k interactions.
    pub fn movielens_1m_like(seed: u64) -> Self {
        SyntheticConfig {
            num_users: 6040,
            num_items: 3706,
            num_clusters: 10,
            min_degree: 20,
            max_degree: 250,
            in_cluster: 0.6,
            popularity_exponent: 0.9,
            seed,
        }
    }
}

fn power_law_weights(len: usize, exponent: f64) -> Vec<f64> {
    (0..len).map(|r| 1.0 / ((r + 1) as f64).powf(exponent)).collect()
}

/// Generates the dataset described by `cfg`, with identity id maps.
pub fn planted_clusters(cfg: &SyntheticConfig) -> Result<Dataset> {
    if cfg.num_users == 0 || cfg.num_items == 0 || cfg.num_clusters == 0 {
        return Err(Error::config("synthetic sizes must be positive"));
    }
    if cfg.num_clusters > cfg.num_items {
        return Err(Error::config("more clusters than items"));
    }
    if cfg.min_degree == 0 || cfg.min_degree > cfg.max_degree || cfg.max_degree > cfg.num_items {
        return Err(Error::config(
            "need 1 <= min_degree <= max_degree <= num_items",
        ));
    }
    if !(0.0..=1.0).contains(&cfg.in_cluster) {
        return Err(Error::config("in_cluster must lie in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // Random item order so popularity is not tied to the index.
    let mut items: Vec<u32> = (0..cfg.num_items as u32).collect();
    items.shuffle(&mut rng);
    let groups: Vec<Vec<u32>> = (0..cfg.num_clusters)
        .map(|c| items.iter().copied().skip(c).step_by(cfg.num_clusters).collect())
        .collect();
    let sampler = |pool: &[u32]| {
        WeightedIndex::new(power_law_weights(pool.len(), cfg.popularity_exponent))
            .expect("positive weights")
    };
    let global = sampler(&items);
    let local: Vec<WeightedIndex<f64>> = groups.iter().map(|g| sampler(g)).collect();

    let mut pairs = Vec::new();
    let mut chosen = Vec::new();
    for u in 0..cfg.num_users as u32 {
        let c = u as usize % cfg.num_clusters;
        let degree = rng.random_range(cfg.min_degree..=cfg.max_degree);
        chosen.clear();
        let mut rejected = false;
        while chosen.len() < degree {
            // After a repeat, draw uniformly so saturated pools cannot stall.
            let v = if rejected {
                rng.random_range(0..cfg.num_items as u32)
            } else if rng.random_bool(cfg.in_cluster) {
                groups[c][local[c].sample(&mut rng)]
            } else {
                items[global.sample(&mut rng)]
            };
            rejected = chosen.contains(&v);
            if !rejected {
                chosen.push(v);
            }
        }
        pairs.extend(chosen.iter().map(|&v| Interaction::new(u, v)));
    }
    Dataset::from_interactions(cfg.num_users, cfg.num_items, pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn respects_degree_bounds_and_is_deterministic() {
        let cfg = SyntheticConfig::default();
        let a = planted_clusters(&cfg).unwrap();
        for u in 0..cfg.num_users as u32 {
            let d = a.user_items(u).len();
            assert!((cfg.min_degree..=cfg.max_degree).contains(&d));
        }
        assert_eq!(a, planted_clusters(&cfg).unwrap());
        let b = planted_clusters(&SyntheticConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn rejects_bad_shapes() {
        let bad = SyntheticConfig {
            max_degree: 500,
            ..SyntheticConfig::default()
        };
        assert!(planted_clusters(&bad).is_err());
    }
}
