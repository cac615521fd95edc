use std::sync::Arc;

use ndarray::Array2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rec_unlearn::aggregation::{AggMode, Aggregator, Theta};
use rec_unlearn::eval::{evaluate, ndcg_at_n, rank_items, recall_at_n};
use rec_unlearn::{Dataset, EmbeddingTable, Interaction};

fn instance(m: usize, n: usize, d: usize, seed: u64, density: f64) -> (EmbeddingTable, Dataset, Dataset) {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let table = EmbeddingTable::gaussian(m, n, d, 1.0, &mut rng);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for u in 0..m as u32 {
        for v in 0..n as u32 {
            let x: f64 = rng.random();
            if x < density {
                train.push(Interaction::new(u, v));
            } else if x < 2.0 * density {
                test.push(Interaction::new(u, v));
            }
        }
    }
    (
        table,
        Dataset::from_interactions(m, n, train).unwrap(),
        Dataset::from_interactions(m, n, test).unwrap(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metrics_bounded_and_monotone(m in 1usize..12, n in 2usize..40, d in 1usize..6, seed in any::<u64>()) {
        let (table, train, test) = instance(m, n, d, seed, 0.2);
        prop_assume!(!test.is_empty());
        let cutoffs = [1, 5, 10, 20, 50];
        let b = evaluate(&table, &train, &test, &cutoffs).unwrap();
        let mut prev = (0.0, 0.0);
        for n in cutoffs {
            let (r, g) = (b.recall_at(n), b.ndcg_at(n));
            prop_assert!((0.0..=1.0).contains(&r) && (0.0..=1.0 + 1e-12).contains(&g));
            prop_assert!(r >= prev.0);
            prev = (r, g);
        }
    }

    #[test]
    fn rankings_skip_training_positives(m in 1usize..6, n in 1usize..30, seed in any::<u64>()) {
        let (table, train, _) = instance(m, n, 3, seed, 0.3);
        for u in 0..m as u32 {
            let ranked = rank_items(&table, u, train.user_items(u)).unwrap();
            prop_assert_eq!(ranked.len(), n - train.user_items(u).len());
            prop_assert!(ranked.iter().all(|v| !train.contains(Interaction::new(u, *v))));
            for w in ranked.windows(2) {
                let (a, b) = (table.score(u as usize, w[0] as usize).unwrap(), table.score(u as usize, w[1] as usize).unwrap());
                prop_assert!(a > b || (a == b && w[0] < w[1]));
            }
        }
    }

    #[test]
    fn per_user_metrics_follow_definitions(len in 1usize..20, rel_mask in any::<u32>(), n in 1usize..25) {
        let ranked: Vec<u32> = (0..len as u32).collect();
        let relevant: Vec<u32> = (0..len as u32).filter(|v| rel_mask >> v & 1 == 1).collect();
        if relevant.is_empty() {
            prop_assert!(recall_at_n(&ranked, &relevant, n).is_none());
            prop_assert!(ndcg_at_n(&ranked, &relevant, n).is_none());
        } else {
            let hits = relevant.iter().filter(|&&v| (v as usize) < n).count();
            prop_assert_eq!(recall_at_n(&ranked, &relevant, n).unwrap(), hits as f64 / relevant.len() as f64);
            let g = ndcg_at_n(&ranked, &relevant, n).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&g));
            prop_assert_eq!(g == 0.0, hits == 0);
        }
    }

    #[test]
    fn attention_weights_form_a_distribution(k in 1usize..6, d in 1usize..5, a in 1usize..4, seed in any::<u64>()) {
        let tables: Vec<Arc<EmbeddingTable>> = (0..k)
            .map(|i| Arc::new(EmbeddingTable::gaussian(3, 4, d, 1.0, &mut ChaCha8Rng::seed_from_u64(seed ^ i as u64))))
            .collect();
        let agg = Aggregator::with_theta(tables.clone(), AggMode::Attention, Theta::initial(k, d, a, 1.0, seed), 0.0).unwrap();
        for e in 0..3 {
            let rows = Array2::from_shape_fn((k, d), |(i, c)| tables[i].users()[[e, c]]);
            let (alpha, beta) = agg.attention_weights(&rows, &rows).unwrap();
            prop_assert!(alpha.iter().chain(beta.iter()).all(|&w| w >= 0.0));
            prop_assert!((alpha.sum() - 1.0).abs() <= 1e-9);
            prop_assert!((beta.sum() - 1.0).abs() <= 1e-9);
        }
    }
}

#[test]
fn perfect_model_scores_one() {
    // Each user's test item outscores every other candidate.
    let p = ndarray::array![[1.0, 0.0], [0.0, 1.0]];
    let q = ndarray::array![[-1.0, -1.0], [1.0, 0.0], [-1.0, -1.0], [0.0, 1.0]];
    let table = EmbeddingTable::new(p, q).unwrap();
    let train = Dataset::from_interactions(2, 4, vec![Interaction::new(0, 0)]).unwrap();
    let test = Dataset::from_interactions(2, 4, vec![Interaction::new(0, 1), Interaction::new(1, 3)]).unwrap();
    let b = evaluate(&table, &train, &test, &[1, 2]).unwrap();
    assert_eq!(b.recall_at(2), 1.0);
    assert_eq!(b.ndcg_at(2), 1.0);
    assert_eq!(b.num_users_evaluated, 2);
}
