//! Weighted matrix factorisation over the whole implicit matrix.
//!
//! The loss treats every unobserved pair as a negative with uniform weight
//! `c0`:
//!
//! ```text
//! L = Σ_{(u,v) ∈ Y} (1 − ŷ_uv)² + c0 Σ_{(u,v) ∉ Y} ŷ_uv² + λ(‖P‖² + ‖Q‖²)
//! ```
//!
//! Splitting the unobserved sum as "all pairs minus observed pairs" gives
//!
//! ```text
//! L = Σ_{(u,v) ∈ Y} [(1 − c0) ŷ_uv² − 2 ŷ_uv + 1] + c0 Σ_u p_uᵀ (QᵀQ) p_u + λ(…)
//! ```
//!
//! which costs `O(|Y|·d + (m + n)·d²)` instead of `O(m·n·d)`.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adagrad::{self, INITIAL_ACCUMULATOR};
use super::table::{dot, row_slice, row_slice_mut, EmbeddingTable};
use super::{check_trainable, EarlyStopping, TrainConfig, Trained};
use crate::dataset::Dataset;
use crate::error::{Error, Result};

fn gram(m: &Array2<f64>) -> Array2<f64> {
    m.t().dot(m)
}

/// Whole-data WMF objective via the Gram reformulation.
pub fn wmf_objective(table: &EmbeddingTable, data: &Dataset, c0: f64, l2: f64) -> f64 {
    let gq = gram(table.items());
    let mut loss = 0.0;
    for y in data.interactions() {
        let s = dot(table.user_slice(y.user as usize), table.item_slice(y.item as usize));
        loss += (1.0 - c0) * s * s - 2.0 * s + 1.0;
    }
    let gp = gram(table.users());
    loss += c0 * (&gp * &gq).sum();
    let reg = table.users().iter().chain(table.items().iter()).map(|x| x * x).sum::<f64>();
    loss + l2 * reg
}

/// Gradient of [`wmf_objective`] with respect to `(P, Q)`.
pub fn wmf_gradient(
    table: &EmbeddingTable,
    data: &Dataset,
    c0: f64,
    l2: f64,
) -> (Array2<f64>, Array2<f64>) {
    let users: Vec<u32> = (0..table.num_users() as u32).collect();
    let (gu, gi) = batch_gradient(table, data, &users, c0, l2, 1.0);
    let mut full_u = Array2::zeros(table.users().raw_dim());
    for (row, &u) in users.iter().enumerate() {
        full_u.row_mut(u as usize).assign(&gu.row(row));
    }
    (full_u, gi)
}

/// Gradient of the loss restricted to `batch` users, with the item L2 term
/// scaled by `item_reg_share`. Returns (rows for `batch` in order, all items).
fn batch_gradient(
    table: &EmbeddingTable,
    data: &Dataset,
    batch: &[u32],
    c0: f64,
    l2: f64,
    item_reg_share: f64,
) -> (Array2<f64>, Array2<f64>) {
    let d = table.dim();
    let p = table.users();
    let q = table.items();
    let gq = gram(q);
    let batch_rows = p.select(Axis(0), &batch.iter().map(|&u| u as usize).collect::<Vec<_>>());
    let gp_batch = gram(&batch_rows);

    // c0 · 2 (QᵀQ) p_u for each batch user.
    let mut grad_users = batch_rows.dot(&gq) * (2.0 * c0);
    // c0 · 2 (P_Bᵀ P_B) q_v for every item.
    let mut grad_items = q.dot(&gp_batch) * (2.0 * c0);

    for (row, &u) in batch.iter().enumerate() {
        let pu = row_slice(p, u as usize);
        for &v in data.user_items(u) {
            let qv = row_slice(q, v as usize);
            let s = dot(pu, qv);
            let coef = 2.0 * (1.0 - c0) * s - 2.0;
            let gu = row_slice_mut(&mut grad_users, row);
            for k in 0..d {
                gu[k] += coef * qv[k];
            }
            let gv = row_slice_mut(&mut grad_items, v as usize);
            for k in 0..d {
                gv[k] += coef * pu[k];
            }
        }
        let gu = row_slice_mut(&mut grad_users, row);
        for k in 0..d {
            gu[k] += 2.0 * l2 * pu[k];
        }
    }
    grad_items.scaled_add(2.0 * l2 * item_reg_share, q);
    (grad_users, grad_items)
}

/// Trains WMF with Adagrad on user mini-batches: each step updates the batch
/// users and all items using the batch's share of the whole-data loss.
pub fn train_wmf(train: &Dataset, cfg: &TrainConfig, val: Option<&Dataset>) -> Result<Trained> {
    check_trainable(train, cfg)?;
    let (m, n, d) = (train.num_users(), train.num_items(), cfg.dim);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut table = EmbeddingTable::gaussian(m, n, d, cfg.init_std, &mut rng);
    let mut acc_users = Array2::from_elem((m, d), INITIAL_ACCUMULATOR);
    let mut acc_items = Array2::from_elem((n, d), INITIAL_ACCUMULATOR);
    let mut users: Vec<u32> = (0..m as u32).collect();
    let mut stopper = EarlyStopping::new(train, val, cfg.early_stop_patience);
    let mut losses = Vec::new();
    let mut epochs_run = 0;
    let c0 = cfg.negative_weight;

    for epoch in 1..=cfg.max_epochs {
        epochs_run = epoch;
        users.shuffle(&mut rng);
        for batch in users.chunks(cfg.batch_size) {
            let share = batch.len() as f64 / m as f64;
            let (gu, gi) = batch_gradient(&table, train, batch, c0, cfg.l2_reg, share);
            for (row, &u) in batch.iter().enumerate() {
                adagrad::update(
                    cfg.learning_rate,
                    row_slice_mut(table.users_mut(), u as usize),
                    row_slice_mut(&mut acc_users, u as usize),
                    row_slice(&gu, row),
                );
            }
            adagrad::update(
                cfg.learning_rate,
                table.items_mut().as_slice_mut().expect("standard layout"),
                acc_items.as_slice_mut().expect("standard layout"),
                gi.as_slice().expect("standard layout"),
            );
        }
        if !table.is_finite() {
            return Err(Error::NonFinite("model parameters"));
        }
        losses.push(wmf_objective(&table, train, c0, cfg.l2_reg) / (m * n) as f64);
        if stopper.observe(epoch, || table.clone()) {
            break;
        }
    }
    Ok(stopper.finish(table, epochs_run, losses))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Interaction;
    use crate::models::ModelKind;

    #[test]
    fn single_pair_without_negatives_fits_one() {
        let d = Dataset::from_interactions(1, 1, [Interaction::new(0, 0)]).unwrap();
        let cfg = TrainConfig {
            model: ModelKind::Wmf,
            dim: 1,
            negative_weight: 0.0,
            l2_reg: 0.0,
            init_std: 0.5,
            max_epochs: 3000,
            learning_rate: 0.1,
            ..TrainConfig::default()
        };
        let t = train_wmf(&d, &cfg, None).unwrap().table;
        let s = t.score(0, 0).unwrap();
        assert!((s - 1.0).abs() < 1e-3, "score {s}");
    }

    #[test]
    fn deterministic_under_seed() {
        let d = Dataset::from_interactions(
            3,
            3,
            [(0, 0), (1, 1), (2, 2), (0, 2)].map(|(u, v)| Interaction::new(u, v)),
        )
        .unwrap();
        let cfg = TrainConfig {
            model: ModelKind::Wmf,
            dim: 2,
            batch_size: 2,
            max_epochs: 10,
            ..TrainConfig::default()
        };
        let a = train_wmf(&d, &cfg, None).unwrap();
        let b = train_wmf(&d, &cfg, None).unwrap();
        assert_eq!(a.table, b.table);
        assert_eq!(a.epoch_losses, b.epoch_losses);
    }

    #[test]
    fn loss_decreases_over_training() {
        let d = Dataset::from_interactions(
            4,
            5,
            [(0, 0), (0, 1), (1, 1), (2, 3), (3, 4), (3, 0)].map(|(u, v)| Interaction::new(u, v)),
        )
        .unwrap();
        let cfg = TrainConfig {
            model: ModelKind::Wmf,
            dim: 3,
            batch_size: 2,
            max_epochs: 50,
            init_std: 0.1,
            ..TrainConfig::default()
        };
        let out = train_wmf(&d, &cfg, None).unwrap();
        assert!(out.epoch_losses.last().unwrap() < &out.epoch_losses[0]);
    }
}
