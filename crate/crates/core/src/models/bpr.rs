//! Matrix factorisation trained with the pairwise BPR objective.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::adagrad::{self, INITIAL_ACCUMULATOR};
use super::lightgcn::Propagator;
use super::table::{dot, row_slice, row_slice_mut, EmbeddingTable};
use super::{check_trainable, EarlyStopping, TrainConfig, Trained};
use crate::dataset::{Dataset, Interaction};
use crate::error::{Error, Result};

/// A `(user, positive item, sampled negative item)` training example.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Triple {
    pub user: u32,
    pub pos: u32,
    pub neg: u32,
}

/// Uniform draw among items `user` has not interacted with in `data`.
pub(crate) fn sample_negative(data: &Dataset, user: u32, rng: &mut impl Rng) -> Option<u32> {
    let n = data.num_items();
    let seen = data.user_items(user);
    if seen.len() >= n {
        return None;
    }
    loop {
        let v = rng.random_range(0..n as u32);
        if seen.binary_search(&v).is_err() {
            return Some(v);
        }
    }
}

/// One negative per positive, in the order given.
pub fn sample_triples(data: &Dataset, positives: &[Interaction], rng: &mut impl Rng) -> Vec<Triple> {
    positives
        .iter()
        .filter_map(|y| {
            sample_negative(data, y.user, rng).map(|neg| Triple {
                user: y.user,
                pos: y.item,
                neg,
            })
        })
        .collect()
}

#[inline]
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `−ln σ(x)` for `x = p·(q⁺ − q⁻)`, returned with `d/dx`.
#[inline]
pub(crate) fn pairwise_loss(p: &[f64], qi: &[f64], qj: &[f64]) -> (f64, f64) {
    let x = dot(p, qi) - dot(p, qj);
    (softplus(-x), -sigmoid(-x))
}

fn sq_norm(v: &[f64]) -> f64 {
    dot(v, v)
}

/// `Σ −ln σ(ŷ_ui − ŷ_uj) + λ(‖p_u‖² + ‖q_i‖² + ‖q_j‖²)` over `triples`.
pub fn bpr_objective(table: &EmbeddingTable, triples: &[Triple], l2: f64) -> f64 {
    triples
        .iter()
        .map(|t| {
            let p = table.user_slice(t.user as usize);
            let qi = table.item_slice(t.pos as usize);
            let qj = table.item_slice(t.neg as usize);
            let (loss, _) = pairwise_loss(p, qi, qj);
            loss + l2 * (sq_norm(p) + sq_norm(qi) + sq_norm(qj))
        })
        .sum()
}

/// Dense gradient of [`bpr_objective`] with respect to the user and item matrices.
pub fn bpr_gradient(table: &EmbeddingTable, triples: &[Triple], l2: f64) -> (Array2<f64>, Array2<f64>) {
    let d = table.dim();
    let mut gu = Array2::zeros((table.num_users(), d));
    let mut gi = Array2::zeros((table.num_items(), d));
    for &t in triples {
        accumulate_dense(table, t, l2, &mut gu, &mut gi);
    }
    (gu, gi)
}

/// Adds one triple's gradient into dense buffers; returns the unregularised loss.
fn accumulate_dense(
    table: &EmbeddingTable,
    t: Triple,
    l2: f64,
    gu: &mut Array2<f64>,
    gi: &mut Array2<f64>,
) -> f64 {
    let p = table.user_slice(t.user as usize);
    let qi = table.item_slice(t.pos as usize);
    let qj = table.item_slice(t.neg as usize);
    let (loss, g) = pairwise_loss(p, qi, qj);
    let l2x2 = 2.0 * l2;
    add_user_grad(g, p, qi, qj, l2x2, row_slice_mut(gu, t.user as usize));
    add_item_grad(g, p, qi, l2x2, row_slice_mut(gi, t.pos as usize));
    add_item_grad(-g, p, qj, l2x2, row_slice_mut(gi, t.neg as usize));
    loss
}

#[inline]
fn add_user_grad(g: f64, p: &[f64], qi: &[f64], qj: &[f64], l2x2: f64, out: &mut [f64]) {
    for k in 0..p.len() {
        out[k] += g * (qi[k] - qj[k]) + l2x2 * p[k];
    }
}

#[inline]
fn add_item_grad(g: f64, p: &[f64], q: &[f64], l2x2: f64, out: &mut [f64]) {
    for k in 0..p.len() {
        out[k] += g * p[k] + l2x2 * q[k];
    }
}

/// Row-sparse gradient buffer that only clears the rows it touched.
pub(crate) struct RowGrad {
    dim: usize,
    slot: Vec<u32>,
    rows: Vec<u32>,
    data: Vec<f64>,
}

impl RowGrad {
    const EMPTY: u32 = u32::MAX;

    pub(crate) fn new(num_rows: usize, dim: usize) -> Self {
        RowGrad {
            dim,
            slot: vec![Self::EMPTY; num_rows],
            rows: Vec::new(),
            data: Vec::new(),
        }
    }

    pub(crate) fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let mut s = self.slot[r];
        if s == Self::EMPTY {
            s = self.rows.len() as u32;
            self.slot[r] = s;
            self.rows.push(r as u32);
            self.data.resize(self.data.len() + self.dim, 0.0);
        }
        let s = s as usize;
        &mut self.data[s * self.dim..(s + 1) * self.dim]
    }

    pub(crate) fn iter(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.rows
            .iter()
            .zip(self.data.chunks_exact(self.dim))
            .map(|(&r, g)| (r as usize, g))
    }

    pub(crate) fn clear(&mut self) {
        for &r in &self.rows {
            self.slot[r as usize] = Self::EMPTY;
        }
        self.rows.clear();
        self.data.clear();
    }
}

/// Trains BPR-MF with mini-batch Adagrad; early-stops on validation Recall@10.
pub fn train_bpr(train: &Dataset, cfg: &TrainConfig, val: Option<&Dataset>) -> Result<Trained> {
    train_pairwise(train, cfg, val, None)
}

/// Shared BPR loop. With a propagator the loss is taken on propagated
/// embeddings and the gradient is pulled back to the base layer.
pub(crate) fn train_pairwise(
    train: &Dataset,
    cfg: &TrainConfig,
    val: Option<&Dataset>,
    propagator: Option<&Propagator>,
) -> Result<Trained> {
    check_trainable(train, cfg)?;
    let (m, n, d) = (train.num_users(), train.num_items(), cfg.dim);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut base = EmbeddingTable::gaussian(m, n, d, cfg.init_std, &mut rng);
    let mut acc_users = Array2::from_elem((m, d), INITIAL_ACCUMULATOR);
    let mut acc_items = Array2::from_elem((n, d), INITIAL_ACCUMULATOR);
    let mut order: Vec<Interaction> = train.interactions().to_vec();
    let mut stopper = EarlyStopping::new(train, val, cfg.early_stop_patience);
    let mut losses = Vec::new();
    let mut epochs_run = 0;

    let mut user_grad = RowGrad::new(m, d);
    let mut item_grad = RowGrad::new(n, d);
    let mut triples = Vec::with_capacity(cfg.batch_size);
    let lr = cfg.learning_rate;

    for epoch in 1..=cfg.max_epochs {
        epochs_run = epoch;
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut count = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            triples.clear();
            for y in batch {
                if let Some(neg) = sample_negative(train, y.user, &mut rng) {
                    triples.push(Triple {
                        user: y.user,
                        pos: y.item,
                        neg,
                    });
                }
            }
            count += triples.len();
            match propagator {
                None => {
                    user_grad.clear();
                    item_grad.clear();
                    for &t in &triples {
                        let p = base.user_slice(t.user as usize);
                        let qi = base.item_slice(t.pos as usize);
                        let qj = base.item_slice(t.neg as usize);
                        let (loss, g) = pairwise_loss(p, qi, qj);
                        loss_sum += loss;
                        let l2x2 = 2.0 * cfg.l2_reg;
                        add_user_grad(g, p, qi, qj, l2x2, user_grad.row_mut(t.user as usize));
                        add_item_grad(g, p, qi, l2x2, item_grad.row_mut(t.pos as usize));
                        add_item_grad(-g, p, qj, l2x2, item_grad.row_mut(t.neg as usize));
                    }
                    for (r, g) in user_grad.iter() {
                        adagrad::update(
                            lr,
                            row_slice_mut(base.users_mut(), r),
                            row_slice_mut(&mut acc_users, r),
                            g,
                        );
                    }
                    for (r, g) in item_grad.iter() {
                        adagrad::update(
                            lr,
                            row_slice_mut(base.items_mut(), r),
                            row_slice_mut(&mut acc_items, r),
                            g,
                        );
                    }
                }
                Some(prop) => {
                    let (gu, gi, loss) = propagated_gradient(prop, &base, &triples, cfg.l2_reg);
                    loss_sum += loss;
                    adagrad::update(
                        lr,
                        base.users_mut().as_slice_mut().expect("standard layout"),
                        acc_users.as_slice_mut().expect("standard layout"),
                        gu.as_slice().expect("standard layout"),
                    );
                    adagrad::update(
                        lr,
                        base.items_mut().as_slice_mut().expect("standard layout"),
                        acc_items.as_slice_mut().expect("standard layout"),
                        gi.as_slice().expect("standard layout"),
                    );
                }
            }
        }
        if !base.is_finite() {
            return Err(Error::NonFinite("model parameters"));
        }
        losses.push(if count > 0 { loss_sum / count as f64 } else { 0.0 });
        let stop = stopper.observe(epoch, || match propagator {
            Some(p) => p.propagate(&base),
            None => base.clone(),
        });
        if stop {
            break;
        }
    }

    let last = match propagator {
        Some(p) => p.propagate(&base),
        None => base,
    };
    Ok(stopper.finish(last, epochs_run, losses))
}

/// Gradient of the BPR loss on propagated embeddings with respect to the
/// base layer, plus L2 on the base rows of each triple. Returns the loss too.
pub(crate) fn propagated_gradient(
    prop: &Propagator,
    base: &EmbeddingTable,
    triples: &[Triple],
    l2: f64,
) -> (Array2<f64>, Array2<f64>, f64) {
    let out = prop.propagate(base);
    let d = base.dim();
    let mut gu = Array2::zeros((base.num_users(), d));
    let mut gi = Array2::zeros((base.num_items(), d));
    let mut loss_sum = 0.0;
    for &t in triples {
        loss_sum += accumulate_dense(&out, t, 0.0, &mut gu, &mut gi);
    }
    let grad = EmbeddingTable::new(gu, gi).expect("finite gradient");
    let (mut gu, mut gi) = prop.propagate(&grad).into_parts();
    let l2x2 = 2.0 * l2;
    for &t in triples {
        let (u, i, j) = (t.user as usize, t.pos as usize, t.neg as usize);
        let p = row_slice(base.users(), u);
        for (g, x) in row_slice_mut(&mut gu, u).iter_mut().zip(p) {
            *g += l2x2 * x;
        }
        for r in [i, j] {
            let q = row_slice(base.items(), r);
            for (g, x) in row_slice_mut(&mut gi, r).iter_mut().zip(q) {
                *g += l2x2 * x;
            }
        }
    }
    (gu, gi, loss_sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelKind;

    fn toy() -> Dataset {
        Dataset::from_interactions(2, 2, [Interaction::new(0, 0), Interaction::new(1, 1)]).unwrap()
    }

    fn cfg() -> TrainConfig {
        TrainConfig {
            model: ModelKind::Bpr,
            dim: 4,
            batch_size: 2,
            max_epochs: 200,
            init_std: 0.1,
            seed: 7,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn learns_each_users_liked_item() {
        let t = train_bpr(&toy(), &cfg(), None).unwrap().table;
        assert!(t.score(0, 0).unwrap() > t.score(0, 1).unwrap());
        assert!(t.score(1, 1).unwrap() > t.score(1, 0).unwrap());
    }

    #[test]
    fn same_seed_same_table() {
        let a = train_bpr(&toy(), &cfg(), None).unwrap().table;
        let b = train_bpr(&toy(), &cfg(), None).unwrap().table;
        assert_eq!(a, b);
        let c = train_bpr(&toy(), &cfg().with_seed(8), None).unwrap().table;
        assert_ne!(a, c);
    }

    #[test]
    fn small_gradient_step_lowers_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let table = EmbeddingTable::gaussian(3, 4, 3, 0.5, &mut rng);
        let triples = [
            Triple { user: 0, pos: 1, neg: 2 },
            Triple { user: 2, pos: 0, neg: 3 },
            Triple { user: 1, pos: 3, neg: 1 },
        ];
        let before = bpr_objective(&table, &triples, 0.01);
        let (gu, gi) = bpr_gradient(&table, &triples, 0.01);
        let stepped =
            EmbeddingTable::new(table.users() - &(&gu * 1e-3), table.items() - &(&gi * 1e-3))
                .unwrap();
        assert!(bpr_objective(&stepped, &triples, 0.01) < before);
    }

    #[test]
    fn empty_train_is_rejected() {
        let d = Dataset::from_interactions(2, 2, []).unwrap();
        assert!(matches!(train_bpr(&d, &cfg(), None), Err(Error::EmptyDataset)));
    }

    #[test]
    fn user_with_every_item_gets_no_negative() {
        let d = Dataset::from_interactions(1, 2, [Interaction::new(0, 0), Interaction::new(0, 1)])
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sample_negative(&d, 0, &mut rng), None);
        // Training still runs; the user simply contributes no triples.
        train_bpr(&d, &TrainConfig { max_epochs: 2, ..cfg() }, None).unwrap();
    }

    #[test]
    fn negatives_avoid_positives() {
        let d = toy();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            assert_eq!(sample_negative(&d, 0, &mut rng), Some(1));
        }
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(softplus(-800.0), 0.0);
        assert_eq!(softplus(800.0), 800.0);
        assert!((sigmoid(-800.0)).abs() < 1e-300);
    }
}
