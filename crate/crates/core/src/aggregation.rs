//! Combining K shard submodels into one model.
//!
//! Each shard's embeddings are first mapped into a shared space by a per-shard
//! affine transfer `t = W_i e + b_i` (the same map for users and items). An
//! entity's final embedding is then a convex combination of its K transferred
//! rows. The weights come from one of three schemes:
//!
//! * `attention`: `α_i ∝ exp(hᵀ relu(W t_i + b))`, with separate networks
//!   `(W1, b1, h1)` for users and `(W2, b2, h2)` for items, so every user and
//!   every item gets its own weighting;
//! * `static`: one learned softmax-normalised weight per shard, shared by
//!   all entities;
//! * `mean`: uniform `1/K`.
//!
//! Training only touches the aggregation parameters; the submodel tables are
//! shared read-only through `Arc` and never written.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use ndarray::{concatenate, Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval;
use crate::models::checkpoint::{read_f32s, write_f32s};
use crate::models::{
    adagrad_update, dot, sample_negative, sigmoid, softplus, EmbeddingTable, ModelKind, Triple,
    INITIAL_ACCUMULATOR,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggMode {
    #[default]
    Attention,
    Mean,
    Static,
}

impl AggMode {
    pub const ALL: [AggMode; 3] = [AggMode::Attention, AggMode::Mean, AggMode::Static];

    pub fn as_str(self) -> &'static str {
        match self {
            AggMode::Attention => "attention",
            AggMode::Mean => "mean",
            AggMode::Static => "static",
        }
    }
}

impl fmt::Display for AggMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AggMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "attention" => Ok(AggMode::Attention),
            "mean" => Ok(AggMode::Mean),
            "static" => Ok(AggMode::Static),
            other => Err(Error::config(format!(
                "unknown aggregation mode `{other}` (expected attention, mean or static)"
            ))),
        }
    }
}

/// Loss used to fit the aggregator; follows the base model family.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggLoss {
    /// BPR over (user, positive, sampled negative) triples.
    #[default]
    Pairwise,
    /// Whole-matrix weighted squared loss, as in WMF.
    Pointwise,
}

impl AggLoss {
    pub fn for_model(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Wmf => AggLoss::Pointwise,
            ModelKind::Bpr | ModelKind::LightGcn => AggLoss::Pairwise,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregatorConfig {
    pub mode: AggMode,
    pub attention_dim: usize,
    pub loss: AggLoss,
    pub learning_rate: f64,
    /// Users per optimisation step; each step covers all their positives.
    pub batch_users: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub l2_reg: f64,
    pub init_std: f64,
    /// Weight of unobserved entries for the pointwise loss.
    pub negative_weight: f64,
    /// Keep every transfer at its initial value during training.
    pub freeze_transfer: bool,
    pub seed: u64,
}

impl Default for AggregatorConfig {
    fn default() -> Self {
        AggregatorConfig {
            mode: AggMode::Attention,
            attention_dim: 32,
            loss: AggLoss::Pairwise,
            learning_rate: 0.05,
            batch_users: 256,
            max_epochs: 10,
            early_stop_patience: 10,
            l2_reg: 1e-5,
            init_std: 0.01,
            negative_weight: 0.05,
            freeze_transfer: false,
            seed: 42,
        }
    }
}

impl AggregatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.attention_dim == 0 {
            return Err(Error::config("attention_dim must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("aggregator learning_rate must be positive"));
        }
        if self.batch_users == 0 || self.max_epochs == 0 || self.early_stop_patience == 0 {
            return Err(Error::config(
                "aggregator batch_users, max_epochs and early_stop_patience must be positive",
            ));
        }
        if self.l2_reg < 0.0 || self.init_std < 0.0 || self.negative_weight < 0.0 {
            return Err(Error::config("aggregator weights must be non-negative"));
        }
        Ok(())
    }
}

/// Per-shard affine maps into the shared space.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferParams {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl TransferParams {
    pub fn identity(num_shards: usize, dim: usize) -> Self {
        TransferParams {
            weights: vec![Array2::eye(dim); num_shards],
            biases: vec![Array1::zeros(dim); num_shards],
        }
    }
}

/// One scoring network `hᵀ relu(W t + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionNet {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub h: Array1<f64>,
}

impl AttentionNet {
    fn gaussian(k: usize, d: usize, std: f64, rng: &mut ChaCha8Rng) -> Self {
        let normal = Normal::new(0.0, std).expect("finite std");
        let mut draw = |len: usize| (0..len).map(|_| normal.sample(rng)).collect::<Vec<f64>>();
        AttentionNet {
            w: Array2::from_shape_vec((k, d), draw(k * d)).expect("sized"),
            b: Array1::from(draw(k)),
            h: Array1::from(draw(k)),
        }
    }

    fn zeros(k: usize, d: usize) -> Self {
        AttentionNet {
            w: Array2::zeros((k, d)),
            b: Array1::zeros(k),
            h: Array1::zeros(k),
        }
    }

    /// Unnormalised score of each row of `t`.
    fn scores(&self, t: &Array2<f64>) -> (Array2<f64>, Array1<f64>) {
        let z = t.dot(&self.w.t()) + &self.b;
        let a = z.mapv(relu).dot(&self.h);
        (z, a)
    }
}

#[inline]
fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TensorGroup {
    Transfer,
    Attention,
    Static,
}

/// All aggregation parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Theta {
    pub transfer: TransferParams,
    pub user_attention: AttentionNet,
    pub item_attention: AttentionNet,
    /// Pre-softmax per-shard weights for static mode.
    pub static_logits: Array1<f64>,
}

impl Theta {
    pub fn initial(num_shards: usize, dim: usize, attention_dim: usize, std: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Theta {
            transfer: TransferParams::identity(num_shards, dim),
            user_attention: AttentionNet::gaussian(attention_dim, dim, std, &mut rng),
            item_attention: AttentionNet::gaussian(attention_dim, dim, std, &mut rng),
            static_logits: Array1::zeros(num_shards),
        }
    }

    pub fn num_shards(&self) -> usize {
        self.transfer.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.user_attention.w.ncols()
    }

    pub fn attention_dim(&self) -> usize {
        self.user_attention.w.nrows()
    }

    fn zeros_like(&self) -> Self {
        let (k, d, a) = (self.num_shards(), self.dim(), self.attention_dim());
        Theta {
            transfer: TransferParams {
                weights: vec![Array2::zeros((d, d)); k],
                biases: vec![Array1::zeros(d); k],
            },
            user_attention: AttentionNet::zeros(a, d),
            item_attention: AttentionNet::zeros(a, d),
            static_logits: Array1::zeros(k),
        }
    }

    fn filled_like(&self, value: f64) -> Self {
        let mut t = self.zeros_like();
        for s in t.tensors_mut() {
            s.fill(value);
        }
        t
    }

    /// Named flat views in a fixed order.
    pub fn tensors(&self) -> Vec<(String, TensorGroup, &[f64])> {
        let mut out: Vec<(String, TensorGroup, &[f64])> = Vec::new();
        for (i, w) in self.transfer.weights.iter().enumerate() {
            out.push((format!("W_{i}"), TensorGroup::Transfer, w.as_slice().expect("standard")));
        }
        for (i, b) in self.transfer.biases.iter().enumerate() {
            out.push((format!("b_{i}"), TensorGroup::Transfer, b.as_slice().expect("standard")));
        }
        for (tag, net) in [("1", &self.user_attention), ("2", &self.item_attention)] {
            out.push((format!("W{tag}"), TensorGroup::Attention, net.w.as_slice().expect("standard")));
            out.push((format!("b{tag}"), TensorGroup::Attention, net.b.as_slice().expect("standard")));
            out.push((format!("h{tag}"), TensorGroup::Attention, net.h.as_slice().expect("standard")));
        }
        out.push((
            "static_logits".into(),
            TensorGroup::Static,
            self.static_logits.as_slice().expect("standard"),
        ));
        out
    }

    /// Mutable views in the same order as [`Theta::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for w in &mut self.transfer.weights {
            out.push(w.as_slice_mut().expect("standard"));
        }
        for b in &mut self.transfer.biases {
            out.push(b.as_slice_mut().expect("standard"));
        }
        for net in [&mut self.user_attention, &mut self.item_attention] {
            out.push(net.w.as_slice_mut().expect("standard"));
            out.push(net.b.as_slice_mut().expect("standard"));
            out.push(net.h.as_slice_mut().expect("standard"));
        }
        out.push(self.static_logits.as_slice_mut().expect("standard"));
        out
    }

    fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, _, s)| s.iter().all(|x| x.is_finite()))
    }

    fn same_shape(&self, other: &Theta) -> bool {
        let a = self.tensors();
        let b = other.tensors();
        a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.2.len() == y.2.len())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Side {
    User,
    Item,
}

/// Cached forward pass for a set of entities on one side.
struct SideForward {
    x: Vec<Array2<f64>>,
    t: Vec<Array2<f64>>,
    z: Vec<Array2<f64>>,
    /// `entities × K`.
    alpha: Array2<f64>,
    out: Array2<f64>,
}

/// One optimisation batch for [`Aggregator::loss_and_gradient`].
pub enum AggBatch<'a> {
    Pairwise(&'a [Triple]),
    Pointwise {
        data: &'a Dataset,
        users: &'a [u32],
        negative_weight: f64,
    },
}

#[derive(Clone, Debug)]
pub struct Aggregator {
    mode: AggMode,
    theta: Theta,
    l2_reg: f64,
    freeze_transfer: bool,
    tables: Vec<Arc<EmbeddingTable>>,
}

fn check_tables(tables: &[Arc<EmbeddingTable>]) -> Result<()> {
    let first = tables
        .first()
        .ok_or_else(|| Error::NotFound("submodel table".into()))?;
    for t in &tables[1..] {
        for (expected, actual) in [
            (first.dim(), t.dim()),
            (first.num_users(), t.num_users()),
            (first.num_items(), t.num_items()),
        ] {
            if expected != actual {
                return Err(Error::DimensionMismatch { expected, actual });
            }
        }
    }
    Ok(())
}

impl Aggregator {
    /// Fresh aggregator: identity transfers, Gaussian attention networks,
    /// zero static logits.
    pub fn new(tables: Vec<Arc<EmbeddingTable>>, cfg: &AggregatorConfig) -> Result<Self> {
        cfg.validate()?;
        check_tables(&tables)?;
        let theta = Theta::initial(
            tables.len(),
            tables[0].dim(),
            cfg.attention_dim,
            cfg.init_std,
            cfg.seed,
        );
        Ok(Aggregator {
            mode: cfg.mode,
            theta,
            l2_reg: cfg.l2_reg,
            freeze_transfer: cfg.freeze_transfer,
            tables,
        })
    }

    pub fn with_theta(
        tables: Vec<Arc<EmbeddingTable>>,
        mode: AggMode,
        theta: Theta,
        l2_reg: f64,
    ) -> Result<Self> {
        check_tables(&tables)?;
        let mut agg = Aggregator {
            mode,
            theta: Theta::initial(tables.len(), tables[0].dim(), theta.attention_dim(), 0.0, 0),
            l2_reg,
            freeze_transfer: false,
            tables,
        };
        agg.set_theta(theta)?;
        Ok(agg)
    }

    pub fn mode(&self) -> AggMode {
        self.mode
    }

    pub fn theta(&self) -> &Theta {
        &self.theta
    }

    pub fn set_theta(&mut self, theta: Theta) -> Result<()> {
        if !self.theta.same_shape(&theta) {
            return Err(Error::config("aggregation parameters have the wrong shape"));
        }
        if !theta.is_finite() {
            return Err(Error::NonFinite("aggregation parameters"));
        }
        self.theta = theta;
        Ok(())
    }

    pub fn tables(&self) -> &[Arc<EmbeddingTable>] {
        &self.tables
    }

    pub fn num_shards(&self) -> usize {
        self.tables.len()
    }

    pub fn dim(&self) -> usize {
        self.tables[0].dim()
    }

    pub fn l2_reg(&self) -> f64 {
        self.l2_reg
    }

    /// Normalised static weights (static mode only).
    pub fn static_weights(&self) -> Option<Vec<f64>> {
        (self.mode == AggMode::Static)
            .then(|| softmax(self.theta.static_logits.as_slice().expect("standard")))
    }

    pub fn is_trainable(&self, group: TensorGroup) -> bool {
        match (self.mode, group) {
            (AggMode::Attention, TensorGroup::Attention) => true,
            (AggMode::Attention, TensorGroup::Transfer) => !self.freeze_transfer,
            (AggMode::Static, TensorGroup::Static) => true,
            _ => false,
        }
    }

    fn apply_transfer(&self, i: usize, rows: ArrayView2<'_, f64>) -> Array2<f64> {
        rows.dot(&self.theta.transfer.weights[i].t()) + &self.theta.transfer.biases[i]
    }

    /// Maps every row of `table` through shard `i`'s transfer.
    pub fn transfer(&self, i: usize, table: &EmbeddingTable) -> Result<EmbeddingTable> {
        if i >= self.num_shards() {
            return Err(Error::OutOfRange {
                what: "shard",
                index: i,
                len: self.num_shards(),
            });
        }
        if table.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: table.dim(),
            });
        }
        EmbeddingTable::new(
            self.apply_transfer(i, table.users().view()),
            self.apply_transfer(i, table.items().view()),
        )
    }

    fn weights_from(&self, net: &AttentionNet, rows: &Array2<f64>) -> Result<Array1<f64>> {
        let k = self.num_shards();
        if rows.nrows() != k || rows.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: k * self.dim(),
                actual: rows.len(),
            });
        }
        if rows.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("transferred rows"));
        }
        let w = match self.mode {
            AggMode::Attention => softmax(net.scores(rows).1.as_slice().expect("standard")),
            AggMode::Static => self.static_weights().expect("static mode"),
            AggMode::Mean => vec![1.0 / k as f64; k],
        };
        Ok(Array1::from(w))
    }

    /// Weights over shards for one user (`α`) and one item (`β`), given
    /// their K transferred rows.
    pub fn attention_weights(
        &self,
        user_rows: &Array2<f64>,
        item_rows: &Array2<f64>,
    ) -> Result<(Array1<f64>, Array1<f64>)> {
        Ok((
            self.weights_from(&self.theta.user_attention, user_rows)?,
            self.weights_from(&self.theta.item_attention, item_rows)?,
        ))
    }

    fn forward(&self, side: Side, ids: &[u32]) -> SideForward {
        let k = self.num_shards();
        let idx: Vec<usize> = ids.iter().map(|&e| e as usize).collect();
        let mut x = Vec::with_capacity(k);
        let mut t = Vec::with_capacity(k);
        let mut z = Vec::new();
        let mut logits = Array2::<f64>::zeros((ids.len(), k));
        let net = match side {
            Side::User => &self.theta.user_attention,
            Side::Item => &self.theta.item_attention,
        };
        for (i, table) in self.tables.iter().enumerate() {
            let src = match side {
                Side::User => table.users(),
                Side::Item => table.items(),
            };
            let xi = src.select(Axis(0), &idx);
            let ti = self.apply_transfer(i, xi.view());
            if self.mode == AggMode::Attention {
                let (zi, ai) = net.scores(&ti);
                logits.column_mut(i).assign(&ai);
                z.push(zi);
            }
            x.push(xi);
            t.push(ti);
        }
        let alpha = match self.mode {
            AggMode::Attention => {
                let mut alpha = logits;
                for mut row in alpha.rows_mut() {
                    let w = softmax(row.as_slice().expect("standard"));
                    row.assign(&Array1::from(w));
                }
                alpha
            }
            AggMode::Static => {
                let w = Array1::from(self.static_weights().expect("static mode"));
                Array2::from_shape_fn((ids.len(), k), |(_, i)| w[i])
            }
            AggMode::Mean => Array2::from_elem((ids.len(), k), 1.0 / k as f64),
        };
        let mut out = Array2::zeros((ids.len(), self.dim()));
        for (i, ti) in t.iter().enumerate() {
            out += &(ti * &alpha.column(i).insert_axis(Axis(1)));
        }
        SideForward { x, t, z, alpha, out }
    }

    /// Accumulates into `grad` the gradient flowing from `g`, the gradient of
    /// the loss with respect to this side's aggregated rows.
    fn backward(&self, side: Side, fwd: &SideForward, g: &Array2<f64>, grad: &mut Theta) {
        let k = self.num_shards();
        let s: Vec<Array1<f64>> = fwd.t.iter().map(|ti| (g * ti).sum_axis(Axis(1))).collect();
        let mut sbar = Array1::<f64>::zeros(g.nrows());
        for (i, si) in s.iter().enumerate() {
            sbar += &(si * &fwd.alpha.column(i));
        }
        let train_transfer = self.is_trainable(TensorGroup::Transfer);
        let (net, gnet) = match side {
            Side::User => (&self.theta.user_attention, &mut grad.user_attention),
            Side::Item => (&self.theta.item_attention, &mut grad.item_attention),
        };
        for i in 0..k {
            let ai = fwd.alpha.column(i);
            let dlogit = &ai * &(&s[i] - &sbar);
            let mut dt = g * &ai.insert_axis(Axis(1));
            match self.mode {
                AggMode::Attention => {
                    let zi = &fwd.z[i];
                    let mut dz = zi.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 }) * &net.h;
                    dz *= &dlogit.view().insert_axis(Axis(1));
                    gnet.h += &zi.mapv(relu).t().dot(&dlogit);
                    gnet.w += &dz.t().dot(&fwd.t[i]);
                    gnet.b += &dz.sum_axis(Axis(0));
                    if train_transfer {
                        dt += &dz.dot(&net.w);
                    }
                }
                AggMode::Static => grad.static_logits[i] += dlogit.sum(),
                AggMode::Mean => {}
            }
            if train_transfer {
                grad.transfer.weights[i] += &dt.t().dot(&fwd.x[i]);
                grad.transfer.biases[i] += &dt.sum_axis(Axis(0));
            }
        }
    }

    /// Batch loss plus `λ‖Θ‖²` over the trainable tensors, and its gradient.
    /// Gradients of tensors that are not trainable in this mode are zero.
    pub fn loss_and_gradient(&self, batch: &AggBatch<'_>) -> (f64, Theta) {
        let mut grad = self.theta.zeros_like();
        let mut loss = match batch {
            AggBatch::Pairwise(triples) => self.pairwise(triples, &mut grad),
            AggBatch::Pointwise {
                data,
                users,
                negative_weight,
            } => self.pointwise(data, users, *negative_weight, &mut grad),
        };
        let groups: Vec<TensorGroup> = self.theta.tensors().iter().map(|t| t.1).collect();
        let params: Vec<Vec<f64>> = self.theta.tensors().iter().map(|t| t.2.to_vec()).collect();
        for ((g, group), p) in grad.tensors_mut().into_iter().zip(groups).zip(params) {
            if !self.is_trainable(group) {
                g.fill(0.0);
                continue;
            }
            for (gi, pi) in g.iter_mut().zip(&p) {
                loss += self.l2_reg * pi * pi;
                *gi += 2.0 * self.l2_reg * pi;
            }
        }
        (loss, grad)
    }

    fn pairwise(&self, triples: &[Triple], grad: &mut Theta) -> f64 {
        let mut users: Vec<u32> = triples.iter().map(|t| t.user).collect();
        users.sort_unstable();
        users.dedup();
        let mut items: Vec<u32> = triples.iter().flat_map(|t| [t.pos, t.neg]).collect();
        items.sort_unstable();
        items.dedup();
        let fu = self.forward(Side::User, &users);
        let fi = self.forward(Side::Item, &items);
        let d = self.dim();
        let mut gu = Array2::<f64>::zeros((users.len(), d));
        let mut gi = Array2::<f64>::zeros((items.len(), d));
        let pos = |set: &[u32], e: u32| set.binary_search(&e).expect("entity in batch");
        let mut loss = 0.0;
        for t in triples {
            let (ru, rv, rj) = (pos(&users, t.user), pos(&items, t.pos), pos(&items, t.neg));
            let p = fu.out.row(ru);
            let (qv, qj) = (fi.out.row(rv), fi.out.row(rj));
            let (ps, qvs, qjs) = (
                p.as_slice().expect("standard"),
                qv.as_slice().expect("standard"),
                qj.as_slice().expect("standard"),
            );
            let x = dot(ps, qvs) - dot(ps, qjs);
            loss += softplus(-x);
            let g = -sigmoid(-x);
            for c in 0..d {
                gu[[ru, c]] += g * (qvs[c] - qjs[c]);
                gi[[rv, c]] += g * ps[c];
                gi[[rj, c]] -= g * ps[c];
            }
        }
        self.backward(Side::User, &fu, &gu, grad);
        self.backward(Side::Item, &fi, &gi, grad);
        loss
    }

    fn pointwise(&self, data: &Dataset, users: &[u32], c0: f64, grad: &mut Theta) -> f64 {
        let mut users = users.to_vec();
        users.sort_unstable();
        users.dedup();
        let items: Vec<u32> = (0..self.tables[0].num_items() as u32).collect();
        let fu = self.forward(Side::User, &users);
        let fi = self.forward(Side::Item, &items);
        let (p, q) = (&fu.out, &fi.out);
        let gram_q = q.t().dot(q);
        let pg = p.dot(&gram_q);
        let mut loss = c0 * (&pg * p).sum();
        let mut gu = pg * (2.0 * c0);
        let mut gi = q.dot(&p.t().dot(p)) * (2.0 * c0);
        for (r, &u) in users.iter().enumerate() {
            let pu = p.row(r);
            for &v in data.user_items(u) {
                let qv = q.row(v as usize);
                let s = pu.dot(&qv);
                loss += (1.0 - c0) * s * s - 2.0 * s + 1.0;
                let coef = 2.0 * (1.0 - c0) * s - 2.0;
                gu.row_mut(r).scaled_add(coef, &qv);
                gi.row_mut(v as usize).scaled_add(coef, &pu);
            }
        }
        self.backward(Side::User, &fu, &gu, grad);
        self.backward(Side::Item, &fi, &gi, grad);
        loss
    }

    fn aggregate_side(&self, side: Side, count: usize) -> Array2<f64> {
        const CHUNK: usize = 2048;
        let ids: Vec<u32> = (0..count as u32).collect();
        let parts: Vec<Array2<f64>> = ids
            .par_chunks(CHUNK)
            .map(|c| self.forward(side, c).out)
            .collect();
        if parts.is_empty() {
            return Array2::zeros((0, self.dim()));
        }
        let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
        concatenate(Axis(0), &views).expect("matching widths")
    }

    /// The combined user and item embeddings.
    pub fn aggregate(&self) -> Result<EmbeddingTable> {
        let t = &self.tables[0];
        EmbeddingTable::new(
            self.aggregate_side(Side::User, t.num_users()),
            self.aggregate_side(Side::Item, t.num_items()),
        )
    }

    /// Writes `mode K d k`, then every tensor of Θ as little-endian f32 in
    /// [`Theta::tensors`] order.
    pub fn write(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut out = BufWriter::new(File::create(path).map_err(io)?);
        writeln!(
            out,
            "{} {} {} {}",
            self.mode,
            self.num_shards(),
            self.dim(),
            self.theta.attention_dim()
        )
        .map_err(io)?;
        for (_, _, s) in self.theta.tensors() {
            write_f32s(&mut out, s.iter()).map_err(io)?;
        }
        out.flush().map_err(io)
    }

    pub fn read(path: &Path, tables: Vec<Arc<EmbeddingTable>>, l2_reg: f64) -> Result<Self> {
        check_tables(&tables)?;
        let io = |e| Error::io(path, e);
        let mut input = BufReader::new(File::open(path).map_err(io)?);
        let mut line = String::new();
        input.read_line(&mut line).map_err(io)?;
        let bad = |message: String| Error::Format {
            what: "aggregator checkpoint",
            message: format!("{}: {message}", path.display()),
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(bad("expected header `mode K d k`".into()));
        }
        let mode: AggMode = fields[0].parse()?;
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("bad number `{s}`")));
        let (k, d, a) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
        if k != tables.len() || d != tables[0].dim() {
            return Err(bad(format!(
                "checkpoint has K={k}, d={d} but {} tables of dim {} were given",
                tables.len(),
                tables[0].dim()
            )));
        }
        let mut theta = Theta::initial(k, d, a, 0.0, 0);
        for s in theta.tensors_mut() {
            let values = read_f32s(&mut input, s.len()).map_err(io)?;
            s.copy_from_slice(&values);
        }
        let mut rest = Vec::new();
        input.read_to_end(&mut rest).map_err(io)?;
        if !rest.is_empty() {
            return Err(bad("trailing bytes".into()));
        }
        Self::with_theta(tables, mode, theta, l2_reg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AggTrainReport {
    pub epochs_run: usize,
    /// Epoch whose parameters were kept; 0 is the initialisation.
    pub best_epoch: usize,
    pub best_validation_recall: Option<f64>,
    /// Mean per-step objective of each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Fits Θ with Adagrad on the global training data, keeping the parameters
/// with the best validation Recall@10 when `val` is given.
pub fn train_aggregator(
    agg: &mut Aggregator,
    train: &Dataset,
    cfg: &AggregatorConfig,
    val: Option<&Dataset>,
) -> Result<AggTrainReport> {
    cfg.validate()?;
    if agg.mode == AggMode::Mean {
        return Err(Error::config("mean aggregation has no parameters to train"));
    }
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let t0 = &agg.tables[0];
    if train.num_users() != t0.num_users() || train.num_items() != t0.num_items() {
        return Err(Error::DimensionMismatch {
            expected: train.num_users(),
            actual: t0.num_users(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut accum = agg.theta.filled_like(INITIAL_ACCUMULATOR);
    let groups: Vec<TensorGroup> = agg.theta.tensors().iter().map(|t| t.1).collect();
    let mut users: Vec<u32> = train.active_users().collect();
    let val = val.filter(|v| !v.is_empty());
    let recall_of = |agg: &Aggregator| -> Result<f64> {
        let v = val.expect("validation present");
        Ok(eval::validation_recall(&agg.aggregate()?, train, v, 10))
    };
    let mut best = match val {
        Some(_) => Some((recall_of(agg)?, 0usize, agg.theta.clone())),
        None => None,
    };
    let mut since_best = 0;
    let mut losses = Vec::new();
    let mut epochs_run = 0;

    for epoch in 1..=cfg.max_epochs {
        epochs_run = epoch;
        users.shuffle(&mut rng);
        let mut total = 0.0;
        let mut steps = 0;
        for batch in users.chunks(cfg.batch_users) {
            let triples: Vec<Triple>;
            let step = match cfg.loss {
                AggLoss::Pairwise => {
                    triples = batch
                        .iter()
                        .flat_map(|&u| train.user_items(u).iter().map(move |&v| (u, v)))
                        .filter_map(|(u, v)| {
                            sample_negative(train, u, &mut rng).map(|neg| Triple {
                                user: u,
                                pos: v,
                                neg,
                            })
                        })
                        .collect();
                    if triples.is_empty() {
                        continue;
                    }
                    AggBatch::Pairwise(&triples)
                }
                AggLoss::Pointwise => AggBatch::Pointwise {
                    data: train,
                    users: batch,
                    negative_weight: cfg.negative_weight,
                },
            };
            let (loss, grad) = agg.loss_and_gradient(&step);
            total += loss;
            steps += 1;
            let grads: Vec<Vec<f64>> = grad.tensors().iter().map(|t| t.2.to_vec()).collect();
            let trainable: Vec<bool> = groups.iter().map(|&g| agg.is_trainable(g)).collect();
            for (((p, a), g), &train_it) in agg
                .theta
                .tensors_mut()
                .into_iter()
                .zip(accum.tensors_mut())
                .zip(&grads)
                .zip(&trainable)
            {
                if train_it {
                    adagrad_update(cfg.learning_rate, p, a, g);
                }
            }
        }
        if !agg.theta.is_finite() {
            return Err(Error::NonFinite("aggregation parameters"));
        }
        losses.push(total / steps.max(1) as f64);
        if let Some((best_recall, best_epoch, best_theta)) = &mut best {
            let recall = recall_of(agg)?;
            log::debug!("aggregator epoch {epoch}: loss {:.5} val recall@10 {recall:.5}", losses[epoch - 1]);
            if recall > *best_recall {
                *best_recall = recall;
                *best_epoch = epoch;
                *best_theta = agg.theta.clone();
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= cfg.early_stop_patience {
                    break;
                }
            }
        }
    }
    Ok(match best {
        Some((recall, epoch, theta)) => {
            agg.theta = theta;
            AggTrainReport {
                epochs_run,
                best_epoch: epoch,
                best_validation_recall: Some(recall),
                epoch_losses: losses,
            }
        }
        None => AggTrainReport {
            epochs_run,
            best_epoch: epochs_run,
            best_validation_recall: None,
            epoch_losses: losses,
        },
    })
}
