//! LightGCN: linear neighbourhood propagation over the user-item graph.

use ndarray::Array2;

use super::bpr::train_pairwise;
use super::table::{row_slice, row_slice_mut, EmbeddingTable};
use super::{TrainConfig, Trained};
use crate::dataset::Dataset;
use crate::error::Result;

/// Symmetric-normalised bipartite adjacency applied `layers` times.
///
/// The output embedding is the mean of layers `0..=L`:
/// `E = (E⁰ + ÂE⁰ + … + Â^L E⁰) / (L + 1)`, with
/// `Â_uv = 1 / sqrt(|N(u)| · |N(v)|)`. An isolated node receives nothing from
/// propagation, so its output is its base row scaled by `1 / (L + 1)`.
#[derive(Clone, Debug)]
pub struct Propagator {
    layers: usize,
    // CSR over users then items; values are the normalised edge weights.
    user_ptr: Vec<usize>,
    user_nbr: Vec<u32>,
    user_w: Vec<f64>,
    item_ptr: Vec<usize>,
    item_nbr: Vec<u32>,
    item_w: Vec<f64>,
}

impl Propagator {
    pub fn new(graph: &Dataset, layers: usize) -> Self {
        let deg_u: Vec<f64> = (0..graph.num_users() as u32)
            .map(|u| graph.user_items(u).len() as f64)
            .collect();
        let deg_i: Vec<f64> = (0..graph.num_items() as u32)
            .map(|v| graph.item_users(v).len() as f64)
            .collect();
        let mut user_ptr = vec![0];
        let mut user_nbr = Vec::with_capacity(graph.len());
        let mut user_w = Vec::with_capacity(graph.len());
        for u in 0..graph.num_users() as u32 {
            for &v in graph.user_items(u) {
                user_nbr.push(v);
                user_w.push(1.0 / (deg_u[u as usize] * deg_i[v as usize]).sqrt());
            }
            user_ptr.push(user_nbr.len());
        }
        let mut item_ptr = vec![0];
        let mut item_nbr = Vec::with_capacity(graph.len());
        let mut item_w = Vec::with_capacity(graph.len());
        for v in 0..graph.num_items() as u32 {
            for &u in graph.item_users(v) {
                item_nbr.push(u);
                item_w.push(1.0 / (deg_u[u as usize] * deg_i[v as usize]).sqrt());
            }
            item_ptr.push(item_nbr.len());
        }
        Propagator {
            layers,
            user_ptr,
            user_nbr,
            user_w,
            item_ptr,
            item_nbr,
            item_w,
        }
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    /// One application of `Â`: users gather from items and vice versa.
    fn step(&self, users: &Array2<f64>, items: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
        let d = users.ncols();
        let mut next_users = Array2::zeros(users.raw_dim());
        let mut next_items = Array2::zeros(items.raw_dim());
        for u in 0..users.nrows() {
            let out = row_slice_mut(&mut next_users, u);
            for e in self.user_ptr[u]..self.user_ptr[u + 1] {
                let w = self.user_w[e];
                let src = row_slice(items, self.user_nbr[e] as usize);
                for k in 0..d {
                    out[k] += w * src[k];
                }
            }
        }
        for v in 0..items.nrows() {
            let out = row_slice_mut(&mut next_items, v);
            for e in self.item_ptr[v]..self.item_ptr[v + 1] {
                let w = self.item_w[e];
                let src = row_slice(users, self.item_nbr[e] as usize);
                for k in 0..d {
                    out[k] += w * src[k];
                }
            }
        }
        (next_users, next_items)
    }

    /// Layer-averaged propagation. `Â` is symmetric, so this map is its own
    /// adjoint and also serves as the backward pass.
    pub fn propagate(&self, table: &EmbeddingTable) -> EmbeddingTable {
        let mut sum_u = table.users().clone();
        let mut sum_i = table.items().clone();
        let mut cur_u = table.users().clone();
        let mut cur_i = table.items().clone();
        for _ in 0..self.layers {
            let (nu, ni) = self.step(&cur_u, &cur_i);
            sum_u += &nu;
            sum_i += &ni;
            cur_u = nu;
            cur_i = ni;
        }
        let scale = 1.0 / (self.layers as f64 + 1.0);
        sum_u *= scale;
        sum_i *= scale;
        EmbeddingTable::new(sum_u, sum_i).expect("propagation preserves shape")
    }
}

/// Trains LightGCN with the BPR loss on propagated embeddings and returns the
/// propagated table. With zero layers this is exactly [`super::train_bpr`].
pub fn train_lightgcn(train: &Dataset, cfg: &TrainConfig, val: Option<&Dataset>) -> Result<Trained> {
    if cfg.num_layers == 0 {
        return train_pairwise(train, cfg, val, None);
    }
    let prop = Propagator::new(train, cfg.num_layers);
    train_pairwise(train, cfg, val, Some(&prop))
}
