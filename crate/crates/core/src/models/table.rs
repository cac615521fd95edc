use ndarray::{Array2, ArrayView1};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// User and item embedding matrices (`m × d` and `n × d`).
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    users: Array2<f64>,
    items: Array2<f64>,
}

impl EmbeddingTable {
    pub fn new(users: Array2<f64>, items: Array2<f64>) -> Result<Self> {
        if users.ncols() != items.ncols() {
            return Err(Error::DimensionMismatch {
                expected: users.ncols(),
                actual: items.ncols(),
            });
        }
        let table = EmbeddingTable {
            users: users.as_standard_layout().into_owned(),
            items: items.as_standard_layout().into_owned(),
        };
        if !table.is_finite() {
            return Err(Error::NonFinite("embedding table"));
        }
        Ok(table)
    }

    pub fn zeros(num_users: usize, num_items: usize, dim: usize) -> Self {
        EmbeddingTable {
            users: Array2::zeros((num_users, dim)),
            items: Array2::zeros((num_items, dim)),
        }
    }

    /// Zero-mean Gaussian initialisation; users are drawn before items.
    pub fn gaussian(
        num_users: usize,
        num_items: usize,
        dim: usize,
        std: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let normal = Normal::new(0.0, std).expect("std must be finite and non-negative");
        let users = Array2::from_shape_simple_fn((num_users, dim), || normal.sample(rng));
        let items = Array2::from_shape_simple_fn((num_items, dim), || normal.sample(rng));
        EmbeddingTable { users, items }
    }

    pub fn dim(&self) -> usize {
        self.users.ncols()
    }

    pub fn num_users(&self) -> usize {
        self.users.nrows()
    }

    pub fn num_items(&self) -> usize {
        self.items.nrows()
    }

    pub fn users(&self) -> &Array2<f64> {
        &self.users
    }

    pub fn items(&self) -> &Array2<f64> {
        &self.items
    }

    pub fn users_mut(&mut self) -> &mut Array2<f64> {
        &mut self.users
    }

    pub fn items_mut(&mut self) -> &mut Array2<f64> {
        &mut self.items
    }

    pub fn into_parts(self) -> (Array2<f64>, Array2<f64>) {
        (self.users, self.items)
    }

    pub fn user(&self, u: usize) -> ArrayView1<'_, f64> {
        self.users.row(u)
    }

    pub fn item(&self, v: usize) -> ArrayView1<'_, f64> {
        self.items.row(v)
    }

    pub(crate) fn user_slice(&self, u: usize) -> &[f64] {
        row_slice(&self.users, u)
    }

    pub(crate) fn item_slice(&self, v: usize) -> &[f64] {
        row_slice(&self.items, v)
    }

    /// Predicted preference `ŷ_uv = p_u · q_v`.
    pub fn score(&self, u: usize, v: usize) -> Result<f64> {
        if u >= self.num_users() {
            return Err(Error::OutOfRange {
                what: "user",
                index: u,
                len: self.num_users(),
            });
        }
        if v >= self.num_items() {
            return Err(Error::OutOfRange {
                what: "item",
                index: v,
                len: self.num_items(),
            });
        }
        Ok(dot(self.user_slice(u), self.item_slice(v)))
    }

    pub fn is_finite(&self) -> bool {
        self.users.iter().chain(self.items.iter()).all(|x| x.is_finite())
    }
}

pub(crate) fn row_slice(m: &Array2<f64>, r: usize) -> &[f64] {
    let d = m.ncols();
    &m.as_slice().expect("standard layout")[r * d..(r + 1) * d]
}

pub(crate) fn row_slice_mut(m: &mut Array2<f64>, r: usize) -> &mut [f64] {
    let d = m.ncols();
    &mut m.as_slice_mut().expect("standard layout")[r * d..(r + 1) * d]
}

/// Inner product with a fixed four-lane summation order.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_table_scores_zero() {
        let t = EmbeddingTable::zeros(2, 3, 4);
        assert_eq!(t.score(1, 2).unwrap(), 0.0);
    }

    #[test]
    fn hand_dot_product() {
        let t = EmbeddingTable::new(array![[1.0, 2.0]], array![[3.0, -1.0]]).unwrap();
        assert_eq!(t.score(0, 0).unwrap(), 1.0);
    }

    #[test]
    fn out_of_range_is_an_error() {
        let t = EmbeddingTable::zeros(2, 3, 4);
        assert!(matches!(t.score(2, 0), Err(Error::OutOfRange { what: "user", .. })));
        assert!(matches!(t.score(0, 3), Err(Error::OutOfRange { what: "item", .. })));
    }

    #[test]
    fn rejects_bad_shapes_and_nan() {
        assert!(EmbeddingTable::new(Array2::zeros((2, 3)), Array2::zeros((2, 4))).is_err());
        assert!(EmbeddingTable::new(array![[f64::NAN]], array![[0.0]]).is_err());
    }

    #[test]
    fn scores_invariant_under_shared_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = EmbeddingTable::gaussian(4, 5, 3, 1.0, &mut rng);
        // Orthogonal matrix from a Givens rotation in each coordinate plane.
        let rot = |i: usize, j: usize, theta: f64| {
            let mut r = Array2::<f64>::eye(3);
            r[[i, i]] = theta.cos();
            r[[j, j]] = theta.cos();
            r[[i, j]] = -theta.sin();
            r[[j, i]] = theta.sin();
            r
        };
        let r = rot(0, 1, 0.7).dot(&rot(1, 2, -1.3)).dot(&rot(0, 2, 2.1));
        let rotated = EmbeddingTable::new(t.users().dot(&r), t.items().dot(&r)).unwrap();
        for u in 0..4 {
            for v in 0..5 {
                let a = t.score(u, v).unwrap();
                let b = rotated.score(u, v).unwrap();
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn dot_handles_tails() {
        let a: Vec<f64> = (0..7).map(f64::from).collect();
        assert_eq!(dot(&a, &a), 91.0);
    }
}
