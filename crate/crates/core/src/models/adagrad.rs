/// Starting value of every squared-gradient accumulator.
pub const INITIAL_ACCUMULATOR: f64 = 0.1;

/// Per-coordinate adaptive gradient descent over one flat parameter block.
///
/// `θ ← θ − lr · g / sqrt(G)` after `G ← G + g²`.
#[derive(Clone, Debug)]
pub struct Adagrad {
    learning_rate: f64,
    accum: Vec<f64>,
}

impl Adagrad {
    pub fn new(learning_rate: f64, len: usize) -> Self {
        Adagrad {
            learning_rate,
            accum: vec![INITIAL_ACCUMULATOR; len],
        }
    }

    pub fn len(&self) -> usize {
        self.accum.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accum.is_empty()
    }

    /// Updates the whole block.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.step_range(0, params, grads);
    }

    /// Updates `params`, which occupy `[offset, offset + len)` of the block.
    pub fn step_range(&mut self, offset: usize, params: &mut [f64], grads: &[f64]) {
        debug_assert_eq!(params.len(), grads.len());
        let accum = &mut self.accum[offset..offset + params.len()];
        update(self.learning_rate, params, accum, grads);
    }
}

#[inline]
pub(crate) fn update(lr: f64, params: &mut [f64], accum: &mut [f64], grads: &[f64]) {
    for ((p, a), &g) in params.iter_mut().zip(accum.iter_mut()).zip(grads) {
        *a += g * g;
        *p -= lr * g / a.sqrt();
    }
}
