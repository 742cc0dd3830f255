/// A feature row a linear learner can consume.
pub trait FeatureRow {
    fn dim(&self) -> usize;
    fn dot(&self, w: &[f64]) -> f64;
    /// `w += scale * self`
    fn add_scaled_to(&self, w: &mut [f64], scale: f64);
    fn squared_norm(&self) -> f64;
}

/// Sorted `(index, weight)` pairs over a fixed dimension.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    pub dim: usize,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseVector {
    /// From `(index, value)` pairs; zero values are dropped and indices sorted.
    pub fn from_pairs(dim: usize, mut pairs: Vec<(usize, f64)>) -> Self {
        pairs.retain(|&(_, v)| v != 0.0);
        pairs.sort_unstable_by_key(|&(i, _)| i);
        debug_assert!(pairs.iter().all(|&(i, _)| i < dim));
        let (indices, values) = pairs.into_iter().unzip();
        Self { dim, indices, values }
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn norm(&self) -> f64 {
        self.squared_norm().sqrt()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for (&i, &x) in self.indices.iter().zip(&self.values) {
            v[i] = x;
        }
        v
    }
}

impl FeatureRow for SparseVector {
    fn dim(&self) -> usize {
        self.dim
    }

    fn dot(&self, w: &[f64]) -> f64 {
        self.indices.iter().zip(&self.values).map(|(&i, &x)| w[i] * x).sum()
    }

    fn add_scaled_to(&self, w: &mut [f64], scale: f64) {
        for (&i, &x) in self.indices.iter().zip(&self.values) {
            w[i] += scale * x;
        }
    }

    fn squared_norm(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum()
    }
}

impl FeatureRow for Vec<f64> {
    fn dim(&self) -> usize {
        self.len()
    }

    fn dot(&self, w: &[f64]) -> f64 {
        self.iter().zip(w).map(|(x, w)| x * w).sum()
    }

    fn add_scaled_to(&self, w: &mut [f64], scale: f64) {
        for (w, x) in w.iter_mut().zip(self) {
            *w += scale * x;
        }
    }

    fn squared_norm(&self) -> f64 {
        self.iter().map(|x| x * x).sum()
    }
}
