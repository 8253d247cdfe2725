use crate::error::{Error, Result};
use crate::spectral::{block_dimension, laplace_eigenvalue};
use std::ops::Range;
use std::sync::Arc;

/// Eigenspace layout of a truncated basis: block sizes, offsets and the
/// eigenvalues attached to each block.
#[derive(Debug, PartialEq)]
pub struct BlockLayout {
    n: usize,
    k_max: usize,
    dims: Vec<usize>,
    offsets: Vec<usize>,
    total: usize,
    lambda: Vec<f64>,
    weight: Vec<f64>,
    block_of: Vec<usize>,
}

impl BlockLayout {
    pub fn new(n: usize, k_max: usize) -> Result<Arc<Self>> {
        if n == 0 {
            return Err(Error::param("n", "sphere dimension must be at least 1"));
        }
        let dims: Vec<usize> = (0..=k_max).map(|k| block_dimension(k, n)).collect();
        let mut offsets = Vec::with_capacity(k_max + 2);
        let mut acc = 0;
        for &dk in &dims {
            offsets.push(acc);
            acc += dk;
        }
        offsets.push(acc);
        let lambda: Vec<f64> = (0..=k_max).map(|k| laplace_eigenvalue(k, n)).collect();
        // λ_0 = 0 is lifted to 1 inside D-scalings only.
        let weight = lambda.iter().map(|l| l.max(1.0).sqrt()).collect();
        let mut block_of = Vec::with_capacity(acc);
        for (k, &dk) in dims.iter().enumerate() {
            block_of.extend(std::iter::repeat_n(k, dk));
        }
        Ok(Arc::new(BlockLayout {
            n,
            k_max,
            dims,
            offsets,
            total: acc,
            lambda,
            weight,
            block_of,
        }))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// `d_k`.
    pub fn dim(&self, k: usize) -> usize {
        self.dims[k]
    }

    /// Size of the flattened basis.
    pub fn total(&self) -> usize {
        self.total
    }

    pub fn range(&self, k: usize) -> Range<usize> {
        self.offsets[k]..self.offsets[k + 1]
    }

    pub fn offset(&self, k: usize) -> usize {
        self.offsets[k]
    }

    /// `λ_k`.
    pub fn lambda(&self, k: usize) -> f64 {
        self.lambda[k]
    }

    /// Diagonal entry of `D` used in scalings: `max(λ_k, 1)^{1/2}`.
    pub fn d_weight(&self, k: usize) -> f64 {
        self.weight[k]
    }

    /// Eigenspace index of a flattened basis position.
    pub fn block_of(&self, i: usize) -> usize {
        self.block_of[i]
    }

    /// `λ` of every flattened basis position.
    pub fn lambda_flat(&self) -> Vec<f64> {
        self.block_of.iter().map(|&k| self.lambda[k]).collect()
    }
}
