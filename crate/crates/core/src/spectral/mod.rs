//! Spectral data of the Laplace-Beltrami operator on S^n and assembly of
//! perturbations in the complex spherical-harmonic basis.

mod assembly;
mod harmonics;
mod potential;

pub use assembly::{
    assemble_angular_power, assemble_multiplication, assemble_unbounded_term, gaunt_coefficient,
};
pub use harmonics::{gauss_legendre, harmonics_at, HarmonicTable, QuadratureGrid};
pub use potential::{PotentialKey, PotentialSpec};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// `λ_k = k(k+n-1)`.
pub fn laplace_eigenvalue(k: usize, n: usize) -> f64 {
    laplace_eigenvalue_exact(k, n) as f64
}

/// Integer form of [`laplace_eigenvalue`].
pub fn laplace_eigenvalue_exact(k: usize, n: usize) -> u64 {
    let k = k as u64;
    k * (k + n as u64 - 1)
}

/// Multiplicity of `λ_k` on S^n, i.e. the dimension of degree-k harmonic
/// polynomials in n+1 variables.
pub fn block_dimension(k: usize, n: usize) -> usize {
    assert!(n >= 1, "sphere dimension must be positive");
    // C(k+n, n) - C(k+n-2, n)
    let total = binomial((k + n) as u128, n as u128);
    let lower = if k >= 2 {
        binomial((k - 2 + n) as u128, n as u128)
    } else {
        0
    };
    (total - lower) as usize
}

fn binomial(n: u128, r: u128) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Sphere dimension and spectral truncation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SphereSpec {
    pub n: usize,
    pub k_max: usize,
}

impl SphereSpec {
    pub fn new(n: usize, k_max: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("n", "sphere dimension must be at least 1"));
        }
        Ok(SphereSpec { n, k_max })
    }

    pub fn two_sphere(k_max: usize) -> Self {
        SphereSpec { n: 2, k_max }
    }

    pub(crate) fn require_two_sphere(&self) -> Result<()> {
        if self.n != 2 {
            return Err(Error::UnsupportedDimension(self.n));
        }
        Ok(())
    }

    pub fn eigenvalue(&self, k: usize) -> f64 {
        laplace_eigenvalue(k, self.n)
    }

    pub fn dimension(&self, k: usize) -> usize {
        block_dimension(k, self.n)
    }

    /// Total number of retained basis functions.
    pub fn basis_size(&self) -> usize {
        (0..=self.k_max).map(|k| self.dimension(k)).sum()
    }
}

/// A complex harmonic `Y_k^m` on S^2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HarmonicIndex {
    pub k: usize,
    pub m: i64,
}

impl HarmonicIndex {
    pub fn new(k: usize, m: i64) -> Result<Self> {
        let idx = HarmonicIndex { k, m };
        idx.validate()?;
        Ok(idx)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m.unsigned_abs() as usize > self.k {
            return Err(Error::InvalidHarmonic {
                k: self.k,
                m: self.m,
            });
        }
        Ok(())
    }

    /// Position inside the eigenspace, m ascending.
    pub fn position(&self) -> usize {
        (self.m + self.k as i64) as usize
    }

    /// Position in the flattened basis of all harmonics with k' <= k_max.
    pub fn flat(&self) -> usize {
        self.k * self.k + self.position()
    }

    pub fn from_flat(i: usize) -> Self {
        let k = (i as f64).sqrt() as usize;
        // Guard against rounding in the square root.
        let k = if (k + 1) * (k + 1) <= i {
            k + 1
        } else if k * k > i {
            k - 1
        } else {
            k
        };
        HarmonicIndex {
            k,
            m: (i - k * k) as i64 - k as i64,
        }
    }
}
