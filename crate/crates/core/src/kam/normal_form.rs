use crate::block::{BlockLayout, BlockOperator};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, op_norm, CMatrix, C64};
use std::sync::Arc;

/// φ-independent block-diagonal Hermitian operator with the eigen-decomposition
/// of each block cached.
#[derive(Clone, Debug)]
pub struct NormalForm {
    layout: Arc<BlockLayout>,
    blocks: Vec<CMatrix>,
    eigenvalues: Vec<Vec<f64>>,
    eigenvectors: Vec<CMatrix>,
}

impl NormalForm {
    pub fn zero(layout: Arc<BlockLayout>) -> Self {
        let blocks = (0..=layout.k_max())
            .map(|k| CMatrix::zeros(layout.dim(k), layout.dim(k)))
            .collect();
        Self::from_blocks(layout, blocks).expect("zero blocks are Hermitian")
    }

    /// Blocks are symmetrized before decomposition.
    pub fn from_blocks(layout: Arc<BlockLayout>, blocks: Vec<CMatrix>) -> Result<Self> {
        if blocks.len() != layout.k_max() + 1 {
            return Err(Error::ShapeMismatch(format!(
                "{} blocks for K_max = {}",
                blocks.len(),
                layout.k_max()
            )));
        }
        let mut sym = Vec::with_capacity(blocks.len());
        let mut eigenvalues = Vec::with_capacity(blocks.len());
        let mut eigenvectors = Vec::with_capacity(blocks.len());
        for (k, b) in blocks.into_iter().enumerate() {
            let dk = layout.dim(k);
            if b.shape() != (dk, dk) {
                return Err(Error::ShapeMismatch(format!(
                    "block {k} has shape {:?}, expected {dk}",
                    b.shape()
                )));
            }
            let h = (&b + b.adjoint()) * C64::new(0.5, 0.0);
            let (mu, u) = hermitian_eigen(&h);
            sym.push(h);
            eigenvalues.push(mu);
            eigenvectors.push(u);
        }
        Ok(NormalForm {
            layout,
            blocks: sym,
            eigenvalues,
            eigenvectors,
        })
    }

    /// Reads the diagonal blocks of mode zero after checking the normal-form
    /// structure to `tol` (relative to `max(1, max|Z|)`).
    pub fn from_operator(z: &BlockOperator, tol: f64) -> Result<Self> {
        use crate::block::{structure_check, StructureKind};
        if !structure_check(z, StructureKind::NormalForm, tol) {
            return Err(Error::param("Z", "operator is not in normal form"));
        }
        let layout = z.layout().clone();
        let zero = vec![0; z.d()];
        let blocks = (0..=layout.k_max())
            .map(|k| match z.block(&zero, k, k) {
                Some(b) => b.into_owned(),
                None => CMatrix::zeros(layout.dim(k), layout.dim(k)),
            })
            .collect();
        Self::from_blocks(layout, blocks)
    }

    pub fn to_operator(&self, d: usize, l_max: usize) -> BlockOperator {
        let mut op = BlockOperator::zeros(self.layout.clone(), d, l_max);
        if self
            .blocks
            .iter()
            .all(|b| b.iter().all(|z| *z == C64::new(0.0, 0.0)))
        {
            return op;
        }
        let zero = vec![0; d];
        for (k, b) in self.blocks.iter().enumerate() {
            op.set_block(&zero, k, k, b)
                .expect("block shape matches layout");
        }
        op
    }

    pub fn layout(&self) -> &Arc<BlockLayout> {
        &self.layout
    }

    pub fn block(&self, k: usize) -> &CMatrix {
        &self.blocks[k]
    }

    pub fn eigenvalues(&self, k: usize) -> &[f64] {
        &self.eigenvalues[k]
    }

    pub fn eigenvectors(&self, k: usize) -> &CMatrix {
        &self.eigenvectors[k]
    }

    /// `max_j |μ_{k,j}|`.
    pub fn max_abs_eigenvalue(&self, k: usize) -> f64 {
        self.eigenvalues[k].iter().fold(0.0, |a, x| a.max(x.abs()))
    }

    /// `⟨⟨Z⟩⟩_{β,s,σ}`; for a φ-independent block-diagonal operator it is
    /// independent of `s` and `σ`.
    pub fn beta_norm(&self, beta: f64) -> f64 {
        let sup = (0..=self.layout.k_max())
            .map(|k| op_norm(&self.blocks[k]) * self.layout.d_weight(k).powf(-beta))
            .fold(0.0, f64::max);
        2.0 * sup
    }

    /// `max_k ‖Z_k - U diag(μ) U*‖`.
    pub fn decomposition_defect(&self) -> f64 {
        (0..=self.layout.k_max())
            .map(|k| {
                let u = &self.eigenvectors[k];
                let mu = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                    u.ncols(),
                    self.eigenvalues[k].iter().map(|&x| C64::new(x, 0.0)),
                ));
                (u * mu * u.adjoint() - &self.blocks[k]).norm()
            })
            .fold(0.0, f64::max)
    }

    /// `max_{k,j} ⟨k⟩^β |μ_{k,j}|`.
    pub fn weighted_eigenvalue_max(&self, beta: f64) -> f64 {
        (0..=self.layout.k_max())
            .map(|k| crate::block::bracket_k(k).powf(beta) * self.max_abs_eigenvalue(k))
            .fold(0.0, f64::max)
    }

    /// `Z + H` for a block-diagonal φ-independent increment given as blocks.
    pub fn add_blocks(&self, increment: &[CMatrix]) -> Result<Self> {
        let blocks = self
            .blocks
            .iter()
            .zip(increment)
            .map(|(a, b)| a + b)
            .collect();
        Self::from_blocks(self.layout.clone(), blocks)
    }

    /// Flattened eigenvalue list `μ_{k,j}`, block by block.
    pub fn all_eigenvalues(&self) -> Vec<Vec<f64>> {
        self.eigenvalues.clone()
    }
}
