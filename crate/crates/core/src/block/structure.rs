use super::operator::{neg_mode, BlockOperator};
use crate::linalg::C64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureKind {
    /// `A(l) = A(-l)^H`: the operator is self-adjoint.
    Hermitian,
    /// `A(l) = -A(-l)^H`: `iA` is Hermitian.
    Hamiltonian,
    /// Blocks with `k != k'` vanish.
    BlockDiagonal,
    /// Block diagonal, φ-independent and Hermitian.
    NormalForm,
}

/// Largest violation of `A(l) = sign·A(-l)^H`, absent modes counted as zero.
pub fn adjoint_defect(a: &BlockOperator, sign: f64) -> f64 {
    let zero = crate::linalg::CMatrix::zeros(a.size(), a.size());
    let mut worst: f64 = 0.0;
    for (l, m) in a.modes() {
        let partner = a.mode(&neg_mode(l)).unwrap_or(&zero);
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let want = partner[(j, i)].conj() * sign;
                worst = worst.max((m[(i, j)] - want).norm());
            }
        }
    }
    worst
}

/// Largest entry outside the diagonal blocks.
pub fn off_block_defect(a: &BlockOperator) -> f64 {
    let layout = a.layout();
    let mut worst: f64 = 0.0;
    for m in a.modes().values() {
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                if layout.block_of(i) != layout.block_of(j) {
                    worst = worst.max(m[(i, j)].norm());
                }
            }
        }
    }
    worst
}

/// Structural predicate with tolerance relative to `max(1, max|A|)`.
pub fn structure_check(a: &BlockOperator, kind: StructureKind, tol: f64) -> bool {
    let scale = a.max_abs().max(1.0);
    let tol = tol * scale;
    match kind {
        StructureKind::Hermitian => adjoint_defect(a, 1.0) <= tol,
        StructureKind::Hamiltonian => adjoint_defect(a, -1.0) <= tol,
        StructureKind::BlockDiagonal => off_block_defect(a) <= tol,
        StructureKind::NormalForm => {
            off_block_defect(a) <= tol && a.is_phi_independent(tol) && adjoint_defect(a, 1.0) <= tol
        }
    }
}

/// Replaces `A` by its exact Hermitian (`sign = 1`) or Hamiltonian (`sign = -1`)
/// part, `(A + sign·A*)/2`, removing rounding drift.
pub fn symmetrize(a: &BlockOperator, sign: f64) -> BlockOperator {
    let mut out = a.clone();
    out.add_scaled(&a.adjoint(), C64::new(sign, 0.0))
        .expect("adjoint shares the truncation");
    out.scale_mut(C64::new(0.5, 0.0));
    out
}
