//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DMatrixView, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// `c += a * b` through the packed complex kernel of `matrixmultiply`.
pub fn gemm_acc(c: &mut CMatrix, a: &CMatrix, b: &CMatrix) {
    gemm_scaled(c, ONE, a, b, ONE);
}

/// `c = alpha * a * b + beta * c`.
pub fn gemm_scaled(c: &mut CMatrix, alpha: C64, a: &CMatrix, b: &CMatrix, beta: C64) {
    let (m, k) = a.shape();
    let (k2, n) = b.shape();
    assert_eq!(k, k2, "inner dimensions differ");
    assert_eq!(c.shape(), (m, n), "output shape differs");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        *c *= beta;
        return;
    }
    // SAFETY: nalgebra owned matrices are contiguous column-major buffers and
    // `Complex64` is `repr(C)` with layout identical to `[f64; 2]`. The
    // pointers stay valid for the whole call and `c` does not alias `a`/`b`
    // because it is borrowed mutably.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [alpha.re, alpha.im],
            a.as_ptr() as *const [f64; 2],
            1,
            m as isize,
            b.as_ptr() as *const [f64; 2],
            1,
            k as isize,
            [beta.re, beta.im],
            c.as_mut_ptr() as *mut [f64; 2],
            1,
            m as isize,
        );
    }
}

/// `c = alpha * a * b + beta * c` on contiguous column-major square slices of
/// side `n`.
pub fn gemm_square_slices(n: usize, alpha: C64, a: &[C64], b: &[C64], beta: C64, c: &mut [C64]) {
    assert!(a.len() >= n * n && b.len() >= n * n && c.len() >= n * n);
    if n == 0 {
        return;
    }
    // SAFETY: the slices hold at least n*n elements laid out column-major,
    // `Complex64` is layout-compatible with `[f64; 2]`, and `c` is a unique
    // borrow so it cannot alias `a` or `b`.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            n,
            n,
            n,
            [alpha.re, alpha.im],
            a.as_ptr() as *const [f64; 2],
            1,
            n as isize,
            b.as_ptr() as *const [f64; 2],
            1,
            n as isize,
            [beta.re, beta.im],
            c.as_mut_ptr() as *mut [f64; 2],
            1,
            n as isize,
        );
    }
}

/// Dense product through [`gemm_acc`].
pub fn matmul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let mut c = CMatrix::zeros(a.nrows(), b.ncols());
    gemm_scaled(&mut c, ONE, a, b, ZERO);
    c
}

/// Largest singular value of a (small) block.
pub fn spectral_norm(block: DMatrixView<'_, C64>) -> f64 {
    let (r, c) = block.shape();
    if r == 0 || c == 0 {
        return 0.0;
    }
    if r == 1 || c == 1 {
        return block.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    }
    let fro2: f64 = block.iter().map(|z| z.norm_sqr()).sum();
    if fro2 == 0.0 {
        return 0.0;
    }
    // Gram matrix on the smaller side.
    let gram = if r <= c {
        block * block.adjoint()
    } else {
        block.adjoint() * block
    };
    let top = gram
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(0.0_f64, f64::max);
    top.max(0.0).sqrt()
}

/// Spectral norm of an owned matrix.
pub fn op_norm(m: &CMatrix) -> f64 {
    spectral_norm(m.as_view())
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues sorted ascending.
pub fn hermitian_eigen(h: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = h.nrows();
    if n == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    // Symmetrize to remove rounding asymmetry before the solver sees it.
    let sym = (h + h.adjoint()) * C64::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Frobenius norm squared.
pub fn fro2(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(r: usize, c: usize, seed: u64) -> CMatrix {
        let mut x = seed;
        CMatrix::from_fn(r, c, |_, _| {
            x = x
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            let a = ((x >> 11) as f64) / (1u64 << 53) as f64 - 0.5;
            x = x
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            let b = ((x >> 11) as f64) / (1u64 << 53) as f64 - 0.5;
            C64::new(a, b)
        })
    }

    #[test]
    fn gemm_matches_nalgebra() {
        let a = sample(7, 5, 1);
        let b = sample(5, 9, 2);
        let mut c = sample(7, 9, 3);
        let expected = &c + &a * &b;
        gemm_acc(&mut c, &a, &b);
        assert!((c - expected).norm() < 1e-13);
    }

    #[test]
    fn spectral_norm_matches_svd() {
        for (r, c) in [(3, 3), (5, 2), (2, 7), (1, 4)] {
            let m = sample(r, c, (r * 10 + c) as u64);
            let svd = m.clone().svd(false, false);
            let expect = svd.singular_values.max();
            assert!((op_norm(&m) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn hermitian_eigen_reconstructs() {
        let a = sample(6, 6, 9);
        let h = &a + a.adjoint();
        let (vals, vecs) = hermitian_eigen(&h);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let d = CMatrix::from_diagonal(&DVector::from_iterator(
            6,
            vals.iter().map(|&v| C64::new(v, 0.0)),
        ));
        let back = &vecs * d * vecs.adjoint();
        assert!((back - h).norm() < 1e-12);
    }
}
