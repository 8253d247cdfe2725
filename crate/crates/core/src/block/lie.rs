//! Lie exponentials and conjugation of `ω·∂_φ - i(D²+Z) + M`.

use super::operator::BlockOperator;
use super::product::{commutator, compose};
use crate::error::{Error, Result};
use crate::linalg::{C64, I};

/// Result of a truncated power series.
#[derive(Clone, Debug)]
pub struct Series {
    pub value: BlockOperator,
    /// Number of terms summed after the zeroth.
    pub terms: usize,
    /// Frobenius norm of the last term added.
    pub last_term: f64,
}

/// `e^A = Σ A^p / p!`, stopping once the p-th term has Frobenius norm (which
/// bounds its (0,0) decay norm) below `tol`.
pub fn lie_exponential(a: &BlockOperator, tol: f64, p_max: usize) -> Result<Series> {
    let mut value = BlockOperator::identity(a.layout().clone(), a.d(), a.l_max());
    if a.is_zero() {
        return Ok(Series {
            value,
            terms: 0,
            last_term: 0.0,
        });
    }
    let mut term = a.clone();
    let mut last = term.frobenius_norm();
    for p in 1..=p_max {
        if p > 1 {
            term = compose(&term, a)?;
            term.scale_mut(C64::new(1.0 / p as f64, 0.0));
            last = term.frobenius_norm();
        }
        value.add_scaled(&term, C64::new(1.0, 0.0))?;
        if last < tol {
            return Ok(Series {
                value,
                terms: p,
                last_term: last,
            });
        }
    }
    Err(Error::SeriesDivergence {
        tol,
        terms: p_max,
        last,
    })
}

/// `e^S X e^{-S} = Σ_p ad_S^p(X)/p!`, stopping once a term falls below `tol`
/// times the largest term seen.
pub fn adjoint_series(
    s: &BlockOperator,
    x: &BlockOperator,
    tol: f64,
    p_max: usize,
) -> Result<Series> {
    let first = commutator(s, x)?;
    let mut value = x.clone();
    series_from(&mut value, first, s, 1, tol, p_max)
}

/// Adds `u_p + u_{p+1} + ...` to `value` with `u_{q+1} = [S, u_q]/(q+1)`.
pub(crate) fn series_from(
    value: &mut BlockOperator,
    first: BlockOperator,
    s: &BlockOperator,
    p0: usize,
    tol: f64,
    p_max: usize,
) -> Result<Series> {
    let mut term = first;
    let mut scale = value.frobenius_norm();
    let mut p = p0;
    loop {
        let norm = term.frobenius_norm();
        value.add_scaled(&term, C64::new(1.0, 0.0))?;
        scale = scale.max(norm);
        if norm <= tol * scale || norm == 0.0 {
            return Ok(Series {
                value: value.clone(),
                terms: p,
                last_term: norm,
            });
        }
        if p >= p_max {
            return Err(Error::SeriesDivergence {
                tol,
                terms: p_max,
                last: norm,
            });
        }
        term = commutator(s, &term)?;
        term.scale_mut(C64::new(1.0 / (p + 1) as f64, 0.0));
        p += 1;
    }
}

/// `[S, -iD²]`, exact: block `(k,k')` of `S` times `i(λ_k - λ_{k'})`.
pub fn commutator_with_laplacian(s: &BlockOperator) -> BlockOperator {
    let lam: Vec<C64> = s
        .layout()
        .lambda_flat()
        .into_iter()
        .map(|x| -I * x)
        .collect();
    s.commute_with_diagonal(&lam)
}

/// `e^S (ω·∂_φ - i(D²+Z) + M) e^{-S} - (ω·∂_φ - iD²)`.
///
/// Uses `[S, ω·∂_φ] = -ω·∂_φ S`, so with `H = -iZ + M` the first-order term is
/// `[S,-iD²] + [S,H] - ω·∂_φ S` and higher terms are iterated commutators.
pub fn conjugate_operator(
    omega: &[f64],
    z: &BlockOperator,
    m: &BlockOperator,
    s: &BlockOperator,
    tol: f64,
    p_max: usize,
) -> Result<Series> {
    let mut h = m.clone();
    h.add_scaled(z, -I)?;
    if s.is_zero() {
        return Ok(Series {
            value: h,
            terms: 0,
            last_term: 0.0,
        });
    }
    let mut first = commutator_with_laplacian(s);
    first.add_scaled(&commutator(s, &h)?, C64::new(1.0, 0.0))?;
    first.add_scaled(&s.omega_derivative(omega)?, C64::new(-1.0, 0.0))?;
    series_from(&mut h, first, s, 1, tol, p_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::layout::BlockLayout;
    use crate::block::structure::{structure_check, symmetrize, StructureKind};
    use crate::linalg::{CMatrix, ONE};

    fn hermitian_block(n: usize, seed: f64) -> CMatrix {
        let a = CMatrix::from_fn(n, n, |i, j| {
            C64::new(
                (seed + i as f64 * 1.3 + j as f64).sin(),
                (seed * 0.7 + i as f64 - 2.0 * j as f64).cos(),
            )
        });
        (&a + a.adjoint()) * C64::new(0.5, 0.0)
    }

    #[test]
    fn exponential_of_zero_is_identity() {
        let z = BlockOperator::zeros(BlockLayout::new(2, 2).unwrap(), 1, 1);
        let e = lie_exponential(&z, 1e-15, 10).unwrap();
        assert_eq!(e.terms, 0);
        assert!(
            e.value
                .max_abs_diff(&BlockOperator::identity(z.layout().clone(), 1, 1))
                == 0.0
        );
    }

    #[test]
    fn diagonal_block_matches_dense_exponential() {
        let layout = BlockLayout::new(2, 2).unwrap();
        let n = layout.total();
        let mut a = BlockOperator::zeros(layout, 1, 1);
        let b = hermitian_block(n, 0.3) * C64::new(0.0, 0.4);
        a.insert_mode(&[0], b.clone()).unwrap();
        let e = lie_exponential(&a, 1e-16, 60).unwrap();
        let dense = b.exp();
        assert!((e.value.mode(&[0]).unwrap() - dense).norm() < 1e-12);
    }

    #[test]
    fn hamiltonian_generator_gives_unitary_flow() {
        let layout = BlockLayout::new(2, 2).unwrap();
        let n = layout.total();
        let mut a = BlockOperator::zeros(layout, 1, 6);
        a.insert_mode(
            &[1],
            CMatrix::from_fn(n, n, |i, j| {
                C64::new(0.002 * (i + j) as f64, 0.004 * i as f64 - 0.002 * j as f64)
            }),
        )
        .unwrap();
        let a = symmetrize(&a, -1.0);
        let tol = 1e-14;
        let e = lie_exponential(&a, tol, 60).unwrap();
        for phi in [0.0, 0.9, 2.5] {
            let u = e.value.evaluate(&[phi]);
            let defect = (u.adjoint() * &u - CMatrix::identity(n, n)).norm();
            assert!(defect < 1e-10, "defect {defect}");
        }
    }

    #[test]
    fn divergence_is_reported() {
        let layout = BlockLayout::new(2, 1).unwrap();
        let mut a = BlockOperator::identity(layout, 1, 1);
        a.scale_mut(C64::new(30.0, 0.0));
        assert!(matches!(
            lie_exponential(&a, 1e-15, 5),
            Err(Error::SeriesDivergence { .. })
        ));
    }

    #[test]
    fn conjugation_with_zero_generator() {
        let layout = BlockLayout::new(2, 2).unwrap();
        let n = layout.total();
        let mut z = BlockOperator::zeros(layout.clone(), 1, 2);
        z.insert_mode(&[0], CMatrix::identity(n, n) * C64::new(0.2, 0.0))
            .unwrap();
        let mut m = BlockOperator::zeros(layout.clone(), 1, 2);
        m.insert_mode(&[1], CMatrix::from_element(n, n, ONE))
            .unwrap();
        let s = BlockOperator::zeros(layout, 1, 2);
        let out = conjugate_operator(&[1.0], &z, &m, &s, 1e-15, 30).unwrap();
        let mut want = m.clone();
        want.add_scaled(&z, -I).unwrap();
        assert_eq!(out.value.max_abs_diff(&want), 0.0);
    }

    #[test]
    fn conjugation_preserves_hamiltonian_structure() {
        let layout = BlockLayout::new(2, 2).unwrap();
        let n = layout.total();
        let mut m = BlockOperator::zeros(layout.clone(), 1, 4);
        m.insert_mode(
            &[1],
            CMatrix::from_fn(n, n, |i, j| C64::new(0.01 * i as f64, 0.02 * j as f64)),
        )
        .unwrap();
        let m = symmetrize(&m, -1.0);
        let mut s = BlockOperator::zeros(layout, 1, 4);
        s.insert_mode(
            &[-1],
            CMatrix::from_fn(n, n, |i, j| {
                C64::new(0.003 * j as f64, -0.001 * (i + j) as f64)
            }),
        )
        .unwrap();
        let s = symmetrize(&s, -1.0);
        let z = BlockOperator::zeros(m.layout().clone(), 1, 4);
        let out = conjugate_operator(&[1.1], &z, &m, &s, 1e-16, 60).unwrap();
        assert!(structure_check(
            &out.value,
            StructureKind::Hamiltonian,
            1e-12
        ));
    }
}
