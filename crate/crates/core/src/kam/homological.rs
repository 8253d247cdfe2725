use super::melnikov::{dot, melnikov_threshold, MelnikovParams};
use super::normal_form::NormalForm;
use crate::block::{commutator, mode_norm_sq, BlockOperator};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64, I, ONE};

/// Solution `(S, R)` of `-ω·∂_φ S + i[D²+Z, S] + M = Diag M + R`, where `R`
/// holds the modes `|l| > K` of `M` and `S` lives on `|l| <= K`.
///
/// In the eigenbasis of `Z` each entry is `i M̂_{jj'} / (-ω·l + λ_k + μ_{k,j} - λ_{k'} - μ_{k',j'})`.
pub fn solve_homological(
    omega: &[f64],
    nf: &NormalForm,
    m: &BlockOperator,
    params: &MelnikovParams,
    k_cut: usize,
) -> Result<(BlockOperator, BlockOperator)> {
    if omega.len() != m.d() {
        return Err(Error::FrequencyCount {
            expected: m.d(),
            found: omega.len(),
        });
    }
    let layout = m.layout().clone();
    let km = layout.k_max();
    let threshold = melnikov_threshold(params.gamma, params.tau, k_cut);
    let r2 = (k_cut * k_cut) as i64;
    let mut s = BlockOperator::zeros(layout.clone(), m.d(), m.l_max());
    let mut r = BlockOperator::zeros(layout.clone(), m.d(), m.l_max());
    for (l, block) in m.modes() {
        if mode_norm_sq(l) > r2 {
            r.insert_mode(l, block.clone())?;
            continue;
        }
        let x = dot(omega, l);
        let is_zero = l.iter().all(|&c| c == 0);
        let mut out = CMatrix::zeros(block.nrows(), block.ncols());
        for k in 0..=km {
            let rk = layout.range(k);
            let uk = nf.eigenvectors(k);
            for kp in 0..=km {
                if is_zero && k == kp {
                    continue;
                }
                let rkp = layout.range(kp);
                let sub = block.view((rk.start, rkp.start), (rk.len(), rkp.len()));
                if sub.iter().all(|z| *z == C64::new(0.0, 0.0)) {
                    continue;
                }
                let ukp = nf.eigenvectors(kp);
                let mut rot = uk.adjoint() * sub * ukp;
                let base = -x + layout.lambda(k) - layout.lambda(kp);
                for (j, mu) in nf.eigenvalues(k).iter().enumerate() {
                    for (jp, mup) in nf.eigenvalues(kp).iter().enumerate() {
                        let div = base + mu - mup;
                        if div.abs() < threshold {
                            return Err(Error::Resonant {
                                l: l.clone(),
                                k,
                                k_prime: kp,
                                j,
                                j_prime: jp,
                                divisor: div.abs(),
                                threshold,
                            });
                        }
                        rot[(j, jp)] *= I / div;
                    }
                }
                out.view_mut((rk.start, rkp.start), (rk.len(), rkp.len()))
                    .copy_from(&(uk * rot * ukp.adjoint()));
            }
        }
        s.insert_mode(l, out)?;
    }
    s.prune(0.0);
    Ok((s, r))
}

/// `-ω·∂_φ S + i[D²+Z, S] + M - Diag M - R`, evaluated with the generic
/// derivative and commutator routines.
pub fn homological_residual(
    omega: &[f64],
    nf: &NormalForm,
    m: &BlockOperator,
    s: &BlockOperator,
    r: &BlockOperator,
) -> Result<BlockOperator> {
    let lam: Vec<C64> = m
        .layout()
        .lambda_flat()
        .into_iter()
        .map(|x| C64::new(x, 0.0))
        .collect();
    let mut res = s.omega_derivative(omega)?.scale(C64::new(-1.0, 0.0));
    // i(D²S - SD²) = -i(SD² - D²S)
    res.add_scaled(&s.commute_with_diagonal(&lam), -I)?;
    let z = nf.to_operator(m.d(), m.l_max());
    res.add_scaled(&commutator(&z, s)?, I)?;
    res.add_scaled(m, ONE)?;
    res.add_scaled(&m.diag_part(), C64::new(-1.0, 0.0))?;
    res.add_scaled(r, C64::new(-1.0, 0.0))?;
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::{decay_norm, structure_check, symmetrize, BlockLayout, StructureKind};
    use rand::{Rng, SeedableRng};

    fn params() -> MelnikovParams {
        MelnikovParams {
            gamma: 0.05,
            tau: 19.5,
            tau0: 3.0,
            beta: 0.4,
        }
    }

    #[test]
    fn scalar_entry() {
        let layout = BlockLayout::new(2, 1).unwrap();
        let mut m = BlockOperator::zeros(layout.clone(), 1, 1);
        let mut b = CMatrix::zeros(3, 1);
        b[(0, 0)] = ONE;
        m.set_block(&[1], 1, 0, &b).unwrap();
        let nf = NormalForm::zero(layout);
        // block (k=1, k'=0): divisor -0.7 + 2 - 0
        let (s, r) = solve_homological(&[0.7], &nf, &m, &params(), 1).unwrap();
        assert!(r.is_zero());
        let got = s.block(&[1], 1, 0).unwrap()[(0, 0)];
        assert!((got - I / 1.3).norm() < 1e-15);
    }

    #[test]
    fn normal_form_input_needs_no_generator() {
        let layout = BlockLayout::new(2, 2).unwrap();
        let mut m = BlockOperator::zeros(layout.clone(), 1, 1);
        m.set_block(&[0], 2, 2, &(CMatrix::identity(5, 5) * I))
            .unwrap();
        let (s, r) =
            solve_homological(&[1.1], &NormalForm::zero(layout), &m, &params(), 1).unwrap();
        assert!(s.is_zero() && r.is_zero());
    }

    #[test]
    fn random_hamiltonian_residual() {
        let layout = BlockLayout::new(2, 4).unwrap();
        let n = layout.total();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut m = BlockOperator::zeros(layout.clone(), 2, 2);
        for l in crate::block::modes_in_ball(2, 2) {
            m.insert_mode(
                &l,
                CMatrix::from_fn(n, n, |_, _| {
                    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                }),
            )
            .unwrap();
        }
        let m = symmetrize(&m, -1.0);
        let blocks = (0..=4)
            .map(|k| {
                let d = layout.dim(k);
                let a = CMatrix::from_fn(d, d, |_, _| {
                    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                });
                (&a + a.adjoint()) * C64::new(1e-3, 0.0)
            })
            .collect();
        let nf = NormalForm::from_blocks(layout, blocks).unwrap();
        let omega = [0.757967, 1.422353];
        let (s, r) = solve_homological(&omega, &nf, &m, &params(), 1).unwrap();
        assert!(!r.is_zero());
        assert!(structure_check(&s, StructureKind::Hamiltonian, 1e-12));
        let res = homological_residual(&omega, &nf, &m, &s, &r).unwrap();
        assert!(decay_norm(&res, 2.5, 0.25) <= 1e-10 * (1.0 + decay_norm(&m, 2.5, 0.25)));
    }

    #[test]
    fn resonance_reported() {
        let layout = BlockLayout::new(2, 2).unwrap();
        let mut m = BlockOperator::zeros(layout.clone(), 1, 1);
        m.set_block(&[1], 2, 1, &CMatrix::from_element(5, 3, ONE))
            .unwrap();
        // -ω·l + λ_2 - λ_1 = -4 + 4
        let err =
            solve_homological(&[4.0], &NormalForm::zero(layout), &m, &params(), 1).unwrap_err();
        assert!(matches!(
            err,
            Error::Resonant {
                k: 2,
                k_prime: 1,
                ..
            }
        ));
    }
}
