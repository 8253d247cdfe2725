//! Removal of the unbounded part of the perturbation by an order-reducing
//! conjugation built on the gap between distinct Laplace eigenvalues.

use crate::block::{
    adjoint_defect, beta_norm, commutator_with_laplacian, compose_tracked, conjugate_operator,
    lie_exponential, symmetrize, BlockOperator,
};
use crate::error::{Error, Result};
use crate::linalg::{C64, I, ONE};
use serde::{Deserialize, Serialize};

/// Parameters of the regularizing conjugation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularizeParams {
    pub s: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub nu: f64,
    /// Upper bound on `⟨⟨R⟩⟩_{α,s+ν,σ}`.
    pub smallness_bound: f64,
    pub series_tol: f64,
    pub p_max: usize,
    /// Fraction of `K_max` and `L_max` kept in the conjugacy check.
    pub interior_ratio: f64,
    pub interior_tol: f64,
}

impl RegularizeParams {
    pub fn beta(&self) -> f64 {
        1.0 - 2.0 * self.alpha
    }

    /// Width after the regularizing step.
    pub fn sigma_plus(&self) -> f64 {
        0.75 * self.sigma
    }

    /// Width handed to the KAM iteration.
    pub fn sigma_out(&self) -> f64 {
        0.5 * self.sigma
    }
}

/// Sign of the eigenvalue gap in the generator. `Flipped` exists only so the
/// self-check can confirm that the residual test catches a wrong sign.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Denominator {
    #[default]
    Standard,
    Flipped,
}

/// Norms and checks recorded by [`regularize`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RegularizeDiagnostics {
    /// `⟨⟨R⟩⟩_{α,s+ν,σ}`.
    pub r_norm: f64,
    /// `⟨⟨R'⟩⟩_{-β,s,σ}`.
    pub r_prime_norm: f64,
    /// `⟨⟨𝒜⟩⟩_{α-1,s+ν,σ}`.
    pub generator_norm: f64,
    /// `‖R + [𝒜, -iD²]‖_F / ‖R‖_F`.
    pub generator_residual: f64,
    /// `⟨⟨Z⟩⟩_{-β,s,σ/2}`.
    pub z_norm: f64,
    /// `⟨⟨M⟩⟩_{-β,s,σ/2}`.
    pub m_norm: f64,
    /// `⟨⟨M⟩⟩_{-β,s,3σ/4}`.
    pub m_norm_sigma_plus: f64,
    /// `⟨⟨T - Id⟩⟩_{α-1,s+ν,σ/2}`.
    pub transform_norm: f64,
    pub transform_terms: usize,
    pub series_terms: usize,
    pub series_last_term: f64,
    pub z_hermitian_defect: f64,
    pub m_hamiltonian_defect: f64,
    pub m_diagonal_max: f64,
    /// Largest entry of the difference between the direct conjugation and
    /// the series on the interior window.
    pub interior_defect: f64,
    pub interior_pass: bool,
    /// Discarded Fourier tail of the direct conjugation products.
    pub truncation_loss: f64,
}

/// Output of [`regularize`]: `T ∘ G ∘ T^{-1} = ω·∂_φ - i(D²+Z) + M`.
#[derive(Clone, Debug)]
pub struct RegularizedSystem {
    pub z: BlockOperator,
    pub m: BlockOperator,
    pub generator: BlockOperator,
    /// `T = e^𝒜`.
    pub t: BlockOperator,
    /// `T - Id`.
    pub f: BlockOperator,
    pub diagnostics: RegularizeDiagnostics,
}

/// `𝒜_{[k]}^{[k']}(l) = i R_{[k]}^{[k']}(l)/(λ_k - λ_{k'})`, zero on the diagonal.
pub fn build_regularizer(r: &BlockOperator, tol: f64) -> Result<BlockOperator> {
    build_regularizer_with(r, tol, Denominator::Standard)
}

pub fn build_regularizer_with(
    r: &BlockOperator,
    tol: f64,
    denominator: Denominator,
) -> Result<BlockOperator> {
    let diag = r.max_diagonal_block_norm();
    if diag > tol {
        return Err(Error::DiagonalNotFree { norm: diag, tol });
    }
    let sign = match denominator {
        Denominator::Standard => 1.0,
        Denominator::Flipped => -1.0,
    };
    let layout = r.layout().clone();
    let mut a = r.clone();
    a.for_each_block_mut(|_, k, kp, mut b| {
        if k == kp {
            b.fill(C64::new(0.0, 0.0));
        } else {
            let gap = sign * (layout.lambda(k) - layout.lambda(kp));
            b *= I / gap;
        }
    });
    Ok(a)
}

/// `‖R + [𝒜, -iD²]‖_F / ‖R‖_F` (absolute when `R = 0`).
pub fn generator_residual(r: &BlockOperator, a: &BlockOperator) -> Result<f64> {
    let mut res = commutator_with_laplacian(a);
    res.add_scaled(r, ONE)?;
    let scale = r.frobenius_norm();
    let abs = res.frobenius_norm();
    Ok(if scale > 0.0 { abs / scale } else { abs })
}

/// Conjugates `ω·∂_φ - iD² + R + R'` by `T = e^𝒜`.
pub fn regularize(
    omega: &[f64],
    r: &BlockOperator,
    r_prime: &BlockOperator,
    params: &RegularizeParams,
) -> Result<RegularizedSystem> {
    regularize_with(omega, r, r_prime, params, Denominator::Standard)
}

pub fn regularize_with(
    omega: &[f64],
    r: &BlockOperator,
    r_prime: &BlockOperator,
    params: &RegularizeParams,
    denominator: Denominator,
) -> Result<RegularizedSystem> {
    r.check_compatible(r_prime)?;
    if omega.len() != r.d() {
        return Err(Error::FrequencyCount {
            expected: r.d(),
            found: omega.len(),
        });
    }
    let (s, sigma, alpha) = (params.s, params.sigma, params.alpha);
    let beta = params.beta();
    let scale = r.max_abs().max(r_prime.max_abs()).max(1.0);
    for (name, op) in [("R", r), ("R'", r_prime)] {
        let defect = adjoint_defect(op, -1.0);
        if defect > 1e-10 * scale {
            return Err(Error::param(
                "perturbation",
                format!("{name} is not Hamiltonian (adjoint defect {defect:e})"),
            ));
        }
    }

    let mut diag = RegularizeDiagnostics {
        r_norm: beta_norm(r, alpha, s + params.nu, sigma),
        r_prime_norm: beta_norm(r_prime, -beta, s, sigma),
        ..Default::default()
    };
    if diag.r_norm > params.smallness_bound {
        return Err(Error::Smallness {
            what: "regularization input norm",
            value: diag.r_norm,
            bound: params.smallness_bound,
        });
    }

    let generator = build_regularizer_with(r, 1e-12 * scale, denominator)?;
    diag.generator_norm = beta_norm(&generator, alpha - 1.0, s + params.nu, sigma);
    diag.generator_residual = generator_residual(r, &generator)?;

    let exp = lie_exponential(&generator, params.series_tol, params.p_max)?;
    let t = exp.value;
    diag.transform_terms = exp.terms;
    let mut f = t.clone();
    f.add_scaled(
        &BlockOperator::identity(t.layout().clone(), t.d(), t.l_max()),
        C64::new(-1.0, 0.0),
    )?;
    diag.transform_norm = beta_norm(&f, alpha - 1.0, s + params.nu, params.sigma_out());

    let mut input = r.clone();
    input.add_scaled(r_prime, ONE)?;
    let zero = BlockOperator::zeros(r.layout().clone(), r.d(), r.l_max());
    let total = conjugate_operator(
        omega,
        &zero,
        &input,
        &generator,
        params.series_tol,
        params.p_max,
    )?;
    diag.series_terms = total.terms;
    diag.series_last_term = total.last_term;
    let total = total.value;

    let mut z = total.diag_part();
    z.scale_mut(I);
    let m = total.off_diag_part();
    diag.z_hermitian_defect = adjoint_defect(&z, 1.0);
    diag.m_hamiltonian_defect = adjoint_defect(&m, -1.0);
    let z = symmetrize(&z, 1.0);
    let m = symmetrize(&m, -1.0);
    diag.m_diagonal_max = m.diag_part().max_abs();
    diag.z_norm = beta_norm(&z, -beta, s, params.sigma_out());
    diag.m_norm = beta_norm(&m, -beta, s, params.sigma_out());
    diag.m_norm_sigma_plus = beta_norm(&m, -beta, s, params.sigma_plus());

    let (defect, loss) = interior_defect(omega, &input, &generator, &t, &total, params)?;
    diag.interior_defect = defect;
    diag.truncation_loss = loss;
    diag.interior_pass = defect <= params.interior_tol * total.max_abs().max(1.0);

    Ok(RegularizedSystem {
        z,
        m,
        generator,
        t,
        f,
        diagnostics: diag,
    })
}

/// Compares `T(-iD² + R + R')T^{-1} + T(ω·∂_φ T^{-1}) + iD²` with the series
/// result on the interior window.
fn interior_defect(
    omega: &[f64],
    input: &BlockOperator,
    generator: &BlockOperator,
    t: &BlockOperator,
    total: &BlockOperator,
    params: &RegularizeParams,
) -> Result<(f64, f64)> {
    let layout = input.layout().clone();
    let (d, l_max) = (input.d(), input.l_max());
    let t_inv = lie_exponential(
        &generator.scale(C64::new(-1.0, 0.0)),
        params.series_tol,
        params.p_max,
    )?
    .value;
    let mut y = BlockOperator::minus_i_laplacian(layout.clone(), d, l_max);
    y.add_scaled(input, ONE)?;
    let left = compose_tracked(t, &y)?;
    let conj = compose_tracked(&left.product, &t_inv)?;
    let deriv = compose_tracked(t, &t_inv.omega_derivative(omega)?)?;
    let mut direct = conj.product;
    direct.add_scaled(&deriv.product, ONE)?;
    direct.add_scaled(
        &BlockOperator::minus_i_laplacian(layout.clone(), d, l_max),
        C64::new(-1.0, 0.0),
    )?;
    let k_cut = (layout.k_max() as f64 * params.interior_ratio).floor() as usize;
    let l_cut = l_max as f64 * params.interior_ratio;
    let defect = direct
        .restrict(k_cut, l_cut)
        .max_abs_diff(&total.restrict(k_cut, l_cut));
    let loss = left.truncation_loss + conj.truncation_loss + deriv.truncation_loss;
    Ok((defect, loss))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::{structure_check, BlockLayout, StructureKind};
    use crate::linalg::CMatrix;

    fn params() -> RegularizeParams {
        RegularizeParams {
            s: 2.5,
            sigma: 0.5,
            alpha: 0.3,
            nu: 0.7,
            smallness_bound: 1e3,
            series_tol: 1e-15,
            p_max: 60,
            interior_ratio: 0.5,
            interior_tol: 1e-9,
        }
    }

    fn random_hamiltonian(k_max: usize, l_max: usize, size: f64, seed: u64) -> BlockOperator {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let layout = BlockLayout::new(2, k_max).unwrap();
        let n = layout.total();
        let mut a = BlockOperator::zeros(layout, 1, l_max);
        for l in -(l_max as i32)..=l_max as i32 {
            let decay = (-(l.abs() as f64)).exp();
            a.insert_mode(
                &[l],
                CMatrix::from_fn(n, n, |_, _| {
                    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                        * size
                        * decay
                }),
            )
            .unwrap();
        }
        let a = symmetrize(&a, -1.0);
        let mut out = a.clone();
        out.for_each_block_mut(|_, k, kp, mut b| {
            if k == kp {
                b.fill(C64::new(0.0, 0.0));
            }
        });
        out
    }

    #[test]
    fn zero_input_gives_identity() {
        let layout = BlockLayout::new(2, 3).unwrap();
        let zero = BlockOperator::zeros(layout.clone(), 1, 2);
        let out = regularize(&[1.1], &zero, &zero, &params()).unwrap();
        assert!(out.z.is_zero() && out.m.max_abs() == 0.0);
        assert_eq!(
            out.t.max_abs_diff(&BlockOperator::identity(layout, 1, 2)),
            0.0
        );
    }

    #[test]
    fn bounded_part_only_splits_directly() {
        let r_prime = symmetrize(&random_hamiltonian(3, 2, 0.01, 4), -1.0);
        let mut r_prime = r_prime;
        let n = r_prime.size();
        *r_prime.mode_mut(&[0]).unwrap() += CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(0.0, 0.01 * i as f64)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let zero = BlockOperator::zeros(r_prime.layout().clone(), 1, 2);
        let out = regularize(&[1.1], &zero, &r_prime, &params()).unwrap();
        assert!(out.generator.is_zero());
        let mut want_z = r_prime.diag_part();
        want_z.scale_mut(I);
        assert!(out.z.max_abs_diff(&want_z) < 1e-15);
        assert!(out.m.max_abs_diff(&r_prime.off_diag_part()) < 1e-15);
    }

    #[test]
    fn single_block_generator() {
        let layout = BlockLayout::new(2, 3).unwrap();
        let mut r = BlockOperator::zeros(layout, 1, 1);
        let b = CMatrix::from_fn(3, 7, |i, j| C64::new(i as f64 + 1.0, j as f64));
        r.set_block(&[1], 1, 3, &b).unwrap();
        let a = build_regularizer(&r, 1e-12).unwrap();
        let got = a.block(&[1], 1, 3).unwrap().into_owned();
        assert!((got - &b * C64::new(0.0, -0.1)).norm() < 1e-14);
    }

    #[test]
    fn generator_solves_commutator_equation() {
        for seed in 0..5 {
            let r = random_hamiltonian(4, 2, 1.0, seed);
            let a = build_regularizer(&r, 1e-12).unwrap();
            assert!(generator_residual(&r, &a).unwrap() < 1e-12);
            assert!(structure_check(&a, StructureKind::Hamiltonian, 1e-13));
        }
    }

    #[test]
    fn flipped_denominator_breaks_residual() {
        let r = random_hamiltonian(3, 1, 1.0, 9);
        let a = build_regularizer_with(&r, 1e-12, Denominator::Flipped).unwrap();
        assert!(generator_residual(&r, &a).unwrap() > 1.0);
    }

    #[test]
    fn diagonal_blocks_rejected() {
        let layout = BlockLayout::new(2, 2).unwrap();
        let mut r = BlockOperator::zeros(layout, 1, 1);
        r.set_block(&[0], 1, 1, &CMatrix::identity(3, 3)).unwrap();
        assert!(matches!(
            build_regularizer(&r, 1e-12),
            Err(Error::DiagonalNotFree { .. })
        ));
    }

    #[test]
    fn small_input_conjugates_consistently() {
        let r = random_hamiltonian(6, 3, 1e-3, 2);
        let zero = BlockOperator::zeros(r.layout().clone(), 1, 3);
        let out = regularize(&[1.2], &r, &zero, &params()).unwrap();
        let d = &out.diagnostics;
        assert!(d.interior_pass, "{d:?}");
        assert!(structure_check(&out.z, StructureKind::NormalForm, 1e-12));
        assert!(structure_check(&out.m, StructureKind::Hamiltonian, 1e-12));
        assert!(d.m_diagonal_max == 0.0);
        assert!(d.generator_residual < 1e-12);
    }

    #[test]
    fn smallness_violation_reported() {
        let r = random_hamiltonian(3, 1, 1.0, 1);
        let zero = BlockOperator::zeros(r.layout().clone(), 1, 1);
        let p = RegularizeParams {
            smallness_bound: 1e-3,
            ..params()
        };
        assert!(matches!(
            regularize(&[1.0], &r, &zero, &p),
            Err(Error::Smallness { .. })
        ));
    }
}
