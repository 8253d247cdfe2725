//! Invariant suites shared by the self-check and the acceptance tests.
//!
//! Every suite is deterministic given its seed and returns named checks with
//! the measured value and the bound it was compared against.

use crate::block::dense::DenseWindow;
use crate::block::{
    apply, beta_norm, commutator, compose, conjugate_operator, decay_norm, hs_norm,
    lie_exponential, modes_in_ball, sobolev_norm, symmetrize, BlockLayout, BlockOperator, Side,
    StateVector,
};
use crate::error::Result;
use crate::kam::{
    homological_residual, in_diophantine_g0, in_melnikov_set, solve_homological, MelnikovParams,
    NormalForm, ScanMode,
};
use crate::linalg::{hermitian_eigen, op_norm, spectral_norm, CMatrix, CVector, C64, I, ONE};
use crate::regularization::{build_regularizer_with, generator_residual, Denominator};
use crate::spectral::laplace_eigenvalue_exact;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use std::time::Instant;

/// One named pass/fail check: passes when `value <= bound`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub suite: String,
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub bound: f64,
}

impl CheckResult {
    pub fn at_most(suite: &str, name: &str, value: f64, bound: f64) -> Self {
        CheckResult {
            suite: suite.into(),
            name: name.into(),
            pass: value.is_finite() && value <= bound,
            value,
            bound,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "[{}] {}/{}: value {:.3e} bound {:.3e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.suite,
            self.name,
            self.value,
            self.bound
        )
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn cplx(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

/// Random operator on `|l| <= l_max` with entries damped by
/// `e^{-ρ|l|} e^{-η|k-k'|}`.
pub fn random_operator(
    layout: &Arc<BlockLayout>,
    d: usize,
    l_max: usize,
    rho: f64,
    eta: f64,
    rng: &mut ChaCha8Rng,
) -> BlockOperator {
    let n = layout.total();
    let mut a = BlockOperator::zeros(layout.clone(), d, l_max);
    for l in modes_in_ball(d, l_max) {
        let dl = (-rho * crate::block::mode_norm(&l)).exp();
        let m = CMatrix::from_fn(n, n, |i, j| {
            let h = layout.block_of(i).abs_diff(layout.block_of(j)) as f64;
            cplx(rng) * dl * (-eta * h).exp()
        });
        a.insert_mode(&l, m).expect("mode inside the ball");
    }
    a
}

/// Random operator with `iA` Hermitian.
pub fn random_hamiltonian(
    layout: &Arc<BlockLayout>,
    d: usize,
    l_max: usize,
    scale: f64,
    rng: &mut ChaCha8Rng,
) -> BlockOperator {
    symmetrize(
        &random_operator(layout, d, l_max, 1.0, 0.5, rng).scale(C64::new(scale, 0.0)),
        -1.0,
    )
}

/// Random normal form rescaled to `⟨⟨Z⟩⟩_{-β} = size`.
pub fn random_normal_form(
    layout: &Arc<BlockLayout>,
    beta: f64,
    size: f64,
    rng: &mut ChaCha8Rng,
) -> Result<NormalForm> {
    let blocks: Vec<CMatrix> = (0..=layout.k_max())
        .map(|k| {
            let d = layout.dim(k);
            let a = CMatrix::from_fn(d, d, |_, _| cplx(rng));
            &a + a.adjoint()
        })
        .collect();
    let nf = NormalForm::from_blocks(layout.clone(), blocks)?;
    let norm = nf.beta_norm(-beta);
    let scaled = (0..=layout.k_max())
        .map(|k| nf.block(k) * C64::new(size / norm, 0.0))
        .collect();
    NormalForm::from_blocks(layout.clone(), scaled)
}

/// Number of pairs `k != k' <= k_max` violating `|λ_k - λ_{k'}| >= k + k'`,
/// checked in exact integer arithmetic.
pub fn separation_violations(n: usize, k_max: usize) -> usize {
    let mut bad = 0;
    for k in 0..=k_max {
        for kp in 0..=k_max {
            if k != kp {
                let gap = laplace_eigenvalue_exact(k, n).abs_diff(laplace_eigenvalue_exact(kp, n));
                if gap < (k + kp) as u64 {
                    bad += 1;
                }
            }
        }
    }
    bad
}

/// Largest spectral norm over blocks with `k + k'` even.
pub fn even_block_norm(a: &BlockOperator) -> f64 {
    let mut worst: f64 = 0.0;
    for l in a.modes().keys() {
        for k in 0..=a.k_max() {
            for kp in 0..=a.k_max() {
                if (k + kp) % 2 == 0 {
                    worst = worst.max(spectral_norm(a.block(l, k, kp).expect("mode present")));
                }
            }
        }
    }
    worst
}

/// Worst relative residual of `R + [𝒜, -iD²] = 0` over random block-off-diagonal
/// Hamiltonian `R`.
pub fn generator_identity(seed: u64, count: usize, denominator: Denominator) -> Result<f64> {
    let mut rng = rng(seed);
    let layout = BlockLayout::new(2, 5)?;
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let mut r = random_hamiltonian(&layout, 2, 2, 1.0, &mut rng);
        r.for_each_block_mut(|_, k, kp, mut b| {
            if k == kp {
                b.fill(C64::new(0.0, 0.0));
            }
        });
        let a = build_regularizer_with(&r, 1e-12, denominator)?;
        worst = worst.max(generator_residual(&r, &a)?);
    }
    Ok(worst)
}

/// Homological equation on random Hamiltonian remainders.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomologicalSuite {
    /// Worst `|residual|_{s,σ} / (1 + |M|_{s,σ})`.
    pub worst_residual: f64,
    pub instances: usize,
    /// Frequencies drawn and rejected before each accepted one.
    pub rejected_frequencies: usize,
    pub seconds: f64,
}

/// Solves the homological equation for `count` random `(ω, Z, M)` with
/// `n = 2, d = 2, K_max = 6, L_max = 3`, keeping only frequencies that pass
/// the first- and second-order non-resonance conditions at `K = 3`.
pub fn homological_suite(
    seed: u64,
    count: usize,
    params: &MelnikovParams,
) -> Result<HomologicalSuite> {
    let start = Instant::now();
    let mut rng = rng(seed);
    let layout = BlockLayout::new(2, 6)?;
    let (k_cut, s, sigma) = (3, 2.5, 0.25);
    let mut worst: f64 = 0.0;
    let mut rejected = 0;
    for _ in 0..count {
        let nf = random_normal_form(&layout, params.beta, params.gamma / 8.0, &mut rng)?;
        let omega = loop {
            let w: Vec<f64> = (0..2).map(|_| rng.random_range(0.5..1.5)).collect();
            let g0 = in_diophantine_g0(&w, params.gamma, params.tau0, 64).member;
            if g0 && in_melnikov_set(&w, &nf, params, k_cut, ScanMode::Exhaustive)?.member {
                break w;
            }
            rejected += 1;
        };
        let m = random_hamiltonian(&layout, 2, 3, 1.0, &mut rng);
        let (sol, tail) = solve_homological(&omega, &nf, &m, params, k_cut)?;
        let res = homological_residual(&omega, &nf, &m, &sol, &tail)?;
        worst = worst.max(decay_norm(&res, s, sigma) / (1.0 + decay_norm(&m, s, sigma)));
    }
    Ok(HomologicalSuite {
        worst_residual: worst,
        instances: count,
        rejected_frequencies: rejected,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn dense_commutator(
    w: &DenseWindow,
    a: &BlockOperator,
    b: &BlockOperator,
) -> Result<BlockOperator> {
    let (fa, fb) = (w.flatten(a), w.flatten(b));
    w.unflatten(&(&fa * &fb - &fb * &fa), a)
}

/// Largest entry difference between the block algebra and flattened dense
/// matrices: `(compose, commutator, exact conjugation, truncated conjugation)`.
pub fn dense_oracle(seed: u64, k_max: usize, l_max: usize) -> Result<[f64; 4]> {
    let mut rng = rng(seed);
    let layout = BlockLayout::new(2, k_max)?;
    let d = 1;
    let a = random_operator(&layout, d, l_max, 0.7, 0.3, &mut rng);
    let b = random_operator(&layout, d, l_max, 0.7, 0.3, &mut rng);
    let w = DenseWindow::new(d, l_max, layout.total());
    let (fa, fb) = (w.flatten(&a), w.flatten(&b));
    let prod = w.unflatten(&(&fa * &fb), &a)?;
    let e_compose = compose(&a, &b)?.max_abs_diff(&prod);
    let e_comm = commutator(&a, &b)?.max_abs_diff(&dense_commutator(&w, &a, &b)?);

    let omega = [1.37];
    let m = random_hamiltonian(&layout, d, l_max, 0.3, &mut rng);
    let zero = BlockOperator::zeros(layout.clone(), d, l_max);
    let lam: Vec<C64> = layout
        .lambda_flat()
        .into_iter()
        .map(|x| C64::new(x, 0.0))
        .collect();
    let minus_i_lap = BlockOperator::minus_i_laplacian(layout.clone(), d, l_max);

    // φ-independent generator: the conjugation never leaves the window.
    let mut s0 = BlockOperator::zeros(layout.clone(), d, l_max);
    s0.insert_mode(
        &[0],
        random_hamiltonian(&layout, d, 0, 0.4, &mut rng)
            .mode(&[0])
            .unwrap()
            .clone(),
    )?;
    let series = conjugate_operator(&omega, &zero, &m, &s0, 1e-16, 80)?.value;
    let big = DenseWindow::new(d, 2 * l_max, layout.total());
    let (e_plus, e_minus) = (
        crate::block::dense::dense_exp(&big.flatten(&s0)),
        crate::block::dense::dense_exp(&big.flatten(&s0.scale(C64::new(-1.0, 0.0)))),
    );
    let mut gen = big.derivative(&omega);
    gen += big.flatten(&minus_i_lap);
    gen += big.flatten(&m);
    let mut conj = &e_plus * gen * &e_minus;
    conj -= big.derivative(&omega);
    conj -= big.flatten(&minus_i_lap);
    let e_exact = series.max_abs_diff(&big.unflatten(&conj, &m)?);

    // φ-dependent generator: dense products, truncated after every term.
    let s1 = random_hamiltonian(&layout, d, l_max, 0.05, &mut rng);
    let series = conjugate_operator(&omega, &zero, &m, &s1, 1e-16, 80)?.value;
    let mut term = s1.commute_with_diagonal(&lam).scale(-I);
    term.add_scaled(&dense_commutator(&w, &s1, &m)?, ONE)?;
    let deriv = {
        let f = w.flatten(&s1);
        let dd = w.derivative(&omega);
        w.unflatten(&(&dd * &f - &f * &dd), &s1)?
    };
    term.add_scaled(&deriv, C64::new(-1.0, 0.0))?;
    let mut total = m.clone();
    for p in 1..80 {
        if p > 1 {
            term = dense_commutator(&w, &s1, &term)?.scale(C64::new(1.0 / p as f64, 0.0));
        }
        total.add_scaled(&term, ONE)?;
        if term.max_abs() < 1e-18 {
            break;
        }
    }
    let e_trunc = series.max_abs_diff(&total);
    Ok([e_compose, e_comm, e_exact, e_trunc])
}

/// Fitted constant of one inequality: the largest ratio of the left side to
/// the right side without its constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedConstant {
    pub name: String,
    pub fitted: f64,
    /// Constant given in the statement, when it is explicit.
    pub stated: Option<f64>,
    pub instances: usize,
}

struct Fit {
    name: &'static str,
    stated: Option<f64>,
    worst: f64,
}

/// Fits the constants of the decay-norm algebra, smoothing and eigenvalue
/// inequalities on `count` random instances each.
pub fn norm_inequality_constants(seed: u64, count: usize) -> Result<Vec<FittedConstant>> {
    let mut rng = rng(seed);
    let layout = BlockLayout::new(2, 4)?;
    let (d, l_max, s, sigma) = (1usize, 3usize, 2.5, 0.5);
    let s0 = (d as f64 + 1.0) / 2.0;
    let mut fits = vec![
        Fit {
            name: "action on sequences",
            stated: None,
            worst: 0.0,
        },
        Fit {
            name: "product of decay norms",
            stated: None,
            worst: 0.0,
        },
        Fit {
            name: "Fourier tail",
            stated: None,
            worst: 0.0,
        },
        Fit {
            name: "smoothing conjugation",
            stated: None,
            worst: 0.0,
        },
        Fit {
            name: "pointwise decay",
            stated: None,
            worst: 0.0,
        },
        Fit {
            name: "smoothing product",
            stated: None,
            worst: 0.0,
        },
        Fit {
            name: "smoothing Fourier tail",
            stated: None,
            worst: 0.0,
        },
        Fit {
            name: "smoothing product, negative orders",
            stated: None,
            worst: 0.0,
        },
        Fit {
            name: "smoothing action",
            stated: None,
            worst: 0.0,
        },
        Fit {
            name: "pointwise smoothing action",
            stated: None,
            worst: 0.0,
        },
        Fit {
            name: "exponential remainder",
            stated: None,
            worst: 0.0,
        },
        Fit {
            name: "eigenvalue size",
            stated: Some(1.0),
            worst: 0.0,
        },
        Fit {
            name: "eigenvalue Lipschitz",
            stated: Some(1.0),
            worst: 0.0,
        },
        Fit {
            name: "normal form eigenvalues",
            stated: Some(1.0),
            worst: 0.0,
        },
    ];
    let mut record = |i: usize, v: f64| fits[i].worst = fits[i].worst.max(v);

    for _ in 0..count {
        let rho = rng.random_range(0.5..1.5);
        let eta = rng.random_range(0.0..1.0);
        let a = random_operator(&layout, d, l_max, rho, eta, &mut rng);
        let b = random_operator(&layout, d, l_max, rho, eta, &mut rng);
        let na = decay_norm(&a, s, sigma);

        let mut z = StateVector::zeros(layout.clone(), d, l_max);
        for l in modes_in_ball(d, l_max) {
            let decay = (-rho * crate::block::mode_norm(&l)).exp();
            let v = CVector::from_fn(layout.total(), |i, _| {
                cplx(&mut rng) * decay / (1.0 + layout.block_of(i) as f64).powi(3)
            });
            z.insert_mode(&l, v)?;
        }
        let nz = sobolev_norm(&z, s, sigma);
        record(0, sobolev_norm(&apply(&a, &z)?, s, sigma) / (na * nz));
        record(
            1,
            decay_norm(&compose(&a, &b)?, s, sigma) / (na * decay_norm(&b, s, sigma)),
        );

        let cut = rng.random_range(1..=l_max);
        let sp = sigma * rng.random_range(0.1..0.9);
        let gap = sigma - sp;
        let shape = (gap * cut as f64).exp() * gap.powi(d as i32);
        record(2, decay_norm(&a.fourier_tail(cut), s, sp) * shape / na);

        let beta = rng.random_range(0.2..1.0);
        let conj = decay_norm(
            &a.scale_by_d(beta, Side::Left)
                .scale_by_d(-beta, Side::Right),
            s,
            sigma,
        ) + decay_norm(
            &a.scale_by_d(-beta, Side::Left)
                .scale_by_d(beta, Side::Right),
            s,
            sigma,
        );
        record(3, conj / decay_norm(&a, s + beta, sigma));

        let mut sup: f64 = 0.0;
        for q in 0..16 {
            let phi = [std::f64::consts::TAU * (q as f64 + 0.25) / 16.0];
            sup = sup.max(pointwise_decay(&layout, &a.evaluate(&phi), s));
        }
        record(4, sup * sigma.powf(s0 + d as f64) / na);

        let al = rng.random_range(-0.8..0.8);
        let be = rng.random_range(-0.8..0.8);
        let ab = compose(&a, &b)?;
        record(
            5,
            beta_norm(&ab, al + be, s, sigma)
                / (beta_norm(&a, al, s + be.abs(), sigma) * beta_norm(&b, be, s + al.abs(), sigma)),
        );
        record(
            6,
            beta_norm(&b.fourier_tail(cut), be, s, sp) * shape / beta_norm(&b, be, s, sigma),
        );

        let neg_b = -rng.random_range(0.1..0.8);
        let neg_a = neg_b - rng.random_range(0.0..0.8);
        record(
            7,
            beta_norm(&ab, neg_b, s, sigma)
                / (beta_norm(&a, neg_a, s, sigma) * beta_norm(&b, neg_b, s, sigma)),
        );

        let sm = rng.random_range(0.1..1.0);
        let dah = apply(&a.scale_by_d(sm, Side::Left), &z)?;
        record(
            8,
            sobolev_norm(&dah, s, sigma) / (beta_norm(&a, -sm, s, sigma) * nz),
        );

        let v = CVector::from_fn(layout.total(), |i, _| {
            cplx(&mut rng) / (1.0 + layout.block_of(i) as f64).powi(3)
        });
        let phi = [rng.random_range(0.0..std::f64::consts::TAU)];
        let av = a.evaluate(&phi) * &v;
        record(
            9,
            hs_norm(&layout, &av, s + sm) * sigma.powf(s0 + d as f64)
                / (beta_norm(&a, -sm, s, sigma) * hs_norm(&layout, &v, s)),
        );

        let neg = -rng.random_range(0.1..0.8);
        let h = symmetrize(&a, -1.0);
        let h = h.scale(C64::new(
            rng.random_range(0.01..0.1) / beta_norm(&h, neg, s, sigma),
            0.0,
        ));
        let mut psi = lie_exponential(&h, 1e-16, 80)?.value;
        psi.add_scaled(
            &BlockOperator::identity(layout.clone(), d, l_max),
            C64::new(-1.0, 0.0),
        )?;
        record(
            10,
            beta_norm(&psi, neg, s, sigma) / beta_norm(&h, neg, s, sigma),
        );

        let p = rng.random_range(2..12);
        let x = CMatrix::from_fn(p, p, |_, _| cplx(&mut rng));
        let herm = &x + x.adjoint();
        let (mu, _) = hermitian_eigen(&herm);
        let top = mu.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        record(11, top / op_norm(&herm));
        let y = CMatrix::from_fn(p, p, |_, _| cplx(&mut rng));
        let pert = (&y + y.adjoint()) * C64::new(rng.random_range(1e-3..1.0), 0.0);
        let (mu2, _) = hermitian_eigen(&(&herm + &pert));
        let shift = mu
            .iter()
            .zip(&mu2)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        record(12, shift / op_norm(&pert));

        let nf_beta = rng.random_range(0.1..1.0);
        let nf = random_normal_form(&layout, nf_beta, rng.random_range(0.01..1.0), &mut rng)?;
        let zop = nf.to_operator(d, l_max);
        record(
            13,
            nf.weighted_eigenvalue_max(nf_beta) / beta_norm(&zop, -nf_beta, s, sigma),
        );
    }
    Ok(fits
        .into_iter()
        .map(|f| FittedConstant {
            name: f.name.into(),
            fitted: f.worst,
            stated: f.stated,
            instances: count,
        })
        .collect())
}

/// `(Σ_h ⟨h⟩^{2s} sup_{|k-k'|=h} ‖A_{[k]}^{[k']}‖²)^{1/2}` of a matrix on the
/// flattened basis.
pub fn pointwise_decay(layout: &BlockLayout, a: &CMatrix, s: f64) -> f64 {
    let km = layout.k_max();
    let mut total = 0.0;
    for h in 0..=km {
        let mut sup: f64 = 0.0;
        for k in 0..=km {
            for kp in [k + h, k.wrapping_sub(h)] {
                if kp > km || (h == 0 && kp != k) {
                    continue;
                }
                let (rk, rkp) = (layout.range(k), layout.range(kp));
                sup = sup.max(spectral_norm(
                    a.view((rk.start, rkp.start), (rk.len(), rkp.len())),
                ));
            }
        }
        total += crate::block::bracket_k(h).powf(2.0 * s) * sup * sup;
    }
    total.sqrt()
}

/// Fits on two seeds: each inequality passes when the two fitted constants
/// agree within `ratio` and explicit constants are respected.
pub fn norm_inequality_suite(
    seeds: [u64; 2],
    count: usize,
    ratio: f64,
) -> Result<(Vec<CheckResult>, Vec<[FittedConstant; 2]>)> {
    let a = norm_inequality_constants(seeds[0], count)?;
    let b = norm_inequality_constants(seeds[1], count)?;
    let mut checks = Vec::new();
    let mut pairs = Vec::new();
    for (x, y) in a.into_iter().zip(b) {
        let spread = x.fitted.max(y.fitted) / x.fitted.min(y.fitted);
        let mut check = CheckResult::at_most("norms", &x.name, spread, ratio);
        if let Some(c) = x.stated {
            check.pass &= x.fitted <= c * (1.0 + 1e-12) && y.fitted <= c * (1.0 + 1e-12);
        }
        checks.push(check);
        pairs.push([x, y]);
    }
    Ok((checks, pairs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separation_holds_on_spheres() {
        assert_eq!(separation_violations(2, 64), 0);
        assert_eq!(separation_violations(3, 30), 0);
    }

    #[test]
    fn flipped_denominator_breaks_generator_identity() {
        assert!(generator_identity(1, 3, Denominator::Standard).unwrap() < 1e-13);
        assert!(generator_identity(1, 3, Denominator::Flipped).unwrap() > 1.0);
    }

    #[test]
    fn dense_oracle_small() {
        let errs = dense_oracle(3, 2, 1).unwrap();
        for e in errs {
            assert!(e < 1e-11, "{errs:?}");
        }
    }

    #[test]
    fn pointwise_decay_of_identity() {
        let layout = BlockLayout::new(2, 3).unwrap();
        let id = CMatrix::identity(layout.total(), layout.total());
        assert!((pointwise_decay(&layout, &id, 2.0) - 1.0).abs() < 1e-14);
    }
}
