use super::normal_form::NormalForm;
use crate::block::{for_each_in_ball, mode_norm};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Parameters of the non-resonance conditions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MelnikovParams {
    pub gamma: f64,
    pub tau: f64,
    pub tau0: f64,
    pub beta: f64,
}

/// `2γ/K^τ`.
pub fn melnikov_threshold(gamma: f64, tau: f64, k: usize) -> f64 {
    2.0 * gamma / (k.max(1) as f64).powf(tau)
}

/// A tuple `(l, k, k', j, j')` and its divisor
/// `|ω·l + λ_k + μ_{k,j} - λ_{k'} - μ_{k',j'}|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    pub l: Vec<i32>,
    pub k: usize,
    pub k_prime: usize,
    pub j: usize,
    pub j_prime: usize,
    pub divisor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiophantineScan {
    pub member: bool,
    /// `min_l (|ω·l| - 4γ/|l|^{τ_0})`.
    pub worst_margin: f64,
    pub worst_mode: Option<Vec<i32>>,
}

/// `|ω·l| ≥ 4γ/|l|^{τ_0}` for `0 < |l| <= l_check`.
pub fn in_diophantine_g0(omega: &[f64], gamma: f64, tau0: f64, l_check: usize) -> DiophantineScan {
    let mut worst = f64::INFINITY;
    let mut worst_mode = None;
    for_each_in_ball(omega.len(), l_check, |l| {
        if l.iter().all(|&x| x == 0) {
            return;
        }
        let margin = dot(omega, l).abs() - 4.0 * gamma / mode_norm(l).powf(tau0);
        if margin < worst {
            worst = margin;
            worst_mode = Some(l.to_vec());
        }
    });
    DiophantineScan {
        member: worst >= 0.0,
        worst_margin: worst,
        worst_mode,
    }
}

/// Which tuples the Melnikov scan visits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ScanMode {
    /// Skips tuples that cannot be resonant: `l = 0` with `k != k'`,
    /// `k + k' > safety·4(1+|ω|)|l|`, and `k = k' >= |l|^{τ_0/β}` whenever
    /// `|ω·l| ≥ 4γ/|l|^{τ_0}`.
    Localized { safety: f64 },
    /// Every tuple with `|l| <= K` and `(l,k,k') != (0,k,k)`.
    Exhaustive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MelnikovScan {
    pub member: bool,
    pub threshold: f64,
    /// Smallest divisor among the scanned tuples.
    pub min_divisor: f64,
    /// `min_divisor - threshold`.
    pub worst_margin: f64,
    pub worst: Option<Resonance>,
    /// Number of `(l, k, k')` triples whose eigenvalue divisors were evaluated.
    pub triples_evaluated: usize,
}

/// Localization constant `safety·4(1 + |ω|)`.
pub fn localization_constant(omega: &[f64], safety: f64) -> f64 {
    safety * 4.0 * (1.0 + omega.iter().map(|w| w * w).sum::<f64>().sqrt())
}

/// True when the tuple lies in the region the localized scan visits.
pub fn localized(
    omega: &[f64],
    params: &MelnikovParams,
    safety: f64,
    l: &[i32],
    k: usize,
    kp: usize,
) -> bool {
    let norm = mode_norm(l);
    if norm == 0.0 {
        return false;
    }
    if (k + kp) as f64 > localization_constant(omega, safety) * norm {
        return false;
    }
    if k == kp {
        let g0 = dot(omega, l).abs() >= 4.0 * params.gamma / norm.powf(params.tau0);
        if g0 && (k as f64) >= norm.powf(params.tau0 / params.beta) {
            return false;
        }
    }
    true
}

/// Second-order Melnikov conditions
/// `|ω·l + λ_k + μ_{k,j} - λ_{k'} - μ_{k',j'}| ≥ 2γ/K^τ` for `|l| <= K`.
///
/// The search visits, for each `l`, only the eigenvalue gaps `λ_k - λ_{k'}`
/// within `2 max|μ|` of the running minimum, which finds the exact minimum.
pub fn in_melnikov_set(
    omega: &[f64],
    nf: &NormalForm,
    params: &MelnikovParams,
    k_cut: usize,
    mode: ScanMode,
) -> Result<MelnikovScan> {
    let norm = nf.beta_norm(-params.beta);
    if norm > params.gamma / 4.0 {
        return Err(Error::NormalFormTooLarge {
            norm,
            bound: params.gamma / 4.0,
        });
    }
    let layout = nf.layout();
    let km = layout.k_max();
    let threshold = melnikov_threshold(params.gamma, params.tau, k_cut);
    let mu_max: Vec<f64> = (0..=km).map(|k| nf.max_abs_eigenvalue(k)).collect();
    let spread = 2.0 * mu_max.iter().fold(0.0f64, |a, &b| a.max(b));
    let mut gaps: Vec<(f64, usize, usize)> = Vec::with_capacity((km + 1) * (km + 1));
    for k in 0..=km {
        for kp in 0..=km {
            gaps.push((layout.lambda(k) - layout.lambda(kp), k, kp));
        }
    }
    gaps.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut best = f64::INFINITY;
    let mut worst: Option<Resonance> = None;
    let mut evaluated = 0usize;
    for_each_in_ball(omega.len(), k_cut, |l| {
        let x = dot(omega, l);
        let is_zero = l.iter().all(|&c| c == 0);
        let mut visit = |idx: usize, best: &mut f64, worst: &mut Option<Resonance>| {
            let (gap, k, kp) = gaps[idx];
            if is_zero && k == kp {
                return;
            }
            if let ScanMode::Localized { safety } = mode {
                if !localized(omega, params, safety, l, k, kp) {
                    return;
                }
            }
            evaluated += 1;
            let base = x + gap;
            for (j, mu) in nf.eigenvalues(k).iter().enumerate() {
                for (jp, mup) in nf.eigenvalues(kp).iter().enumerate() {
                    let div = (base + mu - mup).abs();
                    if div < *best {
                        *best = div;
                        *worst = Some(Resonance {
                            l: l.to_vec(),
                            k,
                            k_prime: kp,
                            j,
                            j_prime: jp,
                            divisor: div,
                        });
                    }
                }
            }
        };
        // first gap with gap >= -x
        let start = gaps.partition_point(|g| g.0 < -x);
        let mut i = start;
        while i < gaps.len() && (x + gaps[i].0).abs() - spread <= best {
            visit(i, &mut best, &mut worst);
            i += 1;
        }
        let mut i = start;
        while i > 0 && (x + gaps[i - 1].0).abs() - spread <= best {
            visit(i - 1, &mut best, &mut worst);
            i -= 1;
        }
    });
    Ok(MelnikovScan {
        member: best >= threshold,
        threshold,
        min_divisor: best,
        worst_margin: best - threshold,
        worst,
        triples_evaluated: evaluated,
    })
}

pub(crate) fn dot(omega: &[f64], l: &[i32]) -> f64 {
    omega.iter().zip(l).map(|(w, &x)| w * x as f64).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::BlockLayout;
    use crate::linalg::{CMatrix, C64};

    fn params() -> MelnikovParams {
        MelnikovParams {
            gamma: 0.05,
            tau: 19.5,
            tau0: 3.0,
            beta: 0.4,
        }
    }

    #[test]
    fn diophantine_examples() {
        assert!(in_diophantine_g0(&[1.0], 0.1, 2.0, 50).member);
        assert!(!in_diophantine_g0(&[1.0, 1.0], 0.05, 3.0, 5).member);
        let scan = in_diophantine_g0(&[0.8, 1.2], 0.05, 3.0, 5);
        assert!(!scan.member);
        assert_eq!(
            scan.worst_mode.map(|l| l[0].abs() * 2 == l[1].abs() * 3),
            Some(true)
        );
    }

    #[test]
    fn unperturbed_zero_mode_never_resonant() {
        let layout = BlockLayout::new(2, 6).unwrap();
        let nf = NormalForm::zero(layout);
        let scan =
            in_melnikov_set(&[1.0, 1.118034], &nf, &params(), 0, ScanMode::Exhaustive).unwrap();
        assert!(scan.member);
        assert!(scan.min_divisor >= 1.0);
    }

    #[test]
    fn engineered_resonance_is_excised() {
        let layout = BlockLayout::new(2, 3).unwrap();
        let nf = NormalForm::zero(layout);
        // ω·(1,1) = 4 = λ_2 - λ_1
        let scan = in_melnikov_set(&[1.5, 2.5], &nf, &params(), 2, ScanMode::Exhaustive).unwrap();
        assert!(!scan.member);
        assert!(scan.min_divisor < 1e-14);
        let w = scan.worst.unwrap();
        assert_eq!(w.k_prime.abs_diff(w.k), 1);
    }

    #[test]
    fn search_matches_brute_force() {
        let layout = BlockLayout::new(2, 4).unwrap();
        let blocks = (0..=4)
            .map(|k| {
                let n = layout.dim(k);
                CMatrix::from_fn(n, n, |i, j| {
                    if i == j {
                        C64::new(0.002 * (i as f64 - 1.0) / (k + 1) as f64, 0.0)
                    } else {
                        C64::new(0.0, 0.0)
                    }
                })
            })
            .collect();
        let nf = NormalForm::from_blocks(layout.clone(), blocks).unwrap();
        let omega = [0.91, 1.37];
        let scan = in_melnikov_set(&omega, &nf, &params(), 4, ScanMode::Exhaustive).unwrap();
        let mut best = f64::INFINITY;
        for l in crate::block::modes_in_ball(2, 4) {
            for k in 0..=4 {
                for kp in 0..=4 {
                    if l == [0, 0] && k == kp {
                        continue;
                    }
                    for mu in nf.eigenvalues(k) {
                        for mup in nf.eigenvalues(kp) {
                            let v = (dot(&omega, &l) + layout.lambda(k) - layout.lambda(kp) + mu
                                - mup)
                                .abs();
                            best = best.min(v);
                        }
                    }
                }
            }
        }
        assert!((scan.min_divisor - best).abs() < 1e-13);
    }

    #[test]
    fn large_normal_form_rejected() {
        let layout = BlockLayout::new(2, 1).unwrap();
        let blocks = vec![CMatrix::identity(1, 1), CMatrix::identity(3, 3)];
        let nf = NormalForm::from_blocks(layout, blocks).unwrap();
        assert!(matches!(
            in_melnikov_set(&[1.0], &nf, &params(), 1, ScanMode::Exhaustive),
            Err(Error::NormalFormTooLarge { .. })
        ));
    }
}
