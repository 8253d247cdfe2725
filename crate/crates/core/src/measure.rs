//! Monte-Carlo estimates of the frequency sets removed by the second-order
//! Melnikov conditions, and sublevel-set checks for Lipschitz functions.

use crate::block::{for_each_in_ball, mode_norm};
use crate::error::{Error, Result};
use crate::kam::{
    in_melnikov_set, localization_constant, MelnikovParams, NormalForm, Resonance, ScanMode,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Two-sided 95% normal quantile used for the Wilson interval.
const Z95: f64 = 1.959963984540054;

/// Sampling setup over the unit cube `[lower, lower+1]^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureParams {
    pub melnikov: MelnikovParams,
    pub k_cut: usize,
    pub samples: usize,
    pub seed: u64,
    pub lower: f64,
    pub mode: ScanMode,
    /// Safety factor used when checking where excised tuples sit.
    pub localization_safety: f64,
}

impl MeasureParams {
    pub fn new(melnikov: MelnikovParams, k_cut: usize) -> Self {
        MeasureParams {
            melnikov,
            k_cut,
            samples: 20_000,
            seed: 0,
            lower: 0.5,
            mode: ScanMode::Exhaustive,
            localization_safety: 2.0,
        }
    }
}

/// One sampled frequency vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub omega: Vec<f64>,
    pub excised: bool,
    /// Smallest divisor minus the threshold.
    pub margin: f64,
    pub worst: Option<Resonance>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramEntry {
    pub l: Vec<i32>,
    pub k: usize,
    pub k_prime: usize,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub k_cut: usize,
    pub gamma: f64,
    pub threshold: f64,
    pub sampled_count: usize,
    pub excised_count: usize,
    pub excised_fraction: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Exponent `-τ + d + 2(n-1)τ_0/β + 1`.
    pub bound_exponent: f64,
    /// `γ K^{exponent}`.
    pub bound_reference: f64,
    /// `excised_fraction / bound_reference`.
    pub fitted_constant: f64,
    /// Excised samples whose blamed tuple lies outside the localized region.
    pub unlocalized_count: usize,
    pub histogram: Vec<HistogramEntry>,
}

/// Exponent of `K` in the excised-measure bound.
pub fn measure_exponent(n: usize, d: usize, tau: f64, tau0: f64, beta: f64) -> f64 {
    -tau + d as f64 + 2.0 * (n as f64 - 1.0) * tau0 / beta + 1.0
}

/// Wilson score interval at 95%.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 {
        0.0
    } else {
        (centre - half).max(0.0)
    };
    let hi = if successes == trials {
        1.0
    } else {
        (centre + half).min(1.0)
    };
    (lo, hi)
}

/// Uniform sample `i` of the cube; each index draws from its own stream.
pub fn sample_omega(seed: u64, index: usize, d: usize, lower: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    (0..d).map(|_| lower + rng.random::<f64>()).collect()
}

/// Classifies `params.samples` uniform frequencies against the Melnikov
/// conditions at cutoff `K`.
pub fn estimate_excised_measure(
    nf: &NormalForm,
    d: usize,
    params: &MeasureParams,
) -> Result<(MeasureReport, Vec<SampleOutcome>)> {
    if d == 0 {
        return Err(Error::param("d", "need at least one frequency"));
    }
    if params.samples == 0 {
        return Err(Error::param("samples", "must be positive"));
    }
    let mp = &params.melnikov;
    let outcomes: Vec<SampleOutcome> = (0..params.samples)
        .into_par_iter()
        .map(|i| {
            let omega = sample_omega(params.seed, i, d, params.lower);
            let scan = in_melnikov_set(&omega, nf, mp, params.k_cut, params.mode)?;
            Ok(SampleOutcome {
                excised: !scan.member,
                margin: scan.worst_margin,
                worst: scan.worst,
                omega,
            })
        })
        .collect::<Result<_>>()?;

    let excised: Vec<&SampleOutcome> = outcomes.iter().filter(|o| o.excised).collect();
    let mut hist: BTreeMap<(Vec<i32>, usize, usize), usize> = BTreeMap::new();
    let mut unlocalized = 0;
    for o in &excised {
        let w = o.worst.as_ref().expect("excised samples carry a tuple");
        *hist.entry((w.l.clone(), w.k, w.k_prime)).or_default() += 1;
        if !within_localized_region(&o.omega, mp, params.localization_safety, w) {
            unlocalized += 1;
        }
    }
    let n_layout = nf.layout().n();
    let exponent = measure_exponent(n_layout, d, mp.tau, mp.tau0, mp.beta);
    let reference = mp.gamma * (params.k_cut.max(1) as f64).powf(exponent);
    let fraction = excised.len() as f64 / params.samples as f64;
    let (lo, hi) = wilson_interval(excised.len(), params.samples);
    let report = MeasureReport {
        k_cut: params.k_cut,
        gamma: mp.gamma,
        threshold: crate::kam::melnikov_threshold(mp.gamma, mp.tau, params.k_cut),
        sampled_count: params.samples,
        excised_count: excised.len(),
        excised_fraction: fraction,
        ci_low: lo,
        ci_high: hi,
        bound_exponent: exponent,
        bound_reference: reference,
        fitted_constant: fraction / reference,
        unlocalized_count: unlocalized,
        histogram: hist
            .into_iter()
            .map(|((l, k, k_prime), count)| HistogramEntry {
                l,
                k,
                k_prime,
                count,
            })
            .collect(),
    };
    Ok((report, outcomes))
}

/// `k + k' <= C|l|`, or `k = k' < |l|^{τ_0/β}`.
fn within_localized_region(omega: &[f64], mp: &MelnikovParams, safety: f64, r: &Resonance) -> bool {
    let norm = mode_norm(&r.l);
    if norm == 0.0 {
        return false;
    }
    if ((r.k + r.k_prime) as f64) <= localization_constant(omega, safety) * norm {
        return true;
    }
    r.k == r.k_prime && (r.k as f64) < norm.powf(mp.tau0 / mp.beta)
}

/// Sum over tuples `(l, k, k', j, j')` with `0 < |l| <= K` whose slab
/// `|ω·l + c| < 2γ/K^τ` meets the cube of `2·thr/|l|_∞`, the measure bound
/// for one slab inside a unit cube.
pub fn union_bound(nf: &NormalForm, d: usize, params: &MeasureParams) -> f64 {
    let mp = &params.melnikov;
    let thr = crate::kam::melnikov_threshold(mp.gamma, mp.tau, params.k_cut);
    let layout = nf.layout();
    let km = layout.k_max();
    let mut total = 0.0;
    for_each_in_ball(d, params.k_cut, |l| {
        let linf = l.iter().map(|x| x.unsigned_abs()).max().unwrap_or(0);
        if linf == 0 {
            return;
        }
        let (mut lo, mut hi) = (0.0, 0.0);
        for &c in l {
            let a = c as f64 * params.lower;
            let b = c as f64 * (params.lower + 1.0);
            lo += a.min(b);
            hi += a.max(b);
        }
        let width = (2.0 * thr / linf as f64).min(1.0);
        for k in 0..=km {
            for kp in 0..=km {
                let gap = layout.lambda(k) - layout.lambda(kp);
                for mu in nf.eigenvalues(k) {
                    for mup in nf.eigenvalues(kp) {
                        let c = gap + mu - mup;
                        if lo + c < thr && hi + c > -thr {
                            total += width;
                        }
                    }
                }
            }
        }
    });
    total
}

/// Exact measure of `{x ∈ [a, b] : |x·l + c| < w}` for scalar `l`.
pub fn interval_measure(a: f64, b: f64, l: f64, c: f64, w: f64) -> f64 {
    if l == 0.0 {
        return if c.abs() < w { b - a } else { 0.0 };
    }
    let x1 = (-c - w) / l;
    let x2 = (-c + w) / l;
    let (lo, hi) = (x1.min(x2), x1.max(x2));
    (hi.min(b) - lo.max(a)).max(0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SublevelVerdict {
    Pass,
    Fail,
    /// The grid does not certify the Lipschitz lower bound.
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SublevelCheck {
    pub verdict: SublevelVerdict,
    /// Fraction of grid points with `|f| <= η`.
    pub fraction: f64,
    /// `2η / (a·meas)` plus one grid cell of slack.
    pub bound: f64,
    /// `η/a`, the bound in the form usually quoted.
    pub quoted_bound: f64,
    /// Smallest difference quotient on the grid.
    pub lip_lower: f64,
}

/// Checks the sublevel estimate for `f` tabulated on the uniform grid `xs`.
///
/// The Lipschitz lower bound is certified when consecutive differences have
/// one sign and each quotient is at least `a`; otherwise the verdict is
/// inconclusive.
pub fn sublevel_check(xs: &[f64], f: &[f64], a: f64, eta: f64) -> Result<SublevelCheck> {
    if xs.len() != f.len() || xs.len() < 2 {
        return Err(Error::ShapeMismatch(format!(
            "sublevel grid has {} points and {} values",
            xs.len(),
            f.len()
        )));
    }
    if !(a > 0.0 && eta > 0.0) {
        return Err(Error::param("a", "lower bound and level must be positive"));
    }
    let meas = xs[xs.len() - 1] - xs[0];
    let h = meas / (xs.len() - 1) as f64;
    let mut lip_lower = f64::INFINITY;
    let mut sign = 0.0;
    let mut monotone = true;
    for i in 0..xs.len() - 1 {
        let q = (f[i + 1] - f[i]) / (xs[i + 1] - xs[i]);
        if q != 0.0 {
            if sign == 0.0 {
                sign = q.signum();
            } else if q.signum() != sign {
                monotone = false;
            }
        }
        lip_lower = lip_lower.min(q.abs());
    }
    let count = f.iter().filter(|v| v.abs() <= eta).count();
    let fraction = count as f64 / xs.len() as f64;
    let bound = 2.0 * eta / (a * meas) + h / meas;
    let verdict = if !monotone || lip_lower < a * (1.0 - 1e-9) {
        SublevelVerdict::Inconclusive
    } else if fraction <= bound {
        SublevelVerdict::Pass
    } else {
        SublevelVerdict::Fail
    };
    Ok(SublevelCheck {
        verdict,
        fraction,
        bound,
        quoted_bound: eta / a,
        lip_lower,
    })
}

/// Uniform grid of `m` points on `[a, b]`.
pub fn uniform_grid(a: f64, b: f64, m: usize) -> Vec<f64> {
    (0..m)
        .map(|i| a + (b - a) * i as f64 / (m - 1).max(1) as f64)
        .collect()
}
