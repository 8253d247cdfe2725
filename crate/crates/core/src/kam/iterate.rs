use super::config::KamConfig;
use super::melnikov::{in_diophantine_g0, Resonance};
use super::normal_form::NormalForm;
use super::step::{kam_step, StepRecord};
use crate::block::{compose, lie_exponential, BlockNorms, BlockOperator};
use crate::error::{Error, Result};
use crate::linalg::C64;
use serde::{Deserialize, Serialize};

/// Why a frequency vector was removed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "condition", rename_all = "snake_case")]
pub enum Excision {
    /// `|ω·l| < 4γ/|l|^{τ_0}`.
    Diophantine { mode: Vec<i32>, margin: f64 },
    /// A second-order divisor below `2γ/K^τ`.
    Melnikov {
        resonance: Resonance,
        threshold: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KamOutcome {
    Converged { steps: usize },
    Excised { step: usize, excision: Excision },
    NotConverged { steps: usize, last_eps: f64 },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KamHistory {
    /// `γ^{-1}⟨⟨M_0⟩⟩_{-β,s,σ_0}`.
    pub eps0: f64,
    pub steps: Vec<StepRecord>,
}

impl KamHistory {
    /// `ε_0, ε_1, ...` including the value after the last step.
    pub fn eps_sequence(&self) -> Vec<f64> {
        let mut out = vec![self.eps0];
        out.extend(self.steps.iter().map(|r| r.eps_next));
        out
    }

    /// Largest `ε_{k+1} / (ε_k (e^{-(σ_k-σ_{k+1})K_k} + ε_k))` over the steps.
    pub fn fitted_step_constant(&self) -> Option<f64> {
        self.steps
            .iter()
            .filter(|r| r.eps > 0.0)
            .map(|r| {
                let tail = (-(r.sigma - r.sigma_next) * r.cutoff as f64).exp();
                r.eps_next / (r.eps * (tail + r.eps))
            })
            .reduce(f64::max)
    }
}

/// Output of [`kam_iterate`].
#[derive(Clone, Debug)]
pub struct KamResult {
    pub outcome: KamOutcome,
    pub z_inf: NormalForm,
    pub m_final: BlockOperator,
    /// `Φ_k ∘ ... ∘ Φ_1`.
    pub phi_total: BlockOperator,
    pub generators: Vec<BlockOperator>,
    pub history: KamHistory,
}

impl KamResult {
    pub fn is_converged(&self) -> bool {
        matches!(self.outcome, KamOutcome::Converged { .. })
    }

    pub fn require_converged(&self) -> Result<&Self> {
        match &self.outcome {
            KamOutcome::NotConverged { steps, last_eps } => Err(Error::NotConverged {
                steps: *steps,
                last_eps: *last_eps,
            }),
            _ => Ok(self),
        }
    }

    /// `Φ_total^{-1} = e^{-S_1} ∘ ... ∘ e^{-S_k}`.
    pub fn phi_inverse(&self, tol: f64, p_max: usize) -> Result<BlockOperator> {
        let mut inv = BlockOperator::identity(
            self.phi_total.layout().clone(),
            self.phi_total.d(),
            self.phi_total.l_max(),
        );
        for s in &self.generators {
            let e = lie_exponential(&s.scale(C64::new(-1.0, 0.0)), tol, p_max)?.value;
            inv = compose(&inv, &e)?;
        }
        Ok(inv)
    }
}

/// Runs the KAM steps with `K_k = 4^k K_0` and `σ_{k+1} = (1-2^{-k-3})σ_k`
/// starting from width `σ/2`.
pub fn kam_iterate(
    omega: &[f64],
    z0: &NormalForm,
    m0: &BlockOperator,
    cfg: &KamConfig,
) -> Result<KamResult> {
    cfg.validate()?;
    if omega.len() != cfg.d || m0.d() != cfg.d {
        return Err(Error::FrequencyCount {
            expected: cfg.d,
            found: omega.len(),
        });
    }
    let beta = cfg.beta();
    let mut sigma = cfg.sigma0();
    let eps_of =
        |m: &BlockOperator, sigma: f64| BlockNorms::new(m).beta(-beta, cfg.s, sigma) / cfg.gamma;
    let mut history = KamHistory {
        eps0: eps_of(m0, sigma),
        steps: Vec::new(),
    };
    let mut result = KamResult {
        outcome: KamOutcome::Converged { steps: 0 },
        z_inf: z0.clone(),
        m_final: m0.clone(),
        phi_total: BlockOperator::identity(m0.layout().clone(), m0.d(), m0.l_max()),
        generators: Vec::new(),
        history: KamHistory::default(),
    };

    let g0 = in_diophantine_g0(omega, cfg.gamma, cfg.tau0(), cfg.g0_radius);
    if !g0.member {
        result.outcome = KamOutcome::Excised {
            step: 0,
            excision: Excision::Diophantine {
                mode: g0.worst_mode.unwrap_or_default(),
                margin: g0.worst_margin,
            },
        };
        result.history = history;
        return Ok(result);
    }
    if history.eps0 > cfg.theta_star {
        return Err(Error::Smallness {
            what: "initial remainder",
            value: history.eps0,
            bound: cfg.theta_star,
        });
    }

    let mut eps = history.eps0;
    let mut outcome = None;
    for step in 0..cfg.max_steps {
        if eps < cfg.stop_tol {
            outcome = Some(KamOutcome::Converged { steps: step });
            break;
        }
        let cutoff = cfg.cutoff(step);
        let sigma_next = cfg.next_sigma(step, sigma);
        match kam_step(
            omega,
            &result.z_inf,
            &result.m_final,
            cutoff,
            sigma,
            sigma_next,
            cfg,
        ) {
            Err(Error::Resonant {
                l,
                k,
                k_prime,
                j,
                j_prime,
                divisor,
                threshold,
            }) => {
                outcome = Some(KamOutcome::Excised {
                    step,
                    excision: Excision::Melnikov {
                        resonance: Resonance {
                            l,
                            k,
                            k_prime,
                            j,
                            j_prime,
                            divisor,
                        },
                        threshold,
                    },
                });
                break;
            }
            Err(e) => return Err(e),
            Ok(out) => {
                let mut record = out.record;
                record.step = step;
                eps = record.eps_next;
                history.steps.push(record);
                result.phi_total = compose(&out.phi, &result.phi_total)?;
                result.generators.push(out.s);
                result.z_inf = out.z_next;
                result.m_final = out.m_next;
                sigma = sigma_next;
            }
        }
    }
    result.outcome = match outcome {
        Some(o) => o,
        None if eps < cfg.stop_tol => KamOutcome::Converged {
            steps: history.steps.len(),
        },
        None => KamOutcome::NotConverged {
            steps: history.steps.len(),
            last_eps: eps,
        },
    };
    result.history = history;
    Ok(result)
}

/// Least-squares slope of `log(-log(ε_k/ε_0))` against `k` over the steps
/// with `0 < ε_k < ε_0`.
pub fn convergence_slope(eps: &[f64]) -> Option<f64> {
    let e0 = *eps.first()?;
    let pts: Vec<(f64, f64)> = eps
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, &e)| e > 0.0 && e < e0)
        .map(|(k, &e)| (k as f64, (-(e / e0).ln()).ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::{symmetrize, BlockLayout};
    use crate::linalg::CMatrix;
    use rand::{Rng, SeedableRng};

    fn small_config() -> KamConfig {
        KamConfig {
            k_max: 4,
            l_max: 2,
            ..KamConfig::golden()
        }
    }

    #[test]
    fn zero_remainder_converges_immediately() {
        let cfg = small_config();
        let layout = BlockLayout::new(2, cfg.k_max).unwrap();
        let m0 = BlockOperator::zeros(layout.clone(), 2, cfg.l_max);
        let out = kam_iterate(
            &[0.757967, 1.422353],
            &NormalForm::zero(layout.clone()),
            &m0,
            &cfg,
        )
        .unwrap();
        assert_eq!(out.outcome, KamOutcome::Converged { steps: 0 });
        assert_eq!(
            out.phi_total
                .max_abs_diff(&BlockOperator::identity(layout, 2, cfg.l_max)),
            0.0
        );
    }

    #[test]
    fn diophantine_failure_is_classified() {
        let cfg = small_config();
        let layout = BlockLayout::new(2, cfg.k_max).unwrap();
        let m0 = BlockOperator::zeros(layout.clone(), 2, cfg.l_max);
        let out = kam_iterate(&[1.0, 1.0], &NormalForm::zero(layout), &m0, &cfg).unwrap();
        assert!(matches!(
            out.outcome,
            KamOutcome::Excised {
                excision: Excision::Diophantine { .. },
                ..
            }
        ));
    }

    #[test]
    fn small_remainder_converges_fast() {
        let cfg = small_config();
        let layout = BlockLayout::new(2, cfg.k_max).unwrap();
        let n = layout.total();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut m0 = BlockOperator::zeros(layout.clone(), 2, cfg.l_max);
        for l in crate::block::modes_in_ball(2, cfg.l_max) {
            let scale = 1e-6 * (-(crate::block::mode_norm(&l))).exp();
            m0.insert_mode(
                &l,
                CMatrix::from_fn(n, n, |_, _| {
                    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale
                }),
            )
            .unwrap();
        }
        let m0 = symmetrize(&m0, -1.0);
        let out = kam_iterate(&[0.757967, 1.422353], &NormalForm::zero(layout), &m0, &cfg).unwrap();
        assert!(out.is_converged(), "{:?}", out.outcome);
        let eps = out.history.eps_sequence();
        assert!(eps.windows(2).all(|w| w[1] < w[0]), "{eps:?}");
        for r in &out.history.steps {
            assert!(r.residual < 1e-10, "{r:?}");
            assert!(r.unitarity_defect < 1e-10, "{r:?}");
        }
        assert!(crate::block::structure_check(
            &out.z_inf.to_operator(2, cfg.l_max),
            crate::block::StructureKind::NormalForm,
            1e-14
        ));
    }

    #[test]
    fn slope_of_exact_double_exponential() {
        let chi: f64 = 1.5;
        let eps: Vec<f64> = (0..6)
            .map(|k| {
                if k == 0 {
                    0.1
                } else {
                    0.1 * (-0.3 * chi.powi(k)).exp()
                }
            })
            .collect();
        let slope = convergence_slope(&eps).unwrap();
        assert!((slope - chi.ln()).abs() < 1e-12);
    }
}
