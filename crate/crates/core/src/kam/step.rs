use super::config::KamConfig;
use super::homological::{homological_residual, solve_homological};
use super::melnikov::{in_melnikov_set, MelnikovParams, ScanMode};
use super::normal_form::NormalForm;
use crate::block::{
    adjoint_defect, commutator, decay_norm, lie_exponential, symmetrize, BlockNorms, BlockOperator,
};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64, I, ONE};
use serde::{Deserialize, Serialize};

/// Norms and checks of one KAM step.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub cutoff: usize,
    pub sigma: f64,
    pub sigma_next: f64,
    /// `γ^{-1}⟨⟨M_k⟩⟩_{-β,s,σ_k}`.
    pub eps: f64,
    /// `γ^{-1}⟨⟨M_{k+1}⟩⟩_{-β,s,σ_{k+1}}`.
    pub eps_next: f64,
    /// `γ^{-1}⟨⟨Z_k⟩⟩_{-β}`.
    pub theta: f64,
    /// `⟨⟨S⟩⟩_{-β,s,σ_k}`.
    pub generator_norm: f64,
    /// `|S|_{s,σ_k}`, used in the smallness test.
    pub generator_decay: f64,
    /// `C·|S|_{s,σ_k}` with the configured algebra constant.
    pub smallness: Option<f64>,
    /// `⟨⟨R⟩⟩_{-β,s,σ_k}` of the discarded Fourier tail.
    pub tail_norm: f64,
    /// Decay norm of the homological residual over `1 + |M|`.
    pub residual: f64,
    /// `⟨⟨Z_{k+1} - Z_k⟩⟩_{-β}`.
    pub z_increment: f64,
    pub melnikov_threshold: f64,
    pub melnikov_min_divisor: f64,
    pub exp_terms: usize,
    pub series_terms: usize,
    pub m_hamiltonian_defect: f64,
    /// `max_φ ‖Φ(φ)*Φ(φ) - Id‖` on sampled angles.
    pub unitarity_defect: f64,
}

/// Result of one step.
#[derive(Clone, Debug)]
pub struct StepOutput {
    pub z_next: NormalForm,
    pub m_next: BlockOperator,
    pub s: BlockOperator,
    pub phi: BlockOperator,
    pub record: StepRecord,
}

pub fn melnikov_params(cfg: &KamConfig) -> MelnikovParams {
    MelnikovParams {
        gamma: cfg.gamma,
        tau: cfg.tau,
        tau0: cfg.tau0(),
        beta: cfg.beta(),
    }
}

/// One step: solve the homological equation at cutoff `K`, then
/// `Z_+ = Z + i Diag M` and `M_+ = R + [S,M] + Σ_{p≥2} ad_S^{p-1}(W)/p!`
/// with `W = Diag M + R - M + [S,M]`.
pub fn kam_step(
    omega: &[f64],
    z: &NormalForm,
    m: &BlockOperator,
    cutoff: usize,
    sigma: f64,
    sigma_next: f64,
    cfg: &KamConfig,
) -> Result<StepOutput> {
    let (s_idx, beta, gamma) = (cfg.s, cfg.beta(), cfg.gamma);
    let params = melnikov_params(cfg);
    let scan = in_melnikov_set(
        omega,
        z,
        &params,
        cutoff,
        ScanMode::Localized {
            safety: cfg.localization_safety,
        },
    )?;
    if !scan.member {
        let w = scan.worst.expect("a failing scan names its tuple");
        return Err(Error::Resonant {
            l: w.l,
            k: w.k,
            k_prime: w.k_prime,
            j: w.j,
            j_prime: w.j_prime,
            divisor: w.divisor,
            threshold: scan.threshold,
        });
    }
    let m_norms = BlockNorms::new(m);
    let mut record = StepRecord {
        cutoff,
        sigma,
        sigma_next,
        eps: m_norms.beta(-beta, s_idx, sigma) / gamma,
        theta: z.beta_norm(-beta) / gamma,
        melnikov_threshold: scan.threshold,
        melnikov_min_divisor: scan.min_divisor,
        ..Default::default()
    };

    let (s, r) = solve_homological(omega, z, m, &params, cutoff)?;
    let s_norms = BlockNorms::new(&s);
    record.generator_norm = s_norms.beta(-beta, s_idx, sigma);
    record.generator_decay = s_norms.decay(s_idx, sigma);
    if let Some(c) = cfg.algebra_constant {
        let value = c * record.generator_decay;
        record.smallness = Some(value);
        if value > 0.5 {
            return Err(Error::Smallness {
                what: "generator size",
                value,
                bound: 0.5,
            });
        }
    }
    record.tail_norm = BlockNorms::new(&r).beta(-beta, s_idx, sigma);
    let res = homological_residual(omega, z, m, &s, &r)?;
    record.residual = decay_norm(&res, s_idx, sigma) / (1.0 + m_norms.decay(s_idx, sigma));

    let exp = lie_exponential(&s, cfg.series_tol, cfg.p_max)?;
    record.exp_terms = exp.terms;
    let phi = exp.value;
    record.unitarity_defect = unitarity_defect(&phi, 4);

    let layout = z.layout().clone();
    let zero = vec![0; m.d()];
    let increment: Vec<CMatrix> = (0..=layout.k_max())
        .map(|k| match m.block(&zero, k, k) {
            Some(b) => b.into_owned() * I,
            None => CMatrix::zeros(layout.dim(k), layout.dim(k)),
        })
        .collect();
    record.z_increment = 2.0
        * increment
            .iter()
            .enumerate()
            .map(|(k, b)| crate::linalg::op_norm(b) * layout.d_weight(k).powf(beta))
            .fold(0.0, f64::max);
    let z_next = z.add_blocks(&increment)?;

    let sm = commutator(&s, m)?;
    let mut w = m.diag_part();
    w.add_scaled(&r, ONE)?;
    w.add_scaled(m, C64::new(-1.0, 0.0))?;
    w.add_scaled(&sm, ONE)?;
    let mut first = commutator(&s, &w)?;
    first.scale_mut(C64::new(0.5, 0.0));
    let mut m_next = r.clone();
    m_next.add_scaled(&sm, ONE)?;
    let series = if s.is_zero() {
        crate::block::Series {
            value: m_next,
            terms: 0,
            last_term: 0.0,
        }
    } else {
        crate::block::series_from(&mut m_next, first, &s, 2, cfg.series_tol, cfg.p_max)?
    };
    record.series_terms = series.terms;
    record.m_hamiltonian_defect = adjoint_defect(&series.value, -1.0);
    let mut m_next = symmetrize(&series.value, -1.0);
    m_next.prune(0.0);
    record.eps_next = BlockNorms::new(&m_next).beta(-beta, s_idx, sigma_next) / gamma;

    Ok(StepOutput {
        z_next,
        m_next,
        s,
        phi,
        record,
    })
}

/// `max_φ ‖U(φ)*U(φ) - Id‖_op` over a uniform grid of `per_axis^d` angles.
pub fn unitarity_defect(u: &BlockOperator, per_axis: usize) -> f64 {
    let d = u.d();
    let n = u.size();
    let total = per_axis.pow(d as u32);
    let mut worst: f64 = 0.0;
    for idx in 0..total {
        let mut rem = idx;
        let phi: Vec<f64> = (0..d)
            .map(|_| {
                let c = rem % per_axis;
                rem /= per_axis;
                2.0 * std::f64::consts::PI * (c as f64 + 0.37) / per_axis as f64
            })
            .collect();
        let m = u.evaluate(&phi);
        let defect = m.adjoint() * &m - CMatrix::identity(n, n);
        worst = worst.max(crate::linalg::op_norm(&defect));
    }
    worst
}
