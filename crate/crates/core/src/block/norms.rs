//! Decay norms and their smoothing (β) variants.

use super::operator::{mode_norm_sq, BlockOperator};
use super::state::StateVector;
use crate::linalg::spectral_norm;
use serde::{Deserialize, Serialize};

/// Norm parameters: Sobolev index, analyticity width, smoothing order, and
/// Lipschitz weight.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub s: f64,
    pub sigma: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl NormParams {
    pub fn new(s: f64, sigma: f64, beta: f64, gamma: f64) -> Self {
        NormParams {
            s,
            sigma,
            beta,
            gamma,
        }
    }

    pub fn with_s(self, s: f64) -> Self {
        NormParams { s, ..self }
    }

    pub fn with_sigma(self, sigma: f64) -> Self {
        NormParams { sigma, ..self }
    }

    pub fn with_beta(self, beta: f64) -> Self {
        NormParams { beta, ..self }
    }
}

/// `⟨l,h⟩ = max(1, |(l,h)|)`, Euclidean.
pub fn bracket(l: &[i32], h: usize) -> f64 {
    let sq = mode_norm_sq(l) as f64 + (h * h) as f64;
    sq.sqrt().max(1.0)
}

/// `⟨k⟩ = max(1, k)`.
pub fn bracket_k(k: usize) -> f64 {
    (k as f64).max(1.0)
}

/// Spectral norms of every block, cached per mode.
pub struct BlockNorms {
    d_weights: Vec<f64>,
    k_max: usize,
    /// `(l, row-major table of ‖A_{[k]}^{[k']}(l)‖_op)`.
    per_mode: Vec<(Vec<i32>, Vec<f64>)>,
}

impl BlockNorms {
    pub fn new(a: &BlockOperator) -> Self {
        let k_max = a.k_max();
        let dim = k_max + 1;
        let per_mode = a
            .modes()
            .keys()
            .map(|l| {
                let mut table = vec![0.0; dim * dim];
                for k in 0..dim {
                    for kp in 0..dim {
                        let b = a.block(l, k, kp).expect("mode present");
                        table[k * dim + kp] = spectral_norm(b);
                    }
                }
                (l.clone(), table)
            })
            .collect();
        BlockNorms {
            d_weights: (0..dim).map(|k| a.layout().d_weight(k)).collect(),
            k_max,
            per_mode,
        }
    }

    /// `|D^{ql} A D^{qr}|_{s,σ}`: a diagonal scaling of a block only rescales its
    /// spectral norm, so the scaled norm reuses the cached values.
    pub fn scaled_decay(&self, s: f64, sigma: f64, ql: f64, qr: f64) -> f64 {
        let dim = self.k_max + 1;
        let mut total = 0.0;
        for (l, table) in &self.per_mode {
            let weight_l = (2.0 * (mode_norm_sq(l) as f64).sqrt() * sigma).exp();
            for h in 0..dim {
                let mut sup: f64 = 0.0;
                for k in 0..dim {
                    for kp in [k + h, k.wrapping_sub(h)] {
                        if kp >= dim || (h == 0 && kp != k) {
                            continue;
                        }
                        let v = table[k * dim + kp]
                            * self.d_weights[k].powf(ql)
                            * self.d_weights[kp].powf(qr);
                        sup = sup.max(v);
                    }
                }
                if sup > 0.0 {
                    total += bracket(l, h).powf(2.0 * s) * weight_l * sup * sup;
                }
            }
        }
        total.sqrt()
    }

    pub fn decay(&self, s: f64, sigma: f64) -> f64 {
        self.scaled_decay(s, sigma, 0.0, 0.0)
    }

    /// `⟨⟨A⟩⟩_{β,s,σ} = |D^{-β} A| + |A D^{-β}|`.
    pub fn beta(&self, beta: f64, s: f64, sigma: f64) -> f64 {
        self.scaled_decay(s, sigma, -beta, 0.0) + self.scaled_decay(s, sigma, 0.0, -beta)
    }
}

/// `|A|_{s,σ}`.
pub fn decay_norm(a: &BlockOperator, s: f64, sigma: f64) -> f64 {
    BlockNorms::new(a).decay(s, sigma)
}

/// `⟨⟨A⟩⟩_{β,s,σ}`.
pub fn beta_norm(a: &BlockOperator, beta: f64, s: f64, sigma: f64) -> f64 {
    BlockNorms::new(a).beta(beta, s, sigma)
}

/// `‖z‖_{s,σ}` with weights `⟨l,k⟩^{2s} e^{2|l|σ}`.
pub fn sobolev_norm(z: &StateVector, s: f64, sigma: f64) -> f64 {
    let layout = z.layout();
    let mut total = 0.0;
    for (l, v) in z.modes() {
        let wl = (2.0 * (mode_norm_sq(l) as f64).sqrt() * sigma).exp();
        for k in 0..=layout.k_max() {
            let r = layout.range(k);
            let sq: f64 = v.rows(r.start, r.len()).iter().map(|c| c.norm_sqr()).sum();
            if sq > 0.0 {
                total += bracket(l, k).powf(2.0 * s) * wl * sq;
            }
        }
    }
    total.sqrt()
}

/// `‖v‖_{h^s}` of a φ-independent coefficient vector, weights `⟨k⟩^{2s}`.
pub fn hs_norm(layout: &super::layout::BlockLayout, v: &crate::linalg::CVector, s: f64) -> f64 {
    let mut total = 0.0;
    for k in 0..=layout.k_max() {
        let r = layout.range(k);
        let sq: f64 = v.rows(r.start, r.len()).iter().map(|c| c.norm_sqr()).sum();
        total += bracket_k(k).powf(2.0 * s) * sq;
    }
    total.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::layout::BlockLayout;
    use crate::linalg::{CMatrix, C64};

    #[test]
    fn zero_and_identity() {
        let layout = BlockLayout::new(2, 3).unwrap();
        let z = BlockOperator::zeros(layout.clone(), 2, 2);
        assert_eq!(decay_norm(&z, 2.0, 0.5), 0.0);
        assert_eq!(beta_norm(&z, 1.0, 2.0, 0.5), 0.0);
        let id = BlockOperator::identity(layout, 2, 2);
        assert!((decay_norm(&id, 2.0, 0.5) - 1.0).abs() < 1e-13);
        assert!((decay_norm(&id, 0.0, 3.0) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn single_block_value() {
        let layout = BlockLayout::new(2, 3).unwrap();
        let mut a = BlockOperator::zeros(layout, 2, 2);
        let mut b = CMatrix::zeros(3, 5);
        b[(1, 2)] = C64::new(3.0, 0.0);
        a.set_block(&[1, 0], 1, 2, &b).unwrap();
        let expect = 2f64 * 0.5f64.exp() * 3.0;
        assert!((decay_norm(&a, 2.0, 0.5) - expect).abs() < 1e-12);
        assert!((expect - 9.8923).abs() < 1e-4);
    }

    #[test]
    fn beta_examples() {
        let layout = BlockLayout::new(2, 3).unwrap();
        let mut a = BlockOperator::zeros(layout, 2, 2);
        let c = 1.7;
        a.set_block(&[0, 0], 2, 2, &(CMatrix::identity(5, 5) * C64::new(c, 0.0)))
            .unwrap();
        assert!((beta_norm(&a, 1.0, 2.0, 0.5) - 2.0 * c / 6f64.sqrt()).abs() < 1e-13);
        assert!((beta_norm(&a, 0.0, 2.0, 0.5) - 2.0 * decay_norm(&a, 2.0, 0.5)).abs() < 1e-13);
    }

    #[test]
    fn cached_scaling_matches_explicit_scaling() {
        use crate::block::Side;
        let layout = BlockLayout::new(2, 3).unwrap();
        let mut a = BlockOperator::zeros(layout, 1, 2);
        let n = a.size();
        for (i, l) in [[-1], [0], [2]].iter().enumerate() {
            a.insert_mode(
                l,
                CMatrix::from_fn(n, n, |r, c| {
                    C64::new((r * 7 + c * 3 + i) as f64 % 5.0 - 2.0, (r + c) as f64 * 0.1)
                }),
            )
            .unwrap();
        }
        let explicit = decay_norm(&a.scale_by_d(-0.4, Side::Left), 1.5, 0.3)
            + decay_norm(&a.scale_by_d(-0.4, Side::Right), 1.5, 0.3);
        assert!((beta_norm(&a, 0.4, 1.5, 0.3) - explicit).abs() < 1e-10 * explicit);
    }
}
