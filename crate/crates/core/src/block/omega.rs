use super::norms::{beta_norm, decay_norm};
use super::operator::BlockOperator;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Frequency samples inside `O_0 = [1/2, 3/2]^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmegaGrid {
    samples: Vec<Vec<f64>>,
}

impl OmegaGrid {
    pub fn new(samples: Vec<Vec<f64>>) -> Result<Self> {
        let d = samples.first().map(|s| s.len()).unwrap_or(0);
        for s in &samples {
            if s.len() != d {
                return Err(Error::FrequencyCount {
                    expected: d,
                    found: s.len(),
                });
            }
            if s.iter().any(|w| !(0.5..=1.5).contains(w)) {
                return Err(Error::param(
                    "omega",
                    format!("{s:?} lies outside [1/2, 3/2]^d"),
                ));
            }
        }
        Ok(OmegaGrid { samples })
    }

    /// Tensor grid with `per_axis` points per coordinate over the full box.
    pub fn tensor(d: usize, per_axis: usize) -> Result<Self> {
        let axis: Vec<f64> = if per_axis == 1 {
            vec![1.0]
        } else {
            (0..per_axis)
                .map(|i| 0.5 + i as f64 / (per_axis - 1) as f64)
                .collect()
        };
        let mut samples = vec![Vec::new()];
        for _ in 0..d {
            samples = samples
                .into_iter()
                .flat_map(|s| {
                    axis.iter().map(move |&w| {
                        let mut t = s.clone();
                        t.push(w);
                        t
                    })
                })
                .collect();
        }
        Self::new(samples)
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Which operator norm a Lipschitz norm is built on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum NormKind {
    Decay { s: f64, sigma: f64 },
    Beta { beta: f64, s: f64, sigma: f64 },
}

impl NormKind {
    pub fn eval(&self, a: &BlockOperator) -> f64 {
        match *self {
            NormKind::Decay { s, sigma } => decay_norm(a, s, sigma),
            NormKind::Beta { beta, s, sigma } => beta_norm(a, beta, s, sigma),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzNorm {
    pub sup: f64,
    pub lip: f64,
    /// `sup + γ·lip`.
    pub total: f64,
    /// Only one sample: the Lipschitz part could not be estimated.
    pub sup_only: bool,
}

/// `|A|^{sup} + γ|A|^{lip}` over a grid, the Lipschitz part taken as the largest
/// difference quotient over all sample pairs.
pub fn lipschitz_norm(
    grid: &OmegaGrid,
    family: impl Fn(&[f64]) -> Result<BlockOperator>,
    kind: NormKind,
    gamma: f64,
) -> Result<LipschitzNorm> {
    let ops: Vec<BlockOperator> = grid
        .samples()
        .iter()
        .map(|w| family(w))
        .collect::<Result<_>>()?;
    let sup = ops.iter().map(|a| kind.eval(a)).fold(0.0, f64::max);
    let mut lip: f64 = 0.0;
    for i in 0..ops.len() {
        for j in i + 1..ops.len() {
            let dist: f64 = grid.samples()[i]
                .iter()
                .zip(&grid.samples()[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if dist == 0.0 {
                continue;
            }
            lip = lip.max(kind.eval(&ops[i].sub(&ops[j])?) / dist);
        }
    }
    Ok(LipschitzNorm {
        sup,
        lip,
        total: sup + gamma * lip,
        sup_only: ops.len() < 2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::layout::BlockLayout;
    use crate::linalg::{CMatrix, C64};

    fn base() -> BlockOperator {
        let layout = BlockLayout::new(2, 2).unwrap();
        let mut b = BlockOperator::zeros(layout, 2, 1);
        b.set_block(
            &[1, 0],
            0,
            1,
            &CMatrix::from_element(1, 3, C64::new(0.5, 0.5)),
        )
        .unwrap();
        b
    }

    #[test]
    fn grid_rejects_points_outside_box() {
        assert!(OmegaGrid::new(vec![vec![0.4, 1.0]]).is_err());
        assert!(OmegaGrid::new(vec![vec![1.0, 1.0], vec![1.0]]).is_err());
        assert_eq!(OmegaGrid::tensor(2, 3).unwrap().len(), 9);
    }

    #[test]
    fn two_point_difference_quotient() {
        let b = base();
        let kind = NormKind::Decay { s: 1.0, sigma: 0.2 };
        let nb = kind.eval(&b);
        let grid = OmegaGrid::new(vec![vec![0.5, 1.0], vec![1.5, 1.0]]).unwrap();
        let fam = |w: &[f64]| Ok(b.scale(C64::new(w[0], 0.0)));
        let out = lipschitz_norm(&grid, fam, kind, 1.0).unwrap();
        assert!((out.total - 2.5 * nb).abs() < 1e-12);
        let out0 = lipschitz_norm(&grid, fam, kind, 0.0).unwrap();
        assert!((out0.total - 1.5 * nb).abs() < 1e-12);
    }

    #[test]
    fn constant_family_and_single_sample() {
        let b = base();
        let kind = NormKind::Beta {
            beta: 0.4,
            s: 1.0,
            sigma: 0.2,
        };
        let grid = OmegaGrid::tensor(2, 2).unwrap();
        let out = lipschitz_norm(&grid, |_| Ok(b.clone()), kind, 1.0).unwrap();
        assert_eq!(out.lip, 0.0);
        assert_eq!(out.total, kind.eval(&b));
        let one = OmegaGrid::new(vec![vec![1.0, 1.0]]).unwrap();
        assert!(
            lipschitz_norm(&one, |_| Ok(b.clone()), kind, 1.0)
                .unwrap()
                .sup_only
        );
    }
}
