use super::layout::BlockLayout;
use super::operator::{mode_norm_sq, BlockOperator, Mode};
use crate::error::{Error, Result};
use crate::linalg::{CVector, C64};
use std::collections::BTreeMap;
use std::sync::Arc;

/// Sequence `z_{[k]}(l)` stored as one flattened coefficient vector per mode.
#[derive(Clone, Debug)]
pub struct StateVector {
    layout: Arc<BlockLayout>,
    d: usize,
    l_max: usize,
    modes: BTreeMap<Mode, CVector>,
}

impl StateVector {
    pub fn zeros(layout: Arc<BlockLayout>, d: usize, l_max: usize) -> Self {
        StateVector {
            layout,
            d,
            l_max,
            modes: BTreeMap::new(),
        }
    }

    /// φ-independent state with coefficient vector `v`.
    pub fn constant(layout: Arc<BlockLayout>, d: usize, l_max: usize, v: CVector) -> Result<Self> {
        let mut z = Self::zeros(layout, d, l_max);
        z.insert_mode(&vec![0; d], v)?;
        Ok(z)
    }

    pub fn layout(&self) -> &Arc<BlockLayout> {
        &self.layout
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn modes(&self) -> &BTreeMap<Mode, CVector> {
        &self.modes
    }

    pub fn mode(&self, l: &[i32]) -> Option<&CVector> {
        self.modes.get(l)
    }

    pub fn insert_mode(&mut self, l: &[i32], v: CVector) -> Result<()> {
        if l.len() != self.d {
            return Err(Error::FrequencyCount {
                expected: self.d,
                found: l.len(),
            });
        }
        if mode_norm_sq(l) > (self.l_max * self.l_max) as i64 {
            return Err(Error::ShapeMismatch(format!(
                "mode {l:?} outside |l| <= {}",
                self.l_max
            )));
        }
        if v.len() != self.layout.total() {
            return Err(Error::ShapeMismatch(format!(
                "vector length {} does not match basis size {}",
                v.len(),
                self.layout.total()
            )));
        }
        self.modes.insert(l.to_vec(), v);
        Ok(())
    }

    /// Coefficient vector of block `k` at mode `l`.
    pub fn block(&self, l: &[i32], k: usize) -> Option<CVector> {
        let v = self.modes.get(l)?;
        let r = self.layout.range(k);
        Some(v.rows(r.start, r.len()).into_owned())
    }

    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        let mut worst: f64 = 0.0;
        let zero = CVector::zeros(self.layout.total());
        let keys: std::collections::BTreeSet<&Mode> =
            self.modes.keys().chain(other.modes.keys()).collect();
        for l in keys {
            let a = self.modes.get(l).unwrap_or(&zero);
            let b = other.modes.get(l).unwrap_or(&zero);
            for (x, y) in a.iter().zip(b.iter()) {
                worst = worst.max((x - y).norm());
            }
        }
        worst
    }

    /// `z(φ) = Σ_l z(l) e^{i l·φ}`.
    pub fn evaluate(&self, phi: &[f64]) -> CVector {
        let mut out = CVector::zeros(self.layout.total());
        for (l, v) in &self.modes {
            let arg: f64 = l.iter().zip(phi).map(|(a, b)| *a as f64 * b).sum();
            out += v * C64::from_polar(1.0, arg);
        }
        out
    }
}

/// `(Az)(l) = Σ_p A(l-p) z(p)`, truncated to `|l| <= L_max`.
pub fn apply(a: &BlockOperator, z: &StateVector) -> Result<StateVector> {
    if **a.layout() != *z.layout || a.d() != z.d || a.l_max() != z.l_max {
        return Err(Error::ShapeMismatch(
            "operator and state have different truncations".into(),
        ));
    }
    let r2 = (a.l_max() * a.l_max()) as i64;
    let mut out = StateVector::zeros(z.layout.clone(), z.d, z.l_max);
    let n = z.layout.total();
    for (la, m) in a.modes() {
        for (lz, v) in &z.modes {
            let l: Mode = la.iter().zip(lz).map(|(x, y)| x + y).collect();
            if mode_norm_sq(&l) > r2 {
                continue;
            }
            let dst = out.modes.entry(l).or_insert_with(|| CVector::zeros(n));
            dst.gemv(C64::new(1.0, 0.0), m, v, C64::new(1.0, 0.0));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CMatrix;

    #[test]
    fn identity_action() {
        let layout = BlockLayout::new(2, 2).unwrap();
        let n = layout.total();
        let mut z = StateVector::zeros(layout.clone(), 1, 2);
        z.insert_mode(&[1], CVector::from_fn(n, |i, _| C64::new(i as f64, 1.0)))
            .unwrap();
        z.insert_mode(&[-2], CVector::from_fn(n, |i, _| C64::new(1.0, i as f64)))
            .unwrap();
        let id = BlockOperator::identity(layout, 1, 2);
        assert_eq!(apply(&id, &z).unwrap().max_abs_diff(&z), 0.0);
    }

    #[test]
    fn action_matches_pointwise_evaluation_without_truncation() {
        let layout = BlockLayout::new(2, 1).unwrap();
        let n = layout.total();
        let mut a = BlockOperator::zeros(layout.clone(), 1, 3);
        a.insert_mode(
            &[1],
            CMatrix::from_fn(n, n, |i, j| C64::new(i as f64 - j as f64, 0.5)),
        )
        .unwrap();
        let mut z = StateVector::zeros(layout, 1, 3);
        z.insert_mode(&[-1], CVector::from_fn(n, |i, _| C64::new(1.0, i as f64)))
            .unwrap();
        z.insert_mode(
            &[2],
            CVector::from_fn(n, |i, _| C64::new(0.3 * i as f64, -1.0)),
        )
        .unwrap();
        let az = apply(&a, &z).unwrap();
        let phi = [0.37];
        let direct = a.evaluate(&phi) * z.evaluate(&phi);
        assert!((az.evaluate(&phi) - direct).norm() < 1e-12);
    }
}
