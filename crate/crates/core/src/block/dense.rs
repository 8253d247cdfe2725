//! Flattening of block operators into ordinary matrices over a finite window
//! of frequencies, used as an independent reference for the block algebra.

use super::operator::{mode_norm_sq, BlockOperator, Mode};
use crate::error::Result;
use crate::linalg::{CMatrix, C64};

/// Frequencies `p ∈ [-w, w]^d` times the flattened spatial basis.
#[derive(Clone, Copy, Debug)]
pub struct DenseWindow {
    pub d: usize,
    pub w: usize,
    pub basis: usize,
}

impl DenseWindow {
    pub fn new(d: usize, w: usize, basis: usize) -> Self {
        DenseWindow { d, w, basis }
    }

    pub fn frequencies(&self) -> usize {
        (2 * self.w + 1).pow(self.d as u32)
    }

    pub fn size(&self) -> usize {
        self.frequencies() * self.basis
    }

    fn freq_index(&self, p: &[i32]) -> Option<usize> {
        let width = (2 * self.w + 1) as i32;
        let mut idx = 0usize;
        for &x in p {
            let shifted = x + self.w as i32;
            if shifted < 0 || shifted >= width {
                return None;
            }
            idx = idx * width as usize + shifted as usize;
        }
        Some(idx)
    }

    fn freq_of(&self, mut idx: usize) -> Mode {
        let width = 2 * self.w + 1;
        let mut p = vec![0; self.d];
        for slot in p.iter_mut().rev() {
            *slot = (idx % width) as i32 - self.w as i32;
            idx /= width;
        }
        p
    }

    /// Flattened operator: entry `((p,i),(q,j)) = A(p-q)_{ij}`.
    pub fn flatten(&self, a: &BlockOperator) -> CMatrix {
        let nb = self.basis;
        let mut out = CMatrix::zeros(self.size(), self.size());
        for pi in 0..self.frequencies() {
            let p = self.freq_of(pi);
            for qi in 0..self.frequencies() {
                let q = self.freq_of(qi);
                let l: Mode = p.iter().zip(&q).map(|(x, y)| x - y).collect();
                if let Some(m) = a.mode(&l) {
                    out.view_mut((pi * nb, qi * nb), (nb, nb)).copy_from(m);
                }
            }
        }
        out
    }

    /// `ω·∂_φ` in flattened form: `diag(i ω·p)`.
    pub fn derivative(&self, omega: &[f64]) -> CMatrix {
        let mut out = CMatrix::zeros(self.size(), self.size());
        for pi in 0..self.frequencies() {
            let p = self.freq_of(pi);
            let w: f64 = p.iter().zip(omega).map(|(a, b)| *a as f64 * b).sum();
            for i in 0..self.basis {
                let r = pi * self.basis + i;
                out[(r, r)] = C64::new(0.0, w);
            }
        }
        out
    }

    /// Reads the symbol back from the row block `p = 0`: `A(l) = X_{(0),(−l)}`,
    /// keeping modes with `|l| <= l_max`.
    pub fn unflatten(&self, x: &CMatrix, template: &BlockOperator) -> Result<BlockOperator> {
        let nb = self.basis;
        let zero = vec![0; self.d];
        let row = self.freq_index(&zero).expect("zero frequency in window");
        let mut out =
            BlockOperator::zeros(template.layout().clone(), template.d(), template.l_max());
        let r2 = (template.l_max() * template.l_max()) as i64;
        for qi in 0..self.frequencies() {
            let q = self.freq_of(qi);
            let l: Mode = q.iter().map(|x| -x).collect();
            if mode_norm_sq(&l) > r2 {
                continue;
            }
            let block = x.view((row * nb, qi * nb), (nb, nb)).into_owned();
            if block.iter().any(|z| z.norm() > 0.0) {
                out.insert_mode(&l, block)?;
            }
        }
        Ok(out)
    }
}

/// Dense matrix exponential by scaling and squaring with a Taylor core.
pub fn dense_exp(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    let norm = a.iter().map(|z| z.norm()).sum::<f64>().max(a.norm());
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let x = a * C64::new(scale, 0.0);
    let mut term = CMatrix::identity(n, n);
    let mut sum = CMatrix::identity(n, n);
    for p in 1..40 {
        term = crate::linalg::matmul(&term, &x) * C64::new(1.0 / p as f64, 0.0);
        sum += &term;
        if term.norm() < 1e-18 * sum.norm() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = crate::linalg::matmul(&sum, &sum);
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::layout::BlockLayout;

    #[test]
    fn flatten_round_trip() {
        let layout = BlockLayout::new(2, 1).unwrap();
        let n = layout.total();
        let mut a = BlockOperator::zeros(layout, 2, 1);
        for l in [[1, 0], [0, -1], [0, 0]] {
            a.insert_mode(
                &l,
                CMatrix::from_fn(n, n, |i, j| {
                    C64::new(i as f64 + l[0] as f64, j as f64 - l[1] as f64)
                }),
            )
            .unwrap();
        }
        let w = DenseWindow::new(2, 1, n);
        let back = w.unflatten(&w.flatten(&a), &a).unwrap();
        assert_eq!(back.max_abs_diff(&a), 0.0);
    }

    #[test]
    fn dense_exp_matches_nalgebra() {
        let a = CMatrix::from_fn(4, 4, |i, j| {
            C64::new((i as f64 - j as f64) * 0.3, 0.2 * (i + j) as f64)
        });
        assert!((dense_exp(&a) - a.clone().exp()).norm() < 1e-12);
    }
}
