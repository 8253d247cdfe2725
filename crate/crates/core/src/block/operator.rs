use super::layout::BlockLayout;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64, I, ONE};
use nalgebra::{DMatrixView, DMatrixViewMut};
use std::collections::BTreeMap;
use std::sync::Arc;

/// Fourier mode `l ∈ Z^d`.
pub type Mode = Vec<i32>;

/// Squared Euclidean length of a mode.
pub fn mode_norm_sq(l: &[i32]) -> i64 {
    l.iter().map(|&x| x as i64 * x as i64).sum()
}

pub fn mode_norm(l: &[i32]) -> f64 {
    (mode_norm_sq(l) as f64).sqrt()
}

pub fn neg_mode(l: &[i32]) -> Mode {
    l.iter().map(|x| -x).collect()
}

/// All modes with `|l| <= radius`, in lexicographic order.
pub fn modes_in_ball(d: usize, radius: usize) -> Vec<Mode> {
    let mut out = Vec::new();
    for_each_in_ball(d, radius, |l| out.push(l.to_vec()));
    out
}

/// Visits every mode with `|l| <= radius` in lexicographic order without
/// materializing the ball.
pub fn for_each_in_ball(d: usize, radius: usize, mut f: impl FnMut(&[i32])) {
    let r2 = (radius * radius) as i64;
    let mut cur = vec![0i32; d];
    fn rec(cur: &mut [i32], i: usize, budget: i64, f: &mut dyn FnMut(&[i32])) {
        if i == cur.len() {
            f(cur);
            return;
        }
        let mut top = (budget as f64).sqrt().floor() as i32;
        while (top as i64) * (top as i64) > budget {
            top -= 1;
        }
        while (top as i64 + 1) * (top as i64 + 1) <= budget {
            top += 1;
        }
        for x in -top..=top {
            cur[i] = x;
            rec(cur, i + 1, budget - x as i64 * x as i64, f);
        }
    }
    rec(&mut cur, 0, r2, &mut f);
}

/// Which side a diagonal scaling acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Truncated φ-dependent block operator `A(φ) = Σ_l A(l) e^{i l·φ}`.
///
/// Each stored Fourier coefficient is the full matrix on the flattened basis;
/// the eigenspace blocks are views into it. Absent modes are zero.
#[derive(Clone, Debug)]
pub struct BlockOperator {
    layout: Arc<BlockLayout>,
    d: usize,
    l_max: usize,
    modes: BTreeMap<Mode, CMatrix>,
}

impl BlockOperator {
    pub fn zeros(layout: Arc<BlockLayout>, d: usize, l_max: usize) -> Self {
        BlockOperator {
            layout,
            d,
            l_max,
            modes: BTreeMap::new(),
        }
    }

    pub fn identity(layout: Arc<BlockLayout>, d: usize, l_max: usize) -> Self {
        let n = layout.total();
        let mut op = Self::zeros(layout, d, l_max);
        op.modes.insert(vec![0; d], CMatrix::identity(n, n));
        op
    }

    /// φ-independent diagonal operator with entry `f(i)` at flattened position `i`.
    pub fn diagonal_from_fn(
        layout: Arc<BlockLayout>,
        d: usize,
        l_max: usize,
        f: impl Fn(usize) -> C64,
    ) -> Self {
        let n = layout.total();
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = f(i);
        }
        let mut op = Self::zeros(layout, d, l_max);
        op.modes.insert(vec![0; d], m);
        op.prune(0.0);
        op
    }

    /// `-i D²` as an operator on the truncation.
    pub fn minus_i_laplacian(layout: Arc<BlockLayout>, d: usize, l_max: usize) -> Self {
        let lam = layout.lambda_flat();
        Self::diagonal_from_fn(layout, d, l_max, |i| -I * lam[i])
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

    pub fn k_max(&self) -> usize {
        self.layout.k_max()
    }

    pub fn size(&self) -> usize {
        self.layout.total()
    }

    pub fn modes(&self) -> &BTreeMap<Mode, CMatrix> {
        &self.modes
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn mode(&self, l: &[i32]) -> Option<&CMatrix> {
        self.modes.get(l)
    }

    pub fn contains_mode(&self, l: &[i32]) -> bool {
        l.len() == self.d && mode_norm_sq(l) <= (self.l_max * self.l_max) as i64
    }

    fn check_mode(&self, l: &[i32]) -> Result<()> {
        if l.len() != self.d {
            return Err(Error::FrequencyCount {
                expected: self.d,
                found: l.len(),
            });
        }
        if !self.contains_mode(l) {
            return Err(Error::ShapeMismatch(format!(
                "mode {l:?} lies outside the truncation |l| <= {}",
                self.l_max
            )));
        }
        Ok(())
    }

    /// Mutable access to a mode, inserting a zero matrix if absent.
    pub fn mode_mut(&mut self, l: &[i32]) -> Result<&mut CMatrix> {
        self.check_mode(l)?;
        let n = self.size();
        Ok(self
            .modes
            .entry(l.to_vec())
            .or_insert_with(|| CMatrix::zeros(n, n)))
    }

    pub fn insert_mode(&mut self, l: &[i32], m: CMatrix) -> Result<()> {
        self.check_mode(l)?;
        if m.shape() != (self.size(), self.size()) {
            return Err(Error::ShapeMismatch(format!(
                "mode matrix has shape {:?}, expected {}x{}",
                m.shape(),
                self.size(),
                self.size()
            )));
        }
        self.modes.insert(l.to_vec(), m);
        Ok(())
    }

    pub fn remove_mode(&mut self, l: &[i32]) -> Option<CMatrix> {
        self.modes.remove(l)
    }

    /// Block `A_{[k]}^{[k']}(l)`, `None` if the mode is absent.
    pub fn block(&self, l: &[i32], k: usize, kp: usize) -> Option<DMatrixView<'_, C64>> {
        let m = self.modes.get(l)?;
        let r = self.layout.range(k);
        let c = self.layout.range(kp);
        Some(m.view((r.start, c.start), (r.len(), c.len())))
    }

    /// Writes block `(k, k')` of mode `l`.
    pub fn set_block(&mut self, l: &[i32], k: usize, kp: usize, b: &CMatrix) -> Result<()> {
        if k > self.k_max() || kp > self.k_max() {
            return Err(Error::ShapeMismatch(format!(
                "block ({k}, {kp}) outside K_max = {}",
                self.k_max()
            )));
        }
        let r = self.layout.range(k);
        let c = self.layout.range(kp);
        if b.shape() != (r.len(), c.len()) {
            return Err(Error::ShapeMismatch(format!(
                "block ({k}, {kp}) needs shape {}x{}, got {:?}",
                r.len(),
                c.len(),
                b.shape()
            )));
        }
        let m = self.mode_mut(l)?;
        m.view_mut((r.start, c.start), (r.len(), c.len()))
            .copy_from(b);
        Ok(())
    }

    /// Calls `f(l, k, k', block)` on every block of every stored mode.
    pub fn for_each_block_mut(
        &mut self,
        mut f: impl FnMut(&[i32], usize, usize, DMatrixViewMut<'_, C64>),
    ) {
        let layout = self.layout.clone();
        let km = layout.k_max();
        for (l, m) in self.modes.iter_mut() {
            for k in 0..=km {
                let r = layout.range(k);
                for kp in 0..=km {
                    let c = layout.range(kp);
                    f(l, k, kp, m.view_mut((r.start, c.start), (r.len(), c.len())));
                }
            }
        }
    }

    /// Same truncation and basis.
    pub fn check_compatible(&self, other: &BlockOperator) -> Result<()> {
        if *self.layout != *other.layout {
            return Err(Error::ShapeMismatch(format!(
                "layouts differ: (n={}, K_max={}) vs (n={}, K_max={})",
                self.layout.n(),
                self.k_max(),
                other.layout.n(),
                other.k_max()
            )));
        }
        if self.d != other.d {
            return Err(Error::FrequencyCount {
                expected: self.d,
                found: other.d,
            });
        }
        if self.l_max != other.l_max {
            return Err(Error::ShapeMismatch(format!(
                "Fourier truncations differ: {} vs {}",
                self.l_max, other.l_max
            )));
        }
        Ok(())
    }

    /// Drops modes whose largest entry is at most `tol`.
    pub fn prune(&mut self, tol: f64) {
        self.modes.retain(|_, m| m.iter().any(|z| z.norm() > tol));
    }

    pub fn is_zero(&self) -> bool {
        self.modes
            .values()
            .all(|m| m.iter().all(|z| *z == C64::new(0.0, 0.0)))
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, other: &BlockOperator, c: C64) -> Result<()> {
        self.check_compatible(other)?;
        let n = self.size();
        for (l, m) in &other.modes {
            let dst = self
                .modes
                .entry(l.clone())
                .or_insert_with(|| CMatrix::zeros(n, n));
            if c == ONE {
                *dst += m;
            } else {
                dst.zip_apply(m, |a, b| *a += c * b);
            }
        }
        Ok(())
    }

    pub fn add(&self, other: &BlockOperator) -> Result<BlockOperator> {
        let mut out = self.clone();
        out.add_scaled(other, ONE)?;
        Ok(out)
    }

    pub fn sub(&self, other: &BlockOperator) -> Result<BlockOperator> {
        let mut out = self.clone();
        out.add_scaled(other, -ONE)?;
        Ok(out)
    }

    pub fn scale(&self, c: C64) -> BlockOperator {
        let mut out = self.clone();
        out.scale_mut(c);
        out
    }

    pub fn scale_mut(&mut self, c: C64) {
        for m in self.modes.values_mut() {
            *m *= c;
        }
    }

    /// Operator adjoint: `(A*)(l) = A(-l)^H`.
    pub fn adjoint(&self) -> BlockOperator {
        let mut out = BlockOperator::zeros(self.layout.clone(), self.d, self.l_max);
        for (l, m) in &self.modes {
            out.modes.insert(neg_mode(l), m.adjoint());
        }
        out
    }

    /// `D^q A` (left) or `A D^q` (right), with `D = diag(max(λ_k,1)^{1/2})`.
    pub fn scale_by_d(&self, q: f64, side: Side) -> BlockOperator {
        let mut out = self.clone();
        if q == 0.0 {
            return out;
        }
        let layout = self.layout.clone();
        out.for_each_block_mut(|_, k, kp, mut b| {
            let idx = match side {
                Side::Left => k,
                Side::Right => kp,
            };
            b *= C64::new(layout.d_weight(idx).powf(q), 0.0);
        });
        out
    }

    /// Keeps modes with `|l| < n`.
    pub fn project_fourier(&self, n: usize) -> BlockOperator {
        let mut out = BlockOperator::zeros(self.layout.clone(), self.d, self.l_max);
        let n2 = (n * n) as i64;
        for (l, m) in &self.modes {
            if mode_norm_sq(l) < n2 {
                out.modes.insert(l.clone(), m.clone());
            }
        }
        out
    }

    /// `(Id - Π_n) A`.
    pub fn fourier_tail(&self, n: usize) -> BlockOperator {
        let mut out = BlockOperator::zeros(self.layout.clone(), self.d, self.l_max);
        let n2 = (n * n) as i64;
        for (l, m) in &self.modes {
            if mode_norm_sq(l) >= n2 {
                out.modes.insert(l.clone(), m.clone());
            }
        }
        out
    }

    /// Keeps only the `(l = 0, k = k')` blocks.
    pub fn diag_part(&self) -> BlockOperator {
        let mut out = BlockOperator::zeros(self.layout.clone(), self.d, self.l_max);
        let zero = vec![0; self.d];
        if let Some(m) = self.modes.get(&zero) {
            let n = self.size();
            let mut dm = CMatrix::zeros(n, n);
            for k in 0..=self.k_max() {
                let r = self.layout.range(k);
                dm.view_mut((r.start, r.start), (r.len(), r.len()))
                    .copy_from(&m.view((r.start, r.start), (r.len(), r.len())));
            }
            out.modes.insert(zero, dm);
        }
        out
    }

    /// `A - Diag A`.
    pub fn off_diag_part(&self) -> BlockOperator {
        let mut out = self.clone();
        let zero = vec![0; self.d];
        if let Some(m) = out.modes.get_mut(&zero) {
            for k in 0..=self.layout.k_max() {
                let r = self.layout.range(k);
                m.view_mut((r.start, r.start), (r.len(), r.len()))
                    .fill(C64::new(0.0, 0.0));
            }
        }
        out
    }

    /// Largest spectral norm among the diagonal blocks `A_{[k]}^{[k]}(l)`, all `l`.
    pub fn max_diagonal_block_norm(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for l in self.modes.keys() {
            for k in 0..=self.k_max() {
                if let Some(b) = self.block(l, k, k) {
                    worst = worst.max(crate::linalg::spectral_norm(b));
                }
            }
        }
        worst
    }

    /// Symbol of `ω·∂_φ A`: mode `l` multiplied by `i ω·l`.
    pub fn omega_derivative(&self, omega: &[f64]) -> Result<BlockOperator> {
        if omega.len() != self.d {
            return Err(Error::FrequencyCount {
                expected: self.d,
                found: omega.len(),
            });
        }
        let mut out = self.clone();
        for (l, m) in out.modes.iter_mut() {
            let w: f64 = l.iter().zip(omega).map(|(a, b)| *a as f64 * b).sum();
            *m *= C64::new(0.0, w);
        }
        out.modes.retain(|l, _| l.iter().any(|&x| x != 0));
        Ok(out)
    }

    /// `A·C - C·A` for the diagonal matrix `C = diag(c)` on the flattened basis.
    pub fn commute_with_diagonal(&self, c: &[C64]) -> BlockOperator {
        let mut out = self.clone();
        for m in out.modes.values_mut() {
            for j in 0..m.ncols() {
                for i in 0..m.nrows() {
                    m[(i, j)] *= c[j] - c[i];
                }
            }
        }
        out
    }

    /// `A(φ) = Σ_l A(l) e^{i l·φ}`.
    pub fn evaluate(&self, phi: &[f64]) -> CMatrix {
        let n = self.size();
        let mut out = CMatrix::zeros(n, n);
        for (l, m) in &self.modes {
            let arg: f64 = l.iter().zip(phi).map(|(a, b)| *a as f64 * b).sum();
            let ph = C64::from_polar(1.0, arg);
            out.zip_apply(m, |o, x| *o += ph * x);
        }
        out
    }

    /// Total Frobenius norm over all modes; bounds the (0,0) decay norm above.
    pub fn frobenius_norm(&self) -> f64 {
        self.modes
            .values()
            .map(crate::linalg::fro2)
            .sum::<f64>()
            .sqrt()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.modes
            .values()
            .flat_map(|m| m.iter())
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Largest entrywise difference, absent modes counted as zero.
    pub fn max_abs_diff(&self, other: &BlockOperator) -> f64 {
        let mut worst: f64 = 0.0;
        for (l, m) in &self.modes {
            match other.modes.get(l) {
                Some(o) => {
                    for (a, b) in m.iter().zip(o.iter()) {
                        worst = worst.max((a - b).norm());
                    }
                }
                None => worst = worst.max(m.iter().map(|z| z.norm()).fold(0.0, f64::max)),
            }
        }
        for (l, o) in &other.modes {
            if !self.modes.contains_key(l) {
                worst = worst.max(o.iter().map(|z| z.norm()).fold(0.0, f64::max));
            }
        }
        worst
    }

    /// φ-independent: only the zero mode is nonzero.
    pub fn is_phi_independent(&self, tol: f64) -> bool {
        self.modes
            .iter()
            .all(|(l, m)| l.iter().all(|&x| x == 0) || m.iter().all(|z| z.norm() <= tol))
    }

    /// Same operator with a different Fourier truncation; modes outside the
    /// new bound are dropped.
    pub fn with_l_max(&self, l_max: usize) -> BlockOperator {
        let mut out = BlockOperator::zeros(self.layout.clone(), self.d, l_max);
        let r2 = (l_max * l_max) as i64;
        for (l, m) in &self.modes {
            if mode_norm_sq(l) <= r2 {
                out.modes.insert(l.clone(), m.clone());
            }
        }
        out
    }

    /// Interior window: blocks with `k, k' <= k_cut` and modes with `|l| <= l_cut`.
    pub fn restrict(&self, k_cut: usize, l_cut: f64) -> BlockOperator {
        let mut out = self.clone();
        out.modes.retain(|l, _| mode_norm(l) <= l_cut + 1e-12);
        out.for_each_block_mut(|_, k, kp, mut b| {
            if k > k_cut || kp > k_cut {
                b.fill(C64::new(0.0, 0.0));
            }
        });
        out
    }
}
