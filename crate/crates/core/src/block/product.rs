//! Products of block operators: Fourier convolution in `l`, matrix product in
//! the basis. Two equivalent evaluation paths are available; the cheaper one is
//! picked per call.

use super::operator::{mode_norm_sq, BlockOperator, Mode};
use crate::error::Result;
use crate::linalg::{gemm_acc, gemm_square_slices, CMatrix, C64, ONE, ZERO};
use std::collections::{BTreeMap, BTreeSet};

/// Product together with a bound on the discarded Fourier tail.
#[derive(Clone, Debug)]
pub struct TrackedProduct {
    pub product: BlockOperator,
    /// `sqrt(Σ_m (Σ_{l1+l2=m} ‖A(l1)‖_F ‖B(l2)‖_F)^2)` over discarded modes `m`.
    pub truncation_loss: f64,
}

/// Evaluation path for products.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProductPath {
    /// Direct convolution over stored mode pairs.
    Convolution,
    /// Pointwise products on an alias-free angle grid.
    Grid,
    /// Cheaper of the two by operation count.
    Auto,
}

/// `A ∘ B`.
pub fn compose(a: &BlockOperator, b: &BlockOperator) -> Result<BlockOperator> {
    Ok(compose_tracked(a, b)?.product)
}

/// `A ∘ B` with the truncation-loss diagnostic.
pub fn compose_tracked(a: &BlockOperator, b: &BlockOperator) -> Result<TrackedProduct> {
    product(a, b, false, ProductPath::Auto)
}

/// `[A, B] = AB - BA`.
pub fn commutator(a: &BlockOperator, b: &BlockOperator) -> Result<BlockOperator> {
    Ok(product(a, b, true, ProductPath::Auto)?.product)
}

/// `AB` or `AB - BA` along a chosen path.
pub fn product(
    a: &BlockOperator,
    b: &BlockOperator,
    commute: bool,
    path: ProductPath,
) -> Result<TrackedProduct> {
    a.check_compatible(b)?;
    let l_max = a.l_max();
    let r2 = (l_max * l_max) as i64;
    let mut reachable: BTreeSet<Mode> = BTreeSet::new();
    let mut lost: BTreeMap<Mode, f64> = BTreeMap::new();
    let fa: Vec<f64> = a
        .modes()
        .values()
        .map(|m| crate::linalg::fro2(m).sqrt())
        .collect();
    let fb: Vec<f64> = b
        .modes()
        .values()
        .map(|m| crate::linalg::fro2(m).sqrt())
        .collect();
    let mut kept_pairs = 0usize;
    for (ia, la) in a.modes().keys().enumerate() {
        for (ib, lb) in b.modes().keys().enumerate() {
            let l: Mode = la.iter().zip(lb).map(|(x, y)| x + y).collect();
            if mode_norm_sq(&l) <= r2 {
                reachable.insert(l);
                kept_pairs += 1;
            } else {
                let w = if commute { 2.0 } else { 1.0 };
                *lost.entry(l).or_default() += w * fa[ia] * fb[ib];
            }
        }
    }
    let truncation_loss = lost.values().map(|x| x * x).sum::<f64>().sqrt();
    let n = a.size();
    let mut out = BlockOperator::zeros(a.layout().clone(), a.d(), l_max);
    if reachable.is_empty() || n == 0 {
        return Ok(TrackedProduct {
            product: out,
            truncation_loss,
        });
    }
    let gemms = if commute { 2 } else { 1 };
    let plan = GridPlan::new(a, b);
    let use_grid = match path {
        ProductPath::Convolution => false,
        ProductPath::Grid => true,
        ProductPath::Auto => {
            let conv = (kept_pairs * gemms) as f64 * (n * n * n) as f64;
            conv > plan.cost(n, gemms)
        }
    };
    if use_grid {
        plan.run(a, b, commute, &reachable, &mut out);
    } else {
        for l in &reachable {
            out.insert_mode(l, CMatrix::zeros(n, n))?;
        }
        for (la, ma) in a.modes() {
            for (lb, mb) in b.modes() {
                let l: Mode = la.iter().zip(lb).map(|(x, y)| x + y).collect();
                if mode_norm_sq(&l) > r2 {
                    continue;
                }
                let dst = out.mode_mut(&l)?;
                gemm_acc(dst, ma, mb);
            }
        }
        if commute {
            for (lb, mb) in b.modes() {
                for (la, ma) in a.modes() {
                    let l: Mode = la.iter().zip(lb).map(|(x, y)| x + y).collect();
                    if mode_norm_sq(&l) > r2 {
                        continue;
                    }
                    let dst = out.mode_mut(&l)?;
                    crate::linalg::gemm_scaled(dst, -ONE, mb, ma, ONE);
                }
            }
        }
    }
    Ok(TrackedProduct {
        product: out,
        truncation_loss,
    })
}

/// Largest absolute mode component.
fn box_radius(op: &BlockOperator) -> usize {
    op.modes()
        .keys()
        .flat_map(|l| l.iter().map(|x| x.unsigned_abs() as usize))
        .max()
        .unwrap_or(0)
}

/// Uniform angle grid with `p` points per axis. The inputs live in boxes of
/// half-width `ra`, `rb`; the kept output lives in the ball of radius `l_max`.
/// With `p > ra + rb + l_max` no product mode aliases onto a kept mode.
struct GridPlan {
    d: usize,
    ra: usize,
    rb: usize,
    l_out: usize,
    p: usize,
}

impl GridPlan {
    fn new(a: &BlockOperator, b: &BlockOperator) -> Self {
        let ra = box_radius(a);
        let rb = box_radius(b);
        let l_out = a.l_max().min(ra + rb);
        GridPlan {
            d: a.d(),
            ra,
            rb,
            l_out,
            p: ra + rb + l_out + 1,
        }
    }

    fn points(&self) -> usize {
        self.p.pow(self.d as u32)
    }

    fn cost(&self, n: usize, gemms: usize) -> f64 {
        let n2 = (n * n) as f64;
        let g = self.points() as f64;
        let per_axis = |r: usize| (2 * r + 1) as f64;
        let transforms =
            n2 * g * (per_axis(self.ra) + per_axis(self.rb) + per_axis(self.l_out)) * self.d as f64;
        g * gemms as f64 * (n * n * n) as f64 + transforms
    }

    fn run(
        &self,
        a: &BlockOperator,
        b: &BlockOperator,
        commute: bool,
        reachable: &BTreeSet<Mode>,
        out: &mut BlockOperator,
    ) {
        let n = a.size();
        let n2 = n * n;
        let ga = to_grid(a, self.ra, self.p);
        let gb = to_grid(b, self.rb, self.p);
        let g = self.points();
        let mut gc = vec![ZERO; g * n2];
        for pt in 0..g {
            let sa = &ga[pt * n2..(pt + 1) * n2];
            let sb = &gb[pt * n2..(pt + 1) * n2];
            let sc = &mut gc[pt * n2..(pt + 1) * n2];
            gemm_square_slices(n, ONE, sa, sb, ZERO, sc);
            if commute {
                gemm_square_slices(n, -ONE, sb, sa, ONE, sc);
            }
        }
        drop(ga);
        drop(gb);
        let boxed = from_grid(gc, self.d, self.p, self.l_out, n2);
        let width = 2 * self.l_out + 1;
        for l in reachable {
            let mut idx = 0usize;
            for &x in l.iter() {
                idx = idx * width + (x + self.l_out as i32) as usize;
            }
            let slice = &boxed[idx * n2..(idx + 1) * n2];
            out.insert_mode(l, CMatrix::from_column_slice(n, n, slice))
                .expect("reachable mode lies in the truncation");
        }
    }
}

/// Samples `A(φ)` on the grid `φ_j = 2π g_j / p`; output is grid-point major,
/// each point an `n x n` column-major matrix.
fn to_grid(op: &BlockOperator, r: usize, p: usize) -> Vec<C64> {
    let d = op.d();
    let n2 = op.size() * op.size();
    let width = 2 * r + 1;
    let mut data = vec![ZERO; width.pow(d as u32) * n2];
    for (l, m) in op.modes() {
        let mut idx = 0usize;
        for &x in l {
            idx = idx * width + (x + r as i32) as usize;
        }
        data[idx * n2..(idx + 1) * n2].copy_from_slice(m.as_slice());
    }
    let mut dims = vec![width; d];
    for axis in 0..d {
        let weights: Vec<Vec<C64>> = (0..width)
            .map(|t| {
                (0..p)
                    .map(|g| {
                        let arg = 2.0 * std::f64::consts::PI * (t as f64 - r as f64) * g as f64
                            / p as f64;
                        C64::from_polar(1.0, arg)
                    })
                    .collect()
            })
            .collect();
        data = transform_axis(&data, &mut dims, axis, p, n2, &weights);
    }
    data
}

/// Inverse of [`to_grid`] onto the box of half-width `r_out`.
fn from_grid(data: Vec<C64>, d: usize, p: usize, r_out: usize, n2: usize) -> Vec<C64> {
    let width = 2 * r_out + 1;
    let mut dims = vec![p; d];
    let mut data = data;
    for axis in 0..d {
        let weights: Vec<Vec<C64>> = (0..p)
            .map(|g| {
                (0..width)
                    .map(|o| {
                        let arg =
                            -2.0 * std::f64::consts::PI * (o as f64 - r_out as f64) * g as f64
                                / p as f64;
                        C64::from_polar(1.0 / p as f64, arg)
                    })
                    .collect()
            })
            .collect();
        data = transform_axis(&data, &mut dims, axis, width, n2, &weights);
    }
    data
}

/// Linear map along one axis: `out[.., j, ..] = Σ_t in[.., t, ..] w[t][j]`.
fn transform_axis(
    data: &[C64],
    dims: &mut [usize],
    axis: usize,
    new_len: usize,
    n2: usize,
    weights: &[Vec<C64>],
) -> Vec<C64> {
    let outer: usize = dims[..axis].iter().product();
    let inner: usize = dims[axis + 1..].iter().product::<usize>() * n2;
    let old_len = dims[axis];
    let mut out = vec![ZERO; outer * new_len * inner];
    for o in 0..outer {
        for t in 0..old_len {
            let src = &data[(o * old_len + t) * inner..(o * old_len + t + 1) * inner];
            if src.iter().all(|z| *z == ZERO) {
                continue;
            }
            for (j, w) in weights[t].iter().enumerate() {
                let dst = &mut out[(o * new_len + j) * inner..(o * new_len + j + 1) * inner];
                for (x, y) in dst.iter_mut().zip(src) {
                    *x += w * y;
                }
            }
        }
    }
    dims[axis] = new_len;
    out
}
