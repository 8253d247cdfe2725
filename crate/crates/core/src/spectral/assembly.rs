use super::{HarmonicIndex, HarmonicTable, PotentialSpec, SphereSpec};
use crate::block::{compose, BlockLayout, BlockOperator};
use crate::error::{Error, Result};
use crate::linalg::{gemm_scaled, CMatrix, C64, ONE, ZERO};

/// `∫_{S²} Y_a Y_b conj(Y_c) dΩ`.
pub fn gaunt_coefficient(
    spec: &SphereSpec,
    a: HarmonicIndex,
    b: HarmonicIndex,
    c: HarmonicIndex,
) -> Result<C64> {
    spec.require_two_sphere()?;
    for h in [a, b, c] {
        h.validate()?;
    }
    let k_top = a.k.max(b.k).max(c.k);
    let table = HarmonicTable::new(k_top, a.k + b.k + c.k);
    let (ia, ib, ic) = (a.flat(), b.flat(), c.flat());
    let mut acc = C64::new(0.0, 0.0);
    for (g, w) in table.grid.weights.iter().enumerate() {
        acc += table.values[(g, ia)] * table.values[(g, ib)] * table.values[(g, ic)].conj() * w;
    }
    Ok(acc)
}

/// Multiplication by `V(φ,x)` on the harmonics with `k <= K_max`, Fourier
/// modes with `|l| <= L_max`. Entry `((k,m),(k',m'))` of mode `l` is
/// `∫ V_l Y_{k',m'} conj(Y_{k,m})`.
pub fn assemble_multiplication(
    v: &PotentialSpec,
    spec: &SphereSpec,
    l_max: usize,
) -> Result<BlockOperator> {
    spec.require_two_sphere()?;
    v.check_reality(1e-12)?;
    let layout = BlockLayout::new(spec.n, spec.k_max)?;
    let mut op = BlockOperator::zeros(layout, v.d(), l_max);
    if v.is_empty() {
        return Ok(op);
    }
    let k_pot = v.k_pot();
    let table = HarmonicTable::new(spec.k_max.max(k_pot), k_pot + 2 * spec.k_max);
    let nb = op.size();
    let g = table.grid.len();
    let basis = table.values.columns(0, nb).into_owned();
    let basis_h = basis.adjoint();
    for (l, terms) in v.by_mode() {
        if !op.contains_mode(&l) {
            continue;
        }
        // weighted values w_g V_l(x_g) times each basis column
        let mut weighted = basis.clone();
        for gi in 0..g {
            let mut f = C64::new(0.0, 0.0);
            for (k, m, c) in &terms {
                f += c * table.values[(gi, HarmonicIndex { k: *k, m: *m }.flat())];
            }
            let scale = f * table.grid.weights[gi];
            for j in 0..nb {
                weighted[(gi, j)] *= scale;
            }
        }
        let mut block = CMatrix::zeros(nb, nb);
        gemm_scaled(&mut block, ONE, &basis_h, &weighted, ZERO);
        op.insert_mode(&l, block)?;
    }
    Ok(op)
}

/// `(-i∂_ϑ)^α` in the complex basis: diagonal entry `sign(m)|m|^α`.
pub fn assemble_angular_power(
    alpha: f64,
    spec: &SphereSpec,
    d: usize,
    l_max: usize,
) -> Result<BlockOperator> {
    spec.require_two_sphere()?;
    if !(0.0..0.5).contains(&alpha) {
        return Err(Error::param(
            "alpha",
            format!("{alpha} is outside [0, 1/2)"),
        ));
    }
    let layout = BlockLayout::new(spec.n, spec.k_max)?;
    Ok(BlockOperator::diagonal_from_fn(layout, d, l_max, |i| {
        let m = HarmonicIndex::from_flat(i).m;
        let v = if m == 0 {
            0.0
        } else {
            (m as f64).signum() * (m.unsigned_abs() as f64).powf(alpha)
        };
        C64::new(v, 0.0)
    }))
}

/// Self-adjoint realization `(W A + A W)/2` of `W·(-i∂_ϑ)^α`.
pub fn assemble_unbounded_term(
    w: &PotentialSpec,
    alpha: f64,
    spec: &SphereSpec,
    l_max: usize,
) -> Result<BlockOperator> {
    let wop = assemble_multiplication(w, spec, l_max)?;
    let a = assemble_angular_power(alpha, spec, w.d(), l_max)?;
    let mut out = compose(&wop, &a)?;
    out.add_scaled(&compose(&a, &wop)?, ONE)?;
    out.scale_mut(C64::new(0.5, 0.0));
    Ok(out)
}
