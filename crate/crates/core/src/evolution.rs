//! Time evolution of the truncated forced equation `∂_t u = iD²u - X(ωt)u`
//! and of its reduced autonomous counterpart `∂_t v = i(D² + Z)v`.

use crate::block::{hs_norm, BlockLayout, BlockOperator};
use crate::error::{Error, Result};
use crate::kam::NormalForm;
use crate::linalg::{CMatrix, CVector, C64, I};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

const SQRT3: f64 = 1.732_050_807_568_877_2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Original,
    Reduced,
}

/// Integration settings. `dt` is the first trial step and must satisfy
/// `dt <= 1/λ_{K_max}`; later steps are chosen by step doubling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionParams {
    pub t_end: f64,
    /// Spacing of the recorded samples.
    pub sample_dt: f64,
    pub dt: Option<f64>,
    /// Local error per unit time.
    pub tol: f64,
    /// Largest accepted step; defaults to `1/λ_{K_max}`.
    pub max_step: Option<f64>,
    /// Sobolev orders recorded at every sample.
    pub orders: Vec<f64>,
}

impl Default for EvolutionParams {
    fn default() -> Self {
        EvolutionParams {
            t_end: 10.0,
            sample_dt: 0.1,
            dt: None,
            tol: 1e-9,
            max_step: None,
            orders: vec![1.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionRun {
    pub frame: Frame,
    pub times: Vec<f64>,
    #[serde(skip)]
    pub states: Vec<CVector>,
    pub l2: Vec<f64>,
    pub orders: Vec<f64>,
    /// `norms[i][j]` is `‖u(t_i)‖_{H^{orders[j]}}`.
    pub norms: Vec<Vec<f64>>,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
}

impl EvolutionRun {
    fn new(frame: Frame, orders: &[f64]) -> Self {
        EvolutionRun {
            frame,
            times: Vec::new(),
            states: Vec::new(),
            l2: Vec::new(),
            orders: orders.to_vec(),
            norms: Vec::new(),
            steps_accepted: 0,
            steps_rejected: 0,
        }
    }

    fn record(&mut self, layout: &BlockLayout, t: f64, u: CVector) -> Result<()> {
        if u.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite(t));
        }
        self.times.push(t);
        self.l2.push(u.norm());
        self.norms.push(
            self.orders
                .iter()
                .map(|&s| hs_norm(layout, &u, s))
                .collect(),
        );
        self.states.push(u);
        Ok(())
    }

    /// CSV with columns `t, l2, h^{s'}...`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,l2");
        for s in &self.orders {
            out.push_str(&format!(",h{s}"));
        }
        out.push('\n');
        for (i, t) in self.times.iter().enumerate() {
            out.push_str(&format!("{t},{:e}", self.l2[i]));
            for v in &self.norms[i] {
                out.push_str(&format!(",{v:e}"));
            }
            out.push('\n');
        }
        out
    }
}

fn sample_times(params: &EvolutionParams) -> Result<Vec<f64>> {
    if !(params.t_end > 0.0 && params.sample_dt > 0.0 && params.tol > 0.0) {
        return Err(Error::param(
            "evolution",
            "t_end, sample_dt and tol must be positive",
        ));
    }
    let n = (params.t_end / params.sample_dt).round().max(1.0) as usize;
    Ok((0..=n)
        .map(|i| params.t_end * i as f64 / n as f64)
        .collect())
}

/// Integrates `∂_t u = iD²u - X(ωt)u` for anti-Hermitian `X`.
///
/// Works in the interaction picture `u = e^{iΛt}w`, where
/// `∂_t w = B(t)w` with `B(t) = -e^{-iΛt}X(ωt)e^{iΛt}` is small, and advances
/// `w` with the fourth-order Magnus scheme whose first term is integrated
/// exactly.
pub fn evolve_original(
    u0: &CVector,
    omega: &[f64],
    x: &BlockOperator,
    params: &EvolutionParams,
) -> Result<EvolutionRun> {
    let layout = x.layout().clone();
    let n = layout.total();
    if u0.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "state has length {}, basis has {n}",
            u0.len()
        )));
    }
    if omega.len() != x.d() {
        return Err(Error::FrequencyCount {
            expected: x.d(),
            found: omega.len(),
        });
    }
    let lam_max = layout.lambda(layout.k_max()).max(1.0);
    let bound = 1.0 / lam_max;
    let dt = params.dt.unwrap_or(0.1 / lam_max);
    if dt > bound {
        return Err(Error::Cfl { dt, bound });
    }
    let h_max = params.max_step.unwrap_or(bound);
    let times = sample_times(params)?;
    let sys = Interaction::new(omega, x);
    let mut run = EvolutionRun::new(Frame::Original, &params.orders);

    let mut w = u0.clone();
    let mut t = 0.0;
    let mut h = dt.min(h_max);
    run.record(&layout, 0.0, u0.clone())?;
    for &target in &times[1..] {
        while t < target {
            let last = target - t <= h * (1.0 + 1e-12);
            let step = if last { target - t } else { h };
            let full = sys.step(&w, t, step);
            let half = sys.step(&w, t, 0.5 * step);
            let fine = sys.step(&half, t + 0.5 * step, 0.5 * step);
            let err = (&fine - &full).norm() / 15.0;
            // roundoff floor, so that short steps before a sample time still pass
            let allowed = params.tol * step + 64.0 * f64::EPSILON * w.norm();
            let factor = if err > 0.0 {
                (0.9 * (allowed / err).powf(0.25)).clamp(0.2, 2.0)
            } else {
                2.0
            };
            if err <= allowed {
                // Richardson-corrected value
                w = &fine + (&fine - &full) / C64::new(15.0, 0.0);
                t = if last { target } else { t + step };
                run.steps_accepted += 1;
                if !w.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                    return Err(Error::NonFinite(t));
                }
                if !last {
                    h = (step * factor).min(h_max);
                }
            } else {
                run.steps_rejected += 1;
                h = (step * factor).min(h_max);
                if h < 1e-12 * params.t_end {
                    return Err(Error::param(
                        "tol",
                        format!("step size underflow at t = {t}"),
                    ));
                }
            }
        }
        run.record(&layout, t, sys.to_original(&w, t))?;
    }
    Ok(run)
}

struct Interaction {
    layout: Arc<BlockLayout>,
    modes: Vec<(Vec<i32>, f64, CMatrix)>,
    lambda: Vec<f64>,
}

impl Interaction {
    fn new(omega: &[f64], x: &BlockOperator) -> Self {
        let modes = x
            .modes()
            .iter()
            .map(|(l, m)| {
                let lw: f64 = l.iter().zip(omega).map(|(a, b)| *a as f64 * b).sum();
                (l.clone(), lw, -m.clone())
            })
            .collect();
        Interaction {
            layout: x.layout().clone(),
            modes,
            lambda: x.layout().lambda_flat(),
        }
    }

    /// `B(t)`.
    fn generator(&self, t: f64) -> CMatrix {
        let n = self.lambda.len();
        let mut out = CMatrix::zeros(n, n);
        for (_, lw, m) in &self.modes {
            let ph = C64::from_polar(1.0, lw * t);
            out.zip_apply(m, |o, x| *o += ph * x);
        }
        let phase: Vec<C64> = self
            .lambda
            .iter()
            .map(|&l| C64::from_polar(1.0, l * t))
            .collect();
        for j in 0..n {
            for i in 0..n {
                out[(i, j)] *= phase[j] / phase[i];
            }
        }
        out
    }

    /// `∫_{t0}^{t0+h} B(t) dt`, exactly for each frequency.
    fn integral(&self, t0: f64, h: f64) -> CMatrix {
        let n = self.lambda.len();
        let km = self.layout.k_max();
        let tm = t0 + 0.5 * h;
        let mut out = CMatrix::zeros(n, n);
        for (_, lw, m) in &self.modes {
            for k in 0..=km {
                let rk = self.layout.range(k);
                for kp in 0..=km {
                    let rkp = self.layout.range(kp);
                    let sub = m.view((rk.start, rkp.start), (rk.len(), rkp.len()));
                    if sub.iter().all(|z| *z == C64::new(0.0, 0.0)) {
                        continue;
                    }
                    let nu = lw - self.layout.lambda(k) + self.layout.lambda(kp);
                    let weight = C64::from_polar(h * sinc(0.5 * nu * h), nu * tm);
                    let mut dst = out.view_mut((rk.start, rkp.start), (rk.len(), rkp.len()));
                    dst.zip_apply(&sub, |o, x| *o += weight * x);
                }
            }
        }
        out
    }

    fn step(&self, w: &CVector, t0: f64, h: f64) -> CVector {
        let c = SQRT3 / 6.0;
        let b1 = self.generator(t0 + (0.5 - c) * h);
        let b2 = self.generator(t0 + (0.5 + c) * h);
        let coef = C64::new(-SQRT3 / 12.0 * h * h, 0.0);
        let omega1 = self.integral(t0, h);
        // Ω v = Ω_1 v - (√3/12)h²(B_1 B_2 v - B_2 B_1 v)
        let apply = |v: &CVector| -> CVector {
            let comm = &b1 * (&b2 * v) - &b2 * (&b1 * v);
            &omega1 * v + comm * coef
        };
        expm_apply(apply, w)
    }

    fn to_original(&self, w: &CVector, t: f64) -> CVector {
        CVector::from_fn(w.len(), |i, _| {
            w[i] * C64::from_polar(1.0, self.lambda[i] * t)
        })
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `e^Ω v` by Taylor series with the action `v ↦ Ωv`.
fn expm_apply(apply: impl Fn(&CVector) -> CVector, v: &CVector) -> CVector {
    let mut out = v.clone();
    let mut term = v.clone();
    let scale = v.norm().max(f64::MIN_POSITIVE);
    for p in 1..60 {
        term = apply(&term) / C64::new(p as f64, 0.0);
        out += &term;
        if term.norm() <= 1e-17 * scale {
            break;
        }
    }
    out
}

/// Exact flow `v_{[k]}(t) = e^{it(λ_k + Z_k)} v_{[k]}(0)` sampled on the
/// grid of `params`.
pub fn evolve_reduced(
    v0: &CVector,
    nf: &NormalForm,
    params: &EvolutionParams,
) -> Result<EvolutionRun> {
    let layout = nf.layout().clone();
    if v0.len() != layout.total() {
        return Err(Error::ShapeMismatch(format!(
            "state has length {}, basis has {}",
            v0.len(),
            layout.total()
        )));
    }
    let times = sample_times(params)?;
    let mut run = EvolutionRun::new(Frame::Reduced, &params.orders);
    let coords: Vec<CVector> = (0..=layout.k_max())
        .map(|k| {
            let r = layout.range(k);
            nf.eigenvectors(k).adjoint() * v0.rows(r.start, r.len())
        })
        .collect();
    for &t in &times {
        run.record(&layout, t, reduced_state(nf, &coords, t))?;
    }
    Ok(run)
}

/// State of the reduced flow at time `t`.
pub fn reduced_at(v0: &CVector, nf: &NormalForm, t: f64) -> CVector {
    let layout = nf.layout();
    let coords: Vec<CVector> = (0..=layout.k_max())
        .map(|k| {
            let r = layout.range(k);
            nf.eigenvectors(k).adjoint() * v0.rows(r.start, r.len())
        })
        .collect();
    reduced_state(nf, &coords, t)
}

fn reduced_state(nf: &NormalForm, coords: &[CVector], t: f64) -> CVector {
    let layout = nf.layout();
    let mut out = CVector::zeros(layout.total());
    for k in 0..=layout.k_max() {
        let lam = layout.lambda(k);
        let rotated = CVector::from_fn(coords[k].len(), |j, _| {
            coords[k][j] * C64::from_polar(1.0, t * (lam + nf.eigenvalues(k)[j]))
        });
        let r = layout.range(k);
        out.rows_mut(r.start, r.len())
            .copy_from(&(nf.eigenvectors(k) * rotated));
    }
    out
}

/// Outcome of the norm-band check on one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormBandCheck {
    pub order: f64,
    /// `max_t |‖u(t)‖/‖u_0‖ - 1|`.
    pub deviation: f64,
    /// `deviation / ε`.
    pub c_fit: f64,
    pub pass: bool,
}

/// Maximal relative deviation of `‖u(t)‖_{H^{s'}}` from its initial value
/// for the first recorded order; passes while the band is nondegenerate.
pub fn norm_band_check(run: &EvolutionRun, epsilon: f64) -> Result<NormBandCheck> {
    let order = *run
        .orders
        .first()
        .ok_or_else(|| Error::param("orders", "run recorded no Sobolev order"))?;
    let n0 = run.norms.first().map(|v| v[0]).unwrap_or(0.0);
    if n0 <= 0.0 {
        return Err(Error::param("u0", "initial state has zero norm"));
    }
    let deviation = run
        .norms
        .iter()
        .map(|v| (v[0] / n0 - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(NormBandCheck {
        order,
        deviation,
        c_fit: if epsilon > 0.0 {
            deviation / epsilon
        } else {
            0.0
        },
        pass: deviation < 1.0,
    })
}

/// `max_t ‖Ψ(ωt)u(t) - v(t)‖` where `v` is the reduced flow started at
/// `Ψ(0)u_0`, over the samples of `run`.
pub fn conjugacy_defect(
    run: &EvolutionRun,
    omega: &[f64],
    psi: &BlockOperator,
    nf: &NormalForm,
) -> Result<f64> {
    if run.frame != Frame::Original {
        return Err(Error::param("run", "conjugacy needs an original-frame run"));
    }
    let u0 = run
        .states
        .first()
        .ok_or_else(|| Error::param("run", "empty run"))?;
    let v0 = psi.evaluate(&vec![0.0; omega.len()]) * u0;
    let mut worst: f64 = 0.0;
    for (t, u) in run.times.iter().zip(&run.states) {
        let phi: Vec<f64> = omega.iter().map(|w| w * t).collect();
        let lhs = psi.evaluate(&phi) * u;
        let rhs = reduced_at(&v0, nf, *t);
        worst = worst.max((lhs - rhs).norm());
    }
    Ok(worst)
}

/// Normalized state whose block `k` is `e^{-k}` times a fixed unit pattern.
pub fn default_initial_state(layout: &BlockLayout) -> CVector {
    let mut v = CVector::from_fn(layout.total(), |i, _| {
        let k = layout.block_of(i) as f64;
        C64::from_polar((-k).exp(), 0.3 * i as f64)
    });
    let n = v.norm();
    v /= C64::new(n, 0.0);
    v
}

/// Anti-Hermitian generator `iεP` of a Hermitian perturbation `P`.
pub fn hamiltonian_generator(p: &BlockOperator, epsilon: f64) -> BlockOperator {
    p.scale(I * epsilon)
}
