//! Complex spherical harmonics with Condon-Shortley phase and the product
//! quadrature used to integrate them.

use crate::linalg::{CMatrix, C64};
use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; q];
    let mut weights = vec![0.0; q];
    for i in 0..q.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(q, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(q, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = x;
        weights[i] = w;
        nodes[q - 1 - i] = -x;
        weights[q - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(q: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if q == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=q {
        let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = q as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Values of every `Y_k^m` with `k <= k_max` at `(cos θ, φ)`, flattened with k
/// ascending and m ascending inside each eigenspace.
pub fn harmonics_at(k_max: usize, cos_theta: f64, phi: f64) -> Vec<C64> {
    let x = cos_theta.clamp(-1.0, 1.0);
    let sin_theta = (1.0 - x * x).max(0.0).sqrt();
    let size = (k_max + 1) * (k_max + 1);
    let mut out = vec![C64::new(0.0, 0.0); size];
    // Normalized associated Legendre values, column m, row k.
    let mut pmm = (1.0 / (4.0 * PI)).sqrt();
    for m in 0..=k_max {
        if m > 0 {
            let ratio = ((2 * m + 1) as f64 / (2 * m) as f64).sqrt();
            pmm *= -ratio * sin_theta;
        }
        let phase = C64::from_polar(1.0, m as f64 * phi);
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        let mut store = |k: usize, value: f64| {
            let y = phase * value;
            out[k * k + k + m] = y;
            if m > 0 {
                out[k * k + k - m] = y.conj() * sign;
            }
        };
        store(m, pmm);
        if m == k_max {
            break;
        }
        let mut prev = pmm;
        let mut cur = x * ((2 * m + 3) as f64).sqrt() * pmm;
        store(m + 1, cur);
        let mut a_prev = ((2 * m + 3) as f64).sqrt();
        for k in (m + 2)..=k_max {
            let kf = k as f64;
            let mf = m as f64;
            let a = ((4.0 * kf * kf - 1.0) / (kf * kf - mf * mf)).sqrt();
            let next = a * (x * cur - prev / a_prev);
            prev = cur;
            cur = next;
            a_prev = a;
            store(k, cur);
        }
    }
    out
}

/// Gauss-Legendre in cos θ times the uniform rule in φ.
#[derive(Clone, Debug)]
pub struct QuadratureGrid {
    pub cos_theta: Vec<f64>,
    pub phi: Vec<f64>,
    /// Weight of each grid point, θ-major.
    pub weights: Vec<f64>,
}

impl QuadratureGrid {
    /// Rule exact for band-limited integrands of total degree `degree`.
    pub fn for_degree(degree: usize) -> Self {
        let q = degree / 2 + 1;
        let n_phi = degree + 1;
        let (x, w) = gauss_legendre(q);
        let phi: Vec<f64> = (0..n_phi)
            .map(|j| 2.0 * PI * j as f64 / n_phi as f64)
            .collect();
        let dphi = 2.0 * PI / n_phi as f64;
        let mut weights = Vec::with_capacity(q * n_phi);
        for wi in &w {
            for _ in 0..n_phi {
                weights.push(wi * dphi);
            }
        }
        QuadratureGrid {
            cos_theta: x,
            phi,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.cos_theta
            .iter()
            .flat_map(move |&x| self.phi.iter().map(move |&p| (x, p)))
    }
}

/// Harmonic values sampled on a quadrature grid: row per grid point, column
/// per flattened harmonic.
#[derive(Clone, Debug)]
pub struct HarmonicTable {
    pub k_max: usize,
    pub grid: QuadratureGrid,
    pub values: CMatrix,
}

impl HarmonicTable {
    pub fn new(k_max: usize, degree: usize) -> Self {
        let grid = QuadratureGrid::for_degree(degree);
        let size = (k_max + 1) * (k_max + 1);
        let mut values = CMatrix::zeros(grid.len(), size);
        for (g, (x, p)) in grid.points().enumerate() {
            for (j, y) in harmonics_at(k_max, x, p).into_iter().enumerate() {
                values[(g, j)] = y;
            }
        }
        HarmonicTable {
            k_max,
            grid,
            values,
        }
    }

    /// Columns for harmonics with `k <= k`.
    pub fn columns_up_to(&self, k: usize) -> usize {
        (k + 1) * (k + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::HarmonicIndex;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(6);
        for p in 0..=11 {
            let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum();
            let expect = if p % 2 == 0 {
                2.0 / (p as f64 + 1.0)
            } else {
                0.0
            };
            assert!((got - expect).abs() < 1e-14, "p={p}");
        }
    }

    #[test]
    fn low_order_closed_forms() {
        let (x, phi) = (0.3_f64, 0.7_f64);
        let y = harmonics_at(2, x, phi);
        let s = (1.0 - x * x).sqrt();
        let c00 = 0.5 / PI.sqrt();
        assert!((y[0] - C64::new(c00, 0.0)).norm() < 1e-14);
        let y10 = 0.5 * (3.0 / PI).sqrt() * x;
        assert!((y[2] - C64::new(y10, 0.0)).norm() < 1e-14);
        let y11 = C64::from_polar(-0.5 * (3.0 / (2.0 * PI)).sqrt() * s, phi);
        assert!((y[3] - y11).norm() < 1e-14);
        assert!((y[1] - C64::from_polar(0.5 * (3.0 / (2.0 * PI)).sqrt() * s, -phi)).norm() < 1e-14);
        let y22 = C64::from_polar(0.25 * (15.0 / (2.0 * PI)).sqrt() * s * s, 2.0 * phi);
        assert!((y[8] - y22).norm() < 1e-14);
    }

    #[test]
    fn orthonormal_on_grid() {
        let k_max = 7;
        let table = HarmonicTable::new(k_max, 2 * k_max);
        let w = &table.grid.weights;
        let n = table.values.ncols();
        for a in 0..n {
            for b in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for g in 0..w.len() {
                    acc += table.values[(g, a)].conj() * table.values[(g, b)] * w[g];
                }
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((acc - expect).norm() < 1e-12, "a={a} b={b}");
            }
        }
    }

    #[test]
    fn parity_pointwise() {
        let k_max = 6;
        let grid = QuadratureGrid::for_degree(9);
        for (x, p) in grid.points() {
            let here = harmonics_at(k_max, x, p);
            let there = harmonics_at(k_max, -x, p + PI);
            for (i, (a, b)) in here.iter().zip(&there).enumerate() {
                let k = HarmonicIndex::from_flat(i).k;
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                assert!((b - a * sign).norm() < 1e-12);
            }
        }
    }
}
