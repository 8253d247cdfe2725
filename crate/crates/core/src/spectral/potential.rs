//! Finite coefficient lists describing `V(φ, x) = Σ c(l,k,m) e^{i l·φ} Y_k^m(x)`.

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::spectral::{HarmonicIndex, HarmonicTable};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

/// `(l, k, m)`.
pub type PotentialKey = (Vec<i32>, usize, i64);

#[derive(Clone, Debug, PartialEq)]
pub struct PotentialSpec {
    d: usize,
    coefficients: BTreeMap<PotentialKey, C64>,
}

impl PotentialSpec {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::param("d", "need at least one forcing frequency"));
        }
        Ok(PotentialSpec {
            d,
            coefficients: BTreeMap::new(),
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PotentialKey, &C64)> {
        self.coefficients.iter()
    }

    pub fn get(&self, l: &[i32], k: usize, m: i64) -> C64 {
        self.coefficients
            .get(&(l.to_vec(), k, m))
            .copied()
            .unwrap_or_default()
    }

    /// Adds `value` to the coefficient at `(l, k, m)`.
    pub fn add(&mut self, l: &[i32], k: usize, m: i64, value: C64) -> Result<()> {
        if l.len() != self.d {
            return Err(Error::FrequencyCount {
                expected: self.d,
                found: l.len(),
            });
        }
        HarmonicIndex::new(k, m)?;
        *self.coefficients.entry((l.to_vec(), k, m)).or_default() += value;
        Ok(())
    }

    /// Adds `value` at `(l, k, m)` together with the partner term that keeps
    /// the potential real.
    pub fn add_real_term(&mut self, l: &[i32], k: usize, m: i64, value: C64) -> Result<()> {
        let neg: Vec<i32> = l.iter().map(|x| -x).collect();
        if neg == l && m == 0 {
            return self.add(l, k, m, C64::new(value.re, 0.0));
        }
        let sign = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        self.add(l, k, m, value)?;
        self.add(&neg, k, -m, value.conj() * sign)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        PotentialSpec {
            d: self.d,
            coefficients: self
                .coefficients
                .iter()
                .map(|(key, c)| (key.clone(), c * factor))
                .collect(),
        }
    }

    /// Largest harmonic degree present.
    pub fn k_pot(&self) -> usize {
        self.coefficients
            .keys()
            .map(|(_, k, _)| *k)
            .max()
            .unwrap_or(0)
    }

    /// Largest Euclidean norm of a Fourier mode present.
    pub fn l_pot(&self) -> f64 {
        self.coefficients
            .keys()
            .map(|(l, _, _)| mode_norm(l))
            .fold(0.0, f64::max)
    }

    /// Supported on odd harmonic degrees only.
    pub fn is_odd(&self) -> bool {
        self.coefficients
            .iter()
            .all(|((_, k, _), c)| k % 2 == 1 || c.norm() == 0.0)
    }

    /// Checks `c(-l,k,-m) = (-1)^m conj(c(l,k,m))`.
    pub fn check_reality(&self, tol: f64) -> Result<()> {
        let scale = self
            .coefficients
            .values()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
            .max(1.0);
        for ((l, k, m), c) in &self.coefficients {
            let neg: Vec<i32> = l.iter().map(|x| -x).collect();
            let partner = self.get(&neg, *k, -m);
            let sign = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            if (partner - c.conj() * sign).norm() > tol * scale {
                return Err(Error::NonRealPotential {
                    l: l.clone(),
                    k: *k,
                    m: *m,
                });
            }
        }
        Ok(())
    }

    /// Fourier modes present, each with its spatial coefficient list.
    pub fn by_mode(&self) -> BTreeMap<Vec<i32>, Vec<(usize, i64, C64)>> {
        let mut out: BTreeMap<Vec<i32>, Vec<(usize, i64, C64)>> = BTreeMap::new();
        for ((l, k, m), c) in &self.coefficients {
            out.entry(l.clone()).or_default().push((*k, *m, *c));
        }
        out
    }

    /// Pointwise value at the angle vector `phi` and the point `(cos θ, ϑ)`.
    pub fn evaluate(&self, phi: &[f64], cos_theta: f64, azimuth: f64) -> C64 {
        let y = super::harmonics_at(self.k_pot(), cos_theta, azimuth);
        self.coefficients
            .iter()
            .map(|((l, k, m), c)| {
                let arg: f64 = l.iter().zip(phi).map(|(a, b)| *a as f64 * b).sum();
                c * C64::from_polar(1.0, arg) * y[HarmonicIndex { k: *k, m: *m }.flat()]
            })
            .sum()
    }

    /// Coefficients of the pointwise product, obtained by projecting onto the
    /// harmonics of degree up to `k_pot(self) + k_pot(other)`.
    pub fn product(&self, other: &PotentialSpec) -> Result<PotentialSpec> {
        if self.d != other.d {
            return Err(Error::FrequencyCount {
                expected: self.d,
                found: other.d,
            });
        }
        let k_out = self.k_pot() + other.k_pot();
        let table = HarmonicTable::new(k_out, 2 * k_out);
        let eval = |spec: &PotentialSpec| -> BTreeMap<Vec<i32>, Vec<C64>> {
            spec.by_mode()
                .into_iter()
                .map(|(l, terms)| {
                    let vals = (0..table.grid.len())
                        .map(|g| {
                            terms
                                .iter()
                                .map(|(k, m, c)| {
                                    c * table.values[(g, HarmonicIndex { k: *k, m: *m }.flat())]
                                })
                                .sum()
                        })
                        .collect();
                    (l, vals)
                })
                .collect()
        };
        let fa = eval(self);
        let fb = eval(other);
        let mut out = PotentialSpec::new(self.d)?;
        for (la, va) in &fa {
            for (lb, vb) in &fb {
                let l: Vec<i32> = la.iter().zip(lb).map(|(a, b)| a + b).collect();
                for j in 0..table.columns_up_to(k_out) {
                    let mut acc = C64::new(0.0, 0.0);
                    for g in 0..table.grid.len() {
                        acc += va[g] * vb[g] * table.values[(g, j)].conj() * table.grid.weights[g];
                    }
                    if acc.norm() > 1e-15 {
                        let h = HarmonicIndex::from_flat(j);
                        out.add(&l, h.k, h.m, acc)?;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Parses the text format: one `l_1 .. l_d k m re im` record per line,
    /// `#` starts a comment. `d` is inferred when not given.
    pub fn parse(text: &str, d: Option<usize>) -> Result<Self> {
        let mut spec: Option<PotentialSpec> = d.map(PotentialSpec::new).transpose()?;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() < 5 {
                return Err(Error::Parse {
                    line: line_no,
                    reason: format!("expected at least 5 fields, found {}", fields.len()),
                });
            }
            let found_d = fields.len() - 4;
            let spec = spec.get_or_insert(PotentialSpec::new(found_d)?);
            if found_d != spec.d {
                return Err(Error::FrequencyCount {
                    expected: spec.d,
                    found: found_d,
                });
            }
            let bad = |what: &str, tok: &str| Error::Parse {
                line: line_no,
                reason: format!("invalid {what} `{tok}`"),
            };
            let mut l = Vec::with_capacity(found_d);
            for tok in &fields[..found_d] {
                l.push(tok.parse::<i32>().map_err(|_| bad("mode component", tok))?);
            }
            let k: usize = fields[found_d]
                .parse()
                .map_err(|_| bad("degree", fields[found_d]))?;
            let m: i64 = fields[found_d + 1]
                .parse()
                .map_err(|_| bad("order", fields[found_d + 1]))?;
            let re: f64 = fields[found_d + 2]
                .parse()
                .map_err(|_| bad("real part", fields[found_d + 2]))?;
            let im: f64 = fields[found_d + 3]
                .parse()
                .map_err(|_| bad("imaginary part", fields[found_d + 3]))?;
            spec.add(&l, k, m, C64::new(re, im)).map_err(|e| match e {
                Error::InvalidHarmonic { .. } => Error::Parse {
                    line: line_no,
                    reason: e.to_string(),
                },
                other => other,
            })?;
        }
        spec.ok_or(Error::Parse {
            line: 0,
            reason: "no records and no frequency count given".into(),
        })
    }

    pub fn load(path: &Path, d: Option<usize>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, d)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# l_1 .. l_d k m re im\n");
        for ((l, k, m), c) in &self.coefficients {
            for x in l {
                let _ = write!(out, "{x} ");
            }
            let _ = writeln!(out, "{k} {m} {:?} {:?}", c.re, c.im);
        }
        out
    }
}

pub(crate) fn mode_norm(l: &[i32]) -> f64 {
    (l.iter().map(|&x| (x as i64 * x as i64) as f64).sum::<f64>()).sqrt()
}
