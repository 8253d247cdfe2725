use crate::block::NormParams;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Scalar parameters of the reduction scheme.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KamConfig {
    pub n: usize,
    pub d: usize,
    pub s: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub nu: f64,
    pub gamma: f64,
    pub tau: f64,
    #[serde(default = "default_chi")]
    pub chi: f64,
    #[serde(default = "default_k0")]
    pub k0: usize,
    pub k_max: usize,
    pub l_max: usize,
    pub epsilon: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default = "default_stop_tol")]
    pub stop_tol: f64,
    #[serde(default = "default_series_tol")]
    pub series_tol: f64,
    #[serde(default = "default_p_max")]
    pub p_max: usize,
    /// Largest admissible `γ^{-1}⟨⟨M_0⟩⟩`.
    #[serde(default = "default_theta_star")]
    pub theta_star: f64,
    /// Algebra constant in the generator smallness test; `None` until
    /// calibrated.
    #[serde(default)]
    pub algebra_constant: Option<f64>,
    /// Safety factor on the localization constant of the Melnikov scan.
    #[serde(default = "default_safety")]
    pub localization_safety: f64,
    /// Radius of the Diophantine check for the unperturbed frequencies.
    #[serde(default = "default_g0_radius")]
    pub g0_radius: usize,
}

fn default_chi() -> f64 {
    1.5
}
fn default_k0() -> usize {
    1
}
fn default_max_steps() -> usize {
    6
}
fn default_stop_tol() -> f64 {
    1e-12
}
fn default_series_tol() -> f64 {
    1e-16
}
fn default_p_max() -> usize {
    80
}
fn default_theta_star() -> f64 {
    1.0
}
fn default_safety() -> f64 {
    2.0
}
fn default_g0_radius() -> usize {
    64
}

impl KamConfig {
    /// Golden parameters on the two-sphere with two frequencies.
    pub fn golden() -> Self {
        KamConfig {
            n: 2,
            d: 2,
            s: 2.5,
            sigma: 0.5,
            alpha: 0.3,
            nu: 0.7,
            gamma: 0.05,
            tau: 19.5,
            chi: 1.5,
            k0: 1,
            k_max: 8,
            l_max: 4,
            epsilon: 1e-3,
            max_steps: default_max_steps(),
            stop_tol: default_stop_tol(),
            series_tol: default_series_tol(),
            p_max: default_p_max(),
            theta_star: default_theta_star(),
            algebra_constant: None,
            localization_safety: default_safety(),
            g0_radius: default_g0_radius(),
        }
    }

    /// `β = 1 - 2α`.
    pub fn beta(&self) -> f64 {
        1.0 - 2.0 * self.alpha
    }

    /// `τ_0 = d + 1`.
    pub fn tau0(&self) -> f64 {
        self.d as f64 + 1.0
    }

    /// `d + 2(n-1)τ_0/β + 2`; `τ` must exceed it.
    pub fn tau_lower_bound(&self) -> f64 {
        self.d as f64 + 2.0 * (self.n as f64 - 1.0) * self.tau0() / self.beta() + 2.0
    }

    /// Exponent of `K` in the excised-measure bound.
    pub fn measure_exponent(&self) -> f64 {
        -self.tau + self.d as f64 + 2.0 * (self.n as f64 - 1.0) * self.tau0() / self.beta() + 1.0
    }

    /// `K_k = 4^k K_0`.
    pub fn cutoff(&self, step: usize) -> usize {
        self.k0.saturating_mul(4usize.saturating_pow(step as u32))
    }

    /// Width at the start of the iteration, left after regularization.
    pub fn sigma0(&self) -> f64 {
        0.5 * self.sigma
    }

    /// `σ_{k+1} = (1 - 2^{-k-3}) σ_k`.
    pub fn next_sigma(&self, step: usize, sigma: f64) -> f64 {
        (1.0 - 0.5f64.powi(step as i32 + 3)) * sigma
    }

    pub fn norm_params(&self) -> NormParams {
        NormParams::new(self.s, self.sigma, self.beta(), self.gamma)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: String| {
            Err(Error::Config {
                field: field.to_string(),
                reason,
            })
        };
        if self.n == 0 {
            return bad("n", "sphere dimension must be positive".into());
        }
        if self.d == 0 {
            return bad("d", "at least one forcing frequency is required".into());
        }
        if !(0.0..0.5).contains(&self.alpha) {
            return bad("alpha", format!("{} is outside [0, 1/2)", self.alpha));
        }
        if self.nu < 1.0 - self.alpha - 1e-12 {
            return bad(
                "nu",
                format!("{} is below 1 - alpha = {}", self.nu, 1.0 - self.alpha),
            );
        }
        if !(self.sigma > 0.0) {
            return bad("sigma", "must be positive".into());
        }
        if !(self.gamma > 0.0) {
            return bad("gamma", "must be positive".into());
        }
        let needed = 0.5 * (self.d + self.n) as f64;
        if !(self.s > needed) {
            return bad("s", format!("{} must exceed (d+n)/2 = {needed}", self.s));
        }
        let bound = self.tau_lower_bound();
        if !(self.tau > bound) {
            return bad(
                "tau",
                format!(
                    "{} must exceed d + 2(n-1)tau_0/beta + 2 = {bound}",
                    self.tau
                ),
            );
        }
        if !(self.chi > 1.0 && self.chi < 2.0) {
            return bad("chi", format!("{} is outside (1, 2)", self.chi));
        }
        if self.k0 == 0 {
            return bad("k0", "must be at least 1".into());
        }
        if self.l_max as f64 * self.sigma > 30.0 {
            return bad(
                "l_max",
                format!(
                    "l_max * sigma = {} exceeds 30",
                    self.l_max as f64 * self.sigma
                ),
            );
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon", "must be finite and non-negative".into());
        }
        if self.max_steps == 0 {
            return bad("max_steps", "must be at least 1".into());
        }
        for (field, v) in [("stop_tol", self.stop_tol), ("series_tol", self.series_tol)] {
            if !(v > 0.0) {
                return bad(field, "must be positive".into());
            }
        }
        if !(self.theta_star > 0.0) {
            return bad("theta_star", "must be positive".into());
        }
        if !(self.localization_safety >= 1.0) {
            return bad("localization_safety", "must be at least 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_is_valid() {
        let c = KamConfig::golden();
        c.validate().unwrap();
        assert!((c.beta() - 0.4).abs() < 1e-15);
        assert!((c.tau_lower_bound() - 19.0).abs() < 1e-12);
    }

    #[test]
    fn tau_below_bound_names_tau() {
        let c = KamConfig {
            tau: 18.0,
            ..KamConfig::golden()
        };
        match c.validate() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "tau"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn other_guards() {
        for (c, field) in [
            (
                KamConfig {
                    nu: 0.5,
                    ..KamConfig::golden()
                },
                "nu",
            ),
            (
                KamConfig {
                    chi: 2.0,
                    ..KamConfig::golden()
                },
                "chi",
            ),
            (
                KamConfig {
                    l_max: 100,
                    ..KamConfig::golden()
                },
                "l_max",
            ),
            (
                KamConfig {
                    alpha: 0.5,
                    ..KamConfig::golden()
                },
                "alpha",
            ),
        ] {
            match c.validate() {
                Err(Error::Config { field: f, .. }) => assert_eq!(f, field),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn schedules() {
        let c = KamConfig::golden();
        assert_eq!(c.cutoff(0), 1);
        assert_eq!(c.cutoff(3), 64);
        assert!((c.next_sigma(0, 0.25) - 0.25 * 0.875).abs() < 1e-15);
    }
}
