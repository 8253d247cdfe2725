use crate::error::{Error, Result};
use crate::evolution::EvolutionParams;
use crate::kam::KamConfig;
use crate::regularization::RegularizeParams;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Assemble,
    Regularize,
    Reduce,
    Measure,
    Evolve,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Assemble,
        Stage::Regularize,
        Stage::Reduce,
        Stage::Measure,
        Stage::Evolve,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Assemble => "assemble",
            Stage::Regularize => "regularize",
            Stage::Reduce => "reduce",
            Stage::Measure => "measure",
            Stage::Evolve => "evolve",
        }
    }

    /// Stages whose output this one consumes.
    pub fn requires(self) -> &'static [Stage] {
        match self {
            Stage::Assemble | Stage::Measure => &[],
            Stage::Regularize => &[Stage::Assemble],
            Stage::Reduce => &[Stage::Assemble, Stage::Regularize],
            Stage::Evolve => &[Stage::Assemble, Stage::Regularize, Stage::Reduce],
        }
    }
}

/// Potential files in the `l_1 .. l_d k m re im` text format. A missing
/// entry means the zero potential.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialFiles {
    pub v: Option<PathBuf>,
    pub w: Option<PathBuf>,
}

/// Uniform frequency sampler on `[lower, lower+1]^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSpec {
    pub count: usize,
    #[serde(default = "default_lower")]
    pub lower: f64,
}

fn default_lower() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizeSettings {
    pub smallness_bound: f64,
    pub interior_ratio: f64,
    pub interior_tol: f64,
}

impl Default for RegularizeSettings {
    fn default() -> Self {
        RegularizeSettings {
            smallness_bound: 1e9,
            interior_ratio: 0.5,
            interior_tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSettings {
    pub k_cut: usize,
    pub samples: usize,
    #[serde(default = "default_lower")]
    pub lower: f64,
}

impl Default for MeasureSettings {
    fn default() -> Self {
        MeasureSettings {
            k_cut: 4,
            samples: 20_000,
            lower: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionSettings {
    pub t_end: f64,
    pub sample_dt: f64,
    pub tol: f64,
    pub orders: Vec<f64>,
}

impl Default for EvolutionSettings {
    fn default() -> Self {
        EvolutionSettings {
            t_end: 10.0,
            sample_dt: 0.5,
            tol: 1e-9,
            orders: vec![1.0],
        }
    }
}

/// A complete, self-describing run. Physics parameters come only from here.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub kam: KamConfig,
    #[serde(default)]
    pub potentials: PotentialFiles,
    /// Explicit frequency vectors.
    #[serde(default)]
    pub omega: Vec<Vec<f64>>,
    /// Random frequency vectors, drawn with `seed`.
    #[serde(default)]
    pub sampler: Option<SamplerSpec>,
    #[serde(default = "all_stages")]
    pub stages: Vec<Stage>,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub regularize: RegularizeSettings,
    #[serde(default)]
    pub measure: MeasureSettings,
    #[serde(default)]
    pub evolution: EvolutionSettings,
}

fn all_stages() -> Vec<Stage> {
    Stage::ALL.to_vec()
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn bad(field: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        reason: reason.into(),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| bad(&toml_field(&e), e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config; relative paths are taken from the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.potentials.v, &mut cfg.potentials.w]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if cfg.out_dir.is_relative() {
            cfg.out_dir = base.join(&cfg.out_dir);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.kam.validate()?;
        let d = self.kam.d;
        if self.omega.is_empty() && self.sampler.is_none() {
            return Err(bad("omega", "give explicit frequencies or a sampler"));
        }
        for w in &self.omega {
            if w.len() != d {
                return Err(bad(
                    "omega",
                    format!("vector of length {} but d = {d}", w.len()),
                ));
            }
            if w.iter().any(|x| !x.is_finite()) {
                return Err(bad("omega", "entries must be finite"));
            }
        }
        if let Some(s) = &self.sampler {
            if s.count == 0 {
                return Err(bad("sampler.count", "must be positive"));
            }
        }
        if self.stages.is_empty() {
            return Err(bad("stages", "select at least one stage"));
        }
        let r = &self.regularize;
        if !(r.smallness_bound > 0.0) {
            return Err(bad("regularize.smallness_bound", "must be positive"));
        }
        if !(r.interior_ratio > 0.0 && r.interior_ratio <= 1.0) {
            return Err(bad("regularize.interior_ratio", "must lie in (0, 1]"));
        }
        if !(r.interior_tol > 0.0) {
            return Err(bad("regularize.interior_tol", "must be positive"));
        }
        if self.measure.k_cut == 0 || self.measure.samples == 0 {
            return Err(bad("measure", "k_cut and samples must be positive"));
        }
        let e = &self.evolution;
        if !(e.t_end > 0.0 && e.sample_dt > 0.0 && e.tol > 0.0) {
            return Err(bad(
                "evolution",
                "t_end, sample_dt and tol must be positive",
            ));
        }
        if e.orders.is_empty() {
            return Err(bad("evolution.orders", "record at least one Sobolev order"));
        }
        Ok(())
    }

    /// Selected stages plus the stages they depend on, in pipeline order.
    pub fn resolved_stages(&self) -> Vec<Stage> {
        let mut out: Vec<Stage> = self
            .stages
            .iter()
            .flat_map(|s| s.requires().iter().copied().chain([*s]))
            .collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn frequencies(&self) -> Vec<Vec<f64>> {
        let mut out = self.omega.clone();
        if let Some(s) = &self.sampler {
            out.extend(
                (0..s.count)
                    .map(|i| crate::measure::sample_omega(self.seed, i, self.kam.d, s.lower)),
            );
        }
        out
    }

    pub fn regularize_params(&self) -> RegularizeParams {
        RegularizeParams {
            s: self.kam.s,
            sigma: self.kam.sigma,
            alpha: self.kam.alpha,
            nu: self.kam.nu,
            smallness_bound: self.regularize.smallness_bound,
            series_tol: self.kam.series_tol,
            p_max: self.kam.p_max,
            interior_ratio: self.regularize.interior_ratio,
            interior_tol: self.regularize.interior_tol,
        }
    }

    pub fn evolution_params(&self) -> EvolutionParams {
        EvolutionParams {
            t_end: self.evolution.t_end,
            sample_dt: self.evolution.sample_dt,
            tol: self.evolution.tol,
            orders: self.evolution.orders.clone(),
            ..EvolutionParams::default()
        }
    }
}

/// Best-effort name of the offending key in a TOML error.
fn toml_field(e: &toml::de::Error) -> String {
    let msg = e.message();
    if let Some(start) = msg.find('`') {
        if let Some(len) = msg[start + 1..].find('`') {
            return msg[start + 1..start + 1 + len].to_string();
        }
    }
    "config".into()
}
