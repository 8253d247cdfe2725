use super::config::{PotentialFiles, RunConfig, Stage};
use crate::block::{mode_norm, modes_in_ball};
use crate::error::Result;
use crate::kam::KamConfig;
use crate::linalg::C64;
use crate::spectral::PotentialSpec;
use std::path::{Path, PathBuf};

/// Odd potentials of the golden run: degrees 1 and 3, harmonics `|l| <= 2`
/// with amplitude `e^{-|l|/2}`.
pub fn golden_potentials() -> Result<(PotentialSpec, PotentialSpec)> {
    let mut v = PotentialSpec::new(2)?;
    let mut w = PotentialSpec::new(2)?;
    for l in modes_in_ball(2, 2) {
        if !(l[0] > 0 || (l[0] == 0 && l[1] > 0)) {
            continue;
        }
        let a = (-0.5 * mode_norm(&l)).exp();
        let th = 0.7 * l[0] as f64 + 1.3 * l[1] as f64;
        v.add_real_term(&l, 1, (l[0] % 2) as i64, C64::from_polar(0.5 * a, th))?;
        v.add_real_term(&l, 3, (l[1] % 3) as i64, C64::from_polar(0.3 * a, -th))?;
        w.add_real_term(
            &l,
            3,
            -((l[0] + l[1]).rem_euclid(3)) as i64,
            C64::from_polar(0.4 * a, 2.0 * th),
        )?;
        w.add_real_term(&l, 1, 1, C64::from_polar(0.25 * a, th + 0.5))?;
    }
    Ok((v, w))
}

/// Golden run on the two-sphere with `ω = (0.757967, 1.422353)`.
pub fn golden_config(v: Option<PathBuf>, w: Option<PathBuf>, out_dir: PathBuf) -> RunConfig {
    RunConfig {
        kam: KamConfig::golden(),
        potentials: PotentialFiles { v, w },
        omega: vec![vec![0.757967, 1.422353]],
        sampler: None,
        stages: Stage::ALL.to_vec(),
        out_dir,
        seed: 0,
        regularize: Default::default(),
        measure: Default::default(),
        evolution: Default::default(),
    }
}

/// Writes `golden_v.txt`, `golden_w.txt` and `golden.toml` into `dir`.
pub fn write_golden_files(dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let (v, w) = golden_potentials()?;
    std::fs::write(dir.join("golden_v.txt"), v.to_text())?;
    std::fs::write(dir.join("golden_w.txt"), w.to_text())?;
    let cfg = golden_config(
        Some("golden_v.txt".into()),
        Some("golden_w.txt".into()),
        "out".into(),
    );
    let text = toml::to_string(&cfg).map_err(|e| crate::error::Error::Config {
        field: "config".into(),
        reason: e.to_string(),
    })?;
    let path = dir.join("golden.toml");
    std::fs::write(&path, text)?;
    Ok(path)
}
