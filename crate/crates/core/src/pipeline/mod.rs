//! Batch pipeline: assemble, regularize, reduce, measure and evolve, with a
//! versioned JSON report and per-stage CSV files and operator dumps.

mod config;
mod golden;
mod selfcheck;

pub use config::{
    EvolutionSettings, MeasureSettings, PotentialFiles, RegularizeSettings, RunConfig, SamplerSpec,
    Stage,
};
pub use golden::{golden_config, golden_potentials, write_golden_files};
pub use selfcheck::{selfcheck, SelfcheckOptions, SelfcheckReport};

use crate::block::{compose, write_dump, BlockOperator};
use crate::error::{Error, Result};
use crate::evolution::{
    conjugacy_defect, default_initial_state, evolve_original, evolve_reduced, norm_band_check,
    NormBandCheck,
};
use crate::kam::{
    convergence_slope, kam_iterate, melnikov_params, unitarity_defect, KamOutcome, NormalForm,
    StepRecord,
};
use crate::linalg::{C64, ONE};
use crate::measure::{estimate_excised_measure, MeasureParams, MeasureReport, SampleOutcome};
use crate::regularization::{regularize, RegularizeDiagnostics};
use crate::spectral::{
    assemble_multiplication, assemble_unbounded_term, PotentialSpec, SphereSpec,
};
use crate::suites::{even_block_norm, CheckResult};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

/// Summary of the reduction for one frequency vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReductionSummary {
    pub outcome: KamOutcome,
    pub eps0: f64,
    pub steps: Vec<StepRecord>,
    pub eps_sequence: Vec<f64>,
    /// Slope of `log(-log(ε_k/ε_0))` against `k`.
    pub convergence_slope: Option<f64>,
    pub fitted_step_constant: Option<f64>,
    /// `max_φ ‖Φ*Φ - Id‖` of the product of all step transformations.
    pub transform_unitarity: f64,
    /// `μ_{k,j}` of the final normal form.
    pub eigenvalues: Vec<Vec<f64>>,
    /// `max_{k,j} |μ_{k,j}|⟨k⟩^β / (εγ)`.
    pub eigenvalue_constant: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionSummary {
    pub t_end: f64,
    pub original: NormBandCheck,
    /// `max_t |‖v(t)‖_{H^{s'}}/‖v(0)‖_{H^{s'}} - 1|` in the reduced frame.
    pub reduced_deviation: f64,
    /// `max_t |‖u(t)‖_{L²} - ‖u_0‖_{L²}|`.
    pub l2_drift: f64,
    /// `max_t ‖Ψ(ωt)u(t) - v(t)‖_{L²}`.
    pub conjugacy_defect: f64,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmegaReport {
    pub index: usize,
    pub omega: Vec<f64>,
    pub regularization: Option<RegularizeDiagnostics>,
    pub reduction: Option<ReductionSummary>,
    pub evolution: Option<EvolutionSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSummary {
    pub v_terms: usize,
    pub w_terms: usize,
    pub odd: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureSummary {
    /// Where the normal form used for the scan came from.
    pub normal_form_source: String,
    pub report: MeasureReport,
}

/// Deterministic content of `report.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: RunConfig,
    pub stages: Vec<Stage>,
    pub potentials: Option<PotentialSummary>,
    pub omegas: Vec<OmegaReport>,
    pub measure: Option<MeasureSummary>,
    pub checks: Vec<CheckResult>,
    pub all_pass: bool,
    pub files: Vec<String>,
}

/// On-disk layout of `report.json`; only `generated_at` varies between
/// identical runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub schema_version: u32,
    pub generated_at: String,
    pub report: Report,
}

impl ReportFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: ReportFile = serde_json::from_str(&text)?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(Error::Config {
                field: "schema_version".into(),
                reason: format!(
                    "report has version {}, expected {SCHEMA_VERSION}",
                    file.schema_version
                ),
            });
        }
        Ok(file)
    }
}

/// Everything a run produced, kept in memory for callers that need more than
/// the report.
#[derive(Debug)]
pub struct PipelineOutput {
    pub report: Report,
    pub report_path: PathBuf,
    pub perturbation: Option<BlockOperator>,
    pub normal_forms: Vec<Option<NormalForm>>,
}

/// Loads the configured potentials; a missing file means zero.
pub fn load_potentials(cfg: &RunConfig) -> Result<(PotentialSpec, PotentialSpec)> {
    let d = cfg.kam.d;
    let load = |p: &Option<PathBuf>| -> Result<PotentialSpec> {
        let spec = match p {
            Some(path) => PotentialSpec::load(path, Some(d))?,
            None => PotentialSpec::new(d)?,
        };
        spec.check_reality(1e-12)?;
        Ok(spec)
    };
    Ok((load(&cfg.potentials.v)?, load(&cfg.potentials.w)?))
}

/// `R = iε(V + ½(W(-i∂_φ)^α + (-i∂_φ)^α W))` on the truncated space.
pub fn assemble_perturbation(
    cfg: &RunConfig,
    v: &PotentialSpec,
    w: &PotentialSpec,
) -> Result<BlockOperator> {
    let spec = SphereSpec::two_sphere(cfg.kam.k_max);
    if cfg.kam.n != 2 {
        return Err(Error::UnsupportedDimension(cfg.kam.n));
    }
    let mut p = assemble_multiplication(v, &spec, cfg.kam.l_max)?;
    p.add_scaled(
        &assemble_unbounded_term(w, cfg.kam.alpha, &spec, cfg.kam.l_max)?,
        ONE,
    )?;
    Ok(p.scale(C64::new(0.0, cfg.kam.epsilon)))
}

struct OmegaArtifacts {
    report: OmegaReport,
    checks: Vec<CheckResult>,
    normal_form: Option<NormalForm>,
    files: Vec<(String, String)>,
}

fn run_omega(
    cfg: &RunConfig,
    stages: &[Stage],
    r: &BlockOperator,
    index: usize,
    omega: Vec<f64>,
) -> Result<OmegaArtifacts> {
    let tag = format!("omega {index}");
    let mut out = OmegaArtifacts {
        report: OmegaReport {
            index,
            omega: omega.clone(),
            regularization: None,
            reduction: None,
            evolution: None,
        },
        checks: Vec::new(),
        normal_form: None,
        files: Vec::new(),
    };
    if !stages.contains(&Stage::Regularize) {
        return Ok(out);
    }
    let zero = BlockOperator::zeros(r.layout().clone(), r.d(), r.l_max());
    let reg = regularize(&omega, r, &zero, &cfg.regularize_params())
        .map_err(|e| e.in_stage("regularize"))?;
    let diag = &reg.diagnostics;
    out.checks.push(CheckResult::at_most(
        "regularize",
        &format!("generator identity ({tag})"),
        diag.generator_residual,
        1e-12,
    ));
    out.checks.push(CheckResult {
        pass: diag.interior_pass,
        ..CheckResult::at_most(
            "regularize",
            &format!("conjugation on the interior window ({tag})"),
            diag.interior_defect,
            cfg.regularize.interior_tol,
        )
    });
    out.report.regularization = Some(diag.clone());
    let z0 = NormalForm::from_operator(&reg.z, 1e-12).map_err(|e| e.in_stage("regularize"))?;
    out.normal_form = Some(z0.clone());
    if !stages.contains(&Stage::Reduce) {
        return Ok(out);
    }

    let kam = kam_iterate(&omega, &z0, &reg.m, &cfg.kam).map_err(|e| e.in_stage("reduce"))?;
    let eps_sequence = kam.history.eps_sequence();
    let gamma_eps = cfg.kam.gamma * cfg.kam.epsilon;
    let weighted = kam.z_inf.weighted_eigenvalue_max(cfg.kam.beta());
    let summary = ReductionSummary {
        outcome: kam.outcome.clone(),
        eps0: kam.history.eps0,
        steps: kam.history.steps.clone(),
        convergence_slope: convergence_slope(&eps_sequence),
        eps_sequence,
        fitted_step_constant: kam.history.fitted_step_constant(),
        transform_unitarity: unitarity_defect(&kam.phi_total, 4),
        eigenvalues: kam.z_inf.all_eigenvalues(),
        eigenvalue_constant: if gamma_eps > 0.0 {
            weighted / gamma_eps
        } else {
            0.0
        },
    };
    let residual = summary.steps.iter().map(|s| s.residual).fold(0.0, f64::max);
    out.checks.push(CheckResult::at_most(
        "reduce",
        &format!("homological residual ({tag})"),
        residual,
        1e-10,
    ));
    out.checks.push(CheckResult::at_most(
        "reduce",
        &format!("unitarity of the total transformation ({tag})"),
        summary.transform_unitarity,
        1e-8,
    ));
    out.checks.push(CheckResult {
        pass: !matches!(kam.outcome, KamOutcome::NotConverged { .. }),
        ..CheckResult::at_most(
            "reduce",
            &format!("iteration reached tolerance or excised ({tag})"),
            *summary.eps_sequence.last().unwrap_or(&0.0),
            cfg.kam.stop_tol,
        )
    });
    let converged = kam.is_converged();
    out.files.push((
        format!("omega{index}_normal_form.txt"),
        write_dump(&kam.z_inf.to_operator(r.d(), r.l_max())),
    ));
    out.report.reduction = Some(summary);
    out.normal_form = Some(kam.z_inf.clone());
    if !stages.contains(&Stage::Evolve) || !converged {
        return Ok(out);
    }

    let psi = compose(&kam.phi_total, &reg.t).map_err(|e| e.in_stage("evolve"))?;
    let u0 = default_initial_state(r.layout());
    let params = cfg.evolution_params();
    let run = evolve_original(&u0, &omega, r, &params).map_err(|e| e.in_stage("evolve"))?;
    let v0 = psi.evaluate(&vec![0.0; omega.len()]) * &u0;
    let reduced = evolve_reduced(&v0, &kam.z_inf, &params).map_err(|e| e.in_stage("evolve"))?;
    let band = norm_band_check(&run, cfg.kam.epsilon).map_err(|e| e.in_stage("evolve"))?;
    let red_dev = norm_band_check(&reduced, cfg.kam.epsilon)
        .map_err(|e| e.in_stage("evolve"))?
        .deviation;
    let conj =
        conjugacy_defect(&run, &omega, &psi, &kam.z_inf).map_err(|e| e.in_stage("evolve"))?;
    let l0 = run.l2[0];
    let evo = EvolutionSummary {
        t_end: params.t_end,
        original: band.clone(),
        reduced_deviation: red_dev,
        l2_drift: run.l2.iter().map(|x| (x - l0).abs()).fold(0.0, f64::max),
        conjugacy_defect: conj,
        steps_accepted: run.steps_accepted,
        steps_rejected: run.steps_rejected,
    };
    out.checks.push(CheckResult::at_most(
        "evolve",
        &format!("flow conjugacy ({tag})"),
        conj,
        1e-6,
    ));
    out.checks.push(CheckResult::at_most(
        "evolve",
        &format!("reduced flow conserves block norms ({tag})"),
        red_dev,
        1e-12,
    ));
    out.checks.push(CheckResult::at_most(
        "evolve",
        &format!("L2 conservation ({tag})"),
        evo.l2_drift,
        1e-8,
    ));
    out.checks.push(CheckResult {
        pass: band.pass,
        ..CheckResult::at_most(
            "evolve",
            &format!("Sobolev norm band is nondegenerate ({tag})"),
            band.deviation,
            1.0,
        )
    });
    out.files
        .push((format!("omega{index}_original.csv"), run.to_csv()));
    out.files
        .push((format!("omega{index}_reduced.csv"), reduced.to_csv()));
    out.report.evolution = Some(evo);
    Ok(out)
}

fn samples_csv(samples: &[SampleOutcome], d: usize) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (1..=d).map(|i| format!("omega_{i}")).collect();
    header.extend(
        [
            "excised", "margin", "l", "k", "k_prime", "j", "j_prime", "divisor",
        ]
        .map(String::from),
    );
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(&header).map_err(io)?;
    for s in samples {
        let mut row: Vec<String> = s.omega.iter().map(|x| x.to_string()).collect();
        row.push(s.excised.to_string());
        row.push(format!("{:e}", s.margin));
        match &s.worst {
            Some(r) => {
                let l: Vec<String> = r.l.iter().map(|x| x.to_string()).collect();
                row.push(l.join(" "));
                row.extend([r.k, r.k_prime, r.j, r.j_prime].map(|x| x.to_string()));
                row.push(format!("{:e}", r.divisor));
            }
            None => row.extend(std::iter::repeat_n(String::new(), 6)),
        }
        w.write_record(&row).map_err(io)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Runs the selected stages (plus the stages they need) and writes
/// `report.json`, CSV files and operator dumps into `out_dir`.
pub fn run_pipeline(cfg: &RunConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    let stages = cfg.resolved_stages();
    let mut checks = Vec::new();
    let mut files: Vec<(String, String)> = Vec::new();
    let mut potentials = None;
    let mut perturbation = None;

    if stages.contains(&Stage::Assemble) {
        let (v, w) = load_potentials(cfg).map_err(|e| e.in_stage("assemble"))?;
        let r = assemble_perturbation(cfg, &v, &w).map_err(|e| e.in_stage("assemble"))?;
        let odd = v.is_odd() && w.is_odd();
        if odd {
            checks.push(CheckResult::at_most(
                "assemble",
                "parity of odd potentials",
                even_block_norm(&r),
                1e-10,
            ));
        }
        let defect = crate::block::adjoint_defect(&r, -1.0);
        checks.push(CheckResult::at_most(
            "assemble",
            "perturbation is Hamiltonian",
            defect,
            1e-12,
        ));
        potentials = Some(PotentialSummary {
            v_terms: v.len(),
            w_terms: w.len(),
            odd,
        });
        files.push(("perturbation.txt".into(), write_dump(&r)));
        perturbation = Some(r);
    }

    let omegas = cfg.frequencies();
    let per_omega: Vec<OmegaArtifacts> = match &perturbation {
        Some(r) => omegas
            .into_par_iter()
            .enumerate()
            .map(|(i, w)| run_omega(cfg, &stages, r, i, w))
            .collect::<Result<_>>()?,
        None => Vec::new(),
    };
    let mut omega_reports = Vec::new();
    let mut normal_forms = Vec::new();
    for a in per_omega {
        checks.extend(a.checks);
        files.extend(a.files);
        omega_reports.push(a.report);
        normal_forms.push(a.normal_form);
    }

    let mut measure = None;
    if stages.contains(&Stage::Measure) {
        let kept = omega_reports.iter().zip(&normal_forms).find(|(r, nf)| {
            nf.is_some()
                && r.reduction
                    .as_ref()
                    .is_some_and(|s| matches!(s.outcome, KamOutcome::Converged { .. }))
        });
        let layout = crate::block::BlockLayout::new(cfg.kam.n, cfg.kam.k_max)?;
        let (source, nf) = match kept {
            Some((r, nf)) => (
                format!("final normal form of omega {}", r.index),
                nf.clone().unwrap(),
            ),
            None => ("zero normal form".to_string(), NormalForm::zero(layout)),
        };
        let mut params = MeasureParams::new(melnikov_params(&cfg.kam), cfg.measure.k_cut);
        params.samples = cfg.measure.samples;
        params.seed = cfg.seed;
        params.lower = cfg.measure.lower;
        params.localization_safety = cfg.kam.localization_safety;
        let (report, samples) =
            estimate_excised_measure(&nf, cfg.kam.d, &params).map_err(|e| e.in_stage("measure"))?;
        checks.push(CheckResult::at_most(
            "measure",
            "excised tuples lie in the localized region",
            report.unlocalized_count as f64,
            0.0,
        ));
        files.push((
            "measure_samples.csv".into(),
            samples_csv(&samples, cfg.kam.d)?,
        ));
        measure = Some(MeasureSummary {
            normal_form_source: source,
            report,
        });
    }

    std::fs::create_dir_all(&cfg.out_dir)?;
    for (name, body) in &files {
        std::fs::write(cfg.out_dir.join(name), body)?;
    }
    let all_pass = checks.iter().all(|c| c.pass);
    let report = Report {
        config: cfg.clone(),
        stages,
        potentials,
        omegas: omega_reports,
        measure,
        checks,
        all_pass,
        files: files.into_iter().map(|(n, _)| n).collect(),
    };
    let file = ReportFile {
        schema_version: SCHEMA_VERSION,
        generated_at: chrono::Utc::now().to_rfc3339(),
        report,
    };
    let report_path = cfg.out_dir.join("report.json");
    std::fs::write(&report_path, serde_json::to_string_pretty(&file)?)?;
    Ok(PipelineOutput {
        report: file.report,
        report_path,
        perturbation,
        normal_forms,
    })
}

/// Human-readable summary of a report.
pub fn summarize(report: &Report) -> String {
    let mut out = String::new();
    for o in &report.omegas {
        out.push_str(&format!("omega {} = {:?}\n", o.index, o.omega));
        if let Some(r) = &o.reduction {
            out.push_str(&format!(
                "  outcome: {}\n",
                serde_json::to_string(&r.outcome).unwrap_or_default()
            ));
            out.push_str(&format!("  eps: {:?}\n", r.eps_sequence));
            if let Some(s) = r.convergence_slope {
                out.push_str(&format!("  convergence slope: {s:.4}\n"));
            }
        }
        if let Some(e) = &o.evolution {
            out.push_str(&format!(
                "  evolution to t = {}: C_fit {:.4e}, conjugacy {:.3e}\n",
                e.t_end, e.original.c_fit, e.conjugacy_defect
            ));
        }
    }
    if let Some(m) = &report.measure {
        let r = &m.report;
        out.push_str(&format!(
            "measure at K = {}: excised {}/{} = {:.4e} [{:.4e}, {:.4e}]\n",
            r.k_cut, r.excised_count, r.sampled_count, r.excised_fraction, r.ci_low, r.ci_high
        ));
    }
    for c in &report.checks {
        out.push_str(&c.line());
        out.push('\n');
    }
    out.push_str(if report.all_pass {
        "all checks pass\n"
    } else {
        "some checks FAILED\n"
    });
    out
}
