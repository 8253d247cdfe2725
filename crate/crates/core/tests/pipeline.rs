use kamred::kam::{Excision, KamOutcome};
use kamred::pipeline::{
    golden_config, golden_potentials, run_pipeline, ReportFile, RunConfig, Stage,
};
use kamred::PotentialSpec;
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Deserialize)]
struct Frozen {
    omega: Vec<f64>,
    steps: usize,
    eps_sequence: Vec<f64>,
    convergence_slope: f64,
    eigenvalue_constant: f64,
    eigenvalues: Vec<Vec<f64>>,
    c_fit_t10: f64,
    regularized_z_norm: f64,
    regularized_m_norm: f64,
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + abs
}

fn small(out: &Path) -> RunConfig {
    let mut cfg = golden_config(
        Some(configs().join("golden_v.txt")),
        Some(configs().join("golden_w.txt")),
        out.into(),
    );
    cfg.kam.k_max = 3;
    cfg.stages = vec![Stage::Reduce];
    cfg
}

#[test]
fn golden_run_matches_frozen_values() {
    let frozen: Frozen =
        serde_json::from_str(include_str!("fixtures/golden_run.json")).expect("fixture parses");
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::load(&configs().join("golden.toml")).unwrap();
    let cfg = RunConfig {
        stages: vec![Stage::Evolve],
        out_dir: dir.path().into(),
        ..cfg
    };
    let out = run_pipeline(&cfg).unwrap();
    assert!(out.report.all_pass, "{:#?}", out.report.checks);
    let omega = &out.report.omegas[0];
    assert_eq!(omega.omega, frozen.omega);

    let reg = omega.regularization.as_ref().unwrap();
    assert!(close(reg.z_norm, frozen.regularized_z_norm, 1e-8, 1e-18));
    assert!(close(reg.m_norm, frozen.regularized_m_norm, 1e-8, 0.0));

    let red = omega.reduction.as_ref().unwrap();
    assert_eq!(
        red.outcome,
        KamOutcome::Converged {
            steps: frozen.steps
        }
    );
    assert_eq!(red.eps_sequence.len(), frozen.eps_sequence.len());
    for (a, b) in red.eps_sequence.iter().zip(&frozen.eps_sequence) {
        assert!(close(*a, *b, 1e-6, 1e-30), "eps {a} vs {b}");
    }
    assert!(close(
        red.convergence_slope.unwrap(),
        frozen.convergence_slope,
        1e-6,
        0.0
    ));
    assert!(close(
        red.eigenvalue_constant,
        frozen.eigenvalue_constant,
        1e-6,
        0.0
    ));
    for (ks, fs) in red.eigenvalues.iter().zip(&frozen.eigenvalues) {
        for (a, b) in ks.iter().zip(fs) {
            assert!(close(*a, *b, 1e-6, 1e-15), "eigenvalue {a} vs {b}");
        }
    }

    let evo = omega.evolution.as_ref().unwrap();
    assert!(close(evo.original.c_fit, frozen.c_fit_t10, 1e-6, 0.0));
    assert!(evo.conjugacy_defect < 1e-9);
}

#[test]
fn shipped_potential_files_match_the_golden_potentials() {
    let (v, w) = golden_potentials().unwrap();
    assert_eq!(
        PotentialSpec::load(&configs().join("golden_v.txt"), Some(2)).unwrap(),
        v
    );
    assert_eq!(
        PotentialSpec::load(&configs().join("golden_w.txt"), Some(2)).unwrap(),
        w
    );
    assert!(v.is_odd() && w.is_odd());
}

#[test]
fn zero_potentials_give_a_trivial_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = golden_config(None, None, dir.path().into());
    cfg.kam.k_max = 3;
    cfg.kam.l_max = 2;
    cfg.stages = vec![Stage::Evolve];
    cfg.evolution.t_end = 2.0;
    let out = run_pipeline(&cfg).unwrap();
    assert!(out.report.all_pass, "{:#?}", out.report.checks);
    let omega = &out.report.omegas[0];
    let red = omega.reduction.as_ref().unwrap();
    assert!(red.eps_sequence.iter().all(|&e| e == 0.0));
    assert!(red.eigenvalues.iter().flatten().all(|&mu| mu == 0.0));
    let evo = omega.evolution.as_ref().unwrap();
    assert!(evo.original.deviation < 1e-12);
    assert!(evo.conjugacy_defect < 1e-12);
}

#[test]
fn invalid_tau_is_rejected_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.kam.tau = 1.0;
    let err = run_pipeline(&cfg).unwrap_err().to_string();
    assert!(err.contains("tau"), "{err}");
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn unknown_config_keys_are_rejected() {
    let text = std::fs::read_to_string(configs().join("golden.toml")).unwrap();
    let err = RunConfig::parse(&format!("colour = 3\n{text}"))
        .unwrap_err()
        .to_string();
    assert!(err.contains("colour"), "{err}");
}

#[test]
fn reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let read = || {
        let out = run_pipeline(&cfg).unwrap();
        let mut json: serde_json::Value =
            serde_json::from_slice(&std::fs::read(out.report_path).unwrap()).unwrap();
        json.as_object_mut().unwrap().remove("generated_at");
        serde_json::to_string(&json).unwrap()
    };
    assert_eq!(read(), read());
    let file = ReportFile::load(&dir.path().join("report.json")).unwrap();
    assert_eq!(file.schema_version, kamred::pipeline::SCHEMA_VERSION);
}

#[test]
fn resonant_frequency_is_excised_with_its_resonance() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.omega = vec![vec![1.0, 1.0]];
    let out = run_pipeline(&cfg).unwrap();
    let red = out.report.omegas[0].reduction.as_ref().unwrap();
    match &red.outcome {
        KamOutcome::Excised {
            step: 0,
            excision: Excision::Diophantine { mode, margin },
        } => {
            assert_eq!(mode[0], -mode[1]);
            assert!(*margin < 0.0);
        }
        other => panic!("expected a Diophantine excision, got {other:?}"),
    }
}

#[test]
fn requested_stage_pulls_in_its_dependencies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let out = run_pipeline(&cfg).unwrap();
    assert_eq!(
        out.report.stages,
        vec![Stage::Assemble, Stage::Regularize, Stage::Reduce]
    );
    for name in ["report.json", "perturbation.txt", "omega0_normal_form.txt"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
}
