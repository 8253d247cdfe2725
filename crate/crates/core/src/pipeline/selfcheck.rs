use super::golden::golden_potentials;
use crate::block::{BlockLayout, BlockOperator};
use crate::error::Result;
use crate::evolution::{evolve_original, hamiltonian_generator, EvolutionParams};
use crate::kam::{kam_iterate, KamConfig, MelnikovParams, NormalForm};
use crate::linalg::{C64, ONE};
use crate::measure::{sublevel_check, uniform_grid, SublevelVerdict};
use crate::regularization::{regularize_with, Denominator, RegularizeParams};
use crate::spectral::{assemble_multiplication, assemble_unbounded_term, SphereSpec};
use crate::suites::{
    dense_oracle, even_block_norm, generator_identity, homological_suite, norm_inequality_suite,
    separation_violations, CheckResult,
};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default)]
pub struct SelfcheckOptions {
    pub seed: u64,
    /// Sign convention of the regularizing generator; `Flipped` is a
    /// deliberately wrong variant that must make the suite fail.
    pub denominator: Denominator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelfcheckReport {
    pub checks: Vec<CheckResult>,
    pub all_pass: bool,
}

impl SelfcheckReport {
    pub fn matrix(&self) -> String {
        let width = self
            .checks
            .iter()
            .map(|c| c.suite.len() + c.name.len() + 1)
            .max()
            .unwrap_or(0);
        let mut out = String::new();
        for c in &self.checks {
            let label = format!("{}/{}", c.suite, c.name);
            out.push_str(&format!(
                "{label:<width$}  {}  {:.3e} <= {:.3e}\n",
                if c.pass { "pass" } else { "FAIL" },
                c.value,
                c.bound
            ));
        }
        out
    }
}

/// Runs every module's invariant suite at small truncation.
pub fn selfcheck(opts: SelfcheckOptions) -> Result<SelfcheckReport> {
    let seed = opts.seed;
    let mut checks = Vec::new();

    checks.push(CheckResult::at_most(
        "spectral",
        "eigenvalue separation up to degree 64",
        separation_violations(2, 64) as f64,
        0.0,
    ));
    let (v, w) = golden_potentials()?;
    let spec = SphereSpec::two_sphere(4);
    let mut p = assemble_multiplication(&v, &spec, 4)?;
    p.add_scaled(&assemble_unbounded_term(&w, 0.3, &spec, 4)?, ONE)?;
    checks.push(CheckResult::at_most(
        "spectral",
        "odd potentials vanish on even blocks",
        even_block_norm(&p),
        1e-10,
    ));

    let [e_compose, e_comm, e_exact, e_trunc] = dense_oracle(seed, 3, 2)?;
    checks.push(CheckResult::at_most(
        "block",
        "composition matches dense products",
        e_compose,
        1e-10,
    ));
    checks.push(CheckResult::at_most(
        "block",
        "commutator matches dense products",
        e_comm,
        1e-10,
    ));
    checks.push(CheckResult::at_most(
        "block",
        "conjugation matches dense exponential",
        e_exact,
        1e-10,
    ));
    checks.push(CheckResult::at_most(
        "block",
        "conjugation matches truncated dense series",
        e_trunc,
        1e-10,
    ));
    checks.extend(norm_inequality_suite([seed, seed + 1], 100, 2.0)?.0);

    checks.push(CheckResult::at_most(
        "regularization",
        "generator identity",
        generator_identity(seed, 10, opts.denominator)?,
        1e-12,
    ));
    let cfg = KamConfig {
        k_max: 4,
        l_max: 4,
        ..KamConfig::golden()
    };
    let r = p.scale(C64::new(0.0, cfg.epsilon));
    let zero = BlockOperator::zeros(r.layout().clone(), 2, 4);
    let params = RegularizeParams {
        s: cfg.s,
        sigma: cfg.sigma,
        alpha: cfg.alpha,
        nu: cfg.nu,
        smallness_bound: 1e9,
        series_tol: cfg.series_tol,
        p_max: cfg.p_max,
        interior_ratio: 0.5,
        interior_tol: 1e-9,
    };
    let omega = [0.757967, 1.422353];
    let reg = regularize_with(&omega, &r, &zero, &params, opts.denominator)?;
    checks.push(CheckResult::at_most(
        "regularization",
        "regularized remainder has no diagonal blocks",
        reg.diagnostics.m_diagonal_max,
        1e-12,
    ));

    let mel = MelnikovParams {
        gamma: 0.05,
        tau: 19.5,
        tau0: 3.0,
        beta: 0.4,
    };
    let hom = homological_suite(seed, 10, &mel)?;
    checks.push(CheckResult::at_most(
        "kam",
        "homological residual",
        hom.worst_residual,
        1e-10,
    ));
    match NormalForm::from_operator(&reg.z, 1e-12)
        .and_then(|z0| kam_iterate(&omega, &z0, &reg.m, &cfg))
    {
        Ok(out) => {
            let last = *out.history.eps_sequence().last().unwrap_or(&f64::INFINITY);
            checks.push(CheckResult {
                pass: out.is_converged() && last < cfg.stop_tol,
                ..CheckResult::at_most("kam", "small golden run converges", last, cfg.stop_tol)
            });
            checks.push(CheckResult::at_most(
                "kam",
                "total transformation is unitary",
                crate::kam::unitarity_defect(&out.phi_total, 4),
                1e-8,
            ));
        }
        Err(_) => checks.push(CheckResult::at_most(
            "kam",
            "small golden run converges",
            f64::INFINITY,
            cfg.stop_tol,
        )),
    }

    let xs = uniform_grid(0.5, 1.5, 2001);
    let f: Vec<f64> = xs.iter().map(|x| x - 1.0).collect();
    let sub = sublevel_check(&xs, &f, 1.0, 0.1)?;
    checks.push(CheckResult {
        pass: sub.verdict == SublevelVerdict::Pass,
        ..CheckResult::at_most(
            "measure",
            "sublevel fraction of a linear function",
            sub.fraction,
            sub.bound,
        )
    });

    let layout = BlockLayout::new(2, 3)?;
    let u0 = crate::evolution::default_initial_state(&layout);
    let x = hamiltonian_generator(
        &crate::suites::random_hamiltonian(&layout, 1, 1, 1.0, &mut crate::suites::rng(seed))
            .scale(C64::new(0.0, 1.0)),
        0.05,
    );
    let run = evolve_original(
        &u0,
        &[1.3],
        &x,
        &EvolutionParams {
            t_end: 5.0,
            sample_dt: 0.5,
            ..Default::default()
        },
    )?;
    let drift = run.l2.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max);
    checks.push(CheckResult::at_most(
        "evolution",
        "L2 norm conserved",
        drift,
        1e-8,
    ));

    let all_pass = checks.iter().all(|c| c.pass);
    Ok(SelfcheckReport { checks, all_pass })
}
