use anyhow::{bail, Context, Result};
use clap::{Args, CommandFactory, Parser, Subcommand};
use kamred::pipeline::{
    run_pipeline, selfcheck, summarize, write_golden_files, ReportFile, RunConfig,
    SelfcheckOptions, Stage,
};
use kamred::regularization::Denominator;
use std::path::PathBuf;
use std::process::ExitCode;

/// Reducibility of quasi-periodically forced Schrödinger operators on spheres.
///
/// Physics parameters live in the TOML run config; flags only pick stages and
/// paths.
#[derive(Parser)]
#[command(name = "kamred", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration (TOML).
    config: PathBuf,
    /// Override the output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble the truncated perturbation and dump it.
    Assemble(RunArgs),
    /// Remove the unbounded part of the perturbation.
    Regularize(RunArgs),
    /// Run the KAM iteration to normal form.
    Reduce(RunArgs),
    /// Estimate the excised frequency measure by Monte Carlo.
    Measure(RunArgs),
    /// Integrate the original and reduced flows.
    Evolve(RunArgs),
    /// Run the stages listed in the config.
    Run(RunArgs),
    /// Run the invariant suites at small truncation.
    Selfcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Use a wrong sign in the regularizing generator; the check must fail.
        #[arg(long)]
        inject_sign_error: bool,
    },
    /// Print a summary of a report.json.
    Report { path: PathBuf },
    /// Write the golden run config and potential files into a directory.
    Golden { dir: PathBuf },
}

fn load(args: &RunArgs, stage: Option<Stage>) -> Result<Option<RunConfig>> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    if text.trim().is_empty() {
        return Ok(None);
    }
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(dir) = &args.out_dir {
        cfg.out_dir = dir.clone();
    }
    if let Some(s) = stage {
        cfg.stages = vec![s];
    }
    Ok(Some(cfg))
}

fn run(args: &RunArgs, stage: Option<Stage>) -> Result<ExitCode> {
    let Some(cfg) = load(args, stage)? else {
        Cli::command().print_help()?;
        return Ok(ExitCode::from(2));
    };
    let out = run_pipeline(&cfg)?;
    print!("{}", summarize(&out.report));
    println!("report written to {}", out.report_path.display());
    Ok(if out.report.all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Assemble(a) => run(&a, Some(Stage::Assemble)),
        Command::Regularize(a) => run(&a, Some(Stage::Regularize)),
        Command::Reduce(a) => run(&a, Some(Stage::Reduce)),
        Command::Measure(a) => run(&a, Some(Stage::Measure)),
        Command::Evolve(a) => run(&a, Some(Stage::Evolve)),
        Command::Run(a) => run(&a, None),
        Command::Selfcheck {
            seed,
            inject_sign_error,
        } => {
            let report = selfcheck(SelfcheckOptions {
                seed,
                denominator: if inject_sign_error {
                    Denominator::Flipped
                } else {
                    Denominator::Standard
                },
            })?;
            print!("{}", report.matrix());
            Ok(if report.all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Report { path } => {
            let file = ReportFile::load(&path)?;
            println!(
                "schema {} generated {}",
                file.schema_version, file.generated_at
            );
            print!("{}", summarize(&file.report));
            Ok(ExitCode::SUCCESS)
        }
        Command::Golden { dir } => {
            if dir.join("golden.toml").exists() {
                bail!("{} already holds a golden.toml", dir.display());
            }
            let path = write_golden_files(&dir)?;
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
