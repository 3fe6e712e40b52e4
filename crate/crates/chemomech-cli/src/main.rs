//! Command-line driver: single scenario runs, the five-scenario comparison
//! matrix, and the deterministic oracle suite.
//!
//! Exit code 0 means every run finished as expected: completed runs, or
//! aborted runs when the abort was requested via `--expect-abort` (the
//! GSV-elastic scenario is expected to abort inside the matrix). Any other
//! outcome, and any configuration or I/O error, exits nonzero.

use std::path::PathBuf;
use std::process::ExitCode;
use std::thread;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use chemomech::config::load_config;
use chemomech::output::write_outputs;
use chemomech::selfcheck;
use chemomech::{run_scenario, MeshProfile, PlasticityMode, RunOutputs, ScenarioConfig, StrainMode};

#[derive(Parser)]
#[command(name = "chemomech", version, about = "Coupled particle/SEI cycling simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its artifacts under <out>/<run-name>/.
    Run(RunArgs),
    /// Run the five-scenario comparison matrix (gsv-elastic, log-elastic,
    /// log-rate_independent, log-viscoplastic at 1e-3 and 1e-4 1/s)
    /// concurrently.
    Matrix(MatrixArgs),
    /// Run the deterministic oracle and property suite.
    Check(CheckArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario JSON; defaults to the built-in log-elastic scenario.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
    /// Expect the run to abort: exit 0 on abort, nonzero on completion.
    #[arg(long)]
    expect_abort: bool,
}

#[derive(Args)]
struct MatrixArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct CommonArgs {
    /// Output root directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Mesh resolution override.
    #[arg(long, value_enum)]
    profile: Option<Profile>,
}

#[derive(Args)]
struct CheckArgs {
    /// Seed for the randomized oracle states.
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    Ci,
    Paper,
}

impl From<Profile> for MeshProfile {
    fn from(p: Profile) -> Self {
        match p {
            Profile::Ci => MeshProfile::Ci,
            Profile::Paper => MeshProfile::Paper,
        }
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(args) => run_command(args),
        Command::Matrix(args) => matrix_command(args),
        Command::Check(args) => check_command(args),
    }
    .unwrap_or_else(|err| {
        eprintln!("error: {err:#}");
        ExitCode::FAILURE
    })
}

fn run_command(args: RunArgs) -> anyhow::Result<ExitCode> {
    let mut config = match &args.config {
        Some(path) => load_config(path)
            .with_context(|| format!("loading scenario config {}", path.display()))?,
        None => ScenarioConfig::for_modes(StrainMode::Log, PlasticityMode::Elastic),
    };
    if let Some(p) = args.common.profile {
        config.mesh_profile = p.into();
    }
    let run = execute(&config, &args.common.out)?;
    let ok = run.completed != args.expect_abort;
    if !ok && args.expect_abort {
        eprintln!("{}: expected an abort but the run completed", run.name);
    }
    Ok(exit_code(ok))
}

fn matrix_command(args: MatrixArgs) -> anyhow::Result<ExitCode> {
    let handles: Vec<_> = matrix_scenarios(args.common.profile.map(Into::into))
        .into_iter()
        .map(|(config, expect_abort)| {
            let out = args.common.out.clone();
            thread::spawn(move || -> anyhow::Result<bool> {
                let run = execute(&config, &out)?;
                let ok = run.completed != expect_abort;
                if !ok {
                    eprintln!(
                        "{}: expected {}, got {}",
                        run.name,
                        if expect_abort { "an abort" } else { "completion" },
                        if run.completed { "completion" } else { "an abort" },
                    );
                }
                Ok(ok)
            })
        })
        .collect();

    let mut all_ok = true;
    for handle in handles {
        all_ok &= handle.join().map_err(|_| {
            anyhow::anyhow!("a scenario thread panicked; see the output above")
        })??;
    }
    Ok(exit_code(all_ok))
}

fn check_command(args: CheckArgs) -> anyhow::Result<ExitCode> {
    let mut all_ok = true;
    for report in selfcheck::run_all(args.seed) {
        let verdict = if report.passed { "PASS" } else { "FAIL" };
        println!("check {}: {verdict} ({})", report.name, report.details);
        all_ok &= report.passed;
    }
    Ok(exit_code(all_ok))
}

/// The comparison matrix: strain-measure pair plus the three SEI responses,
/// with the viscoplastic scenario at both reference rates. The second tuple
/// element marks runs expected to abort.
fn matrix_scenarios(profile: Option<MeshProfile>) -> Vec<(ScenarioConfig, bool)> {
    let mut scenarios = vec![
        (ScenarioConfig::for_modes(StrainMode::Gsv, PlasticityMode::Elastic), true),
        (ScenarioConfig::for_modes(StrainMode::Log, PlasticityMode::Elastic), false),
        (ScenarioConfig::for_modes(StrainMode::Log, PlasticityMode::RateIndependent), false),
    ];
    for eps_dot0 in [1e-3, 1e-4] {
        let mut config = ScenarioConfig::for_modes(StrainMode::Log, PlasticityMode::Viscoplastic);
        config.material.beta = Some(2.94);
        config.material.eps_dot0_per_s = Some(eps_dot0);
        config.name = Some(format!("log-viscoplastic-{eps_dot0:.0e}"));
        scenarios.push((config, false));
    }
    if let Some(p) = profile {
        for (config, _) in &mut scenarios {
            config.mesh_profile = p;
        }
    }
    scenarios
}

/// Runs one validated scenario, writes its artifacts, and prints a one-line
/// summary.
fn execute(config: &ScenarioConfig, out_root: &std::path::Path) -> anyhow::Result<RunOutputs> {
    config.validate().context("validating scenario config")?;
    let run = run_scenario(config).context("running scenario")?;
    let dir = out_root.join(&run.name);
    write_outputs(&dir, &run)
        .with_context(|| format!("writing artifacts to {}", dir.display()))?;
    let outcome = match &run.abort {
        Some(a) => format!("aborted at t_h {:.4} (reason: {})", a.t_h, a.reason),
        None => "completed".to_string(),
    };
    println!(
        "{}: {outcome}, final SOC {:.4}, {} steps ({} rejected), conservation error {:.2e}, {:.1} s",
        run.name,
        run.final_soc,
        run.stats.accepted,
        run.stats.rejected,
        run.max_conservation_error,
        run.wall_time_s,
    );
    Ok(run)
}

fn exit_code(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
