use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use riskshare_cli::commands::{self, Outcome};
use riskshare_cli::scenario::{Mode, Overrides, Scenario};
use riskshare_cli::CliError;
use riskshare_core::TieRule;

/// Distortion riskmetrics and optimal risk sharing on finite grids.
#[derive(Parser)]
#[command(name = "riskshare", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario JSON document.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Directory for output files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// equal, min or max.
    #[arg(long = "tie-rule", global = true)]
    tie_rule: Option<TieRule>,
    #[arg(long, global = true, value_enum)]
    mode: Option<Mode>,
    /// Allocation CSV, for `improve` and `verify`.
    #[arg(long, global = true)]
    allocation: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Riskmetric of the total for each agent.
    Eval,
    /// Consistency of h_i(1), roles and grid integrality.
    Validate,
    /// Representative distortion and its value.
    Infconv,
    /// Optimal allocation and welfare.
    Allocate,
    /// Comonotonic improvement of --allocation.
    Improve,
    /// Randomized dominance and Pareto checks.
    Verify,
    /// Curve data for distortions, envelopes and transfer functions.
    Plot,
    /// Welfare gap between comonotonic and unconstrained sharing among IQD agents.
    Gap,
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let ov = Overrides {
        seed: cli.seed,
        trials: cli.trials,
        tol: cli.tol,
        tie: cli.tie_rule,
        mode: cli.mode,
    };
    let scenario = cli
        .scenario
        .as_deref()
        .map(|p| Scenario::load(p, &ov))
        .transpose()?;
    let out = cli.out.as_deref();
    if let Command::Improve = cli.command {
        let path = cli
            .allocation
            .as_deref()
            .ok_or_else(|| CliError::Parse("improve needs --allocation".into()))?;
        return commands::improve(scenario.as_ref(), path, out);
    }
    let sc = scenario.ok_or_else(|| CliError::Parse("--scenario is required".into()))?;
    match cli.command {
        Command::Eval => commands::eval(&sc, out),
        Command::Validate => commands::validate(&sc, out),
        Command::Infconv => commands::infconv(&sc, out),
        Command::Allocate => commands::allocate(&sc, out),
        Command::Verify => commands::verify(&sc, cli.allocation.as_deref(), out),
        Command::Plot => commands::plot(&sc, out),
        Command::Gap => commands::gap(&sc, out),
        Command::Improve => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(o) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&o.summary).expect("serializable summary")
            );
            ExitCode::from(o.status as u8)
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
