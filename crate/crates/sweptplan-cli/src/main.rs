//! `sweptplan`: plan collision-free car trajectories, fit swept-volume
//! radius models, query signed distances, and audit gradients.

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use sweptplan_cli::commands::{self, CheckGradArgs, FitSweptArgs, PlanArgs, SdArgs};

#[derive(Parser)]
#[command(
    name = "sweptplan",
    version,
    about = "Trajectory optimization with differentiable collision-avoidance certificates"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve scenarios and write trajectory, audit, plot, and run artifacts.
    Plan(PlanArgs),
    /// Sample swept-volume radii and fit the one-sided polynomial bound.
    FitSwept(FitSweptArgs),
    /// Signed distance between two placed convex shapes.
    Sd(SdArgs),
    /// Compare analytic Jacobians against central differences.
    CheckGrad(CheckGradArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                print!("{e}");
                std::process::exit(commands::EXIT_OK);
            }
            _ => {
                eprint!("{e}");
                std::process::exit(commands::EXIT_CONFIG);
            }
        },
    };
    let code = match &cli.cmd {
        Cmd::Plan(args) => commands::cmd_plan(args),
        Cmd::FitSwept(args) => commands::cmd_fit_swept(args),
        Cmd::Sd(args) => commands::cmd_sd(args),
        Cmd::CheckGrad(args) => commands::cmd_check_grad(args),
    };
    std::process::exit(code);
}
