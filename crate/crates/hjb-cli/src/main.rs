//! Command-line driver for the HJB Dirichlet toolkit: eigenpairs, single
//! solves, resonance thresholds, bifurcation diagrams, canned example
//! reproductions and oracle verification.
//!
//! Exit codes: 0 success; 2 solver nonconvergence or inconclusive
//! classification; 3 invalid configuration; 4 a verification/reproduction
//! check failed.

mod commands;
mod examples;
mod out;

use clap::{Parser, Subcommand};
use hjb_core::scenario::Scenario;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "hjb",
    about = "Half-eigenvalues, resonance thresholds and solution branches for HJB Dirichlet problems"
)]
struct Cli {
    /// Scenario file (TOML). Required by every subcommand except
    /// reproduce-example, which carries its own canned scenario.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for reports and tabular artifacts
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Override the scenario seed
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the scenario worker-thread cap
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Multiply all residual tolerances
    #[arg(long, global = true)]
    tol_scale: Option<f64>,

    /// Multiply probe/census budgets
    #[arg(long, global = true)]
    budget_scale: Option<f64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute both principal half-eigenpairs with residual certificates
    Eigen,
    /// One nonlinear solve at the configured lambda
    Solve,
    /// Critical value t* (resonant or interior per the scenario)
    Tstar,
    /// Trace configured branches, run the census grid, emit the diagram
    Branch,
    /// Reproduce a built-in example scenario (1, 2 or 3)
    ReproduceExample {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=3))]
        number: u8,
    },
    /// Oracle cross-check suite (shooting, dense solves, Richardson orders)
    Verify,
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    if let Some(core) = err.downcast_ref::<hjb_core::Error>() {
        use hjb_core::Error as E;
        return match core {
            E::Config { .. }
            | E::InvalidDomain(_)
            | E::InvalidParams(_)
            | E::InvalidCoefficients(_)
            | E::Expr(_)
            | E::GridMismatch(_)
            | E::MonotonicityViolation(_) => 3,
            _ => 2,
        };
    }
    if err.downcast_ref::<std::io::Error>().is_some() {
        return 3;
    }
    2
}

fn load_scenario(cli: &Cli) -> anyhow::Result<Scenario> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| anyhow::Error::new(hjb_core::Error::Config {
            path: "--config".into(),
            msg: "a scenario file is required for this subcommand".into(),
        }))?;
    let text = std::fs::read_to_string(path).map_err(|e| {
        anyhow::Error::new(hjb_core::Error::Config {
            path: path.display().to_string(),
            msg: e.to_string(),
        })
    })?;
    let mut sc = Scenario::from_toml_str(&text)?;
    if let Some(seed) = cli.seed {
        sc.seed = seed;
    }
    if let Some(threads) = cli.threads {
        sc.threads = threads.max(1);
    }
    if let Some(ts) = cli.tol_scale {
        sc.solver.tol_scale = ts;
    }
    if let Some(bs) = cli.budget_scale {
        sc.solver.budget_scale = bs;
    }
    sc.validate()?;
    Ok(sc)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: anyhow::Result<bool> = (|| {
        match &cli.command {
            Command::Eigen => commands::cmd_eigen(&load_scenario(&cli)?, &cli.out).map(|_| true),
            Command::Solve => commands::cmd_solve(&load_scenario(&cli)?, &cli.out),
            Command::Tstar => commands::cmd_tstar(&load_scenario(&cli)?, &cli.out).map(|_| true),
            Command::Branch => commands::cmd_branch(&load_scenario(&cli)?, &cli.out).map(|_| true),
            Command::ReproduceExample { number } => {
                let overrides = examples::Overrides {
                    seed: cli.seed,
                    threads: cli.threads,
                    tol_scale: cli.tol_scale,
                    budget_scale: cli.budget_scale,
                };
                examples::reproduce(*number, &cli.out, &overrides)
            }
            Command::Verify => commands::cmd_verify(&load_scenario(&cli)?, &cli.out),
        }
    })();
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(4),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
